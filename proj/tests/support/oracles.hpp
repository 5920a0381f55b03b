// Independent oracles used by tests: a schoolbook matmul kept separate from
// the simulator's implementation, an exhaustive schedule enumerator for
// small event systems, and a helper that drives the whole pipeline.
#pragma once

#include <optional>
#include <random>
#include <set>

#include "datoc/dma.hpp"
#include "datoc/layout_opt.hpp"
#include "datoc/parser.hpp"
#include "datoc/sim.hpp"
#include "datoc/typecheck.hpp"
#include "datoc/validate.hpp"
#include "datoc/vmg.hpp"

namespace testutil {

// Triple-loop reference, written independently of datoc::matmul.
datoc::TensorValue schoolbook_matmul(const datoc::TensorValue& a, const datoc::TensorValue& b);

// Whether ANY schedule completes, by exhaustive interleaving over the
// program's event system (intended for <= 12 events).
bool some_schedule_completes(const datoc::Program& p);

std::int64_t total_event_count(const datoc::Program& p);

struct Compiled {
  datoc::Program program;  // awaits inserted
  datoc::LayoutReport layouts;
  datoc::Vmg vmg;  // lowered
};

// Parse/validate/check/insert/build/lower; throws on any failure.
Compiled compile(const datoc::Program& p);

// Same pipeline with the stream checker bypassed (test hook for deadlock
// experiments). Validation and layout checking still run.
Compiled compile_unchecked(const datoc::Program& p);

struct Mapped {
  datoc::PhysicalMapping mapping;
  datoc::DmaSchedule schedule;
};

// Places the lowered graph directly (no search); fabric must fit it.
std::optional<Mapped> map_direct(const Compiled& c, const datoc::FabricConfig& fabric);

// Search + select_best + schedule.
Mapped map_search(const Compiled& c, const datoc::FabricConfig& fabric, int budget,
                  int threshold = 16);

bool outputs_equal(const std::map<std::string, datoc::TensorValue>& a,
                   const std::map<std::string, datoc::TensorValue>& b);

// Random transform chains over small shapes (every step valid).
datoc::TransformChain random_transform_chain(std::mt19937& rng, int max_steps = 5);

// Source addresses of "descriptors then residual".
std::vector<std::int64_t> apply_hoisted_chain(const datoc::HoistResult& h);

// Multiset of (buffer, global element, endpoint unit, direction) a
// transfer list delivers; invariant under the scheduling passes.
std::multiset<std::string> element_multiset(const std::vector<datoc::Transfer>& ts);

}  // namespace testutil
