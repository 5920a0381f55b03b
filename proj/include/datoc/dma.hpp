// Token-based DMA scheduling: epoch grouping from coarse per-segment
// liveness, multicast merging, spatial coalescing, port-aware splitting
// and greedy interval port assignment under fixed per-tile budgets.
#pragma once

#include <optional>

#include "datoc/mapping.hpp"

namespace datoc {

struct Transfer {
  int id = 0;
  std::string buffer;  // external-memory buffer (parameter name)
  Region region;       // global frame (offset, size) per dim
  enum class Dir { In, Out } dir = Dir::In;

  // One delivery endpoint; coalesced transfers carry several.
  struct Endpoint {
    int tile = 0;
    std::string unit;
    Region unit_region;    // tile-relative placement inside the unit buffer
    Region global_region;  // the slice of `region` this endpoint covers
    std::int64_t step = 0;      // shot index of the unit within its node
    int write_seq = -1;         // Out: program-order write this publishes
  };
  std::vector<Endpoint> endpoints;

  int epoch = 0;
  int token = 0;  // replica tag within the epoch (bundle shots)
  std::int64_t elements = 0;

  std::int64_t first_step(int tile) const;
  std::int64_t last_step(int tile) const;
};

struct EpochInfo {
  int index = 0;
  std::vector<std::string> args;  // "unit/param" argument descriptors
  std::vector<int> transfers;
};

struct PortSlot {
  int tile = 0;
  Transfer::Dir dir = Transfer::Dir::In;
  int port = 0;
  int transfer = 0;
  int epoch = 0;
  std::int64_t acquire = 0;
  std::int64_t release = 0;
};

struct PortAssignment {
  std::vector<PortSlot> slots;
};

struct SchedError {
  int tile = 0;
  std::int64_t step = 0;
  std::string message;
};

struct DmaSchedule {
  std::vector<Transfer> transfers;
  std::vector<EpochInfo> epochs;
  PortAssignment ports;
  std::map<std::string, int> unit_level;  // epoch level per unit id
};

struct DmaResult {
  std::optional<DmaSchedule> schedule;
  std::optional<SchedError> error;
  bool ok() const { return schedule.has_value(); }
};

// Epoch layering over (node, stage) segments: chained stages occupy
// successive epochs, buffer write->read dependencies order segments, and
// external stream edges pin segments to a shared epoch. Returns nullopt on
// contradictory constraints (the candidate is infeasible).
std::optional<std::map<std::string, int>> compute_unit_levels(const PhysicalMapping& m);

// Individual passes (exposed for tests); `schedule_dma` composes them.
std::vector<Transfer> collect_transfers(const PhysicalMapping& m,
                                        const std::map<std::string, int>& unit_level);
std::vector<Transfer> merge_multicast(std::vector<Transfer> transfers);
std::vector<Transfer> coalesce_spatial(std::vector<Transfer> transfers);
std::vector<Transfer> split_for_ports(std::vector<Transfer> transfers,
                                      const FabricConfig& fabric);
std::optional<PortAssignment> assign_ports(const std::vector<Transfer>& transfers,
                                           const FabricConfig& fabric, SchedError* err);

DmaResult schedule_dma(const PhysicalMapping& m);

// Sweep validation: per tile/direction/epoch, concurrently held ports never
// exceed the budget. Used by tests and the acceptance suite.
bool verify_port_safety(const DmaSchedule& s, const FabricConfig& fabric,
                        std::string* why = nullptr);

nlohmann::ordered_json schedule_to_json(const DmaSchedule& s);
std::string schedule_gantt(const DmaSchedule& s);

}  // namespace datoc
