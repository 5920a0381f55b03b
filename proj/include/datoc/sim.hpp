// Execution: a dense unmapped reference oracle and a functional /
// cycle-approximate simulation of the mapped fabric with bounded FIFOs and
// port-scheduled DMA.
#pragma once

#include "datoc/dma.hpp"
#include "datoc/kernel.hpp"
#include "datoc/value.hpp"

namespace datoc {

struct CostModel {
  int macs_per_cycle_i4 = 128;
  int macs_per_cycle_i8 = 64;
  int macs_per_cycle_i16 = 32;  // also bf16
  int macs_per_cycle_i32 = 16;  // also f32
  int fifo_elems_per_cycle = 16;
  int dma_elems_per_cycle_per_port = 16;
  int eltwise_elems_per_cycle = 1;  // combine nodes and internal buffers

  std::int64_t macs_per_cycle(ElemKind kind) const;
};

struct SimConfig {
  FabricConfig fabric;
  CostModel cost;
  std::uint64_t scheduler_seed = 0;  // retained for the trace; scheduling is
                                     // deterministic regardless
};

struct TraceEvent {
  std::int64_t cycle = 0;
  int tile = -1;
  std::string kind;
  std::string detail;
};

struct SimTrace {
  std::vector<TraceEvent> events;
  std::int64_t total_cycles = 0;
  std::map<int, std::int64_t> busy_cycles;  // per tile
  std::map<int, std::int64_t> mac_cycles;   // per tile, useful MAC work
  std::map<std::string, std::int64_t> fifo_peak;  // per stream instance
  double utilization = 0.0;
  bool deadlocked = false;
  std::int64_t deadlock_cycle = 0;
  std::vector<std::string> deadlock_waits;  // wait-for cycle description
  bool timed = false;
};

struct SimResult {
  std::map<std::string, TensorValue> outputs;
  SimTrace trace;
  bool ok() const { return !trace.deadlocked; }
};

// Input/output parameter classification over the whole program.
struct ProgramIo {
  std::vector<std::pair<std::string, TensorType>> inputs;
  std::vector<std::pair<std::string, TensorType>> outputs;  // includes in-outs
};
ProgramIo classify_io(const Program& p);

// Deterministic inputs from the documented LCG, parameter-name order.
std::map<std::string, TensorValue> seeded_inputs(const Program& p, std::uint64_t seed);

// Dense semantics of the source program: full parameters everywhere,
// streams as unbounded queues, allreduce as the identity.
std::map<std::string, TensorValue> oracle_reference(
    const Program& p, const std::map<std::string, TensorValue>& inputs);

SimResult run_functional(const PhysicalMapping& m, const DmaSchedule& schedule,
                         const std::map<std::string, TensorValue>& inputs,
                         const KernelRegistry* registry = nullptr);

SimResult run_timed(const PhysicalMapping& m, const DmaSchedule& schedule,
                    const std::map<std::string, TensorValue>& inputs, const SimConfig& cfg,
                    const KernelRegistry* registry = nullptr);

// Wait-for cycle of a quiescent, incomplete simulation (exposed on traces).
inline std::optional<std::vector<std::string>> detect_deadlock(const SimTrace& t) {
  if (!t.deadlocked) return std::nullopt;
  return t.deadlock_waits;
}

// Places, schedules and times every candidate; returns the one with the
// minimum estimated cycle count (first wins ties). Fills estimated_cycles
// on the candidates it evaluates.
PhysicalMapping select_best(std::vector<MapState>& candidates, const FabricConfig& fabric,
                            const SimConfig& cfg);

nlohmann::ordered_json trace_to_json(const SimTrace& t);
std::string trace_summary(const SimTrace& t);
std::string trace_csv(const SimTrace& t);

}  // namespace datoc
