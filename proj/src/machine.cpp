#include <algorithm>
#include <deque>
#include <sstream>

#include "datoc/sim.hpp"
#include "interp.hpp"

namespace datoc {

namespace {

using detail::Env;
using detail::EvalCost;
using detail::FlatOp;

struct ShotRun {
  UnitPtr unit;
  std::vector<FlatOp> ops;
  Env env;
  std::map<std::string, TensorValue> param_tiles;  // owned tile buffers
  size_t pc = 0;
  bool started = false;
  int completed_write_seq = -1;
  std::vector<int> in_jobs;  // port job indices that must deliver first
  bool done() const { return pc >= ops.size(); }
};

struct TileRun {
  int tile = -1;
  std::vector<ShotRun> shots;
  size_t current = 0;
  std::int64_t busy_until = 0;
  std::int64_t busy_cycles = 0;
  std::int64_t mac_cycles = 0;
  std::string node_id;
  bool done() const { return current >= shots.size(); }
};

struct Fifo {
  std::deque<TensorValue> slots;
  int depth = 2;
  int pack = 1;
  std::int64_t peak = 0;
  std::string name;
};

// One DMA port job: a transfer's engagement on a single tile.
struct PortJob {
  int transfer = -1;
  int tile = -1;
  Transfer::Dir dir = Transfer::Dir::In;
  int epoch = 0;
  int port = 0;
  std::int64_t order = 0;  // within the port queue
  bool started = false;
  bool done_flag = false;
  std::int64_t finish = -1;
};

class Machine {
 public:
  Machine(const PhysicalMapping& m, const DmaSchedule& schedule,
          const std::map<std::string, TensorValue>& inputs, const KernelRegistry* registry,
          const CostModel& cost, bool timed)
      : m_(m),
        schedule_(schedule),
        registry_(registry),
        cost_(cost),
        timed_(timed),
        p_(*m.vmg.program) {
    init_buffers(inputs);
    init_fifos();
    init_tiles();
    init_ports();
  }

  SimResult run();

 private:
  const PhysicalMapping& m_;
  const DmaSchedule& schedule_;
  const KernelRegistry* registry_;
  CostModel cost_;
  bool timed_;
  const Program& p_;

  std::map<std::string, TensorValue> buffers_;
  std::map<StreamInstance, Fifo> fifos_;
  std::vector<TileRun> tiles_;
  std::map<std::string, std::pair<int, int>> unit_slot_;  // unit -> (tile idx, shot idx)
  std::vector<PortJob> jobs_;
  std::map<std::tuple<int, int, int>, std::vector<int>> port_queues_;  // (tile,dir,port)
  SimTrace trace_;
  std::int64_t cycle_ = 0;

  const Transfer& transfer(int id) const {
    for (const auto& t : schedule_.transfers)
      if (t.id == id) return t;
    throw std::runtime_error("unknown transfer id");
  }

  void init_buffers(const std::map<std::string, TensorValue>& inputs) {
    for (const auto& t : p_.tasks) {
      for (const auto& prm : t.params) {
        if (buffers_.count(prm.name)) continue;
        auto it = inputs.find(prm.name);
        buffers_.emplace(prm.name,
                         it != inputs.end() ? it->second : TensorValue::zeros(prm.type));
      }
    }
  }

  void init_fifos() {
    for (size_t si = 0; si < p_.streams.size(); ++si) {
      const auto& decl = p_.streams[si];
      for (std::int64_t f = 0; f < decl.instance_count(); ++f) {
        StreamInstance inst{static_cast<int>(si), f};
        Fifo fifo;
        fifo.depth = decl.type.depth;
        fifo.pack = decl.type.pack;
        fifo.name = stream_instance_name(p_, inst);
        fifos_.emplace(inst, std::move(fifo));
      }
    }
  }

  void init_tiles() {
    for (size_t ni = 0; ni < m_.vmg.nodes.size(); ++ni) {
      const Node& n = m_.vmg.nodes[ni];
      TileRun tr;
      tr.tile = m_.tile_of_node(static_cast<int>(ni));
      tr.node_id = n.id;
      int shot_idx = 0;
      for (const auto& u : n.shots()) {
        ShotRun sr;
        sr.unit = u;
        sr.ops = detail::flatten_body(u->body, p_);
        const TaskDef* t = m_.vmg.task_of(*u);
        if (t) {
          for (const auto& prm : t->params) {
            TensorType tile_type{prm.type.elem, tile_shape(prm.type, prm.layout, t->mapping)};
            sr.param_tiles.emplace(prm.name, TensorValue::zeros(tile_type));
          }
        }
        unit_slot_[u->id] = {static_cast<int>(tiles_.size()), shot_idx};
        tr.shots.push_back(std::move(sr));
        ++shot_idx;
      }
      for (auto& sr : tr.shots)
        for (auto& [name, tile] : sr.param_tiles) sr.env.params[name] = &tile;
      tiles_.push_back(std::move(tr));
    }
  }

  void init_ports() {
    // Port jobs in assignment order per (tile, dir, port).
    std::int64_t order = 0;
    std::vector<PortSlot> slots = schedule_.ports.slots;
    std::sort(slots.begin(), slots.end(), [](const PortSlot& a, const PortSlot& b) {
      return std::tie(a.tile, a.dir, a.port, a.epoch, a.acquire, a.transfer) <
             std::tie(b.tile, b.dir, b.port, b.epoch, b.acquire, b.transfer);
    });
    for (const auto& slot : slots) {
      PortJob j;
      j.transfer = slot.transfer;
      j.tile = slot.tile;
      j.dir = slot.dir;
      j.epoch = slot.epoch;
      j.port = slot.port;
      j.order = order++;
      int idx = static_cast<int>(jobs_.size());
      jobs_.push_back(j);
      port_queues_[{slot.tile, static_cast<int>(slot.dir), slot.port}].push_back(idx);
      if (slot.dir == Transfer::Dir::In) {
        const Transfer& t = transfer(slot.transfer);
        for (const auto& ep : t.endpoints) {
          if (ep.tile != slot.tile) continue;
          auto us = unit_slot_.find(ep.unit);
          if (us != unit_slot_.end())
            tiles_[static_cast<size_t>(us->second.first)]
                .shots[static_cast<size_t>(us->second.second)]
                .in_jobs.push_back(idx);
        }
      }
    }
  }

  // All out-transfers that write `buffer` in epochs before `epoch` are done.
  bool buffer_ready(const std::string& buffer, int epoch) const {
    for (const auto& j : jobs_) {
      if (j.dir != Transfer::Dir::Out || j.done_flag) continue;
      const Transfer& t = transfer(j.transfer);
      if (t.buffer == buffer && t.epoch < epoch) return false;
    }
    return true;
  }

  bool out_ready(const Transfer& t) const {
    // The producing writes must have executed, and earlier writes of the
    // same unit must already have been published (program order).
    for (const auto& ep : t.endpoints) {
      auto us = unit_slot_.find(ep.unit);
      if (us == unit_slot_.end()) return false;
      const ShotRun& sr =
          tiles_[static_cast<size_t>(us->second.first)].shots[static_cast<size_t>(us->second.second)];
      if (sr.completed_write_seq < ep.write_seq) return false;
    }
    for (const auto& j : jobs_) {
      if (j.dir != Transfer::Dir::Out || j.done_flag) continue;
      const Transfer& other = transfer(j.transfer);
      if (other.id == t.id) continue;
      // Same-unit earlier writes first.
      for (const auto& a : other.endpoints)
        for (const auto& b : t.endpoints)
          if (a.unit == b.unit && a.write_seq >= 0 && b.write_seq >= 0 &&
              a.write_seq < b.write_seq)
            return false;
    }
    return true;
  }

  bool job_ready(const PortJob& j) const {
    const Transfer& t = transfer(j.transfer);
    if (j.dir == Transfer::Dir::In) return buffer_ready(t.buffer, t.epoch);
    return out_ready(t);
  }

  std::int64_t job_duration(const PortJob& j) const {
    if (!timed_) return 0;
    const Transfer& t = transfer(j.transfer);
    return std::max<std::int64_t>(
        1, detail::ceil_div(t.elements, cost_.dma_elems_per_cycle_per_port));
  }

  void complete_job(PortJob& j) {
    const Transfer& t = transfer(j.transfer);
    for (const auto& ep : t.endpoints) {
      if (ep.tile != j.tile) continue;
      auto us = unit_slot_.find(ep.unit);
      if (us == unit_slot_.end()) continue;
      ShotRun& sr = tiles_[static_cast<size_t>(us->second.first)]
                        .shots[static_cast<size_t>(us->second.second)];
      if (j.dir == Transfer::Dir::In) {
        TensorValue piece = read_region(buffers_.at(t.buffer), ep.global_region);
        write_region(sr.param_tiles.at(t.buffer), ep.unit_region, piece);
      } else {
        TensorValue piece = read_region(sr.param_tiles.at(t.buffer), ep.unit_region);
        write_region(buffers_.at(t.buffer), ep.global_region, piece);
      }
    }
    j.done_flag = true;
    trace_.events.push_back(TraceEvent{cycle_, j.tile,
                                       j.dir == Transfer::Dir::In ? "dma_in" : "dma_out",
                                       t.buffer + "#" + std::to_string(t.id)});
  }

  bool advance_ports() {
    bool progress = false;
    for (auto& [key, queue] : port_queues_) {
      (void)key;
      // Finish the running job if its time has come.
      for (int idx : queue) {
        PortJob& j = jobs_[static_cast<size_t>(idx)];
        if (j.started && !j.done_flag && j.finish <= cycle_) {
          complete_job(j);
          progress = true;
        }
      }
      // A port runs one job at a time; pick the first ready unstarted job.
      bool busy = false;
      for (int idx : queue) {
        const PortJob& j = jobs_[static_cast<size_t>(idx)];
        if (j.started && !j.done_flag) busy = true;
      }
      if (busy) continue;
      for (int idx : queue) {
        PortJob& j = jobs_[static_cast<size_t>(idx)];
        if (j.started || j.done_flag) continue;
        if (!job_ready(j)) continue;
        j.started = true;
        j.finish = cycle_ + job_duration(j);
        if (j.finish <= cycle_) {
          complete_job(j);
        }
        progress = true;
        break;
      }
    }
    return progress;
  }

  bool shots_ins_delivered(const ShotRun& sr) const {
    for (int idx : sr.in_jobs)
      if (!jobs_[static_cast<size_t>(idx)].done_flag) return false;
    return true;
  }

  std::int64_t fifo_cost(const Fifo& f, const TensorValue& v) const {
    if (!timed_) return 0;
    return std::max<std::int64_t>(
        1, detail::ceil_div(v.count(), static_cast<std::int64_t>(cost_.fifo_elems_per_cycle) *
                                           f.pack));
  }

  bool advance_tile(TileRun& tr) {
    if (tr.done() || tr.busy_until > cycle_) return false;
    bool progress = false;
    while (!tr.done()) {
      ShotRun& sr = tr.shots[tr.current];
      if (sr.done()) {
        tr.current += 1;
        progress = true;
        continue;
      }
      if (!sr.started) {
        if (!shots_ins_delivered(sr)) break;
        sr.started = true;
        trace_.events.push_back(TraceEvent{cycle_, tr.tile, "shot_start", sr.unit->id});
      }
      FlatOp& op = sr.ops[sr.pc];
      if (op.kind == FlatOp::Kind::Recv) {
        Fifo& f = fifos_.at(op.inst);
        if (f.slots.empty()) break;  // blocked on empty FIFO
        TensorValue v = std::move(f.slots.front());
        f.slots.pop_front();
        std::int64_t cost = fifo_cost(f, v);
        sr.env.locals[op.target] = std::move(v);
        tr.busy_until = cycle_ + cost;
        tr.busy_cycles += cost;
      } else if (op.kind == FlatOp::Kind::Send) {
        Fifo& f = fifos_.at(op.inst);
        if (static_cast<int>(f.slots.size()) >= f.depth) break;  // blocked on full FIFO
        EvalCost ec;
        TensorValue v = detail::eval_payload(
            *op.stmt, sr.env, cost_, registry_, &ec,
            p_.streams[static_cast<size_t>(op.inst.stream)].type.elem);
        std::int64_t cost = (timed_ ? ec.cycles : 0) + fifo_cost(f, v);
        f.slots.push_back(std::move(v));
        f.peak = std::max<std::int64_t>(f.peak, static_cast<std::int64_t>(f.slots.size()));
        tr.busy_until = cycle_ + cost;
        tr.busy_cycles += cost;
        tr.mac_cycles += timed_ ? ec.mac_cycles : 0;
      } else {
        EvalCost ec;
        detail::exec_stmt(*op.stmt, sr.env, cost_, registry_, &ec);
        if (op.write_seq >= 0) sr.completed_write_seq = std::max(sr.completed_write_seq, op.write_seq);
        std::int64_t cost = timed_ ? ec.cycles : 0;
        tr.busy_until = cycle_ + cost;
        tr.busy_cycles += cost;
        tr.mac_cycles += timed_ ? ec.mac_cycles : 0;
      }
      sr.pc += 1;
      progress = true;
      if (sr.done())
        trace_.events.push_back(TraceEvent{cycle_, tr.tile, "shot_done", sr.unit->id});
      if (tr.busy_until > cycle_) break;  // time must pass before the next op
    }
    return progress;
  }

  bool all_done() const {
    for (const auto& tr : tiles_)
      if (!tr.done()) return false;
    for (const auto& j : jobs_)
      if (!j.done_flag) return false;
    return true;
  }

  void report_deadlock() {
    trace_.deadlocked = true;
    trace_.deadlock_cycle = cycle_;
    auto u2n = m_.vmg.unit_to_node();
    for (const auto& tr : tiles_) {
      if (tr.done()) continue;
      const ShotRun& sr = tr.shots[tr.current];
      std::ostringstream os;
      os << tr.node_id << " (tile " << tr.tile << ") ";
      if (!sr.started && !shots_ins_delivered(sr)) {
        os << "waits on DMA-in for " << sr.unit->id;
      } else if (!sr.done()) {
        const FlatOp& op = sr.ops[sr.pc];
        if (op.kind == FlatOp::Kind::Recv)
          os << "waits on get(" << stream_instance_name(p_, op.inst) << ")";
        else if (op.kind == FlatOp::Kind::Send)
          os << "waits on put(" << stream_instance_name(p_, op.inst) << ")";
        else
          os << "blocked mid-shot";
      }
      trace_.deadlock_waits.push_back(os.str());
    }
    for (const auto& j : jobs_) {
      if (j.done_flag) continue;
      const Transfer& t = transfer(j.transfer);
      std::ostringstream os;
      os << "dma " << (j.dir == Transfer::Dir::In ? "in" : "out") << " of " << t.buffer
         << " (transfer " << t.id << ") pending on tile " << j.tile;
      trace_.deadlock_waits.push_back(os.str());
    }
  }

  SimResult finish() {
    SimResult result;
    for (auto& [inst, f] : fifos_) {
      (void)inst;
      if (f.peak > 0) trace_.fifo_peak[f.name] = f.peak;
    }
    std::int64_t total = cycle_;
    for (const auto& tr : tiles_) total = std::max(total, tr.busy_until);
    for (const auto& j : jobs_)
      if (j.finish > total) total = j.finish;
    trace_.total_cycles = total;
    std::int64_t mac_sum = 0;
    for (const auto& tr : tiles_) {
      trace_.busy_cycles[tr.tile] = tr.busy_cycles;
      trace_.mac_cycles[tr.tile] = tr.mac_cycles;
      mac_sum += tr.mac_cycles;
    }
    std::int64_t active_tiles = static_cast<std::int64_t>(tiles_.size());
    if (timed_ && total > 0 && active_tiles > 0)
      trace_.utilization = static_cast<double>(mac_sum) /
                           static_cast<double>(active_tiles * total);
    trace_.timed = timed_;

    ProgramIo io = classify_io(p_);
    for (const auto& [name, type] : io.outputs) {
      (void)type;
      if (buffers_.count(name)) result.outputs.emplace(name, buffers_.at(name));
    }
    result.trace = std::move(trace_);
    return result;
  }

  std::int64_t next_event_cycle() const {
    std::int64_t next = -1;
    auto candidate = [&](std::int64_t c) {
      if (c > cycle_ && (next < 0 || c < next)) next = c;
    };
    for (const auto& tr : tiles_)
      if (!tr.done()) candidate(tr.busy_until);
    for (const auto& j : jobs_)
      if (j.started && !j.done_flag) candidate(j.finish);
    return next;
  }
};

SimResult Machine::run() {
  while (true) {
    bool progress = true;
    while (progress) {
      progress = false;
      if (advance_ports()) progress = true;
      for (auto& tr : tiles_)
        if (advance_tile(tr)) progress = true;
    }
    if (all_done()) break;
    std::int64_t next = next_event_cycle();
    if (next < 0) {
      report_deadlock();
      return finish();
    }
    cycle_ = next;
  }
  return finish();
}

}  // namespace

SimResult run_functional(const PhysicalMapping& m, const DmaSchedule& schedule,
                         const std::map<std::string, TensorValue>& inputs,
                         const KernelRegistry* registry) {
  CostModel cost;
  Machine machine(m, schedule, inputs, registry, cost, /*timed=*/false);
  return machine.run();
}

SimResult run_timed(const PhysicalMapping& m, const DmaSchedule& schedule,
                    const std::map<std::string, TensorValue>& inputs, const SimConfig& cfg,
                    const KernelRegistry* registry) {
  Machine machine(m, schedule, inputs, registry, cfg.cost, /*timed=*/true);
  return machine.run();
}

// ---------------------------------------------------------------------------
// Trace export
// ---------------------------------------------------------------------------

nlohmann::ordered_json trace_to_json(const SimTrace& t) {
  nlohmann::ordered_json j;
  j["total_cycles"] = t.total_cycles;
  j["timed"] = t.timed;
  j["utilization"] = t.utilization;
  j["deadlocked"] = t.deadlocked;
  if (t.deadlocked) {
    j["deadlock_cycle"] = t.deadlock_cycle;
    j["deadlock_waits"] = t.deadlock_waits;
  }
  j["fifo_peak"] = nlohmann::ordered_json::object();
  for (const auto& [name, peak] : t.fifo_peak) j["fifo_peak"][name] = peak;
  j["busy_cycles"] = nlohmann::ordered_json::object();
  for (const auto& [tile, busy] : t.busy_cycles)
    j["busy_cycles"][std::to_string(tile)] = busy;
  j["events"] = nlohmann::ordered_json::array();
  for (const auto& e : t.events)
    j["events"].push_back(
        {{"cycle", e.cycle}, {"tile", e.tile}, {"kind", e.kind}, {"detail", e.detail}});
  return j;
}

std::string trace_summary(const SimTrace& t) {
  std::ostringstream os;
  os << "cycles: " << t.total_cycles << "\n";
  if (t.timed) {
    os.setf(std::ios::fixed);
    os.precision(2);
    os << "utilization: " << t.utilization * 100.0 << "%\n";
  }
  os << "fifo peaks:";
  if (t.fifo_peak.empty()) os << " none";
  os << "\n";
  for (const auto& [name, peak] : t.fifo_peak) os << "  " << name << ": " << peak << "\n";
  if (t.deadlocked) {
    os << "DEADLOCK at cycle " << t.deadlock_cycle << "\n";
    for (const auto& w : t.deadlock_waits) os << "  " << w << "\n";
  }
  return os.str();
}

std::string trace_csv(const SimTrace& t) {
  std::ostringstream os;
  os << "cycle,tile,kind,detail\n";
  for (const auto& e : t.events)
    os << e.cycle << "," << e.tile << "," << e.kind << "," << e.detail << "\n";
  return os.str();
}

}  // namespace datoc
