#include "datoc/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "datoc/dma.hpp"
#include "datoc/parser.hpp"
#include "datoc/sim.hpp"
#include "datoc/tensor_io.hpp"
#include "datoc/typecheck.hpp"
#include "datoc/validate.hpp"
#include "datoc/vmg.hpp"

namespace datoc::cli {

using nlohmann::ordered_json;

void log(int level, const std::string& msg) {
  static int threshold = [] {
    const char* env = std::getenv("DATOC_LOG");
    if (!env) return 1;
    std::string v = env;
    if (v == "error") return 0;
    if (v == "warn") return 1;
    if (v == "info") return 2;
    if (v == "debug") return 3;
    return 1;
  }();
  if (level > threshold) return;
  const char* names[] = {"error", "warn", "info", "debug"};
  std::cerr << "datoc: [" << names[level < 0 ? 0 : (level > 3 ? 3 : level)] << "] " << msg
            << "\n";
}

namespace {

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Front {
  Program program;       // awaits inserted
  LayoutReport layouts;
  StreamReport streams;
  Diagnostics diags;
  int exit_code = kExitOk;
};

// parse + validate + both checkers (+ await insertion). On failure the
// diagnostics and exit code are filled in.
std::optional<Front> run_front(const std::string& file, bool skip_stream_check,
                               Diagnostics* out_diags, int* exit_code) {
  auto text = read_file(file);
  if (!text) {
    *exit_code = kExitUsage;
    out_diags->push_back(Diagnostic::error(code::Invalid, {}, "cannot read " + file));
    return std::nullopt;
  }
  auto parsed = parse_program(*text, file);
  if (!parsed.ok()) {
    *exit_code = kExitParse;
    out_diags->push_back(parsed.error->to_diagnostic());
    return std::nullopt;
  }
  Front f;
  Diagnostics vd = validate_program(*parsed.program);
  for (auto& d : vd) out_diags->push_back(d);
  if (has_error(vd)) {
    *exit_code = kExitType;
    return std::nullopt;
  }
  if (!skip_stream_check) {
    auto sr = check_streams(*parsed.program);
    for (auto& d : sr.diags) out_diags->push_back(d);
    if (!sr.ok()) {
      *exit_code = kExitType;
      return std::nullopt;
    }
    f.streams = *sr.report;
  }
  f.program = insert_awaits(*parsed.program);
  auto lr = check_layouts(f.program);
  for (auto& d : lr.diags) out_diags->push_back(d);
  if (!lr.ok()) {
    *exit_code = kExitType;
    return std::nullopt;
  }
  f.layouts = *lr.report;
  return f;
}

ordered_json stream_report_json(const StreamReport& r) {
  ordered_json arr = ordered_json::array();
  for (const auto& s : r.streams) {
    arr.push_back({{"name", s.name},
                   {"depth", s.depth},
                   {"puts", s.puts},
                   {"gets", s.gets},
                   {"peak_occupancy", s.peak_occupancy}});
  }
  return arr;
}

FabricConfig make_fabric(const CommonOptions& o) {
  FabricConfig f;
  f.rows = o.rows;
  f.cols = o.cols;
  return f;
}

struct MappedProgram {
  Vmg lowered;
  std::vector<MapState> candidates;
  PhysicalMapping mapping;
  DmaSchedule schedule;
};

// lower + search + select + schedule; throws NoFeasibleMapping.
MappedProgram run_mapping(const Front& front, const CommonOptions& o) {
  auto built = build_vmg(front.program);
  if (!built.ok())
    throw NoFeasibleMapping(built.diags.empty() ? "vmg build failed" : render(built.diags[0]));
  MappedProgram mp;
  mp.lowered = lower_allreduce(*built.vmg, front.layouts);
  FabricConfig fabric = make_fabric(o);
  int budget = o.budget > 0 ? o.budget : fabric.tile_count();
  mp.candidates = search_mapping(mp.lowered, fabric, budget, o.candidates);
  SimConfig cfg;
  cfg.fabric = fabric;
  mp.mapping = select_best(mp.candidates, fabric, cfg);
  DmaResult sched = schedule_dma(mp.mapping);
  if (!sched.ok())
    throw NoFeasibleMapping("selected mapping failed DMA scheduling: " +
                            (sched.error ? sched.error->message : "unknown"));
  mp.schedule = std::move(*sched.schedule);
  return mp;
}

ordered_json candidates_json(const MappedProgram& mp) {
  ordered_json arr = ordered_json::array();
  for (const auto& c : mp.candidates) {
    ordered_json jc;
    jc["node_count"] = c.v_node_number;
    jc["applied"] = ordered_json::array();
    for (const auto& a : c.applied) {
      jc["applied"].push_back(
          {{"kind", a.kind == Application::Kind::Bundle ? "bundle" : "chain"},
           {"nodes", a.nodes}});
    }
    jc["port_pressure"] = ordered_json::array();
    for (const auto& [id, p] : c.port_pressure)
      jc["port_pressure"].push_back({{"node", id}, {"ins", p.ins}, {"outs", p.outs}});
    jc["estimated_cycles"] = c.estimated_cycles;
    arr.push_back(jc);
  }
  return arr;
}

ordered_json mapping_json(const PhysicalMapping& m) {
  ordered_json j;
  j["node_count"] = m.vmg.node_count();
  j["estimated_cycles"] = m.estimated_cycles;
  j["placement"] = ordered_json::array();
  for (const auto& pn : m.placement)
    j["placement"].push_back(
        {{"node", pn.node_id}, {"row", pn.tile.row}, {"col", pn.tile.col}});
  return j;
}

bool write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return false;
  out << text;
  return static_cast<bool>(out);
}

}  // namespace

int cmd_check(const CheckOptions& o, std::ostream& out, std::ostream& err) {
  Diagnostics diags;
  int exit_code = kExitOk;
  auto front = run_front(o.file, false, &diags, &exit_code);
  ordered_json j;
  j["file"] = o.file;
  j["ok"] = front.has_value();
  j["diagnostics"] = to_json(diags);
  if (front) j["streams"] = stream_report_json(front->streams);
  if (o.json) {
    out << j.dump(2) << "\n";
  } else {
    for (const auto& d : diags) err << render(d) << "\n";
    if (front) {
      out << o.file << ": ok";
      if (!front->streams.streams.empty())
        out << " (" << front->streams.streams.size() << " stream instance(s))";
      out << "\n";
    }
  }
  return front ? kExitOk : exit_code;
}

int cmd_map(const MapOptions& o, std::ostream& out, std::ostream& err) {
  Diagnostics diags;
  int exit_code = kExitOk;
  auto front = run_front(o.file, false, &diags, &exit_code);
  if (!front) {
    for (const auto& d : diags) err << render(d) << "\n";
    return exit_code;
  }
  try {
    MappedProgram mp = run_mapping(*front, o);
    if (!o.dot_dir.empty()) {
      std::filesystem::create_directories(o.dot_dir);
      write_text(o.dot_dir + "/initial.dot", to_dot(mp.lowered));
      write_text(o.dot_dir + "/selected.dot", to_dot(mp.mapping.vmg));
    }
    ordered_json j;
    j["file"] = o.file;
    j["candidates"] = candidates_json(mp);
    j["selected"] = mapping_json(mp.mapping);
    j["schedule"] = schedule_to_json(mp.schedule);
    if (o.json) {
      out << j.dump(2) << "\n";
    } else {
      out << o.file << ": " << mp.candidates.size() << " candidate(s), selected "
          << mp.mapping.vmg.node_count() << " node(s), estimated " << mp.mapping.estimated_cycles
          << " cycles\n";
    }
    return kExitOk;
  } catch (const NoFeasibleMapping& e) {
    err << "no feasible mapping: " << e.what() << "\n";
    return kExitNoMapping;
  } catch (const PlacementError& e) {
    err << "no feasible mapping: " << e.what() << "\n";
    return kExitNoMapping;
  }
}

int cmd_sim(const SimOptions& o, std::ostream& out, std::ostream& err) {
  Diagnostics diags;
  int exit_code = kExitOk;
  auto front = run_front(o.file, o.unsafe_skip_check, &diags, &exit_code);
  if (!front) {
    for (const auto& d : diags) err << render(d) << "\n";
    return exit_code;
  }
  try {
    MappedProgram mp = run_mapping(*front, o);
    std::map<std::string, TensorValue> inputs;
    if (!o.inputs_file.empty()) {
      auto loaded = read_tensors(o.inputs_file);
      if (!loaded) {
        err << "cannot read inputs from " << o.inputs_file << "\n";
        return kExitUsage;
      }
      inputs = std::move(*loaded);
    } else {
      inputs = seeded_inputs(front->program, o.seed);
    }

    SimResult functional = run_functional(mp.mapping, mp.schedule, inputs);
    if (functional.trace.deadlocked) {
      err << trace_summary(functional.trace);
      return kExitDeadlock;
    }
    bool pass = true;
    if (!o.unsafe_skip_check) {
      auto oracle = oracle_reference(front->program, inputs);
      pass = oracle.size() == functional.outputs.size();
      for (const auto& [name, v] : oracle)
        pass = pass && functional.outputs.count(name) && functional.outputs.at(name) == v;
    }

    SimTrace timed_trace;
    if (o.timed) {
      SimConfig cfg;
      cfg.fabric = make_fabric(o);
      SimResult timed = run_timed(mp.mapping, mp.schedule, inputs, cfg);
      if (timed.trace.deadlocked) {
        err << trace_summary(timed.trace);
        return kExitDeadlock;
      }
      timed_trace = std::move(timed.trace);
    }

    ordered_json j;
    j["file"] = o.file;
    j["pass"] = pass;
    j["outputs_digest"] = digest(functional.outputs);
    j["functional"] = trace_to_json(functional.trace);
    if (o.timed) j["timed"] = trace_to_json(timed_trace);
    if (!o.report_file.empty()) write_text(o.report_file, j.dump(2) + "\n");
    if (o.json) {
      out << j.dump(2) << "\n";
    } else {
      out << o.file << ": " << (pass ? "PASS" : "FAIL") << " digest "
          << digest(functional.outputs) << "\n";
      if (o.timed) out << trace_summary(timed_trace);
    }
    return pass ? kExitOk : kExitMismatch;
  } catch (const NoFeasibleMapping& e) {
    err << "no feasible mapping: " << e.what() << "\n";
    return kExitNoMapping;
  } catch (const PlacementError& e) {
    err << "no feasible mapping: " << e.what() << "\n";
    return kExitNoMapping;
  }
}

int cmd_dot(const DotOptions& o, std::ostream& out, std::ostream& err) {
  Diagnostics diags;
  int exit_code = kExitOk;
  auto front = run_front(o.file, false, &diags, &exit_code);
  if (!front) {
    for (const auto& d : diags) err << render(d) << "\n";
    return exit_code;
  }
  auto built = build_vmg(front->program);
  if (!built.ok()) {
    for (const auto& d : built.diags) err << render(d) << "\n";
    return kExitType;
  }
  Vmg lowered = lower_allreduce(*built.vmg, front->layouts);
  std::string dot = to_dot(lowered);
  if (o.out_file.empty())
    out << dot;
  else if (!write_text(o.out_file, dot)) {
    err << "cannot write " << o.out_file << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

int cmd_report(const ReportOptions& o, std::ostream& out, std::ostream& err) {
  ReportOptions opts = o;
  if (!o.replay_manifest.empty()) {
    auto text = read_file(o.replay_manifest);
    if (!text) {
      err << "cannot read manifest " << o.replay_manifest << "\n";
      return kExitUsage;
    }
    auto m = nlohmann::json::parse(*text, nullptr, false);
    if (m.is_discarded() || !m.contains("input")) {
      err << "malformed manifest\n";
      return kExitUsage;
    }
    opts.file = m["input"].get<std::string>();
    opts.rows = m["config"]["rows"].get<int>();
    opts.cols = m["config"]["cols"].get<int>();
    opts.budget = m["config"]["budget"].get<int>();
    opts.candidates = m["config"]["candidates"].get<int>();
    opts.seed = m["config"]["seed"].get<std::uint64_t>();
    opts.out_file = m["outputs"][0].get<std::string>();
  }

  ordered_json manifest;
  manifest["tool"] = kVersion;
  manifest["command"] = "report";
  manifest["input"] = opts.file;
  manifest["config"] = {{"rows", opts.rows},
                        {"cols", opts.cols},
                        {"budget", opts.budget},
                        {"candidates", opts.candidates},
                        {"seed", opts.seed}};
  manifest["outputs"] = {opts.out_file};

  Diagnostics diags;
  int exit_code = kExitOk;
  auto front = run_front(opts.file, false, &diags, &exit_code);
  ordered_json j;
  j["manifest"] = manifest;
  j["check"] = {{"ok", front.has_value()}, {"diagnostics", to_json(diags)}};
  if (!front) {
    write_text(opts.out_file, j.dump(2) + "\n");
    for (const auto& d : diags) err << render(d) << "\n";
    return exit_code;
  }
  try {
    MappedProgram mp = run_mapping(*front, opts);
    auto inputs = seeded_inputs(front->program, opts.seed);
    SimResult run = run_functional(mp.mapping, mp.schedule, inputs);
    if (run.trace.deadlocked) {
      err << trace_summary(run.trace);
      return kExitDeadlock;
    }
    SimConfig cfg;
    cfg.fabric = make_fabric(opts);
    SimResult timed = run_timed(mp.mapping, mp.schedule, inputs, cfg);
    auto oracle = oracle_reference(front->program, inputs);
    bool pass = oracle.size() == run.outputs.size();
    for (const auto& [name, v] : oracle)
      pass = pass && run.outputs.count(name) && run.outputs.at(name) == v;
    j["check"]["streams"] = stream_report_json(front->streams);
    j["vmg"] = vmg_to_json(mp.lowered);
    j["candidates"] = candidates_json(mp);
    j["selected"] = mapping_json(mp.mapping);
    j["schedule"] = schedule_to_json(mp.schedule);
    j["trace"] = trace_to_json(timed.trace);
    j["pass"] = pass;
    j["outputs_digest"] = digest(run.outputs);
    if (!write_text(opts.out_file, j.dump(2) + "\n")) {
      err << "cannot write " << opts.out_file << "\n";
      return kExitUsage;
    }
    out << "report written to " << opts.out_file << (pass ? " (PASS)" : " (FAIL)") << "\n";
    return pass ? kExitOk : kExitMismatch;
  } catch (const NoFeasibleMapping& e) {
    err << "no feasible mapping: " << e.what() << "\n";
    return kExitNoMapping;
  } catch (const PlacementError& e) {
    err << "no feasible mapping: " << e.what() << "\n";
    return kExitNoMapping;
  }
}

}  // namespace datoc::cli
