// datoc command-line entry point.
#include <CLI11.hpp>

#include "datoc/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"datoc: dataflow-accelerator compiler and simulator"};
  app.set_version_flag("--version", datoc::cli::kVersion);
  app.require_subcommand(1);

  datoc::cli::CheckOptions check;
  auto* c = app.add_subcommand("check", "type-check a .dato program");
  c->add_option("file", check.file, "input program")->required();
  c->add_flag("--json", check.json, "machine-readable output");

  auto add_common = [](CLI::App* cmd, datoc::cli::CommonOptions& o) {
    cmd->add_option("file", o.file, "input program")->required();
    cmd->add_option("--rows", o.rows, "fabric rows");
    cmd->add_option("--cols", o.cols, "fabric cols");
    cmd->add_option("--budget", o.budget, "physical node budget C (default: tile count)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--candidates", o.candidates, "search early-stop threshold")
        ->check(CLI::PositiveNumber);
  };

  datoc::cli::MapOptions map;
  auto* m = app.add_subcommand("map", "search a virtual-to-physical mapping");
  add_common(m, map);
  m->add_option("--dot", map.dot_dir, "directory for DOT exports");
  m->add_flag("--json", map.json, "machine-readable output");

  datoc::cli::SimOptions sim;
  auto* s = app.add_subcommand("sim", "map and simulate against the oracle");
  add_common(s, sim);
  s->add_option("--inputs", sim.inputs_file, "binary tensor container");
  s->add_option("--seed", sim.seed, "LCG seed for generated inputs");
  s->add_flag("--timed", sim.timed, "also run the cycle-approximate model");
  s->add_option("--report", sim.report_file, "write a JSON report");
  s->add_flag("--unsafe-skip-check", sim.unsafe_skip_check,
              "bypass the stream checker (test hook)");
  s->add_flag("--json", sim.json, "machine-readable output");

  datoc::cli::DotOptions dot;
  auto* d = app.add_subcommand("dot", "emit the lowered virtual mapping graph");
  add_common(d, dot);
  d->add_option("--out", dot.out_file, "output file (default stdout)");

  datoc::cli::ReportOptions report;
  auto* r = app.add_subcommand("report", "full pipeline report with manifest");
  r->add_option("file", report.file, "input program");
  r->add_option("--rows", report.rows, "fabric rows");
  r->add_option("--cols", report.cols, "fabric cols");
  r->add_option("--budget", report.budget, "physical node budget C");
  r->add_option("--candidates", report.candidates, "search early-stop threshold");
  r->add_option("--seed", report.seed, "LCG seed for generated inputs");
  r->add_option("--out", report.out_file, "report path");
  r->add_option("--replay", report.replay_manifest, "re-run from a stored manifest");

  // --tiles RxC convenience spelled out per subcommand.
  std::string map_tiles, sim_tiles, dot_tiles;
  m->add_option("--tiles", map_tiles, "fabric size RxC");
  s->add_option("--tiles", sim_tiles, "fabric size RxC");
  d->add_option("--tiles", dot_tiles, "fabric size RxC");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : datoc::cli::kExitUsage;
  }

  auto apply_tiles = [](const std::string& t, datoc::cli::CommonOptions& o) {
    if (t.empty()) return true;
    auto x = t.find('x');
    if (x == std::string::npos) return false;
    try {
      o.rows = std::stoi(t.substr(0, x));
      o.cols = std::stoi(t.substr(x + 1));
    } catch (...) {
      return false;
    }
    return o.rows >= 1 && o.cols >= 1;
  };

  if (app.got_subcommand(c)) return datoc::cli::cmd_check(check);
  if (app.got_subcommand(m)) {
    if (!apply_tiles(map_tiles, map)) return datoc::cli::kExitUsage;
    return datoc::cli::cmd_map(map);
  }
  if (app.got_subcommand(s)) {
    if (!apply_tiles(sim_tiles, sim)) return datoc::cli::kExitUsage;
    return datoc::cli::cmd_sim(sim);
  }
  if (app.got_subcommand(d)) {
    if (!apply_tiles(dot_tiles, dot)) return datoc::cli::kExitUsage;
    return datoc::cli::cmd_dot(dot);
  }
  if (app.got_subcommand(r)) {
    if (report.file.empty() && report.replay_manifest.empty()) return datoc::cli::kExitUsage;
    return datoc::cli::cmd_report(report);
  }
  return datoc::cli::kExitUsage;
}
