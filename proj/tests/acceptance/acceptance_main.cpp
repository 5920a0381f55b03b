// Acceptance suite: runs every acceptance criterion at its stated
// tolerance and prints one PASS/FAIL line per criterion.
#include <chrono>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "datoc/cli.hpp"
#include "datoc/layout_opt.hpp"
#include "datoc/sim.hpp"
#include "../support/gen.hpp"
#include "../support/oracles.hpp"
#include "../support/schema.hpp"
#include "../support/util.hpp"

using namespace datoc;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

struct Criterion {
  int number;
  std::string name;
  Clock::time_point start = Clock::now();

  void finish(bool ok, const std::string& detail = "") {
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
    std::printf("[%s] criterion %d: %s (%lld ms)%s%s\n", ok ? "PASS" : "FAIL", number,
                name.c_str(), static_cast<long long>(ms.count()), detail.empty() ? "" : " — ",
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

FabricConfig fabric(int rows, int cols) {
  FabricConfig f;
  f.rows = rows;
  f.cols = cols;
  return f;
}

// ---------------------------------------------------------------------------

void criterion_1_negative_fidelity() {
  Criterion c{1, "negative-test fidelity (Fig. 5 rejections)"};
  bool ok = true;
  std::string detail;

  auto t0 = Clock::now();
  Program dead = testutil::load_corpus("deadlock.dato");
  auto r1 = check_streams(dead);
  bool deadlock_named = false;
  for (const auto& d : r1.diags) {
    if (d.code != code::Deadlock) continue;
    for (const auto& n : d.notes)
      deadlock_named = deadlock_named || (n.find("sAB") != std::string::npos &&
                                          n.find("sBA") != std::string::npos);
  }
  ok = ok && !r1.ok() && has_code(r1.diags, code::Deadlock) && deadlock_named;

  Program leak = testutil::load_corpus("token_leak.dato");
  auto r2 = check_streams(leak);
  bool residual = false;
  for (const auto& d : r2.diags)
    residual = residual || (d.code == code::TokenLeak &&
                            d.message.find("residual used count 4") != std::string::npos);
  ok = ok && !r2.ok() && residual;

  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count();
  if (ms >= 1000) {
    ok = false;
    detail = "checks took " + std::to_string(ms) + " ms (budget 1000 per program)";
  }
  c.finish(ok, detail);
}

void criterion_2_gemm_end_to_end() {
  Criterion c{2, "Fig. 7a gemm end-to-end, bit-exact over 10 seeds"};
  bool ok = true;
  std::string detail;
  try {
    Program p = testutil::load_corpus("gemm.dato");
    auto compiled = testutil::compile(p);
    int combines = 0, plain = 0;
    for (const auto& n : compiled.vmg.nodes)
      for (const auto& st : n.stages)
        for (const auto& u : st.units) (u->is_combine ? combines : plain) += 1;
    ok = ok && plain == 8 && combines == 4;

    FabricConfig fab = fabric(4, 5);
    auto candidates = search_mapping(compiled.vmg, fab, 16);
    SimConfig cfg;
    cfg.fabric = fab;
    PhysicalMapping best = select_best(candidates, fab, cfg);
    auto sched = schedule_dma(best);
    ok = ok && sched.ok();

    for (std::uint64_t seed = 1; seed <= 10 && ok; ++seed) {
      auto inputs = seeded_inputs(compiled.program, seed);
      auto run = run_functional(best, *sched.schedule, inputs);
      ok = ok && !run.trace.deadlocked;
      TensorValue want = testutil::schoolbook_matmul(inputs.at("A"), inputs.at("B"));
      ok = ok && run.outputs.count("C") && run.outputs.at("C") == want;
      if (!ok) detail = "mismatch at seed " + std::to_string(seed);
    }
  } catch (const std::exception& e) {
    ok = false;
    detail = e.what();
  }
  c.finish(ok, detail);
}

void criterion_3_rewrite_preservation() {
  Criterion c{3, "rewrite semantics preservation over 200 random programs"};
  bool ok = true;
  std::string detail;
  std::mt19937 rng(20260810);
  testutil::GenOptions opts;
  int programs = 0, applications = 0;
  try {
    while (programs < 200) {
      Program p = testutil::random_program(rng, opts);
      auto compiled = testutil::compile(p);
      FabricConfig fab = fabric(4, 5);
      auto base = testutil::map_direct(compiled, fab);
      if (!base) continue;
      ++programs;
      auto inputs = seeded_inputs(compiled.program, 7000 + static_cast<std::uint64_t>(programs));
      auto base_run = run_functional(base->mapping, base->schedule, inputs);
      if (base_run.trace.deadlocked) {
        ok = false;
        detail = "baseline deadlock";
        break;
      }
      std::vector<std::string> ids;
      for (const auto& n : compiled.vmg.nodes) ids.push_back(n.id);
      for (size_t a = 0; a < ids.size() && ok; ++a) {
        for (size_t b = a + 1; b < ids.size() && ok; ++b) {
          for (int kind = 0; kind < 2 && ok; ++kind) {
            LegalityResult legal =
                kind == 0 ? is_valid_bundle(compiled.vmg, {ids[a], ids[b]}, fab)
                          : is_valid_chain(compiled.vmg, ids[a], ids[b], fab);
            if (!legal.ok) continue;
            Vmg rewritten = kind == 0 ? apply_bundle(compiled.vmg, {ids[a], ids[b]})
                                      : apply_chain(compiled.vmg, ids[a], ids[b]);
            PhysicalMapping m;
            try {
              m = place_topological(rewritten, fab);
            } catch (const PlacementError&) {
              continue;
            }
            auto sched = schedule_dma(m);
            if (!sched.ok()) continue;
            auto run = run_functional(m, *sched.schedule, inputs);
            ++applications;
            if (run.trace.deadlocked ||
                !testutil::outputs_equal(run.outputs, base_run.outputs)) {
              ok = false;
              detail = "divergence after " + std::string(kind == 0 ? "bundle(" : "chain(") +
                       ids[a] + ", " + ids[b] + ") in:\n" + emit_text(p);
            }
          }
        }
      }
      if (!ok) break;
    }
  } catch (const std::exception& e) {
    ok = false;
    detail = e.what();
  }
  if (ok) detail = std::to_string(applications) + " legal applications verified";
  c.finish(ok, detail);
}

void criterion_4_checker_soundness() {
  Criterion c{4, "stream-checker soundness over 1000 random programs"};
  bool ok = true;
  std::string detail;
  std::mt19937 rng(424242);
  int accepted = 0, rejected = 0, deadlocked = 0, enumerated = 0;
  try {
    for (int i = 0; i < 1000 && ok; ++i) {
      testutil::GenOptions opts;
      opts.allow_faults = i % 2 == 1;
      opts.allow_gemm = false;
      Program p = testutil::random_program(rng, opts);
      if (has_error(validate_program(p))) continue;
      auto verdict = check_streams(p);

      // Mapped functional run with checking bypassed.
      bool sim_deadlocks = false;
      auto compiled = testutil::compile_unchecked(p);
      auto mapped = testutil::map_direct(compiled, fabric(4, 5));
      if (!mapped) continue;
      auto inputs = seeded_inputs(compiled.program, 9000 + static_cast<std::uint64_t>(i));
      auto run = run_functional(mapped->mapping, mapped->schedule, inputs);
      sim_deadlocks = run.trace.deadlocked;

      if (verdict.ok()) {
        ++accepted;
        if (sim_deadlocks) {
          ok = false;
          detail = "checker-accepted program deadlocked:\n" + emit_text(p);
          break;
        }
      } else {
        ++rejected;
      }
      if (sim_deadlocks) {
        ++deadlocked;
        if (verdict.ok()) {
          ok = false;
          detail = "simulated deadlock slipped the checker:\n" + emit_text(p);
          break;
        }
      }

      // Greedy equals exhaustive for small event systems.
      if (testutil::total_event_count(p) <= 12) {
        ++enumerated;
        bool greedy = verdict.ok();
        bool exhaustive = testutil::some_schedule_completes(p);
        // Exhaustive completion says nothing about futures/token residue;
        // compare only the scheduling verdicts.
        bool greedy_schedules = !has_code(verdict.diags, code::Deadlock);
        if (greedy_schedules != exhaustive) {
          ok = false;
          detail = "greedy vs exhaustive disagreement:\n" + emit_text(p);
          break;
        }
        (void)greedy;
      }
    }
  } catch (const std::exception& e) {
    ok = false;
    detail = e.what();
  }
  if (ok)
    detail = std::to_string(accepted) + " accepted, " + std::to_string(rejected) +
             " rejected, " + std::to_string(deadlocked) + " sim-deadlocks, " +
             std::to_string(enumerated) + " enumerated exhaustively";
  c.finish(ok, detail);
}

void criterion_5_layout_algebra() {
  Criterion c{5, "layout algebra: 500 random chains, exact oracles"};
  bool ok = true;
  std::string detail;
  std::mt19937 rng(31415);
  DmaCapability cap;
  cap.max_dims = 3;
  try {
    for (int i = 0; i < 500 && ok; ++i) {
      TransformChain chain = testutil::random_transform_chain(rng);
      auto normalized = normalize(chain);
      if (!normalized.ok()) {
        ok = false;
        detail = "normalize failed on a valid chain";
        break;
      }
      if (normalized.chain->steps.size() > chain.steps.size()) {
        ok = false;
        detail = "normalize lengthened a chain";
        break;
      }
      if (apply_chain_pointwise(*normalized.chain) != apply_chain_pointwise(chain)) {
        ok = false;
        detail = "normalize changed the index map: " + to_json(chain).dump();
        break;
      }
      auto again = normalize(*normalized.chain);
      if (!again.ok() || to_json(*again.chain).dump() != to_json(*normalized.chain).dump()) {
        ok = false;
        detail = "normalize is not idempotent: " + to_json(chain).dump();
        break;
      }
      auto hoisted = hoist_to_dma(*normalized.chain, cap);
      if (testutil::apply_hoisted_chain(hoisted) != apply_chain_pointwise(chain)) {
        ok = false;
        detail = "hoist changed the index map: " + to_json(chain).dump();
        break;
      }
    }
  } catch (const std::exception& e) {
    ok = false;
    detail = e.what();
  }
  c.finish(ok, detail);
}

void criterion_6_dma_safety() {
  Criterion c{6, "DMA schedule safety across all corpus candidates"};
  bool ok = true;
  std::string detail;
  int candidates_checked = 0;
  try {
    for (const char* name : {"gemm.dato", "ffn_stream.dato", "ffn_memory.dato",
                             "producer_consumer.dato", "attention.dato"}) {
      Program p = testutil::load_corpus(name);
      auto compiled = testutil::compile(p);
      FabricConfig fab = fabric(4, 5);
      auto candidates = search_mapping(compiled.vmg, fab, fab.tile_count());
      for (auto& cand : candidates) {
        PhysicalMapping m;
        try {
          m = place_topological(cand.vmg, fab);
        } catch (const PlacementError&) {
          continue;
        }
        auto levels = compute_unit_levels(m);
        if (!levels) continue;
        auto raw = collect_transfers(m, *levels);
        auto merged = merge_multicast(raw);
        auto coalesced = coalesce_spatial(merged);
        auto split = split_for_ports(coalesced, fab);
        if (testutil::element_multiset(raw) != testutil::element_multiset(merged) ||
            testutil::element_multiset(merged) != testutil::element_multiset(coalesced) ||
            testutil::element_multiset(coalesced) != testutil::element_multiset(split)) {
          ok = false;
          detail = std::string("element conservation violated on ") + name;
          break;
        }
        SchedError err;
        auto ports = assign_ports(split, fab, &err);
        if (!ports) continue;  // rejected candidates surface to the search
        DmaSchedule s;
        s.transfers = split;
        s.ports = *ports;
        std::string why;
        if (!verify_port_safety(s, fab, &why)) {
          ok = false;
          detail = std::string(name) + ": " + why;
          break;
        }
        ++candidates_checked;
      }
      if (!ok) break;
    }
  } catch (const std::exception& e) {
    ok = false;
    detail = e.what();
  }
  if (ok) detail = std::to_string(candidates_checked) + " candidates swept";
  c.finish(ok, detail);
}

std::int64_t timed_cycles(const testutil::Compiled& compiled, int rows, int cols, int budget) {
  FabricConfig fab = fabric(rows, cols);
  auto candidates = search_mapping(compiled.vmg, fab, budget);
  SimConfig cfg;
  cfg.fabric = fab;
  PhysicalMapping best = select_best(candidates, fab, cfg);
  auto sched = schedule_dma(best);
  if (!sched.ok()) throw std::runtime_error("schedule failed");
  auto inputs = seeded_inputs(*compiled.vmg.program, 1);
  auto run = run_timed(best, *sched.schedule, inputs, cfg);
  if (run.trace.deadlocked) throw std::runtime_error("timed run deadlocked");
  // The functional result still matches the dense oracle.
  auto oracle = oracle_reference(*compiled.vmg.program, inputs);
  if (!testutil::outputs_equal(run.outputs, oracle))
    throw std::runtime_error("timed run diverged from the oracle");
  return run.trace.total_cycles;
}

void criterion_7_scaling_trend() {
  Criterion c{7, "timed scaling: 2x4 <= 0.55x and 4x4 <= 0.35x of 1x4"};
  bool ok = true;
  std::string detail;
  try {
    Program p = testutil::load_corpus("gemm_large.dato");
    auto compiled = testutil::compile(p);
    std::int64_t c14 = timed_cycles(compiled, 1, 4, 4);
    std::int64_t c24 = timed_cycles(compiled, 2, 4, 8);
    std::int64_t c44 = timed_cycles(compiled, 4, 4, 16);
    double r24 = static_cast<double>(c24) / static_cast<double>(c14);
    double r44 = static_cast<double>(c44) / static_cast<double>(c14);
    std::ostringstream os;
    os << "1x4=" << c14 << " 2x4=" << c24 << " (" << r24 << "x) 4x4=" << c44 << " (" << r44
       << "x)";
    detail = os.str();
    ok = r24 <= 0.55 && r44 <= 0.35;
  } catch (const std::exception& e) {
    ok = false;
    detail = e.what();
  }
  c.finish(ok, detail);
}

void criterion_8_fusion_benefit() {
  Criterion c{8, "on-fabric streaming beats external-memory staging by >= 1.2x"};
  bool ok = true;
  std::string detail;
  try {
    auto streamed = testutil::compile(testutil::load_corpus("ffn_stream.dato"));
    auto staged = testutil::compile(testutil::load_corpus("ffn_memory.dato"));
    std::int64_t fused = timed_cycles(streamed, 4, 5, 20);
    std::int64_t serial = timed_cycles(staged, 4, 5, 20);
    double margin = static_cast<double>(serial) / static_cast<double>(fused);
    std::ostringstream os;
    os << "streamed=" << fused << " staged=" << serial << " margin=" << margin << "x";
    detail = os.str();
    ok = fused < serial && margin >= 1.2;
  } catch (const std::exception& e) {
    ok = false;
    detail = e.what();
  }
  c.finish(ok, detail);
}

void criterion_9_cli_contract() {
  Criterion c{9, "CLI: schema-valid reports, byte-stable golden DOT"};
  bool ok = true;
  std::string detail;
  try {
    auto check_schema = testutil::load_schema("check.schema.json");
    for (const char* name : {"gemm.dato", "gemm_large.dato", "producer_consumer.dato",
                             "deadlock.dato", "token_leak.dato", "ffn_stream.dato",
                             "ffn_memory.dato", "attention.dato"}) {
      std::ostringstream out, err;
      cli::CheckOptions o;
      o.file = testutil::corpus_path(name);
      o.json = true;
      cli::cmd_check(o, out, err);
      std::string why;
      if (!testutil::schema_valid(check_schema, nlohmann::json::parse(out.str()), &why)) {
        ok = false;
        detail = std::string(name) + ": " + why;
        return c.finish(ok, detail);
      }
    }
    auto map_schema = testutil::load_schema("map.schema.json");
    auto sim_schema = testutil::load_schema("sim.schema.json");
    std::string dot_dir = std::string(DATOC_BINARY_DIR) + "/acceptance_dot";
    std::string dot_bytes;
    for (const char* name :
         {"gemm.dato", "ffn_stream.dato", "ffn_memory.dato", "producer_consumer.dato",
          "attention.dato"}) {
      for (int round = 0; round < 2; ++round) {
        std::ostringstream out, err;
        cli::MapOptions mo;
        mo.file = testutil::corpus_path(name);
        mo.json = true;
        mo.dot_dir = dot_dir;
        if (cli::cmd_map(mo, out, err) != cli::kExitOk) {
          ok = false;
          detail = std::string("map failed on ") + name;
          return c.finish(ok, detail);
        }
        std::string why;
        if (!testutil::schema_valid(map_schema, nlohmann::json::parse(out.str()), &why)) {
          ok = false;
          detail = std::string(name) + ": " + why;
          return c.finish(ok, detail);
        }
        std::string bytes = testutil::read_file(dot_dir + "/selected.dot") +
                            testutil::read_file(dot_dir + "/initial.dot");
        if (round == 0)
          dot_bytes = bytes;
        else if (bytes != dot_bytes) {
          ok = false;
          detail = std::string("DOT bytes differ across runs for ") + name;
          return c.finish(ok, detail);
        }
      }
      std::ostringstream out, err;
      cli::SimOptions so;
      so.file = testutil::corpus_path(name);
      so.json = true;
      so.timed = true;
      if (cli::cmd_sim(so, out, err) != cli::kExitOk) {
        ok = false;
        detail = std::string("sim failed on ") + name;
        return c.finish(ok, detail);
      }
      std::string why;
      if (!testutil::schema_valid(sim_schema, nlohmann::json::parse(out.str()), &why)) {
        ok = false;
        detail = std::string(name) + ": " + why;
        return c.finish(ok, detail);
      }
    }
  } catch (const std::exception& e) {
    ok = false;
    detail = e.what();
  }
  c.finish(ok, detail);
}

}  // namespace

int main() {
  std::printf("datoc acceptance suite\n");
  criterion_1_negative_fidelity();
  criterion_2_gemm_end_to_end();
  criterion_3_rewrite_preservation();
  criterion_4_checker_soundness();
  criterion_5_layout_algebra();
  criterion_6_dma_safety();
  criterion_7_scaling_trend();
  criterion_8_fusion_benefit();
  criterion_9_cli_contract();
  if (failures == 0)
    std::printf("all 9 criteria PASS\n");
  else
    std::printf("%d criteria FAILED\n", failures);
  return failures == 0 ? 0 : 1;
}
