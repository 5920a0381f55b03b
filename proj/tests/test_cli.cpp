#include <doctest.h>

#include <sstream>

#include "datoc/cli.hpp"
#include "support/schema.hpp"
#include "support/util.hpp"

using namespace datoc;

namespace {

std::string out_path(const std::string& name) {
  return std::string(DATOC_SOURCE_DIR) + "/build/cli_test_" + name;
}

nlohmann::json parse_json(const std::string& text) {
  return nlohmann::json::parse(text);
}

}  // namespace

TEST_CASE("check: clean program exits 0, deadlock exits 2 with DEADLOCK code") {
  std::ostringstream out, err;
  cli::CheckOptions ok;
  ok.file = testutil::corpus_path("gemm.dato");
  ok.json = true;
  CHECK(cli::cmd_check(ok, out, err) == cli::kExitOk);
  auto j = parse_json(out.str());
  std::string why;
  CHECK_MESSAGE(testutil::schema_valid(testutil::load_schema("check.schema.json"), j, &why),
                why);
  CHECK(j["ok"] == true);

  std::ostringstream out2, err2;
  cli::CheckOptions bad;
  bad.file = testutil::corpus_path("deadlock.dato");
  bad.json = true;
  CHECK(cli::cmd_check(bad, out2, err2) == cli::kExitType);
  auto j2 = parse_json(out2.str());
  CHECK(j2["ok"] == false);
  bool saw = false;
  for (const auto& d : j2["diagnostics"]) saw = saw || d["code"] == "DEADLOCK";
  CHECK(saw);
}

TEST_CASE("check: parse errors exit 1, missing files exit 64") {
  std::ostringstream out, err;
  cli::CheckOptions missing;
  missing.file = "/nonexistent/x.dato";
  CHECK(cli::cmd_check(missing, out, err) == cli::kExitUsage);

  std::string broken = out_path("broken.dato");
  {
    std::ofstream f(broken);
    f << "task t[2(A: i8) { }";
  }
  cli::CheckOptions parse_bad;
  parse_bad.file = broken;
  CHECK(cli::cmd_check(parse_bad, out, err) == cli::kExitParse);
}

TEST_CASE("map: gemm produces schema-valid candidates, all port-legal") {
  std::ostringstream out, err;
  cli::MapOptions o;
  o.file = testutil::corpus_path("gemm.dato");
  o.json = true;
  o.dot_dir = out_path("dot");
  REQUIRE(cli::cmd_map(o, out, err) == cli::kExitOk);
  auto j = parse_json(out.str());
  std::string why;
  CHECK_MESSAGE(testutil::schema_valid(testutil::load_schema("map.schema.json"), j, &why), why);
  CHECK(j["candidates"].size() >= 1);
  for (const auto& c : j["candidates"])
    for (const auto& p : c["port_pressure"]) {
      CHECK(p["ins"].get<int>() <= 2);
      CHECK(p["outs"].get<int>() <= 2);
    }
  // Golden DOT: two consecutive runs emit identical bytes.
  std::string first = testutil::read_file(o.dot_dir + "/selected.dot");
  std::ostringstream out2, err2;
  REQUIRE(cli::cmd_map(o, out2, err2) == cli::kExitOk);
  CHECK(testutil::read_file(o.dot_dir + "/selected.dot") == first);
  CHECK(out.str() == out2.str());
}

TEST_CASE("map: budget 1 on the partial-sum subgraph selects the fused node") {
  std::string file = out_path("partial_sum.dato");
  {
    std::ofstream f(file);
    f << "let M = 8;\n"
      << "task gemm[1, 1, 2](A: i16[M, M] @ \"S1S2\", B: i16[M, M] @ \"S2S0\","
      << " C: i16[M, M] @ \"S1S0\") {\n"
      << "  local part_C = matmul(A, B);\n"
      << "  C[:, :] = allreduce(part_C, \"+\");\n"
      << "}\n";
  }
  std::ostringstream out, err;
  cli::MapOptions o;
  o.file = file;
  o.budget = 1;
  o.json = true;
  REQUIRE(cli::cmd_map(o, out, err) == cli::kExitOk);
  auto j = parse_json(out.str());
  CHECK(j["selected"]["node_count"] == 1);
}

TEST_CASE("sim: corpus programs pass against the oracle") {
  for (const char* name : {"producer_consumer.dato", "ffn_stream.dato", "attention.dato"}) {
    CAPTURE(name);
    std::ostringstream out, err;
    cli::SimOptions o;
    o.file = testutil::corpus_path(name);
    o.seed = 42;
    o.json = true;
    REQUIRE(cli::cmd_sim(o, out, err) == cli::kExitOk);
    auto j = parse_json(out.str());
    std::string why;
    CHECK_MESSAGE(testutil::schema_valid(testutil::load_schema("sim.schema.json"), j, &why),
                  why);
    CHECK(j["pass"] == true);
  }
}

TEST_CASE("sim: bypassing the checker on a deadlocking program exits 5") {
  std::ostringstream out, err;
  cli::SimOptions o;
  o.file = testutil::corpus_path("deadlock.dato");
  o.unsafe_skip_check = true;
  CHECK(cli::cmd_sim(o, out, err) == cli::kExitDeadlock);
}

TEST_CASE("sim: inputs from a binary container reproduce seeded inputs") {
  Program p = testutil::load_corpus("producer_consumer.dato");
  auto inputs = seeded_inputs(p, 7);
  std::string path = out_path("inputs.bin");
  REQUIRE(write_tensors(path, inputs));

  std::ostringstream out1, err1, out2, err2;
  cli::SimOptions by_seed;
  by_seed.file = testutil::corpus_path("producer_consumer.dato");
  by_seed.seed = 7;
  by_seed.json = true;
  REQUIRE(cli::cmd_sim(by_seed, out1, err1) == cli::kExitOk);

  cli::SimOptions by_file = by_seed;
  by_file.seed = 0;
  by_file.inputs_file = path;
  REQUIRE(cli::cmd_sim(by_file, out2, err2) == cli::kExitOk);
  CHECK(parse_json(out1.str())["outputs_digest"] == parse_json(out2.str())["outputs_digest"]);
}

TEST_CASE("report: manifest replay reproduces byte-identical reports") {
  std::ostringstream out, err;
  cli::ReportOptions o;
  o.file = testutil::corpus_path("ffn_memory.dato");
  o.out_file = out_path("report1.json");
  REQUIRE(cli::cmd_report(o, out, err) == cli::kExitOk);
  std::string first = testutil::read_file(o.out_file);
  auto j = parse_json(first);
  std::string why;
  CHECK_MESSAGE(testutil::schema_valid(testutil::load_schema("report.schema.json"), j, &why),
                why);

  // Write the manifest out and replay it into a second file.
  std::string manifest_path = out_path("manifest.json");
  {
    nlohmann::json manifest = j["manifest"];
    manifest["outputs"][0] = out_path("report2.json");
    std::ofstream f(manifest_path);
    f << manifest.dump(2);
  }
  std::ostringstream out2, err2;
  cli::ReportOptions replay;
  replay.replay_manifest = manifest_path;
  REQUIRE(cli::cmd_report(replay, out2, err2) == cli::kExitOk);
  std::string second = testutil::read_file(out_path("report2.json"));
  // Byte-identical except the output path inside the manifest.
  size_t pos = second.find("cli_test_report2.json");
  REQUIRE(pos != std::string::npos);
  second.replace(pos, std::string("cli_test_report2.json").size(), "cli_test_report1.json");
  CHECK(second == first);
}

TEST_CASE("dot: writes the lowered graph") {
  std::ostringstream out, err;
  cli::DotOptions o;
  o.file = testutil::corpus_path("gemm.dato");
  REQUIRE(cli::cmd_dot(o, out, err) == cli::kExitOk);
  CHECK(out.str().find("digraph vmg") != std::string::npos);
  CHECK(out.str().find("style=dashed") != std::string::npos);
}
