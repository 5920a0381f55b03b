#include <doctest.h>

#include "datoc/vmg.hpp"
#include "support/util.hpp"

using namespace datoc;

namespace {

Vmg build_lowered(const Program& p) {
  auto awaited = insert_awaits(p);
  auto layouts = check_layouts(awaited);
  REQUIRE(layouts.ok());
  auto built = build_vmg(awaited);
  REQUIRE(built.ok());
  return lower_allreduce(*built.vmg, *layouts.report);
}

}  // namespace

TEST_CASE("gemm instantiates the full 3D lattice") {
  Program p = testutil::load_corpus("gemm.dato");
  auto built = build_vmg(p);
  REQUIRE(built.ok());
  CHECK(built.vmg->node_count() == 8);
  CHECK(built.vmg->edges.empty());
  for (size_t i = 1; i < built.vmg->nodes.size(); ++i)
    CHECK(built.vmg->nodes[i - 1].id < built.vmg->nodes[i].id);
}

TEST_CASE("producer/consumer wires one edge per stream instance") {
  Program p = testutil::load_corpus("producer_consumer.dato");
  auto built = build_vmg(p);
  REQUIRE(built.ok());
  CHECK(built.vmg->node_count() == 4);
  REQUIRE(built.vmg->edges.size() == 2);
  CHECK(built.vmg->edges[0].src_unit == "producer@(0)");
  CHECK(built.vmg->edges[0].dst_unit == "consumer@(0)");
  CHECK(built.vmg->edges[1].src_unit == "producer@(1)");
  CHECK(built.vmg->edges[1].dst_unit == "consumer@(1)");
}

TEST_CASE("singleton mapping yields one node at coord (0)") {
  Program p = testutil::parse_ok(R"(
task t[1](A: i8[4]) { A[:] = A + 1; }
)");
  auto built = build_vmg(p);
  REQUIRE(built.ok());
  CHECK(built.vmg->node_count() == 1);
  CHECK(built.vmg->nodes[0].id == "t@(0)");
}

TEST_CASE("shard_region computes per-instance tiles") {
  TensorType vec{ElemType{ElemKind::I8}, {16}};
  auto s0 = *layout_from_string("S0");
  auto r = shard_region("A", vec, s0, {2}, {1});
  CHECK(r.region == Region{{8, 8}});

  TensorType mat{ElemType{ElemKind::I16}, {16, 16}};
  auto s0s1 = *layout_from_string("S0S1");
  auto r2 = shard_region("T", mat, s0s1, {2, 2}, {0, 1});
  CHECK(r2.region == Region{{0, 8}, {8, 8}});

  auto rr = LayoutType::all_replicated(2);
  auto r3 = shard_region("T", mat, rr, {2, 2}, {1, 1});
  CHECK(r3.region == Region{{0, 16}, {0, 16}});
}

TEST_CASE("shard regions partition every sharded dimension") {
  TensorType t{ElemType{ElemKind::I16}, {24, 10}};
  auto layout = *layout_from_string("S1S0");
  std::vector<std::int64_t> extents{2, 3};
  std::vector<std::vector<bool>> covered(2);
  covered[0].assign(24, false);
  covered[1].assign(10, false);
  int hits0 = 0, hits1 = 0;
  for (auto& coord : enumerate_coords(extents)) {
    auto r = shard_region("t", t, layout, extents, coord);
    for (std::int64_t i = r.region[0].first; i < r.region[0].first + r.region[0].second; ++i) {
      covered[0][static_cast<size_t>(i)] = true;
      ++hits0;
    }
    for (std::int64_t j = r.region[1].first; j < r.region[1].first + r.region[1].second; ++j) {
      covered[1][static_cast<size_t>(j)] = true;
      ++hits1;
    }
  }
  CHECK(hits0 == 24 * 2);
  CHECK(hits1 == 10 * 3);
  for (bool b : covered[0]) CHECK(b);
  for (bool b : covered[1]) CHECK(b);
}

TEST_CASE("allreduce lowers to 4 combine nodes for the 2x2x2 gemm") {
  Program p = testutil::load_corpus("gemm.dato");
  Vmg g = build_lowered(p);
  CHECK(g.node_count() == 12);
  int combines = 0;
  for (const auto& n : g.nodes)
    for (const auto& st : n.stages)
      for (const auto& u : st.units) combines += u->is_combine ? 1 : 0;
  CHECK(combines == 4);
  int reduction_edges = 0;
  for (const auto& e : g.edges) reduction_edges += e.kind == VEdge::Kind::Reduction ? 1 : 0;
  CHECK(reduction_edges == 8);
}

TEST_CASE("contraction extent 1 lowers to the identity") {
  // The contraction sits on device axis 2, which has extent 1 here.
  Program p = testutil::parse_ok(R"(
task gemm[2, 2, 1](A: i16[8, 8] @ "S1S2", B: i16[8, 8] @ "S2S0", C: i16[8, 8] @ "S1S0")
{
  local part_C = matmul(A, B);
  C[:, :] = allreduce(part_C, "+");
}
)");
  Vmg g = build_lowered(p);
  CHECK(g.node_count() == 4);
  CHECK(g.edges.empty());
}

TEST_CASE("extent-4 contraction tree: 3 combines, depth 2") {
  Program p = testutil::parse_ok(R"(
task gemm[1, 1, 4](A: i16[8, 8] @ "S1S2", B: i16[8, 8] @ "S2S0", C: i16[8, 8] @ "S1S0")
{
  local part_C = matmul(A, B);
  C[:, :] = allreduce(part_C, "+");
}
)");
  Vmg g = build_lowered(p);
  CHECK(g.node_count() == 4 + 3);
  int combines = 0;
  bool saw_l1 = false;
  for (const auto& n : g.nodes)
    for (const auto& st : n.stages)
      for (const auto& u : st.units) {
        combines += u->is_combine ? 1 : 0;
        saw_l1 = saw_l1 || u->id.find(".L1P0") != std::string::npos;
      }
  CHECK(combines == 3);
  CHECK(saw_l1);
  CHECK(g.edges.size() == 6);
}

TEST_CASE("odd group size routes the carried value across levels") {
  Program p = testutil::parse_ok(R"(
task gemm[1, 1, 3](A: i16[9, 9] @ "S1S2", B: i16[9, 9] @ "S2S0", C: i16[9, 9] @ "S1S0")
{
  local part_C = matmul(A, B);
  C[:, :] = allreduce(part_C, "+");
}
)");
  Vmg g = build_lowered(p);
  CHECK(g.node_count() == 5);
  CHECK(g.edges.size() == 4);
  std::map<std::string, int> seen;
  for (const auto& e : g.edges) seen[stream_instance_name(*g.program, e.inst)] += 1;
  for (const auto& [name, n] : seen) {
    CAPTURE(name);
    CHECK(n == 1);
  }
}

TEST_CASE("dot export is stable and shows shots") {
  Program p = testutil::load_corpus("producer_consumer.dato");
  auto built = build_vmg(p);
  REQUIRE(built.ok());
  std::string d1 = to_dot(*built.vmg);
  std::string d2 = to_dot(*built.vmg);
  CHECK(d1 == d2);
  CHECK(d1.find("producer@(0)/1") != std::string::npos);
  CHECK(d1.find("->") != std::string::npos);

  Program gp = testutil::load_corpus("gemm.dato");
  Vmg g = build_lowered(gp);
  std::string dg = to_dot(g);
  CHECK(dg.find("style=dashed") != std::string::npos);
}

TEST_CASE("vmg json dump lists nodes and edges") {
  Program p = testutil::load_corpus("producer_consumer.dato");
  auto built = build_vmg(p);
  REQUIRE(built.ok());
  auto j = vmg_to_json(*built.vmg);
  CHECK(j["nodes"].size() == 4);
  CHECK(j["edges"].size() == 2);
}
