#include <doctest.h>

#include "datoc/types.hpp"

using namespace datoc;

TEST_CASE("elem bitwidths match kinds") {
  CHECK(ElemType{ElemKind::I4}.bitwidth() == 4);
  CHECK(ElemType{ElemKind::I8}.bitwidth() == 8);
  CHECK(ElemType{ElemKind::I16}.bitwidth() == 16);
  CHECK(ElemType{ElemKind::I32}.bitwidth() == 32);
  CHECK(ElemType{ElemKind::BF16}.bitwidth() == 16);
  CHECK(ElemType{ElemKind::F32}.bitwidth() == 32);
}

TEST_CASE("layout strings parse and print") {
  auto l = layout_from_string("S1S2");
  REQUIRE(l.has_value());
  CHECK(l->axes.size() == 2);
  CHECK(l->axes[0] == AxisLayout::sharded(1));
  CHECK(l->axes[1] == AxisLayout::sharded(2));
  CHECK(l->str() == "S1S2");

  auto bare = layout_from_string("S");
  REQUIRE(bare.has_value());
  CHECK(bare->axes[0] == AxisLayout::sharded(0));

  auto rs = layout_from_string("RS0");
  REQUIRE(rs.has_value());
  CHECK(rs->axes[0] == AxisLayout::replicated());
  CHECK(rs->axes[1] == AxisLayout::sharded(0));

  CHECK_FALSE(layout_from_string("X1").has_value());
}

TEST_CASE("effect sets have operator-set semantics") {
  EffectSet fx;
  fx.add(ReduceOp::Add, 2);
  fx.add(ReduceOp::Add, 1);
  fx.add(ReduceOp::Max, 0);
  CHECK(fx.ops() == std::set<ReduceOp>{ReduceOp::Add, ReduceOp::Max});
  auto axes = fx.discharge(ReduceOp::Add);
  CHECK(axes == std::set<int>{1, 2});
  CHECK(fx.ops() == std::set<ReduceOp>{ReduceOp::Max});
  CHECK(fx.discharge(ReduceOp::Add).empty());
}

TEST_CASE("tile shapes divide sharded axes") {
  TensorType t{ElemType{ElemKind::I16}, {64, 64}};
  auto l = layout_from_string("S1S2");
  auto shape = tile_shape(t, *l, {2, 2, 2});
  CHECK(shape == std::vector<std::int64_t>{32, 32});

  auto all_r = LayoutType::all_replicated(2);
  CHECK(tile_shape(t, all_r, {2, 2, 2}) == std::vector<std::int64_t>{64, 64});
}
