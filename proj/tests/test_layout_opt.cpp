#include <doctest.h>

#include <numeric>
#include <random>

#include "datoc/layout_opt.hpp"

using namespace datoc;

namespace {

// Source addresses of "descriptors then residual": the oracle for hoist
// correctness.
std::vector<std::int64_t> apply_hoisted(const HoistResult& h) {
  // Descriptors chain up from the original source.
  std::vector<std::int64_t> current;
  if (h.descriptors.empty()) {
    std::int64_t n = 1;
    for (auto s : h.residual.input_shape) n *= s;
    current.resize(static_cast<size_t>(n));
    std::iota(current.begin(), current.end(), 0);
  } else {
    current = h.descriptors.front().enumerate();
    for (size_t d = 1; d < h.descriptors.size(); ++d) {
      std::vector<std::int64_t> next;
      for (std::int64_t a : h.descriptors[d].enumerate())
        next.push_back(current[static_cast<size_t>(a)]);
      current = std::move(next);
    }
  }
  std::vector<std::int64_t> out;
  // Apply the residual over the intermediate buffer.
  auto residual_addrs = apply_chain_pointwise(h.residual);
  for (std::int64_t a : residual_addrs) out.push_back(current[static_cast<size_t>(a)]);
  return out;
}

TransformChain random_chain(std::mt19937& rng, int max_steps = 5) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::vector<std::vector<std::int64_t>> bases = {
      {16}, {4, 8}, {8, 8}, {2, 4, 8}, {4, 4, 4}, {2, 3, 4}, {64}, {6, 6}};
  TransformChain c;
  c.input_shape = bases[static_cast<size_t>(pick(0, static_cast<int>(bases.size()) - 1))];
  std::vector<std::int64_t> shape = c.input_shape;
  int steps = pick(1, max_steps);
  for (int s = 0; s < steps; ++s) {
    int rank = static_cast<int>(shape.size());
    int kind = pick(0, 4);
    if (kind == 0) {  // tile
      int axis = pick(0, rank - 1);
      std::vector<std::int64_t> divisors;
      for (std::int64_t f = 2; f <= shape[static_cast<size_t>(axis)]; ++f)
        if (shape[static_cast<size_t>(axis)] % f == 0) divisors.push_back(f);
      if (divisors.empty()) continue;
      std::int64_t f = divisors[static_cast<size_t>(pick(0, static_cast<int>(divisors.size()) - 1))];
      c.steps.push_back(Transform::tile(axis, f));
    } else if (kind == 1 && rank >= 2) {  // pack
      int axis = pick(0, rank - 2);
      c.steps.push_back(Transform::pack(axis));
    } else if (kind == 2 && rank >= 2) {  // transpose
      std::vector<int> perm(static_cast<size_t>(rank));
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      c.steps.push_back(Transform::transpose(perm));
    } else if (kind == 3) {  // slice
      std::vector<std::int64_t> offs, sizes;
      bool nontrivial = false;
      for (int d = 0; d < rank; ++d) {
        std::int64_t dim = shape[static_cast<size_t>(d)];
        std::int64_t size = std::max<std::int64_t>(1, dim - pick(0, dim > 2 ? 1 : 0));
        std::int64_t off = pick(0, static_cast<int>(dim - size));
        offs.push_back(off);
        sizes.push_back(size);
        nontrivial = nontrivial || size != dim || off != 0;
      }
      c.steps.push_back(Transform::slice(offs, sizes));
    } else {  // reshape to a random factorization
      std::int64_t count = 1;
      for (auto d : shape) count *= d;
      std::vector<std::int64_t> dims;
      std::int64_t rest = count;
      while (rest > 1 && dims.size() < 3) {
        std::vector<std::int64_t> divisors;
        for (std::int64_t f = 2; f <= rest; ++f)
          if (rest % f == 0) divisors.push_back(f);
        std::int64_t f = divisors[static_cast<size_t>(pick(0, static_cast<int>(divisors.size()) - 1))];
        dims.push_back(f);
        rest /= f;
      }
      if (rest > 1) dims.push_back(rest);
      if (dims.empty()) dims.push_back(1);
      c.steps.push_back(Transform::reshape(dims));
    }
    auto m = step_map(c.steps.back(), shape, nullptr);
    REQUIRE(m.has_value());
    shape = m->sizes;
  }
  return c;
}

}  // namespace

TEST_CASE("compose: identity absorbs and transpose is an involution") {
  LayoutMap id = LayoutMap::identity({4, 4});
  LayoutMap tr;
  tr.sizes = {4, 4};
  tr.offsets = {0, 0};
  tr.strides = {1, 4};  // transpose of a 4x4 row-major view

  auto c1 = compose(id, tr);
  REQUIRE(c1.has_value());
  CHECK(c1->strides == std::vector<std::int64_t>{1, 4});

  auto c2 = compose(tr, tr);
  REQUIRE(c2.has_value());
  CHECK(c2->is_identity());
}

TEST_CASE("compose agrees with the pointwise oracle for tile and slice") {
  TransformChain c;
  c.input_shape = {8, 8};
  c.steps.push_back(Transform::tile(0, 2));
  c.steps.push_back(Transform::slice({1, 0, 2}, {2, 2, 4}));
  auto m = chain_to_map(c);
  REQUIRE(m.has_value());
  CHECK(m->enumerate() == apply_chain_pointwise(c));
}

TEST_CASE("composition is associative when expressible") {
  std::mt19937 rng(5);
  for (int i = 0; i < 50; ++i) {
    TransformChain c = random_chain(rng, 3);
    if (c.steps.size() < 3) continue;
    std::vector<std::int64_t> shape = c.input_shape;
    std::vector<LayoutMap> maps;
    for (const auto& t : c.steps) {
      auto m = step_map(t, shape, nullptr);
      REQUIRE(m.has_value());
      maps.push_back(*m);
      shape = m->sizes;
    }
    auto ab = compose(maps[0], maps[1]);
    auto bc = compose(maps[1], maps[2]);
    if (!ab || !bc) continue;
    auto left = compose(*ab, maps[2]);
    auto right = compose(maps[0], *bc);
    if (left && right) CHECK(left->enumerate() == right->enumerate());
  }
}

TEST_CASE("normalize cancels inverse pairs") {
  TransformChain c;
  c.input_shape = {4, 6};
  c.steps.push_back(Transform::transpose({1, 0}));
  c.steps.push_back(Transform::transpose({1, 0}));
  auto r = normalize(c);
  REQUIRE(r.ok());
  CHECK(r.chain->steps.empty());

  TransformChain pk;
  pk.input_shape = {4, 6};
  pk.steps.push_back(Transform::pack(0));
  pk.steps.push_back(Transform::tile(0, 6));
  auto r2 = normalize(pk);
  REQUIRE(r2.ok());
  CHECK(r2.chain->steps.empty());
}

TEST_CASE("normalize fuses tile-tile-transpose into one map") {
  TransformChain c;
  c.input_shape = {8, 8};
  c.steps.push_back(Transform::tile(0, 2));
  c.steps.push_back(Transform::tile(2, 2));
  c.steps.push_back(Transform::transpose({2, 0, 1, 3}));
  auto r = normalize(c);
  REQUIRE(r.ok());
  CHECK(r.chain->steps.size() == 1);
  CHECK(apply_chain_pointwise(*r.chain) == apply_chain_pointwise(c));
}

TEST_CASE("divisibility violations surface as errors") {
  TransformChain c;
  c.input_shape = {6};
  c.steps.push_back(Transform::tile(0, 4));
  auto r = normalize(c);
  REQUIRE_FALSE(r.ok());
  CHECK(r.error->message.find("divide") != std::string::npos);
}

TEST_CASE("hoist: a 2D transpose becomes a stride swap descriptor") {
  TransformChain c;
  c.input_shape = {8, 16};
  c.steps.push_back(Transform::transpose({1, 0}));
  auto n = normalize(c);
  REQUIRE(n.ok());
  DmaCapability cap;
  cap.supports_transpose2d = true;
  auto h = hoist_to_dma(*n.chain, cap);
  REQUIRE(h.descriptors.size() == 1);
  CHECK(h.residual.steps.empty());
  CHECK(h.descriptors[0].strides == std::vector<std::int64_t>{1, 16});

  DmaCapability no_tr = cap;
  no_tr.supports_transpose2d = false;
  auto h2 = hoist_to_dma(*n.chain, no_tr);
  CHECK(h2.descriptors.empty());
  CHECK(h2.residual.steps.size() == 1);
}

TEST_CASE("hoist: a 4D permutation splits into descriptor and residual") {
  TransformChain c;
  c.input_shape = {2, 3, 4, 5};
  c.steps.push_back(Transform::transpose({3, 2, 1, 0}));
  auto n = normalize(c);
  REQUIRE(n.ok());
  DmaCapability cap;
  cap.max_dims = 3;
  auto h = hoist_to_dma(*n.chain, cap);
  CHECK_FALSE(h.descriptors.empty());
  CHECK_FALSE(h.residual.steps.empty());
  CHECK(apply_hoisted(h) == apply_chain_pointwise(c));
}

TEST_CASE("hoist: empty chains produce empty splits") {
  TransformChain c;
  c.input_shape = {4, 4};
  auto h = hoist_to_dma(c, DmaCapability{});
  CHECK(h.descriptors.empty());
  CHECK(h.residual.steps.empty());
}

TEST_CASE("property: normalize preserves the index map, is idempotent, never grows") {
  std::mt19937 rng(99);
  for (int i = 0; i < 120; ++i) {
    TransformChain c = random_chain(rng);
    CAPTURE(to_json(c).dump());
    auto r = normalize(c);
    REQUIRE(r.ok());
    CHECK(r.chain->steps.size() <= c.steps.size());
    CHECK(apply_chain_pointwise(*r.chain) == apply_chain_pointwise(c));
    auto r2 = normalize(*r.chain);
    REQUIRE(r2.ok());
    CHECK(to_json(*r2.chain).dump() == to_json(*r.chain).dump());
  }
}

TEST_CASE("property: hoisted descriptors plus residual reproduce the chain") {
  std::mt19937 rng(123);
  DmaCapability cap;
  cap.max_dims = 3;
  for (int i = 0; i < 120; ++i) {
    TransformChain c = random_chain(rng);
    auto n = normalize(c);
    REQUIRE(n.ok());
    auto h = hoist_to_dma(*n.chain, cap);
    CAPTURE(to_json(c).dump());
    CHECK(apply_hoisted(h) == apply_chain_pointwise(c));
  }
}

TEST_CASE("layout maps serialize to json") {
  LayoutMap m = LayoutMap::identity({2, 3});
  auto j = to_json(m);
  CHECK(j["sizes"] == nlohmann::ordered_json({2, 3}));
  CHECK(j["strides"] == nlohmann::ordered_json({3, 1}));
}
