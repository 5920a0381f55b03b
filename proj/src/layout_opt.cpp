#include "datoc/layout_opt.hpp"

#include <algorithm>
#include <numeric>

namespace datoc {

namespace {

std::vector<std::int64_t> suffix_products(const std::vector<std::int64_t>& shape) {
  std::vector<std::int64_t> w(shape.size(), 1);
  for (int d = static_cast<int>(shape.size()) - 2; d >= 0; --d)
    w[static_cast<size_t>(d)] = w[static_cast<size_t>(d) + 1] * shape[static_cast<size_t>(d) + 1];
  return w;
}

constexpr std::int64_t kExactCheckCap = 1 << 16;

}  // namespace

std::int64_t LayoutMap::domain_size() const {
  std::int64_t n = 1;
  for (auto s : sizes) n *= s;
  return n;
}

std::int64_t LayoutMap::addr(const std::vector<std::int64_t>& index) const {
  std::int64_t a = 0;
  for (size_t d = 0; d < sizes.size(); ++d) a += (offsets[d] + index[d]) * strides[d];
  return a;
}

std::vector<std::int64_t> LayoutMap::enumerate() const {
  std::vector<std::int64_t> out;
  out.reserve(static_cast<size_t>(domain_size()));
  std::vector<std::int64_t> idx(sizes.size(), 0);
  std::int64_t n = domain_size();
  for (std::int64_t c = 0; c < n; ++c) {
    out.push_back(addr(idx));
    for (int d = static_cast<int>(sizes.size()) - 1; d >= 0; --d) {
      if (++idx[static_cast<size_t>(d)] < sizes[static_cast<size_t>(d)]) break;
      idx[static_cast<size_t>(d)] = 0;
    }
  }
  return out;
}

LayoutMap LayoutMap::identity(const std::vector<std::int64_t>& shape) {
  LayoutMap m;
  m.sizes = shape;
  m.offsets.assign(shape.size(), 0);
  m.strides = suffix_products(shape);
  return m;
}

bool LayoutMap::is_identity() const {
  return *this == identity(sizes);
}

std::optional<LayoutMap> compose(const LayoutMap& a, const LayoutMap& b) {
  // b's addresses are row-major linear positions in a's view.
  if (b.domain_size() > kExactCheckCap || a.domain_size() > kExactCheckCap)
    return std::nullopt;  // stay conservative outside the exact-check range
  std::vector<std::int64_t> a_w = suffix_products(a.sizes);
  std::int64_t a_count = a.domain_size();

  auto through = [&](std::int64_t linear) -> std::optional<std::int64_t> {
    if (linear < 0 || linear >= a_count) return std::nullopt;
    std::int64_t rem = linear, address = 0;
    for (size_t d = 0; d < a.sizes.size(); ++d) {
      std::int64_t i = rem / a_w[d];
      rem %= a_w[d];
      address += (a.offsets[d] + i) * a.strides[d];
    }
    return address;
  };

  // Candidate from the base point and unit steps.
  LayoutMap r;
  r.sizes = b.sizes;
  r.offsets.assign(b.sizes.size(), 0);
  r.strides.assign(b.sizes.size(), 0);
  std::vector<std::int64_t> zero(b.sizes.size(), 0);
  auto base = through(b.addr(zero));
  if (!base) return std::nullopt;
  for (size_t d = 0; d < b.sizes.size(); ++d) {
    if (b.sizes[d] == 1) {
      r.strides[d] = 0;
      continue;
    }
    std::vector<std::int64_t> probe = zero;
    probe[d] = 1;
    auto stepped = through(b.addr(probe));
    if (!stepped) return std::nullopt;
    r.strides[d] = *stepped - *base;
    if (r.strides[d] < 0) return std::nullopt;
  }
  // Express the base as per-dim offsets: fold it into the slowest
  // nonzero-stride dim when divisible, else keep it at a synthetic
  // leading position only if zero.
  std::int64_t rest = *base;
  for (size_t d = 0; d < r.sizes.size() && rest > 0; ++d) {
    if (r.strides[d] <= 0) continue;
    std::int64_t k = rest / r.strides[d];
    if (k > 0) {
      r.offsets[d] = k;
      rest -= k * r.strides[d];
    }
  }
  if (rest != 0) return std::nullopt;

  // Exact verification over the whole (small) domain.
  std::vector<std::int64_t> idx(b.sizes.size(), 0);
  std::int64_t n = b.domain_size();
  for (std::int64_t c = 0; c < n; ++c) {
    auto want = through(b.addr(idx));
    if (!want || r.addr(idx) != *want) return std::nullopt;
    for (int d = static_cast<int>(b.sizes.size()) - 1; d >= 0; --d) {
      if (++idx[static_cast<size_t>(d)] < b.sizes[static_cast<size_t>(d)]) break;
      idx[static_cast<size_t>(d)] = 0;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Transforms
// ---------------------------------------------------------------------------

Transform Transform::tile(int axis, std::int64_t factor) {
  Transform t;
  t.kind = TransformKind::Tile;
  t.axis = axis;
  t.factor = factor;
  return t;
}

Transform Transform::pack(int axis) {
  Transform t;
  t.kind = TransformKind::Pack;
  t.axis = axis;
  return t;
}

Transform Transform::transpose(std::vector<int> perm) {
  Transform t;
  t.kind = TransformKind::Transpose;
  t.perm = std::move(perm);
  return t;
}

Transform Transform::slice(std::vector<std::int64_t> offsets, std::vector<std::int64_t> sizes) {
  Transform t;
  t.kind = TransformKind::Slice;
  t.offsets = std::move(offsets);
  t.sizes = std::move(sizes);
  return t;
}

Transform Transform::reshape(std::vector<std::int64_t> shape) {
  Transform t;
  t.kind = TransformKind::Reshape;
  t.sizes = std::move(shape);
  return t;
}

Transform Transform::collapsed(LayoutMap m) {
  Transform t;
  t.kind = TransformKind::Collapsed;
  t.map = std::move(m);
  return t;
}

std::optional<LayoutMap> step_map(const Transform& t, const std::vector<std::int64_t>& in_shape,
                                  std::string* error) {
  auto fail = [&](const std::string& m) -> std::optional<LayoutMap> {
    if (error) *error = m;
    return std::nullopt;
  };
  std::vector<std::int64_t> w = suffix_products(in_shape);
  int rank = static_cast<int>(in_shape.size());
  switch (t.kind) {
    case TransformKind::Tile: {
      if (t.axis < 0 || t.axis >= rank) return fail("tile axis out of range");
      if (t.factor < 1 || in_shape[static_cast<size_t>(t.axis)] % t.factor != 0)
        return fail("tile factor " + std::to_string(t.factor) + " does not divide dimension " +
                    std::to_string(in_shape[static_cast<size_t>(t.axis)]));
      LayoutMap m;
      for (int d = 0; d < rank; ++d) {
        if (d == t.axis) {
          m.sizes.push_back(in_shape[static_cast<size_t>(d)] / t.factor);
          m.strides.push_back(w[static_cast<size_t>(d)] * t.factor);
          m.sizes.push_back(t.factor);
          m.strides.push_back(w[static_cast<size_t>(d)]);
        } else {
          m.sizes.push_back(in_shape[static_cast<size_t>(d)]);
          m.strides.push_back(w[static_cast<size_t>(d)]);
        }
      }
      m.offsets.assign(m.sizes.size(), 0);
      return m;
    }
    case TransformKind::Pack: {
      if (t.axis < 0 || t.axis + 1 >= rank) return fail("pack axis pair out of range");
      LayoutMap m;
      for (int d = 0; d < rank; ++d) {
        if (d == t.axis) {
          m.sizes.push_back(in_shape[static_cast<size_t>(d)] * in_shape[static_cast<size_t>(d) + 1]);
          m.strides.push_back(w[static_cast<size_t>(d) + 1]);
          ++d;  // skip the merged partner
        } else {
          m.sizes.push_back(in_shape[static_cast<size_t>(d)]);
          m.strides.push_back(w[static_cast<size_t>(d)]);
        }
      }
      m.offsets.assign(m.sizes.size(), 0);
      return m;
    }
    case TransformKind::Transpose: {
      if (static_cast<int>(t.perm.size()) != rank) return fail("transpose rank mismatch");
      std::vector<bool> seen(static_cast<size_t>(rank), false);
      for (int p : t.perm) {
        if (p < 0 || p >= rank || seen[static_cast<size_t>(p)])
          return fail("invalid permutation");
        seen[static_cast<size_t>(p)] = true;
      }
      LayoutMap m;
      for (int d = 0; d < rank; ++d) {
        m.sizes.push_back(in_shape[static_cast<size_t>(t.perm[static_cast<size_t>(d)])]);
        m.strides.push_back(w[static_cast<size_t>(t.perm[static_cast<size_t>(d)])]);
      }
      m.offsets.assign(m.sizes.size(), 0);
      return m;
    }
    case TransformKind::Slice: {
      if (static_cast<int>(t.offsets.size()) != rank ||
          static_cast<int>(t.sizes.size()) != rank)
        return fail("slice rank mismatch");
      LayoutMap m;
      for (int d = 0; d < rank; ++d) {
        if (t.offsets[static_cast<size_t>(d)] < 0 || t.sizes[static_cast<size_t>(d)] < 1 ||
            t.offsets[static_cast<size_t>(d)] + t.sizes[static_cast<size_t>(d)] >
                in_shape[static_cast<size_t>(d)])
          return fail("slice out of bounds");
        m.sizes.push_back(t.sizes[static_cast<size_t>(d)]);
        m.offsets.push_back(t.offsets[static_cast<size_t>(d)]);
        m.strides.push_back(w[static_cast<size_t>(d)]);
      }
      return m;
    }
    case TransformKind::Reshape: {
      std::int64_t want = 1, have = 1;
      for (auto s : t.sizes) {
        if (s < 1) return fail("reshape sizes must be positive");
        want *= s;
      }
      for (auto s : in_shape) have *= s;
      if (want != have)
        return fail("reshape element count mismatch: " + std::to_string(want) + " vs " +
                    std::to_string(have));
      LayoutMap m;
      m.sizes = t.sizes;
      m.offsets.assign(t.sizes.size(), 0);
      m.strides = suffix_products(t.sizes);
      return m;
    }
    case TransformKind::Collapsed: {
      std::int64_t have = 1;
      for (auto s : in_shape) have *= s;
      std::int64_t need = 0;
      if (!t.map.sizes.empty()) {
        std::vector<std::int64_t> last(t.map.sizes.size());
        for (size_t d = 0; d < t.map.sizes.size(); ++d) last[d] = t.map.sizes[d] - 1;
        need = t.map.addr(last);
      }
      if (need >= have) return fail("collapsed map exceeds the input view");
      return t.map;
    }
  }
  return fail("unknown transform");
}

std::optional<std::vector<std::int64_t>> chain_output_shape(const TransformChain& c,
                                                            std::string* error) {
  std::vector<std::int64_t> shape = c.input_shape;
  for (const auto& t : c.steps) {
    auto m = step_map(t, shape, error);
    if (!m) return std::nullopt;
    shape = m->sizes;
  }
  return shape;
}

std::optional<LayoutMap> chain_to_map(const TransformChain& c) {
  LayoutMap acc = LayoutMap::identity(c.input_shape);
  std::vector<std::int64_t> shape = c.input_shape;
  for (const auto& t : c.steps) {
    auto m = step_map(t, shape, nullptr);
    if (!m) return std::nullopt;
    auto combined = compose(acc, *m);
    if (!combined) return std::nullopt;
    acc = std::move(*combined);
    shape = acc.sizes;
  }
  return acc;
}

std::vector<std::int64_t> apply_chain_pointwise(const TransformChain& c) {
  // Stepwise: current[i] = source address of view element i.
  std::vector<std::int64_t> current;
  {
    std::int64_t n = 1;
    for (auto s : c.input_shape) n *= s;
    current.resize(static_cast<size_t>(n));
    std::iota(current.begin(), current.end(), 0);
  }
  std::vector<std::int64_t> shape = c.input_shape;
  for (const auto& t : c.steps) {
    auto m = step_map(t, shape, nullptr);
    if (!m) return {};
    std::vector<std::int64_t> next;
    for (std::int64_t a : m->enumerate()) next.push_back(current[static_cast<size_t>(a)]);
    current = std::move(next);
    shape = m->sizes;
  }
  return current;
}

ChainResult normalize(const TransformChain& c) {
  ChainResult result;
  std::vector<std::int64_t> shape = c.input_shape;
  std::vector<LayoutMap> runs;
  std::optional<LayoutMap> acc;

  int step_index = 0;
  for (const auto& t : c.steps) {
    std::string err;
    auto m = step_map(t, shape, &err);
    if (!m) {
      result.error = DivisibilityError{step_index, err};
      return result;
    }
    shape = m->sizes;
    if (!acc) {
      acc = std::move(*m);
    } else {
      auto combined = compose(*acc, *m);
      if (combined) {
        acc = std::move(*combined);
      } else {
        runs.push_back(std::move(*acc));
        acc = std::move(*m);
      }
    }
    ++step_index;
  }
  if (acc) runs.push_back(std::move(*acc));

  // Keep fusing adjacent runs until stable: the composite of two runs can
  // be affine even when the stepwise fold hit a boundary between them.
  bool merged = true;
  while (merged) {
    merged = false;
    for (size_t i = 0; i + 1 < runs.size(); ++i) {
      auto fused = compose(runs[i], runs[i + 1]);
      if (fused) {
        runs[i] = std::move(*fused);
        runs.erase(runs.begin() + static_cast<long>(i) + 1);
        merged = true;
        break;
      }
    }
  }

  TransformChain out;
  out.input_shape = c.input_shape;
  std::vector<std::int64_t> in = c.input_shape;
  for (auto& m : runs) {
    // Identity runs (inverse pairs, full-view slices) vanish entirely when
    // they preserve the running shape.
    if (m.offsets == std::vector<std::int64_t>(m.offsets.size(), 0) &&
        m == LayoutMap::identity(m.sizes) && m.sizes == in) {
      continue;
    }
    in = m.sizes;
    out.steps.push_back(Transform::collapsed(std::move(m)));
  }
  result.chain = std::move(out);
  return result;
}

// ---------------------------------------------------------------------------
// DMA hoisting
// ---------------------------------------------------------------------------

namespace {

// Merges adjacent dims with exactly nested strides; canonical for
// descriptor legality counting.
LayoutMap merge_contiguous(const LayoutMap& m) {
  LayoutMap out;
  for (size_t d = 0; d < m.sizes.size(); ++d) {
    if (!out.sizes.empty() && out.offsets.back() == 0 && m.offsets[d] == 0 &&
        out.strides.back() ==
            m.sizes[d] * m.strides[d]) {
      out.sizes.back() *= m.sizes[d];
      out.strides.back() = m.strides[d];
      continue;
    }
    out.sizes.push_back(m.sizes[d]);
    out.strides.push_back(m.strides[d]);
    out.offsets.push_back(m.offsets[d]);
  }
  return out;
}

bool monotone_strides(const LayoutMap& m) {
  for (size_t d = 1; d < m.strides.size(); ++d)
    if (m.strides[d] > m.strides[d - 1]) return false;
  return true;
}

}  // namespace

bool dma_expressible(const LayoutMap& m, const DmaCapability& cap) {
  LayoutMap merged = merge_contiguous(m);
  if (merged.rank() > cap.max_dims) return false;
  for (auto s : merged.strides) {
    if (s == 0) continue;
    if (s < cap.stride_min || s > cap.stride_max) return false;
  }
  std::int64_t base = 0;
  for (size_t d = 0; d < merged.sizes.size(); ++d) base += merged.offsets[d] * merged.strides[d];
  if (cap.burst_alignment > 1 && base % cap.burst_alignment != 0) return false;
  if (!monotone_strides(merged)) {
    if (!(cap.supports_transpose2d && merged.rank() == 2)) return false;
  }
  if (cap.bank_ok && !cap.bank_ok(merged)) return false;
  return true;
}

namespace {

// Pure permutation of the source view: offsets zero and strides a
// permutation of the suffix products of some shape.
bool as_permutation(const LayoutMap& m, std::vector<int>* perm,
                    std::vector<std::int64_t>* src_shape) {
  for (auto o : m.offsets)
    if (o != 0) return false;
  // Recover source dims: sort by stride descending gives the source order.
  std::vector<int> order(m.sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) {
    return m.strides[static_cast<size_t>(x)] > m.strides[static_cast<size_t>(y)];
  });
  std::vector<std::int64_t> shape;
  for (int d : order) shape.push_back(m.sizes[static_cast<size_t>(d)]);
  std::vector<std::int64_t> w = suffix_products(shape);
  for (size_t k = 0; k < order.size(); ++k)
    if (m.strides[static_cast<size_t>(order[k])] != w[k]) return false;
  // perm[d] = source position drawn by view dim d.
  perm->assign(m.sizes.size(), 0);
  for (size_t k = 0; k < order.size(); ++k) (*perm)[static_cast<size_t>(order[k])] = static_cast<int>(k);
  *src_shape = shape;
  return true;
}

}  // namespace

HoistResult hoist_to_dma(const TransformChain& chain, const DmaCapability& cap) {
  HoistResult r;
  r.residual.input_shape = chain.input_shape;
  std::vector<std::int64_t> shape = chain.input_shape;
  size_t taken = 0;
  for (; taken < chain.steps.size(); ++taken) {
    auto m = step_map(chain.steps[taken], shape, nullptr);
    if (!m) break;
    if (!dma_expressible(*m, cap)) break;
    r.descriptors.push_back(*m);
    shape = m->sizes;
  }

  // Partial hoist of a blocking pure permutation: run an in-flight
  // permutation that keeps a mergeable leading run (or a 2D stride swap
  // when supported), leaving a smaller on-core permutation behind.
  if (taken < chain.steps.size()) {
    auto m = step_map(chain.steps[taken], shape, nullptr);
    std::vector<int> perm;
    std::vector<std::int64_t> src_shape;
    if (m && as_permutation(*m, &perm, &src_shape) && m->rank() > cap.max_dims) {
      int rank = m->rank();
      std::vector<int> a_perm(static_cast<size_t>(rank));
      std::iota(a_perm.begin(), a_perm.end(), 0);
      if (cap.supports_transpose2d) {
        // Pull the view's innermost source dim to the inside.
        int inner = perm[static_cast<size_t>(rank) - 1];
        a_perm.erase(std::find(a_perm.begin(), a_perm.end(), inner));
        a_perm.push_back(inner);
      }
      auto a_map = step_map(Transform::transpose(a_perm), src_shape, nullptr);
      if (a_map && dma_expressible(*a_map, cap)) {
        // Residual permutation relative to the intermediate layout.
        std::vector<int> a_inv(static_cast<size_t>(rank));
        for (int d = 0; d < rank; ++d) a_inv[static_cast<size_t>(a_perm[static_cast<size_t>(d)])] = d;
        std::vector<int> rest(static_cast<size_t>(rank));
        for (int d = 0; d < rank; ++d)
          rest[static_cast<size_t>(d)] = a_inv[static_cast<size_t>(perm[static_cast<size_t>(d)])];
        r.descriptors.push_back(*a_map);
        r.residual.input_shape = a_map->sizes;
        r.residual.steps.push_back(Transform::transpose(rest));
        for (size_t k = taken + 1; k < chain.steps.size(); ++k)
          r.residual.steps.push_back(chain.steps[k]);
        return r;
      }
    }
  }

  r.residual.input_shape = shape;
  for (size_t k = taken; k < chain.steps.size(); ++k) r.residual.steps.push_back(chain.steps[k]);
  return r;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

nlohmann::ordered_json to_json(const LayoutMap& m) {
  return nlohmann::ordered_json{
      {"offsets", m.offsets}, {"sizes", m.sizes}, {"strides", m.strides}};
}

nlohmann::ordered_json to_json(const TransformChain& c) {
  nlohmann::ordered_json j;
  j["input_shape"] = c.input_shape;
  j["steps"] = nlohmann::ordered_json::array();
  for (const auto& t : c.steps) {
    nlohmann::ordered_json js;
    switch (t.kind) {
      case TransformKind::Tile:
        js["kind"] = "tile";
        js["axis"] = t.axis;
        js["factor"] = t.factor;
        break;
      case TransformKind::Pack:
        js["kind"] = "pack";
        js["axis"] = t.axis;
        break;
      case TransformKind::Transpose:
        js["kind"] = "transpose";
        js["perm"] = t.perm;
        break;
      case TransformKind::Slice:
        js["kind"] = "slice";
        js["offsets"] = t.offsets;
        js["sizes"] = t.sizes;
        break;
      case TransformKind::Reshape:
        js["kind"] = "reshape";
        js["shape"] = t.sizes;
        break;
      case TransformKind::Collapsed:
        js["kind"] = "collapsed";
        js["map"] = to_json(t.map);
        break;
    }
    j["steps"].push_back(js);
  }
  return j;
}

}  // namespace datoc
