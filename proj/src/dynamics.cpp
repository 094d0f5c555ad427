#include "treespin/dynamics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <unordered_map>

namespace treespin {

namespace {

// Open-addressed set of packed states. Linear probing, grows at 0.7 load.
class U64Set {
 public:
  explicit U64Set(size_t initial_pow2 = 1 << 12) {
    size_t cap = 1;
    while (cap < initial_pow2) cap <<= 1;
    slots_.assign(cap, kEmpty);
    mask_ = cap - 1;
  }

  // true if newly inserted
  bool insert(uint64_t x) {
    size_t i = slot_of(x);
    if (slots_[i] == x) return false;
    slots_[i] = x;
    if (++count_ * 10 > slots_.size() * 7) grow();
    return true;
  }

  bool contains(uint64_t x) const { return slots_[slot_of(x)] == x; }
  size_t size() const { return count_; }

 private:
  static constexpr uint64_t kEmpty = ~0ULL;

  size_t slot_of(uint64_t x) const {
    uint64_t h = x;
    h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ULL;
    h = (h ^ (h >> 27)) * 0x94D049BB133111EBULL;
    h ^= h >> 31;
    size_t i = static_cast<size_t>(h) & mask_;
    while (slots_[i] != kEmpty && slots_[i] != x) i = (i + 1) & mask_;
    return i;
  }

  void grow() {
    std::vector<uint64_t> old;
    old.swap(slots_);
    slots_.assign(old.size() * 2, kEmpty);
    mask_ = slots_.size() - 1;
    for (uint64_t x : old)
      if (x != kEmpty) slots_[slot_of(x)] = x;
  }

  std::vector<uint64_t> slots_;
  size_t mask_ = 0;
  size_t count_ = 0;
};

struct ChildRef {
  int32_t idx;    // >= 0: movable index
  int16_t state;  // frozen state when idx < 0
};

// Movable vertices of a block with everything else frozen; single-site moves
// and the Gibbs factors restricted to the block. States pack into a uint64
// (movable[0] in the high bits, so uint64 order is lexicographic).
struct BlockSystem {
  const SpinKernel* kernel = nullptr;
  int bits = 0;
  std::vector<Vertex> movable;  // ascending
  // parent encoding: idx >= 0 movable, -1 frozen at parent_state,
  // -2 root with parent-of-root factor, -3 root with pi prior
  std::vector<int32_t> parent_idx;
  std::vector<int16_t> parent_state;
  std::vector<std::vector<ChildRef>> children;

  size_t count() const { return movable.size(); }

  static BlockSystem build(const TreeShape& shape, const SpinKernel& kernel,
                           const Configuration& base, std::vector<Vertex> movable_in,
                           std::optional<int> parent_of_root) {
    BlockSystem sys;
    sys.kernel = &kernel;
    sys.movable = std::move(movable_in);
    std::sort(sys.movable.begin(), sys.movable.end());
    int bits = 1;
    while ((1 << bits) < kernel.k) ++bits;
    sys.bits = bits;
    if (bits * static_cast<int>(sys.movable.size()) > 63)
      fail(ErrorCode::TooLarge, "block state does not pack into 63 bits");
    std::unordered_map<Vertex, int32_t> index;
    index.reserve(sys.movable.size() * 2);
    for (size_t i = 0; i < sys.movable.size(); ++i) index[sys.movable[i]] = static_cast<int32_t>(i);
    sys.parent_idx.resize(sys.movable.size());
    sys.parent_state.resize(sys.movable.size());
    sys.children.resize(sys.movable.size());
    for (size_t i = 0; i < sys.movable.size(); ++i) {
      Vertex v = sys.movable[i];
      if (v == 0) {
        sys.parent_idx[i] = parent_of_root ? -2 : -3;
        sys.parent_state[i] = parent_of_root ? static_cast<int16_t>(*parent_of_root) : int16_t{-1};
      } else {
        Vertex p = shape.parent(v);
        auto it = index.find(p);
        if (it != index.end()) {
          sys.parent_idx[i] = it->second;
          sys.parent_state[i] = -1;
        } else {
          sys.parent_idx[i] = -1;
          sys.parent_state[i] = static_cast<int16_t>(base.at(p));
        }
      }
      if (shape.level_of(v) < shape.depth) {
        for (int ci = 0; ci < shape.d; ++ci) {
          Vertex w = shape.child(v, ci);
          auto it = index.find(w);
          if (it != index.end())
            sys.children[i].push_back({it->second, 0});
          else
            sys.children[i].push_back({-1, static_cast<int16_t>(base.at(w))});
        }
      }
    }
    return sys;
  }

  uint64_t encode(std::span<const uint8_t> st) const {
    uint64_t x = 0;
    for (size_t i = 0; i < st.size(); ++i) x = (x << bits) | st[i];
    return x;
  }
  void decode(uint64_t x, std::span<uint8_t> st) const {
    uint64_t m = (uint64_t{1} << bits) - 1;
    for (size_t i = st.size(); i-- > 0;) {
      st[i] = static_cast<uint8_t>(x & m);
      x >>= bits;
    }
  }

  bool parent_ok(size_t i, int c, std::span<const uint8_t> st) const {
    switch (parent_idx[i]) {
      case -3: return true;  // pi prior, positive by ergodicity
      case -2:
      case -1: return !kernel->is_hard(parent_state[i], c);
      default: return !kernel->is_hard(st[static_cast<size_t>(parent_idx[i])], c);
    }
  }

  bool move_ok(size_t i, int c, std::span<const uint8_t> st) const {
    if (!parent_ok(i, c, st)) return false;
    for (const ChildRef& ch : children[i]) {
      int cs = ch.idx >= 0 ? st[static_cast<size_t>(ch.idx)] : ch.state;
      if (kernel->is_hard(c, cs)) return false;
    }
    return true;
  }

  // Gibbs factors touching the block; constant outside factors dropped.
  double weight(std::span<const uint8_t> st) const {
    double w = 1.0;
    for (size_t i = 0; i < movable.size(); ++i) {
      int c = st[i];
      switch (parent_idx[i]) {
        case -3: w *= kernel->pi[c]; break;
        case -2:
        case -1: w *= kernel->m(parent_state[i], c); break;
        default: w *= kernel->m(st[static_cast<size_t>(parent_idx[i])], c); break;
      }
      for (const ChildRef& ch : children[i])
        if (ch.idx < 0) w *= kernel->m(c, ch.state);
    }
    return w;
  }
};

// BFS over the single-site move graph from `seed`; visit(packed, states) in
// discovery order. Stops early when `target` is reached.
template <typename Visitor>
std::vector<uint64_t> component_bfs(const BlockSystem& sys, std::span<const uint8_t> seed,
                                    int64_t guard, Visitor&& visit,
                                    std::optional<uint64_t> target = std::nullopt,
                                    bool* target_found = nullptr) {
  std::vector<uint64_t> order;
  U64Set visited;
  uint64_t s0 = sys.encode(seed);
  visited.insert(s0);
  order.push_back(s0);
  if (target && s0 == *target) {
    if (target_found) *target_found = true;
    return order;
  }
  std::vector<uint8_t> tmp(sys.count());
  int k = sys.kernel->k;
  for (size_t head = 0; head < order.size(); ++head) {
    sys.decode(order[head], tmp);
    visit(order[head], std::span<const uint8_t>(tmp));
    for (size_t i = 0; i < sys.count(); ++i) {
      int cur = tmp[i];
      for (int c = 0; c < k; ++c) {
        if (c == cur) continue;
        if (!sys.move_ok(i, c, tmp)) continue;
        int shift = sys.bits * static_cast<int>(sys.count() - 1 - i);
        uint64_t ns = order[head] & ~(((uint64_t{1} << sys.bits) - 1) << shift);
        ns |= static_cast<uint64_t>(c) << shift;
        if (visited.insert(ns)) {
          if (static_cast<int64_t>(order.size()) >= guard)
            fail(ErrorCode::TooLarge, "component exceeds guard of " + std::to_string(guard) + " states");
          order.push_back(ns);
          if (target && ns == *target) {
            if (target_found) *target_found = true;
            return order;
          }
        }
      }
    }
  }
  return order;
}

std::vector<Vertex> movable_of_block(const TreeShape& shape, Vertex x, int l,
                                     const std::vector<int16_t>& frozen) {
  std::vector<Vertex> movable;
  for (Vertex v : shape.block(x, l))
    if (frozen[static_cast<size_t>(v)] < 0) movable.push_back(v);
  return movable;
}

std::vector<uint8_t> restrict_states(const Configuration& config, std::span<const Vertex> verts) {
  std::vector<uint8_t> out(verts.size());
  for (size_t i = 0; i < verts.size(); ++i) out[i] = static_cast<uint8_t>(config.at(verts[i]));
  return out;
}

}  // namespace

void site_conditional(const TreeShape& shape, const SpinKernel& kernel, const Configuration& config,
                      Vertex v, std::optional<int> parent_of_root, std::span<double> out) {
  int k = kernel.k;
  for (int c = 0; c < k; ++c) {
    double w;
    if (v == 0)
      w = parent_of_root ? kernel.m(*parent_of_root, c) : kernel.pi[c];
    else
      w = kernel.m(config.at(shape.parent(v)), c);
    out[static_cast<size_t>(c)] = w;
  }
  if (shape.level_of(v) < shape.depth) {
    for (int i = 0; i < shape.d; ++i) {
      int cs = config.at(shape.child(v, i));
      for (int c = 0; c < k; ++c) out[static_cast<size_t>(c)] *= kernel.m(c, cs);
    }
  }
}

GlauberMove glauber_step(const TreeShape& shape, const SpinKernel& kernel, Configuration& config,
                         const BoundarySpec& boundary, Rng& rng) {
  for (auto& [v, c] : boundary.frozen)
    if (config.at(v) != c) fail(ErrorCode::InconsistentBoundary, "configuration disagrees with the frozen boundary");
  auto frozen = boundary.mask(shape);
  std::vector<Vertex> unfrozen;
  unfrozen.reserve(static_cast<size_t>(shape.n));
  for (Vertex v = 0; v < shape.n; ++v)
    if (frozen[static_cast<size_t>(v)] < 0) unfrozen.push_back(v);
  if (unfrozen.empty()) return {-1, 0, 0};
  Vertex v = unfrozen[rng.uniform_int(unfrozen.size())];
  std::vector<double> w(static_cast<size_t>(kernel.k));
  site_conditional(shape, kernel, config, v, boundary.parent_of_root, w);
  int c = rng.discrete(w);
  GlauberMove move{v, config.at(v), c};
  config.set(v, c);
  return move;
}

uint64_t one_step_change_set(const TreeShape& shape, const SpinKernel& kernel,
                             const Configuration& config, Vertex x, int64_t guard) {
  int k = kernel.k;
  int h = shape.height_of(x);
  int own = config.at(x);
  if (h == 0) return uint64_t{1} << own;  // the bottom level stays frozen

  // movable: T_x minus x minus the bottom level of T_x
  std::vector<Vertex> movable;
  for (int r = 1; r < h; ++r) {
    auto [a, b] = shape.descendant_range(x, r);
    for (Vertex v = a; v < b; ++v) movable.push_back(v);
  }
  auto [ca, cb] = shape.descendant_range(x, 1);
  uint64_t cset = uint64_t{1} << own;
  // the final move of x needs compatibility with its children only; the
  // parent of x is outside T_x by definition
  auto collect = [&](std::span<const uint8_t> st) {
    for (int c = 0; c < k; ++c) {
      if (cset & (uint64_t{1} << c)) continue;
      bool ok = true;
      for (Vertex w = ca; w < cb && ok; ++w) {
        int cs = movable.empty() ? config.at(w) : st[static_cast<size_t>(w - ca)];
        ok = !kernel.is_hard(c, cs);
      }
      if (ok) cset |= uint64_t{1} << c;
    }
  };

  if (movable.empty()) {
    collect({});
    return cset;
  }
  BlockSystem sys = BlockSystem::build(shape, kernel, config, movable, std::nullopt);
  auto seed = restrict_states(config, sys.movable);
  component_bfs(sys, seed, guard, [&](uint64_t, std::span<const uint8_t> st) { collect(st); });
  return cset;
}

VertexClass classify_from_cset(int k, uint64_t cset, int own_state, std::optional<int> parent_state) {
  VertexClass vc;
  vc.cset = cset;
  int size = std::popcount(cset);
  vc.type = size == 1 ? VertexType::rigid : (size == 2 ? VertexType::type2 : VertexType::type3);
  vc.free = cset == (uint64_t{1} << k) - 1;
  if (parent_state)
    vc.bad = (cset & ~(uint64_t{1} << *parent_state)) == (uint64_t{1} << own_state);
  return vc;
}

VertexClass classify_vertex(const TreeShape& shape, const SpinKernel& kernel,
                            const Configuration& config, Vertex x,
                            std::optional<int> parent_state, int64_t guard) {
  if (!parent_state && x != 0) parent_state = config.at(shape.parent(x));
  uint64_t cset = one_step_change_set(shape, kernel, config, x, guard);
  return classify_from_cset(kernel.k, cset, config.at(x), parent_state);
}

namespace {

// Bottom-up coloring C-sets for all vertices with index >= base: x reaches c
// in one step iff no bad child of x is colored c.
void coloring_csets_from(const TreeShape& shape, int k, const Configuration& config, Vertex base,
                         std::vector<uint64_t>& cset) {
  uint64_t full = (uint64_t{1} << k) - 1;
  for (Vertex v = shape.n - 1; v >= base; --v) {
    int own = config.at(v);
    if (shape.level_of(v) == shape.depth) {
      cset[static_cast<size_t>(v)] = uint64_t{1} << own;
      continue;
    }
    uint64_t blocked = 0;
    for (int i = 0; i < shape.d; ++i) {
      Vertex w = shape.child(v, i);
      uint64_t cw = cset[static_cast<size_t>(w)];
      if ((cw & ~(uint64_t{1} << own)) == (uint64_t{1} << config.at(w)))
        blocked |= uint64_t{1} << config.at(w);
    }
    cset[static_cast<size_t>(v)] = (full & ~blocked) | (uint64_t{1} << own);
  }
}

}  // namespace

std::vector<VertexClass> coloring_fast_classify(const TreeShape& shape, const SpinKernel& kernel,
                                                const Configuration& config) {
  if (!is_coloring_kernel(kernel)) fail(ErrorCode::NotColoringModel, "fast classifier needs the coloring channel");
  if (!config_valid(shape, kernel, config)) fail(ErrorCode::InvalidParams, "configuration is not a proper coloring");
  std::vector<uint64_t> cset(static_cast<size_t>(shape.n));
  coloring_csets_from(shape, kernel.k, config, 0, cset);
  std::vector<VertexClass> out(static_cast<size_t>(shape.n));
  for (Vertex v = 0; v < shape.n; ++v) {
    std::optional<int> ps;
    if (v != 0) ps = config.at(shape.parent(v));
    out[static_cast<size_t>(v)] = classify_from_cset(kernel.k, cset[static_cast<size_t>(v)], config.at(v), ps);
  }
  return out;
}

Configuration ComponentSet::member_config(size_t i, const Configuration& base) const {
  Configuration c = base;
  for (size_t j = 0; j < movable.size(); ++j) c.set(movable[j], members[i][j]);
  return c;
}

ComponentSet component_of(const TreeShape& shape, const SpinKernel& kernel,
                          const Configuration& config, Vertex x, int l, int64_t guard,
                          const BoundarySpec& boundary) {
  auto frozen = boundary.mask(shape);
  ComponentSet comp;
  comp.x = x;
  comp.l = l;
  comp.movable = movable_of_block(shape, x, l, frozen);
  if (comp.movable.empty()) {
    comp.members.push_back({});
    comp.weights.push_back(1.0);
    comp.seed_index = 0;
    return comp;
  }
  BlockSystem sys = BlockSystem::build(shape, kernel, config, comp.movable, boundary.parent_of_root);
  auto seed = restrict_states(config, sys.movable);
  auto order = component_bfs(sys, seed, guard, [](uint64_t, std::span<const uint8_t>) {});
  std::sort(order.begin(), order.end());  // canonical: lexicographic in vertex order
  uint64_t s0 = sys.encode(seed);
  comp.members.reserve(order.size());
  comp.weights.reserve(order.size());
  double total = 0.0;
  std::vector<uint8_t> tmp(sys.count());
  for (size_t i = 0; i < order.size(); ++i) {
    if (order[i] == s0) comp.seed_index = i;
    sys.decode(order[i], tmp);
    comp.members.emplace_back(tmp.begin(), tmp.end());
    double w = sys.weight(tmp);
    comp.weights.push_back(w);
    total += w;
  }
  for (double& w : comp.weights) w /= total;
  return comp;
}

Vertex component_dynamics_step(const TreeShape& shape, const SpinKernel& kernel,
                               Configuration& config, int l, Rng& rng, int64_t guard,
                               const BoundarySpec& boundary) {
  Vertex x = static_cast<Vertex>(rng.uniform_int(static_cast<uint64_t>(shape.n)));
  ComponentSet comp = component_of(shape, kernel, config, x, l, guard, boundary);
  size_t pick = static_cast<size_t>(rng.discrete(comp.weights));
  for (size_t j = 0; j < comp.movable.size(); ++j) config.set(comp.movable[j], comp.members[pick][j]);
  return x;
}

bool same_component(const TreeShape& shape, const SpinKernel& kernel, const Configuration& a,
                    const Configuration& b, Vertex x, int l, int64_t guard,
                    const BoundarySpec& boundary) {
  auto frozen = boundary.mask(shape);
  auto movable = movable_of_block(shape, x, l, frozen);
  for (Vertex v = 0; v < shape.n; ++v) {
    bool in_movable = std::binary_search(movable.begin(), movable.end(), v);
    if (!in_movable && a.at(v) != b.at(v))
      fail(ErrorCode::InvalidParams, "configurations differ outside the block");
  }
  if (movable.empty()) return true;
  BlockSystem sys = BlockSystem::build(shape, kernel, a, movable, boundary.parent_of_root);
  auto seed = restrict_states(a, sys.movable);
  uint64_t target = sys.encode(restrict_states(b, sys.movable));
  bool found = false;
  component_bfs(
      sys, seed, guard, [](uint64_t, std::span<const uint8_t>) {}, target, &found);
  return found;
}

Irreducibility is_irreducible(const TreeShape& shape, const SpinKernel& kernel,
                              const BoundarySpec& boundary, int64_t guard) {
  auto all = enumerate_configs(shape, kernel, boundary, guard);
  auto frozen = boundary.mask(shape);
  std::vector<Vertex> movable;
  for (Vertex v = 0; v < shape.n; ++v)
    if (frozen[static_cast<size_t>(v)] < 0) movable.push_back(v);
  Irreducibility out;
  out.state_count = static_cast<int64_t>(all.size());
  if (movable.empty() || all.size() <= 1) {
    out.component_count = all.empty() ? 0 : 1;
    out.irreducible = out.component_count == 1;
    return out;
  }
  BlockSystem sys = BlockSystem::build(shape, kernel, all.front().first, movable, boundary.parent_of_root);
  U64Set visited;
  std::vector<uint8_t> tmp(sys.count());
  std::vector<uint64_t> queue;
  int k = kernel.k;
  for (auto& [config, w] : all) {
    uint64_t s = sys.encode(restrict_states(config, sys.movable));
    if (!visited.insert(s)) continue;
    ++out.component_count;
    queue.clear();
    queue.push_back(s);
    for (size_t head = 0; head < queue.size(); ++head) {
      sys.decode(queue[head], tmp);
      for (size_t i = 0; i < sys.count(); ++i) {
        int cur = tmp[i];
        for (int c = 0; c < k; ++c) {
          if (c == cur || !sys.move_ok(i, c, tmp)) continue;
          int shift = sys.bits * static_cast<int>(sys.count() - 1 - i);
          uint64_t ns = queue[head] & ~(((uint64_t{1} << sys.bits) - 1) << shift);
          ns |= static_cast<uint64_t>(c) << shift;
          if (visited.insert(ns)) queue.push_back(ns);
        }
      }
    }
  }
  out.irreducible = out.component_count == 1;
  return out;
}

bool vertex_is_free(const TreeShape& shape, const SpinKernel& kernel, const Configuration& config,
                    Vertex y, int64_t guard) {
  uint64_t full = (uint64_t{1} << kernel.k) - 1;
  return one_step_change_set(shape, kernel, config, y, guard) == full;
}

CondIndepResult check_condindep(const TreeShape& shape, const SpinKernel& kernel,
                                const Configuration& tau, int l, int h,
                                std::optional<int> parent_of_root, int64_t guard,
                                bool membership_sweep) {
  if (h < 1 || h + 2 >= l) fail(ErrorCode::InvalidParams, "cut must satisfy 1 <= h and h+2 < l");
  if (h + 2 > shape.depth) fail(ErrorCode::InvalidParams, "free level h+2 exceeds the tree depth");
  if (!config_valid(shape, kernel, tau)) fail(ErrorCode::InvalidParams, "tau is not a valid configuration");
  int k = kernel.k;
  bool coloring = is_coloring_kernel(kernel);

  Vertex eta_begin = shape.level_begin(h), eta_end = shape.level_end(h);
  int64_t eta_space = 1;
  for (Vertex v = eta_begin; v < eta_end; ++v) {
    eta_space *= k;
    if (eta_space > 1'000'000) fail(ErrorCode::TooLarge, "eta level too wide to tabulate");
  }

  std::vector<Vertex> movable = shape.block(0, l);
  BlockSystem sys = BlockSystem::build(shape, kernel, tau, movable, parent_of_root);
  auto seed = restrict_states(tau, sys.movable);
  std::vector<int32_t> midx(static_cast<size_t>(shape.n), -1);
  for (size_t i = 0; i < sys.movable.size(); ++i)
    midx[static_cast<size_t>(sys.movable[i])] = static_cast<int32_t>(i);

  CondIndepResult res;
  res.good_mass.assign(static_cast<size_t>(k), std::vector<double>(static_cast<size_t>(eta_space), 0.0));
  res.all_mass = res.good_mass;

  Configuration work = tau;
  std::vector<uint64_t> cset_scratch(static_cast<size_t>(shape.n), 0);
  uint64_t full = (uint64_t{1} << k) - 1;
  double total_mass = 0.0, good_total = 0.0;

  auto is_good = [&](std::span<const uint8_t> st) {
    for (size_t i = 0; i < sys.movable.size(); ++i) work.set(sys.movable[i], st[i]);
    if (coloring) {
      coloring_csets_from(shape, k, work, shape.level_begin(h + 2), cset_scratch);
      for (Vertex y = shape.level_begin(h + 2); y < shape.level_end(h + 2); ++y)
        if (cset_scratch[static_cast<size_t>(y)] != full) return false;
      return true;
    }
    for (Vertex y = shape.level_begin(h + 2); y < shape.level_end(h + 2); ++y)
      if (!vertex_is_free(shape, kernel, work, y, guard)) return false;
    return true;
  };

  auto order = component_bfs(sys, seed, guard, [&](uint64_t, std::span<const uint8_t> st) {
    double w = coloring ? 1.0 : sys.weight(st);
    int64_t idx = 0;
    for (Vertex v = eta_begin; v < eta_end; ++v)
      idx = idx * k + st[static_cast<size_t>(midx[static_cast<size_t>(v)])];
    int root = st[static_cast<size_t>(midx[0])];
    res.all_mass[static_cast<size_t>(root)][static_cast<size_t>(idx)] += w;
    total_mass += w;
    if (is_good(st)) {
      res.good_mass[static_cast<size_t>(root)][static_cast<size_t>(idx)] += w;
      good_total += w;
    }
  });
  res.component_size = static_cast<int64_t>(order.size());
  res.good_fraction = good_total / total_mass;
  if (good_total <= 0.0) fail(ErrorCode::EmptyGoodSet, "A_tau misses the component entirely");

  for (int64_t idx = 0; idx < eta_space; ++idx) {
    double denom = 0.0;
    for (int c = 0; c < k; ++c) denom += res.good_mass[static_cast<size_t>(c)][static_cast<size_t>(idx)];
    if (denom <= 0.0) continue;
    ++res.eta_admissible;
    BoundarySpec bs;
    bs.parent_of_root = parent_of_root;
    int64_t rem = idx;
    for (Vertex v = eta_end - 1; v >= eta_begin; --v) {
      bs.freeze(v, static_cast<int>(rem % k));
      rem /= k;
    }
    auto rhs = conditional_root_marginal(shape, kernel, bs, 0);
    for (int c = 0; c < k; ++c) {
      double lhs = res.good_mass[static_cast<size_t>(c)][static_cast<size_t>(idx)] / denom;
      res.max_discrepancy = std::max(res.max_discrepancy, std::abs(lhs - rhs[static_cast<size_t>(c)]));
    }
  }

  // indices of movable vertices at levels >= h: the exact group key of
  // Claim 4.2 ("agreeing on the cut level and below")
  std::vector<size_t> below_cut;
  for (size_t i = 0; i < sys.movable.size(); ++i)
    if (shape.level_of(sys.movable[i]) >= h) below_cut.push_back(i);
  bool can_sweep = membership_sweep && sys.bits * static_cast<int>(below_cut.size()) <= 63;
  if (can_sweep) {
    // exhaustive DFS over Omega^tau_B: every A_tau group must lie entirely
    // inside or entirely outside the component
    U64Set comp_set(order.size() * 2);
    for (uint64_t s : order) comp_set.insert(s);
    U64Set in_flags(1 << 16), out_flags(1 << 16), seen_keys(1 << 16);
    std::vector<uint8_t> st(sys.count());
    int64_t violations = 0, groups = 0;
    auto dfs = [&](auto&& self, size_t i) -> void {
      if (i == sys.count()) {
        if (!is_good(st)) return;
        uint64_t key = 0;
        for (size_t j : below_cut) key = (key << sys.bits) | st[j];
        bool in_comp = comp_set.contains(sys.encode(st));
        if (seen_keys.insert(key)) ++groups;
        if (in_comp) {
          if (out_flags.contains(key)) ++violations;
          in_flags.insert(key);
        } else {
          if (in_flags.contains(key)) ++violations;
          out_flags.insert(key);
        }
        return;
      }
      // parents precede children, so parent factors and frozen-children
      // factors prune the DFS exactly
      for (int c = 0; c < k; ++c) {
        if (!sys.parent_ok(i, c, st)) continue;
        bool ok = true;
        for (const ChildRef& ch : sys.children[i])
          if (ch.idx < 0 && kernel.is_hard(c, ch.state)) ok = false;
        if (!ok) continue;
        st[i] = static_cast<uint8_t>(c);
        self(self, i + 1);
      }
    };
    dfs(dfs, 0);
    res.group_count = groups;
    res.group_violations = violations;
  } else {
    res.group_count = -1;
    res.group_violations = membership_sweep ? -1 : 0;
  }
  return res;
}

}  // namespace treespin
