#include "treespin/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace treespin {

TreeShape TreeShape::make(int d, int depth) {
  if (d < 1 || depth < 0) fail(ErrorCode::InvalidParams, "need arity d >= 1 and depth >= 0");
  TreeShape s;
  s.d = d;
  s.depth = depth;
  s.level_offset.assign(depth + 2, 0);
  Vertex sz = 1;
  for (int l = 0; l <= depth; ++l) {
    s.level_offset[l + 1] = s.level_offset[l] + sz;
    if (l < depth) {
      if (sz > (int64_t{1} << 56) / d) fail(ErrorCode::TooLarge, "tree too large to index");
      sz *= d;
    }
  }
  s.n = s.level_offset[depth + 1];
  return s;
}

int TreeShape::level_of(Vertex v) const {
  int l = 0;
  while (v >= level_offset[l + 1]) ++l;
  return l;
}

std::pair<Vertex, Vertex> TreeShape::descendant_range(Vertex x, int r) const {
  // In heap indexing, descendants of x at relative depth r are
  // [x*d^r + (d^r-1)/(d-1), ... + d^r).
  Vertex p = 1, geo = 0;
  for (int i = 0; i < r; ++i) {
    geo += p;
    p *= d;
  }
  Vertex first = x * p + geo;
  return {first, first + p};
}

std::vector<Vertex> TreeShape::block(Vertex x, int l) const {
  std::vector<Vertex> out;
  int h = height_of(x);
  int lim = std::min(l, h);
  for (int r = 0; r <= lim; ++r) {
    auto [a, b] = descendant_range(x, r);
    for (Vertex v = a; v < b; ++v) out.push_back(v);
  }
  return out;
}

std::vector<Vertex> TreeShape::block_boundary(Vertex x, int l) const {
  std::vector<Vertex> out;
  if (l > height_of(x)) return out;
  auto [a, b] = descendant_range(x, l);
  for (Vertex v = a; v < b; ++v) out.push_back(v);
  return out;
}

std::string Configuration::serialize() const {
  std::ostringstream os;
  for (size_t i = 0; i < states.size(); ++i) {
    if (i) os << ' ';
    os << static_cast<int>(states[i]) + 1;
  }
  return os.str();
}

Configuration Configuration::deserialize(const std::string& line, int k) {
  Configuration c;
  std::istringstream is(line);
  int v;
  while (is >> v) {
    if (v < 1 || v > k) fail(ErrorCode::ParseError, "state out of range in configuration line");
    c.states.push_back(static_cast<uint8_t>(v - 1));
  }
  return c;
}

bool config_valid(const TreeShape& shape, const SpinKernel& kernel, const Configuration& config) {
  if (config.states.size() != static_cast<size_t>(shape.n)) return false;
  for (int c : config.states)
    if (c < 0 || c >= kernel.k) return false;
  for (Vertex v = 1; v < shape.n; ++v)
    if (kernel.is_hard(config.at(shape.parent(v)), config.at(v))) return false;
  return true;
}

std::vector<int16_t> BoundarySpec::mask(const TreeShape& shape) const {
  std::vector<int16_t> m(static_cast<size_t>(shape.n), -1);
  for (auto& [v, c] : frozen) {
    if (v < 0 || v >= shape.n) fail(ErrorCode::InvalidParams, "frozen vertex out of range");
    m[static_cast<size_t>(v)] = static_cast<int16_t>(c);
  }
  return m;
}

void BoundarySpec::validate(const TreeShape& shape, const SpinKernel& kernel) const {
  auto m = mask(shape);
  for (Vertex v = 1; v < shape.n; ++v) {
    Vertex p = shape.parent(v);
    if (m[v] >= 0 && m[p] >= 0 && kernel.is_hard(m[p], m[v]))
      fail(ErrorCode::InconsistentBoundary, "frozen states clash on edge (" + std::to_string(p) + "," + std::to_string(v) + ")");
  }
  if (parent_of_root && m[0] >= 0 && kernel.is_hard(*parent_of_root, m[0]))
    fail(ErrorCode::InconsistentBoundary, "frozen root clashes with parent-of-root state");
  for (auto& [v, c] : frozen)
    if (c < 0 || c >= kernel.k) fail(ErrorCode::InvalidParams, "frozen state out of range");
}

Configuration broadcast_sample(const TreeShape& shape, const SpinKernel& kernel, Rng& rng,
                               std::optional<int> root_state) {
  Configuration config;
  config.states.resize(static_cast<size_t>(shape.n));
  int root = root_state ? *root_state : rng.discrete(std::span<const double>(kernel.pi));
  config.set(0, root);
  for (Vertex v = 1; v < shape.n; ++v) {
    int p = config.at(shape.parent(v));
    std::span<const double> row(kernel.M.data() + static_cast<size_t>(p) * kernel.k, kernel.k);
    config.set(v, rng.discrete(row));
  }
  return config;
}

double log_gibbs_weight(const TreeShape& shape, const SpinKernel& kernel, const Configuration& config) {
  if (!config_valid(shape, kernel, config)) return -std::numeric_limits<double>::infinity();
  double lw = std::log(kernel.pi[config.at(0)]);
  for (Vertex v = 1; v < shape.n; ++v) lw += std::log(kernel.m(config.at(shape.parent(v)), config.at(v)));
  return lw;
}

double gibbs_weight(const TreeShape& shape, const SpinKernel& kernel, const Configuration& config) {
  if (!config_valid(shape, kernel, config)) return 0.0;
  double w = kernel.pi[config.at(0)];
  for (Vertex v = 1; v < shape.n; ++v) w *= kernel.m(config.at(shape.parent(v)), config.at(v));
  return w;
}

std::vector<std::pair<Configuration, double>> enumerate_configs(const TreeShape& shape,
                                                                const SpinKernel& kernel,
                                                                int64_t guard) {
  return enumerate_configs(shape, kernel, BoundarySpec{}, guard);
}

std::vector<std::pair<Configuration, double>> enumerate_configs(const TreeShape& shape,
                                                                const SpinKernel& kernel,
                                                                const BoundarySpec& boundary,
                                                                int64_t guard) {
  boundary.validate(shape, kernel);
  auto frozen = boundary.mask(shape);
  std::vector<std::pair<Configuration, double>> out;
  Configuration cur;
  cur.states.resize(static_cast<size_t>(shape.n));
  // Vertices in BFS order: each parent precedes its children, so the weight
  // accumulates as a running product with pruning on hard edges.
  auto rec = [&](auto&& self, Vertex v, double w) -> void {
    if (v == shape.n) {
      if (static_cast<int64_t>(out.size()) >= guard)
        fail(ErrorCode::TooLarge, "enumeration exceeds guard of " + std::to_string(guard) + " states");
      out.emplace_back(cur, w);
      return;
    }
    int lo = 0, hi = kernel.k;
    if (frozen[v] >= 0) {
      lo = frozen[v];
      hi = lo + 1;
    }
    for (int c = lo; c < hi; ++c) {
      double step;
      if (v == 0)
        step = boundary.parent_of_root ? kernel.m(*boundary.parent_of_root, c) : kernel.pi[c];
      else
        step = kernel.m(cur.at(shape.parent(v)), c);
      if (step <= 0.0) continue;
      cur.set(v, c);
      self(self, v + 1, w * step);
    }
  };
  rec(rec, 0, 1.0);
  if (boundary.frozen.empty() && !boundary.parent_of_root) return out;
  // Conditional law: renormalize over the frozen-compatible slice.
  double total = 0.0;
  for (auto& [c, w] : out) total += w;
  if (total <= 0.0) fail(ErrorCode::ZeroProbabilityBoundary, "no valid configuration matches the boundary");
  for (auto& [c, w] : out) w /= total;
  return out;
}

std::vector<double> conditional_root_marginal(const TreeShape& shape, const SpinKernel& kernel,
                                              const BoundarySpec& boundary, Vertex x) {
  auto frozen = boundary.mask(shape);
  int k = kernel.k;
  int hx = shape.height_of(x);
  // Upward messages over T_x, normalized per vertex to dodge underflow.
  // m_v(c) prop. P(frozen values in T_v | sigma_v = c).
  std::vector<std::vector<double>> msg(static_cast<size_t>(shape.n));
  for (int r = hx; r >= 0; --r) {
    auto [a, b] = shape.descendant_range(x, r);
    for (Vertex v = a; v < b; ++v) {
      std::vector<double> m(k, 1.0);
      if (frozen[v] >= 0) {
        std::fill(m.begin(), m.end(), 0.0);
        m[frozen[v]] = 1.0;
      }
      if (r < hx) {
        for (int i = 0; i < shape.d; ++i) {
          const auto& cm = msg[static_cast<size_t>(shape.child(v, i))];
          for (int c = 0; c < k; ++c) {
            double s = 0.0;
            for (int c2 = 0; c2 < k; ++c2) s += kernel.m(c, c2) * cm[c2];
            m[c] *= s;
          }
        }
      }
      double tot = 0.0;
      for (double t : m) tot += t;
      if (tot <= 0.0) fail(ErrorCode::ZeroProbabilityBoundary, "boundary has zero probability");
      for (double& t : m) t /= tot;
      msg[static_cast<size_t>(v)] = std::move(m);
    }
  }
  std::vector<double> out(k);
  double tot = 0.0;
  for (int c = 0; c < k; ++c) {
    double prior = (x == 0 && boundary.parent_of_root) ? kernel.m(*boundary.parent_of_root, c) : kernel.pi[c];
    out[c] = prior * msg[static_cast<size_t>(x)][c];
    tot += out[c];
  }
  if (tot <= 0.0) fail(ErrorCode::ZeroProbabilityBoundary, "boundary has zero probability");
  for (double& t : out) t /= tot;
  return out;
}

namespace {

int64_t checked_pow(int64_t base, int64_t exp, int64_t guard) {
  int64_t r = 1;
  for (int64_t i = 0; i < exp; ++i) {
    if (r > guard / base) fail(ErrorCode::TooLarge, "boundary law exceeds guard");
    r *= base;
  }
  return r;
}

}  // namespace

std::vector<double> boundary_law(const TreeShape& shape, const SpinKernel& kernel, int l,
                                 int root_state, int64_t guard) {
  if (l < 0 || l > shape.depth) fail(ErrorCode::InvalidParams, "level out of range");
  int k = kernel.k;
  int64_t leaves = 1;
  for (int i = 0; i < l; ++i) leaves *= shape.d;
  checked_pow(k, leaves, guard);
  // f(r) maps a vertex state to the joint law of its depth-r boundary.
  // Regular tree: f depends only on r, not on the vertex.
  std::vector<std::vector<double>> f(k);  // current level: f[c] over tuples
  for (int c = 0; c < k; ++c) {
    f[c].assign(k, 0.0);
    f[c][c] = 1.0;
  }
  int64_t width = k;  // tuple space size at current r
  for (int r = 1; r <= l; ++r) {
    // g[c] = sum_c' M(c,c') f[c'] : child boundary law given the parent state
    std::vector<std::vector<double>> g(k, std::vector<double>(width, 0.0));
    for (int c = 0; c < k; ++c)
      for (int c2 = 0; c2 < k; ++c2) {
        double w = kernel.m(c, c2);
        if (w == 0.0) continue;
        for (int64_t t = 0; t < width; ++t) g[c][t] += w * f[c2][t];
      }
    int64_t new_width = 1;
    for (int i = 0; i < shape.d; ++i) new_width *= width;
    std::vector<std::vector<double>> nf(k);
    for (int c = 0; c < k; ++c) {
      // outer product of d independent child blocks
      std::vector<double> acc{1.0};
      for (int i = 0; i < shape.d; ++i) {
        std::vector<double> nxt(acc.size() * width);
        size_t idx = 0;
        for (double a : acc)
          for (int64_t t = 0; t < width; ++t) nxt[idx++] = a * g[c][t];
        acc = std::move(nxt);
      }
      nf[c] = std::move(acc);
    }
    f = std::move(nf);
    width = new_width;
  }
  return f[root_state];
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  double s = 0.0;
  for (size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

double reconstruction_tv(const TreeShape& shape, const SpinKernel& kernel, int l, int c, int c_prime,
                         int64_t guard) {
  if (c == c_prime) return 0.0;
  auto a = boundary_law(shape, kernel, l, c, guard);
  auto b = boundary_law(shape, kernel, l, c_prime, guard);
  return tv_distance(a, b);
}

double uniqueness_sup(const TreeShape& shape, const SpinKernel& kernel, int l, int64_t guard) {
  int k = kernel.k;
  std::vector<std::vector<double>> laws(k);
  for (int c = 0; c < k; ++c) laws[c] = boundary_law(shape, kernel, l, c, guard);
  int64_t width = static_cast<int64_t>(laws[0].size());
  // conditional root law per boundary tuple with positive mass
  std::vector<std::vector<double>> conds;
  for (int64_t t = 0; t < width; ++t) {
    std::vector<double> cond(k);
    double tot = 0.0;
    for (int c = 0; c < k; ++c) {
      cond[c] = kernel.pi[c] * laws[c][t];
      tot += cond[c];
    }
    if (tot <= 0.0) continue;
    for (double& x : cond) x /= tot;
    conds.push_back(std::move(cond));
  }
  double sup = 0.0;
  for (size_t i = 0; i < conds.size(); ++i)
    for (size_t j = i + 1; j < conds.size(); ++j)
      sup = std::max(sup, tv_distance(conds[i], conds[j]));
  return sup;
}

}  // namespace treespin
