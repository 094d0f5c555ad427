#include "treespin/ratio.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace treespin {

double RatioVector::deviation() const {
  double m = 0.0;
  for (double x : r) m = std::max(m, std::abs(x - 1.0));
  return m;
}

RatioVector RatioVector::point_mass(const SpinKernel& kernel, int c) {
  RatioVector rv;
  rv.r.assign(kernel.k, 0.0);
  rv.r[c] = 1.0 / kernel.pi[c];
  return rv;
}

RatioVector ratio_step(const SpinKernel& kernel, std::span<const RatioVector> children) {
  int k = kernel.k;
  std::vector<double> num(k, 1.0);
  std::vector<double> mr(k);
  for (const RatioVector& child : children) {
    for (int c = 0; c < k; ++c) {
      double s = 0.0;
      for (int c2 = 0; c2 < k; ++c2) s += kernel.m(c, c2) * child.r[c2];
      mr[c] = s;
    }
    for (int c = 0; c < k; ++c) num[c] *= mr[c];
  }
  double den = 0.0;
  for (int c = 0; c < k; ++c) den += kernel.pi[c] * num[c];
  if (den <= 0.0) fail(ErrorCode::DegenerateDenominator, "ratio recursion denominator vanished (impossible boundary)");
  RatioVector out;
  out.r.resize(k);
  for (int c = 0; c < k; ++c) out.r[c] = num[c] / den;
  // kill float drift off the simplex; exact zeros are preserved
  double dot = 0.0;
  for (int c = 0; c < k; ++c) dot += kernel.pi[c] * out.r[c];
  for (int c = 0; c < k; ++c) out.r[c] /= dot;
  return out;
}

RatioVector ratio_from_boundary(const TreeShape& shape, const SpinKernel& kernel, Vertex x, int l,
                                std::span<const int> boundary) {
  auto [a, b] = shape.descendant_range(x, l);
  if (static_cast<int64_t>(boundary.size()) != b - a)
    fail(ErrorCode::InvalidParams, "boundary length does not match L_{x,l}");
  if (l > shape.height_of(x)) fail(ErrorCode::InvalidParams, "level exceeds subtree height");
  std::vector<RatioVector> cur;
  cur.reserve(boundary.size());
  for (int c : boundary) {
    if (c < 0 || c >= kernel.k) fail(ErrorCode::InvalidParams, "boundary state out of range");
    cur.push_back(RatioVector::point_mass(kernel, c));
  }
  try {
    for (int r = l; r > 0; --r) {
      std::vector<RatioVector> up(cur.size() / shape.d);
      for (size_t i = 0; i < up.size(); ++i)
        up[i] = ratio_step(kernel, std::span<const RatioVector>(cur.data() + i * shape.d, shape.d));
      cur = std::move(up);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DegenerateDenominator)
      fail(ErrorCode::ZeroProbabilityBoundary, "boundary has zero probability");
    throw;
  }
  return cur.front();
}

namespace {

// max of a.u over {|u_i| <= 1, pi.u = 0}: Lagrangian solution u_i = sgn(a_i - t pi_i)
// with one fractional coordinate at the breakpoint where the constraint crosses 0.
double box_lp_max(std::span<const double> a, std::span<const double> pi) {
  int k = static_cast<int>(a.size());
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return a[i] / pi[i] < a[j] / pi[j]; });
  // start with u = +1 everywhere, then flip coordinates to -1 in increasing
  // a_i/pi_i order until pi.u crosses 0; the crossing coordinate goes fractional.
  double dot = 0.0;  // pi.u
  double val = 0.0;  // a.u
  for (int i = 0; i < k; ++i) {
    dot += pi[i];
    val += a[i];
  }
  for (int idx : order) {
    if (dot - 2 * pi[idx] >= 0.0) {
      dot -= 2 * pi[idx];
      val -= 2 * a[idx];
    } else {
      // set u_idx = x with pi.u = 0: x = (dot - pi_idx*1) ... solve dot - pi_idx + pi_idx*x = 0
      double x = (pi[idx] - dot) / pi[idx];
      val += a[idx] * (x - 1.0);
      return val;
    }
  }
  return val;  // dot hit 0 exactly
}

std::vector<double> matrix_power(const SpinKernel& kernel, int m) {
  int k = kernel.k;
  std::vector<double> A(static_cast<size_t>(k) * k, 0.0);
  for (int i = 0; i < k; ++i) A[static_cast<size_t>(i) * k + i] = 1.0;
  std::vector<double> tmp(A.size());
  for (int step = 0; step < m; ++step) {
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        double s = 0.0;
        for (int t = 0; t < k; ++t) s += A[static_cast<size_t>(i) * k + t] * kernel.m(t, j);
        tmp[static_cast<size_t>(i) * k + j] = s;
      }
    A.swap(tmp);
  }
  return A;
}

}  // namespace

double contraction_factor(const SpinKernel& kernel, int m) {
  if (m < 0) fail(ErrorCode::InvalidParams, "m must be >= 0");
  int k = kernel.k;
  if (k == 1) return 0.0;
  auto A = matrix_power(kernel, m);
  double best = 0.0;
  std::vector<double> row(k), neg(k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      row[j] = A[static_cast<size_t>(i) * k + j];
      neg[j] = -row[j];
    }
    best = std::max(best, box_lp_max(row, kernel.pi));
    best = std::max(best, box_lp_max(neg, kernel.pi));
  }
  return best;
}

double contraction_factor_vertices(const SpinKernel& kernel, int m) {
  int k = kernel.k;
  if (k == 1) return 0.0;
  auto A = matrix_power(kernel, m);
  double best = 0.0;
  for (int c = 0; c < k; ++c) {
    double denom = 0.0, numer = 0.0;
    for (int j = 0; j < k; ++j) {
      double u = (j == c ? 1.0 / kernel.pi[c] : 0.0) - 1.0;
      denom = std::max(denom, std::abs(u));
    }
    for (int i = 0; i < k; ++i) {
      double s = 0.0;
      for (int j = 0; j < k; ++j)
        s += A[static_cast<size_t>(i) * k + j] * ((j == c ? 1.0 / kernel.pi[c] : 0.0) - 1.0);
      numer = std::max(numer, std::abs(s));
    }
    best = std::max(best, numer / denom);
  }
  return best;
}

int minimal_contraction_m(const SpinKernel& kernel, double threshold, int m_cap) {
  for (int m = 0; m <= m_cap; ++m)
    if (contraction_factor(kernel, m) < threshold) return m;
  fail(ErrorCode::PreconditionNotMet, "no m up to cap reaches the contraction threshold");
}

namespace {

// Walk every boundary tuple of L_{0,l} with its mu-probability and the
// conditional root ratio computed by the BP recursion.
template <typename F>
void for_each_boundary(const TreeShape& shape, const SpinKernel& kernel, int l, int64_t guard, F&& f) {
  int k = kernel.k;
  std::vector<std::vector<double>> laws(k);
  for (int c = 0; c < k; ++c) laws[c] = boundary_law(shape, kernel, l, c, guard);
  int64_t width = static_cast<int64_t>(laws[0].size());
  int64_t leaves = shape.descendant_range(0, l).second - shape.descendant_range(0, l).first;
  std::vector<int> tuple(static_cast<size_t>(leaves));
  for (int64_t t = 0; t < width; ++t) {
    int64_t rem = t;
    for (int64_t i = leaves - 1; i >= 0; --i) {
      tuple[static_cast<size_t>(i)] = static_cast<int>(rem % k);
      rem /= k;
    }
    double mu = 0.0;
    for (int c = 0; c < k; ++c) mu += kernel.pi[c] * laws[c][t];
    f(std::span<const int>(tuple), t, mu, laws);
  }
}

}  // namespace

MeanDeviation mean_deviation_identity(const TreeShape& shape, const SpinKernel& kernel, int l, int c,
                                      int64_t guard) {
  MeanDeviation out;
  for_each_boundary(shape, kernel, l, guard,
                    [&](std::span<const int> tuple, int64_t t, double mu,
                        const std::vector<std::vector<double>>& laws) {
                      out.rhs += std::abs(laws[c][t] - mu);
                      if (mu <= 0.0) return;
                      RatioVector rv = ratio_from_boundary(shape, kernel, 0, l, tuple);
                      out.lhs += mu * std::abs(rv.r[c] - 1.0);
                    });
  return out;
}

double mean_deviation_exact(const TreeShape& shape, const SpinKernel& kernel, int l, int64_t guard) {
  double e = 0.0;
  for_each_boundary(shape, kernel, l, guard,
                    [&](std::span<const int> tuple, int64_t, double mu, const auto&) {
                      if (mu <= 0.0) return;
                      e += mu * ratio_from_boundary(shape, kernel, 0, l, tuple).deviation();
                    });
  return e;
}

TailEstimate deviation_tail_exact(const TreeShape& shape, const SpinKernel& kernel, int l, double z,
                                  int64_t guard) {
  if (z <= 0.0) fail(ErrorCode::InvalidParams, "z must be > 0");
  TailEstimate out;
  out.exact = true;
  // R <= 1/pi_min - 1 always, so the tail is identically zero past the cap.
  if (z >= 1.0 / kernel.pi_min - 1.0) {
    out.ci_high = 0.0;
    return out;
  }
  for_each_boundary(shape, kernel, l, guard,
                    [&](std::span<const int> tuple, int64_t, double mu, const auto&) {
                      if (mu <= 0.0) return;
                      if (ratio_from_boundary(shape, kernel, 0, l, tuple).deviation() > z) out.g += mu;
                    });
  out.ci_low = out.g;
  out.ci_high = out.g;
  return out;
}

TailEstimate deviation_tail_mc(const TreeShape& shape, const SpinKernel& kernel, int l, double z,
                               int64_t samples, Rng& rng) {
  if (z <= 0.0) fail(ErrorCode::InvalidParams, "z must be > 0");
  if (l > shape.depth) fail(ErrorCode::InvalidParams, "level exceeds tree depth");
  TailEstimate out;
  out.samples = samples;
  if (z >= 1.0 / kernel.pi_min - 1.0) {
    out.ci_high = 0.0;
    return out;
  }
  auto [a, b] = shape.descendant_range(0, l);
  std::vector<int> tuple(static_cast<size_t>(b - a));
  int64_t hits = 0;
  for (int64_t s = 0; s < samples; ++s) {
    Configuration config = broadcast_sample(shape, kernel, rng);
    for (Vertex v = a; v < b; ++v) tuple[static_cast<size_t>(v - a)] = config.at(v);
    if (ratio_from_boundary(shape, kernel, 0, l, tuple).deviation() > z) ++hits;
  }
  double n = static_cast<double>(samples);
  double phat = hits / n;
  out.g = phat;
  // Wilson interval at z_0.975
  double zq = 1.959963984540054;
  double den = 1.0 + zq * zq / n;
  double center = (phat + zq * zq / (2 * n)) / den;
  double half = zq * std::sqrt(phat * (1 - phat) / n + zq * zq / (4 * n * n)) / den;
  out.ci_low = std::max(0.0, center - half);
  out.ci_high = std::min(1.0, center + half);
  return out;
}

}  // namespace treespin
