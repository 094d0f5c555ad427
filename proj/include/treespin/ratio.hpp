#pragma once

#include <span>
#include <vector>

#include "treespin/tree.hpp"

namespace treespin {

// BP ratio vector: r >= 0 on the simplex {pi . r = 1}; r encodes the ratio
// of conditional to unconditional root law. Deviation R = ||r - 1||_inf.
struct RatioVector {
  std::vector<double> r;

  double deviation() const;
  // point-mass encoding: conditional forced to state c
  static RatioVector point_mass(const SpinKernel& kernel, int c);
  static RatioVector ones(int k) { return {std::vector<double>(k, 1.0)}; }
};

// One step of the ratio recursion
//   out(c) = prod_i (M r_i)(c) / sum_c' pi_c' prod_i (M r_i)(c').
// Output renormalized to pi.r = 1; zero entries stay exactly zero.
// DegenerateDenominator when the denominator vanishes.
RatioVector ratio_step(const SpinKernel& kernel, std::span<const RatioVector> children);

// Iterated ratio_step from a full boundary on L_{x,l} up to x. Equals
// conditional_root_marginal(c)/pi_c entrywise. `boundary` lists the states
// of L_{x,l} in index order.
RatioVector ratio_from_boundary(const TreeShape& shape, const SpinKernel& kernel, Vertex x, int l,
                                std::span<const int> boundary);

// Exact sup over the simplex {pi.r=1, r>=0} of ||M^m r - 1||_inf / ||r - 1||_inf.
// Since r=1 is interior and the ratio is scale-invariant along rays from 1,
// this is the inf-norm of M^m restricted to {pi.u = 0}; each row reduces to a
// one-constraint box LP solved exactly by a breakpoint scan.
double contraction_factor(const SpinKernel& kernel, int m);

// Same sup restricted to the simplex vertices r = e_c/pi_c (a lower bound;
// strictly smaller for some kernels).
double contraction_factor_vertices(const SpinKernel& kernel, int m);

// Smallest m with contraction_factor(kernel, m) < threshold.
int minimal_contraction_m(const SpinKernel& kernel, double threshold = 0.25, int m_cap = 4096);

struct MeanDeviation {
  double lhs = 0;  // E_{tau~mu} |R~(c) - 1|
  double rhs = 0;  // 2 d_TV(mu^c on L_l, mu on L_l)
};
// The duality identity, both sides computed exactly by boundary-law
// enumeration (lhs runs the BP recursion per boundary).
MeanDeviation mean_deviation_identity(const TreeShape& shape, const SpinKernel& kernel, int l, int c,
                                      int64_t guard = kDefaultGuard);

// Exact E_{tau~mu} R_{x,l}
double mean_deviation_exact(const TreeShape& shape, const SpinKernel& kernel, int l,
                            int64_t guard = kDefaultGuard);

struct TailEstimate {
  double g = 0;  // Pr_{tau~mu}(R_{x,l} > z), exact or estimated
  double ci_low = 0;
  double ci_high = 1;
  bool exact = false;
  int64_t samples = 0;
};
TailEstimate deviation_tail_exact(const TreeShape& shape, const SpinKernel& kernel, int l, double z,
                                  int64_t guard = kDefaultGuard);
TailEstimate deviation_tail_mc(const TreeShape& shape, const SpinKernel& kernel, int l, double z,
                               int64_t samples, Rng& rng);

}  // namespace treespin
