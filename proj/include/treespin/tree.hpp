#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "treespin/kernel.hpp"
#include "treespin/rng.hpp"

namespace treespin {

using Vertex = int64_t;

// Complete d-ary tree of `depth` levels below the root, vertices indexed in
// breadth-first order (root 0, children of v are d*v+1 .. d*v+d). Level sets
// and per-level slices of any subtree are contiguous index ranges.
struct TreeShape {
  int d = 0;
  int depth = 0;
  Vertex n = 0;
  std::vector<Vertex> level_offset;  // level_offset[l] = first index at level l; size depth+2

  static TreeShape make(int d, int depth);

  Vertex parent(Vertex v) const { return (v - 1) / d; }
  Vertex child(Vertex v, int i) const { return d * v + 1 + i; }
  int level_of(Vertex v) const;
  int height_of(Vertex v) const { return depth - level_of(v); }
  Vertex level_begin(int l) const { return level_offset[l]; }
  Vertex level_end(int l) const { return level_offset[l + 1]; }
  Vertex level_size(int l) const { return level_offset[l + 1] - level_offset[l]; }

  // Descendants of x at relative depth r: the contiguous range [first, last).
  std::pair<Vertex, Vertex> descendant_range(Vertex x, int r) const;

  // Block B_{x,l}: x plus the l levels below it, clipped at the leaves
  // (so B_{x,l} = T_x when x is within distance l of the leaves).
  std::vector<Vertex> block(Vertex x, int l) const;
  // Block boundary L_{x,l}: relative depth exactly l (empty when clipped).
  std::vector<Vertex> block_boundary(Vertex x, int l) const;
  std::vector<Vertex> subtree(Vertex x) const { return block(x, height_of(x)); }
};

struct Configuration {
  std::vector<uint8_t> states;  // one state in [0,k) per vertex, BFS order

  int at(Vertex v) const { return states[static_cast<size_t>(v)]; }
  void set(Vertex v, int c) { states[static_cast<size_t>(v)] = static_cast<uint8_t>(c); }

  // One line of space-separated 1-based states in level order.
  std::string serialize() const;
  static Configuration deserialize(const std::string& line, int k);
};

bool config_valid(const TreeShape& shape, const SpinKernel& kernel, const Configuration& config);

// Partial freeze: frozen vertices plus the virtual parent-of-root (the
// paper's Omega_T^c). One mechanism covers leaf boundaries, block
// boundaries and single-vertex pins.
struct BoundarySpec {
  std::vector<std::pair<Vertex, int>> frozen;
  std::optional<int> parent_of_root;

  void freeze(Vertex v, int c) { frozen.emplace_back(v, c); }
  // -1 for unfrozen vertices.
  std::vector<int16_t> mask(const TreeShape& shape) const;
  // InconsistentBoundary unless frozen states are compatible along frozen edges.
  void validate(const TreeShape& shape, const SpinKernel& kernel) const;
};

Configuration broadcast_sample(const TreeShape& shape, const SpinKernel& kernel, Rng& rng,
                               std::optional<int> root_state = std::nullopt);

double log_gibbs_weight(const TreeShape& shape, const SpinKernel& kernel, const Configuration& config);
double gibbs_weight(const TreeShape& shape, const SpinKernel& kernel, const Configuration& config);

constexpr int64_t kDefaultGuard = 5'000'000;

// All valid configurations with their Gibbs weights (weights of valid
// configs sum to 1). The DFS prunes hard edges, so only valid configs are
// materialized; TooLarge once more than `guard` of them exist.
std::vector<std::pair<Configuration, double>> enumerate_configs(const TreeShape& shape,
                                                                const SpinKernel& kernel,
                                                                int64_t guard = kDefaultGuard);
// Same, restricted to configurations agreeing with `boundary`.
std::vector<std::pair<Configuration, double>> enumerate_configs(const TreeShape& shape,
                                                                const SpinKernel& kernel,
                                                                const BoundarySpec& boundary,
                                                                int64_t guard);

// mu(sigma_x = . | frozen values in T_x, optional parent state), by upward
// sum-product over T_x. Exact on trees; ZeroProbabilityBoundary when the
// conditioning event has zero mass.
std::vector<double> conditional_root_marginal(const TreeShape& shape, const SpinKernel& kernel,
                                              const BoundarySpec& boundary, Vertex x = 0);

// Exact joint law of sigma on the level-l boundary of T_root given the root
// state: vector indexed by mixed-radix tuples (leftmost boundary vertex most
// significant). Guarded by k^(d^l) <= guard.
std::vector<double> boundary_law(const TreeShape& shape, const SpinKernel& kernel, int l,
                                 int root_state, int64_t guard = kDefaultGuard);

double reconstruction_tv(const TreeShape& shape, const SpinKernel& kernel, int l, int c, int c_prime,
                         int64_t guard = kDefaultGuard);

double uniqueness_sup(const TreeShape& shape, const SpinKernel& kernel, int l,
                      int64_t guard = kDefaultGuard);

double tv_distance(std::span<const double> p, std::span<const double> q);

}  // namespace treespin
