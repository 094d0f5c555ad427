#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "treespin/tree.hpp"

namespace treespin {

// Unnormalized single-site conditional weights of vertex v given the rest of
// the configuration (and the virtual parent-of-root when v is the root).
void site_conditional(const TreeShape& shape, const SpinKernel& kernel, const Configuration& config,
                      Vertex v, std::optional<int> parent_of_root, std::span<double> out);

struct GlauberMove {
  Vertex vertex = -1;
  int old_state = 0;
  int new_state = 0;
};

// One heat-bath update at a uniformly chosen non-frozen vertex.
GlauberMove glauber_step(const TreeShape& shape, const SpinKernel& kernel, Configuration& config,
                         const BoundarySpec& boundary, Rng& rng);

// --- reachability ------------------------------------------------------

// C(x): states x can reach by a single-site path inside T_x that keeps the
// bottom level of T_x frozen and x at sigma_x until the final move. Bottom
// vertices are rigid by convention. BFS over the configuration graph of the
// movable interior, guarded.
uint64_t one_step_change_set(const TreeShape& shape, const SpinKernel& kernel,
                             const Configuration& config, Vertex x, int64_t guard = kDefaultGuard);

enum class VertexType { rigid, type2, type3 };

struct VertexClass {
  uint64_t cset = 0;  // bitmask of C(x)
  VertexType type = VertexType::rigid;
  bool free = false;               // C(x) = [k]
  std::optional<bool> bad;         // C(x)\{parent state} = {sigma_x}; empty without a parent
};

VertexClass classify_from_cset(int k, uint64_t cset, int own_state, std::optional<int> parent_state);

VertexClass classify_vertex(const TreeShape& shape, const SpinKernel& kernel,
                            const Configuration& config, Vertex x,
                            std::optional<int> parent_state = std::nullopt,
                            int64_t guard = kDefaultGuard);

// Linear-time bottom-up classification for the coloring model: x can change
// to c in one step iff no bad child of x is colored c. Agrees with the BFS
// classifier exactly. `bad` is filled against the actual parent in config
// (root: nullopt). NotColoringModel for other kernels.
std::vector<VertexClass> coloring_fast_classify(const TreeShape& shape, const SpinKernel& kernel,
                                                const Configuration& config);

// --- component dynamics -------------------------------------------------

struct ComponentSet {
  Vertex x = 0;
  int l = 0;
  std::vector<Vertex> movable;                // block vertices free to move, index order
  std::vector<std::vector<uint8_t>> members;  // restricted states, lexicographic order
  std::vector<double> weights;                // mu*, sums to 1
  size_t seed_index = 0;                      // position of the seed configuration

  Configuration member_config(size_t i, const Configuration& base) const;
};

// Single-site-reachable component Omega*_{B_{x,l},sigma} of `config` with
// everything outside the block frozen (plus any boundary freeze inside it).
ComponentSet component_of(const TreeShape& shape, const SpinKernel& kernel,
                          const Configuration& config, Vertex x, int l,
                          int64_t guard = kDefaultGuard, const BoundarySpec& boundary = {});

// One step: uniform x in T, then an exact sample from mu* over the component
// of the current configuration in B_{x,l}. Returns the chosen block root.
Vertex component_dynamics_step(const TreeShape& shape, const SpinKernel& kernel,
                               Configuration& config, int l, Rng& rng,
                               int64_t guard = kDefaultGuard, const BoundarySpec& boundary = {});

// BFS from a until b (early exit): are the two block configurations in the
// same Glauber component of B_{x,l}?
bool same_component(const TreeShape& shape, const SpinKernel& kernel, const Configuration& a,
                    const Configuration& b, Vertex x, int l, int64_t guard = kDefaultGuard,
                    const BoundarySpec& boundary = {});

struct Irreducibility {
  bool irreducible = false;
  int64_t component_count = 0;
  int64_t state_count = 0;
};
// Counts Glauber components of Omega under the boundary.
Irreducibility is_irreducible(const TreeShape& shape, const SpinKernel& kernel,
                              const BoundarySpec& boundary, int64_t guard = kDefaultGuard);

// --- Lemma 4.1 / Claim 4.2 checks ---------------------------------------

struct CondIndepResult {
  // per (root state c, eta index): mu-mass of component members in A_tau
  std::vector<std::vector<double>> good_mass;
  std::vector<std::vector<double>> all_mass;
  int64_t component_size = 0;
  double good_fraction = 0;       // mu*(A_tau)
  int64_t eta_admissible = 0;
  double max_discrepancy = 0;     // max over admissible eta, states c' of |lhs-rhs|
  // membership sweep over all of Omega^tau_B: every A_tau group that agrees
  // on the cut level and below lies entirely in or out of the component
  int64_t group_count = 0;
  int64_t group_violations = 0;
};

// Checks mu*_{B_{x,l}}(sigma_x = c' | sigma_{L_h} = eta, A_tau) =
// mu(sigma_x = c' | sigma_{L_h} = eta) for every admissible eta, where
// A_tau requires every vertex of L_{h+2} to be free. x is the tree root.
// Requires h >= 1 and h+2 < l. EmptyGoodSet when A_tau misses the component.
CondIndepResult check_condindep(const TreeShape& shape, const SpinKernel& kernel,
                                const Configuration& tau, int l, int h,
                                std::optional<int> parent_of_root = std::nullopt,
                                int64_t guard = kDefaultGuard, bool membership_sweep = true);

// Free-vertex test used by A_tau: evaluated on the full configuration, within
// T_y (bottom of the tree frozen).
bool vertex_is_free(const TreeShape& shape, const SpinKernel& kernel, const Configuration& config,
                    Vertex y, int64_t guard = kDefaultGuard);

}  // namespace treespin
