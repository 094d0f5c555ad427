#pragma once

#include <optional>
#include <string>
#include <vector>

#include "treespin/errors.hpp"

namespace treespin {

// One potential entry: finite value or a hard constraint (infinite potential).
// The hard flag is explicit rather than a float sentinel so the derived
// hard_mask is exact.
struct Potential {
  bool hard = false;
  double value = 0.0;

  static Potential finite(double v) { return {false, v}; }
  static Potential infinite() { return {true, 0.0}; }
  bool operator==(const Potential&) const = default;
};

// Symmetric pair potential U and vertex potential W on [k].
struct Potentials {
  int k = 0;
  std::vector<Potential> U;  // k*k, row-major, symmetric
  std::vector<Potential> W;  // k

  static Potentials zero(int k);
  static Potentials coloring(int k);

  Potential& u(int a, int b) { return U[static_cast<size_t>(a) * k + b]; }
  const Potential& u(int a, int b) const { return U[static_cast<size_t>(a) * k + b]; }
  void set_u(int a, int b, Potential p) { u(a, b) = p; u(b, a) = p; }
};

// Reversible ergodic k-state channel M with stationary law pi.
// Invariants (validated on construction): rows of M sum to 1 within 1e-12,
// detailed balance pi_c M(c,c') = pi_c' M(c',c) within 1e-12, the support
// graph is strongly connected and aperiodic, hard_mask(c,c') <=> M(c,c')==0,
// p_min is the smallest positive entry.
struct SpinKernel {
  int k = 0;
  std::vector<double> M;      // k*k row-major
  std::vector<double> pi;     // length k
  std::vector<uint8_t> hard;  // k*k, 1 where M==0
  double p_min = 0.0;
  double lambda = 0.0;        // second-largest-in-absolute-value eigenvalue of M
  double pi_min = 0.0;

  double m(int a, int b) const { return M[static_cast<size_t>(a) * k + b]; }
  bool is_hard(int a, int b) const { return hard[static_cast<size_t>(a) * k + b] != 0; }
  bool compatible(int a, int b) const { return !is_hard(a, b); }

  // Validates and completes a kernel from its matrix alone (pi solved from
  // the stationary equation).
  static SpinKernel from_matrix(int k, std::vector<double> M);
};

SpinKernel kernel_from_potentials(const Potentials& pot);
Potentials potentials_from_kernel(const SpinKernel& kernel);  // W = -ln pi gauge

SpinKernel coloring_kernel(int k);
SpinKernel uniform_kernel(int k);

// True iff M is the coloring channel (J-I)/(k-1): hard diagonal, equal
// off-diagonal entries.
bool is_coloring_kernel(const SpinKernel& kernel);

double second_eigenvalue(const SpinKernel& kernel);

struct KestenStigum {
  bool ok = false;   // d * lambda^2 < 1, strict
  double value = 0;  // d * lambda^2
};
KestenStigum kesten_stigum_ok(const SpinKernel& kernel, int d);

// Plain-text model file: `k=`, `type=coloring|custom`, `U(i,j)=` / `W(i)=`
// with the `hard` keyword for an infinite potential. Indices are 1-based.
struct ModelFile {
  int k = 0;
  bool coloring = false;
  Potentials pot;  // meaningful when !coloring

  SpinKernel kernel() const;
  // Canonical text form; parsing the echo reproduces the model bit-exactly.
  std::string echo() const;
  static ModelFile parse(const std::string& text);
};

// Shortest decimal that round-trips the double exactly.
std::string format_double(double x);

}  // namespace treespin
