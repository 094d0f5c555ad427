#include "treespin/kernel.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <sstream>
#include <tuple>

namespace treespin {

namespace {

constexpr double kRowTol = 1e-12;
constexpr double kBalanceTol = 1e-12;

// Strong connectivity of the positive-support digraph.
bool strongly_connected(int k, const std::vector<double>& M, bool reverse) {
  std::vector<char> seen(k, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int v = 0; v < k; ++v) {
      double w = reverse ? M[static_cast<size_t>(v) * k + u] : M[static_cast<size_t>(u) * k + v];
      if (w > 0.0 && !seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
}

// Period of a strongly connected digraph: gcd over edges (u,v) of
// depth(u)+1-depth(v) on a BFS tree.
int digraph_period(int k, const std::vector<double>& M) {
  std::vector<int> depth(k, -1);
  std::vector<int> queue{0};
  depth[0] = 0;
  size_t head = 0;
  int g = 0;
  while (head < queue.size()) {
    int u = queue[head++];
    for (int v = 0; v < k; ++v) {
      if (M[static_cast<size_t>(u) * k + v] <= 0.0) continue;
      if (depth[v] < 0) {
        depth[v] = depth[u] + 1;
        queue.push_back(v);
      } else {
        g = std::gcd(g, std::abs(depth[u] + 1 - depth[v]));
      }
    }
  }
  return g == 0 ? 0 : g;
}

std::vector<double> stationary_distribution(int k, const std::vector<double>& M) {
  // Least squares for pi (M^T - I) = 0 with sum(pi) = 1 appended.
  Eigen::MatrixXd A(k + 1, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i)
      A(i, j) = M[static_cast<size_t>(j) * k + i] - (i == j ? 1.0 : 0.0);
  for (int j = 0; j < k; ++j) A(k, j) = 1.0;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k + 1);
  b(k) = 1.0;
  Eigen::VectorXd pi = A.colPivHouseholderQr().solve(b);
  std::vector<double> out(k);
  double s = 0.0;
  for (int i = 0; i < k; ++i) {
    out[i] = pi(i);
    s += out[i];
  }
  for (double& x : out) x /= s;
  return out;
}

}  // namespace

SpinKernel SpinKernel::from_matrix(int k, std::vector<double> M) {
  if (k < 1 || M.size() != static_cast<size_t>(k) * k)
    fail(ErrorCode::InvalidParams, "kernel needs a k x k matrix, k >= 1");
  for (double x : M)
    if (!(x >= 0.0) || !std::isfinite(x)) fail(ErrorCode::InvalidParams, "kernel entries must be finite and >= 0");
  for (int i = 0; i < k; ++i) {
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += M[static_cast<size_t>(i) * k + j];
    if (std::abs(s - 1.0) > kRowTol) fail(ErrorCode::InvalidParams, "row " + std::to_string(i + 1) + " does not sum to 1");
  }
  if (!strongly_connected(k, M, false) || !strongly_connected(k, M, true))
    fail(ErrorCode::NonErgodicKernel, "support graph is not strongly connected");
  if (k > 1 && digraph_period(k, M) != 1)
    fail(ErrorCode::NonErgodicKernel, "support graph is periodic");

  SpinKernel out;
  out.k = k;
  out.M = std::move(M);
  out.pi = stationary_distribution(k, out.M);
  out.pi_min = *std::min_element(out.pi.begin(), out.pi.end());
  if (out.pi_min <= 0.0) fail(ErrorCode::NonErgodicKernel, "stationary law has a nonpositive entry");

  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      double lhs = out.pi[i] * out.m(i, j);
      double rhs = out.pi[j] * out.m(j, i);
      if (std::abs(lhs - rhs) > kBalanceTol)
        fail(ErrorCode::InvalidParams, "detailed balance fails at (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
    }

  out.hard.assign(static_cast<size_t>(k) * k, 0);
  out.p_min = 1.0;
  for (size_t idx = 0; idx < out.M.size(); ++idx) {
    if (out.M[idx] == 0.0)
      out.hard[idx] = 1;
    else
      out.p_min = std::min(out.p_min, out.M[idx]);
  }
  out.lambda = second_eigenvalue(out);
  return out;
}

Potentials Potentials::zero(int k) {
  Potentials p;
  p.k = k;
  p.U.assign(static_cast<size_t>(k) * k, Potential::finite(0.0));
  p.W.assign(k, Potential::finite(0.0));
  return p;
}

Potentials Potentials::coloring(int k) {
  Potentials p = zero(k);
  for (int c = 0; c < k; ++c) p.u(c, c) = Potential::infinite();
  return p;
}

SpinKernel kernel_from_potentials(const Potentials& pot) {
  int k = pot.k;
  if (k < 1) fail(ErrorCode::InvalidParams, "potentials need k >= 1");
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < a; ++b)
      if (!(pot.u(a, b) == pot.u(b, a))) fail(ErrorCode::InvalidParams, "U must be symmetric");

  std::vector<double> M(static_cast<size_t>(k) * k, 0.0);
  for (int a = 0; a < k; ++a) {
    // row weights exp(-(U(a,b)+W(b))), shifted by the row max exponent
    double best = -std::numeric_limits<double>::infinity();
    for (int b = 0; b < k; ++b)
      if (!pot.u(a, b).hard && !pot.W[b].hard)
        best = std::max(best, -(pot.u(a, b).value + pot.W[b].value));
    if (!std::isfinite(best))
      fail(ErrorCode::NonNormalizable, "row " + std::to_string(a + 1) + " has only infinite potentials");
    double z = 0.0;
    for (int b = 0; b < k; ++b) {
      if (pot.u(a, b).hard || pot.W[b].hard) continue;
      double w = std::exp(-(pot.u(a, b).value + pot.W[b].value) - best);
      M[static_cast<size_t>(a) * k + b] = w;
      z += w;
    }
    for (int b = 0; b < k; ++b) M[static_cast<size_t>(a) * k + b] /= z;
  }
  return SpinKernel::from_matrix(k, std::move(M));
}

Potentials potentials_from_kernel(const SpinKernel& kernel) {
  Potentials pot = Potentials::zero(kernel.k);
  for (int c = 0; c < kernel.k; ++c)
    pot.W[c] = Potential::finite(-std::log(kernel.pi[c]));
  // computed on the upper triangle and mirrored: detailed balance makes
  // U(a,b) = U(b,a) exactly in exact arithmetic, but not bitwise
  for (int a = 0; a < kernel.k; ++a)
    for (int b = a; b < kernel.k; ++b)
      pot.set_u(a, b, kernel.is_hard(a, b) ? Potential::infinite()
                                           : Potential::finite(-std::log(kernel.m(a, b) / kernel.pi[b])));
  return pot;
}

SpinKernel coloring_kernel(int k) {
  if (k < 3) {
    if (k == 2) fail(ErrorCode::NonErgodicKernel, "2-coloring channel is periodic");
    fail(ErrorCode::InvalidParams, "coloring kernel needs k >= 3");
  }
  std::vector<double> M(static_cast<size_t>(k) * k, 1.0 / (k - 1));
  for (int c = 0; c < k; ++c) M[static_cast<size_t>(c) * k + c] = 0.0;
  return SpinKernel::from_matrix(k, std::move(M));
}

SpinKernel uniform_kernel(int k) {
  if (k < 1) fail(ErrorCode::InvalidParams, "uniform kernel needs k >= 1");
  std::vector<double> M(static_cast<size_t>(k) * k, 1.0 / k);
  return SpinKernel::from_matrix(k, std::move(M));
}

bool is_coloring_kernel(const SpinKernel& kernel) {
  if (kernel.k < 3) return false;
  double off = 1.0 / (kernel.k - 1);
  for (int a = 0; a < kernel.k; ++a)
    for (int b = 0; b < kernel.k; ++b) {
      if (a == b && !kernel.is_hard(a, b)) return false;
      if (a != b && std::abs(kernel.m(a, b) - off) > 1e-12) return false;
    }
  return true;
}

double second_eigenvalue(const SpinKernel& kernel) {
  int k = kernel.k;
  if (k == 1) return 0.0;
  // Similarity transform S = D^{1/2} M D^{-1/2}, symmetric by reversibility,
  // so the spectrum is real and a self-adjoint solver applies.
  Eigen::MatrixXd S(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      S(i, j) = std::sqrt(kernel.pi[i] / kernel.pi[j]) * kernel.m(i, j);
  Eigen::MatrixXd Sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sym);
  std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + k);
  std::sort(ev.begin(), ev.end(), [](double a, double b) { return std::abs(a) > std::abs(b); });
  return ev[1];
}

KestenStigum kesten_stigum_ok(const SpinKernel& kernel, int d) {
  if (d < 1) fail(ErrorCode::InvalidParams, "d must be >= 1");
  KestenStigum ks;
  ks.value = d * kernel.lambda * kernel.lambda;
  ks.ok = ks.value < 1.0;
  return ks;
}

std::string format_double(double x) {
  char buf[64];
  // shortest form that round-trips
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

SpinKernel ModelFile::kernel() const {
  if (coloring) return coloring_kernel(k);
  return kernel_from_potentials(pot);
}

std::string ModelFile::echo() const {
  std::ostringstream os;
  os << "k=" << k << "\n";
  os << "type=" << (coloring ? "coloring" : "custom") << "\n";
  if (!coloring) {
    for (int a = 0; a < k; ++a)
      for (int b = a; b < k; ++b) {
        const Potential& p = pot.u(a, b);
        os << "U(" << (a + 1) << "," << (b + 1) << ")=" << (p.hard ? "hard" : format_double(p.value)) << "\n";
      }
    for (int c = 0; c < k; ++c)
      os << "W(" << (c + 1) << ")=" << (pot.W[c].hard ? "hard" : format_double(pot.W[c].value)) << "\n";
  }
  return os.str();
}

namespace {

Potential parse_potential(const std::string& v, int line_no) {
  if (v == "hard") return Potential::infinite();
  char* end = nullptr;
  double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0' || !std::isfinite(x))
    fail(ErrorCode::ParseError, "bad potential value on line " + std::to_string(line_no));
  return Potential::finite(x);
}

}  // namespace

ModelFile ModelFile::parse(const std::string& text) {
  ModelFile mf;
  mf.k = 0;
  bool have_type = false;
  std::vector<std::tuple<int, int, Potential>> u_entries;
  std::vector<std::pair<int, Potential>> w_entries;

  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    size_t b = line.find_last_not_of(" \t\r");
    line = line.substr(a, b - a + 1);
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::ParseError, "expected key=value on line " + std::to_string(line_no));
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    if (key == "k") {
      mf.k = std::atoi(val.c_str());
      if (mf.k < 1) fail(ErrorCode::ParseError, "k must be >= 1");
    } else if (key == "type") {
      have_type = true;
      if (val == "coloring")
        mf.coloring = true;
      else if (val == "custom")
        mf.coloring = false;
      else
        fail(ErrorCode::ParseError, "type must be coloring or custom");
    } else if (key.rfind("U(", 0) == 0 && key.back() == ')') {
      int i = 0, j = 0;
      if (std::sscanf(key.c_str(), "U(%d,%d)", &i, &j) != 2)
        fail(ErrorCode::ParseError, "bad U index on line " + std::to_string(line_no));
      u_entries.emplace_back(i, j, parse_potential(val, line_no));
    } else if (key.rfind("W(", 0) == 0 && key.back() == ')') {
      int i = 0;
      if (std::sscanf(key.c_str(), "W(%d)", &i) != 1)
        fail(ErrorCode::ParseError, "bad W index on line " + std::to_string(line_no));
      w_entries.emplace_back(i, parse_potential(val, line_no));
    } else {
      fail(ErrorCode::ParseError, "unknown key '" + key + "' on line " + std::to_string(line_no));
    }
  }
  if (mf.k == 0) fail(ErrorCode::ParseError, "missing k=");
  if (!have_type) fail(ErrorCode::ParseError, "missing type=");
  mf.pot = Potentials::zero(mf.k);
  if (mf.coloring) {
    if (!u_entries.empty() || !w_entries.empty())
      fail(ErrorCode::ParseError, "type=coloring takes no U/W entries");
    mf.pot = Potentials::coloring(mf.k);
    return mf;
  }
  for (auto& [i, j, p] : u_entries) {
    if (i < 1 || i > mf.k || j < 1 || j > mf.k) fail(ErrorCode::ParseError, "U index out of range");
    mf.pot.set_u(i - 1, j - 1, p);
  }
  for (auto& [i, p] : w_entries) {
    if (i < 1 || i > mf.k) fail(ErrorCode::ParseError, "W index out of range");
    mf.pot.W[i - 1] = p;
  }
  return mf;
}

}  // namespace treespin
