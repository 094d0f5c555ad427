#include <cmath>
#include <map>

#include "doctest.h"
#include "treespin/tree.hpp"

using namespace treespin;

TEST_CASE("tree shape indexing") {
  TreeShape s = TreeShape::make(2, 3);
  CHECK(s.n == 15);
  CHECK(s.level_size(0) == 1);
  CHECK(s.level_size(3) == 8);
  for (Vertex v = 1; v < s.n; ++v) {
    Vertex p = s.parent(v);
    bool is_child = false;
    for (int i = 0; i < s.d; ++i) is_child |= (s.child(p, i) == v);
    CHECK(is_child);
    CHECK(s.level_of(v) == s.level_of(p) + 1);
  }
  auto [a, b] = s.descendant_range(1, 2);
  CHECK(b - a == 4);
  CHECK(s.level_of(a) == 3);

  // block convention: B_{x,1} is x plus its children; B = T_x near leaves
  auto blk = s.block(0, 1);
  CHECK(blk.size() == 3);
  auto blk_leaf = s.block(7, 5);
  CHECK(blk_leaf.size() == 1);
  CHECK(s.block(1, 2).size() == 7);
  CHECK(s.block(1, 7).size() == 7);  // clipped to T_x
  CHECK(s.block_boundary(0, 2).size() == 4);
  CHECK(s.block_boundary(1, 3).empty());

  TreeShape path = TreeShape::make(1, 4);
  CHECK(path.n == 5);
  CHECK(path.parent(3) == 2);
}

TEST_CASE("configuration serialization round trip (1-based, level order)") {
  Configuration c;
  c.states = {0, 1, 2};
  CHECK(c.serialize() == "1 2 3");
  Configuration d = Configuration::deserialize("1 2 3", 3);
  CHECK(d.states == c.states);
}

TEST_CASE("gibbs weight examples") {
  TreeShape s = TreeShape::make(2, 1);
  auto k3 = coloring_kernel(3);
  Configuration c;
  c.states = {0, 1, 2};  // (1; 2, 3)
  CHECK(gibbs_weight(s, k3, c) == doctest::Approx(1.0 / 12).epsilon(1e-14));
  c.states = {0, 0, 1};  // (1; 1, 2) hits the hard constraint
  CHECK(gibbs_weight(s, k3, c) == 0.0);
  CHECK(!config_valid(s, k3, c));
  TreeShape one = TreeShape::make(2, 0);
  Configuration r;
  r.states = {1};
  CHECK(gibbs_weight(one, k3, r) == doctest::Approx(1.0 / 3).epsilon(1e-14));
}

TEST_CASE("enumerate: coloring k=3 depth 1 has 12 configs of weight 1/12") {
  TreeShape s = TreeShape::make(2, 1);
  auto k3 = coloring_kernel(3);
  auto all = enumerate_configs(s, k3);
  CHECK(all.size() == 12);
  double total = 0.0;
  for (auto& [c, w] : all) {
    CHECK(w == doctest::Approx(1.0 / 12).epsilon(1e-12));
    CHECK(config_valid(s, k3, c));
    total += w;
  }
  CHECK(std::abs(total - 1.0) < 1e-10);

  auto u2 = enumerate_configs(TreeShape::make(2, 0), uniform_kernel(2));
  CHECK(u2.size() == 2);
  CHECK(u2[0].second == doctest::Approx(0.5));

  CHECK_THROWS_AS(enumerate_configs(TreeShape::make(2, 2), k3, 10), Error);
}

TEST_CASE("gibbs_weight positive iff valid, against random configs") {
  TreeShape s = TreeShape::make(2, 2);
  auto k3 = coloring_kernel(3);
  Rng rng(7);
  for (int t = 0; t < 500; ++t) {
    Configuration c;
    c.states.resize(static_cast<size_t>(s.n));
    for (auto& x : c.states) x = static_cast<uint8_t>(rng.uniform_int(3));
    CHECK((gibbs_weight(s, k3, c) > 0.0) == config_valid(s, k3, c));
  }
}

TEST_CASE("broadcast_sample: forced root, children uniform on the other colors") {
  TreeShape s = TreeShape::make(2, 1);
  auto k3 = coloring_kernel(3);
  Rng rng(11);
  int64_t n = 100000;
  int64_t c1_color2 = 0, c2_color2 = 0;
  for (int64_t t = 0; t < n; ++t) {
    Configuration c = broadcast_sample(s, k3, rng, 0);
    CHECK(c.at(0) == 0);
    CHECK(config_valid(s, k3, c));
    c1_color2 += (c.at(1) == 1);
    c2_color2 += (c.at(2) == 1);
  }
  double sigma = std::sqrt(0.25 * n);
  CHECK(std::abs(c1_color2 - n / 2.0) < 3 * sigma);
  CHECK(std::abs(c2_color2 - n / 2.0) < 3 * sigma);
}

TEST_CASE("broadcast_sample: depth 0 root follows pi") {
  auto k3 = coloring_kernel(3);
  TreeShape s = TreeShape::make(2, 0);
  Rng rng(3);
  int64_t n = 100000;
  std::vector<int64_t> cnt(3, 0);
  for (int64_t t = 0; t < n; ++t) ++cnt[static_cast<size_t>(broadcast_sample(s, k3, rng).at(0))];
  for (int c = 0; c < 3; ++c) CHECK(std::abs(cnt[c] - n / 3.0) < 3 * std::sqrt(n * (1.0 / 3) * (2.0 / 3)));
}

TEST_CASE("broadcast_sample under the uniform kernel: two vertices iid (chi-square)") {
  TreeShape s = TreeShape::make(2, 1);
  auto u3 = uniform_kernel(3);
  Rng rng(5);
  int64_t n = 100000;
  std::vector<int64_t> joint(9, 0);
  for (int64_t t = 0; t < n; ++t) {
    Configuration c = broadcast_sample(s, u3, rng);
    ++joint[static_cast<size_t>(c.at(0) * 3 + c.at(1))];
  }
  double expected = n / 9.0;
  double chi2 = 0.0;
  for (int64_t o : joint) chi2 += (o - expected) * (o - expected) / expected;
  CHECK(chi2 < 26.12);  // chi-square(8) 0.999 quantile
}

TEST_CASE("broadcast empirical law matches enumeration weights") {
  auto k3 = coloring_kernel(3);

  auto empirical_tv = [&](const TreeShape& s, int64_t n, uint64_t seed) {
    auto all = enumerate_configs(s, k3);
    std::map<std::vector<uint8_t>, double> weight;
    for (auto& [c, w] : all) weight[c.states] = w;
    std::map<std::vector<uint8_t>, int64_t> cnt;
    Rng rng(seed);
    for (int64_t t = 0; t < n; ++t) ++cnt[broadcast_sample(s, k3, rng).states];
    double tv = 0.0;
    for (auto& [states, w] : weight) {
      auto it = cnt.find(states);
      double phat = it == cnt.end() ? 0.0 : static_cast<double>(it->second) / n;
      tv += std::abs(phat - w);
    }
    return 0.5 * tv;
  };

  // 12 valid configs at 1e5 samples
  CHECK(empirical_tv(TreeShape::make(2, 1), 100000, 17) < 0.01);
  // 24 valid configs at 1e5 samples
  CHECK(empirical_tv(TreeShape::make(3, 1), 100000, 18) < 0.01);
  // 192 valid configs: E[TV] ~ 0.017 at 1e5 iid samples, so the 0.01 bound
  // needs 1e6 samples at this instance size
  CHECK(empirical_tv(TreeShape::make(2, 2), 1000000, 19) < 0.01);
}

TEST_CASE("conditional_root_marginal examples and oracle equivalence") {
  TreeShape s = TreeShape::make(2, 1);
  auto k3 = coloring_kernel(3);

  BoundarySpec b1;
  b1.freeze(1, 1);
  b1.freeze(2, 2);
  auto m1 = conditional_root_marginal(s, k3, b1);
  CHECK(m1[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(m1[1] == 0.0);

  BoundarySpec b2;
  b2.freeze(1, 1);
  b2.freeze(2, 1);
  auto m2 = conditional_root_marginal(s, k3, b2);
  CHECK(m2[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(m2[1] == 0.0);
  CHECK(m2[2] == doctest::Approx(0.5).epsilon(1e-14));

  auto m3 = conditional_root_marginal(s, k3, BoundarySpec{});
  for (int c = 0; c < 3; ++c) CHECK(m3[c] == k3.pi[c]);  // exact equality

  // against the enumeration oracle on every leaf boundary of depth 2
  TreeShape s2 = TreeShape::make(2, 2);
  for (int t = 0; t < 81; ++t) {
    BoundarySpec bb;
    int rem = t;
    for (Vertex v = 3; v < 7; ++v) {
      bb.freeze(v, rem % 3);
      rem /= 3;
    }
    std::vector<double> brute(3, 0.0);
    double total = 0.0;
    for (auto& [c, w] : enumerate_configs(s2, k3)) {
      bool match = true;
      for (auto& [v, st] : bb.frozen) match &= (c.at(v) == st);
      if (!match) continue;
      brute[static_cast<size_t>(c.at(0))] += w;
      total += w;
    }
    if (total == 0.0) {
      CHECK_THROWS_AS(conditional_root_marginal(s2, k3, bb), Error);
      continue;
    }
    auto m = conditional_root_marginal(s2, k3, bb);
    for (int c = 0; c < 3; ++c) CHECK(std::abs(m[c] - brute[c] / total) < 1e-12);
  }

  // parent-of-root is one more frozen neighbor
  BoundarySpec bp;
  bp.parent_of_root = 0;
  auto mp = conditional_root_marginal(s, k3, bp);
  CHECK(mp[0] == 0.0);
  CHECK(mp[1] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("boundary spec validation") {
  TreeShape s = TreeShape::make(2, 1);
  auto k3 = coloring_kernel(3);
  BoundarySpec bad;
  bad.freeze(0, 1);
  bad.freeze(1, 1);
  CHECK_THROWS_AS(bad.validate(s, k3), Error);
}

TEST_CASE("reconstruction_tv examples") {
  auto k3 = coloring_kernel(3);
  TreeShape s = TreeShape::make(2, 1);
  CHECK(reconstruction_tv(s, k3, 1, 0, 1) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(reconstruction_tv(s, k3, 1, 1, 1) == 0.0);
  CHECK(reconstruction_tv(s, uniform_kernel(3), 1, 0, 2) == doctest::Approx(0.0));
  // symmetry across a few instances
  TreeShape s2 = TreeShape::make(2, 2);
  for (int c = 0; c < 3; ++c)
    for (int c2 = 0; c2 < 3; ++c2)
      CHECK(reconstruction_tv(s2, k3, 2, c, c2) ==
            doctest::Approx(reconstruction_tv(s2, k3, 2, c2, c)).epsilon(1e-14));
}

TEST_CASE("uniqueness_sup examples") {
  TreeShape s = TreeShape::make(2, 1);
  CHECK(uniqueness_sup(s, coloring_kernel(3), 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(uniqueness_sup(s, uniform_kernel(3), 1) == doctest::Approx(0.0));
  // k=6: all boundary pairs leave root supports of size >= 4 that overlap
  CHECK(uniqueness_sup(s, coloring_kernel(6), 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(uniqueness_sup(s, coloring_kernel(6), 1) < 1.0);
}
