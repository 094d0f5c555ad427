#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "treespin/dynamics.hpp"

using namespace treespin;

namespace {

Configuration from_states(std::vector<uint8_t> st) {
  Configuration c;
  c.states = std::move(st);
  return c;
}

// depth-2 binary 3-coloring boundary that pins every interior vertex:
// grandchildren of child-2 colored {1,3}, of child-3 colored {1,2}, so the
// children are forced to 2 and 3 and the root to 1
BoundarySpec pinning_boundary_total() {
  BoundarySpec b;
  b.freeze(3, 0);
  b.freeze(4, 2);
  b.freeze(5, 0);
  b.freeze(6, 1);
  return b;
}

// grandchildren pairs {3,3} and {2,2}: two Glauber components, one of them
// the frozen configuration (1;2,3)
BoundarySpec pinning_boundary_split() {
  BoundarySpec b;
  b.freeze(3, 2);
  b.freeze(4, 2);
  b.freeze(5, 1);
  b.freeze(6, 1);
  return b;
}

}  // namespace

TEST_CASE("glauber_step: isolated vertex resamples from pi") {
  TreeShape s = TreeShape::make(2, 0);
  auto k3 = coloring_kernel(3);
  Rng rng(1);
  std::vector<int64_t> cnt(3, 0);
  Configuration c = from_states({0});
  for (int t = 0; t < 30000; ++t) {
    auto mv = glauber_step(s, k3, c, {}, rng);
    CHECK(mv.vertex == 0);
    ++cnt[static_cast<size_t>(c.at(0))];
  }
  for (int i = 0; i < 3; ++i) CHECK(std::abs(cnt[i] - 10000.0) < 3 * std::sqrt(30000 * (1.0 / 3) * (2.0 / 3)));
}

TEST_CASE("glauber_step: root with frozen children 2,3 stays at 1") {
  TreeShape s = TreeShape::make(2, 1);
  auto k3 = coloring_kernel(3);
  BoundarySpec b;
  b.freeze(1, 1);
  b.freeze(2, 2);
  Configuration c = from_states({0, 1, 2});
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    glauber_step(s, k3, c, b, rng);
    CHECK(c.at(0) == 0);
    CHECK(c.at(1) == 1);  // frozen vertices never move
    CHECK(c.at(2) == 2);
  }
  Configuration bad = from_states({0, 0, 2});
  CHECK_THROWS_AS(glauber_step(s, k3, bad, b, rng), Error);
}

TEST_CASE("glauber trajectories stay valid") {
  TreeShape s = TreeShape::make(2, 3);
  auto k4 = coloring_kernel(4);
  Rng rng(3);
  Configuration c = broadcast_sample(s, k4, rng);
  for (int t = 0; t < 2000; ++t) {
    glauber_step(s, k4, c, {}, rng);
    if (t % 100 == 0) CHECK(config_valid(s, k4, c));
  }
  CHECK(config_valid(s, k4, c));
}

TEST_CASE("one_step_change_set examples") {
  auto k3 = coloring_kernel(3);
  TreeShape s = TreeShape::make(2, 1);
  // bottom vertices are rigid
  Configuration c = from_states({0, 1, 2});
  CHECK(one_step_change_set(s, k3, c, 1) == (uint64_t{1} << 1));
  // height-1, children frozen at 2 and 3: C = {1}
  CHECK(one_step_change_set(s, k3, c, 0) == 0b001);
  // children both 2: C = {1,3}
  Configuration c2 = from_states({0, 1, 1});
  CHECK(one_step_change_set(s, k3, c2, 0) == 0b101);
}

TEST_CASE("classify_vertex: types, badness, k=4 example") {
  auto k3 = coloring_kernel(3);
  TreeShape s = TreeShape::make(2, 1);
  auto vc1 = classify_vertex(s, k3, from_states({0, 1, 2}), 0);
  CHECK(vc1.type == VertexType::rigid);
  auto vc2 = classify_vertex(s, k3, from_states({0, 1, 1}), 0);
  CHECK(vc2.type == VertexType::type2);
  CHECK(!vc2.free);

  // k=4, children frozen 2,3, own color 1: C = {1,4}; bad iff parent is 4
  auto k4 = coloring_kernel(4);
  Configuration c = from_states({0, 1, 2});
  auto vc = classify_vertex(s, k4, c, 0, 3);
  CHECK(vc.cset == 0b1001);
  CHECK(vc.type == VertexType::type2);
  CHECK(vc.bad.has_value());
  CHECK(*vc.bad);
  auto vc_good = classify_vertex(s, k4, c, 0, 1);
  CHECK(!*vc_good.bad);

  // bottom vertices are always rigid and always bad
  auto leaf = classify_vertex(s, k4, c, 1);
  CHECK(leaf.type == VertexType::rigid);
  CHECK(leaf.bad.has_value());
  CHECK(*leaf.bad);
}

TEST_CASE("all children good implies free (k >= 4)") {
  auto k4 = coloring_kernel(4);
  TreeShape s = TreeShape::make(2, 2);
  Rng rng(11);
  int checked = 0;
  for (int t = 0; t < 400; ++t) {
    Configuration c = broadcast_sample(s, k4, rng);
    bool all_good = true;
    for (int i = 0; i < 2; ++i) {
      auto vc = classify_vertex(s, k4, c, s.child(0, i), c.at(0));
      all_good &= !*vc.bad;
    }
    if (!all_good) continue;
    ++checked;
    CHECK(classify_vertex(s, k4, c, 0).free);
  }
  CHECK(checked > 10);
}

TEST_CASE("coloring_fast_classify agrees with the BFS classifier") {
  auto k3 = coloring_kernel(3);
  // exhaustive on depth-2
  TreeShape s2 = TreeShape::make(2, 2);
  for (auto& [c, w] : enumerate_configs(s2, k3)) {
    auto fast = coloring_fast_classify(s2, k3, c);
    for (Vertex v = 0; v < s2.n; ++v) {
      auto slow = classify_vertex(s2, k3, c, v);
      CHECK(fast[static_cast<size_t>(v)].cset == slow.cset);
      CHECK(fast[static_cast<size_t>(v)].free == slow.free);
      if (v != 0) CHECK(*fast[static_cast<size_t>(v)].bad == *slow.bad);
    }
  }
  // random depth-3 samples
  TreeShape s3 = TreeShape::make(2, 3);
  Rng rng(13);
  for (int t = 0; t < 1000; ++t) {
    Configuration c = broadcast_sample(s3, k3, rng);
    auto fast = coloring_fast_classify(s3, k3, c);
    for (Vertex v = 0; v < s3.n; ++v)
      CHECK(fast[static_cast<size_t>(v)].cset == one_step_change_set(s3, k3, c, v));
  }
  // depth-1 with children covering all other colors: root rigid
  TreeShape s1 = TreeShape::make(2, 1);
  auto f = coloring_fast_classify(s1, k3, from_states({0, 1, 2}));
  CHECK(f[0].type == VertexType::rigid);

  CHECK_THROWS_AS(coloring_fast_classify(s1, uniform_kernel(3), from_states({0, 1, 2})), Error);
}

TEST_CASE("component_of: unconstrained block equals full enumeration") {
  auto k3 = coloring_kernel(3);
  TreeShape s = TreeShape::make(2, 1);
  Configuration c = from_states({0, 1, 2});
  auto comp = component_of(s, k3, c, 0, 1);
  auto all = enumerate_configs(s, k3);
  REQUIRE(comp.members.size() == all.size());
  // lexicographic member order matches enumeration order; weights match mu
  for (size_t i = 0; i < all.size(); ++i) {
    CHECK(comp.members[i] == all[i].first.states);
    CHECK(comp.weights[i] == doctest::Approx(all[i].second).epsilon(1e-12));
  }
  CHECK(comp.members[comp.seed_index] == c.states);
}

TEST_CASE("component_of: pinned block is a singleton; single-vertex blocks") {
  auto k3 = coloring_kernel(3);
  TreeShape s = TreeShape::make(2, 2);
  Configuration c = from_states({0, 1, 2, 0, 2, 0, 1});
  REQUIRE(config_valid(s, k3, c));
  auto comp = component_of(s, k3, c, 0, 1, kDefaultGuard, pinning_boundary_total());
  CHECK(comp.members.size() == 1);
  CHECK(comp.seed_index == 0);
  // single-vertex block: states compatible with the frozen neighbors
  auto comp1 = component_of(s, k3, c, 1, 0);
  CHECK(comp1.movable.size() == 1);
  CHECK(comp1.members.size() == 1);  // grandchildren {1,3} and root 1 pin vertex 1 at color 2
  Configuration c2 = from_states({0, 1, 2, 0, 0, 0, 1});
  REQUIRE(config_valid(s, k3, c2));
  auto comp2 = component_of(s, k3, c2, 1, 0);
  CHECK(comp2.members.size() == 2);  // children colored 1, root colored 1: vertex 1 ranges over {2,3}
}

TEST_CASE("component dynamics: l >= depth samples mu exactly (TV at 1e5 steps)") {
  auto k3 = coloring_kernel(3);
  TreeShape s = TreeShape::make(2, 1);
  auto all = enumerate_configs(s, k3);
  std::map<std::vector<uint8_t>, double> target;
  for (auto& [c, w] : all) target[c.states] = w;
  Rng rng(21);
  Configuration c = broadcast_sample(s, k3, rng);
  std::map<std::vector<uint8_t>, int64_t> cnt;
  int64_t steps = 100000;
  for (int64_t t = 0; t < steps; ++t) {
    component_dynamics_step(s, k3, c, 1, rng);
    ++cnt[c.states];
  }
  double tv = 0.0;
  for (auto& [st, w] : target) {
    auto it = cnt.find(st);
    double phat = it == cnt.end() ? 0.0 : static_cast<double>(it->second) / steps;
    tv += std::abs(phat - w);
  }
  CHECK(0.5 * tv < 0.01);
}

TEST_CASE("component dynamics: fully pinned blocks are the identity") {
  auto k3 = coloring_kernel(3);
  TreeShape s = TreeShape::make(2, 2);
  Configuration c = from_states({0, 1, 2, 0, 2, 0, 1});
  auto pin = pinning_boundary_total();
  Rng rng(5);
  Configuration before = c;
  auto comp = component_of(s, k3, c, 0, 2, kDefaultGuard, pin);
  CHECK(comp.members.size() == 1);
  for (int t = 0; t < 50; ++t) {
    component_dynamics_step(s, k3, c, 2, rng, kDefaultGuard, pin);
    CHECK(c.states == before.states);
  }
}

TEST_CASE("is_irreducible: free boundary, pinned split, uniform kernel") {
  auto k3 = coloring_kernel(3);
  TreeShape s = TreeShape::make(2, 2);
  // free boundary with the parent of the root frozen (Lemma 2.1 echo)
  for (int cp = 0; cp < 3; ++cp) {
    BoundarySpec b;
    b.parent_of_root = cp;
    auto irr = is_irreducible(s, k3, b);
    CHECK(irr.irreducible);
  }
  // and plain free boundary
  CHECK(is_irreducible(s, k3, {}).irreducible);

  // pinned grandchildren splitting the chain: >= 2 components, one frozen
  auto split = is_irreducible(s, k3, pinning_boundary_split());
  CHECK(split.component_count >= 2);

  // uniform kernel: always irreducible
  CHECK(is_irreducible(s, uniform_kernel(3), pinning_boundary_split()).irreducible);
}

TEST_CASE("same_component membership matches component_of") {
  auto k3 = coloring_kernel(3);
  TreeShape s = TreeShape::make(2, 2);
  Rng rng(31);
  for (int t = 0; t < 50; ++t) {
    Configuration a = broadcast_sample(s, k3, rng);
    auto comp = component_of(s, k3, a, 0, 1);
    for (size_t i = 0; i < comp.members.size(); ++i) {
      Configuration b = comp.member_config(i, a);
      CHECK(same_component(s, k3, a, b, 0, 1));
    }
  }
}

TEST_CASE("check_condindep: uniform kernel collapses to zero discrepancy") {
  auto u2 = uniform_kernel(2);
  TreeShape s = TreeShape::make(1, 5);  // path: block fits easily
  Configuration tau = from_states({0, 1, 0, 1, 0, 1});
  auto res = check_condindep(s, u2, tau, 4, 1);
  CHECK(res.max_discrepancy < 1e-12);
  CHECK(res.good_fraction == doctest::Approx(1.0));  // everything free under no constraints
  CHECK(res.group_violations == 0);
}

TEST_CASE("check_condindep: random tau on k=3 d=2 has empty good set") {
  // height-1 vertices are never free for colorings, and a broadcast tau
  // makes level-4 sibling leaf pairs monochromatic only by chance, so A_tau
  // is empty for a random tau
  auto k3 = coloring_kernel(3);
  TreeShape s = TreeShape::make(2, 5);
  Rng rng(41);
  Configuration tau = broadcast_sample(s, k3, rng);
  CHECK_THROWS_AS(check_condindep(s, k3, tau, 4, 1, std::nullopt, 80'000'000), Error);
}

TEST_CASE("check_condindep on k=4 path instances") {
  auto k4 = coloring_kernel(4);
  TreeShape s = TreeShape::make(1, 6);
  Rng rng(43);
  int nonempty = 0;
  for (int t = 0; t < 60 && nonempty < 5; ++t) {
    Configuration tau = broadcast_sample(s, k4, rng);
    try {
      auto res = check_condindep(s, k4, tau, 4, 1);
      ++nonempty;
      CHECK(res.max_discrepancy < 1e-10);
      CHECK(res.group_violations == 0);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyGoodSet);
    }
  }
  CHECK(nonempty >= 5);
}

TEST_CASE("claim 4.2 membership on random path triples") {
  // sigma, sigma' in A_tau agreeing on the cut level and below lie in the
  // same component (checked via the component_of oracle)
  auto k4 = coloring_kernel(4);
  TreeShape s = TreeShape::make(1, 6);
  int l = 4, h = 1;
  Rng rng(47);
  int triples = 0;
  int attempts = 0;
  while (triples < 200 && attempts < 2000) {
    ++attempts;
    Configuration tau = broadcast_sample(s, k4, rng);
    auto comp = component_of(s, k4, tau, 0, l);
    // A_tau members of the component grouped by states at levels >= h
    std::map<std::vector<uint8_t>, std::vector<size_t>> groups;
    for (size_t i = 0; i < comp.members.size(); ++i) {
      Configuration m = comp.member_config(i, tau);
      bool good = true;
      for (Vertex y = s.level_begin(h + 2); y < s.level_end(h + 2) && good; ++y)
        good = vertex_is_free(s, k4, m, y);
      if (!good) continue;
      std::vector<uint8_t> key(m.states.begin() + s.level_begin(h), m.states.begin() + s.level_end(l));
      groups[key].push_back(i);
    }
    for (auto& [key, idxs] : groups) {
      if (idxs.size() < 2 || triples >= 200) continue;
      size_t i = idxs[rng.uniform_int(idxs.size())];
      size_t j = idxs[rng.uniform_int(idxs.size())];
      Configuration a = comp.member_config(i, tau);
      Configuration b = comp.member_config(j, tau);
      CHECK(same_component(s, k4, a, b, 0, l));
      ++triples;
    }
  }
  CHECK(triples == 200);
}
