#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "chattymaps/community.hpp"
#include "support/oracle.hpp"

using namespace chattymaps;

namespace {

graph::WeightedGraph bridged_triangles() {
  std::vector<std::string> labels{"a", "b", "c", "d", "e", "f"};
  std::vector<graph::Edge> edges{{0, 1, 1}, {0, 2, 1}, {1, 2, 1},
                                 {3, 4, 1}, {3, 5, 1}, {4, 5, 1},
                                 {2, 3, 1}};
  return graph::WeightedGraph(std::move(labels), edges);
}

graph::WeightedGraph separate_triangles() {
  std::vector<std::string> labels{"a", "b", "c", "d", "e", "f"};
  std::vector<graph::Edge> edges{{0, 1, 1}, {0, 2, 1}, {1, 2, 1},
                                 {3, 4, 1}, {3, 5, 1}, {4, 5, 1}};
  return graph::WeightedGraph(std::move(labels), edges);
}

graph::WeightedGraph barbell() {
  std::vector<std::string> labels{"a", "b", "c", "d", "e", "f", "g", "h"};
  std::vector<graph::Edge> edges;
  for (std::uint32_t i = 0; i < 4; ++i)
    for (std::uint32_t j = i + 1; j < 4; ++j) {
      edges.push_back({i, j, 1});
      edges.push_back({i + 4, j + 4, 1});
    }
  edges.push_back({3, 4, 1});
  return graph::WeightedGraph(std::move(labels), edges);
}

std::string write_temp(const std::string& name, const std::string& content) {
  auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path.string();
}

double exhaustive_min(const graph::WeightedGraph& g, community::Partition& best) {
  double best_len = std::numeric_limits<double>::infinity();
  testsupport::for_each_partition(g.node_count(), [&](const testsupport::Partition& p) {
    community::Partition cp(p.begin(), p.end());
    double len = community::map_equation(g, cp);
    if (len < best_len) {
      best_len = len;
      best = cp;
    }
  });
  return best_len;
}

}  // namespace

TEST_CASE("plogp handles the zero limit") {
  REQUIRE(community::plogp(0.0) == 0.0);
  REQUIRE(community::plogp(1.0) == 0.0);
  REQUIRE(community::plogp(0.5) == Catch::Approx(-0.5).margin(1e-15));
}

TEST_CASE("canonical relabels by first appearance") {
  community::Partition p{5, 5, 2, 7, 2};
  REQUIRE(community::canonical(p) == community::Partition{0, 0, 1, 2, 1});
  REQUIRE(community::community_count(p) == 3);
}

TEST_CASE("components come out sorted") {
  std::vector<std::string> labels{"a", "b", "c", "d", "e"};
  std::vector<graph::Edge> edges{{0, 3, 1}, {1, 4, 1}};
  graph::WeightedGraph g(std::move(labels), edges);
  auto comps = community::components(g);
  REQUIRE(comps.size() == 3);
  REQUIRE(comps[0] == std::vector<std::uint32_t>{0, 3});
  REQUIRE(comps[1] == std::vector<std::uint32_t>{1, 4});
  REQUIRE(comps[2] == std::vector<std::uint32_t>{2});
}

TEST_CASE("two-level description length on a single edge") {
  // visit rates 1/2 each; separate modules cost 3 bits, one module 1 bit
  std::vector<std::string> labels{"a", "b"};
  graph::WeightedGraph g(std::move(labels), {graph::Edge{0, 1, 1.0}});
  REQUIRE(community::map_equation(g, {0, 1}) == Catch::Approx(3.0).margin(1e-12));
  REQUIRE(community::map_equation(g, {0, 0}) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("description length adds over components") {
  std::vector<std::string> labels{"a", "b", "c", "d"};
  graph::WeightedGraph g(std::move(labels), {graph::Edge{0, 1, 1.0}, graph::Edge{2, 3, 1.0}});
  REQUIRE(community::map_equation(g, {0, 1, 2, 3}) == Catch::Approx(6.0).margin(1e-12));
  REQUIRE(community::map_equation(g, {0, 0, 1, 1}) == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("description length input checks") {
  graph::WeightedGraph empty;
  REQUIRE_THROWS_AS(community::map_equation(empty, {}), InputError);
  auto g = separate_triangles();
  REQUIRE_THROWS_AS(community::map_equation(g, {0, 0, 0}), InputError);
}

TEST_CASE("isolated nodes cost nothing") {
  std::vector<std::string> labels{"a", "b", "c"};
  graph::WeightedGraph g(std::move(labels), {graph::Edge{0, 1, 1.0}});
  REQUIRE(community::map_equation(g, {0, 0, 1}) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("partitioner reaches the enumerated optimum on bridged triangles") {
  auto g = bridged_triangles();
  community::Partition best;
  double best_len = exhaustive_min(g, best);

  auto found = community::infomap_partition(g);
  REQUIRE(community::map_equation(g, found) == Catch::Approx(best_len).margin(1e-9));
  testsupport::Partition truth{0, 0, 0, 1, 1, 1};
  testsupport::Partition got(found.begin(), found.end());
  REQUIRE(testsupport::nmi(got, truth) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("partitioner reaches the enumerated optimum on a barbell") {
  auto g = barbell();
  community::Partition best;
  double best_len = exhaustive_min(g, best);

  auto found = community::infomap_partition(g);
  REQUIRE(community::map_equation(g, found) == Catch::Approx(best_len).margin(1e-9));
  testsupport::Partition truth{0, 0, 0, 0, 1, 1, 1, 1};
  testsupport::Partition got(found.begin(), found.end());
  REQUIRE(testsupport::nmi(got, truth) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("partitioner is deterministic for a fixed seed") {
  auto g = bridged_triangles();
  community::InfomapOptions opt;
  opt.seed = 42;
  auto a = community::infomap_partition(g, opt);
  auto b = community::infomap_partition(g, opt);
  REQUIRE(a == b);
}

TEST_CASE("partitioner recovers planted blocks") {
  testsupport::Partition truth;
  auto g = testsupport::planted_partition(3, 12, 0.85, 0.03, 7, truth);
  auto found = community::infomap_partition(g);
  testsupport::Partition got(found.begin(), found.end());
  REQUIRE(testsupport::nmi(got, truth) >= 0.99);
}

TEST_CASE("partitioner gives isolated nodes their own community") {
  std::vector<std::string> labels{"a", "b", "c"};
  graph::WeightedGraph g(std::move(labels), {graph::Edge{0, 1, 1.0}});
  auto part = community::infomap_partition(g);
  REQUIRE(part == community::Partition{0, 0, 1});
}

TEST_CASE("modularity of separate triangles") {
  auto g = separate_triangles();
  REQUIRE(community::modularity(g, {0, 0, 0, 1, 1, 1}) == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(community::modularity(g, {0, 0, 0, 0, 0, 0}) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("modularity rejects an edgeless graph") {
  graph::WeightedGraph g(std::vector<std::string>{"a", "b"}, {});
  REQUIRE_THROWS_AS(community::modularity(g, {0, 1}), InputError);
  auto tri = separate_triangles();
  REQUIRE_THROWS_AS(community::modularity(tri, {0, 0}), InputError);
}

TEST_CASE("greedy modularity finds the triangles and never backslides") {
  auto g = bridged_triangles();
  auto res = community::louvain(g);
  testsupport::Partition truth{0, 0, 0, 1, 1, 1};
  testsupport::Partition got(res.partition.begin(), res.partition.end());
  REQUIRE(testsupport::nmi(got, truth) == Catch::Approx(1.0).margin(1e-12));

  REQUIRE_FALSE(res.q_trace.empty());
  for (std::size_t i = 1; i < res.q_trace.size(); ++i)
    REQUIRE(res.q_trace[i] >= res.q_trace[i - 1] - 1e-9);
  REQUIRE(res.q_trace.back() ==
          Catch::Approx(community::modularity(g, res.partition)).margin(1e-12));
}

TEST_CASE("modularity trace is monotone on noisy graphs") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    testsupport::Partition truth;
    auto g = testsupport::planted_partition(4, 8, 0.4, 0.15, seed, truth);
    if (g.total_weight() == 0) continue;
    community::LouvainOptions opt;
    opt.seed = seed;
    auto res = community::louvain(g, opt);
    for (std::size_t i = 1; i < res.q_trace.size(); ++i)
      REQUIRE(res.q_trace[i] >= res.q_trace[i - 1] - 1e-9);
  }
}

TEST_CASE("refinement splits only oversized communities") {
  auto g = barbell();
  community::Partition top(8, 0);  // everything in one community of 8
  auto hp = community::louvain_refine(g, top, 5);
  REQUIRE(hp.child_counts.size() == 1);
  REQUIRE(hp.child_counts[0] == 2);
  // the two cliques become the children
  REQUIRE(hp.child[0] == hp.child[1]);
  REQUIRE(hp.child[0] == hp.child[2]);
  REQUIRE(hp.child[0] == hp.child[3]);
  REQUIRE(hp.child[4] == hp.child[5]);
  REQUIRE(hp.child[4] == hp.child[6]);
  REQUIRE(hp.child[4] == hp.child[7]);
  REQUIRE(hp.child[0] != hp.child[4]);
  REQUIRE(hp.key_of(0) != hp.key_of(4));
  REQUIRE(hp.key_of(0).rfind("c0.", 0) == 0);

  auto untouched = community::louvain_refine(g, top, 8);
  REQUIRE(untouched.child_counts[0] == 0);
  for (auto ch : untouched.child) REQUIRE(ch == -1);
  REQUIRE(untouched.key_of(0) == "c0");
}

TEST_CASE("refinement leaves cohesive and edgeless groups whole") {
  // community 0 is a 4-clique, community 1 has no internal edges at all
  std::vector<std::string> labels{"a", "b", "c", "d", "e", "f", "g", "h"};
  std::vector<graph::Edge> edges;
  for (std::uint32_t i = 0; i < 4; ++i)
    for (std::uint32_t j = i + 1; j < 4; ++j) edges.push_back({i, j, 1});
  for (std::uint32_t i = 4; i < 8; ++i) edges.push_back({0, i, 1});
  graph::WeightedGraph g(std::move(labels), edges);
  community::Partition top{0, 0, 0, 0, 1, 1, 1, 1};
  auto hp = community::louvain_refine(g, top, 3);
  REQUIRE(hp.child_counts[0] == 0);  // clique does not split
  REQUIRE(hp.child_counts[1] == 0);  // nothing to optimize without edges
  for (auto ch : hp.child) REQUIRE(ch == -1);
}

TEST_CASE("refinement rejects a mismatched partition") {
  auto g = barbell();
  REQUIRE_THROWS_AS(community::louvain_refine(g, {0, 0}, 5), InputError);
}

TEST_CASE("merge file parsing") {
  auto path = write_temp("merge_ok.csv",
                         "kind,source,target\n"
                         "merge,c1,c0\n"
                         "\n"
                         "label,c0,transport\n");
  auto rules = community::parse_merge_file(path);
  REQUIRE(rules.size() == 2);
  REQUIRE(rules[0].kind == community::MergeRule::Kind::merge);
  REQUIRE(rules[0].source == "c1");
  REQUIRE(rules[0].target == "c0");
  REQUIRE(rules[1].kind == community::MergeRule::Kind::label);
  REQUIRE(rules[1].target == "transport");
}

TEST_CASE("merge file rejections") {
  REQUIRE_THROWS_AS(community::parse_merge_file("/nonexistent/merge.csv"), InputError);
  auto bad_kind = write_temp("merge_bad_kind.csv", "kind,source,target\nrename,c0,c1\n");
  REQUIRE_THROWS_AS(community::parse_merge_file(bad_kind), InputError);
  auto short_row = write_temp("merge_short.csv", "kind,source,target\nmerge,c0\n");
  REQUIRE_THROWS_AS(community::parse_merge_file(short_row), InputError);
  auto empty_field = write_temp("merge_empty.csv", "kind,source,target\nlabel,,x\n");
  REQUIRE_THROWS_AS(community::parse_merge_file(empty_field), InputError);
  auto no_header = write_temp("merge_noheader.csv", "");
  REQUIRE_THROWS_AS(community::parse_merge_file(no_header), InputError);
}

TEST_CASE("merging re-homes whole communities transitively") {
  std::vector<std::string> labels{"car", "bus", "birds", "wind"};
  graph::WeightedGraph g(std::move(labels), {graph::Edge{0, 1, 1.0}, graph::Edge{2, 3, 1.0}});
  community::HierPartition hp;
  hp.top = {0, 0, 1, 1};
  hp.child = {-1, -1, -1, -1};
  hp.child_counts = {0, 0};

  std::vector<community::MergeRule> rules{
      {community::MergeRule::Kind::merge, "c1", "c0"},
      {community::MergeRule::Kind::label, "c0", "noise"},
  };
  auto tax = community::apply_merge(g, hp, rules);
  for (const auto& term : {"car", "bus", "birds", "wind"})
    REQUIRE(*tax.path_of(term) == std::vector<std::string>{"noise"});
}

TEST_CASE("labels rename communities and children independently") {
  std::vector<std::string> labels{"car", "bus", "birds", "wind"};
  std::vector<graph::Edge> edges{{0, 1, 1}, {1, 2, 1}, {2, 3, 1}};
  graph::WeightedGraph g(std::move(labels), edges);
  community::HierPartition hp;
  hp.top = {0, 0, 0, 0};
  hp.child = {0, 0, 1, 1};
  hp.child_counts = {2};

  std::vector<community::MergeRule> rules{
      {community::MergeRule::Kind::label, "c0", "street"},
      {community::MergeRule::Kind::label, "c0.0", "vehicles"},
  };
  auto tax = community::apply_merge(g, hp, rules);
  REQUIRE(*tax.path_of("car") == std::vector<std::string>{"street", "vehicles"});
  REQUIRE(*tax.path_of("birds") == std::vector<std::string>{"street", "c0.1"});
}

TEST_CASE("a child can merge into its sibling or into a whole community") {
  std::vector<std::string> labels{"car", "bus", "birds", "wind"};
  std::vector<graph::Edge> edges{{0, 1, 1}, {1, 2, 1}, {2, 3, 1}};
  graph::WeightedGraph g(std::move(labels), edges);
  community::HierPartition hp;
  hp.top = {0, 0, 0, 0};
  hp.child = {0, 0, 1, 1};
  hp.child_counts = {2};

  std::vector<community::MergeRule> sibling{
      {community::MergeRule::Kind::merge, "c0.1", "c0.0"},
      {community::MergeRule::Kind::label, "c0.0", "vehicles"},
  };
  auto tax = community::apply_merge(g, hp, sibling);
  REQUIRE(*tax.path_of("wind") == std::vector<std::string>{"c0", "vehicles"});

  std::vector<community::MergeRule> flatten{
      {community::MergeRule::Kind::merge, "c0.1", "c0"},
  };
  auto tax2 = community::apply_merge(g, hp, flatten);
  REQUIRE(*tax2.path_of("wind") == std::vector<std::string>{"c0"});
  REQUIRE(*tax2.path_of("car") == std::vector<std::string>{"c0", "c0.0"});
}

TEST_CASE("merge rule errors") {
  std::vector<std::string> labels{"car", "bus"};
  graph::WeightedGraph g(std::move(labels), {graph::Edge{0, 1, 1.0}});
  community::HierPartition hp;
  hp.top = {0, 0};
  hp.child = {-1, -1};
  hp.child_counts = {0};

  std::vector<community::MergeRule> unknown_src{
      {community::MergeRule::Kind::merge, "c9", "c0"}};
  REQUIRE_THROWS_AS(community::apply_merge(g, hp, unknown_src), InputError);

  std::vector<community::MergeRule> unknown_tgt{
      {community::MergeRule::Kind::merge, "c0", "c9"}};
  REQUIRE_THROWS_AS(community::apply_merge(g, hp, unknown_tgt), InputError);
}

TEST_CASE("merge cycles are reported") {
  std::vector<std::string> labels{"car", "bus", "birds", "wind"};
  graph::WeightedGraph g(std::move(labels), {graph::Edge{0, 1, 1.0}, graph::Edge{2, 3, 1.0}});
  community::HierPartition hp;
  hp.top = {0, 0, 1, 1};
  hp.child = {-1, -1, -1, -1};
  hp.child_counts = {0, 0};

  std::vector<community::MergeRule> cyc{
      {community::MergeRule::Kind::merge, "c0", "c1"},
      {community::MergeRule::Kind::merge, "c1", "c0"},
  };
  REQUIRE_THROWS_AS(community::apply_merge(g, hp, cyc), InputError);
}
