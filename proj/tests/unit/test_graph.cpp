#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <set>

#include "hgcn/graph.hpp"
#include "helpers.hpp"

using namespace hgcn;

#ifndef HGCN_REPO_DIR
#error "HGCN_REPO_DIR must point at the repository root"
#endif
static const std::string kData = std::string(HGCN_REPO_DIR) + "/tests/data";

TEST_CASE("parses a one-graph path fixture") {
  Dataset ds = parse_tudataset(kData + "/TINY", "TINY");
  REQUIRE(ds.graphs.size() == 1);
  REQUIRE(ds.num_classes == 1);
  REQUIRE(ds.graphs[0].label == 0);  // raw label 1 remapped
  REQUIRE(ds.directed_edges == 4);
  const Tensor& a = ds.graphs[0].adjacency;
  REQUIRE(a.shape == Shape{3, 3});
  REQUIRE(test::max_diff(a, test::mat({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}})) == 0.0);
}

TEST_CASE("remaps graph labels to a contiguous range") {
  Dataset ds = parse_tudataset(kData + "/PAIR", "PAIR");
  REQUIRE(ds.graphs.size() == 2);
  REQUIRE(ds.num_classes == 2);
  REQUIRE(ds.graphs[0].label == 0);  // raw -1
  REQUIRE(ds.graphs[1].label == 1);  // raw 1
  REQUIRE(ds.label_map.at(-1) == 0);
  REQUIRE(ds.label_map.at(1) == 1);
}

TEST_CASE("edge referencing a missing node reports the offending line") {
  REQUIRE_THROWS_WITH(parse_tudataset(kData + "/BAD", "BAD"),
                      Catch::Matchers::ContainsSubstring("BAD_A.txt:3") &&
                          Catch::Matchers::ContainsSubstring("out of range"));
}

TEST_CASE("edge crossing graphs reports the offending line") {
  REQUIRE_THROWS_WITH(parse_tudataset(kData + "/BADX", "BADX"),
                      Catch::Matchers::ContainsSubstring("BADX_A.txt:3") &&
                          Catch::Matchers::ContainsSubstring("joins graph"));
}

TEST_CASE("non-integer token reports file and line") {
  REQUIRE_THROWS_WITH(parse_tudataset(kData + "/BADTOK", "BADTOK"),
                      Catch::Matchers::ContainsSubstring("BADTOK_graph_indicator.txt:2"));
}

TEST_CASE("missing mandatory file is named") {
  REQUIRE_THROWS_WITH(parse_tudataset(kData + "/TINY", "NOPE"),
                      Catch::Matchers::ContainsSubstring("NOPE_graph_indicator.txt"));
}

TEST_CASE("node-label features are one-hot rows") {
  Dataset ds = parse_tudataset(kData + "/TINY", "TINY");
  build_features(ds, FeatureScheme::NodeLabelOneHot);
  REQUIRE(ds.feature_dim == 3);
  // node labels 0, 2, 1 with 3 distinct values: a permuted identity
  REQUIRE(test::max_diff(ds.graphs[0].features,
                         test::mat({{1, 0, 0}, {0, 0, 1}, {0, 1, 0}})) == 0.0);
}

TEST_CASE("node-label scheme without node labels instructs degree scheme") {
  Dataset ds = parse_tudataset(kData + "/NOLBL", "NOLBL");
  REQUIRE(ds.num_node_labels == 0);
  REQUIRE_THROWS_WITH(build_features(ds, FeatureScheme::NodeLabelOneHot),
                      Catch::Matchers::ContainsSubstring("degree"));
}

TEST_CASE("degree features clamp at max_degree") {
  Dataset ds = parse_tudataset(kData + "/NOLBL", "NOLBL");  // 4-node path
  build_features(ds, FeatureScheme::DegreeOneHot, 4);
  REQUIRE(ds.feature_dim == 5);
  REQUIRE(test::max_diff(ds.graphs[0].features, test::mat({{0, 1, 0, 0, 0},
                                                           {0, 0, 1, 0, 0},
                                                           {0, 0, 1, 0, 0},
                                                           {0, 1, 0, 0, 0}})) == 0.0);
  // a hub of degree 4 clamps to position 2 when max_degree = 2
  build_features(ds, FeatureScheme::DegreeOneHot, 2);
  REQUIRE(ds.feature_dim == 3);
  Dataset wheel = parse_tudataset(kData + "/MINI", "MINI");
  build_features(wheel, FeatureScheme::DegreeOneHot, 2);
  bool found_clamped = false;
  for (const auto& g : wheel.graphs)
    for (std::int64_t i = 0; i < g.num_nodes(); ++i)
      if (g.degree(i) > 2) {
        REQUIRE(g.features.at(i, 2) == 1.0);
        found_clamped = true;
      }
  REQUIRE(found_clamped);
}

TEST_CASE("parsing then re-serializing reproduces the edge set and labels") {
  Dataset ds = parse_tudataset(kData + "/PAIR", "PAIR");
  // re-serialize from the in-memory adjacency
  std::set<std::pair<long, long>> out_edges;
  long base = 0;
  for (const auto& g : ds.graphs) {
    for (std::int64_t i = 0; i < g.num_nodes(); ++i)
      for (std::int64_t j = 0; j < g.num_nodes(); ++j)
        if (g.adjacency.at(i, j) != 0.0) out_edges.insert({base + i + 1, base + j + 1});
    base += g.num_nodes();
  }
  std::set<std::pair<long, long>> in_edges;
  std::ifstream a(kData + "/PAIR/PAIR_A.txt");
  long u, v;
  char comma;
  while (a >> u >> comma >> v) in_edges.insert({u, v});
  REQUIRE(in_edges == out_edges);
}

TEST_CASE("stratified folds: balanced classes land one per fold") {
  std::vector<int> labels{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  FoldPlan plan = make_folds(labels, 5, 99);
  for (int f = 0; f < 5; ++f) {
    auto test = plan.test_of(f);
    REQUIRE(test.size() == 2);
    REQUIRE(labels[test[0]] + labels[test[1]] == 1);  // one of each class
  }
  FoldPlan again = make_folds(labels, 5, 99);
  REQUIRE(plan.assignments == again.assignments);
  FoldPlan other = make_folds(labels, 5, 100);
  REQUIRE(plan.assignments != other.assignments);
}

TEST_CASE("folds partition the dataset and stay within one graph of proportional") {
  std::vector<int> labels;
  for (int i = 0; i < 125; ++i) labels.push_back(0);
  for (int i = 0; i < 63; ++i) labels.push_back(1);
  Rng rng(5);
  rng.shuffle(labels);
  FoldPlan plan = make_folds(labels, 10, 7);
  std::vector<std::vector<int>> class_counts(10, std::vector<int>(2, 0));
  std::size_t total = 0;
  for (int f = 0; f < 10; ++f) {
    for (auto i : plan.test_of(f)) ++class_counts[f][labels[i]];
    total += plan.test_of(f).size();
  }
  REQUIRE(total == labels.size());
  for (int c = 0; c < 2; ++c) {
    int lo = 1000, hi = -1;
    for (int f = 0; f < 10; ++f) {
      lo = std::min(lo, class_counts[f][c]);
      hi = std::max(hi, class_counts[f][c]);
    }
    REQUIRE(hi - lo <= 1);
  }
}

TEST_CASE("fold preconditions") {
  std::vector<int> labels{0, 0, 0, 1, 1, 1};
  REQUIRE_THROWS_WITH(make_folds(labels, 1, 0), Catch::Matchers::ContainsSubstring("2"));
  REQUIRE_THROWS_WITH(make_folds(labels, 4, 0),
                      Catch::Matchers::ContainsSubstring("class") &&
                          Catch::Matchers::ContainsSubstring("fewer"));
}

TEST_CASE("normalize_adjacency matches hand values") {
  Tensor single = normalize_adjacency(Tensor::zeros({1, 1}));
  REQUIRE(single.data[0] == 1.0);

  Tensor pair = normalize_adjacency(test::mat({{0, 1}, {1, 0}}));
  REQUIRE(test::max_diff(pair, test::mat({{0.5, 0.5}, {0.5, 0.5}})) <= 1e-15);

  Tensor weighted = normalize_adjacency(test::mat({{0, 2}, {2, 0}}));
  REQUIRE(test::max_diff(weighted, test::mat({{1.0 / 3, 2.0 / 3}, {2.0 / 3, 1.0 / 3}})) <= 1e-15);
}

TEST_CASE("normalize_adjacency is symmetric and permutation-equivariant") {
  Rng rng(31);
  const std::int64_t n = 6;
  Tensor a = Tensor::zeros({n, n});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = i + 1; j < n; ++j)
      if (rng.unit_real() < 0.5) a.at(i, j) = a.at(j, i) = 1.0 + rng.unit_real();
  Tensor norm = normalize_adjacency(a);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j)
      REQUIRE(std::abs(norm.at(i, j) - norm.at(j, i)) <= 1e-12);

  std::vector<std::int64_t> perm{3, 1, 5, 0, 4, 2};
  Tensor pa = Tensor::zeros({n, n});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) pa.at(perm[i], perm[j]) = a.at(i, j);
  Tensor pnorm = normalize_adjacency(pa);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j)
      REQUIRE(std::abs(pnorm.at(perm[i], perm[j]) - norm.at(i, j)) <= 1e-12);
}

TEST_CASE("normalize_adjacency validates input") {
  REQUIRE_THROWS_WITH(normalize_adjacency(Tensor::zeros({2, 3})),
                      Catch::Matchers::ContainsSubstring("square"));
  REQUIRE_THROWS_WITH(normalize_adjacency(test::mat({{0, -1}, {-1, 0}})),
                      Catch::Matchers::ContainsSubstring("negative"));
}

TEST_CASE("row sums of the normalized adjacency are 1 exactly for regular graphs") {
  // 0-1-2-0 triangle: 2-regular
  Tensor tri = normalize_adjacency(test::mat({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}}));
  for (std::int64_t i = 0; i < 3; ++i) {
    double s = 0.0;
    for (std::int64_t j = 0; j < 3; ++j) s += tri.at(i, j);
    REQUIRE(s == Catch::Approx(1.0).margin(1e-12));
  }
  // path: not regular, interior row sum != 1
  Tensor path = normalize_adjacency(test::mat({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}}));
  double s = 0.0;
  for (std::int64_t j = 0; j < 3; ++j) s += path.at(1, j);
  REQUIRE(s != Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("MUTAG parses with the canonical statistics") {
  Dataset ds = parse_tudataset(std::string(HGCN_REPO_DIR) + "/data/MUTAG", "MUTAG");
  REQUIRE(ds.graphs.size() == 188);
  REQUIRE(ds.total_nodes() == 3371);
  REQUIRE(ds.directed_edges == 7442);
  REQUIRE(ds.num_classes == 2);
  const auto counts = ds.class_counts();
  REQUIRE(counts[0] == 63);   // raw -1
  REQUIRE(counts[1] == 125);  // raw +1
  REQUIRE(ds.num_node_labels == 7);
  build_features(ds, FeatureScheme::NodeLabelOneHot);
  REQUIRE(ds.feature_dim == 7);
  for (const auto& g : ds.graphs) {
    // symmetric, zero-diagonal adjacency
    for (std::int64_t i = 0; i < g.num_nodes(); ++i) {
      REQUIRE(g.adjacency.at(i, i) == 0.0);
      for (std::int64_t j = 0; j < g.num_nodes(); ++j)
        REQUIRE(g.adjacency.at(i, j) == g.adjacency.at(j, i));
    }
  }
}
