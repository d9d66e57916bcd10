#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "hgcn/graph.hpp"

namespace hgcn {

namespace detail {
inline GraphInstance make_fixture(std::int64_t n, const std::vector<std::pair<int, int>>& edges,
                                  int label, std::int64_t feature_dim, int offset) {
  GraphInstance g;
  g.label = label;
  g.adjacency = Tensor::zeros({n, n});
  for (auto [a, b] : edges) {
    g.adjacency.at(a, b) = 1.0;
    g.adjacency.at(b, a) = 1.0;
  }
  g.features = Tensor::zeros({n, feature_dim});
  for (std::int64_t i = 0; i < n; ++i)
    g.features.at(i, (i * 3 + offset) % feature_dim) = 1.0;
  return g;
}
}  // namespace detail

// Deterministic in-memory graphs for gradient checking and diagnostics:
// 0 = 4-node cycle with a chord, 1 = 6-node bridged triangles, 2 = 9-node
// ring with pendants. Features are one-hot, MUTAG-like (dimension 7).
inline GraphInstance fixture_graph(int which, std::int64_t feature_dim = 7) {
  switch (which) {
    case 0:
      return detail::make_fixture(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}}, 1, feature_dim, 0);
    case 1:
      return detail::make_fixture(
          6, {{0, 1}, {1, 2}, {2, 0}, {3, 4}, {4, 5}, {5, 3}, {2, 3}}, 0, feature_dim, 1);
    case 2:
      return detail::make_fixture(9,
                                  {{0, 1},
                                   {1, 2},
                                   {2, 3},
                                   {3, 4},
                                   {4, 5},
                                   {5, 0},
                                   {0, 6},
                                   {2, 7},
                                   {4, 8}},
                                  1, feature_dim, 2);
    default:
      throw std::invalid_argument("fixture_graph: index must be 0, 1, or 2");
  }
}

inline std::vector<GraphInstance> fixture_graphs(std::int64_t feature_dim = 7) {
  return {fixture_graph(0, feature_dim), fixture_graph(1, feature_dim),
          fixture_graph(2, feature_dim)};
}

}  // namespace hgcn
