#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgcn/rng.hpp"
#include "hgcn/tensor.hpp"

namespace hgcn {

struct GraphInstance {
  std::int64_t id = 0;  // position in the dataset, 0-based
  int label = 0;        // contiguous class id
  Tensor adjacency;     // (n, n) binary, symmetric, zero diagonal unless the file has loops
  Tensor features;      // (n, F), filled by build_features
  std::vector<int> node_labels;  // raw values remapped to 0..L-1; empty if absent

  std::int64_t num_nodes() const { return adjacency.rows(); }
  std::int64_t degree(std::int64_t i) const {
    std::int64_t d = 0;
    for (std::int64_t j = 0; j < adjacency.cols(); ++j)
      if (adjacency.at(i, j) != 0.0) ++d;
    return d;
  }
};

enum class FeatureScheme { NodeLabelOneHot, DegreeOneHot };

inline const char* feature_scheme_name(FeatureScheme s) {
  return s == FeatureScheme::NodeLabelOneHot ? "node-label" : "degree";
}

struct Dataset {
  std::string name;
  std::vector<GraphInstance> graphs;
  int num_classes = 0;
  std::int64_t feature_dim = 0;
  FeatureScheme feature_scheme = FeatureScheme::NodeLabelOneHot;
  int num_node_labels = 0;            // 0 when the dataset has no node labels
  std::int64_t directed_edges = 0;    // edge lines in <name>_A.txt
  std::map<int, int> label_map;       // raw graph label -> class id (ascending raw order)

  std::int64_t total_nodes() const {
    std::int64_t n = 0;
    for (const auto& g : graphs) n += g.num_nodes();
    return n;
  }
  std::vector<std::int64_t> class_counts() const {
    std::vector<std::int64_t> counts(num_classes, 0);
    for (const auto& g : graphs) ++counts[g.label];
    return counts;
  }
  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(graphs.size());
    for (const auto& g : graphs) out.push_back(g.label);
    return out;
  }
};

namespace detail {

inline std::runtime_error parse_error(const std::string& file, std::size_t line,
                                      const std::string& msg) {
  return std::runtime_error(file + ":" + std::to_string(line) + ": " + msg);
}

// Reads one integer per line, tolerating blank lines.
inline std::vector<long long> read_int_column(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<long long> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    std::size_t b = line.find_last_not_of(" \t\r");
    try {
      std::size_t used = 0;
      long long v = std::stoll(line.substr(a, b - a + 1), &used);
      if (used != b - a + 1) throw std::invalid_argument("trailing junk");
      out.push_back(v);
    } catch (const std::exception&) {
      throw parse_error(path, lineno, "expected an integer, got '" + line + "'");
    }
  }
  return out;
}

}  // namespace detail

// Parses the TU graph-kernel text layout: <dir>/<name>_A.txt holds one
// "i, j" edge per line with 1-based global node ids (both directions normally
// listed), <dir>/<name>_graph_indicator.txt maps node line -> 1-based graph id,
// <dir>/<name>_graph_labels.txt one label per graph, and optionally
// <dir>/<name>_node_labels.txt one label per node. Graph and node labels are
// remapped to contiguous ids in ascending raw order. Duplicate edge lines
// collapse; each edge is stored symmetrically.
inline Dataset parse_tudataset(const std::string& dir, const std::string& name) {
  const std::string prefix = dir + "/" + name + "_";

  const auto indicator = detail::read_int_column(prefix + "graph_indicator.txt");
  if (indicator.empty())
    throw std::runtime_error(prefix + "graph_indicator.txt: no nodes listed");
  const std::int64_t num_nodes = static_cast<std::int64_t>(indicator.size());
  long long num_graphs = 0;
  for (std::size_t i = 0; i < indicator.size(); ++i) {
    const long long g = indicator[i];
    if (g < 1 || (i > 0 && g < indicator[i - 1]))
      throw detail::parse_error(prefix + "graph_indicator.txt", i + 1,
                                "graph ids must be positive and non-decreasing");
    num_graphs = std::max(num_graphs, g);
  }

  const auto raw_labels = detail::read_int_column(prefix + "graph_labels.txt");
  if (static_cast<long long>(raw_labels.size()) != num_graphs)
    throw std::runtime_error(prefix + "graph_labels.txt: " + std::to_string(raw_labels.size()) +
                             " labels for " + std::to_string(num_graphs) + " graphs");

  std::vector<long long> node_labels_raw;
  {
    std::ifstream probe(prefix + "node_labels.txt");
    if (probe) node_labels_raw = detail::read_int_column(prefix + "node_labels.txt");
  }
  if (!node_labels_raw.empty() &&
      static_cast<std::int64_t>(node_labels_raw.size()) != num_nodes)
    throw std::runtime_error(prefix + "node_labels.txt: " +
                             std::to_string(node_labels_raw.size()) + " labels for " +
                             std::to_string(num_nodes) + " nodes");

  Dataset ds;
  ds.name = name;

  // Per-graph node spans (nodes of one graph are contiguous in TU files).
  std::vector<std::int64_t> first_node(num_graphs + 1, -1), node_count(num_graphs + 1, 0);
  for (std::int64_t i = 0; i < num_nodes; ++i) {
    const long long g = indicator[i];
    if (first_node[g] < 0) first_node[g] = i;
    ++node_count[g];
  }
  for (long long g = 1; g <= num_graphs; ++g)
    if (node_count[g] == 0)
      throw std::runtime_error(prefix + "graph_indicator.txt: graph " + std::to_string(g) +
                               " has no nodes");

  std::map<int, int> graph_label_map;
  for (long long raw : raw_labels) graph_label_map[static_cast<int>(raw)];
  int next_class = 0;
  for (auto& kv : graph_label_map) kv.second = next_class++;
  ds.label_map = graph_label_map;
  ds.num_classes = next_class;

  std::map<int, int> node_label_map;
  if (!node_labels_raw.empty()) {
    for (long long raw : node_labels_raw) node_label_map[static_cast<int>(raw)];
    int next = 0;
    for (auto& kv : node_label_map) kv.second = next++;
    ds.num_node_labels = next;
  }

  ds.graphs.resize(num_graphs);
  for (long long g = 1; g <= num_graphs; ++g) {
    auto& gi = ds.graphs[g - 1];
    gi.id = g - 1;
    gi.label = graph_label_map.at(static_cast<int>(raw_labels[g - 1]));
    const std::int64_t n = node_count[g];
    gi.adjacency = Tensor::zeros({n, n});
    if (!node_labels_raw.empty()) {
      gi.node_labels.resize(n);
      for (std::int64_t i = 0; i < n; ++i)
        gi.node_labels[i] = node_label_map.at(static_cast<int>(node_labels_raw[first_node[g] + i]));
    }
  }

  const std::string a_path = prefix + "A.txt";
  std::ifstream a_in(a_path);
  if (!a_in) throw std::runtime_error("cannot open " + a_path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(a_in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    long long u = 0, v = 0;
    std::string rest;
    if (!(ss >> u >> v) || (ss >> rest))
      throw detail::parse_error(a_path, lineno, "expected 'i, j', got '" + line + "'");
    if (u < 1 || u > num_nodes || v < 1 || v > num_nodes)
      throw detail::parse_error(a_path, lineno, "node id out of range 1.." +
                                std::to_string(num_nodes));
    const long long gu = indicator[u - 1], gv = indicator[v - 1];
    if (gu != gv)
      throw detail::parse_error(a_path, lineno, "edge joins graph " + std::to_string(gu) +
                                " and graph " + std::to_string(gv));
    ++ds.directed_edges;
    auto& adj = ds.graphs[gu - 1].adjacency;
    const std::int64_t lu = u - 1 - first_node[gu], lv = v - 1 - first_node[gu];
    adj.at(lu, lv) = 1.0;
    adj.at(lv, lu) = 1.0;
  }
  return ds;
}

// Fills every graph's feature matrix. NodeLabelOneHot: row i is the one-hot of
// node i's label (F = num_node_labels). DegreeOneHot: row i is the one-hot of
// min(degree(i), max_degree), F = max_degree + 1.
inline void build_features(Dataset& ds, FeatureScheme scheme, std::int64_t max_degree = 63) {
  ds.feature_scheme = scheme;
  if (scheme == FeatureScheme::NodeLabelOneHot) {
    if (ds.num_node_labels == 0)
      throw std::runtime_error("dataset " + ds.name +
                               " has no node labels; use the degree feature scheme");
    ds.feature_dim = ds.num_node_labels;
    for (auto& g : ds.graphs) {
      const std::int64_t n = g.num_nodes();
      g.features = Tensor::zeros({n, ds.feature_dim});
      for (std::int64_t i = 0; i < n; ++i) g.features.at(i, g.node_labels[i]) = 1.0;
    }
    return;
  }
  if (max_degree < 0) throw std::invalid_argument("build_features: max_degree must be >= 0");
  ds.feature_dim = max_degree + 1;
  for (auto& g : ds.graphs) {
    const std::int64_t n = g.num_nodes();
    g.features = Tensor::zeros({n, ds.feature_dim});
    for (std::int64_t i = 0; i < n; ++i)
      g.features.at(i, std::min(g.degree(i), max_degree)) = 1.0;
  }
}

// Fold assignment for stratified k-fold cross-validation.
struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<int> assignments;  // per-graph fold index

  std::vector<std::int64_t> test_of(int fold) const {
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
      if (assignments[i] == fold) out.push_back(static_cast<std::int64_t>(i));
    return out;
  }
  std::vector<std::int64_t> train_of(int fold) const {
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
      if (assignments[i] != fold) out.push_back(static_cast<std::int64_t>(i));
    return out;
  }
};

// Stratified assignment: indices of each class are shuffled with a stream
// derived from (seed, class) and dealt round-robin, rotating the starting fold
// between classes so remainders spread out. Depends only on (labels, k, seed).
inline FoldPlan make_folds(const std::vector<int>& labels, int k, std::uint64_t seed) {
  const std::int64_t n = static_cast<std::int64_t>(labels.size());
  if (k < 2) throw std::invalid_argument("make_folds: need at least 2 folds");
  int num_classes = 0;
  for (int c : labels) {
    if (c < 0) throw std::invalid_argument("make_folds: negative class id");
    num_classes = std::max(num_classes, c + 1);
  }
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignments.assign(n, -1);
  int start = 0;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<std::int64_t> members;
    for (std::int64_t i = 0; i < n; ++i)
      if (labels[i] == c) members.push_back(i);
    if (static_cast<int>(members.size()) < k)
      throw std::invalid_argument("make_folds: class " + std::to_string(c) + " has " +
                                  std::to_string(members.size()) + " graphs, fewer than " +
                                  std::to_string(k) + " folds");
    Rng rng(Rng::derive(seed, 0x464f4c44u + static_cast<std::uint64_t>(c)));
    rng.shuffle(members);
    for (std::size_t q = 0; q < members.size(); ++q)
      plan.assignments[members[q]] = (start + static_cast<int>(q)) % k;
    start = (start + static_cast<int>(members.size())) % k;
  }
  return plan;
}

// Symmetric degree renormalization with self-loops: D^{-1/2} (A + I) D^{-1/2}
// where D is the degree matrix of A + I. Entries of A must be non-negative.
inline Tensor normalize_adjacency(const Tensor& a) {
  if (a.rank() != 2 || a.shape[0] != a.shape[1])
    throw std::invalid_argument("normalize_adjacency: square matrix required, got " +
                                shape_str(a.shape));
  const std::int64_t n = a.shape[0];
  std::vector<double> dinv(n);
  for (std::int64_t i = 0; i < n; ++i) {
    double d = 1.0;
    for (std::int64_t j = 0; j < n; ++j) {
      const double v = a.at(i, j);
      if (v < 0.0)
        throw std::invalid_argument("normalize_adjacency: negative entry at (" +
                                    std::to_string(i) + "," + std::to_string(j) + ")");
      d += v;
    }
    dinv[i] = 1.0 / std::sqrt(d);
  }
  Tensor out({n, n});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j)
      out.at(i, j) = dinv[i] * (a.at(i, j) + (i == j ? 1.0 : 0.0)) * dinv[j];
  return out;
}

}  // namespace hgcn
