#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hgcn/autodiff.hpp"
#include "hgcn/graph.hpp"
#include "hgcn/rng.hpp"

namespace hgcn {

struct ModelConfig {
  int K = 4;                                  // latent factors in the primary layer
  std::int64_t h = 32;                        // primary capsule dimension (= d at all layers)
  std::vector<std::int64_t> capsule_counts;   // [N_2, ..., O]; last entry = class count
  int R = 3;                                  // routing iterations
  bool disentangle_enabled = true;            // off = ablation A1
  bool residual_enabled = true;               // off = ablation A2

  std::int64_t d() const { return h; }
  int num_layers() const { return static_cast<int>(capsule_counts.size()); }

  void validate(int num_classes) const {
    if (K < 1) throw std::invalid_argument("ModelConfig: K must be >= 1");
    if (h < 1 || h % K != 0)
      throw std::invalid_argument("ModelConfig: h (" + std::to_string(h) +
                                  ") must be positive and divisible by K (" + std::to_string(K) +
                                  ")");
    if (R < 1) throw std::invalid_argument("ModelConfig: R must be >= 1");
    if (capsule_counts.empty())
      throw std::invalid_argument("ModelConfig: capsule_counts must not be empty");
    for (auto c : capsule_counts)
      if (c < 1) throw std::invalid_argument("ModelConfig: capsule counts must be positive");
    if (capsule_counts.back() != num_classes)
      throw std::invalid_argument("ModelConfig: last capsule count " +
                                  std::to_string(capsule_counts.back()) +
                                  " must equal the class count " + std::to_string(num_classes));
  }
};

// Capsules at one layer: pose matrix plus the adjacency over those capsules.
struct CapsuleBank {
  Tensor poses;      // (N_l, d)
  Tensor adjacency;  // (N_l, N_l), nonnegative symmetric
};

struct RoutingIteration {
  Tensor c;      // softmax weights used this iteration
  Tensor poses;  // aggregated capsule poses after squash
  Tensor b;      // logits after the agreement update
};

struct RoutingLayerTrace {
  std::vector<Tensor> votes;                  // per whole: (N_l, d)
  Tensor c;                                   // final routing weights (N_l, N_{l+1})
  Tensor b;                                   // final logits
  Tensor coarsened;                           // raw C^T A C
  CapsuleBank bank_out;                       // poses after residual + next adjacency
  std::vector<RoutingIteration> iterations;   // filled when recording is requested
};

struct RoutingTrace {
  CapsuleBank primary;
  std::vector<RoutingLayerTrace> layers;
};

// --- parameter bank -------------------------------------------------------

inline std::string disentangle_w_name(int k) { return "disentangle.W" + std::to_string(k); }
inline std::string disentangle_b_name(int k) { return "disentangle.b" + std::to_string(k); }
inline std::string tgnn_w_name(int layer, int whole) {
  return "tgnn.L" + std::to_string(layer) + ".W" + std::to_string(whole);
}

inline Tensor glorot(Rng& rng, std::int64_t fan_in, std::int64_t fan_out, Shape shape) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.symmetric(s);
  return t;
}

// Registers every trainable tensor in a fixed order: disentangle projections,
// per-layer TGNN weights, reconstruction decoder. Weights are uniform in
// [-s, s] with s = sqrt(6 / (fan_in + fan_out)); biases start at zero.
inline void init_params(ParamStore& store, const ModelConfig& cfg, std::int64_t feature_dim,
                        Rng& rng) {
  const std::int64_t d = cfg.d();
  if (cfg.disentangle_enabled) {
    const std::int64_t f = cfg.h / cfg.K;
    for (int k = 0; k < cfg.K; ++k) {
      store.add(disentangle_w_name(k), glorot(rng, feature_dim, f, {feature_dim, f}));
      store.add(disentangle_b_name(k), Tensor::zeros({f}));
    }
  } else {
    store.add("disentangle.W", glorot(rng, feature_dim, cfg.h, {feature_dim, cfg.h}));
    store.add("disentangle.b", Tensor::zeros({cfg.h}));
  }
  for (int l = 0; l < cfg.num_layers(); ++l)
    for (std::int64_t j = 0; j < cfg.capsule_counts[l]; ++j)
      store.add(tgnn_w_name(l, static_cast<int>(j)), glorot(rng, d, d, {d, d}));
  const std::int64_t classes = cfg.capsule_counts.back();
  store.add("recon.W", glorot(rng, classes * d, d, {classes * d, d}));
  store.add("recon.b", Tensor::zeros({d}));
}

// TGNN parameters for one layer: one d x d matrix per whole, independent of
// the part count N_l.
inline std::int64_t tgnn_layer_param_count(std::int64_t num_wholes, std::int64_t d_in,
                                           std::int64_t d_out) {
  return num_wholes * d_in * d_out;
}

// --- forward components ----------------------------------------------------

// Row-wise squash: z -> (|z|^2 / (1 + |z|^2)) * z/|z|, written as
// z * |z| / (1 + |z|^2) so the origin is an ordinary point (value and
// gradient 0 there).
inline Var squash_rows(const Var& z) {
  Var n = norm_rows(z);
  Var factor = divide(n, add_scalar(square(n), 1.0));
  return mul(z, factor);
}

// Factor-wise projection of node features: per factor k, tanh(X W_k) + b_k,
// blocks concatenated along the feature axis. With disentanglement off (A1)
// a single shared linear map X W + b is used instead.
inline Var disentangle(Tape& tape, const Var& x, ParamStore& store, const ModelConfig& cfg) {
  if (!cfg.disentangle_enabled) {
    Var w = param(tape, store, "disentangle.W");
    Var b = param(tape, store, "disentangle.b");
    return add(matmul(x, w), b);
  }
  std::vector<Var> blocks;
  blocks.reserve(cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    Var w = param(tape, store, disentangle_w_name(k));
    Var b = param(tape, store, disentangle_b_name(k));
    blocks.push_back(add(tanh(matmul(x, w)), b));
  }
  return cfg.K == 1 ? blocks[0] : concat(blocks, 1);
}

// On-tape symmetric renormalization D^{-1/2} (A + I) D^{-1/2}; gradients flow
// through weighted (coarsened) adjacencies.
inline Var normalize_adjacency_var(Tape& tape, const Var& a) {
  const std::int64_t n = a.shape()[0];
  Var deg = add_scalar(sum_axis(a, 1), 1.0);     // degrees of A + I, (n, 1)
  Var dinv = rsqrt(deg);
  Var with_loops = add(a, constant(tape, Tensor::eye(n)));
  return mul(mul(with_loops, dinv), transpose(dinv));
}

// One vote block: tanh(A_hat u W_j). `nonlinearity` exists for tests that
// need the bare propagation.
inline Var tgnn_vote(const Var& norm_adj, const Var& poses, const Var& weight,
                     bool nonlinearity = true) {
  Var v = matmul(matmul(norm_adj, poses), weight);
  return nonlinearity ? tanh(v) : v;
}

struct RouteResult {
  Var poses;  // (J, d)
  Var c;      // final routing weights (N, J)
  Var b;      // final logits (N, J)
  std::vector<RoutingIteration> iterations;
};

// Routing by agreement over R iterations: logits start at zero; each round
// takes the row softmax, aggregates votes per whole, squashes, and adds the
// vote-pose agreement back onto the logits. Unrolled on the tape, so
// gradients pass through every iteration.
inline RouteResult route(Tape& tape, const std::vector<Var>& votes, int R,
                         bool record_iterations = false) {
  if (votes.empty()) throw std::invalid_argument("route: no vote blocks");
  if (R < 1) throw std::invalid_argument("route: R must be >= 1");
  const std::int64_t J = static_cast<std::int64_t>(votes.size());
  const std::int64_t N = votes[0].shape()[0];
  for (const auto& v : votes)
    if (v.shape()[0] != N)
      throw std::invalid_argument("route: vote blocks disagree on part count");

  std::vector<Var> selectors;  // one-hot (J, 1) columns
  selectors.reserve(J);
  for (std::int64_t j = 0; j < J; ++j) {
    Tensor e = Tensor::zeros({J, 1});
    e.data[j] = 1.0;
    selectors.push_back(constant(tape, std::move(e)));
  }

  RouteResult out;
  Var b = constant(tape, Tensor::zeros({N, J}));
  Var c = b, poses = b;  // overwritten in the first iteration
  for (int r = 0; r < R; ++r) {
    c = softmax_rows(b);
    std::vector<Var> agg;
    agg.reserve(J);
    for (std::int64_t j = 0; j < J; ++j) {
      Var col = matmul(c, selectors[j]);                    // (N, 1)
      Var s = matmul(transpose(col), votes[j]);             // (1, d)
      agg.push_back(squash_rows(s));
    }
    poses = concat(agg, 0);                                 // (J, d)
    for (std::int64_t j = 0; j < J; ++j) {
      Var aj = matmul(votes[j], transpose(agg[j]));         // (N, 1) agreements
      b = add(b, matmul(aj, transpose(selectors[j])));      // scatter into column j
    }
    if (record_iterations)
      out.iterations.push_back({c.val(), poses.val(), b.val()});
  }
  out.poses = poses;
  out.c = c;
  out.b = b;
  return out;
}

inline Var coarsen(const Var& adjacency, const Var& c) {
  return matmul(transpose(c), matmul(adjacency, c));
}

inline Tensor coarsen(const Tensor& adjacency, const Tensor& c) {
  return matmul_plain(transpose_plain(c), matmul_plain(adjacency, c));
}

// Residual from the layer below: add the column mean of the previous poses to
// every new pose, then re-squash to restore length < 1.
inline Var residual_add(const Var& next_poses, const Var& prev_poses) {
  if (next_poses.shape()[1] != prev_poses.shape()[1])
    throw std::invalid_argument("residual_add: pose dimensions differ, " +
                                shape_str(next_poses.shape()) + " vs " +
                                shape_str(prev_poses.shape()));
  Var g = mean_axis(prev_poses, 0);  // (1, d)
  return squash_rows(add(next_poses, g));
}

struct ForwardResult {
  Var class_capsules;  // (O, d)
  Var primary;         // (N, h)
  RoutingTrace trace;
};

// Full forward pass: primary capsules from disentangled features, then per
// layer: normalize adjacency, vote, route, coarsen, residual.
inline ForwardResult forward(Tape& tape, const GraphInstance& graph, ParamStore& store,
                             const ModelConfig& cfg, bool record_iterations = false) {
  if (graph.features.numel() == 0)
    throw std::invalid_argument("forward: graph has no features; run build_features");
  ForwardResult out;
  Var x = constant(tape, graph.features);
  Var z = disentangle(tape, x, store, cfg);
  Var poses = squash_rows(z);
  out.primary = poses;
  Var adj = constant(tape, graph.adjacency);
  out.trace.primary = {poses.val(), adj.val()};

  for (int l = 0; l < cfg.num_layers(); ++l) {
    const std::int64_t J = cfg.capsule_counts[l];
    Var norm_adj = normalize_adjacency_var(tape, adj);
    std::vector<Var> votes;
    votes.reserve(J);
    for (std::int64_t j = 0; j < J; ++j)
      votes.push_back(tgnn_vote(norm_adj, poses, param(tape, store, tgnn_w_name(l, static_cast<int>(j)))));
    RouteResult routed = route(tape, votes, cfg.R, record_iterations);
    Var next_adj = coarsen(adj, routed.c);
    Var next_poses =
        cfg.residual_enabled ? residual_add(routed.poses, poses) : routed.poses;

    RoutingLayerTrace layer;
    for (const auto& v : votes) layer.votes.push_back(v.val());
    layer.c = routed.c.val();
    layer.b = routed.b.val();
    layer.coarsened = next_adj.val();
    layer.bank_out = {next_poses.val(), next_adj.val()};
    layer.iterations = std::move(routed.iterations);
    out.trace.layers.push_back(std::move(layer));

    poses = next_poses;
    adj = next_adj;
  }
  out.class_capsules = poses;
  return out;
}

inline std::vector<double> capsule_lengths(const Tensor& poses) {
  std::vector<double> lengths(poses.rows());
  for (std::int64_t i = 0; i < poses.rows(); ++i) {
    double s = 0.0;
    for (std::int64_t j = 0; j < poses.cols(); ++j) s += poses.at(i, j) * poses.at(i, j);
    lengths[i] = std::sqrt(s);
  }
  return lengths;
}

// Predicted class = argmax capsule length (lowest index wins ties).
inline int predict(const Tensor& class_capsules) {
  const auto lengths = capsule_lengths(class_capsules);
  int best = 0;
  for (std::size_t o = 1; o < lengths.size(); ++o)
    if (lengths[o] > lengths[best]) best = static_cast<int>(o);
  return best;
}

}  // namespace hgcn
