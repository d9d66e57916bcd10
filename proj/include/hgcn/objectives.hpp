#pragma once

#include <stdexcept>
#include <string>

#include "hgcn/autodiff.hpp"
#include "hgcn/model.hpp"

namespace hgcn {

struct MarginConfig {
  double m_plus = 0.9;
  double m_minus = 0.1;
  double lambda = 0.5;

  void validate() const {
    if (!(0.0 < m_minus && m_minus < m_plus && m_plus < 1.0))
      throw std::invalid_argument("MarginConfig: need 0 < m_minus < m_plus < 1");
    if (!(lambda > 0.0)) throw std::invalid_argument("MarginConfig: lambda must be positive");
  }
};

struct ObjectiveConfig {
  double beta = 0.1;
  bool recon_enabled = true;  // off = ablation A3

  void validate() const {
    if (beta < 0.0) throw std::invalid_argument("ObjectiveConfig: beta must be >= 0");
  }
};

// Margin loss over class-capsule lengths:
// sum_o [ T_o max(0, m+ - |u_o|)^2 + lambda (1 - T_o) max(0, |u_o| - m-)^2 ].
inline Var margin_loss(Tape& tape, const Var& class_capsules, int label,
                       const MarginConfig& cfg = {}) {
  const std::int64_t classes = class_capsules.shape()[0];
  if (label < 0 || label >= classes)
    throw std::invalid_argument("margin_loss: label " + std::to_string(label) +
                                " out of range for " + std::to_string(classes) + " classes");
  Tensor t = Tensor::zeros({classes, 1});
  t.data[label] = 1.0;
  Tensor not_t = Tensor::full({classes, 1}, 1.0);
  not_t.data[label] = 0.0;

  Var lengths = norm_rows(class_capsules);  // (O, 1)
  Var present = square(relu(add_scalar(scale(lengths, -1.0), cfg.m_plus)));
  Var absent = square(relu(add_scalar(lengths, -cfg.m_minus)));
  Var per_class = add(mul(constant(tape, std::move(t)), present),
                      scale(mul(constant(tape, std::move(not_t)), absent), cfg.lambda));
  return sum_all(per_class);
}

// Masked reconstruction embedding: zero every class capsule except the
// ground-truth row, flatten, decode to a d-vector, and add that correction to
// every primary pose row.
inline Var masked_embed(Tape& tape, const Var& primary, const Var& class_capsules, int label,
                        ParamStore& store) {
  const std::int64_t classes = class_capsules.shape()[0];
  const std::int64_t d = class_capsules.shape()[1];
  if (label < 0 || label >= classes)
    throw std::invalid_argument("masked_embed: label " + std::to_string(label) +
                                " out of range for " + std::to_string(classes) + " classes");
  Tensor mask = Tensor::zeros({classes, 1});
  mask.data[label] = 1.0;
  Var kept = mul(class_capsules, constant(tape, std::move(mask)));
  Var flat = reshape(kept, {1, classes * d});
  Var w = param(tape, store, "recon.W");
  Var b = param(tape, store, "recon.b");
  Var correction = add(matmul(flat, w), b);  // (1, d)
  return add(primary, correction);
}

// Dense cross-entropy between the 0/1 adjacency and sigmoid(Z Z^T), averaged
// over all N^2 entries (diagonal included); probabilities clamped away from
// {0, 1} before the logs.
inline Var reconstruction_loss(Tape& tape, const Var& embed, const Tensor& adjacency) {
  const std::int64_t n = embed.shape()[0];
  if (adjacency.rank() != 2 || adjacency.shape[0] != n || adjacency.shape[1] != n)
    throw std::invalid_argument("reconstruction_loss: adjacency " + shape_str(adjacency.shape) +
                                " does not match " + std::to_string(n) + " embedding rows");
  Tensor ones_minus = Tensor::full({n, n}, 1.0);
  for (std::int64_t i = 0; i < n * n; ++i) ones_minus.data[i] -= adjacency.data[i];

  Var p = clamp(sigmoid(matmul(embed, transpose(embed))), 1e-7, 1.0 - 1e-7);
  Var pos = mul(constant(tape, adjacency), log(p));
  Var neg = mul(constant(tape, std::move(ones_minus)), log(add_scalar(scale(p, -1.0), 1.0)));
  return scale(sum_all(add(pos, neg)), -1.0 / static_cast<double>(n * n));
}

struct ObjectiveParts {
  Var total;
  Var margin;
  Var recon;  // valid only when has_recon
  bool has_recon = false;
};

// Training objective: margin loss plus beta-weighted reconstruction loss
// (margin alone under ablation A3).
inline ObjectiveParts total_objective(Tape& tape, const ForwardResult& fwd,
                                      const GraphInstance& graph, ParamStore& store,
                                      const MarginConfig& margin_cfg,
                                      const ObjectiveConfig& obj_cfg) {
  ObjectiveParts parts;
  parts.margin = margin_loss(tape, fwd.class_capsules, graph.label, margin_cfg);
  if (obj_cfg.recon_enabled) {
    Var z = masked_embed(tape, fwd.primary, fwd.class_capsules, graph.label, store);
    parts.recon = reconstruction_loss(tape, z, graph.adjacency);
    parts.has_recon = true;
    parts.total = add(parts.margin, scale(parts.recon, obj_cfg.beta));
  } else {
    parts.total = parts.margin;
  }
  return parts;
}

}  // namespace hgcn
