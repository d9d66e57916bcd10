#include <catch2/catch_amalgamated.hpp>

#include "hgcn/gradcheck.hpp"
#include "hgcn/model.hpp"
#include "hgcn/objectives.hpp"
#include "helpers.hpp"

using namespace hgcn;
using test::mat;

namespace {

// capsule rows with exactly these lengths (single nonzero component)
Var caps_with_lengths(Tape& tape, const std::vector<double>& lens) {
  Tensor t = Tensor::zeros({static_cast<std::int64_t>(lens.size()), 2});
  for (std::size_t i = 0; i < lens.size(); ++i) t.at(static_cast<std::int64_t>(i), 0) = lens[i];
  return constant(tape, std::move(t));
}

ParamStore recon_store() {
  ParamStore store;
  store.add("recon.W", test::patt(4, 2, 3, 2, 1, 9, 8));
  store.add("recon.b", test::patt1(2, 1, 1, 3, 8));
  return store;
}

GraphInstance small_graph() {
  GraphInstance g;
  g.label = 1;
  g.adjacency = mat({{0, 1, 1, 1}, {1, 0, 1, 0}, {1, 1, 0, 1}, {1, 0, 1, 0}});
  g.features = test::patt(4, 3, 2, 3, 1, 7, 4);
  return g;
}

ParamStore small_model_store() {
  ParamStore store;
  store.add("disentangle.W0", test::patt(3, 2, 3, 5, 2, 9, 8));
  store.add("disentangle.b0", test::patt1(2, 5, 1, 7, 8));
  store.add("disentangle.W1", test::patt(3, 2, 1, 7, 3, 11, 8));
  store.add("disentangle.b1", test::patt1(2, 3, 2, 5, 8));
  store.add("tgnn.L0.W0", test::patt(4, 4, 2, 3, 1, 9, 8));
  store.add("tgnn.L0.W1", test::patt(4, 4, 2, 3, 2, 9, 8));
  store.add("tgnn.L0.W2", test::patt(4, 4, 2, 3, 3, 9, 8));
  store.add("tgnn.L1.W0", test::patt(4, 4, 3, 2, 2, 11, 8));
  store.add("tgnn.L1.W1", test::patt(4, 4, 3, 2, 3, 11, 8));
  store.add("recon.W", test::patt(8, 4, 5, 3, 1, 13, 8));
  store.add("recon.b", test::patt1(4, 2, 3, 7, 8));
  return store;
}

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.K = 2;
  cfg.h = 4;
  cfg.R = 2;
  cfg.capsule_counts = {3, 2};
  return cfg;
}

}  // namespace

TEST_CASE("margin loss is zero exactly at the thresholds") {
  Tape tape;
  Var loss = margin_loss(tape, caps_with_lengths(tape, {0.9, 0.1}), 0);
  REQUIRE(loss.item() == 0.0);
}

TEST_CASE("margin loss on a dead true capsule is (m_plus)^2") {
  Tape tape;
  Var loss = margin_loss(tape, caps_with_lengths(tape, {0.0, 0.1}), 0);
  REQUIRE(loss.item() == Catch::Approx(0.81).margin(1e-12));
}

TEST_CASE("margin loss accumulates both terms") {
  Tape tape;
  // (0.9 - 0.8)^2 + 0.5 * (0.2 - 0.1)^2
  Var loss = margin_loss(tape, caps_with_lengths(tape, {0.8, 0.2}), 0);
  REQUIRE(loss.item() == Catch::Approx(0.015).margin(1e-12));
  Tape t2;
  Var both = margin_loss(t2, caps_with_lengths(t2, {0.5, 0.5}), 0);
  REQUIRE(both.item() == Catch::Approx(0.16 + 0.5 * 0.16).margin(1e-12));
}

TEST_CASE("margin loss depends only on capsule lengths") {
  Rng rng(31);
  Tensor caps({3, 3});
  for (auto& v : caps.data) v = rng.symmetric(0.7);
  // rotate every row by the same orthogonal map: lengths unchanged
  const double a = 0.6, b = 0.8;
  Tensor rot = mat({{a, b, 0}, {-b, a, 0}, {0, 0, 1}});
  Tensor rotated = matmul_plain(caps, rot);
  for (int label = 0; label < 3; ++label) {
    Tape t1, t2;
    Var l1 = margin_loss(t1, constant(t1, caps), label);
    Var l2 = margin_loss(t2, constant(t2, rotated), label);
    REQUIRE(l1.item() == Catch::Approx(l2.item()).margin(1e-12));
  }
}

TEST_CASE("margin loss rejects out-of-range labels") {
  Tape tape;
  Var caps = caps_with_lengths(tape, {0.5, 0.5});
  REQUIRE_THROWS_WITH(margin_loss(tape, caps, 2),
                      Catch::Matchers::ContainsSubstring("out of range"));
  REQUIRE_THROWS_AS(margin_loss(tape, caps, -1), std::invalid_argument);
}

TEST_CASE("margin config is validated") {
  MarginConfig bad;
  bad.m_plus = 0.1;
  bad.m_minus = 0.9;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
  MarginConfig neg;
  neg.lambda = 0.0;
  REQUIRE_THROWS_AS(neg.validate(), std::invalid_argument);
}

TEST_CASE("masked embedding with zero capsules and zero bias is the identity") {
  ParamStore store = recon_store();
  store.at("recon.b").value = Tensor::zeros({2});
  Tape tape;
  Tensor primary = test::patt(3, 2, 1, 2, 1, 5, 4);
  Var z = masked_embed(tape, constant(tape, primary),
                       constant(tape, Tensor::zeros({2, 2})), 0, store);
  REQUIRE(test::max_diff(z.val(), primary) == 0.0);
}

TEST_CASE("masked embedding ignores non-label capsules") {
  ParamStore store = recon_store();
  Tape tape;
  Tensor primary = test::patt(3, 2, 1, 2, 1, 5, 4);
  Tensor caps = test::patt(2, 2, 2, 1, 3, 7, 4);
  Var base = masked_embed(tape, constant(tape, primary), constant(tape, caps), 1, store);
  Tensor tweaked = caps;
  tweaked.at(0, 0) += 10.0;
  tweaked.at(0, 1) -= 3.0;
  Var same = masked_embed(tape, constant(tape, primary), constant(tape, tweaked), 1, store);
  REQUIRE(test::max_diff(base.val(), same.val()) == 0.0);
}

TEST_CASE("masked embedding matches the reference") {
  const Tensor golden =
      mat({{-0.34375, 0.03125}, {-0.09375, 0.28125}, {0.15625, -0.71875}});
  ParamStore store = recon_store();
  Tape tape;
  Var z = masked_embed(tape, constant(tape, test::patt(3, 2, 1, 2, 1, 5, 4)),
                       constant(tape, test::patt(2, 2, 2, 1, 3, 7, 4)), 1, store);
  REQUIRE(test::max_diff(z.val(), golden) <= 1e-12);
}

TEST_CASE("reconstruction loss of a zero embedding is log 2") {
  Tape tape;
  Tensor a = mat({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}});
  Var loss = reconstruction_loss(tape, constant(tape, Tensor::zeros({3, 2})), a);
  REQUIRE(loss.item() == Catch::Approx(std::log(2.0)).margin(1e-15));
}

TEST_CASE("a saturated correct reconstruction has near-zero loss") {
  Tape tape;
  Tensor a = Tensor::full({2, 2}, 1.0);
  Var loss = reconstruction_loss(tape, constant(tape, mat({{10, 0}, {10, 0}})), a);
  REQUIRE(loss.item() >= 0.0);
  REQUIRE(loss.item() <= 1e-6);
}

TEST_CASE("reconstruction loss matches the reference") {
  Tape tape;
  Tensor a = mat({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}});
  Var loss = reconstruction_loss(tape, constant(tape, test::patt(3, 2, 2, 5, 1, 9, 4)), a);
  REQUIRE(loss.item() == Catch::Approx(0.8520929522513565).margin(1e-12));
}

TEST_CASE("reconstruction loss is invariant under node permutation") {
  Rng rng(41);
  const std::int64_t n = 6;
  Tensor a = Tensor::zeros({n, n});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = i + 1; j < n; ++j)
      if (rng.unit_real() < 0.5) a.at(i, j) = a.at(j, i) = 1.0;
  Tensor z({n, 3});
  for (auto& v : z.data) v = rng.symmetric(1.5);

  std::vector<std::int64_t> perm = {3, 0, 5, 1, 4, 2};
  Tensor pa = Tensor::zeros({n, n});
  Tensor pz({n, 3});
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) pa.at(perm[i], perm[j]) = a.at(i, j);
    for (std::int64_t j = 0; j < 3; ++j) pz.at(perm[i], j) = z.at(i, j);
  }
  Tape t1, t2;
  Var l1 = reconstruction_loss(t1, constant(t1, z), a);
  Var l2 = reconstruction_loss(t2, constant(t2, pz), pa);
  REQUIRE(l1.item() == Catch::Approx(l2.item()).margin(1e-12));
}

TEST_CASE("reconstruction loss rejects mismatched adjacency") {
  Tape tape;
  REQUIRE_THROWS_WITH(
      reconstruction_loss(tape, constant(tape, Tensor::zeros({3, 2})), Tensor::zeros({4, 4})),
      Catch::Matchers::ContainsSubstring("does not match"));
}

TEST_CASE("total objective is margin plus beta times reconstruction") {
  GraphInstance g = small_graph();
  ParamStore store = small_model_store();
  ModelConfig cfg = small_config();
  Tape tape;
  ForwardResult fwd = forward(tape, g, store, cfg);
  ObjectiveConfig obj;
  obj.beta = 0.25;
  ObjectiveParts parts = total_objective(tape, fwd, g, store, MarginConfig{}, obj);
  REQUIRE(parts.has_recon);
  REQUIRE(parts.total.item() ==
          Catch::Approx(parts.margin.item() + 0.25 * parts.recon.item()).margin(1e-15));
}

TEST_CASE("objective matches the reference end to end") {
  GraphInstance g = small_graph();
  ParamStore store = small_model_store();
  ModelConfig cfg = small_config();
  Tape tape;
  ForwardResult fwd = forward(tape, g, store, cfg);
  ObjectiveParts parts = total_objective(tape, fwd, g, store, MarginConfig{}, ObjectiveConfig{});
  REQUIRE(parts.margin.item() == Catch::Approx(0.8016374975793831).margin(1e-12));
  REQUIRE(parts.recon.item() == Catch::Approx(0.689619254284951).margin(1e-12));
  REQUIRE(parts.total.item() == Catch::Approx(0.8705994230078782).margin(1e-12));
}

TEST_CASE("disabling the reconstruction term reduces the objective to the margin loss") {
  GraphInstance g = small_graph();
  ParamStore store = small_model_store();
  ModelConfig cfg = small_config();
  Tape tape;
  ForwardResult fwd = forward(tape, g, store, cfg);
  ObjectiveConfig off;
  off.recon_enabled = false;
  ObjectiveParts parts = total_objective(tape, fwd, g, store, MarginConfig{}, off);
  REQUIRE_FALSE(parts.has_recon);
  REQUIRE(parts.total.item() == parts.margin.item());
  REQUIRE(parts.total.item() == Catch::Approx(0.8016374975793831).margin(1e-12));
}

TEST_CASE("analytic gradients of the full objective match finite differences") {
  GraphInstance g = small_graph();
  ParamStore store = small_model_store();
  ModelConfig cfg = small_config();

  auto run = [&](ObjectiveConfig obj, bool margin_only) {
    return grad_check(
        [&, obj, margin_only](ParamStore& s, bool accumulate) {
          Tape tape;
          ForwardResult fwd = forward(tape, g, s, cfg);
          Var loss;
          if (margin_only) {
            loss = margin_loss(tape, fwd.class_capsules, g.label);
          } else {
            ObjectiveParts parts = total_objective(tape, fwd, g, s, MarginConfig{}, obj);
            loss = parts.total;
          }
          if (accumulate) backward(loss, s);
          return loss.item();
        },
        store);
  };

  GradCheckReport margin_report = run(ObjectiveConfig{}, true);
  INFO(format_grad_check(margin_report, 1e-4));
  REQUIRE(margin_report.pass(1e-4));

  GradCheckReport full_report = run(ObjectiveConfig{}, false);
  INFO(format_grad_check(full_report, 1e-4));
  REQUIRE(full_report.pass(1e-4));
  for (const auto& row : full_report.rows) REQUIRE(row.non_finite == 0);
}

TEST_CASE("the checker flags a corrupted backward rule") {
  ParamStore store;
  store.add("w", test::patt(2, 2, 1, 2, 1, 5, 4));
  GradCheckReport report = grad_check(
      [&](ParamStore& s, bool accumulate) {
        Tape tape;
        Var w = param(tape, s, "w");
        Var loss = sum_all(square(w));
        if (accumulate) {
          backward(loss, s);
          s.at("w").grad.data[3] += 0.5;  // sabotage one analytic entry
        }
        return loss.item();
      },
      store);
  REQUIRE_FALSE(report.pass(1e-4));
  REQUIRE(report.rows[0].max_rel_err > 1e-2);
  REQUIRE(report.rows[0].at == 3);
}

TEST_CASE("reconstruction gradients alone match finite differences") {
  GraphInstance g = small_graph();
  ParamStore store = small_model_store();
  ModelConfig cfg = small_config();
  GradCheckReport report = grad_check(
      [&](ParamStore& s, bool accumulate) {
        Tape tape;
        ForwardResult fwd = forward(tape, g, s, cfg);
        Var z = masked_embed(tape, fwd.primary, fwd.class_capsules, g.label, s);
        Var loss = reconstruction_loss(tape, z, g.adjacency);
        if (accumulate) backward(loss, s);
        return loss.item();
      },
      store);
  INFO(format_grad_check(report, 1e-4));
  REQUIRE(report.pass(1e-4));
}
