#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "hgcn/graph.hpp"
#include "hgcn/model.hpp"
#include "hgcn/objectives.hpp"
#include "hgcn/optimizer.hpp"

namespace hgcn {

enum class Criterion { SharedEpoch, PerFoldBest };

inline const char* criterion_name(Criterion c) {
  return c == Criterion::SharedEpoch ? "shared" : "cstar";
}

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 1e-3;
  int batch_size = 20;  // graphs per Adam step, gradients averaged
  std::uint64_t seed = 1;
  Criterion criterion = Criterion::SharedEpoch;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (!(learning_rate > 0.0) && learning_rate != 0.0)
      throw std::invalid_argument("TrainConfig: learning_rate must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  }
};

struct ConfusionMatrix {
  int classes = 0;
  std::vector<std::int64_t> counts;  // row = true class, col = predicted

  explicit ConfusionMatrix(int c = 0) : classes(c), counts(static_cast<std::size_t>(c) * c, 0) {}
  std::int64_t& at(int truth, int pred) { return counts[truth * classes + pred]; }
  std::int64_t at(int truth, int pred) const { return counts[truth * classes + pred]; }
  std::int64_t total() const {
    std::int64_t t = 0;
    for (auto v : counts) t += v;
    return t;
  }
  double accuracy() const {
    std::int64_t correct = 0;
    for (int c = 0; c < classes; ++c) correct += at(c, c);
    return total() == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total());
  }
};

struct TrainHooks {
  // Called once per graph whose gradient contributes to a parameter update.
  std::function<void(std::int64_t)> on_train_graph;
};

struct FoldResult {
  std::vector<double> eval_accuracy;              // per epoch
  std::vector<ConfusionMatrix> eval_confusion;    // per epoch
  ParamStore params;                              // after the last epoch
};

struct EvalResult {
  double accuracy = 0.0;
  ConfusionMatrix confusion;
};

inline EvalResult evaluate(const Dataset& ds, const std::vector<std::int64_t>& ids,
                           ParamStore& store, const ModelConfig& cfg) {
  EvalResult out;
  out.confusion = ConfusionMatrix(ds.num_classes);
  for (auto id : ids) {
    Tape tape;
    ForwardResult fwd = forward(tape, ds.graphs[id], store, cfg);
    out.confusion.at(ds.graphs[id].label, predict(fwd.class_capsules.val()))++;
  }
  out.accuracy = out.confusion.accuracy();
  return out;
}

// One fold: fixed-seed init, per-epoch shuffled mini-batches with gradient
// accumulation (mean over the batch), one Adam step per batch, then an
// evaluation pass. Deterministic for a fixed (fold_seed, configs, dataset).
inline FoldResult train_fold(const Dataset& ds, const std::vector<std::int64_t>& train_ids,
                             const std::vector<std::int64_t>& eval_ids, const ModelConfig& model_cfg,
                             const MarginConfig& margin_cfg, const ObjectiveConfig& obj_cfg,
                             const TrainConfig& train_cfg, std::uint64_t fold_seed,
                             const TrainHooks* hooks = nullptr) {
  model_cfg.validate(ds.num_classes);
  margin_cfg.validate();
  obj_cfg.validate();
  train_cfg.validate();
  FoldResult result;
  ParamStore store;
  Rng init_rng(Rng::derive(fold_seed, 0x494e4954u));
  init_params(store, model_cfg, ds.feature_dim, init_rng);
  Adam adam(train_cfg.learning_rate);

  std::vector<std::int64_t> order = train_ids;
  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    Rng shuffle_rng(Rng::derive(fold_seed, 0x45504f43u + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    const std::size_t batches =
        (order.size() + train_cfg.batch_size - 1) / train_cfg.batch_size;
    for (std::size_t batch = 0; batch < batches; ++batch) {
      const std::size_t begin = batch * train_cfg.batch_size;
      const std::size_t end = std::min(order.size(), begin + train_cfg.batch_size);
      store.zero_grad();
      for (std::size_t q = begin; q < end; ++q) {
        const auto id = order[q];
        Tape tape;
        ForwardResult fwd = forward(tape, ds.graphs[id], store, model_cfg);
        ObjectiveParts obj =
            total_objective(tape, fwd, ds.graphs[id], store, margin_cfg, obj_cfg);
        if (!std::isfinite(obj.total.item()))
          throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batch) + ", graph " +
                                   std::to_string(id));
        tape.backward(obj.total.node, &store);
        if (hooks && hooks->on_train_graph) hooks->on_train_graph(id);
      }
      const double inv = 1.0 / static_cast<double>(end - begin);
      for (std::size_t i = 0; i < store.size(); ++i)
        for (auto& g : store.entry(i).grad.data) g *= inv;
      adam.step(store);
    }
    EvalResult ev = evaluate(ds, eval_ids, store, model_cfg);
    result.eval_accuracy.push_back(ev.accuracy);
    result.eval_confusion.push_back(std::move(ev.confusion));
  }
  result.params = std::move(store);
  return result;
}

struct CvReport {
  int folds = 0;
  int epochs = 0;
  std::vector<std::vector<double>> accuracy_grid;  // [fold][epoch]
  Criterion criterion = Criterion::SharedEpoch;
  int selected_epoch = -1;                  // -1 under the per-fold-best criterion
  std::vector<int> per_fold_epoch;          // epoch each fold is scored at
  std::vector<double> fold_accuracy;        // accuracy at that epoch
  std::vector<ConfusionMatrix> fold_confusion;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;               // population std over folds
  double wall_time_sec = 0.0;
  std::uint64_t seed = 0;
};

struct CvOutcome {
  CvReport report;
  std::vector<FoldResult> folds;
  FoldPlan plan;
};

inline double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

inline double population_std(const std::vector<double>& xs) {
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return xs.empty() ? 0.0 : std::sqrt(s / static_cast<double>(xs.size()));
}

// Applies an epoch-selection criterion to a filled accuracy grid.
inline void select_epoch(CvReport& report) {
  const int folds = report.folds, epochs = report.epochs;
  report.per_fold_epoch.assign(folds, 0);
  if (report.criterion == Criterion::SharedEpoch) {
    int best_epoch = 0;
    double best_mean = -1.0;
    for (int e = 0; e < epochs; ++e) {
      double s = 0.0;
      for (int f = 0; f < folds; ++f) s += report.accuracy_grid[f][e];
      const double m = s / folds;
      if (m > best_mean) {
        best_mean = m;
        best_epoch = e;
      }
    }
    report.selected_epoch = best_epoch;
    for (int f = 0; f < folds; ++f) report.per_fold_epoch[f] = best_epoch;
  } else {
    report.selected_epoch = -1;
    for (int f = 0; f < folds; ++f) {
      int best = 0;
      for (int e = 1; e < epochs; ++e)
        if (report.accuracy_grid[f][e] > report.accuracy_grid[f][best]) best = e;
      report.per_fold_epoch[f] = best;
    }
  }
  report.fold_accuracy.assign(folds, 0.0);
  for (int f = 0; f < folds; ++f)
    report.fold_accuracy[f] = report.accuracy_grid[f][report.per_fold_epoch[f]];
  report.mean_accuracy = mean_of(report.fold_accuracy);
  report.std_accuracy = population_std(report.fold_accuracy);
}

// Stratified k-fold cross-validation. Folds are independent (fresh parameters
// per fold) and may run on `threads` workers; everything observable in the
// report depends only on (dataset, configs, seed).
inline CvOutcome cross_validate(const Dataset& ds, int k, const ModelConfig& model_cfg,
                                const MarginConfig& margin_cfg, const ObjectiveConfig& obj_cfg,
                                const TrainConfig& train_cfg, int threads = 1,
                                const TrainHooks* hooks = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  CvOutcome out;
  out.plan = make_folds(ds.labels(), k, train_cfg.seed);
  out.folds.resize(k);
  std::vector<std::string> failures(k);

  std::mutex queue_mutex;
  int next_fold = 0;
  auto worker = [&]() {
    for (;;) {
      int f;
      {
        std::lock_guard<std::mutex> lock(queue_mutex);
        if (next_fold >= k) return;
        f = next_fold++;
      }
      try {
        out.folds[f] = train_fold(ds, out.plan.train_of(f), out.plan.test_of(f), model_cfg,
                                  margin_cfg, obj_cfg, train_cfg,
                                  Rng::derive(train_cfg.seed, 0x464f4c44u + static_cast<std::uint64_t>(f)),
                                  hooks);
      } catch (const std::exception& e) {
        failures[f] = e.what();
      }
    }
  };
  threads = std::max(1, std::min(threads, k));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (int f = 0; f < k; ++f)
    if (!failures[f].empty())
      throw std::runtime_error("fold " + std::to_string(f) + " aborted: " + failures[f]);

  CvReport& report = out.report;
  report.folds = k;
  report.epochs = train_cfg.epochs;
  report.criterion = train_cfg.criterion;
  report.seed = train_cfg.seed;
  report.accuracy_grid.resize(k);
  for (int f = 0; f < k; ++f) report.accuracy_grid[f] = out.folds[f].eval_accuracy;
  select_epoch(report);
  report.fold_confusion.clear();
  for (int f = 0; f < k; ++f)
    report.fold_confusion.push_back(out.folds[f].eval_confusion[report.per_fold_epoch[f]]);
  report.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

struct AblationRun {
  std::string name;  // "full", "A1", "A2", "A3"
  CvOutcome outcome;
};

// Four cross-validation runs from identical seeds, toggling exactly one flag
// at a time: A1 disables disentanglement, A2 the residual, A3 the
// reconstruction term.
inline std::vector<AblationRun> ablation_suite(const Dataset& ds, int k,
                                               const ModelConfig& model_cfg,
                                               const MarginConfig& margin_cfg,
                                               const ObjectiveConfig& obj_cfg,
                                               const TrainConfig& train_cfg, int threads = 1) {
  std::vector<AblationRun> runs;
  for (const char* name : {"full", "A1", "A2", "A3"}) {
    ModelConfig m = model_cfg;
    ObjectiveConfig o = obj_cfg;
    if (std::string(name) == "A1") m.disentangle_enabled = false;
    if (std::string(name) == "A2") m.residual_enabled = false;
    if (std::string(name) == "A3") o.recon_enabled = false;
    runs.push_back({name, cross_validate(ds, k, m, margin_cfg, o, train_cfg, threads)});
  }
  return runs;
}

}  // namespace hgcn
