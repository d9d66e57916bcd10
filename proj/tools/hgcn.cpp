// Command-line driver: dataset fetching, cross-validated training, evaluation
// of saved parameters, finite-difference gradient checking, and routing
// diagnostics. Results go to files; progress and errors go to stderr.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "hgcn/config.hpp"
#include "hgcn/fetch.hpp"
#include "hgcn/fixtures.hpp"
#include "hgcn/gradcheck.hpp"
#include "hgcn/report.hpp"
#include "hgcn/train.hpp"

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_dir;
  std::string criterion;
  std::string ablation;
  long long seed = -1;
  int folds = -1;
  int threads = -1;
};

void add_common_flags(CLI::App* cmd, GlobalOpts& g, bool wants_out) {
  cmd->add_option("--config", g.config_path, "key = value run configuration file");
  if (wants_out) cmd->add_option("--out", g.out_dir, "output directory")->required();
  cmd->add_option("--seed", g.seed, "override train.seed");
  cmd->add_option("--criterion", g.criterion, "epoch selection: shared or cstar")
      ->check(CLI::IsMember({"shared", "cstar"}));
  cmd->add_option("--ablation", g.ablation, "disable one component: A1, A2, or A3")
      ->check(CLI::IsMember({"A1", "A2", "A3"}));
  cmd->add_option("--folds", g.folds, "override cv.folds");
  cmd->add_option("--threads", g.threads, "override cv.threads");
}

hgcn::RunConfig assemble_config(const GlobalOpts& g) {
  hgcn::RunConfig cfg;
  if (!g.config_path.empty()) cfg = hgcn::parse_config_file(g.config_path);
  if (g.seed >= 0) cfg.train_seed = static_cast<std::uint64_t>(g.seed);
  if (!g.criterion.empty()) cfg.cv_criterion = g.criterion;
  if (g.folds > 0) cfg.cv_folds = g.folds;
  if (g.threads > 0) cfg.cv_threads = g.threads;
  if (g.ablation == "A1") cfg.model_disentangle = false;
  if (g.ablation == "A2") cfg.model_residual = false;
  if (g.ablation == "A3") cfg.loss_recon = false;
  return cfg;
}

std::string dataset_line(const hgcn::RunConfig& cfg, const hgcn::Dataset& ds) {
  return cfg.dataset_name + " (" + std::to_string(ds.graphs.size()) + " graphs, " +
         std::to_string(ds.num_classes) + " classes, feature dim " +
         std::to_string(ds.feature_dim) + ")";
}

void write_run_outputs(const std::string& out_dir, const hgcn::RunConfig& cfg,
                       const hgcn::Dataset& ds, const hgcn::CvOutcome& outcome) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::ofstream echo(out_dir + "/config.echo");
  if (!echo) throw std::runtime_error("cannot write " + out_dir + "/config.echo");
  echo << hgcn::config_echo(cfg);
  hgcn::write_report_txt(out_dir + "/report.txt", outcome.report, dataset_line(cfg, ds));
  hgcn::write_report_kv(out_dir + "/report.kv", outcome.report, hgcn::config_hash(cfg));
  hgcn::write_grid_tsv(out_dir + "/accuracy_grid.tsv", outcome.report);
  for (std::size_t f = 0; f < outcome.folds.size(); ++f)
    outcome.folds[f].params.save(out_dir + "/params_fold" + std::to_string(f) + ".txt");
}

hgcn::CvOutcome run_cv(const hgcn::RunConfig& cfg, const hgcn::Dataset& ds) {
  return hgcn::cross_validate(ds, cfg.cv_folds, hgcn::to_model_config(cfg, ds.num_classes),
                              hgcn::to_margin_config(cfg), hgcn::to_objective_config(cfg),
                              hgcn::to_train_config(cfg), cfg.cv_threads);
}

int cmd_fetch(const std::string& name, const std::string& root) {
  const std::string dir = hgcn::fetch_dataset(name, root);
  std::cout << dir << "\n";
  return 0;
}

int cmd_train(const GlobalOpts& g) {
  hgcn::RunConfig cfg = assemble_config(g);
  hgcn::Dataset ds = hgcn::load_dataset(cfg);
  std::cerr << "training " << dataset_line(cfg, ds) << ": " << cfg.cv_folds << " folds, "
            << cfg.train_epochs << " epochs\n";
  hgcn::CvOutcome outcome = run_cv(cfg, ds);
  write_run_outputs(g.out_dir, cfg, ds, outcome);
  std::cerr << "mean accuracy " << outcome.report.mean_accuracy << " +/- "
            << outcome.report.std_accuracy << "\n";
  return 0;
}

int cmd_ablate(const GlobalOpts& g) {
  if (!g.ablation.empty())
    throw std::invalid_argument("ablate runs all of full/A1/A2/A3; drop --ablation");
  hgcn::RunConfig base = assemble_config(g);
  hgcn::Dataset ds = hgcn::load_dataset(base);
  std::filesystem::create_directories(g.out_dir);
  std::ofstream summary(g.out_dir + "/ablation.tsv");
  if (!summary) throw std::runtime_error("cannot write " + g.out_dir + "/ablation.tsv");
  summary << "run\tmean_accuracy\tstd_accuracy\tseed\n";
  for (const std::string name : {"full", "A1", "A2", "A3"}) {
    hgcn::RunConfig cfg = base;
    if (name == "A1") cfg.model_disentangle = false;
    if (name == "A2") cfg.model_residual = false;
    if (name == "A3") cfg.loss_recon = false;
    std::cerr << "ablation run " << name << "\n";
    hgcn::CvOutcome outcome = run_cv(cfg, ds);
    write_run_outputs(g.out_dir + "/" + name, cfg, ds, outcome);
    char mean_buf[32], std_buf[32];
    std::snprintf(mean_buf, sizeof mean_buf, "%.10g", outcome.report.mean_accuracy);
    std::snprintf(std_buf, sizeof std_buf, "%.10g", outcome.report.std_accuracy);
    summary << name << "\t" << mean_buf << "\t" << std_buf << "\t" << cfg.train_seed << "\n";
  }
  return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& params_path) {
  hgcn::RunConfig cfg = assemble_config(g);
  hgcn::Dataset ds = hgcn::load_dataset(cfg);
  hgcn::ParamStore store = hgcn::ParamStore::load(params_path);
  hgcn::ModelConfig model_cfg = hgcn::to_model_config(cfg, ds.num_classes);
  std::vector<std::int64_t> ids(ds.graphs.size());
  std::iota(ids.begin(), ids.end(), 0);
  hgcn::EvalResult ev = hgcn::evaluate(ds, ids, store, model_cfg);

  std::filesystem::create_directories(g.out_dir);
  std::ofstream out(g.out_dir + "/eval.kv");
  if (!out) throw std::runtime_error("cannot write " + g.out_dir + "/eval.kv");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", ev.accuracy);
  out << "graphs=" << ids.size() << "\n";
  out << "accuracy=" << buf << "\n";
  for (int t = 0; t < ev.confusion.classes; ++t)
    for (int p = 0; p < ev.confusion.classes; ++p)
      out << "confusion_" << t << "_" << p << "=" << ev.confusion.at(t, p) << "\n";
  std::cerr << "accuracy " << ev.accuracy << " over " << ids.size() << " graphs\n";
  return 0;
}

int cmd_gradcheck(const GlobalOpts& g, double step, double tol) {
  hgcn::RunConfig cfg = assemble_config(g);
  const std::vector<hgcn::GraphInstance> graphs = hgcn::fixture_graphs();
  const int classes = 2;
  const std::int64_t feature_dim = graphs[0].features.cols();
  hgcn::ModelConfig model_cfg = hgcn::to_model_config(cfg, classes);
  hgcn::MarginConfig margin_cfg = hgcn::to_margin_config(cfg);
  hgcn::ObjectiveConfig obj_cfg = hgcn::to_objective_config(cfg);

  hgcn::ParamStore store;
  hgcn::Rng rng(hgcn::Rng::derive(cfg.train_seed, 0x494e4954u));
  hgcn::init_params(store, model_cfg, feature_dim, rng);

  auto loss = [&](hgcn::ParamStore& s, bool accumulate) {
    hgcn::Tape tape;
    hgcn::Var total;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      hgcn::ForwardResult fwd = hgcn::forward(tape, graphs[i], s, model_cfg);
      hgcn::ObjectiveParts parts =
          hgcn::total_objective(tape, fwd, graphs[i], s, margin_cfg, obj_cfg);
      total = i == 0 ? parts.total : hgcn::add(total, parts.total);
    }
    if (accumulate) backward(total, s);
    return total.item();
  };
  hgcn::GradCheckReport report = hgcn::grad_check(loss, store, step);
  std::cout << hgcn::format_grad_check(report, tol);
  return report.pass(tol) ? 0 : 1;
}

int cmd_inspect(const GlobalOpts& g, const std::string& params_path, long long graph_index) {
  hgcn::RunConfig cfg = assemble_config(g);
  hgcn::Dataset ds = hgcn::load_dataset(cfg);
  if (graph_index < 0 || graph_index >= static_cast<long long>(ds.graphs.size()))
    throw std::invalid_argument("graph index " + std::to_string(graph_index) +
                                " out of range for " + std::to_string(ds.graphs.size()) +
                                " graphs");
  hgcn::ParamStore store = hgcn::ParamStore::load(params_path);
  hgcn::ModelConfig model_cfg = hgcn::to_model_config(cfg, ds.num_classes);

  hgcn::Tape tape;
  hgcn::ForwardResult fwd = hgcn::forward(tape, ds.graphs[graph_index], store, model_cfg);

  std::filesystem::create_directories(g.out_dir);
  const std::string path = g.out_dir + "/inspect_graph" + std::to_string(graph_index) + ".txt";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    out << buf;
  };
  auto put_matrix = [&](const hgcn::Tensor& t) {
    for (std::int64_t i = 0; i < t.rows(); ++i) {
      for (std::int64_t j = 0; j < t.cols(); ++j) {
        if (j) out << " ";
        put(t.at(i, j));
      }
      out << "\n";
    }
  };

  out << "graph " << graph_index << ": " << ds.graphs[graph_index].num_nodes()
      << " nodes, label " << ds.graphs[graph_index].label << "\n";
  for (std::size_t l = 0; l < fwd.trace.layers.size(); ++l) {
    const auto& layer = fwd.trace.layers[l];
    out << "\nlayer " << l << " routing weights (rows sum to 1)\n";
    put_matrix(layer.c);
    out << "layer " << l << " coarsened adjacency\n";
    put_matrix(layer.bank_out.adjacency);
    out << "layer " << l << " capsule lengths\n";
    const auto lens = hgcn::capsule_lengths(layer.bank_out.poses);
    for (std::size_t j = 0; j < lens.size(); ++j) {
      if (j) out << " ";
      put(lens[j]);
    }
    out << "\n";
  }

  const auto lens = hgcn::capsule_lengths(fwd.class_capsules.val());
  std::vector<int> order(lens.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return lens[a] > lens[b]; });
  out << "\nclass capsule lengths (predicted first)\n";
  for (int cls : order) {
    out << "class " << cls << ": ";
    put(lens[cls]);
    out << "\n";
  }
  out << "predicted " << order.front() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical graph capsule classifier"};
  app.require_subcommand(1);

  GlobalOpts g;
  std::string fetch_name, fetch_root = "data";
  std::string params_path;
  long long graph_index = 0;
  double gc_step = 1e-5, gc_tol = 1e-4;

  CLI::App* fetch = app.add_subcommand("fetch", "download a public dataset by name");
  fetch->add_option("name", fetch_name, "dataset name, e.g. MUTAG")->required();
  fetch->add_option("--root", fetch_root, "directory datasets are unpacked into");

  CLI::App* train = app.add_subcommand("train", "cross-validated training run");
  add_common_flags(train, g, true);

  CLI::App* ablate = app.add_subcommand("ablate", "full/A1/A2/A3 runs from one seed");
  add_common_flags(ablate, g, true);

  CLI::App* eval = app.add_subcommand("eval", "evaluate saved parameters on a dataset");
  add_common_flags(eval, g, true);
  eval->add_option("--params", params_path, "parameter file from a training run")->required();

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  add_common_flags(gradcheck, g, false);
  gradcheck->add_option("--step", gc_step, "finite-difference step");
  gradcheck->add_option("--tol", gc_tol, "max relative error allowed");

  CLI::App* inspect = app.add_subcommand("inspect", "dump routing diagnostics for one graph");
  add_common_flags(inspect, g, true);
  inspect->add_option("--params", params_path, "parameter file from a training run")->required();
  inspect->add_option("--graph", graph_index, "graph index within the dataset");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fetch->parsed()) return cmd_fetch(fetch_name, fetch_root);
    if (train->parsed()) return cmd_train(g);
    if (ablate->parsed()) return cmd_ablate(g);
    if (eval->parsed()) return cmd_eval(g, params_path);
    if (gradcheck->parsed()) return cmd_gradcheck(g, gc_step, gc_tol);
    if (inspect->parsed()) return cmd_inspect(g, params_path, graph_index);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
