#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "hgcn/train.hpp"

namespace hgcn {

namespace detail {
inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}
inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}
}  // namespace detail

// Human-readable run summary.
inline void write_report_txt(const std::string& path, const CvReport& r,
                             const std::string& dataset_line) {
  auto out = detail::open_out(path);
  out << "dataset: " << dataset_line << "\n";
  out << "criterion: " << criterion_name(r.criterion) << "\n";
  out << "folds: " << r.folds << "  epochs: " << r.epochs << "  seed: " << r.seed << "\n";
  if (r.criterion == Criterion::SharedEpoch)
    out << "selected epoch: " << r.selected_epoch << "\n";
  else
    out << "selected epoch: per-fold\n";
  out << "mean accuracy: " << detail::fmt("%.4f", r.mean_accuracy) << "\n";
  out << "std accuracy:  " << detail::fmt("%.4f", r.std_accuracy) << "\n";
  for (int f = 0; f < r.folds; ++f) {
    out << "fold " << f << ": accuracy " << detail::fmt("%.4f", r.fold_accuracy[f]) << " at epoch "
        << r.per_fold_epoch[f] << ", confusion";
    const auto& cm = r.fold_confusion[f];
    for (int t = 0; t < cm.classes; ++t) {
      out << " [";
      for (int p = 0; p < cm.classes; ++p) out << (p ? " " : "") << cm.at(t, p);
      out << "]";
    }
    out << "\n";
  }
  out << "wall time: " << detail::fmt("%.1f", r.wall_time_sec) << " s\n";
  out << "note: accuracies are measured on each held-out fold; no separate test split exists "
         "in this protocol.\n";
}

// Flat machine-readable key-value summary. Excludes wall time so the file is
// a pure function of (dataset, config, seed).
inline void write_report_kv(const std::string& path, const CvReport& r,
                            const std::string& config_hash) {
  auto out = detail::open_out(path);
  out << "criterion=" << criterion_name(r.criterion) << "\n";
  out << "seed=" << r.seed << "\n";
  out << "config_hash=" << config_hash << "\n";
  if (r.criterion == Criterion::SharedEpoch)
    out << "selected_epoch=" << r.selected_epoch << "\n";
  else
    out << "selected_epoch=per-fold\n";
  out << "mean_accuracy=" << detail::fmt("%.10g", r.mean_accuracy) << "\n";
  out << "std_accuracy=" << detail::fmt("%.10g", r.std_accuracy) << "\n";
  for (int f = 0; f < r.folds; ++f)
    out << "fold_" << f << "_accuracy=" << detail::fmt("%.10g", r.fold_accuracy[f]) << "\n";
}

// Tab-separated per-epoch accuracy grid: epoch, then one column per fold.
inline void write_grid_tsv(const std::string& path, const CvReport& r) {
  auto out = detail::open_out(path);
  out << "epoch";
  for (int f = 0; f < r.folds; ++f) out << "\tfold_" << f;
  out << "\n";
  for (int e = 0; e < r.epochs; ++e) {
    out << e;
    for (int f = 0; f < r.folds; ++f) out << "\t" << detail::fmt("%.10g", r.accuracy_grid[f][e]);
    out << "\n";
  }
}

}  // namespace hgcn
