#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgcn/graph.hpp"
#include "hgcn/model.hpp"
#include "hgcn/objectives.hpp"
#include "hgcn/train.hpp"

namespace hgcn {

// Every run setting, one flat key per field. Defaults are the documented
// baseline; a config file overrides them key by key.
struct RunConfig {
  std::string dataset_name = "MUTAG";
  std::string dataset_path = "data";         // dataset files live in <path>/<name>/
  std::string dataset_scheme = "node-label";  // or "degree"
  std::int64_t dataset_max_degree = 63;

  int model_k = 4;
  std::int64_t model_h = 32;
  int model_r = 3;
  std::vector<std::int64_t> model_hidden_capsules = {8};
  bool model_disentangle = true;
  bool model_residual = true;

  double loss_m_plus = 0.9;
  double loss_m_minus = 0.1;
  double loss_lambda = 0.5;
  double loss_beta = 0.1;
  bool loss_recon = true;

  int train_epochs = 100;
  double train_lr = 1e-3;
  int train_batch = 20;
  std::uint64_t train_seed = 1;

  int cv_folds = 10;
  std::string cv_criterion = "shared";  // or "cstar"
  int cv_threads = 1;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw std::invalid_argument("config key " + key + ": invalid boolean '" + v + "'");
}

template <typename T, typename Fn>
T parse_num(const std::string& v, const std::string& key, Fn fn) {
  try {
    std::size_t used = 0;
    T out = fn(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing junk");
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key " + key + ": invalid value '" + v + "'");
  }
}

inline long long parse_int(const std::string& v, const std::string& key) {
  return parse_num<long long>(v, key, [](const std::string& s, std::size_t* u) {
    return std::stoll(s, u);
  });
}

inline double parse_double(const std::string& v, const std::string& key) {
  return parse_num<double>(v, key, [](const std::string& s, std::size_t* u) {
    return std::stod(s, u);
  });
}

inline std::vector<std::int64_t> parse_int_list(const std::string& v, const std::string& key) {
  std::vector<std::int64_t> out;
  std::string item;
  std::istringstream ss(v);
  while (std::getline(ss, item, ',')) out.push_back(parse_int(trim(item), key));
  if (out.empty()) throw std::invalid_argument("config key " + key + ": empty list");
  return out;
}

}  // namespace detail

inline void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_int;
  using detail::parse_int_list;
  if (key == "dataset.name") cfg.dataset_name = value;
  else if (key == "dataset.path") cfg.dataset_path = value;
  else if (key == "dataset.scheme") {
    if (value != "node-label" && value != "degree")
      throw std::invalid_argument("config key dataset.scheme: expected node-label or degree, got '" +
                                  value + "'");
    cfg.dataset_scheme = value;
  } else if (key == "dataset.max_degree") cfg.dataset_max_degree = parse_int(value, key);
  else if (key == "model.k") cfg.model_k = static_cast<int>(parse_int(value, key));
  else if (key == "model.h") cfg.model_h = parse_int(value, key);
  else if (key == "model.r") cfg.model_r = static_cast<int>(parse_int(value, key));
  else if (key == "model.hidden_capsules") cfg.model_hidden_capsules = parse_int_list(value, key);
  else if (key == "model.disentangle") cfg.model_disentangle = parse_bool(value, key);
  else if (key == "model.residual") cfg.model_residual = parse_bool(value, key);
  else if (key == "loss.m_plus") cfg.loss_m_plus = parse_double(value, key);
  else if (key == "loss.m_minus") cfg.loss_m_minus = parse_double(value, key);
  else if (key == "loss.lambda") cfg.loss_lambda = parse_double(value, key);
  else if (key == "loss.beta") cfg.loss_beta = parse_double(value, key);
  else if (key == "loss.recon") cfg.loss_recon = parse_bool(value, key);
  else if (key == "train.epochs") cfg.train_epochs = static_cast<int>(parse_int(value, key));
  else if (key == "train.lr") cfg.train_lr = parse_double(value, key);
  else if (key == "train.batch") cfg.train_batch = static_cast<int>(parse_int(value, key));
  else if (key == "train.seed") cfg.train_seed = static_cast<std::uint64_t>(parse_int(value, key));
  else if (key == "cv.folds") cfg.cv_folds = static_cast<int>(parse_int(value, key));
  else if (key == "cv.criterion") {
    if (value != "shared" && value != "cstar")
      throw std::invalid_argument("config key cv.criterion: expected shared or cstar, got '" +
                                  value + "'");
    cfg.cv_criterion = value;
  } else if (key == "cv.threads") cfg.cv_threads = static_cast<int>(parse_int(value, key));
  else throw std::invalid_argument("unknown config key: " + key);
}

// Parses `key = value` lines; '#' starts a comment; blank lines ignored.
inline RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value, got '" + line + "'");
    apply_config_kv(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

// Canonical serialization: every key in a fixed order with its effective
// value. Written to the output directory so a run can be reproduced exactly.
inline std::string config_echo(const RunConfig& c) {
  std::ostringstream out;
  out << "dataset.name = " << c.dataset_name << "\n";
  out << "dataset.path = " << c.dataset_path << "\n";
  out << "dataset.scheme = " << c.dataset_scheme << "\n";
  out << "dataset.max_degree = " << c.dataset_max_degree << "\n";
  out << "model.k = " << c.model_k << "\n";
  out << "model.h = " << c.model_h << "\n";
  out << "model.r = " << c.model_r << "\n";
  out << "model.hidden_capsules = ";
  for (std::size_t i = 0; i < c.model_hidden_capsules.size(); ++i)
    out << (i ? "," : "") << c.model_hidden_capsules[i];
  out << "\n";
  out << "model.disentangle = " << (c.model_disentangle ? "true" : "false") << "\n";
  out << "model.residual = " << (c.model_residual ? "true" : "false") << "\n";
  char buf[64];
  auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << key << " = " << buf << "\n";
  };
  put("loss.m_plus", c.loss_m_plus);
  put("loss.m_minus", c.loss_m_minus);
  put("loss.lambda", c.loss_lambda);
  put("loss.beta", c.loss_beta);
  out << "loss.recon = " << (c.loss_recon ? "true" : "false") << "\n";
  out << "train.epochs = " << c.train_epochs << "\n";
  put("train.lr", c.train_lr);
  out << "train.batch = " << c.train_batch << "\n";
  out << "train.seed = " << c.train_seed << "\n";
  out << "cv.folds = " << c.cv_folds << "\n";
  out << "cv.criterion = " << c.cv_criterion << "\n";
  out << "cv.threads = " << c.cv_threads << "\n";
  return out.str();
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string config_hash(const RunConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_echo(c))));
  return buf;
}

// --- assembly into module configs -------------------------------------------

inline ModelConfig to_model_config(const RunConfig& c, int num_classes) {
  ModelConfig m;
  m.K = c.model_k;
  m.h = c.model_h;
  m.R = c.model_r;
  m.capsule_counts = c.model_hidden_capsules;
  m.capsule_counts.push_back(num_classes);
  m.disentangle_enabled = c.model_disentangle;
  m.residual_enabled = c.model_residual;
  m.validate(num_classes);
  return m;
}

inline MarginConfig to_margin_config(const RunConfig& c) {
  MarginConfig m;
  m.m_plus = c.loss_m_plus;
  m.m_minus = c.loss_m_minus;
  m.lambda = c.loss_lambda;
  m.validate();
  return m;
}

inline ObjectiveConfig to_objective_config(const RunConfig& c) {
  ObjectiveConfig o;
  o.beta = c.loss_beta;
  o.recon_enabled = c.loss_recon;
  o.validate();
  return o;
}

inline TrainConfig to_train_config(const RunConfig& c) {
  TrainConfig t;
  t.epochs = c.train_epochs;
  t.learning_rate = c.train_lr;
  t.batch_size = c.train_batch;
  t.seed = c.train_seed;
  t.criterion = c.cv_criterion == "cstar" ? Criterion::PerFoldBest : Criterion::SharedEpoch;
  t.validate();
  return t;
}

inline Dataset load_dataset(const RunConfig& c) {
  Dataset ds = parse_tudataset(c.dataset_path + "/" + c.dataset_name, c.dataset_name);
  build_features(ds,
                 c.dataset_scheme == "degree" ? FeatureScheme::DegreeOneHot
                                              : FeatureScheme::NodeLabelOneHot,
                 c.dataset_max_degree);
  return ds;
}

}  // namespace hgcn
