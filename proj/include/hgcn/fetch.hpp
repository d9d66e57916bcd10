#pragma once

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgcn/graph.hpp"
#include "hgcn/zipfile.hpp"

namespace hgcn {

inline const std::vector<std::string>& supported_datasets() {
  static const std::vector<std::string> names = {
      "MUTAG",       "PTC_MR",     "ENZYMES",       "PROTEINS", "NCI1",   "NCI109",
      "DD",          "IMDB-BINARY", "IMDB-MULTI",   "COLLAB",   "REDDIT-BINARY"};
  return names;
}

inline bool dataset_supported(const std::string& name) {
  for (const auto& n : supported_datasets())
    if (n == name) return true;
  return false;
}

inline bool dataset_present(const std::string& root, const std::string& name) {
  try {
    parse_tudataset(root + "/" + name, name);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

// Downloads <name>.zip from the public graph-kernel benchmark archive and
// unpacks it under <root>/<name>/. No-op when a valid copy already exists.
// Returns the dataset directory.
inline std::string fetch_dataset(const std::string& name, const std::string& root) {
  if (!dataset_supported(name)) {
    std::string msg = "unknown dataset '" + name + "'; supported:";
    for (const auto& n : supported_datasets()) msg += " " + n;
    throw std::invalid_argument(msg);
  }
  const std::string dir = root + "/" + name;
  if (dataset_present(root, name)) return dir;

  httplib::SSLClient client("www.chrsmrrs.com", 443);
  client.set_follow_location(true);
  client.set_connection_timeout(30);
  client.set_read_timeout(120);
  auto res = client.Get("/graphkerneldatasets/" + name + ".zip");
  if (!res)
    throw std::runtime_error("download failed for " + name + ": " +
                             httplib::to_string(res.error()));
  if (res->status != 200)
    throw std::runtime_error("download failed for " + name + ": HTTP " +
                             std::to_string(res->status));

  std::vector<std::uint8_t> bytes(res->body.begin(), res->body.end());
  ZipArchive zip(std::move(bytes));
  std::filesystem::create_directories(root);
  zip.extract_all(root);  // archives carry a top-level <name>/ directory
  if (!dataset_present(root, name))
    throw std::runtime_error("downloaded archive for " + name +
                             " did not contain a parseable dataset");
  return dir;
}

}  // namespace hgcn
