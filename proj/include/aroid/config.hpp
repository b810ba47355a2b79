#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "aroid/trainer.hpp"

namespace aroid {

/// A fully resolved experiment configuration: defaults, then the config file,
/// then CLI overrides. `fingerprint` hashes the canonical form minus run-name
/// and output-directory keys, so relocated reruns keep the same identity.
struct RunConfig {
  nlohmann::json j;
  std::string fingerprint;
  std::string data_fingerprint;  // data+model+space+seed subset

  TrainConfig train_config() const;
  std::string out_dir() const { return j.at("run").at("out_dir"); }
  std::uint64_t seed() const { return j.at("run").at("seed"); }
  std::string data_train() const { return j.at("data").at("train"); }
  std::string data_test() const { return j.at("data").at("test"); }
  std::string data_root() const;
  int subsample_train() const { return j.at("data").at("subsample_train"); }
  int subsample_test() const { return j.at("data").at("subsample_test"); }
};

nlohmann::json default_config();

/// Loads, overlays and validates a config document. `overrides` are dotted
/// key paths ("attack.eps=0.03"). Unknown keys and malformed values raise
/// ConfigError naming the key.
RunConfig resolve_config(const std::string& path,
                         const std::vector<std::pair<std::string, std::string>>&
                             overrides = {});
RunConfig resolve_config_json(nlohmann::json user,
                              const std::vector<std::pair<std::string, std::string>>&
                                  overrides = {});

std::string config_fingerprint(const nlohmann::json& j);

}  // namespace aroid
