#include "aroid/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "aroid/errors.hpp"
#include "aroid/rng.hpp"

namespace aroid {

using nlohmann::json;

json default_config() {
  return json{
      {"run", {{"name", "exp"}, {"out_dir", "runs/exp"}, {"seed", 0}}},
      {"data",
       {{"train", "synthetic:1:5000"},
        {"test", "synthetic:2:2000"},
        {"root", ""},
        {"subsample_train", 0},
        {"subsample_test", 0},
        {"classes", 10}}},
      {"model", {{"target", "cnn:16"}, {"policy_width", 32}}},
      {"space", {{"kind", "standard"}}},
      {"train",
       {{"epochs", 20},
        {"batch_size", 128},
        {"lr", 0.1},
        {"lr_milestones", json::array({10, 15})},
        {"lr_gamma", 0.1},
        {"momentum", 0.9},
        {"weight_decay", 5e-4},
        {"clip_norm", 1.0},
        {"warmup_epochs", 5},
        {"eps_warmup_epochs", 0}}},
      {"attack",
       {{"eps", 8.0 / 255.0},
        {"steps", 10},
        {"step_size", 2.0 / 255.0},
        {"random_start", true}}},
      {"vul_attack",
       {{"eps", 8.0 / 255.0},
        {"steps", 2},
        {"step_size", 2.0 / 255.0},
        {"random_start", false}}},
      {"policy",
       {{"K", 5},
        {"T", 8},
        {"beta", 0.8},
        {"lambda", json::array({json::array({0, 0.4}), json::array({10, 0.2}),
                                json::array({15, 0.1})})},
        {"div_lower", 0.9},
        {"div_upper", 4.0},
        {"lr", 0.001},
        {"clip_norm", 1.0}}},
      {"eval", {{"subset", 0}, {"steps", 10}}},
      {"affinity",
       {{"epochs", 40},
        {"batch_size", 128},
        {"lr", 0.05},
        {"momentum", 0.9},
        {"weight_decay", 5e-4},
        {"stop_acc", 0.995},
        {"floor_acc", 0.6},
        {"checkpoint", "affinity.ckpt"}}}};
}

namespace {

void merge_checked(json& base, const json& user, const std::string& prefix) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key()))
      throw ConfigError("unknown config key '" + key + "'");
    if (base[it.key()].is_object() && it.value().is_object()) {
      merge_checked(base[it.key()], it.value(), key);
    } else if (base[it.key()].is_object() != it.value().is_object()) {
      throw ConfigError("config key '" + key + "' has the wrong shape");
    } else {
      base[it.key()] = it.value();
    }
  }
}

json* find_path(json& root, const std::string& dotted, std::string* err_key) {
  json* cur = &root;
  std::istringstream parts(dotted);
  std::string part;
  while (std::getline(parts, part, '.')) {
    if (!cur->is_object() || !cur->contains(part)) {
      *err_key = dotted;
      return nullptr;
    }
    cur = &(*cur)[part];
  }
  return cur;
}

}  // namespace

std::string config_fingerprint(const json& j) {
  // output locations do not define the experiment
  json canon = j;
  if (canon.contains("run")) {
    canon["run"].erase("out_dir");
    canon["run"].erase("name");
  }
  if (canon.contains("affinity")) canon["affinity"].erase("checkpoint");
  // nlohmann::json orders object keys, so dump() is canonical.
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(canon.dump())));
  return buf;
}

RunConfig resolve_config_json(
    json user, const std::vector<std::pair<std::string, std::string>>& overrides) {
  json j = default_config();
  merge_checked(j, user, "");
  for (const auto& [key, value] : overrides) {
    std::string err;
    json* slot = find_path(j, key, &err);
    if (!slot) throw ConfigError("unknown config key '" + err + "'");
    if (slot->is_object())
      throw ConfigError("config key '" + key + "' is a section, not a value");
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::exception&) {
      parsed = value;  // plain string
    }
    if (slot->is_string() && !parsed.is_string()) parsed = value;
    *slot = parsed;
  }

  RunConfig rc;
  rc.j = std::move(j);
  rc.fingerprint = config_fingerprint(rc.j);
  json data_part{{"data", rc.j.at("data")},
                 {"model", rc.j.at("model")},
                 {"space", rc.j.at("space")},
                 {"seed", rc.j.at("run").at("seed")}};
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(data_part.dump())));
  rc.data_fingerprint = buf;

  rc.train_config().validate();  // surface bad values now
  return rc;
}

RunConfig resolve_config(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  json user;
  try {
    user = json::parse(is, nullptr, /*allow_exceptions=*/true,
                       /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed config " + path + ": " + e.what());
  }
  return resolve_config_json(std::move(user), overrides);
}

std::string RunConfig::data_root() const {
  const std::string root = j.at("data").at("root");
  if (!root.empty()) return root;
  if (const char* env = std::getenv("AROID_DATA_ROOT")) return env;
  return "";
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c;
  const auto& t = j.at("train");
  c.epochs = t.at("epochs");
  c.batch_size = t.at("batch_size");
  c.lr.base = t.at("lr");
  c.lr.milestones = t.at("lr_milestones").get<std::vector<int>>();
  c.lr.gamma = t.at("lr_gamma");
  c.momentum = t.at("momentum");
  c.weight_decay = t.at("weight_decay");
  c.clip_norm = t.at("clip_norm");
  c.warmup_epochs = t.at("warmup_epochs");
  c.eps_warmup_epochs = t.at("eps_warmup_epochs");

  const auto& p = j.at("policy");
  c.K = p.at("K");
  c.T = p.at("T");
  c.beta = p.at("beta");
  c.lambda_schedule.points.clear();
  const auto& lam = p.at("lambda");
  if (lam.is_number()) {
    c.lambda_schedule.points.emplace_back(0, lam.get<double>());
  } else {
    for (const auto& pair : lam) {
      if (!pair.is_array() || pair.size() != 2)
        throw ConfigError("policy.lambda must be a number or [[epoch, value], ...]");
      c.lambda_schedule.points.emplace_back(pair[0].get<int>(),
                                            pair[1].get<double>());
    }
  }
  if (c.lambda_schedule.points.empty())
    throw ConfigError("policy.lambda must not be empty");
  for (size_t i = 1; i < c.lambda_schedule.points.size(); ++i)
    if (c.lambda_schedule.points[i].first <= c.lambda_schedule.points[i - 1].first)
      throw ConfigError("policy.lambda milestones must be strictly increasing");
  c.limits.l = p.at("div_lower");
  c.limits.u = p.at("div_upper");
  c.policy_lr = p.at("lr");
  c.policy_clip = p.at("clip_norm");

  auto attack_from = [](const json& a) {
    AttackConfig ac;
    ac.epsilon = a.at("eps");
    ac.steps = a.at("steps");
    ac.step_size = a.at("step_size");
    ac.random_start = a.at("random_start");
    return ac;
  };
  c.at_attack = attack_from(j.at("attack"));
  c.vul_attack = attack_from(j.at("vul_attack"));
  c.eval_attack = c.at_attack;
  c.eval_attack.steps = j.at("eval").at("steps");
  c.eval_subset = j.at("eval").at("subset");

  c.target_model = j.at("model").at("target");
  c.policy_width = j.at("model").at("policy_width");
  c.classes = j.at("data").at("classes");
  c.space_kind = space_kind_from_string(j.at("space").at("kind"));
  c.seed = j.at("run").at("seed");
  c.fingerprint = fingerprint;
  return c;
}

}  // namespace aroid
