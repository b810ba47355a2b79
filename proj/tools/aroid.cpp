// aroid -- adversarial training with an online, instance-wise learned
// augmentation policy. Subcommands: pretrain-affinity, train, train-transfer,
// eval, visualize-policy.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "aroid/checkpoint.hpp"
#include "aroid/config.hpp"
#include "aroid/dataset.hpp"
#include "aroid/errors.hpp"
#include "aroid/report.hpp"
#include "aroid/trainer.hpp"

namespace fs = std::filesystem;
using namespace aroid;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Advisory lock: one process per output directory.
class DirLock {
 public:
  explicit DirLock(const std::string& dir) : path_(dir + "/.lock") {
    fs::create_directories(dir);
    std::ifstream probe(path_);
    if (probe.good())
      throw ConfigError("output directory " + dir + " is locked by " + path_ +
                        "; remove the file if no other run is active");
    std::ofstream os(path_);
    os << "pid=" << ::getpid() << "\n";
    held_ = true;
  }
  ~DirLock() {
    if (held_) fs::remove(path_);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::string path_;
  bool held_ = false;
};

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> sets;
  // dedicated flags; -1/"" mean "not given"
  double eps = -1.0;
  int pgd_steps = -1;
  double pgd_step_size = -1.0;
  long seed = -1;
  int epochs = -1;
  bool dry_run = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_epochs = true) {
  cmd->add_option("-c,--config", o.config_path, "config file (JSON)")
      ->required();
  cmd->add_option("-o,--out", o.out_dir, "output directory (overrides run.out_dir)");
  cmd->add_option("--set", o.sets, "override a config key: --set section.key=value");
  cmd->add_option("--eps", o.eps, "attack epsilon (overrides attack.eps)");
  cmd->add_option("--pgd-steps", o.pgd_steps, "attack steps (overrides attack.steps)");
  cmd->add_option("--pgd-step-size", o.pgd_step_size,
                  "attack step size (overrides attack.step_size)");
  cmd->add_option("--seed", o.seed, "seed (overrides run.seed)");
  if (with_epochs)
    cmd->add_option("--epochs", o.epochs, "epochs (overrides train.epochs)");
  cmd->add_flag("--dry-run", o.dry_run,
                "validate the config and print the resolved schedules, then exit");
}

RunConfig load_run_config(const CommonOpts& o) {
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got '" + s + "'");
    overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.eps >= 0) {
    overrides.emplace_back("attack.eps", format_g(o.eps));
    overrides.emplace_back("vul_attack.eps", format_g(o.eps));
  }
  if (o.pgd_steps >= 0)
    overrides.emplace_back("attack.steps", std::to_string(o.pgd_steps));
  if (o.pgd_step_size >= 0)
    overrides.emplace_back("attack.step_size", format_g(o.pgd_step_size));
  if (o.seed >= 0) overrides.emplace_back("run.seed", std::to_string(o.seed));
  if (o.epochs >= 0)
    overrides.emplace_back("train.epochs", std::to_string(o.epochs));
  if (!o.out_dir.empty()) overrides.emplace_back("run.out_dir", o.out_dir);
  return resolve_config(o.config_path, overrides);
}

void print_dry_run(const RunConfig& rc) {
  const TrainConfig cfg = rc.train_config();
  std::cout << "config fingerprint: " << rc.fingerprint << "\n";
  std::cout << "data fingerprint:   " << rc.data_fingerprint << "\n";
  std::cout << "space: " << space_kind_name(cfg.space_kind) << ", head sizes:";
  for (int s : build_space(cfg.space_kind).head_sizes()) std::cout << ' ' << s;
  std::cout << "\n";
  std::cout << "schedules (epoch: lr lambda eps):\n";
  for (int e = 0; e < cfg.epochs; ++e) {
    std::cout << "  " << e << ": " << format_g(cfg.lr.at(e)) << ' '
              << format_g(lambda_at(cfg.lambda_schedule, e)) << ' '
              << format_g(eps_at(cfg, e));
    if (e < cfg.warmup_epochs) std::cout << "  (warmup: no augmentation)";
    std::cout << "\n";
  }
  std::cout << "policy updates: every K=" << cfg.K << " target iterations, T="
            << cfg.T << " trajectories, beta=" << format_g(cfg.beta)
            << ", limits=(" << format_g(cfg.limits.l) << ","
            << format_g(cfg.limits.u) << ")\n";
}

Dataset load_split(const RunConfig& rc, bool train_split) {
  try {
    return ingest_dataset(train_split ? rc.data_train() : rc.data_test(),
                          rc.data_root(),
                          train_split ? rc.subsample_train() : rc.subsample_test());
  } catch (const IngestError& e) {
    throw ConfigError(std::string("data.") + (train_split ? "train" : "test") +
                      ": " + e.what());
  }
}

std::string affinity_path(const RunConfig& rc) {
  const std::string name = rc.j.at("affinity").at("checkpoint");
  if (!name.empty() && name[0] == '/') return name;
  return rc.out_dir() + "/" + name;
}

AffinityConfig affinity_config(const RunConfig& rc) {
  const auto& a = rc.j.at("affinity");
  AffinityConfig c;
  c.epochs = a.at("epochs");
  c.batch_size = a.at("batch_size");
  c.lr = a.at("lr");
  c.momentum = a.at("momentum");
  c.weight_decay = a.at("weight_decay");
  c.stop_acc = a.at("stop_acc");
  c.floor_acc = a.at("floor_acc");
  return c;
}

void write_space_file(const RunConfig& rc) {
  const auto space = build_space(rc.train_config().space_kind);
  std::ofstream os(rc.out_dir() + "/space.txt");
  os << space.describe();
}

int cmd_pretrain_affinity(const CommonOpts& o) {
  const RunConfig rc = load_run_config(o);
  if (o.dry_run) {
    print_dry_run(rc);
    return kExitOk;
  }
  DirLock lock(rc.out_dir());
  const Dataset train_ds = load_split(rc, true);
  const TrainConfig cfg = rc.train_config();
  Metrics metrics(rc.fingerprint, cfg.seed);
  const auto params = pretrain_affinity(cfg, affinity_config(rc), train_ds, &metrics);
  Checkpoint ck{"affinity", cfg.target_model, rc.fingerprint,
                rc.data_fingerprint, 0, params};
  save_checkpoint(affinity_path(rc), ck);
  metrics.save(rc.out_dir() + "/affinity_metrics.csv");
  std::cout << "wrote " << affinity_path(rc) << " (fingerprint "
            << rc.fingerprint << ")\n";
  return kExitOk;
}

int cmd_train(const CommonOpts& o, bool allow_affinity_mismatch) {
  const RunConfig rc = load_run_config(o);
  if (o.dry_run) {
    print_dry_run(rc);
    return kExitOk;
  }
  DirLock lock(rc.out_dir());
  write_space_file(rc);
  const Dataset train_ds = load_split(rc, true);
  const Dataset test_ds = load_split(rc, false);
  const TrainConfig cfg = rc.train_config();

  std::vector<float> aff_params;
  if (cfg.epochs > cfg.warmup_epochs) {
    const std::string path = affinity_path(rc);
    if (!fs::exists(path))
      throw ConfigError("affinity checkpoint " + path +
                        " not found; run `aroid pretrain-affinity` first");
    const Checkpoint ck = load_checkpoint(path);
    if (ck.data_fingerprint != rc.data_fingerprint && !allow_affinity_mismatch)
      throw ConfigError("affinity checkpoint " + path +
                        " was trained under a different data/model config "
                        "(use --allow-mismatch to override)");
    aff_params = ck.params;
  }

  Metrics metrics(rc.fingerprint, cfg.seed);
  const TrainResult r = train(cfg, train_ds, test_ds, aff_params, metrics);
  metrics.save(rc.out_dir() + "/metrics.csv");
  save_checkpoint(rc.out_dir() + "/target_best.ckpt",
                  {"target", cfg.target_model, rc.fingerprint,
                   rc.data_fingerprint, r.best_epoch, r.best_params});
  save_checkpoint(rc.out_dir() + "/target_last.ckpt",
                  {"target", cfg.target_model, rc.fingerprint,
                   rc.data_fingerprint, cfg.epochs - 1, r.last_params});
  r.policy_log.save(rc.out_dir() + "/policy_log.bin");
  std::cout << "best robustness " << format_g(r.best_robust) << " (clean "
            << format_g(r.best_clean) << ") at epoch " << r.best_epoch << "\n"
            << "target steps " << r.counters.target_steps << ", policy updates "
            << r.counters.policy_updates << " (skipped "
            << r.counters.policy_skipped << ")\n";
  return kExitOk;
}

int cmd_train_transfer(const CommonOpts& o, const std::string& log_path,
                       bool allow_mismatch) {
  const RunConfig rc = load_run_config(o);
  if (o.dry_run) {
    print_dry_run(rc);
    return kExitOk;
  }
  DirLock lock(rc.out_dir());
  const PolicyCheckpointLog log = PolicyCheckpointLog::load(log_path);
  if (log.fingerprint != rc.fingerprint && !allow_mismatch)
    throw ConfigError(
        "policy log " + log_path + " was recorded under fingerprint " +
        log.fingerprint + " but this config resolves to " + rc.fingerprint +
        " (use --allow-mismatch to replay across configs)");
  const Dataset train_ds = load_split(rc, true);
  const Dataset test_ds = load_split(rc, false);
  const TrainConfig cfg = rc.train_config();
  Metrics metrics(rc.fingerprint, cfg.seed);
  const TrainResult r = train_transfer(cfg, train_ds, test_ds, log, metrics);
  metrics.save(rc.out_dir() + "/metrics.csv");
  save_checkpoint(rc.out_dir() + "/target_best.ckpt",
                  {"target", cfg.target_model, rc.fingerprint,
                   rc.data_fingerprint, r.best_epoch, r.best_params});
  save_checkpoint(rc.out_dir() + "/target_last.ckpt",
                  {"target", cfg.target_model, rc.fingerprint,
                   rc.data_fingerprint, cfg.epochs - 1, r.last_params});
  std::cout << "best robustness " << format_g(r.best_robust) << " at epoch "
            << r.best_epoch << " with " << r.counters.policy_grad_updates
            << " policy gradient updates\n";
  return kExitOk;
}

int cmd_eval(const CommonOpts& o, const std::string& ckpt_path,
             const std::string& split) {
  const RunConfig rc = load_run_config(o);
  if (o.dry_run) {
    print_dry_run(rc);
    return kExitOk;
  }
  const Dataset ds = load_split(rc, split == "train");
  const TrainConfig cfg = rc.train_config();
  const Image& probe = ds.images.at(0);
  RngPool pool(cfg.seed);
  Rng init = pool.stream("target-init");
  Net model = make_model(cfg.target_model, probe.c, probe.h, probe.w,
                         cfg.classes, init);
  if (!ckpt_path.empty()) {
    const Checkpoint ck = load_checkpoint(ckpt_path);
    if (ck.model_spec != cfg.target_model)
      throw ConfigError("checkpoint model " + ck.model_spec +
                        " does not match configured model " + cfg.target_model);
    model.set_params(ck.params);
    std::cout << "checkpoint fingerprint: " << ck.fingerprint << "\n";
  }
  Rng eval_rng = pool.stream("eval-attack");
  const EvalResult ev = evaluate(model, ds, cfg.eval_attack, eval_rng,
                                 cfg.batch_size, cfg.eval_subset);
  std::cout << "clean_acc=" << format_g(ev.clean_acc)
            << " robust_acc=" << format_g(ev.robust_acc) << " (split=" << split
            << ", n=" << (cfg.eval_subset > 0
                              ? std::min<size_t>(cfg.eval_subset, ds.size())
                              : ds.size())
            << ", pgd_steps=" << cfg.eval_attack.steps << ")\n";
  return kExitOk;
}

int cmd_visualize(const CommonOpts& o, const std::string& log_path,
                  std::string epochs_arg, int image_count,
                  const std::string& csv_out, const std::string& svg_out) {
  const RunConfig rc = load_run_config(o);
  if (o.dry_run) {
    print_dry_run(rc);
    return kExitOk;
  }
  const PolicyCheckpointLog log = PolicyCheckpointLog::load(log_path);
  const auto space = build_space(rc.train_config().space_kind);
  const Dataset ds = load_split(rc, true);
  std::vector<Image> probes;
  for (int i = 0; i < image_count && i < static_cast<int>(ds.size()); ++i)
    probes.push_back(ds.images[i]);

  std::vector<int> epochs;
  if (epochs_arg.empty()) {
    for (const auto& [e, p] : log.snapshots) epochs.push_back(e);
  } else {
    std::istringstream ss(epochs_arg);
    std::string tok;
    while (std::getline(ss, tok, ',')) epochs.push_back(std::stoi(tok));
  }

  const auto rows = export_policy_distributions(log, space, probes, epochs);
  if (!csv_out.empty()) {
    std::ofstream os(csv_out);
    write_policy_dist_csv(rows, os);
    std::cout << "wrote " << csv_out << " (" << rows.size() << " rows)\n";
  } else {
    write_policy_dist_csv(rows, std::cout);
  }
  if (!svg_out.empty()) {
    std::ofstream os(svg_out);
    write_policy_dist_svg(rows, os);
    std::cout << "wrote " << svg_out << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial training with a learned per-image augmentation policy"};
  app.require_subcommand(1);

  CommonOpts opt_pre, opt_train, opt_transfer, opt_eval, opt_vis;

  auto* pre = app.add_subcommand("pretrain-affinity",
                                 "standard-train the affinity model with no "
                                 "augmentation and save its checkpoint");
  add_common(pre, opt_pre);

  auto* tr = app.add_subcommand("train", "bi-level adversarial training with "
                                         "online policy learning");
  add_common(tr, opt_train);
  bool allow_aff_mismatch = false;
  tr->add_flag("--allow-mismatch", allow_aff_mismatch,
               "accept an affinity checkpoint from a different data/model config");

  auto* tt = app.add_subcommand("train-transfer",
                                "adversarial training that replays a recorded "
                                "policy log instead of learning one");
  add_common(tt, opt_transfer);
  std::string policy_log_path;
  bool allow_log_mismatch = false;
  tt->add_option("--policy-log", policy_log_path, "recorded policy log")
      ->required();
  tt->add_flag("--allow-mismatch", allow_log_mismatch,
               "replay a log recorded under a different config fingerprint");

  auto* ev = app.add_subcommand("eval", "clean and PGD accuracy of a checkpoint");
  add_common(ev, opt_eval);
  std::string ckpt_path, split = "test";
  ev->add_option("--checkpoint", ckpt_path, "target checkpoint to evaluate");
  ev->add_option("--split", split, "train|test")
      ->check(CLI::IsMember({"train", "test"}));

  auto* vis = app.add_subcommand("visualize-policy",
                                 "export logged policy distributions as CSV "
                                 "and optional SVG charts");
  add_common(vis, opt_vis, /*with_epochs=*/false);
  std::string vis_log, vis_epochs, vis_csv, vis_svg;
  int vis_images = 8;
  vis->add_option("--policy-log", vis_log, "recorded policy log")->required();
  vis->add_option("--epochs", vis_epochs, "comma-separated epochs (default all)");
  vis->add_option("--images", vis_images, "number of probe images");
  vis->add_option("--csv", vis_csv, "CSV output path (default stdout)");
  vis->add_option("--svg", vis_svg, "SVG output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (pre->parsed()) return cmd_pretrain_affinity(opt_pre);
    if (tr->parsed()) return cmd_train(opt_train, allow_aff_mismatch);
    if (tt->parsed())
      return cmd_train_transfer(opt_transfer, policy_log_path, allow_log_mismatch);
    if (ev->parsed()) return cmd_eval(opt_eval, ckpt_path, split);
    if (vis->parsed())
      return cmd_visualize(opt_vis, vis_log, vis_epochs, vis_images, vis_csv,
                           vis_svg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
