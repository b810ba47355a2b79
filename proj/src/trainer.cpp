#include "aroid/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include "aroid/errors.hpp"
#include "aroid/pg_estimator.hpp"
#include "aroid/report.hpp"

namespace aroid {

double LrSchedule::at(int epoch) const {
  double lr = base;
  for (int m : milestones)
    if (epoch >= m) lr *= gamma;
  return lr;
}

double lambda_at(const LambdaSchedule& schedule, int epoch) {
  if (schedule.points.empty()) throw ConfigError("empty lambda schedule");
  double v = schedule.points.front().second;
  for (const auto& [e, lam] : schedule.points)
    if (epoch >= e) v = lam;
  return v;
}

double eps_at(const TrainConfig& cfg, int epoch) {
  const double eps = cfg.at_attack.epsilon;
  if (cfg.eps_warmup_epochs <= 0) return eps;
  const double f = std::min(1.0, static_cast<double>(epoch) / cfg.eps_warmup_epochs);
  return eps * f;
}

void TrainConfig::validate() const {
  if (K < 1) throw ConfigError("policy.K must be >= 1");
  if (T < 2) throw ConfigError("policy.T must be >= 2");
  if (warmup_epochs < 0) throw ConfigError("train.warmup_epochs must be >= 0");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  for (const auto& [e, lam] : lambda_schedule.points)
    if (lam < 0) throw ConfigError("policy.lambda values must be >= 0");
  if (!(limits.l > 0 && limits.l < 1 && limits.u > 1))
    throw ConfigError("diversity limits require 0 < l < 1 < u");
  if (beta < 0) throw ConfigError("policy.beta must be >= 0");
}

// ---------------------------------------------------------------------------

const std::vector<float>& PolicyCheckpointLog::at_epoch(int epoch) const {
  for (const auto& [e, p] : snapshots)
    if (e == epoch) return p;
  std::string have;
  for (const auto& [e, p] : snapshots) {
    if (!have.empty()) have += ",";
    have += std::to_string(e);
  }
  throw ConfigError("policy log has no snapshot for epoch " +
                    std::to_string(epoch) + " (available: " + have + ")");
}

namespace {
constexpr char kLogMagic[8] = {'A', 'R', 'P', 'L', '1', '\n', 0, 0};
}

void PolicyCheckpointLog::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write policy log: " + path);
  os.write(kLogMagic, sizeof(kLogMagic));
  const std::int32_t heads = static_cast<std::int32_t>(head_sizes.size());
  os.write(reinterpret_cast<const char*>(&heads), sizeof(heads));
  for (int s : head_sizes) {
    const std::int32_t v = s;
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  const std::int32_t width = policy_width, ch = in_ch;
  os.write(reinterpret_cast<const char*>(&width), sizeof(width));
  os.write(reinterpret_cast<const char*>(&ch), sizeof(ch));
  const std::int32_t flen = static_cast<std::int32_t>(fingerprint.size());
  os.write(reinterpret_cast<const char*>(&flen), sizeof(flen));
  os.write(fingerprint.data(), flen);
  const std::int32_t count = static_cast<std::int32_t>(snapshots.size());
  os.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& [e, p] : snapshots) {
    const std::int32_t epoch = e;
    os.write(reinterpret_cast<const char*>(&epoch), sizeof(epoch));
    const std::int64_t n = static_cast<std::int64_t>(p.size());
    os.write(reinterpret_cast<const char*>(&n), sizeof(n));
    os.write(reinterpret_cast<const char*>(p.data()),
             static_cast<std::streamsize>(p.size() * sizeof(float)));
  }
  if (!os) throw Error("short write for policy log: " + path);
}

PolicyCheckpointLog PolicyCheckpointLog::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read policy log: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kLogMagic, sizeof(magic)) != 0)
    throw Error("not a policy log: " + path);
  PolicyCheckpointLog log;
  std::int32_t heads = 0;
  is.read(reinterpret_cast<char*>(&heads), sizeof(heads));
  log.head_sizes.resize(heads);
  for (auto& s : log.head_sizes) {
    std::int32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    s = v;
  }
  std::int32_t width = 0, ch = 0, flen = 0, count = 0;
  is.read(reinterpret_cast<char*>(&width), sizeof(width));
  is.read(reinterpret_cast<char*>(&ch), sizeof(ch));
  is.read(reinterpret_cast<char*>(&flen), sizeof(flen));
  log.policy_width = width;
  log.in_ch = ch;
  log.fingerprint.resize(flen);
  is.read(log.fingerprint.data(), flen);
  is.read(reinterpret_cast<char*>(&count), sizeof(count));
  for (int i = 0; i < count; ++i) {
    std::int32_t epoch = 0;
    std::int64_t n = 0;
    is.read(reinterpret_cast<char*>(&epoch), sizeof(epoch));
    is.read(reinterpret_cast<char*>(&n), sizeof(n));
    std::vector<float> p(n);
    is.read(reinterpret_cast<char*>(p.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    log.snapshots.emplace_back(epoch, std::move(p));
  }
  if (!is) throw Error("truncated policy log: " + path);
  return log;
}

// ---------------------------------------------------------------------------

namespace {

/// Endless shuffled index stream over [0, n); reshuffles on wrap.
class IndexStream {
 public:
  IndexStream(size_t n, Rng rng) : rng_(rng), idx_(n) {
    std::iota(idx_.begin(), idx_.end(), 0);
    shuffle();
  }
  std::vector<int> next(size_t count) {
    std::vector<int> out;
    out.reserve(count);
    while (out.size() < count) {
      if (pos_ == idx_.size()) {
        shuffle();
        pos_ = 0;
      }
      out.push_back(idx_[pos_++]);
    }
    return out;
  }

 private:
  void shuffle() {
    for (size_t i = idx_.size(); i > 1; --i)
      std::swap(idx_[i - 1], idx_[rng_.below(i)]);
  }
  Rng rng_;
  std::vector<int> idx_;
  size_t pos_ = 0;
};

std::vector<int> gather_labels(const Dataset& ds, const std::vector<int>& idx) {
  std::vector<int> out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out[i] = ds.labels[idx[i]];
  return out;
}

double train_accuracy(Net& net, const Dataset& ds, int batch_size) {
  size_t correct = 0;
  for (size_t b = 0; b < ds.size(); b += batch_size) {
    const size_t e = std::min(ds.size(), b + batch_size);
    const Batch x = make_batch(ds.images, b, e);
    const auto pred = predict_classes(net.forward(x));
    for (size_t i = b; i < e; ++i) correct += (pred[i - b] == ds.labels[i]);
  }
  return static_cast<double>(correct) / ds.size();
}

int dataset_in_ch(const Dataset& ds) {
  if (ds.images.empty()) throw Error("empty dataset");
  return ds.images[0].c;
}

}  // namespace

std::vector<float> pretrain_affinity(const TrainConfig& cfg,
                                     const AffinityConfig& aff,
                                     const Dataset& train, Metrics* metrics) {
  RngPool pool(cfg.seed);
  Rng init = pool.stream("affinity-init");
  const Image& probe = train.images.at(0);
  Net net = make_model(cfg.target_model, probe.c, probe.h, probe.w, cfg.classes,
                       init);
  Sgd opt(aff.lr, aff.momentum, aff.weight_decay);
  Rng order = pool.stream("affinity-data");
  IndexStream stream(train.size(), order);

  double best_acc = -1.0;
  std::vector<float> best_params = net.get_params();
  const size_t iters = (train.size() + aff.batch_size - 1) / aff.batch_size;
  for (int epoch = 0; epoch < aff.epochs; ++epoch) {
    for (size_t it = 0; it < iters; ++it) {
      const auto idx = stream.next(std::min<size_t>(
          aff.batch_size, train.size() - it * aff.batch_size > 0
              ? aff.batch_size
              : aff.batch_size));
      const Batch x = make_batch(train.images, idx);
      const auto labels = gather_labels(train, idx);
      const Batch logits = net.forward(x);
      const CeResult ce = softmax_ce(logits, labels, 1.0 / x.n);
      if (!std::isfinite(ce.mean_loss))
        throw TrainError("non-finite loss in affinity pretraining");
      net.zero_grad();
      net.backward(ce.dlogits, /*need_dx=*/false, /*need_pg=*/true);
      auto params = net.params();
      clip_grad_norm(params, cfg.clip_norm);
      opt.step(params);
      if (metrics && it == 0)
        metrics->target_row(epoch, static_cast<int>(it), aff.lr, 0.0, 0.0,
                            ce.mean_loss);
    }
    const double acc = train_accuracy(net, train, aff.batch_size);
    if (metrics) metrics->epoch_row(epoch, 0.0, 0.0, acc, 0.0);
    if (acc > best_acc) {
      best_acc = acc;
      best_params = net.get_params();
    }
    if (acc >= aff.stop_acc) break;
  }
  if (best_acc < aff.floor_acc)
    std::fprintf(stderr,
                 "warning: affinity pretraining reached only %.3f train "
                 "accuracy (floor %.3f); returning best epoch anyway\n",
                 best_acc, aff.floor_acc);
  return best_params;
}

// ---------------------------------------------------------------------------

namespace {

struct LoopMode {
  bool record_policy = true;           // train(): update + snapshot the policy
  const PolicyCheckpointLog* replay = nullptr;  // train_transfer(): read-only
};

TrainResult run_training_loop(const TrainConfig& cfg, const Dataset& train_ds,
                              const Dataset& test_ds,
                              const std::vector<float>& affinity_params,
                              const LoopMode& mode, Metrics& metrics) {
  cfg.validate();
  if (train_ds.images.empty() || test_ds.images.empty())
    throw ConfigError("train/test split must be nonempty");

  const AugmentationSpace space = build_space(cfg.space_kind);
  RngPool pool(cfg.seed);
  const Image& probe = train_ds.images.at(0);

  Rng target_init = pool.stream("target-init");
  Net target = make_model(cfg.target_model, probe.c, probe.h, probe.w,
                          cfg.classes, target_init);

  Rng policy_init = pool.stream("policy-init");
  PolicyModel policy(space, cfg.policy_width, probe.c, policy_init);

  Net affinity_model;
  const bool policy_training_possible =
      mode.record_policy && cfg.epochs > cfg.warmup_epochs;
  if (policy_training_possible) {
    if (affinity_params.empty())
      throw ConfigError("train() needs pretrained affinity parameters when "
                        "policy updates are enabled");
    Rng aff_init = pool.stream("affinity-init");
    affinity_model = make_model(cfg.target_model, probe.c, probe.h, probe.w,
                                cfg.classes, aff_init);
    affinity_model.set_params(affinity_params);
  }
  if (mode.replay) {
    if (mode.replay->head_sizes != space.head_sizes())
      throw ConfigError("policy log space signature does not match the "
                        "configured augmentation space");
    if (mode.replay->policy_width != cfg.policy_width)
      throw ConfigError("policy log width " +
                        std::to_string(mode.replay->policy_width) +
                        " does not match configured policy width " +
                        std::to_string(cfg.policy_width));
    // every training epoch must be covered before we start
    for (int e = 0; e < cfg.epochs; ++e) mode.replay->at_epoch(e);
  }

  Sgd target_opt(cfg.lr.base, cfg.momentum, cfg.weight_decay);
  // Constant policy lr; momentum copied from the target optimizer.
  Sgd policy_opt(cfg.policy_lr, cfg.momentum, 0.0);

  Rng data_rng = pool.stream("target-data");
  IndexStream data_stream(train_ds.size(), data_rng);
  Rng policy_data_rng = pool.stream("policy-data");
  IndexStream policy_data_stream(train_ds.size(), policy_data_rng);
  Rng target_traj_rng = pool.stream("target-trajectories");
  Rng policy_traj_rng = pool.stream("policy-trajectories");
  Rng target_aug_rng = pool.stream("target-augment");
  Rng policy_aug_rng = pool.stream("policy-augment");
  Rng at_attack_rng = pool.stream("at-attack");
  Rng vul_attack_rng = pool.stream("vul-attack");
  Rng eval_rng = pool.stream("eval-attack");

  TrainResult result;
  result.policy_log.head_sizes = space.head_sizes();
  result.policy_log.policy_width = cfg.policy_width;
  result.policy_log.in_ch = probe.c;
  result.policy_log.fingerprint = cfg.fingerprint;

  const size_t iters_per_epoch =
      (train_ds.size() + cfg.batch_size - 1) / cfg.batch_size;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const bool warm = epoch < cfg.warmup_epochs;
    const double lam = lambda_at(cfg.lambda_schedule, epoch);
    const double eps = eps_at(cfg, epoch);
    target_opt.lr = cfg.lr.at(epoch);

    AttackConfig at_attack = cfg.at_attack;
    at_attack.epsilon = eps;
    AttackConfig vul_attack = cfg.vul_attack;
    vul_attack.epsilon = std::min(vul_attack.epsilon, eps > 0 ? eps : 0.0);

    if (mode.replay && !warm)
      policy.set_params(mode.replay->at_epoch(epoch));

    for (size_t it = 0; it < iters_per_epoch; ++it) {
      // Alg. 1: every K-th iteration refreshes the policy first.
      if (!warm && mode.record_policy && (it + 1) % cfg.K == 0) {
        const auto idx = policy_data_stream.next(cfg.batch_size);
        const Batch px = make_batch(train_ds.images, idx);
        const auto plabels = gather_labels(train_ds, idx);
        PolicyUpdateConfig ucfg;
        ucfg.T = cfg.T;
        ucfg.lambda = lam;
        ucfg.beta = cfg.beta;
        ucfg.limits = cfg.limits;
        ucfg.vul_attack = vul_attack;
        ucfg.clip_norm = cfg.policy_clip;
        const HardnessFn hardness_fn = make_hardness_fn(
            target, affinity_model, px, lam, vul_attack, vul_attack_rng);
        const PolicyLossBreakdown bd =
            policy_update_step(policy, policy_opt, px, plabels, space, ucfg,
                               hardness_fn, policy_traj_rng, policy_aug_rng);
        result.counters.policy_updates++;
        if (bd.applied)
          result.counters.policy_grad_updates++;
        else
          result.counters.policy_skipped++;
        metrics.policy_row(epoch, static_cast<int>(it), bd.surrogate,
                           bd.diversity, bd.total);
      }

      // Target step: augment (one trajectory per image), attack, descend.
      const auto idx = data_stream.next(
          std::min<size_t>(cfg.batch_size, train_ds.size()));
      Batch x = make_batch(train_ds.images, idx);
      const auto labels = gather_labels(train_ds, idx);
      if (!warm) {
        const auto outs = policy.forward(x);
        Batch aug(x.n, x.c, x.h, x.w);
        for (int i = 0; i < x.n; ++i) {
          const auto t = sample_trajectories(outs[i], 1, target_traj_rng);
          aug.set_image(
              i, apply_trajectory(x.image(i), t[0].code, space, target_aug_rng));
        }
        x = std::move(aug);
      }
      const Batch adv = pgd(target, x, labels, at_attack, at_attack_rng);
      const Batch logits = target.forward(adv);
      const CeResult ce = softmax_ce(logits, labels, 1.0 / adv.n);
      if (!std::isfinite(ce.mean_loss))
        throw TrainError("non-finite target loss at epoch " +
                         std::to_string(epoch) + " iter " + std::to_string(it));
      target.zero_grad();
      target.backward(ce.dlogits, /*need_dx=*/false, /*need_pg=*/true);
      auto tparams = target.params();
      clip_grad_norm(tparams, cfg.clip_norm);
      target_opt.step(tparams);
      result.counters.target_steps++;
      metrics.target_row(epoch, static_cast<int>(it), target_opt.lr, lam, eps,
                         ce.mean_loss);
    }

    // Epoch end: track robustness, keep the best checkpoint, snapshot policy.
    const EvalResult ev = evaluate(target, test_ds, cfg.eval_attack, eval_rng,
                                   cfg.batch_size, cfg.eval_subset);
    metrics.epoch_row(epoch, lam, eps, ev.clean_acc, ev.robust_acc);
    if (ev.robust_acc > result.best_robust || result.best_epoch < 0) {
      result.best_robust = ev.robust_acc;
      result.best_clean = ev.clean_acc;
      result.best_epoch = epoch;
      result.best_params = target.get_params();
    }
    if (mode.record_policy)
      result.policy_log.snapshots.emplace_back(epoch, policy.get_params());
  }
  result.last_params = target.get_params();
  return result;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Dataset& train_ds,
                  const Dataset& test_ds,
                  const std::vector<float>& affinity_params, Metrics& metrics) {
  LoopMode mode;
  mode.record_policy = true;
  return run_training_loop(cfg, train_ds, test_ds, affinity_params, mode,
                           metrics);
}

TrainResult train_transfer(const TrainConfig& cfg, const Dataset& train_ds,
                           const Dataset& test_ds,
                           const PolicyCheckpointLog& log, Metrics& metrics) {
  LoopMode mode;
  mode.record_policy = false;
  mode.replay = &log;
  return run_training_loop(cfg, train_ds, test_ds, {}, mode, metrics);
}

}  // namespace aroid
