#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aroid/attacks.hpp"
#include "aroid/augspace.hpp"
#include "aroid/dataset.hpp"
#include "aroid/metrics.hpp"
#include "aroid/nn.hpp"
#include "aroid/objectives.hpp"
#include "aroid/policy.hpp"

namespace aroid {

/// Piecewise-constant learning rate: base * gamma^(milestones passed).
struct LrSchedule {
  double base = 0.1;
  std::vector<int> milestones;
  double gamma = 0.1;
  double at(int epoch) const;
};

/// Piecewise-constant lambda lookup: the value of the latest milestone whose
/// epoch is <= the query (left-closed intervals); the first value before the
/// first milestone.
struct LambdaSchedule {
  std::vector<std::pair<int, double>> points{{0, 0.0}};
};
double lambda_at(const LambdaSchedule& schedule, int epoch);

struct TrainConfig {
  int epochs = 20;
  int batch_size = 128;
  LrSchedule lr;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double clip_norm = 1.0;
  int warmup_epochs = 5;       // no augmentation, no policy training
  int eps_warmup_epochs = 0;   // linear AT-epsilon ramp; 0 disables

  int K = 5;  // target iterations per policy update
  int T = 8;  // trajectories per policy update
  double beta = 0.8;
  LambdaSchedule lambda_schedule;
  DiversityLimits limits;
  double policy_lr = 0.001;
  double policy_clip = 1.0;

  AttackConfig at_attack;    // PGD10 with random start by default
  AttackConfig vul_attack;   // PGD2, deterministic start
  AttackConfig eval_attack;  // epoch-end robustness tracking
  int eval_subset = 0;       // 0 = full test split

  std::string target_model = "cnn:16";
  int policy_width = 32;
  int classes = 10;
  SpaceKind space_kind = SpaceKind::standard;

  std::uint64_t seed = 0;
  std::string fingerprint;  // carried into checkpoints and CSV

  void validate() const;
};

/// Linear epsilon ramp evaluated per epoch boundary.
double eps_at(const TrainConfig& cfg, int epoch);

struct AffinityConfig {
  int epochs = 40;
  int batch_size = 128;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double stop_acc = 0.995;  // early stop on training accuracy
  double floor_acc = 0.6;   // warn when never reached
};

/// Standard (non-adversarial) training with no augmentation; early-stops at
/// stop_acc training accuracy, otherwise returns the best-accuracy epoch with
/// a warning. The result is the frozen affinity model's parameter blob.
std::vector<float> pretrain_affinity(const TrainConfig& cfg,
                                     const AffinityConfig& aff,
                                     const Dataset& train, Metrics* metrics);

/// Per-epoch policy snapshots with the space signature and config fingerprint
/// of the recording run.
struct PolicyCheckpointLog {
  std::vector<int> head_sizes;
  int policy_width = 0;
  int in_ch = 0;
  std::string fingerprint;
  std::vector<std::pair<int, std::vector<float>>> snapshots;

  const std::vector<float>& at_epoch(int epoch) const;
  void save(const std::string& path) const;
  static PolicyCheckpointLog load(const std::string& path);
};

struct TrainCounters {
  long target_steps = 0;
  long policy_updates = 0;
  long policy_grad_updates = 0;
  long policy_skipped = 0;
};

struct TrainResult {
  std::vector<float> best_params;
  std::vector<float> last_params;
  int best_epoch = -1;
  double best_robust = 0.0;
  double best_clean = 0.0;
  PolicyCheckpointLog policy_log;
  TrainCounters counters;
};

/// Bi-level alternating optimization: every K-th target iteration (after
/// warmup) runs one policy update on a fresh batch drawn from its own shuffled
/// stream over the full training set; every target iteration samples one
/// trajectory per image, augments, attacks and steps the target model.
/// affinity_params may be empty only if no policy update will ever run
/// (epochs <= warmup_epochs).
TrainResult train(const TrainConfig& cfg, const Dataset& train_ds,
                  const Dataset& test_ds,
                  const std::vector<float>& affinity_params, Metrics& metrics);

/// Same loop with the policy loaded read-only from the epoch-matched snapshot
/// and never updated; no affinity model or vulnerability attacks are needed.
TrainResult train_transfer(const TrainConfig& cfg, const Dataset& train_ds,
                           const Dataset& test_ds,
                           const PolicyCheckpointLog& log, Metrics& metrics);

}  // namespace aroid
