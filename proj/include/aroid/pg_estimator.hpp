#pragma once

#include <functional>
#include <vector>

#include "aroid/objectives.hpp"
#include "aroid/policy.hpp"

namespace aroid {

/// One policy update's loss terms. total = -surrogate + beta * diversity.
struct PolicyLossBreakdown {
  double surrogate = 0.0;
  double diversity = 0.0;
  double total = 0.0;
  bool applied = true;
};

struct PolicyUpdateConfig {
  int T = 8;
  double lambda = 0.0;
  double beta = 0.8;
  DiversityLimits limits;
  AttackConfig vul_attack;
  double clip_norm = 1.0;
  bool diversity_on = true;
};

/// REINFORCE-with-baseline surrogate:
///   (1/(B*T)) sum_i sum_t logP_t(x_i) * (hrd_t(x_i) - mean_t hrd(x_i)).
/// Hardness values enter as constants. Requires T >= 2.
double surrogate_loss(const std::vector<PolicyOutput>& outputs,
                      const std::vector<std::vector<Trajectory>>& trajs);

/// Analytic gradient of the surrogate w.r.t. the per-head logits,
/// [sample][head][logit]. With use_baseline=false this is the plain REINFORCE
/// estimator (used by the enumeration oracle tests).
std::vector<std::vector<std::vector<double>>> surrogate_logit_grads(
    const std::vector<PolicyOutput>& outputs,
    const std::vector<std::vector<Trajectory>>& trajs, bool use_baseline = true);

/// Evaluates realized hardness for a batch of augmented samples.
using HardnessFn = std::function<std::vector<double>(
    const Batch& aug_batch, const std::vector<int>& labels,
    const std::vector<TrajectoryCode>& codes)>;

/// Production hardness: Vulnerability(target on aug) - lambda *
/// Affinity(frozen model, orig vs aug). Neither model's parameters change.
HardnessFn make_hardness_fn(Net& target, Net& affinity_model, const Batch& orig,
                            double lambda, const AttackConfig& vul_attack,
                            Rng& attack_rng);

/// One policy-model update: forward on x, sample T trajectories per sample,
/// augment, score hardness, build the baseline-corrected surrogate plus
/// beta-weighted mean-head Diversity, and take one clipped SGD step. On a
/// non-finite loss or gradient the step is skipped and the policy keeps its
/// parameters (breakdown.applied = false).
PolicyLossBreakdown policy_update_step(PolicyModel& policy, Sgd& opt,
                                       const Batch& x,
                                       const std::vector<int>& labels,
                                       const AugmentationSpace& space,
                                       const PolicyUpdateConfig& cfg,
                                       const HardnessFn& hardness_fn,
                                       Rng& sample_rng, Rng& aug_rng);

}  // namespace aroid
