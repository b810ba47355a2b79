#pragma once

#include <vector>

#include "aroid/attacks.hpp"
#include "aroid/augspace.hpp"
#include "aroid/nn.hpp"
#include "aroid/policy.hpp"

namespace aroid {

struct HardnessConfig {
  double lambda = 0.0;
  AttackConfig vul_attack;  // PGD2 by default in the trainer presets
};

/// Bounds on batch-mean probabilities, as factors of the head's mean
/// probability p~ = 1/|head|. l < 1 < u keeps the uniform distribution
/// feasible.
struct DiversityLimits {
  double l = 0.9;
  double u = 4.0;
};

struct HardnessRecord {
  double vulnerability = 0.0;
  double affinity = 0.0;
  double hardness = 0.0;  // vulnerability - lambda * affinity
};

/// Loss increase caused by adversarially perturbing the (already augmented)
/// batch under the target model: L(pgd(x^), y) - L(x^, y) per sample. Target
/// parameters are treated as constants.
std::vector<double> vulnerability(Net& target, const Batch& aug_batch,
                                  const std::vector<int>& labels,
                                  const AttackConfig& vul_attack, Rng& rng);

/// Loss increase caused by augmentation under the frozen affinity model:
/// L(x^, y) - L(x, y) per sample.
std::vector<double> affinity(Net& affinity_model, const Batch& orig_batch,
                             const Batch& aug_batch,
                             const std::vector<int>& labels);

/// Elementwise vul - lambda * aft.
std::vector<double> hardness(const std::vector<double>& vul,
                             const std::vector<double>& aft, double lambda);

/// Per-head Diversity loss with its analytic gradient w.r.t. the batch-mean
/// distribution q of each head.
struct DiversityEval {
  std::vector<double> per_head;
  std::vector<std::vector<double>> grad_q;
  double mean() const;
};

/// Diversity evaluated on the batch-mean distribution of each head. Thresholds
/// are strict: q < l*p~ or q > u*p~ counts as a violation; the loss is the
/// mean of -log q over lower violators plus +log q over upper violators, 0
/// when there is none. The ColorShape head is scored hierarchically: the
/// plain loss on the 14 type sums (p~ = 1/14) plus the mean over
/// multi-magnitude types of the loss on within-type renormalized magnitudes.
DiversityEval diversity_on_mean(const std::vector<std::vector<double>>& q,
                                const DiversityLimits& limits,
                                const AugmentationSpace& space);

/// Averages the per-instance probability vectors across the batch, then
/// applies diversity_on_mean.
DiversityEval diversity(const std::vector<PolicyOutput>& batch_outputs,
                        const DiversityLimits& limits,
                        const AugmentationSpace& space);

std::vector<std::vector<double>> mean_probs(
    const std::vector<PolicyOutput>& batch_outputs);

}  // namespace aroid
