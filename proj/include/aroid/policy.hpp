#pragma once

#include <string>
#include <vector>

#include "aroid/augspace.hpp"
#include "aroid/nn.hpp"

namespace aroid {

/// Per-head logits and probability simplices for one image.
struct PolicyOutput {
  std::vector<std::vector<double>> logits;
  std::vector<std::vector<double>> probs;
};

/// One sampled augmentation sequence with its joint log-probability and, once
/// evaluated, its realized hardness.
struct Trajectory {
  TrajectoryCode code;
  double log_prob = 0.0;
  double hardness = 0.0;
};

std::vector<double> softmax(const std::vector<double>& logits);
PolicyOutput policy_output_from_logits(std::vector<std::vector<double>> logits);

/// Joint log-probability of a code under a policy output. Returns -inf when a
/// selected index has zero probability.
double log_prob_of(const PolicyOutput& out, const TrajectoryCode& code);

/// T independent inverse-CDF samples from the per-head distributions.
std::vector<Trajectory> sample_trajectories(const PolicyOutput& out, int T,
                                            Rng& rng);

/// Convolutional backbone with one linear projection per augmentation head.
/// The heads consume the backbone's feature vector, so backbones are
/// interchangeable behind this interface.
class PolicyModel {
 public:
  PolicyModel(const AugmentationSpace& space, int width, int in_ch, Rng& rng);

  std::vector<PolicyOutput> forward(const Batch& x);
  /// Backpropagates d(loss)/d(logits), one vector per sample per head, through
  /// heads and backbone, accumulating parameter gradients.
  void backward(const std::vector<std::vector<std::vector<double>>>& dlogits);

  std::vector<ParamView> params();
  void zero_grad();
  std::vector<float> get_params();
  void set_params(const std::vector<float>& flat);
  std::uint64_t params_checksum();

  const std::vector<int>& head_sizes() const { return head_sizes_; }
  int width() const { return width_; }
  int in_ch() const { return in_ch_; }

 private:
  std::vector<int> head_sizes_;
  int width_;
  int in_ch_;
  Net backbone_;
  std::vector<Linear> heads_;
  int last_n_ = 0;
};

/// Policy checkpoint: parameter blob + space signature (head sizes) + epoch.
/// Loading refuses a space-signature mismatch.
void save_policy_checkpoint(const std::string& path, const PolicyModel& model,
                            const std::vector<float>& params, int epoch,
                            const std::string& fingerprint);
struct PolicyCheckpoint {
  std::vector<int> head_sizes;
  int width = 0;
  int in_ch = 0;
  int epoch = 0;
  std::string fingerprint;
  std::vector<float> params;
};
PolicyCheckpoint load_policy_checkpoint(const std::string& path,
                                        const std::vector<int>& expect_head_sizes);

}  // namespace aroid
