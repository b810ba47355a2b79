#pragma once

#include <vector>

#include "aroid/nn.hpp"
#include "aroid/rng.hpp"
#include "aroid/tensor.hpp"

namespace aroid {

/// L-inf PGD settings, in pixel units ([0,1] scale).
struct AttackConfig {
  double epsilon = 8.0 / 255.0;
  double step_size = 2.0 / 255.0;
  int steps = 10;
  bool random_start = false;
  /// When set, asserts the ball/range projection after every step.
  bool debug_projection = false;
};

/// Iterative sign-gradient ascent on cross-entropy, projected into the
/// eps-ball around x and into [0,1]. steps = 0 with no random start returns x
/// unchanged. Throws AttackError with diagnostics on non-finite loss.
Batch pgd(Net& model, const Batch& x, const std::vector<int>& labels,
          const AttackConfig& cfg, Rng& rng);

}  // namespace aroid
