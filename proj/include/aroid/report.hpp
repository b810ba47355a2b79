#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "aroid/attacks.hpp"
#include "aroid/dataset.hpp"
#include "aroid/nn.hpp"
#include "aroid/trainer.hpp"

namespace aroid {

struct EvalResult {
  double clean_acc = 0.0;
  double robust_acc = 0.0;
};

/// Clean and PGD accuracy over a split (first `subset` items when subset > 0).
/// Never mutates model parameters.
EvalResult evaluate(Net& model, const Dataset& ds, const AttackConfig& attack,
                    Rng& rng, int batch_size = 128, int subset = 0);

/// One exported probability row. For the ColorShape head the magnitudes of
/// each operation are summed into one row per operation type; other heads
/// export one row per catalog entry.
struct PolicyDistRow {
  int epoch = 0;
  int image_id = 0;
  std::string head;
  std::string op_type;
  double probability = 0.0;
};

/// Evaluates logged policy snapshots on probe images. Rows are ordered by
/// (epoch, image_id, head index, catalog/type index) and per (epoch, image,
/// head) the probabilities sum to 1.
std::vector<PolicyDistRow> export_policy_distributions(
    const PolicyCheckpointLog& log, const AugmentationSpace& space,
    const std::vector<Image>& images, const std::vector<int>& epochs);

void write_policy_dist_csv(const std::vector<PolicyDistRow>& rows,
                           std::ostream& os);

/// Stacked-bar chart per head (one bar per exported epoch/image pair).
void write_policy_dist_svg(const std::vector<PolicyDistRow>& rows,
                           std::ostream& os);

}  // namespace aroid
