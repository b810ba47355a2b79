#pragma once

#include <string>
#include <vector>

#include "aroid/rng.hpp"
#include "aroid/tensor.hpp"

namespace aroid {

enum class AugOp {
  Identity,
  HorizontalFlip,
  Cropshift,
  Autocontrast,
  Equalize,
  Posterize,
  Solarize,
  Rotate,
  ShearX,
  ShearY,
  TranslateX,
  TranslateY,
  Color,
  Contrast,
  Brightness,
  Sharpness,
  Erasing,
};

const char* aug_op_name(AugOp op);

/// One catalog entry: an operation plus its magnitude (if any).
struct SubPolicy {
  AugOp op = AugOp::Identity;
  double magnitude = 0.0;
  bool has_magnitude = false;

  std::string label() const;
};

enum class HeadKind { Flip, Crop, ColorShape, Dropout };

/// Logit indices of one operation type inside a head. For the ColorShape head
/// this groups the magnitudes of each operation; the hierarchical Diversity
/// regularizer and the policy visualizations aggregate over these groups.
struct OpGroup {
  std::string name;
  std::vector<int> indices;
};

struct Head {
  std::string name;
  HeadKind kind;
  std::vector<SubPolicy> entries;
  std::vector<OpGroup> groups;

  int size() const { return static_cast<int>(entries.size()); }
};

/// One sampled sub-policy index per head.
struct TrajectoryCode {
  std::vector<int> idx;

  bool operator==(const TrajectoryCode&) const = default;
};

enum class SpaceKind { standard, no_flip };

/// The augmentation search space: ordered heads (Flip, Crop, ColorShape,
/// Dropout), each a list of (operation, magnitude) sub-policies with exactly
/// one Identity entry. The no_flip variant drops the Flip head.
struct AugmentationSpace {
  SpaceKind kind = SpaceKind::standard;
  std::vector<Head> heads;

  int head_count() const { return static_cast<int>(heads.size()); }
  std::vector<int> head_sizes() const;
  /// Human-readable catalog, one line per sub-policy:
  /// "<head>\t<op>\t<magnitude>\t<logit index>".
  std::string describe() const;
  void validate_code(const TrajectoryCode& code) const;
};

AugmentationSpace build_space(SpaceKind kind);
SpaceKind space_kind_from_string(const std::string& s);
const char* space_kind_name(SpaceKind kind);

/// Applies one sub-policy to an image. The input is never mutated; output
/// shape equals input shape and pixels stay in [0,1]. rng feeds the stochastic
/// ops (Cropshift offset, Erasing placement/fill, sign of signed magnitudes).
Image apply_subpolicy(const Image& img, const SubPolicy& sp, Rng& rng);

/// Applies one sub-policy per head, in catalog head order.
Image apply_trajectory(const Image& img, const TrajectoryCode& code,
                       const AugmentationSpace& space, Rng& rng);

}  // namespace aroid
