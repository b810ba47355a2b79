#include "aroid/augspace.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "aroid/errors.hpp"

namespace aroid {

const char* aug_op_name(AugOp op) {
  switch (op) {
    case AugOp::Identity: return "Identity";
    case AugOp::HorizontalFlip: return "HorizontalFlip";
    case AugOp::Cropshift: return "Cropshift";
    case AugOp::Autocontrast: return "Autocontrast";
    case AugOp::Equalize: return "Equalize";
    case AugOp::Posterize: return "Posterize";
    case AugOp::Solarize: return "Solarize";
    case AugOp::Rotate: return "Rotate";
    case AugOp::ShearX: return "ShearX";
    case AugOp::ShearY: return "ShearY";
    case AugOp::TranslateX: return "TranslateX";
    case AugOp::TranslateY: return "TranslateY";
    case AugOp::Color: return "Color";
    case AugOp::Contrast: return "Contrast";
    case AugOp::Brightness: return "Brightness";
    case AugOp::Sharpness: return "Sharpness";
    case AugOp::Erasing: return "Erasing";
  }
  return "?";
}

std::string SubPolicy::label() const {
  if (!has_magnitude) return aug_op_name(op);
  std::ostringstream s;
  s << aug_op_name(op) << '(' << magnitude << ')';
  return s.str();
}

namespace {

std::vector<double> linspace_mags(double lo, double hi, int n) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * i / (n - 1);
  return out;
}

void push_group(Head& head, const std::string& name, AugOp op,
                const std::vector<double>& mags) {
  OpGroup g{name, {}};
  if (mags.empty()) {
    g.indices.push_back(head.size());
    head.entries.push_back({op, 0.0, false});
  } else {
    for (double m : mags) {
      g.indices.push_back(head.size());
      head.entries.push_back({op, m, true});
    }
  }
  head.groups.push_back(std::move(g));
}

Head build_flip_head() {
  Head h{"Flip", HeadKind::Flip, {}, {}};
  push_group(h, "Identity", AugOp::Identity, {});
  push_group(h, "HorizontalFlip", AugOp::HorizontalFlip, {});
  return h;
}

Head build_crop_head() {
  Head h{"Crop", HeadKind::Crop, {}, {}};
  push_group(h, "Identity", AugOp::Identity, {});
  std::vector<double> mags;
  for (int m = 1; m <= 15; ++m) mags.push_back(m);
  push_group(h, "Cropshift", AugOp::Cropshift, mags);
  return h;
}

Head build_colorshape_head() {
  Head h{"ColorShape", HeadKind::ColorShape, {}, {}};
  push_group(h, "Identity", AugOp::Identity, {});
  push_group(h, "Autocontrast", AugOp::Autocontrast, {});
  push_group(h, "Equalize", AugOp::Equalize, {});
  push_group(h, "Posterize", AugOp::Posterize, {4, 5, 6, 7, 8});
  push_group(h, "Solarize", AugOp::Solarize,
             {25, 51, 76, 102, 128, 153, 179, 204, 230, 256});
  push_group(h, "Rotate", AugOp::Rotate, {3, 6, 9, 12, 15, 18, 21, 24, 27, 30});
  const auto shear = linspace_mags(0.03, 0.30, 10);
  push_group(h, "ShearX", AugOp::ShearX, shear);
  push_group(h, "ShearY", AugOp::ShearY, shear);
  const auto trans = linspace_mags(1, 10, 10);
  push_group(h, "TranslateX", AugOp::TranslateX, trans);
  push_group(h, "TranslateY", AugOp::TranslateY, trans);
  const auto enhance = linspace_mags(0.28, 1.90, 10);
  push_group(h, "Color", AugOp::Color, enhance);
  push_group(h, "Contrast", AugOp::Contrast, enhance);
  push_group(h, "Brightness", AugOp::Brightness, enhance);
  push_group(h, "Sharpness", AugOp::Sharpness, enhance);
  return h;
}

Head build_dropout_head() {
  Head h{"Dropout", HeadKind::Dropout, {}, {}};
  push_group(h, "Identity", AugOp::Identity, {});
  push_group(h, "Erasing", AugOp::Erasing, linspace_mags(0.05, 0.50, 10));
  return h;
}

}  // namespace

AugmentationSpace build_space(SpaceKind kind) {
  AugmentationSpace s;
  s.kind = kind;
  if (kind == SpaceKind::standard) s.heads.push_back(build_flip_head());
  s.heads.push_back(build_crop_head());
  s.heads.push_back(build_colorshape_head());
  s.heads.push_back(build_dropout_head());
  return s;
}

SpaceKind space_kind_from_string(const std::string& s) {
  if (s == "standard") return SpaceKind::standard;
  if (s == "no_flip") return SpaceKind::no_flip;
  throw ConfigError("unknown space kind '" + s + "' (expected standard|no_flip)");
}

const char* space_kind_name(SpaceKind kind) {
  return kind == SpaceKind::standard ? "standard" : "no_flip";
}

std::vector<int> AugmentationSpace::head_sizes() const {
  std::vector<int> out;
  out.reserve(heads.size());
  for (const auto& h : heads) out.push_back(h.size());
  return out;
}

std::string AugmentationSpace::describe() const {
  std::ostringstream s;
  for (const auto& h : heads) {
    for (int i = 0; i < h.size(); ++i) {
      const auto& sp = h.entries[i];
      s << h.name << '\t' << aug_op_name(sp.op) << '\t';
      if (sp.has_magnitude) {
        s << sp.magnitude;
      } else {
        s << '-';
      }
      s << '\t' << i << '\n';
    }
  }
  return s.str();
}

void AugmentationSpace::validate_code(const TrajectoryCode& code) const {
  if (static_cast<int>(code.idx.size()) != head_count()) {
    throw CatalogError("trajectory code has " + std::to_string(code.idx.size()) +
                       " indices for a " + std::to_string(head_count()) +
                       "-head space");
  }
  for (int h = 0; h < head_count(); ++h) {
    if (code.idx[h] < 0 || code.idx[h] >= heads[h].size()) {
      throw CatalogError("sub-policy index " + std::to_string(code.idx[h]) +
                         " out of range for head " + heads[h].name + " (size " +
                         std::to_string(heads[h].size()) + ")");
    }
  }
}

// ---------------------------------------------------------------------------
// Pixel ops. Images are floats in [0,1]; ops with 8-bit semantics quantize to
// 0..255, operate, and dequantize, so 8-bit-quantized inputs round-trip
// exactly.
// ---------------------------------------------------------------------------

namespace {

inline int to_u8(float v) {
  const int k = static_cast<int>(std::lround(v * 255.0f));
  return std::clamp(k, 0, 255);
}

inline float from_u8(int k) { return static_cast<float>(k) / 255.0f; }

inline float clamp01(float v) { return std::clamp(v, 0.0f, 1.0f); }

Image horizontal_flip(const Image& img) {
  Image out(img.c, img.h, img.w);
  for (int c = 0; c < img.c; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x)
        out.at(c, y, x) = img.at(c, y, img.w - 1 - x);
  return out;
}

// Zero-pad by m on every side, then crop an HxW window whose offset from
// center satisfies |dx|+|dy| = m, uniform over the 4m integer pairs.
Image cropshift(const Image& img, int m, Rng& rng) {
  const int total = 4 * m;
  int pick = static_cast<int>(rng.below(total));
  int dx = 0, dy = 0;
  for (int cx = -m; cx <= m; ++cx) {
    const int span = m - std::abs(cx);
    const int count = span == 0 ? 1 : 2;
    if (pick < count) {
      dx = cx;
      dy = (pick == 0) ? span : -span;
      break;
    }
    pick -= count;
  }
  Image out(img.c, img.h, img.w);
  for (int c = 0; c < img.c; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) {
        const int sy = y + dy;
        const int sx = x + dx;
        out.at(c, y, x) = (sy >= 0 && sy < img.h && sx >= 0 && sx < img.w)
                              ? img.at(c, sy, sx)
                              : 0.0f;
      }
  return out;
}

Image autocontrast(const Image& img) {
  Image out(img.c, img.h, img.w);
  for (int c = 0; c < img.c; ++c) {
    int lo = 255, hi = 0;
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) {
        const int k = to_u8(img.at(c, y, x));
        lo = std::min(lo, k);
        hi = std::max(hi, k);
      }
    if (hi <= lo) {
      for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
          out.at(c, y, x) = from_u8(to_u8(img.at(c, y, x)));
      continue;
    }
    const double scale = 255.0 / (hi - lo);
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) {
        const int k = to_u8(img.at(c, y, x));
        const int r = std::clamp(
            static_cast<int>(std::lround((k - lo) * scale)), 0, 255);
        out.at(c, y, x) = from_u8(r);
      }
  }
  return out;
}

// Classic per-channel histogram equalization (PIL-style LUT with the
// half-step initial offset).
Image equalize(const Image& img) {
  Image out(img.c, img.h, img.w);
  for (int c = 0; c < img.c; ++c) {
    std::array<long, 256> hist{};
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) hist[to_u8(img.at(c, y, x))]++;
    long total = 0;
    int last_nonzero = -1;
    for (int i = 0; i < 256; ++i) {
      total += hist[i];
      if (hist[i]) last_nonzero = i;
    }
    std::array<int, 256> lut;
    const long step = (last_nonzero < 0 ? 0 : (total - hist[last_nonzero]) / 255);
    if (step == 0) {
      for (int i = 0; i < 256; ++i) lut[i] = i;
    } else {
      long n = step / 2;
      for (int i = 0; i < 256; ++i) {
        lut[i] = static_cast<int>(std::clamp(n / step, 0l, 255l));
        n += hist[i];
      }
    }
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x)
        out.at(c, y, x) = from_u8(lut[to_u8(img.at(c, y, x))]);
  }
  return out;
}

Image posterize(const Image& img, int bits) {
  const int mask = 0xFF & ~((1 << (8 - bits)) - 1);
  Image out(img.c, img.h, img.w);
  for (size_t i = 0; i < img.size(); ++i)
    out.v[i] = from_u8(to_u8(img.v[i]) & mask);
  return out;
}

Image solarize(const Image& img, int threshold) {
  Image out(img.c, img.h, img.w);
  for (size_t i = 0; i < img.size(); ++i) {
    const int k = to_u8(img.v[i]);
    out.v[i] = from_u8(k >= threshold ? 255 - k : k);
  }
  return out;
}

// Inverse-mapped affine transform about the image center, bilinear sampling,
// out-of-bounds reads fill with 0.
Image affine(const Image& img, double m00, double m01, double m10, double m11,
             double tx, double ty) {
  Image out(img.c, img.h, img.w);
  const double cx = (img.w - 1) / 2.0;
  const double cy = (img.h - 1) / 2.0;
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      const double rx = x - cx - tx;
      const double ry = y - cy - ty;
      const double sx = m00 * rx + m01 * ry + cx;
      const double sy = m10 * rx + m11 * ry + cy;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0;
      const double fy = sy - y0;
      for (int c = 0; c < img.c; ++c) {
        auto tap = [&](int yy, int xx) -> double {
          return (yy >= 0 && yy < img.h && xx >= 0 && xx < img.w)
                     ? img.at(c, yy, xx)
                     : 0.0;
        };
        const double val = (1 - fy) * ((1 - fx) * tap(y0, x0) + fx * tap(y0, x0 + 1)) +
                           fy * ((1 - fx) * tap(y0 + 1, x0) + fx * tap(y0 + 1, x0 + 1));
        out.at(c, y, x) = clamp01(static_cast<float>(val));
      }
    }
  return out;
}

Image rotate(const Image& img, double degrees) {
  const double a = degrees * M_PI / 180.0;
  // inverse rotation
  return affine(img, std::cos(a), std::sin(a), -std::sin(a), std::cos(a), 0, 0);
}

Image shear_x(const Image& img, double s) {
  return affine(img, 1.0, s, 0.0, 1.0, 0, 0);
}

Image shear_y(const Image& img, double s) {
  return affine(img, 1.0, 0.0, s, 1.0, 0, 0);
}

Image translate(const Image& img, int dx, int dy) {
  Image out(img.c, img.h, img.w);
  for (int c = 0; c < img.c; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) {
        const int sx = x - dx;
        const int sy = y - dy;
        out.at(c, y, x) = (sy >= 0 && sy < img.h && sx >= 0 && sx < img.w)
                              ? img.at(c, sy, sx)
                              : 0.0f;
      }
  return out;
}

// Luminance (ITU-R 601), identical to the usual L-mode conversion.
inline double luminance(const Image& img, int y, int x) {
  if (img.c == 1) return img.at(0, y, x);
  return 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) +
         0.114 * img.at(2, y, x);
}

// out = degenerate + f * (img - degenerate); f = 1 is the identity.
Image blend_from(const Image& img, double f,
                 const std::vector<float>& degenerate) {
  Image out(img.c, img.h, img.w);
  for (size_t i = 0; i < img.size(); ++i)
    out.v[i] = clamp01(static_cast<float>(degenerate[i] + f * (img.v[i] - degenerate[i])));
  return out;
}

Image color_enhance(const Image& img, double f) {
  if (img.c == 1) return img;
  std::vector<float> gray(img.size());
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      const float g = static_cast<float>(luminance(img, y, x));
      for (int c = 0; c < img.c; ++c)
        gray[(static_cast<size_t>(c) * img.h + y) * img.w + x] = g;
    }
  return blend_from(img, f, gray);
}

Image contrast_enhance(const Image& img, double f) {
  double mean = 0.0;
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) mean += luminance(img, y, x);
  mean /= static_cast<double>(img.h) * img.w;
  std::vector<float> flat(img.size(), static_cast<float>(mean));
  return blend_from(img, f, flat);
}

Image brightness_enhance(const Image& img, double f) {
  std::vector<float> black(img.size(), 0.0f);
  return blend_from(img, f, black);
}

// Smoothing kernel [[1,1,1],[1,5,1],[1,1,1]]/13 on the interior; the 1-pixel
// border keeps the original values, so the blend is the identity there.
Image sharpness_enhance(const Image& img, double f) {
  std::vector<float> smooth(img.v.begin(), img.v.end());
  if (img.h > 2 && img.w > 2) {
    for (int c = 0; c < img.c; ++c)
      for (int y = 1; y < img.h - 1; ++y)
        for (int x = 1; x < img.w - 1; ++x) {
          double acc = 0.0;
          for (int ky = -1; ky <= 1; ++ky)
            for (int kx = -1; kx <= 1; ++kx)
              acc += (ky == 0 && kx == 0 ? 5.0 : 1.0) * img.at(c, y + ky, x + kx);
          smooth[(static_cast<size_t>(c) * img.h + y) * img.w + x] =
              static_cast<float>(acc / 13.0);
        }
  }
  return blend_from(img, f, smooth);
}

// Random Erasing: erase a box of roughly scale*H*W pixels with aspect ratio
// drawn from (0.3, 3.3); every erased element gets an independent uniform
// value in [0,1].
Image erasing(const Image& img, double scale, Rng& rng) {
  const double area = scale * img.h * img.w;
  int eh = 0, ew = 0;
  for (int tries = 0; tries < 100; ++tries) {
    const double ratio = rng.uniform(0.3, 3.3);
    eh = static_cast<int>(std::lround(std::sqrt(area * ratio)));
    ew = static_cast<int>(std::lround(std::sqrt(area / ratio)));
    if (eh >= 1 && ew >= 1 && eh <= img.h && ew <= img.w) break;
    eh = ew = 0;
  }
  if (eh == 0) {
    eh = std::clamp(static_cast<int>(std::lround(std::sqrt(area))), 1, img.h);
    ew = std::clamp(static_cast<int>(std::lround(area / eh)), 1, img.w);
  }
  const int y0 = static_cast<int>(rng.below(img.h - eh + 1));
  const int x0 = static_cast<int>(rng.below(img.w - ew + 1));
  Image out = img;
  for (int c = 0; c < img.c; ++c)
    for (int y = y0; y < y0 + eh; ++y)
      for (int x = x0; x < x0 + ew; ++x)
        out.at(c, y, x) = static_cast<float>(rng.uniform());
  return out;
}

}  // namespace

Image apply_subpolicy(const Image& img, const SubPolicy& sp, Rng& rng) {
  switch (sp.op) {
    case AugOp::Identity:
      return img;
    case AugOp::HorizontalFlip:
      return horizontal_flip(img);
    case AugOp::Cropshift:
      return cropshift(img, static_cast<int>(sp.magnitude), rng);
    case AugOp::Autocontrast:
      return autocontrast(img);
    case AugOp::Equalize:
      return equalize(img);
    case AugOp::Posterize:
      return posterize(img, static_cast<int>(sp.magnitude));
    case AugOp::Solarize:
      return solarize(img, static_cast<int>(sp.magnitude));
    case AugOp::Rotate:
      return rotate(img, rng.sign() * sp.magnitude);
    case AugOp::ShearX:
      return shear_x(img, rng.sign() * sp.magnitude);
    case AugOp::ShearY:
      return shear_y(img, rng.sign() * sp.magnitude);
    case AugOp::TranslateX:
      return translate(img, static_cast<int>(rng.sign() * sp.magnitude), 0);
    case AugOp::TranslateY:
      return translate(img, 0, static_cast<int>(rng.sign() * sp.magnitude));
    case AugOp::Color:
      return color_enhance(img, sp.magnitude);
    case AugOp::Contrast:
      return contrast_enhance(img, sp.magnitude);
    case AugOp::Brightness:
      return brightness_enhance(img, sp.magnitude);
    case AugOp::Sharpness:
      return sharpness_enhance(img, sp.magnitude);
    case AugOp::Erasing:
      return erasing(img, sp.magnitude, rng);
  }
  throw CatalogError("unknown augmentation op id " +
                     std::to_string(static_cast<int>(sp.op)));
}

Image apply_trajectory(const Image& img, const TrajectoryCode& code,
                       const AugmentationSpace& space, Rng& rng) {
  space.validate_code(code);
  Image cur = img;
  for (int h = 0; h < space.head_count(); ++h)
    cur = apply_subpolicy(cur, space.heads[h].entries[code.idx[h]], rng);
  return cur;
}

}  // namespace aroid
