#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

namespace aroid {

/// One image, CHW layout, float pixels in [0,1].
struct Image {
  int c = 0, h = 0, w = 0;
  std::vector<float> v;

  Image() = default;
  Image(int c_, int h_, int w_, float fill = 0.f)
      : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, fill) {}

  float& at(int ci, int y, int x) {
    return v[(static_cast<size_t>(ci) * h + y) * w + x];
  }
  float at(int ci, int y, int x) const {
    return v[(static_cast<size_t>(ci) * h + y) * w + x];
  }
  size_t size() const { return v.size(); }
};

/// A batch of activations / images, NCHW layout. Fully-connected activations
/// use c = features, h = w = 1.
struct Batch {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<float> v;

  Batch() = default;
  Batch(int n_, int c_, int h_, int w_, float fill = 0.f)
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {}

  size_t per_item() const { return static_cast<size_t>(c) * h * w; }
  size_t size() const { return v.size(); }

  float* item(int i) { return v.data() + per_item() * i; }
  const float* item(int i) const { return v.data() + per_item() * i; }

  float& at(int i, int ci, int y, int x) {
    return v[((static_cast<size_t>(i) * c + ci) * h + y) * w + x];
  }
  float at(int i, int ci, int y, int x) const {
    return v[((static_cast<size_t>(i) * c + ci) * h + y) * w + x];
  }

  bool same_shape(const Batch& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  Image image(int i) const {
    Image im(c, h, w);
    const float* p = item(i);
    std::copy(p, p + per_item(), im.v.begin());
    return im;
  }

  void set_image(int i, const Image& im) {
    assert(im.c == c && im.h == h && im.w == w);
    std::copy(im.v.begin(), im.v.end(), item(i));
  }
};

/// Assembles a batch from images (all images must share one shape).
Batch make_batch(const std::vector<Image>& images, const std::vector<int>& idx);
Batch make_batch(const std::vector<Image>& images, size_t begin, size_t end);

/// FNV-1a over raw float bytes; used for stop-gradient checks.
std::uint64_t checksum(const std::vector<float>& v);

}  // namespace aroid
