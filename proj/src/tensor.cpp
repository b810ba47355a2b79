#include "aroid/tensor.hpp"

#include "aroid/errors.hpp"

namespace aroid {

Batch make_batch(const std::vector<Image>& images, const std::vector<int>& idx) {
  if (idx.empty()) throw Error("empty batch");
  const Image& first = images[idx[0]];
  Batch b(static_cast<int>(idx.size()), first.c, first.h, first.w);
  for (size_t i = 0; i < idx.size(); ++i) {
    const Image& im = images[idx[i]];
    if (im.c != first.c || im.h != first.h || im.w != first.w)
      throw Error("images in a batch must share one shape");
    b.set_image(static_cast<int>(i), im);
  }
  return b;
}

Batch make_batch(const std::vector<Image>& images, size_t begin, size_t end) {
  std::vector<int> idx;
  idx.reserve(end - begin);
  for (size_t i = begin; i < end; ++i) idx.push_back(static_cast<int>(i));
  return make_batch(images, idx);
}

std::uint64_t checksum(const std::vector<float>& v) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
  for (size_t i = 0; i < v.size() * sizeof(float); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace aroid
