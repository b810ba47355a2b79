#include "aroid/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "aroid/errors.hpp"
#include "aroid/rng.hpp"

namespace fs = std::filesystem;

namespace aroid {

namespace {

constexpr int kCifarDim = 32;
constexpr size_t kCifarRecord = 1 + 3 * kCifarDim * kCifarDim;  // 3073 bytes

void read_cifar_file(const std::string& path, Dataset& ds) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) throw IngestError("cannot open " + path);
  const std::streamoff size = is.tellg();
  is.seekg(0);
  if (size % static_cast<std::streamoff>(kCifarRecord) != 0) {
    const std::streamoff offset =
        size - size % static_cast<std::streamoff>(kCifarRecord);
    throw IngestError(path + ": truncated record at byte offset " +
                      std::to_string(offset) + " (file size " +
                      std::to_string(size) + ", record size " +
                      std::to_string(kCifarRecord) + ")");
  }
  std::vector<unsigned char> rec(kCifarRecord);
  const size_t count = static_cast<size_t>(size) / kCifarRecord;
  for (size_t r = 0; r < count; ++r) {
    is.read(reinterpret_cast<char*>(rec.data()), kCifarRecord);
    if (!is)
      throw IngestError(path + ": read failed at byte offset " +
                        std::to_string(r * kCifarRecord));
    const int label = rec[0];
    if (label > 9)
      throw IngestError(path + ": invalid label " + std::to_string(label) +
                        " at byte offset " + std::to_string(r * kCifarRecord));
    Image img(3, kCifarDim, kCifarDim);
    for (size_t i = 0; i < 3 * kCifarDim * kCifarDim; ++i)
      img.v[i] = rec[1 + i] / 255.0f;  // file layout is already CHW
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
  }
}

Dataset load_cifar(const std::string& dir, bool train) {
  Dataset ds;
  ds.classes = 10;
  ds.source = (train ? "cifar10-train:" : "cifar10-test:") + dir;
  if (train) {
    for (int i = 1; i <= 5; ++i)
      read_cifar_file(dir + "/data_batch_" + std::to_string(i) + ".bin", ds);
  } else {
    read_cifar_file(dir + "/test_batch.bin", ds);
  }
  return ds;
}

Dataset load_folder(const std::string& dir) {
  Dataset ds;
  ds.source = "folder:" + dir;
  std::vector<std::string> class_dirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) class_dirs.push_back(e.path().filename().string());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty())
    throw IngestError("no class subdirectories under " + dir);
  ds.classes = static_cast<int>(class_dirs.size());
  for (size_t label = 0; label < class_dirs.size(); ++label) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir + "/" + class_dirs[label]))
      if (e.is_regular_file() && e.path().extension() == ".png")
        files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      Image img = read_png(f);
      if (!ds.images.empty() &&
          (img.h != ds.images[0].h || img.w != ds.images[0].w))
        throw IngestError("image size mismatch in " + f);
      ds.images.push_back(std::move(img));
      ds.labels.push_back(static_cast<int>(label));
    }
  }
  if (ds.images.empty()) throw IngestError("no PNG files under " + dir);
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic labeled shapes: 10 classes of 32x32 RGB images with randomized
// colors, positions, sizes and pixel noise, quantized to the 8-bit grid.
// ---------------------------------------------------------------------------

void fill_bg(Image& img, float r, float g, float b) {
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      img.at(0, y, x) = r;
      img.at(1, y, x) = g;
      img.at(2, y, x) = b;
    }
}

void put(Image& img, int y, int x, float r, float g, float b) {
  if (y < 0 || y >= img.h || x < 0 || x >= img.w) return;
  img.at(0, y, x) = r;
  img.at(1, y, x) = g;
  img.at(2, y, x) = b;
}

Image synth_image(int cls, Rng& rng) {
  Image img(3, 32, 32);
  float bg[3], fg[3];
  for (;;) {
    float dist = 0.f;
    for (int c = 0; c < 3; ++c) {
      bg[c] = static_cast<float>(rng.uniform(0.05, 0.95));
      fg[c] = static_cast<float>(rng.uniform(0.05, 0.95));
      dist += std::abs(bg[c] - fg[c]);
    }
    if (dist > 0.9f) break;
  }
  fill_bg(img, bg[0], bg[1], bg[2]);

  const int cx = 15 + rng.range_int(-5, 5);
  const int cy = 15 + rng.range_int(-5, 5);
  const int r = rng.range_int(5, 11);
  auto fg_put = [&](int y, int x) { put(img, y, x, fg[0], fg[1], fg[2]); };

  switch (cls) {
    case 0:  // filled disc
      for (int y = -r; y <= r; ++y)
        for (int x = -r; x <= r; ++x)
          if (y * y + x * x <= r * r) fg_put(cy + y, cx + x);
      break;
    case 1: {  // ring
      const int inner = std::max(1, r - rng.range_int(2, 3));
      for (int y = -r; y <= r; ++y)
        for (int x = -r; x <= r; ++x) {
          const int d2 = y * y + x * x;
          if (d2 <= r * r && d2 >= inner * inner) fg_put(cy + y, cx + x);
        }
      break;
    }
    case 2:  // filled square
      for (int y = -r; y <= r; ++y)
        for (int x = -r; x <= r; ++x) fg_put(cy + y, cx + x);
      break;
    case 3: {  // square outline
      const int t = rng.range_int(2, 3);
      for (int y = -r; y <= r; ++y)
        for (int x = -r; x <= r; ++x)
          if (std::abs(y) > r - t || std::abs(x) > r - t) fg_put(cy + y, cx + x);
      break;
    }
    case 4:  // filled triangle
      for (int y = -r; y <= r; ++y) {
        const int half = ((y + r) * r) / (2 * r);
        for (int x = -half; x <= half; ++x) fg_put(cy + y, cx + x);
      }
      break;
    case 5: {  // plus
      const int t = rng.range_int(1, 2);
      for (int y = -r; y <= r; ++y)
        for (int x = -t; x <= t; ++x) fg_put(cy + y, cx + x);
      for (int x = -r; x <= r; ++x)
        for (int y = -t; y <= t; ++y) fg_put(cy + y, cx + x);
      break;
    }
    case 6: {  // X cross
      const int t = rng.range_int(1, 2);
      for (int d = -r; d <= r; ++d)
        for (int o = -t; o <= t; ++o) {
          fg_put(cy + d + o, cx + d);
          fg_put(cy + d + o, cx - d);
        }
      break;
    }
    case 7: {  // horizontal stripes
      const int period = rng.range_int(4, 8);
      const int phase = rng.range_int(0, period - 1);
      for (int y = 0; y < 32; ++y)
        if (((y + phase) / (period / 2)) % 2 == 0)
          for (int x = 0; x < 32; ++x) fg_put(y, x);
      break;
    }
    case 8: {  // vertical stripes
      const int period = rng.range_int(4, 8);
      const int phase = rng.range_int(0, period - 1);
      for (int x = 0; x < 32; ++x)
        if (((x + phase) / (period / 2)) % 2 == 0)
          for (int y = 0; y < 32; ++y) fg_put(y, x);
      break;
    }
    case 9:  // filled diamond
      for (int y = -r; y <= r; ++y)
        for (int x = -r; x <= r; ++x)
          if (std::abs(x) + std::abs(y) <= r) fg_put(cy + y, cx + x);
      break;
    default:
      throw Error("synthetic class out of range");
  }

  // pixel noise, then quantize to the 8-bit grid like a decoded image
  for (auto& v : img.v) {
    v += static_cast<float>(rng.normal() * 0.06);
    const int k = std::clamp(static_cast<int>(std::lround(v * 255.0f)), 0, 255);
    v = k / 255.0f;
  }
  return img;
}

}  // namespace

Dataset make_synthetic(std::uint64_t seed, int n) {
  Dataset ds;
  ds.classes = 10;
  ds.source = "synthetic:" + std::to_string(seed) + ":" + std::to_string(n);
  Rng rng(fnv1a("synthetic", seed ^ 0x5851f42d4c957f2dull));
  ds.images.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int cls = i % 10;
    ds.images.push_back(synth_image(cls, rng));
    ds.labels.push_back(cls);
  }
  return ds;
}

Dataset ingest_dataset(const std::string& spec, const std::string& data_root,
                       int subsample) {
  auto resolve = [&](const std::string& p) {
    if (!data_root.empty() && !p.empty() && p[0] != '/')
      return data_root + "/" + p;
    return p;
  };

  Dataset ds;
  if (spec.rfind("synthetic:", 0) == 0) {
    const auto rest = spec.substr(10);
    const auto colon = rest.find(':');
    if (colon == std::string::npos)
      throw IngestError("bad synthetic spec '" + spec +
                        "' (expected synthetic:<seed>:<n>)");
    ds = make_synthetic(std::stoull(rest.substr(0, colon)),
                        std::stoi(rest.substr(colon + 1)));
  } else if (spec.rfind("cifar10-train:", 0) == 0) {
    ds = load_cifar(resolve(spec.substr(14)), true);
  } else if (spec.rfind("cifar10-test:", 0) == 0) {
    ds = load_cifar(resolve(spec.substr(13)), false);
  } else if (spec.rfind("folder:", 0) == 0) {
    ds = load_folder(resolve(spec.substr(7)));
  } else {
    const std::string dir = resolve(spec);
    if (!fs::is_directory(dir))
      throw IngestError("dataset spec '" + spec + "' is not a directory; "
                        "expected synthetic:<seed>:<n>, cifar10-train:<dir>, "
                        "cifar10-test:<dir> or folder:<dir>");
    if (fs::exists(dir + "/data_batch_1.bin")) {
      ds = load_cifar(dir, true);
    } else if (fs::exists(dir + "/test_batch.bin")) {
      ds = load_cifar(dir, false);
    } else {
      ds = load_folder(dir);
    }
  }
  if (subsample > 0 && static_cast<size_t>(subsample) < ds.images.size()) {
    ds.images.resize(subsample);
    ds.labels.resize(subsample);
  }
  return ds;
}

}  // namespace aroid
