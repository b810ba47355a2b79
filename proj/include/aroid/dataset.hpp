#pragma once

#include <string>
#include <vector>

#include "aroid/tensor.hpp"

namespace aroid {

struct Dataset {
  std::vector<Image> images;
  std::vector<int> labels;
  int classes = 10;
  std::string source;

  size_t size() const { return images.size(); }
};

/// Loads a dataset split. Accepted specs:
///   cifar10-train:<dir>   CIFAR-10 binary batches data_batch_1..5.bin
///   cifar10-test:<dir>    CIFAR-10 binary test_batch.bin
///   folder:<dir>          class subdirectories of PNG files
///   synthetic:<seed>:<n>  procedurally generated labeled shapes, 10 classes
/// A bare directory path is probed for the CIFAR layout, then for the folder
/// layout. Relative paths resolve against data_root when it is set. subsample
/// keeps the first N items (0 = all). Ordering is deterministic.
Dataset ingest_dataset(const std::string& spec, const std::string& data_root = "",
                       int subsample = 0);

/// The synthetic generator behind synthetic:<seed>:<n>.
Dataset make_synthetic(std::uint64_t seed, int n);

// PNG helpers (8-bit gray/RGB/RGBA in, RGB out).
Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& img);

}  // namespace aroid
