#pragma once

#include <string>
#include <vector>

namespace aroid {

/// Model parameter blob with enough metadata to refuse mismatched reuse.
struct Checkpoint {
  std::string kind;              // "target" | "affinity"
  std::string model_spec;        // e.g. "cnn:16"
  std::string fingerprint;       // full config fingerprint
  std::string data_fingerprint;  // data+model+space+seed subset
  int epoch = 0;
  std::vector<float> params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace aroid
