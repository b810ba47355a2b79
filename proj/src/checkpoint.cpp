#include "aroid/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "aroid/errors.hpp"

namespace aroid {

namespace {
constexpr char kMagic[8] = {'A', 'R', 'C', 'K', '1', '\n', 0, 0};

void write_str(std::ostream& os, const std::string& s) {
  const std::int32_t n = static_cast<std::int32_t>(s.size());
  os.write(reinterpret_cast<const char*>(&n), sizeof(n));
  os.write(s.data(), n);
}

std::string read_str(std::istream& is) {
  std::int32_t n = 0;
  is.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!is || n < 0 || n > (1 << 20)) throw Error("corrupt checkpoint string");
  std::string s(n, '\0');
  is.read(s.data(), n);
  return s;
}
}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write checkpoint: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_str(os, ck.kind);
  write_str(os, ck.model_spec);
  write_str(os, ck.fingerprint);
  write_str(os, ck.data_fingerprint);
  const std::int32_t epoch = ck.epoch;
  os.write(reinterpret_cast<const char*>(&epoch), sizeof(epoch));
  const std::int64_t n = static_cast<std::int64_t>(ck.params.size());
  os.write(reinterpret_cast<const char*>(&n), sizeof(n));
  os.write(reinterpret_cast<const char*>(ck.params.data()),
           static_cast<std::streamsize>(ck.params.size() * sizeof(float)));
  if (!os) throw Error("short write for checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw Error("not a checkpoint file: " + path);
  Checkpoint ck;
  ck.kind = read_str(is);
  ck.model_spec = read_str(is);
  ck.fingerprint = read_str(is);
  ck.data_fingerprint = read_str(is);
  std::int32_t epoch = 0;
  is.read(reinterpret_cast<char*>(&epoch), sizeof(epoch));
  ck.epoch = epoch;
  std::int64_t n = 0;
  is.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!is || n < 0) throw Error("corrupt checkpoint: " + path);
  ck.params.resize(n);
  is.read(reinterpret_cast<char*>(ck.params.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (!is) throw Error("truncated checkpoint: " + path);
  return ck;
}

}  // namespace aroid
