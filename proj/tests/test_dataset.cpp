#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "aroid/dataset.hpp"
#include "aroid/errors.hpp"
#include "aroid/rng.hpp"

using namespace aroid;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("aroid_ds_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int counter;
};
int TempDir::counter = 0;

void write_cifar_file(const fs::path& p, int records, bool truncate = false) {
  std::ofstream os(p, std::ios::binary);
  for (int r = 0; r < records; ++r) {
    const unsigned char label = static_cast<unsigned char>(r % 10);
    os.put(static_cast<char>(label));
    for (int i = 0; i < 3072; ++i)
      os.put(static_cast<char>((r * 31 + i) % 256));
  }
  if (truncate) {
    os.put(5);
    for (int i = 0; i < 100; ++i) os.put(1);
  }
}

}  // namespace

TEST_CASE("synthetic datasets are reproducible and balanced") {
  const Dataset a = ingest_dataset("synthetic:7:1000");
  CHECK(a.size() == 1000);
  CHECK(a.classes == 10);
  CHECK(a.images[0].c == 3);
  CHECK(a.images[0].h == 32);
  CHECK(a.images[0].w == 32);
  for (size_t i = 0; i < a.size(); ++i)
    CHECK(a.labels[i] == static_cast<int>(i % 10));
  for (float v : a.images[17].v) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }

  const Dataset b = ingest_dataset("synthetic:7:1000");
  for (int i : {0, 99, 999}) CHECK(a.images[i].v == b.images[i].v);

  // prefix property: a longer generation starts with the shorter one
  const Dataset c = ingest_dataset("synthetic:7:1500");
  CHECK(c.images[999].v == a.images[999].v);

  const Dataset d = ingest_dataset("synthetic:8:100");
  CHECK(d.images[0].v != a.images[0].v);

  // pixels live on the 8-bit grid
  for (float v : a.images[3].v) {
    const float scaled = v * 255.0f;
    CHECK(scaled == doctest::Approx(std::round(scaled)).epsilon(1e-6));
  }
}

TEST_CASE("synthetic subsample keeps the prefix") {
  const Dataset full = ingest_dataset("synthetic:3:200");
  const Dataset sub = ingest_dataset("synthetic:3:200", "", 50);
  CHECK(sub.size() == 50);
  CHECK(sub.images[49].v == full.images[49].v);
}

TEST_CASE("cifar binary format roundtrip") {
  TempDir dir;
  for (int i = 1; i <= 5; ++i)
    write_cifar_file(dir.path / ("data_batch_" + std::to_string(i) + ".bin"), 4);
  write_cifar_file(dir.path / "test_batch.bin", 6);

  const Dataset train = ingest_dataset("cifar10-train:" + dir.path.string());
  CHECK(train.size() == 20);
  CHECK(train.images[0].h == 32);
  CHECK(train.images[0].c == 3);
  CHECK(train.labels[1] == 1);
  // first pixel of record 1 in file layout: byte value (31+0)%256 = 31
  CHECK(train.images[1].v[0] == doctest::Approx(31 / 255.0));

  const Dataset test = ingest_dataset("cifar10-test:" + dir.path.string());
  CHECK(test.size() == 6);

  // bare directory auto-detects the train layout
  const Dataset bare = ingest_dataset(dir.path.string());
  CHECK(bare.size() == 20);
}

TEST_CASE("truncated cifar file reports the byte offset and file") {
  TempDir dir;
  write_cifar_file(dir.path / "test_batch.bin", 2, /*truncate=*/true);
  try {
    ingest_dataset("cifar10-test:" + dir.path.string());
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("test_batch.bin") != std::string::npos);
    CHECK(msg.find("6146") != std::string::npos);  // 2 * 3073
  }
}

TEST_CASE("png folder layout with deterministic class order") {
  TempDir dir;
  Rng rng(5);
  for (const std::string cls : {"cat", "dog"}) {
    fs::create_directories(dir.path / cls);
    for (int i = 0; i < 3; ++i) {
      Image img(3, 16, 16);
      for (auto& v : img.v)
        v = static_cast<float>(std::lround(rng.uniform() * 255.0)) / 255.0f;
      write_png((dir.path / cls / (std::to_string(i) + ".png")).string(), img);
    }
  }
  const Dataset ds = ingest_dataset("folder:" + dir.path.string());
  CHECK(ds.size() == 6);
  CHECK(ds.classes == 2);
  // "cat" sorts before "dog"
  CHECK(ds.labels == std::vector<int>{0, 0, 0, 1, 1, 1});

  // roundtrip fidelity for 8-bit-grid pixels
  Image orig(3, 16, 16);
  Rng r2(9);
  for (auto& v : orig.v)
    v = static_cast<float>(std::lround(r2.uniform() * 255.0)) / 255.0f;
  const auto p = (dir.path / "cat" / "x.png").string();
  write_png(p, orig);
  const Image back = read_png(p);
  CHECK(back.v == orig.v);
}

TEST_CASE("data root resolves relative paths") {
  TempDir dir;
  fs::create_directories(dir.path / "sets" / "tiny");
  write_cifar_file(dir.path / "sets" / "tiny" / "test_batch.bin", 3);
  const Dataset ds = ingest_dataset("cifar10-test:sets/tiny", dir.path.string());
  CHECK(ds.size() == 3);
}

TEST_CASE("unknown spec and missing files raise ingest errors") {
  CHECK_THROWS_AS(ingest_dataset("nonsense:abc"), IngestError);
  CHECK_THROWS_AS(ingest_dataset("cifar10-train:/nonexistent_dir_xyz"),
                  IngestError);
}
