#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "patchprint/checkpoint.hpp"
#include "patchprint/errors.hpp"

using namespace patchprint;

namespace {

std::string tmp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

Checkpoint sample_checkpoint() {
  Checkpoint ck;
  ck.meta["mode"] = "ssp";
  ck.meta["seed"] = "42";
  ck.meta["alpha"] = "first";  // map keeps keys sorted on save
  TensorEntry w;
  w.shape = {2, 3};
  w.data = {1.5f, -2.25f, 0.0f, 3.0f, -0.125f, 7.0f};
  ck.entries.emplace_back("layer.w", w);
  TensorEntry b;
  b.shape = {3};
  b.data = {0.1f, 0.2f, 0.3f};
  ck.entries.emplace_back("layer.b", b);
  return ck;
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void spit(const std::string& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("checkpoint round trip is exact") {
  const std::string path = tmp_path("pp_ck.bin");
  const Checkpoint ck = sample_checkpoint();
  save_checkpoint(ck, path);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.meta == ck.meta);
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[0].first == "layer.w");  // registration order preserved
  CHECK(back.entries[1].first == "layer.b");
  CHECK(back.entries[0].second.shape == ck.entries[0].second.shape);
  for (size_t i = 0; i < 6; ++i)
    CHECK(back.entries[0].second.data[i] == ck.entries[0].second.data[i]);
  CHECK(back.find("layer.b") != nullptr);
  CHECK(back.find("missing") == nullptr);
  CHECK(back.meta_or("seed", "0") == "42");
  CHECK(back.meta_or("nope", "fallback") == "fallback");

  // identical state, identical bytes
  const std::string path2 = tmp_path("pp_ck2.bin");
  save_checkpoint(ck, path2);
  CHECK(slurp(path) == slurp(path2));
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("header begins with magic and version") {
  const std::string path = tmp_path("pp_ck3.bin");
  save_checkpoint(sample_checkpoint(), path);
  const std::string bytes = slurp(path);
  REQUIRE(bytes.size() > 8);
  CHECK(bytes.substr(0, 4) == "SSPC");
  CHECK(bytes[4] == 1);  // little-endian u32 version 1
  CHECK(bytes[5] == 0);
  std::remove(path.c_str());
}

TEST_CASE("malformed files are rejected") {
  const std::string path = tmp_path("pp_ck4.bin");
  save_checkpoint(sample_checkpoint(), path);
  std::string bytes = slurp(path);

  const std::string bad = tmp_path("pp_ck_bad.bin");
  spit(bad, "XXXX" + bytes.substr(4));
  CHECK_THROWS_AS((void)load_checkpoint(bad), BadMagic);

  std::string wrongver = bytes;
  wrongver[4] = 9;
  spit(bad, wrongver);
  CHECK_THROWS_AS((void)load_checkpoint(bad), VersionMismatch);

  spit(bad, bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS((void)load_checkpoint(bad), IoError);

  spit(bad, bytes + "junk");
  CHECK_THROWS_AS((void)load_checkpoint(bad), CorruptData);

  CHECK_THROWS_AS((void)load_checkpoint("/nonexistent/ck.bin"), FileNotFound);
  std::remove(path.c_str());
  std::remove(bad.c_str());
}

TEST_CASE("digest64 is the 64-bit fnv-1a hex") {
  // frozen: fnv-1a of the empty string and of "a"
  CHECK(digest64("") == "cbf29ce484222325");
  CHECK(digest64("a") == "af63dc4c8601ec8c");
  CHECK(digest64("k=v;") != digest64("k=w;"));
  CHECK(digest64("stable") == digest64("stable"));
}
