#include "patchprint/dataset.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "patchprint/errors.hpp"

namespace patchprint {

using nlohmann::json;

namespace {

std::string require_string(const json& obj, const char* key, int line) {
  if (!obj.contains(key) || !obj[key].is_string())
    throw ParseError("manifest line " + std::to_string(line) + ": missing string key '" + key +
                     "'");
  return obj[key].get<std::string>();
}

}  // namespace

std::vector<Sample> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound("manifest: no such file: " + path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();

  std::vector<Sample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!obj.is_object())
      throw ParseError("manifest line " + std::to_string(lineno) + ": expected an object");

    Sample s;
    const std::string p = require_string(obj, "path", lineno);
    if (p.empty()) throw ParseError("manifest line " + std::to_string(lineno) + ": empty path");
    const std::filesystem::path fp(p);
    s.path = fp.is_absolute() ? fp.string() : (base / fp).string();

    const std::string label = require_string(obj, "label", lineno);
    if (label == "real") {
      s.label = Label::real;
    } else if (label == "fake") {
      s.label = Label::fake;
    } else {
      throw UnknownLabel("manifest line " + std::to_string(lineno) + ": unknown label '" + label +
                         "'");
    }

    s.generator = require_string(obj, "generator", lineno);

    const std::string split = require_string(obj, "split", lineno);
    if (split == "train") {
      s.split = Split::train;
    } else if (split == "test") {
      s.split = Split::test;
    } else {
      throw ParseError("manifest line " + std::to_string(lineno) + ": unknown split '" + split +
                       "'");
    }
    out.push_back(std::move(s));
  }
  return out;
}

void save_manifest(const std::vector<Sample>& samples, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("manifest: cannot open for write: " + path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  for (const auto& s : samples) {
    std::filesystem::path p(s.path);
    std::error_code ec;
    const auto rel = std::filesystem::relative(p, base, ec);
    json obj;
    obj["path"] = (!ec && !rel.empty()) ? rel.string() : s.path;
    obj["label"] = s.label == Label::real ? "real" : "fake";
    obj["generator"] = s.generator;
    obj["split"] = s.split == Split::train ? "train" : "test";
    out << obj.dump() << "\n";
  }
  if (!out) throw IoError("manifest: write failed: " + path);
}

std::vector<Sample> filter_split(const std::vector<Sample>& samples, Split split) {
  std::vector<Sample> out;
  for (const auto& s : samples)
    if (s.split == split) out.push_back(s);
  return out;
}

}  // namespace patchprint
