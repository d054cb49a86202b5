#include <fstream>
#include <iterator>

#include <json.hpp>

#include "pmag/errors.hpp"
#include "pmag/io_formats.hpp"

namespace pmag {

namespace {

std::size_t positive_dim(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("manifest is missing '") + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw FormatError(std::string("manifest '") + key + "' must be an integer");
  const auto n = v.get<std::int64_t>();
  if (n < 1) throw ValidationError(std::string("manifest '") + key + "' must be >= 1");
  return static_cast<std::size_t>(n);
}

}  // namespace

RunManifest parse_manifest(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("manifest must be a JSON object");

  RunManifest m;
  m.grid_h = positive_dim(j, "grid_h");
  m.grid_w = positive_dim(j, "grid_w");
  m.num_layers = positive_dim(j, "num_layers");
  m.num_heads = positive_dim(j, "num_heads");
  if (!j.contains("iterations") || !j.at("iterations").is_array()) {
    throw FormatError("manifest 'iterations' must be an array of file names");
  }
  for (const auto& it : j.at("iterations")) {
    if (!it.is_string()) throw FormatError("manifest 'iterations' entries must be strings");
    m.iterations.push_back(it.get<std::string>());
  }
  if (m.iterations.empty()) throw ValidationError("manifest lists no iterations");
  return m;
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_manifest(text);
}

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
  nlohmann::ordered_json j;
  j["grid_h"] = manifest.grid_h;
  j["grid_w"] = manifest.grid_w;
  j["num_layers"] = manifest.num_layers;
  j["num_heads"] = manifest.num_heads;
  j["iterations"] = manifest.iterations;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

std::vector<AttnStack> load_manifest_stacks(const std::filesystem::path& manifest_path) {
  const RunManifest m = read_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  std::vector<AttnStack> stacks;
  stacks.reserve(m.iterations.size());
  for (const auto& name : m.iterations) {
    std::filesystem::path p(name);
    if (p.is_relative()) p = base / p;
    const NpyArray a = read_npy(p);
    if (a.dtype != NpyDtype::Float32 || a.shape.size() != 4) {
      throw ValidationError(p.string() + ": attention dump must be a 4-D float32 array");
    }
    const StackShape s{a.shape[0], a.shape[1], a.shape[2], a.shape[3]};
    if (s != m.shape()) {
      throw ValidationError(p.string() + ": shape [" + std::to_string(s.layers) + "," +
                            std::to_string(s.heads) + "," + std::to_string(s.grid_h) + "," +
                            std::to_string(s.grid_w) + "] disagrees with the manifest");
    }
    stacks.push_back(stack_from_npy(a));
  }
  return stacks;
}

SyntheticSpec parse_synthetic_spec(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("synthetic spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("synthetic spec must be a JSON object");

  SyntheticSpec spec;
  try {
    spec.grid_h = positive_dim(j, "grid_h");
    spec.grid_w = positive_dim(j, "grid_w");
    spec.num_layers = j.contains("num_layers") ? positive_dim(j, "num_layers") : 32;
    spec.leak = j.value("leak", 0.0);
    if (!j.contains("blobs") || !j.at("blobs").is_array()) {
      throw FormatError("synthetic spec 'blobs' must be an array");
    }
    for (const auto& b : j.at("blobs")) {
      const auto& c = b.at("center");
      if (!c.is_array() || c.size() != 2) throw FormatError("blob 'center' must be [row, col]");
      spec.blobs.push_back({c.at(0).get<double>(), c.at(1).get<double>(), b.at("sigma").get<double>(),
                            b.at("weight").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("synthetic spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

SyntheticSpec read_synthetic_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_synthetic_spec(text);
}

}  // namespace pmag
