#include "cnnlab/arch_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cnnlab {

namespace {

using nlohmann::ordered_json;

int require_int(const ordered_json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) throw SchemaError("missing field: " + path + key);
  const auto& v = j.at(key);
  if (!v.is_number_integer())
    throw SchemaError("field " + path + key + " must be an integer");
  return v.get<int>();
}

double require_number(const ordered_json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) throw SchemaError("missing field: " + path + key);
  const auto& v = j.at(key);
  if (!v.is_number()) throw SchemaError("field " + path + key + " must be a number");
  return v.get<double>();
}

double require_positive(const ordered_json& j, const std::string& path, const char* key) {
  double v = require_number(j, path, key);
  if (!(v > 0)) throw SchemaError("field " + path + key + " must be positive, got " +
                                  std::to_string(v));
  return v;
}

}  // namespace

Architecture parse_arch(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("document must be a JSON object");

  Architecture a;
  if (!j.contains("input")) throw SchemaError("missing field: input");
  if (!j.at("input").is_object()) throw SchemaError("field input must be an object");
  a.input_rows = require_int(j.at("input"), "input.", "rows");
  a.input_cols = require_int(j.at("input"), "input.", "cols");
  a.input_channels = require_int(j.at("input"), "input.", "channels");

  a.pool = require_int(j, "", "pool_size");

  if (!j.contains("layers")) throw SchemaError("missing field: layers");
  if (!j.at("layers").is_array() || j.at("layers").empty())
    throw SchemaError("field layers must be a non-empty array");
  int idx = 0;
  for (const auto& lj : j.at("layers")) {
    const std::string path = "layers[" + std::to_string(idx) + "].";
    if (!lj.is_object()) throw SchemaError("field layers[" + std::to_string(idx) +
                                           "] must be an object");
    LayerSpec L;
    L.kernel = require_int(lj, path, "kernel");
    L.stride = require_int(lj, path, "stride");
    L.out_channels = require_int(lj, path, "out_channels");
    L.b = require_positive(lj, path, "b");
    L.rank = require_int(lj, path, "rank");
    a.layers.push_back(L);
    ++idx;
  }

  if (!j.contains("output")) throw SchemaError("missing field: output");
  if (!j.at("output").is_object()) throw SchemaError("field output must be an object");
  a.output_dim = require_int(j.at("output"), "output.", "dim");
  a.output_b = require_positive(j.at("output"), "output.", "b");
  a.output_rank = require_int(j.at("output"), "output.", "rank");
  return a;
}

std::string serialize_arch(const Architecture& a) {
  ordered_json j;
  j["input"] = {{"rows", a.input_rows}, {"cols", a.input_cols}, {"channels", a.input_channels}};
  j["pool_size"] = a.pool;
  j["layers"] = ordered_json::array();
  for (const LayerSpec& L : a.layers)
    j["layers"].push_back({{"kernel", L.kernel},
                           {"stride", L.stride},
                           {"out_channels", L.out_channels},
                           {"b", L.b},
                           {"rank", L.rank}});
  j["output"] = {{"dim", a.output_dim}, {"b", a.output_b}, {"rank", a.output_rank}};
  return j.dump(2) + "\n";
}

std::uint64_t arch_hash(const Architecture& arch) {
  const std::string s = serialize_arch(arch);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Architecture load_arch_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot read architecture file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_arch(ss.str());
}

}  // namespace cnnlab
