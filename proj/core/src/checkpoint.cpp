#include "advrec/checkpoint.hpp"

#include <fstream>
#include <json.hpp>

#include "advrec/encoding.hpp"
#include "advrec/errors.hpp"

namespace advrec {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  ordered_json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["kind"] = checkpoint.kind;
  try {
    doc["config"] = ordered_json::parse(checkpoint.config_json);
  } catch (const nlohmann::json::exception& e) {
    throw StateError("checkpoint config is not valid JSON: " + std::string(e.what()));
  }
  ordered_json params = ordered_json::object();
  for (const std::string& name : checkpoint.params.names()) {
    const Tensor& t = checkpoint.params.at(name);
    ordered_json entry;
    entry["shape"] = t.shape();
    entry["data"] = base64_encode(f64_to_le_bytes(t.data()));
    params[name] = std::move(entry);
  }
  doc["params"] = std::move(params);

  std::ofstream out(path);
  if (!out) throw StateError("cannot write '" + path.string() + "'");
  out << doc.dump(2) << '\n';
  if (!out) throw StateError("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  ordered_json doc = parse_file(path);
  std::string where = "'" + path.string() + "'";
  if (!doc.is_object()) throw ParseError(where + ": checkpoint is not a JSON object");
  if (!doc.contains("format_version") || !doc["format_version"].is_number_integer() ||
      doc["format_version"].get<int>() != kCheckpointFormatVersion) {
    throw ParseError(where + ": missing or unsupported format_version");
  }

  Checkpoint ck;
  if (doc.contains("kind")) {
    if (!doc["kind"].is_string()) throw ParseError(where + ": kind is not a string");
    ck.kind = doc["kind"].get<std::string>();
  }
  if (doc.contains("config")) {
    if (!doc["config"].is_object()) throw ParseError(where + ": config is not an object");
    ck.config_json = doc["config"].dump();
  }
  if (!doc.contains("params") || !doc["params"].is_object()) {
    throw ParseError(where + ": missing params object");
  }

  for (const auto& [name, entry] : doc["params"].items()) {
    if (!entry.is_object() || !entry.contains("shape") || !entry.contains("data")) {
      throw ParseError(where + ": parameter '" + name + "' missing shape or data");
    }
    Shape shape;
    for (const auto& e : entry["shape"]) {
      if (!e.is_number_integer() || e.get<long long>() <= 0) {
        throw ParseError(where + ": parameter '" + name + "' has a non-positive extent");
      }
      shape.push_back(e.get<std::size_t>());
    }
    std::vector<double> values;
    try {
      values = f64_from_le_bytes(base64_decode(entry["data"].get<std::string>()));
    } catch (const ParseError& e) {
      throw ParseError(where + ": parameter '" + name + "': " + e.what());
    }
    std::size_t want = 1;
    for (std::size_t d : shape) want *= d;
    if (values.size() != want) {
      throw ParseError(where + ": parameter '" + name + "' has " + std::to_string(values.size()) +
                       " values for shape " + shape_str(shape));
    }
    ck.params.add(name, Tensor(std::move(shape), std::move(values)));
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::string_view expect_kind) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.kind != expect_kind) {
    throw ParseError("'" + path.string() + "': checkpoint kind '" + ck.kind + "', expected '" +
                     std::string(expect_kind) + "'");
  }
  return ck;
}

}  // namespace advrec
