#include "spine3d/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <sstream>

namespace spine3d {

namespace {

constexpr const char* kMagic = "spine3d-checkpoint 1";

std::string get(const KeyValues& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw IoError("checkpoint: missing key '" + key + "'");
  return it->second;
}

bool parse_bool(const std::string& s, const std::string& what) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw IoError("invalid boolean for " + what + ": '" + s + "'");
}

}  // namespace

KeyValues model_config_to_key_values(const ModelConfig& cfg) {
  KeyValues kv;
  kv["input_size"] = std::to_string(cfg.input_size);
  std::string stages;
  for (const ConvStage& s : cfg.conv_stages) {
    if (!stages.empty()) stages += ',';
    stages += std::to_string(s.channels) + ':' + std::to_string(s.stride);
  }
  kv["conv_stages"] = stages;
  kv["attn_heads"] = std::to_string(cfg.attn_heads);
  kv["use_attention"] = cfg.use_attention ? "1" : "0";
  kv["use_pos_encoding"] = cfg.use_pos_encoding ? "1" : "0";
  kv["coord_channels"] = cfg.coord_channels ? "1" : "0";
  kv["dropout_p"] = format_double(cfg.dropout_p);
  kv["input_scale"] = format_double(cfg.input_scale);
  kv["out_levels"] = std::to_string(cfg.out_levels);
  kv["out_curves"] = std::to_string(cfg.out_curves);
  return kv;
}

ModelConfig model_config_from_key_values(const KeyValues& kv) {
  ModelConfig cfg;
  cfg.input_size = static_cast<int>(parse_int(get(kv, "input_size"), "input_size"));
  cfg.conv_stages.clear();
  std::stringstream ss(get(kv, "conv_stages"));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw IoError("invalid conv stage '" + item + "'");
    cfg.conv_stages.push_back({static_cast<int>(parse_int(item.substr(0, colon), "conv channels")),
                               static_cast<int>(parse_int(item.substr(colon + 1), "conv stride"))});
  }
  cfg.attn_heads = static_cast<int>(parse_int(get(kv, "attn_heads"), "attn_heads"));
  cfg.use_attention = parse_bool(get(kv, "use_attention"), "use_attention");
  cfg.use_pos_encoding = parse_bool(get(kv, "use_pos_encoding"), "use_pos_encoding");
  cfg.coord_channels = parse_bool(get(kv, "coord_channels"), "coord_channels");
  cfg.dropout_p = parse_double(get(kv, "dropout_p"), "dropout_p");
  cfg.input_scale = parse_double(get(kv, "input_scale"), "input_scale");
  cfg.out_levels = static_cast<int>(parse_int(get(kv, "out_levels"), "out_levels"));
  cfg.out_curves = static_cast<int>(parse_int(get(kv, "out_curves"), "out_curves"));
  return cfg;
}

void write_checkpoint(const std::filesystem::path& path, const RegressorModel& model) {
  KeyValues kv = model_config_to_key_values(model.config());
  kv["parameters"] = std::to_string(model.parameter_count());
  kv["offsets"] = std::to_string(model.output_offset().size());
  std::string blob = std::string(kMagic) + "\n" + format_key_values(kv) + "end\n";
  auto append = [&](std::span<const double> values) {
    for (double v : values) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) blob.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
  };
  append(model.parameters());
  append(model.output_offset());
  write_text(path, blob);
}

RegressorModel read_checkpoint(const std::filesystem::path& path) {
  const std::string blob = read_text(path);
  const std::string first = std::string(kMagic) + "\n";
  if (blob.compare(0, first.size(), first) != 0) throw IoError(path.string() + ": not a spine3d checkpoint");
  const auto end = blob.find("\nend\n");
  if (end == std::string::npos) throw IoError(path.string() + ": truncated checkpoint header");
  const KeyValues kv = parse_key_values(blob.substr(first.size(), end + 1 - first.size()));
  RegressorModel model(model_config_from_key_values(kv));
  const auto count = static_cast<std::size_t>(parse_int(get(kv, "parameters"), "parameters"));
  if (count != model.parameter_count())
    throw IoError(path.string() + ": parameter count " + std::to_string(count) + " does not match config (" +
                  std::to_string(model.parameter_count()) + ")");
  const auto offsets = static_cast<std::size_t>(parse_int(get(kv, "offsets"), "offsets"));
  if (offsets != model.output_offset().size()) throw IoError(path.string() + ": offset count does not match config");
  const std::size_t data = end + 5;
  if (blob.size() != data + (count + offsets) * 8) throw IoError(path.string() + ": parameter data has the wrong size");
  auto value = [&](std::size_t i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(blob[data + i * 8 + b])) << (8 * b);
    return std::bit_cast<double>(bits);
  };
  auto params = model.parameters();
  for (std::size_t i = 0; i < count; ++i) params[i] = value(i);
  std::vector<double> offset(offsets);
  for (std::size_t i = 0; i < offsets; ++i) offset[i] = value(count + i);
  model.set_output_offset(offset);
  return model;
}

}  // namespace spine3d
