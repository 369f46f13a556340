#include "spine3d/config.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <variant>

#include "spine3d/checkpoint.hpp"
#include "spine3d/io.hpp"

namespace spine3d {

namespace {

using Target = std::variant<int*, double*, bool*, std::uint64_t*, std::string*, std::filesystem::path*,
                            std::vector<double>*, std::vector<int>*, std::vector<ConvStage>*>;

struct Binding {
  std::string section;
  std::string key;
  Target target;
};

std::vector<Binding> bindings(ExperimentConfig& c) {
  PhantomConfig& ph = c.dataset.phantom;
  RenderConfig& r = c.dataset.render;
  AlignStageConfig& a = c.align;
  ModelConfig& m = c.model;
  TrainConfig& t = c.train;
  return {
      {"", "seed", &c.seed},
      {"", "output_dir", &c.output_dir},
      {"", "run_name", &c.run_name},
      {"", "threads", &c.threads},

      {"dataset", "n_samples", &c.dataset.n_samples},
      {"dataset", "pgm_scale", &c.dataset.pgm_scale},
      {"dataset", "coronal_amplitude_max", &ph.coronal_amplitude_max},
      {"dataset", "sagittal_amplitude_max", &ph.sagittal_amplitude_max},
      {"dataset", "sagittal_offset_max", &ph.sagittal_offset_max},
      {"dataset", "radius_lat_min", &ph.radius_lat_min},
      {"dataset", "radius_lat_max", &ph.radius_lat_max},
      {"dataset", "ap_ratio", &ph.ap_ratio},
      {"dataset", "wobble_min", &ph.wobble_min},
      {"dataset", "wobble_max", &ph.wobble_max},
      {"dataset", "rib_count", &ph.rib_count},
      {"dataset", "margin_px", &ph.margin_px},
      {"dataset", "scoliosis_threshold", &ph.scoliosis_threshold},
      {"dataset", "max_attempts", &ph.max_attempts},

      {"render", "mu", &r.mu},
      {"render", "depth_gain", &r.depth_gain},
      {"render", "ribs", &r.ribs},
      {"render", "rib_mu", &r.rib_mu},
      {"render", "rib_span", &r.rib_span},
      {"render", "rib_thickness", &r.rib_thickness},
      {"render", "rib_drop", &r.rib_drop},
      {"render", "rib_bulge", &r.rib_bulge},
      {"render", "rib_depth_coupling", &r.rib_depth_coupling},
      {"render", "rib_tangent_coupling", &r.rib_tangent_coupling},
      {"render", "noise_sigma", &r.noise_sigma},

      {"split", "train", &c.split.train},
      {"split", "val", &c.split.val},
      {"split", "test", &c.split.test},
      {"split", "scoliosis_fraction", &c.split.scoliosis_fraction},

      {"align", "iou_threshold", &a.align.iou_threshold},
      {"align", "angle_samples", &a.align.stage1.angle_samples},
      {"align", "angle_range_deg", &a.align.stage1.angle_range_deg},
      {"align", "downsample", &a.align.stage1.downsample},
      {"align", "max_shift_px", &a.align.stage1.max_shift_px},
      {"align", "refine_radius_px", &a.align.stage1.refine_radius_px},
      {"align", "keypoints", &a.align.keypoints},
      {"align", "end_trim_rows", &a.align.end_trim_rows},
      {"align", "contour_sigma", &a.align.contour_sigma},
      {"align", "end_weight", &a.align.end_weight},
      {"align", "stage2_iterations", &a.align.stage2_iterations},
      {"align", "perturb_theta_deg", &a.perturb_theta_deg},
      {"align", "perturb_shift_px", &a.perturb_shift_px},
      {"align", "bend_fraction", &a.bend_fraction},
      {"align", "bend_amplitude_px", &a.bend_amplitude_px},

      {"model", "conv_stages", &m.conv_stages},
      {"model", "attn_heads", &m.attn_heads},
      {"model", "use_attention", &m.use_attention},
      {"model", "use_pos_encoding", &m.use_pos_encoding},
      {"model", "coord_channels", &m.coord_channels},
      {"model", "dropout_p", &m.dropout_p},
      {"model", "input_scale", &m.input_scale},

      {"train", "epochs", &t.epochs},
      {"train", "batch_size", &t.batch_size},
      {"train", "lr", &t.lr},
      {"train", "beta1", &t.beta1},
      {"train", "beta2", &t.beta2},
      {"train", "eps", &t.eps},
      {"train", "lr_decay_every", &t.lr_decay_every},
      {"train", "lr_decay_factor", &t.lr_decay_factor},
      {"train", "weight_penalty", &t.weight_penalty},
      {"train", "augment", &t.augment.enabled},
      {"train", "crop_jitter_px", &t.augment.crop_jitter_px},
      {"train", "contrast_min", &t.augment.contrast_min},
      {"train", "contrast_max", &t.augment.contrast_max},
      {"train", "noise_frac", &t.augment.noise_frac},
      {"train", "folds", &c.folds},
      {"train", "cross_validate", &c.cross_validate},
      {"train", "sweep_sizes", &c.sweep_sizes},

      {"eval", "voxel_size_mm", &c.eval.voxel_size_mm},
      {"eval", "figures", &c.eval.figures},
  };
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_bool(const std::string& s, const std::string& what) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("invalid boolean for " + what + ": '" + s + "'");
}

void assign(const Target& target, const std::string& value, const std::string& what) {
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, int>) {
          *p = static_cast<int>(parse_int(value, what));
        } else if constexpr (std::is_same_v<T, double>) {
          *p = parse_double(value, what);
        } else if constexpr (std::is_same_v<T, bool>) {
          *p = parse_bool(value, what);
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
          const long long v = parse_int(value, what);
          if (v < 0) throw std::invalid_argument(what + " must be non-negative");
          *p = static_cast<std::uint64_t>(v);
        } else if constexpr (std::is_same_v<T, std::string> || std::is_same_v<T, std::filesystem::path>) {
          *p = value;
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
          p->clear();
          for (const auto& item : split_list(value)) p->push_back(parse_double(item, what));
        } else if constexpr (std::is_same_v<T, std::vector<int>>) {
          p->clear();
          for (const auto& item : split_list(value)) p->push_back(static_cast<int>(parse_int(item, what)));
        } else {
          KeyValues kv = model_config_to_key_values(ModelConfig{});
          kv["conv_stages"] = value;
          *p = model_config_from_key_values(kv).conv_stages;
        }
      },
      target);
}

std::string render(const Target& target) {
  return std::visit(
      [](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
          return std::to_string(*p);
        } else if constexpr (std::is_same_v<T, double>) {
          return format_double(*p);
        } else if constexpr (std::is_same_v<T, bool>) {
          return *p ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return *p;
        } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
          return p->string();
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
          std::string s;
          for (double v : *p) s += (s.empty() ? "" : ", ") + format_double(v);
          return s;
        } else if constexpr (std::is_same_v<T, std::vector<int>>) {
          std::string s;
          for (int v : *p) s += (s.empty() ? "" : ", ") + std::to_string(v);
          return s;
        } else {
          ModelConfig m;
          m.conv_stages = *p;
          return model_config_to_key_values(m).at("conv_stages");
        }
      },
      target);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset.n_samples < 1) throw std::invalid_argument("dataset.n_samples must be >= 1");
  if (!(dataset.pgm_scale > 0.0)) throw std::invalid_argument("dataset.pgm_scale must be positive");
  if (!(split.train > 0.0 && split.val > 0.0 && split.test > 0.0))
    throw std::invalid_argument("split fractions must be positive");
  if (std::abs(split.train + split.val + split.test - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");
  if (!(split.scoliosis_fraction > 0.0 && split.scoliosis_fraction < 1.0))
    throw std::invalid_argument("split.scoliosis_fraction must be in (0, 1)");
  if (!(align.align.iou_threshold >= 0.0 && align.align.iou_threshold <= 1.0))
    throw std::invalid_argument("align.iou_threshold must be in [0, 1]");
  if (!(align.bend_fraction >= 0.0 && align.bend_fraction <= 1.0))
    throw std::invalid_argument("align.bend_fraction must be in [0, 1]");
  if (!(align.align.contour_sigma >= 0.0)) throw std::invalid_argument("align.contour_sigma must be >= 0");
  if (align.align.end_weight < 0) throw std::invalid_argument("align.end_weight must be >= 0");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (run_name.empty() || run_name.find('/') != std::string::npos)
    throw std::invalid_argument("run_name must be a plain non-empty name");
  model.validate();
  train.validate();
  if (folds < 2) throw std::invalid_argument("train.folds must be >= 2");
  for (int s : sweep_sizes)
    if (s < 1) throw std::invalid_argument("train.sweep_sizes entries must be positive");
  if (!(eval.voxel_size_mm > 0.0)) throw std::invalid_argument("eval.voxel_size_mm must be positive");
  if (eval.figures < 0) throw std::invalid_argument("eval.figures must be >= 0");
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  ExperimentConfig cfg;
  const auto table = bindings(cfg);
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw std::invalid_argument(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (std::none_of(table.begin(), table.end(), [&](const Binding& b) { return b.section == section; }))
        throw std::invalid_argument(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool found = false;
    for (const Binding& b : table)
      if (b.section == section && b.key == key) {
        assign(b.target, value, section.empty() ? key : section + "." + key);
        found = true;
        break;
      }
    if (!found)
      throw std::invalid_argument(where + ": unknown key '" + (section.empty() ? key : section + "." + key) + "'");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_text(path));
}

std::string format_experiment_config(const ExperimentConfig& cfg) {
  ExperimentConfig copy = cfg;
  std::string out, section = "";
  for (const Binding& b : bindings(copy)) {
    if (b.section != section) {
      section = b.section;
      out += "\n[" + section + "]\n";
    }
    out += b.key + " = " + render(b.target) + "\n";
  }
  return out;
}

}  // namespace spine3d
