#include "spine3d/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "spine3d/io.hpp"
#include "spine3d/random.hpp"

namespace spine3d {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kWobbleCycles = 12;

// Stream tags for derive_seed.
constexpr std::uint64_t kTagParams = 1;
constexpr std::uint64_t kTagNoise = 2;
constexpr std::uint64_t kTagPlacement = 3;

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += format_double(v[i]);
  }
  return s;
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  if (text.empty()) return out;
  std::istringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) out.push_back(parse_double(cell, what));
  return out;
}

void validate(const PhantomParams& p) {
  if (p.num_coronal_modes < 1) throw ParameterError("num_coronal_modes must be >= 1");
  if (p.coronal_amplitudes.size() != static_cast<std::size_t>(p.num_coronal_modes) ||
      p.coronal_phases.size() != p.coronal_amplitudes.size())
    throw ParameterError("coronal amplitude/phase lists must have num_coronal_modes entries");
  if (p.sagittal_phases.size() != p.sagittal_amplitudes.size())
    throw ParameterError("sagittal amplitude/phase lists differ in length");
  auto non_negative = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0; });
  };
  if (!non_negative(p.coronal_amplitudes) || !non_negative(p.sagittal_amplitudes))
    throw ParameterError("amplitudes must be >= 0");
  if (!all_finite(p.coronal_amplitudes) || !all_finite(p.coronal_phases) ||
      !all_finite(p.sagittal_amplitudes) || !all_finite(p.sagittal_phases) ||
      !std::isfinite(p.sagittal_offset) || !std::isfinite(p.wobble_phase))
    throw ParameterError("non-finite phantom parameter");
  if (!(p.radius_base_lat > 0.0) || !(p.radius_base_ap > 0.0) || !(p.radius_wobble >= 0.0))
    throw ParameterError("radii must be positive and wobble non-negative");
  if (p.rib_count < 0) throw ParameterError("rib_count must be >= 0");
}

}  // namespace

double SpinePhantom::max_lateral_deviation() const {
  if (cx.empty()) return 0.0;
  double mean = 0.0;
  for (double x : cx) mean += x;
  mean /= static_cast<double>(cx.size());
  double dev = 0.0;
  for (double x : cx) dev = std::max(dev, std::abs(x - mean));
  return dev;
}

SpinePhantom generate_phantom(const PhantomParams& params, const PhantomConfig& cfg) {
  validate(params);
  SpinePhantom ph;
  ph.params = params;
  ph.cx.resize(kLevels);
  ph.cy.resize(kLevels);
  ph.a.resize(kLevels);
  ph.b.resize(kLevels);

  auto coronal_raw = [&](double z) {
    double x = 0.0;
    for (std::size_t k = 0; k < params.coronal_amplitudes.size(); ++k)
      x += params.coronal_amplitudes[k] *
           std::sin(kPi * static_cast<double>(k + 1) * z / kLevels + params.coronal_phases[k]);
    return x;
  };
  // Recentre so the midpoint of the two endpoints sits on kCenterX.
  const double mid = 0.5 * (coronal_raw(1.0) + coronal_raw(static_cast<double>(kLevels)));

  for (int i = 0; i < kLevels; ++i) {
    const double z = static_cast<double>(i + 1);
    ph.cx[i] = kCenterX + coronal_raw(z) - mid;
    double y = kCenterY + params.sagittal_offset;
    for (std::size_t k = 0; k < params.sagittal_amplitudes.size(); ++k)
      y += params.sagittal_amplitudes[k] *
           std::sin(2.0 * kPi * static_cast<double>(k + 1) * z / kLevels + params.sagittal_phases[k]);
    ph.cy[i] = y;
    const double w = std::sin(2.0 * kPi * kWobbleCycles * z / kLevels + params.wobble_phase);
    ph.a[i] = params.radius_base_lat + params.radius_wobble * w;
    ph.b[i] = params.radius_base_ap + params.radius_wobble * (params.radius_base_ap / params.radius_base_lat) * w;
  }

  const double lo = 1.0 + cfg.margin_px;
  const double hi = static_cast<double>(kCross) - cfg.margin_px;
  for (int i = 0; i < kLevels; ++i) {
    if (!(ph.a[i] > 0.0) || !(ph.b[i] > 0.0))
      throw ParameterError("radius wobble drives a semi-axis to <= 0 at level " + std::to_string(i + 1));
    if (ph.cx[i] - ph.a[i] < lo || ph.cx[i] + ph.a[i] > hi || ph.cy[i] - ph.b[i] < lo ||
        ph.cy[i] + ph.b[i] > hi)
      throw ParameterError("cross-section violates the grid margin at level " + std::to_string(i + 1));
  }
  ph.scoliosis_label = ph.max_lateral_deviation() > cfg.scoliosis_threshold;
  return ph;
}

PhantomParams sample_phantom_params(const PhantomConfig& cfg, std::uint64_t seed, int attempt) {
  Rng rng(derive_seed(seed, {kTagParams, static_cast<std::uint64_t>(attempt)}));
  PhantomParams p;
  p.seed = seed;
  p.num_coronal_modes = static_cast<int>(cfg.coronal_amplitude_max.size());
  for (double amax : cfg.coronal_amplitude_max) {
    p.coronal_amplitudes.push_back(uniform(rng, 0.0, amax));
    p.coronal_phases.push_back(uniform(rng, 0.0, 2.0 * kPi));
  }
  for (double bmax : cfg.sagittal_amplitude_max) {
    p.sagittal_amplitudes.push_back(uniform(rng, 0.0, bmax));
    p.sagittal_phases.push_back(uniform(rng, 0.0, 2.0 * kPi));
  }
  p.sagittal_offset = uniform(rng, -cfg.sagittal_offset_max, cfg.sagittal_offset_max);
  p.radius_base_lat = uniform(rng, cfg.radius_lat_min, cfg.radius_lat_max);
  p.radius_base_ap = p.radius_base_lat * cfg.ap_ratio;
  p.radius_wobble = uniform(rng, cfg.wobble_min, cfg.wobble_max);
  p.wobble_phase = uniform(rng, 0.0, 2.0 * kPi);
  p.rib_count = cfg.rib_count;
  return p;
}

SpinePhantom sample_phantom(const PhantomConfig& cfg, std::uint64_t seed) {
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    try {
      return generate_phantom(sample_phantom_params(cfg, seed, attempt), cfg);
    } catch (const ParameterError&) {
      // resample
    }
  }
  throw ParameterError("no valid phantom after " + std::to_string(cfg.max_attempts) +
                       " attempts for seed " + std::to_string(seed));
}

VoxelMask rasterize(const SpinePhantom& phantom, double voxel_size_mm) {
  VoxelMask mask(kLevels, kCross, kCross, voxel_size_mm);
  for (int z = 0; z < kLevels; ++z) {
    const double cx = phantom.cx[z], cy = phantom.cy[z], a = phantom.a[z], b = phantom.b[z];
    // Coordinates are index + 1; scan a bounding box one voxel wider than the ellipse.
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - a)) - 2);
    const int x1 = std::min(kCross - 1, static_cast<int>(std::ceil(cx + a)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - b)) - 2);
    const int y1 = std::min(kCross - 1, static_cast<int>(std::ceil(cy + b)));
    for (int x = x0; x <= x1; ++x) {
      const double u = (x + 1 - cx) / a;
      for (int y = y0; y <= y1; ++y) {
        const double v = (y + 1 - cy) / b;
        if (u * u + v * v <= 1.0) mask.at(z, x, y) = 1;
      }
    }
  }
  return mask;
}

Mask2D project(const VoxelMask& mask, Plane plane) {
  const int cols = plane == Plane::Coronal ? mask.nx : mask.ny;
  Mask2D out(mask.nz, cols);
  for (int z = 0; z < mask.nz; ++z)
    for (int x = 0; x < mask.nx; ++x)
      for (int y = 0; y < mask.ny; ++y)
        if (mask.at(z, x, y)) out.at(z, plane == Plane::Coronal ? x : y) = 1;
  return out;
}

Image2D sum_projection(const VoxelMask& mask, Plane plane) {
  const int cols = plane == Plane::Coronal ? mask.nx : mask.ny;
  Image2D out(mask.nz, cols);
  for (int z = 0; z < mask.nz; ++z)
    for (int x = 0; x < mask.nx; ++x)
      for (int y = 0; y < mask.ny; ++y)
        if (mask.at(z, x, y)) out.at(z, plane == Plane::Coronal ? x : y) += 1.0;
  return out;
}

CropMeta crop_from_endpoints(double top_row, double top_col, double bottom_row, double bottom_col) {
  CropMeta meta;
  const double mid_row = 0.5 * (top_row + bottom_row);
  const double mid_col = 0.5 * (top_col + bottom_col);
  meta.row0 = static_cast<int>(std::lround(mid_row)) - kCropSize / 2;
  meta.col0 = static_cast<int>(std::lround(mid_col)) - kCropSize / 2;
  return meta;
}

CropMeta scanner_crop(const SpinePhantom& phantom) {
  Rng rng(derive_seed(phantom.params.seed, {kTagPlacement}));
  // Scanner position of level index 0 and of the crop-frame column origin.
  const int top_row = uniform_int(rng, 150, kScannerRows - kLevels - 150);
  const int col_shift = uniform_int(rng, (kScannerCols - kCropSize) / 2 - 20, (kScannerCols - kCropSize) / 2 + 20);
  const double top_col = col_shift + phantom.cx.front() - 1.0;
  const double bottom_col = col_shift + phantom.cx.back() - 1.0;
  return crop_from_endpoints(top_row, top_col, top_row + kLevels - 1, bottom_col);
}

namespace {

void draw_rib(Image2D& rib_mask, double r0, double c0, double r1, double c1, double bulge, double thickness) {
  // Circular arc from (r0,c0) to (r1,c1) with sagitta `bulge` towards smaller rows.
  const double dr = r1 - r0, dc = c1 - c0;
  const double chord = std::hypot(dr, dc);
  if (chord < 1e-9) return;
  // Unit normal pointing towards smaller row values.
  double nr = -dc / chord, nc = dr / chord;
  if (nr > 0.0) { nr = -nr; nc = -nc; }
  const int samples = std::max(8, static_cast<int>(4.0 * chord));
  const double radius = 0.5 * thickness;
  std::vector<std::pair<double, double>> pts;
  pts.reserve(static_cast<std::size_t>(samples) + 1);
  if (std::abs(bulge) < 1e-9) {
    for (int s = 0; s <= samples; ++s) {
      const double t = static_cast<double>(s) / samples;
      pts.emplace_back(r0 + t * dr, c0 + t * dc);
    }
  } else {
    const double h = bulge;
    const double R = (chord * chord / 4.0 + h * h) / (2.0 * h);
    const double mr = 0.5 * (r0 + r1), mc = 0.5 * (c0 + c1);
    const double cr = mr - nr * (R - h), cc = mc - nc * (R - h);
    // Sagitta below chord/2 keeps this the minor arc, so the signed sweep is in (-pi, pi].
    const double a0 = std::atan2(r0 - cr, c0 - cc);
    const double sweep = std::remainder(std::atan2(r1 - cr, c1 - cc) - a0, 2.0 * kPi);
    const double a1 = a0 + sweep;
    for (int s = 0; s <= samples; ++s) {
      const double ang = a0 + (a1 - a0) * static_cast<double>(s) / samples;
      pts.emplace_back(cr + R * std::sin(ang), cc + R * std::cos(ang));
    }
  }
  for (const auto& [pr, pc] : pts) {
    const int rr0 = static_cast<int>(std::floor(pr - radius)), rr1 = static_cast<int>(std::ceil(pr + radius));
    const int cc0 = static_cast<int>(std::floor(pc - radius)), cc1 = static_cast<int>(std::ceil(pc + radius));
    for (int r = rr0; r <= rr1; ++r)
      for (int c = cc0; c <= cc1; ++c)
        if (rib_mask.inside(r, c) && std::hypot(r - pr, c - pc) <= std::max(radius, 0.5))
          rib_mask.at(r, c) = 1.0;
  }
}

}  // namespace

PseudoDxaImage render_pseudo_dxa(const SpinePhantom& phantom, const VoxelMask& mask, const RenderConfig& cfg) {
  PseudoDxaImage out;
  out.grid = Image2D(kCropSize, kCropSize);
  out.crop = scanner_crop(phantom);

  std::vector<double> depth_weight(static_cast<std::size_t>(mask.ny));
  for (int y = 0; y < mask.ny; ++y)
    depth_weight[y] = cfg.mu * std::max(0.0, 1.0 + cfg.depth_gain * (y + 1 - kCenterY) / kCross);

  for (int z = 0; z < mask.nz; ++z) {
    const int row = z + kCropRowOffset;
    if (row < 0 || row >= kCropSize) continue;
    for (int x = 0; x < mask.nx && x < kCropSize; ++x) {
      double s = 0.0;
      const std::size_t base = mask.index(z, x, 0);
      for (int y = 0; y < mask.ny; ++y)
        if (mask.data[base + y]) s += depth_weight[y];
      out.grid.at(row, x) = s;
    }
  }

  if (cfg.ribs && phantom.params.rib_count > 0) {
    Image2D rib_mask(kCropSize, kCropSize);
    const int count = phantom.params.rib_count;
    for (int r = 0; r < count; ++r) {
      const int z = std::clamp(static_cast<int>(kLevels * (r + 0.5) / count), 1, kLevels - 2);
      const double slope = 0.5 * (phantom.cy[z + 1] - phantom.cy[z - 1]);
      const double drop = std::clamp(cfg.rib_drop + cfg.rib_depth_coupling * (phantom.cy[z] - kCenterY) +
                                         cfg.rib_tangent_coupling * slope,
                                     2.0, 40.0);
      const double row = z + kCropRowOffset;
      const double right = phantom.cx[z] - phantom.a[z] - 1.0;  // column index of the bound
      const double left = phantom.cx[z] + phantom.a[z] - 1.0;
      draw_rib(rib_mask, row, right, row + drop, right - cfg.rib_span, cfg.rib_bulge, cfg.rib_thickness);
      draw_rib(rib_mask, row, left, row + drop, left + cfg.rib_span, cfg.rib_bulge, cfg.rib_thickness);
    }
    for (std::size_t i = 0; i < out.grid.data.size(); ++i) out.grid.data[i] += cfg.rib_mu * rib_mask.data[i];
  }

  if (cfg.noise_sigma > 0.0) {
    Rng rng(derive_seed(phantom.params.seed, {kTagNoise}));
    for (double& v : out.grid.data) v = std::max(0.0, v + cfg.noise_sigma * normal(rng));
  }
  return out;
}

PseudoDxaImage render_pseudo_dxa(const SpinePhantom& phantom, const RenderConfig& cfg) {
  return render_pseudo_dxa(phantom, rasterize(phantom), cfg);
}

Mask2D to_crop_frame(const Mask2D& levels_mask) {
  return embed(levels_mask, kCropSize, kCropSize, kCropRowOffset, 0);
}

Image2D to_crop_frame(const Image2D& levels_image) {
  return embed(levels_image, kCropSize, kCropSize, kCropRowOffset, 0);
}

Mask2D from_crop_frame(const Mask2D& crop_mask) {
  return crop(crop_mask, kCropRowOffset, 0, kLevels, crop_mask.cols);
}

void write_phantom_params(const std::filesystem::path& path, const PhantomParams& p) {
  KeyValues kv;
  kv["num_coronal_modes"] = std::to_string(p.num_coronal_modes);
  kv["coronal_amplitudes"] = join(p.coronal_amplitudes);
  kv["coronal_phases"] = join(p.coronal_phases);
  kv["sagittal_amplitudes"] = join(p.sagittal_amplitudes);
  kv["sagittal_phases"] = join(p.sagittal_phases);
  kv["sagittal_offset"] = format_double(p.sagittal_offset);
  kv["radius_base_lat"] = format_double(p.radius_base_lat);
  kv["radius_base_ap"] = format_double(p.radius_base_ap);
  kv["radius_wobble"] = format_double(p.radius_wobble);
  kv["wobble_phase"] = format_double(p.wobble_phase);
  kv["rib_count"] = std::to_string(p.rib_count);
  kv["seed"] = std::to_string(p.seed);
  write_key_values(path, kv);
}

PhantomParams read_phantom_params(const std::filesystem::path& path) {
  const KeyValues kv = read_key_values(path);
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw IoError(path.string() + ": missing key '" + key + "'");
    return it->second;
  };
  PhantomParams p;
  p.num_coronal_modes = static_cast<int>(parse_int(get("num_coronal_modes"), "num_coronal_modes"));
  p.coronal_amplitudes = parse_list(get("coronal_amplitudes"), "coronal_amplitudes");
  p.coronal_phases = parse_list(get("coronal_phases"), "coronal_phases");
  p.sagittal_amplitudes = parse_list(get("sagittal_amplitudes"), "sagittal_amplitudes");
  p.sagittal_phases = parse_list(get("sagittal_phases"), "sagittal_phases");
  p.sagittal_offset = parse_double(get("sagittal_offset"), "sagittal_offset");
  p.radius_base_lat = parse_double(get("radius_base_lat"), "radius_base_lat");
  p.radius_base_ap = parse_double(get("radius_base_ap"), "radius_base_ap");
  p.radius_wobble = parse_double(get("radius_wobble"), "radius_wobble");
  p.wobble_phase = parse_double(get("wobble_phase"), "wobble_phase");
  p.rib_count = static_cast<int>(parse_int(get("rib_count"), "rib_count"));
  p.seed = static_cast<std::uint64_t>(std::stoull(get("seed")));
  return p;
}

}  // namespace spine3d
