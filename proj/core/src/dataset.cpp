#include "spine3d/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "spine3d/io.hpp"
#include "spine3d/parallel.hpp"
#include "spine3d/random.hpp"

namespace spine3d {

namespace {

constexpr std::uint64_t kTagCandidate = 0x43414E44;  // "CAND"
constexpr std::uint64_t kTagSplit = 0x53504C54;      // "SPLT"
constexpr std::uint64_t kTagFold = 0x464F4C44;       // "FOLD"

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(i - 1)))]);
}

std::vector<std::size_t> indices_of(const std::vector<bool>& labels, bool value) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == value) out.push_back(i);
  return out;
}

}  // namespace

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw IoError("unknown split '" + s + "'");
}

std::vector<SampleRecord> DatasetManifest::select(Split s, bool aligned_only) const {
  std::vector<SampleRecord> out;
  for (const SampleRecord& r : samples)
    if (r.split == s && (!aligned_only || r.aligned)) out.push_back(r);
  return out;
}

std::string format_manifest_csv(const DatasetManifest& m) {
  CsvTable t;
  t.header = {"id", "seed", "scoliosis", "split", "aligned", "phantom", "volume", "render", "curves"};
  for (const SampleRecord& r : m.samples)
    t.rows.push_back({r.id, std::to_string(r.seed), r.scoliosis ? "1" : "0", to_string(r.split),
                      r.aligned ? "1" : "0", r.phantom, r.volume, r.render, r.curves});
  return format_csv(t);
}

DatasetManifest parse_manifest_csv(const std::string& text) {
  const CsvTable t = parse_csv(text);
  const int c_id = t.column("id"), c_seed = t.column("seed"), c_sc = t.column("scoliosis"),
            c_split = t.column("split"), c_al = t.column("aligned"), c_ph = t.column("phantom"),
            c_vol = t.column("volume"), c_ren = t.column("render"), c_cur = t.column("curves");
  DatasetManifest m;
  for (const auto& row : t.rows) {
    SampleRecord r;
    r.id = row[c_id];
    try {
      r.seed = std::stoull(row[c_seed]);
    } catch (const std::exception&) {
      throw IoError("manifest: invalid seed for " + r.id);
    }
    r.scoliosis = row[c_sc] == "1";
    r.split = parse_split(row[c_split]);
    r.aligned = row[c_al] == "1";
    r.phantom = row[c_ph];
    r.volume = row[c_vol];
    r.render = row[c_ren];
    r.curves = row[c_cur];
    m.samples.push_back(std::move(r));
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  write_text(path, format_manifest_csv(m));
}

DatasetManifest read_manifest(const std::filesystem::path& path) { return parse_manifest_csv(read_text(path)); }

std::string sample_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "s%05d", index);
  return buf;
}

std::vector<Split> stratified_split(const std::vector<bool>& labels, const SplitConfig& cfg, std::uint64_t seed) {
  std::vector<Split> out(labels.size(), Split::Train);
  for (bool cls : {true, false}) {
    std::vector<std::size_t> idx = indices_of(labels, cls);
    Rng rng(derive_seed(seed, {kTagSplit, cls ? 1u : 0u}));
    shuffle(idx, rng);
    const auto m = static_cast<double>(idx.size());
    const auto n_train = static_cast<std::size_t>(std::lround(m * cfg.train));
    const auto n_val = std::min(idx.size() - std::min(idx.size(), n_train),
                                static_cast<std::size_t>(std::lround(m * cfg.val)));
    for (std::size_t i = 0; i < idx.size(); ++i)
      out[idx[i]] = i < n_train ? Split::Train : (i < n_train + n_val ? Split::Val : Split::Test);
  }
  return out;
}

std::vector<int> stratified_folds(const std::vector<bool>& labels, int k, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("stratified_folds: k must be >= 1");
  std::vector<int> out(labels.size(), 0);
  std::size_t counter = 0;
  for (bool cls : {true, false}) {
    std::vector<std::size_t> idx = indices_of(labels, cls);
    Rng rng(derive_seed(seed, {kTagFold, cls ? 1u : 0u}));
    shuffle(idx, rng);
    for (std::size_t i : idx) out[i] = static_cast<int>(counter++ % static_cast<std::size_t>(k));
  }
  return out;
}

std::vector<SpinePhantom> plan_phantoms(const ExperimentConfig& cfg) {
  const int n = cfg.dataset.n_samples;
  const int want_pos = static_cast<int>(std::lround(n * cfg.split.scoliosis_fraction));
  const int want_neg = n - want_pos;
  int pos = 0, neg = 0;
  std::vector<SpinePhantom> out;
  out.reserve(static_cast<std::size_t>(n));
  const long long max_candidates = 200LL * n + 1000;
  for (long long c = 0; pos + neg < n; ++c) {
    if (c >= max_candidates)
      throw ParameterError("dataset: could not fill the scoliosis quota (" + std::to_string(pos) + "/" +
                           std::to_string(want_pos) + " positive, " + std::to_string(neg) + "/" +
                           std::to_string(want_neg) + " negative); check scoliosis_threshold");
    SpinePhantom ph = sample_phantom(cfg.dataset.phantom, derive_seed(cfg.seed, {kTagCandidate,
                                                                                 static_cast<std::uint64_t>(c)}));
    if (ph.scoliosis_label ? pos >= want_pos : neg >= want_neg) continue;
    (ph.scoliosis_label ? pos : neg) += 1;
    out.push_back(std::move(ph));
  }
  return out;
}

DatasetManifest generate_dataset(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<SpinePhantom> phantoms = plan_phantoms(cfg);
  std::vector<bool> labels;
  for (const SpinePhantom& p : phantoms) labels.push_back(p.scoliosis_label);
  const std::vector<Split> splits = stratified_split(labels, cfg.split, cfg.seed);

  const std::filesystem::path dir = cfg.dataset_dir();
  DatasetManifest manifest;
  manifest.samples.resize(phantoms.size());
  parallel_for(phantoms.size(), cfg.threads, [&](std::size_t, std::size_t i) {
    const SpinePhantom& ph = phantoms[i];
    SampleRecord& r = manifest.samples[i];
    r.id = sample_id(static_cast<int>(i));
    r.seed = ph.params.seed;
    r.scoliosis = ph.scoliosis_label;
    r.split = splits[i];
    r.phantom = "phantoms/" + r.id + ".txt";
    r.volume = "masks/" + r.id + ".vol";
    r.render = "renders/" + r.id + ".pgm";
    r.curves = "curves/" + r.id + ".csv";
    try {
      const VoxelMask vol = rasterize(ph, cfg.eval.voxel_size_mm);
      const PseudoDxaImage dxa = render_pseudo_dxa(ph, vol, cfg.dataset.render);
      write_phantom_params(dir / r.phantom, ph.params);
      write_volume(dir / r.volume, vol);
      write_pgm(dir / r.render, dxa.grid, cfg.dataset.pgm_scale);
      write_curveset_csv(dir / r.curves, curves_from_volume(vol));
    } catch (const std::exception& e) {
      throw IoError("sample " + r.id + ": " + e.what());
    }
  });
  write_manifest(dir / "manifest.csv", manifest);
  return manifest;
}

LoadedSample load_sample(const std::filesystem::path& dataset_dir, const SampleRecord& rec, bool with_volume) {
  try {
    LoadedSample s;
    s.params = read_phantom_params(dataset_dir / rec.phantom);
    s.render = read_pgm(dataset_dir / rec.render);
    if (with_volume) s.volume = read_volume(dataset_dir / rec.volume);
    s.curves = read_curveset_csv(dataset_dir / rec.curves);
    return s;
  } catch (const std::exception& e) {
    throw IoError("sample " + rec.id + ": " + e.what());
  }
}

}  // namespace spine3d
