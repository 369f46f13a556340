#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spine3d/config.hpp"
#include "spine3d/curves.hpp"
#include "spine3d/grid.hpp"
#include "spine3d/phantom.hpp"

namespace spine3d {

enum class Split { Train, Val, Test };

std::string to_string(Split s);
Split parse_split(const std::string& s);

struct SampleRecord {
  std::string id;
  std::uint64_t seed = 0;
  bool scoliosis = false;
  Split split = Split::Train;
  bool aligned = true;
  // Paths relative to the dataset directory.
  std::string phantom;
  std::string volume;
  std::string render;
  std::string curves;

  bool operator==(const SampleRecord&) const = default;
};

struct DatasetManifest {
  std::vector<SampleRecord> samples;

  /// Records of one split in manifest order, optionally only aligned ones.
  std::vector<SampleRecord> select(Split s, bool aligned_only = true) const;
  bool operator==(const DatasetManifest&) const = default;
};

/// CSV columns: id,seed,scoliosis,split,aligned,phantom,volume,render,curves.
std::string format_manifest_csv(const DatasetManifest& m);
DatasetManifest parse_manifest_csv(const std::string& text);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path);

std::string sample_id(int index);

/// Each class is shuffled with its own seeded stream and cut train/val/test in
/// the configured proportions (rounded, test takes the remainder), so every split
/// holds the same share of positive labels up to rounding.
std::vector<Split> stratified_split(const std::vector<bool>& labels, const SplitConfig& cfg, std::uint64_t seed);

/// Fold index per item, 0..k-1. Items are shuffled per class and dealt round-robin
/// with one counter across classes, so fold sizes differ by at most one and each
/// fold has a near-equal share of positives.
std::vector<int> stratified_folds(const std::vector<bool>& labels, int k, std::uint64_t seed);

/// Phantoms for a dataset: candidate seeds are drawn in order and kept until
/// round(n * scoliosis_fraction) positives and the remaining negatives are
/// filled. Returns the phantoms in id order.
std::vector<SpinePhantom> plan_phantoms(const ExperimentConfig& cfg);

/// Writes phantoms/, masks/, renders/, curves/ and manifest.csv under
/// cfg.dataset_dir(). Deterministic in cfg.
DatasetManifest generate_dataset(const ExperimentConfig& cfg);

struct LoadedSample {
  PhantomParams params;
  Image2D render;
  VoxelMask volume;
  CurveSet curves;
};

/// Reads one sample's files; IoError messages name the sample id.
LoadedSample load_sample(const std::filesystem::path& dataset_dir, const SampleRecord& rec, bool with_volume = true);

}  // namespace spine3d
