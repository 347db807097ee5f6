#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unmix/rng.hpp"
#include "unmix/tensor.hpp"

namespace unmix {

enum class SourceLabel { SourceX, SourceB };

// One raw source image, CHW layout, intensities in [0,1].
struct SourceImage {
  TensorF pixels;
  SourceLabel source_label = SourceLabel::SourceX;
  std::string origin_id;
};

// An additive mixture. Ground truth rides along for evaluation only; the
// unsupervised training path never sees gt_x/gt_b.
struct Mixture {
  TensorF pixels;
  TensorF gt_x, gt_b;  // unweighted sources; empty when absent
  std::string origin_x, origin_b;

  bool has_ground_truth() const { return !gt_x.empty() && !gt_b.empty(); }
};

enum class Profile { MnistDigits, ShoesBags, Custom };

std::string profile_name(Profile p);
Profile profile_from_name(const std::string& s);

// Everything needed to regenerate a dataset byte-identically.
struct DatasetManifest {
  Profile profile = Profile::Custom;
  int64_t n_train = 0;
  int64_t n_val = 0;
  uint64_t seed = 0;
  float mixing_weight = 0.5f;
  bool invert_intensity = false;
  int64_t height = 32, width = 32, channels = 1;
  std::string generator;           // synthetic source generator ("bars8", "barsdots8")
  std::string source_x, source_b;  // raw-data locations (dirs); mnist uses source_x only

  void validate() const;
};

// ---- ingestion ----

// IDX pair (big-endian headers, magic 2051/2049). Output images are padded by
// 2 pixels on each side and scaled to [0,1]; digits 0-4 become SourceX,
// 5-9 SourceB.
std::vector<SourceImage> load_mnist_idx(const std::string& images_path,
                                        const std::string& labels_path);

struct FolderLoadReport {
  std::vector<std::string> skipped;  // undecodable files
};

// Decodes every image in a folder (sorted by filename), rescales to the
// manifest geometry and optionally inverts intensities.
std::vector<SourceImage> load_image_folder(const std::string& path, const DatasetManifest& m,
                                           SourceLabel label,
                                           FolderLoadReport* report = nullptr);

// ---- synthesis ----

enum class Split { Train, Val };

// Draws `n_train` or `n_val` source pairs and mixes them with the manifest
// weight: pixels = w*x + (1-w)*b. MNIST samples with replacement, everything
// else pairs shuffled pools without replacement.
std::vector<Mixture> synthesize_mixtures(const std::vector<SourceImage>& xs,
                                         const std::vector<SourceImage>& bs,
                                         const DatasetManifest& m, Split split);

struct Dataset {
  DatasetManifest manifest;
  std::vector<Mixture> train, val;
};

// Full builders per profile. The folder builder partitions the shuffled pools
// so no source appears in both splits.
Dataset build_mnist_dataset(const DatasetManifest& m);
Dataset build_folder_dataset(const DatasetManifest& m, FolderLoadReport* report = nullptr);
Dataset build_toy_dataset(const DatasetManifest& m);
Dataset build_dataset(const DatasetManifest& m, FolderLoadReport* report = nullptr);

// ---- pairing / batching ----

struct MixturePair {
  int32_t first = 0, second = 0;  // indices into a mixture list
};

// Fresh shuffled pairing for one epoch; each element lands in at most one
// pair, a final odd element is dropped.
std::vector<MixturePair> epoch_pairing(int64_t n, Rng& rng);

// Groups pairs into batches of `batch_size` pairs (final batch may be short).
std::vector<std::vector<MixturePair>> chunk_pairs(const std::vector<MixturePair>& pairs,
                                                  int64_t batch_size);

// One epoch worth of shuffled pair batches.
std::vector<std::vector<MixturePair>> batch_pairs(int64_t dataset_size, int64_t batch_size,
                                                  Rng& rng);

// Packs mixtures into NCHW tensors.
TensorF pack_mixtures(const std::vector<Mixture>& ds, const std::vector<int32_t>& indices);
std::pair<TensorF, TensorF> pack_pairs(const std::vector<Mixture>& ds,
                                       const std::vector<MixturePair>& batch);

// ---- RMXT tensor blobs ----
// 16-byte little-endian header: magic "RMXT", u16 version, u16 H, u16 W,
// u16 C, u32 count; payload is count images of H*W*C float32, HWC row-major.

void write_rmxt(const std::string& path, const std::vector<TensorF>& images_chw);
std::vector<TensorF> read_rmxt(const std::string& path);

// ---- dataset directory ----

void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);
DatasetManifest read_manifest_file(const std::string& path);
void write_manifest_file(const std::string& path, const DatasetManifest& m);

// FNV-1a 64 over manifest + blobs, hex string; stable across runs.
std::string dataset_hash(const std::string& dir);

}  // namespace unmix
