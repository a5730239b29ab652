#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fusionlung/image.hpp"

namespace fusionlung {

enum class SplitKind { full, train, test };

struct DatasetEntry {
  std::string id;  // file stem shared by image and mask
  std::filesystem::path image_path;
  std::filesystem::path mask_path;
};

/// Immutable listing of image/mask pairs under a dataset root, always
/// sorted lexicographically (byte-wise) by id.
struct DatasetIndex {
  std::filesystem::path root;
  std::vector<DatasetEntry> entries;
  SplitKind split = SplitKind::full;
  uint64_t seed = 0;

  size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  const DatasetEntry& at(size_t i) const { return entries[i]; }
  std::optional<DatasetEntry> find(const std::string& id) const;
};

/// Walks `root/images` and `root/masks`, pairing files by stem.
/// Images may be .png/.jpg/.jpeg, masks are .png (any of the above accepted
/// when reading). Throws MissingMask for an unmatched image and EmptyDataset
/// when nothing pairs up.
DatasetIndex scan_dataset(const std::filesystem::path& root);

/// 8-bit grayscale raster -> {0,1} mask (values > 127 are foreground).
BinaryMask load_mask(const std::filesystem::path& path);

/// Seeded random split into (train, test). Deterministic for a given
/// (index, seed); splits are disjoint, their union is the input, and both
/// come back sorted by id.
std::pair<DatasetIndex, DatasetIndex> split_dataset(const DatasetIndex& index, size_t test_count,
                                                    uint64_t seed);

/// Epoch batching: a pure function of (seed, epoch). Every id appears
/// exactly once; the last batch may be short.
std::vector<std::vector<std::string>> make_batches(const DatasetIndex& index, size_t batch_size,
                                                   uint64_t seed, uint64_t epoch);

/// One id per line.
void write_split_manifest(const std::filesystem::path& file, const DatasetIndex& index);

/// Rebuilds an index from a manifest, resolving ids against `full`.
DatasetIndex load_split_manifest(const std::filesystem::path& file, const DatasetIndex& full);

}  // namespace fusionlung
