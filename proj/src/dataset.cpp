#include "fusionlung/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "fusionlung/errors.hpp"

namespace fs = std::filesystem;

namespace fusionlung {

namespace {

bool has_extension(const fs::path& p, std::initializer_list<const char*> exts) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  for (const char* x : exts) {
    if (e == x) return true;
  }
  return false;
}

// Identical shuffles on every platform; std::shuffle's draw sequence is
// implementation-defined, so roll Fisher-Yates by hand over mt19937_64.
template <typename T>
void seeded_shuffle(std::vector<T>& v, uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = rng() % i;
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

std::optional<DatasetEntry> DatasetIndex::find(const std::string& id) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), id,
                             [](const DatasetEntry& e, const std::string& s) { return e.id < s; });
  if (it != entries.end() && it->id == id) return *it;
  return std::nullopt;
}

DatasetIndex scan_dataset(const fs::path& root) {
  fs::path images_dir = root / "images";
  fs::path masks_dir = root / "masks";
  if (!fs::is_directory(images_dir) || !fs::is_directory(masks_dir)) {
    throw EmptyDataset(root.string() + " (expected images/ and masks/ subdirectories)");
  }

  std::map<std::string, fs::path> masks;
  for (const auto& entry : fs::directory_iterator(masks_dir)) {
    if (entry.is_regular_file() && has_extension(entry.path(), {".png", ".jpg", ".jpeg"})) {
      masks.emplace(entry.path().stem().string(), entry.path());
    }
  }

  DatasetIndex index;
  index.root = root;
  for (const auto& entry : fs::directory_iterator(images_dir)) {
    if (!entry.is_regular_file() || !has_extension(entry.path(), {".png", ".jpg", ".jpeg"})) {
      continue;
    }
    std::string id = entry.path().stem().string();
    auto it = masks.find(id);
    if (it == masks.end()) {
      throw MissingMask(id);
    }
    index.entries.push_back({id, entry.path(), it->second});
  }
  if (index.entries.empty()) {
    throw EmptyDataset(root.string());
  }
  std::sort(index.entries.begin(), index.entries.end(),
            [](const DatasetEntry& a, const DatasetEntry& b) { return a.id < b.id; });
  return index;
}

BinaryMask load_mask(const fs::path& path) { return read_mask(path); }

std::pair<DatasetIndex, DatasetIndex> split_dataset(const DatasetIndex& index, size_t test_count,
                                                    uint64_t seed) {
  if (test_count == 0 || test_count >= index.size()) {
    throw InvalidSplit("test_count must be in (0, " + std::to_string(index.size()) + "), got " +
                       std::to_string(test_count));
  }
  std::vector<size_t> order(index.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  seeded_shuffle(order, seed);

  DatasetIndex train, test;
  train.root = test.root = index.root;
  train.split = SplitKind::train;
  test.split = SplitKind::test;
  train.seed = test.seed = seed;
  for (size_t i = 0; i < order.size(); ++i) {
    (i < test_count ? test : train).entries.push_back(index.entries[order[i]]);
  }
  auto by_id = [](const DatasetEntry& a, const DatasetEntry& b) { return a.id < b.id; };
  std::sort(train.entries.begin(), train.entries.end(), by_id);
  std::sort(test.entries.begin(), test.entries.end(), by_id);
  return {std::move(train), std::move(test)};
}

std::vector<std::vector<std::string>> make_batches(const DatasetIndex& index, size_t batch_size,
                                                   uint64_t seed, uint64_t epoch) {
  if (batch_size < 1) {
    throw ConfigError("batch_size must be >= 1");
  }
  std::vector<std::string> ids;
  ids.reserve(index.size());
  for (const auto& e : index.entries) ids.push_back(e.id);
  // Mix seed and epoch into one stream key (splitmix-style) so epochs are
  // independent permutations.
  uint64_t key = seed * 0x9e3779b97f4a7c15ULL + (epoch + 1) * 0xbf58476d1ce4e5b9ULL;
  seeded_shuffle(ids, key);

  std::vector<std::vector<std::string>> batches;
  for (size_t i = 0; i < ids.size(); i += batch_size) {
    size_t end = std::min(i + batch_size, ids.size());
    batches.emplace_back(ids.begin() + i, ids.begin() + end);
  }
  return batches;
}

void write_split_manifest(const fs::path& file, const DatasetIndex& index) {
  std::ofstream out(file);
  if (!out) {
    throw Error("cannot write split manifest " + file.string());
  }
  for (const auto& e : index.entries) out << e.id << "\n";
}

DatasetIndex load_split_manifest(const fs::path& file, const DatasetIndex& full) {
  std::ifstream in(file);
  if (!in) {
    throw Error("cannot read split manifest " + file.string());
  }
  DatasetIndex out;
  out.root = full.root;
  std::string line;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || !seen.insert(line).second) continue;
    auto entry = full.find(line);
    if (!entry) {
      throw Error("manifest id '" + line + "' not present in dataset");
    }
    out.entries.push_back(*entry);
  }
  if (out.entries.empty()) {
    throw EmptyDataset(file.string());
  }
  std::sort(out.entries.begin(), out.entries.end(),
            [](const DatasetEntry& a, const DatasetEntry& b) { return a.id < b.id; });
  return out;
}

}  // namespace fusionlung
