#include <fstream>
#include <random>
#include <set>

#include "fusionlung/dataset.hpp"
#include "oracles.hpp"

#ifdef CHECK
#undef CHECK  // torch's c10 logging also claims this name
#endif
#include <doctest.h>

using namespace fusionlung;
namespace fs = std::filesystem;

namespace {

void write_pair(const fs::path& root, const std::string& id, int h = 8, int w = 8) {
  GrayImage img(h, w, 0.5f);
  BinaryMask mask(h, w, 1);
  write_gray_png8(root / "images" / (id + ".png"), img);
  write_mask_png(root / "masks" / (id + ".png"), mask);
}

fs::path make_dataset(const oracles::TempDir& tmp, const std::vector<std::string>& ids) {
  fs::create_directories(tmp.path() / "images");
  fs::create_directories(tmp.path() / "masks");
  for (const auto& id : ids) write_pair(tmp.path(), id);
  return tmp.path();
}

}  // namespace

TEST_CASE("scan_dataset returns lexicographically sorted matched pairs") {
  oracles::TempDir tmp("flds");
  auto root = make_dataset(tmp, {"b", "c", "a"});
  auto index = scan_dataset(root);
  REQUIRE(index.size() == 3);
  CHECK(index.at(0).id == "a");
  CHECK(index.at(1).id == "b");
  CHECK(index.at(2).id == "c");
}

TEST_CASE("scan_dataset reports a missing mask") {
  oracles::TempDir tmp("flds");
  auto root = make_dataset(tmp, {"x"});
  GrayImage img(8, 8, 0.2f);
  write_gray_png8(root / "images" / "orphan.png", img);
  CHECK_THROWS_AS(scan_dataset(root), MissingMask);
}

TEST_CASE("scan_dataset rejects an empty root") {
  oracles::TempDir tmp("flds");
  fs::create_directories(tmp.path() / "images");
  fs::create_directories(tmp.path() / "masks");
  CHECK_THROWS_AS(scan_dataset(tmp.path()), EmptyDataset);
}

TEST_CASE("scan_dataset handles a LungSegDB-sized layout") {
  // 2500 stems; scanning only lists files, so empty payloads suffice.
  oracles::TempDir tmp("flds");
  fs::create_directories(tmp.path() / "images");
  fs::create_directories(tmp.path() / "masks");
  for (int i = 0; i < 2500; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "ct_%05d", i);
    std::ofstream(tmp.path() / "images" / (std::string(name) + ".png")).put('\0');
    std::ofstream(tmp.path() / "masks" / (std::string(name) + ".png")).put('\0');
  }
  auto index = scan_dataset(tmp.path());
  CHECK(index.size() == 2500);

  auto [train, test] = split_dataset(index, 150, 7);
  CHECK(train.size() == 2350);
  CHECK(test.size() == 150);
}

TEST_CASE("load_mask binarizes with the >127 rule") {
  oracles::TempDir tmp("flmask");

  SUBCASE("all-zero raster") {
    GrayImage img(6, 6, 0.0f);
    auto p = tmp.path() / "zero.png";
    write_gray_png8(p, img);
    auto mask = load_mask(p);
    for (auto v : mask.pixels) CHECK(v == 0);
  }

  SUBCASE("0/255 raster maps to 0/1 in place") {
    GrayImage img(4, 4, 0.0f);
    img.at(1, 2) = 1.0f;
    img.at(3, 0) = 1.0f;
    auto p = tmp.path() / "bits.png";
    write_gray_png8(p, img);
    auto mask = load_mask(p);
    CHECK(mask.at(1, 2) == 1);
    CHECK(mask.at(3, 0) == 1);
    CHECK(mask.at(0, 0) == 0);
  }

  SUBCASE("value 128 is foreground") {
    GrayImage img(3, 3, 0.0f);
    img.at(1, 1) = 128.0f / 255.0f;  // encodes to the 8-bit value 128
    auto p = tmp.path() / "gray.png";
    write_gray_png8(p, img);
    auto mask = load_mask(p);
    CHECK(mask.at(1, 1) == 1);
  }
}

TEST_CASE("load_mask raises DecodeError on malformed input") {
  oracles::TempDir tmp("flmask");
  auto p = tmp.path() / "broken.png";
  std::ofstream(p) << "this is not a png";
  CHECK_THROWS_AS(load_mask(p), DecodeError);
  CHECK_THROWS_AS(load_mask(tmp.path() / "missing.png"), DecodeError);
}

TEST_CASE("mask encode/decode round-trips exactly") {
  oracles::TempDir tmp("flmask");
  std::mt19937_64 rng(21);
  BinaryMask mask(23, 17);
  for (auto& v : mask.pixels) v = rng() % 2;
  auto p = tmp.path() / "rt.png";
  write_mask_png(p, mask);
  auto back = load_mask(p);
  CHECK(back.height == mask.height);
  CHECK(back.width == mask.width);
  CHECK(back.pixels == mask.pixels);
}

TEST_CASE("split_dataset is deterministic, disjoint and complete") {
  oracles::TempDir tmp("flds");
  std::vector<std::string> ids;
  for (int i = 0; i < 20; ++i) ids.push_back("img" + std::to_string(i));
  auto index = scan_dataset(make_dataset(tmp, ids));

  auto [train1, test1] = split_dataset(index, 6, 42);
  auto [train2, test2] = split_dataset(index, 6, 42);
  CHECK(train1.size() == 14);
  CHECK(test1.size() == 6);

  auto id_set = [](const DatasetIndex& idx) {
    std::set<std::string> s;
    for (const auto& e : idx.entries) s.insert(e.id);
    return s;
  };
  auto tr = id_set(train1), te = id_set(test1);
  for (const auto& id : te) CHECK(tr.count(id) == 0);
  CHECK(tr.size() + te.size() == index.size());

  CHECK(id_set(train2) == tr);
  CHECK(id_set(test2) == te);

  auto [train3, test3] = split_dataset(index, 6, 43);
  CHECK(id_set(test3) != te);  // different seed, different draw
}

TEST_CASE("split_dataset rejects out-of-range test counts") {
  oracles::TempDir tmp("flds");
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("i" + std::to_string(i));
  auto index = scan_dataset(make_dataset(tmp, ids));
  CHECK_THROWS_AS(split_dataset(index, 10, 1), InvalidSplit);
  CHECK_THROWS_AS(split_dataset(index, 0, 1), InvalidSplit);
}

TEST_CASE("make_batches covers every id exactly once per epoch") {
  oracles::TempDir tmp("flds");
  std::vector<std::string> ids;
  for (int i = 0; i < 100; ++i) ids.push_back("s" + std::to_string(i));
  auto index = scan_dataset(make_dataset(tmp, ids));

  auto batches = make_batches(index, 32, 7, 0);
  REQUIRE(batches.size() == 4);
  CHECK(batches[0].size() == 32);
  CHECK(batches[1].size() == 32);
  CHECK(batches[2].size() == 32);
  CHECK(batches[3].size() == 4);

  std::multiset<std::string> seen;
  for (const auto& b : batches) seen.insert(b.begin(), b.end());
  std::multiset<std::string> expected(ids.begin(), ids.end());
  CHECK(seen == expected);
}

TEST_CASE("make_batches with batch size 1 yields singletons") {
  oracles::TempDir tmp("flds");
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("s" + std::to_string(i));
  auto index = scan_dataset(make_dataset(tmp, ids));
  auto batches = make_batches(index, 1, 3, 0);
  CHECK(batches.size() == 10);
  for (const auto& b : batches) CHECK(b.size() == 1);
}

TEST_CASE("make_batches is a pure function of seed and epoch") {
  oracles::TempDir tmp("flds");
  std::vector<std::string> ids;
  for (int i = 0; i < 50; ++i) ids.push_back("s" + std::to_string(i));
  auto index = scan_dataset(make_dataset(tmp, ids));

  CHECK(make_batches(index, 8, 7, 3) == make_batches(index, 8, 7, 3));
  CHECK(make_batches(index, 8, 7, 3) != make_batches(index, 8, 7, 4));
  CHECK(make_batches(index, 8, 7, 3) != make_batches(index, 8, 8, 3));
}

TEST_CASE("split manifests round-trip") {
  oracles::TempDir tmp("flds");
  std::vector<std::string> ids;
  for (int i = 0; i < 12; ++i) ids.push_back("m" + std::to_string(i));
  auto index = scan_dataset(make_dataset(tmp, ids));
  auto [train, test] = split_dataset(index, 4, 9);

  auto file = tmp.path() / "test.txt";
  write_split_manifest(file, test);
  auto loaded = load_split_manifest(file, index);
  REQUIRE(loaded.size() == test.size());
  for (size_t i = 0; i < loaded.size(); ++i) CHECK(loaded.at(i).id == test.at(i).id);
}
