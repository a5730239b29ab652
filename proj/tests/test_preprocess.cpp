#include <random>

#include "fusionlung/preprocess.hpp"
#include "oracles.hpp"

#ifdef CHECK
#undef CHECK  // torch's c10 logging also claims this name
#endif
#include <doctest.h>

using namespace fusionlung;

namespace {

RawImage make_raw(int h, int w, float fill = 0.0f) {
  RawImage img;
  img.height = h;
  img.width = w;
  img.channels = 1;
  img.bit_depth = 8;
  img.pixels.assign(static_cast<size_t>(h) * w, fill);
  return img;
}

GrayImage random_gray(int h, int w, uint64_t seed, bool quantized = false) {
  std::mt19937_64 rng(seed);
  GrayImage img(h, w);
  for (auto& v : img.pixels) {
    uint32_t q = rng() % 256;
    v = quantized ? q / 255.0f : static_cast<float>((rng() >> 11) * 0x1.0p-53);
  }
  return img;
}

}  // namespace

TEST_CASE("resize produces the requested shape") {
  auto img = make_raw(512, 512, 40.0f);
  std::mt19937_64 rng(3);
  for (auto& v : img.pixels) v = static_cast<float>(rng() % 256);
  auto out = resize(img, 320, 320);
  CHECK(out.height == 320);
  CHECK(out.width == 320);
  for (float v : out.pixels) {
    CHECK(v >= 0.0f);
    CHECK(v <= 255.0f);
  }
}

TEST_CASE("resize to the same size is a bitwise identity") {
  auto img = make_raw(320, 320);
  std::mt19937_64 rng(4);
  for (auto& v : img.pixels) v = static_cast<float>(rng() % 256);
  auto out = resize(img, 320, 320);
  CHECK(out.pixels == img.pixels);
}

TEST_CASE("resize keeps constant images constant") {
  for (float v : {0.0f, 17.0f, 200.5f}) {
    auto img = make_raw(37, 53, v);
    auto out = resize(img, 320, 160);
    for (float p : out.pixels) CHECK(p == v);
  }
}

TEST_CASE("median filter leaves constant images unchanged") {
  GrayImage img(16, 16, 0.42f);
  auto out = median_filter(img, 3);
  CHECK(out.pixels == img.pixels);
  auto again = median_filter(out, 3);
  CHECK(again.pixels == out.pixels);
}

TEST_CASE("median filter removes an isolated outlier") {
  GrayImage img(3, 3);
  const float vals[9] = {1, 2, 3, 4, 100, 6, 7, 8, 9};
  for (int i = 0; i < 9; ++i) img.pixels[i] = vals[i] / 100.0f;
  auto out = median_filter(img, 3);
  // the center window holds {1,2,3,4,6,7,8,9,100}; its median is 6
  CHECK(out.at(1, 1) == doctest::Approx(6.0f / 100.0f).epsilon(1e-7));
}

TEST_CASE("median filter zeroes a single salt pixel") {
  GrayImage img(5, 5, 0.0f);
  img.at(2, 2) = 1.0f;
  auto out = median_filter(img, 3);
  for (float v : out.pixels) CHECK(v == 0.0f);
}

TEST_CASE("median filter matches the brute-force oracle") {
  for (int window : {3, 5}) {
    auto img = random_gray(17, 13, 99 + window);
    auto out = median_filter(img, window);
    auto ref = oracles::median_ref(img, window);
    CHECK(out.pixels == ref.pixels);
  }
}

TEST_CASE("median filter never extends the value range") {
  auto img = random_gray(20, 20, 123);
  auto out = median_filter(img, 5);
  auto in_minmax = std::minmax_element(img.pixels.begin(), img.pixels.end());
  auto out_minmax = std::minmax_element(out.pixels.begin(), out.pixels.end());
  CHECK(*out_minmax.second <= *in_minmax.second);
  CHECK(*out_minmax.first >= *in_minmax.first);
}

TEST_CASE("dynamic threshold enhancement with alpha=1 beta=0 is the identity") {
  PreprocessConfig cfg;
  cfg.enhance_alpha = 1.0f;
  cfg.enhance_beta = 0.0f;
  cfg.thresh_window = 5;
  auto img = random_gray(12, 12, 7);
  auto out = dynamic_threshold_enhance(img, cfg);
  CHECK(out.pixels == img.pixels);
}

TEST_CASE("dynamic threshold leaves constant images unchanged") {
  PreprocessConfig cfg;
  cfg.thresh_k = 0.0f;
  cfg.thresh_window = 5;
  GrayImage img(10, 10, 0.3f);
  auto out = dynamic_threshold_enhance(img, cfg);
  CHECK(out.pixels == img.pixels);  // no pixel strictly exceeds its local mean
}

TEST_CASE("dynamic threshold scales only the bright block") {
  PreprocessConfig cfg;
  cfg.thresh_window = 5;
  cfg.thresh_k = 0.0f;
  cfg.enhance_alpha = 1.2f;
  cfg.enhance_beta = 0.05f;
  GrayImage img(8, 8, 0.1f);
  for (int y = 3; y <= 4; ++y)
    for (int x = 3; x <= 4; ++x) img.at(y, x) = 0.7f;

  auto out = dynamic_threshold_enhance(img, cfg);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      bool in_block = y >= 3 && y <= 4 && x >= 3 && x <= 4;
      if (in_block) {
        CHECK(out.at(y, x) == doctest::Approx(0.7f * 1.2f + 0.05f).epsilon(1e-6));
      } else {
        CHECK(out.at(y, x) == img.at(y, x));
      }
      // cross-check the gate against independent local statistics
      double mean, stddev;
      oracles::local_stats_ref(img, cfg.thresh_window, y, x, mean, stddev);
      bool gated = img.at(y, x) > mean + cfg.thresh_k * stddev;
      CHECK(gated == in_block);
    }
  }
}

TEST_CASE("dynamic threshold matches the per-pixel oracle on quantized noise") {
  PreprocessConfig cfg;
  cfg.thresh_window = 7;
  cfg.thresh_k = 0.5f;
  cfg.enhance_alpha = 1.3f;
  cfg.enhance_beta = 0.02f;
  auto img = random_gray(21, 19, 5, /*quantized=*/true);
  auto out = dynamic_threshold_enhance(img, cfg);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double mean, stddev;
      oracles::local_stats_ref(img, cfg.thresh_window, y, x, mean, stddev);
      double t = mean + cfg.thresh_k * stddev;
      double expected =
          img.at(y, x) > t
              ? std::clamp(cfg.enhance_alpha * img.at(y, x) + cfg.enhance_beta, 0.0f, 1.0f)
              : img.at(y, x);
      CHECK(out.at(y, x) == doctest::Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("artifact removal keeps an image that is already body-only") {
  GrayImage img(32, 32, 0.0f);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      double dy = y - 16, dx = x - 16;
      if (dy * dy + dx * dx <= 100) img.at(y, x) = 0.8f;
    }
  auto res = remove_artifacts(img);
  CHECK_FALSE(res.degenerate);
  CHECK(res.image.pixels == img.pixels);
}

TEST_CASE("artifact removal zeroes a disconnected corner blob") {
  GrayImage img(16, 16, 0.05f);
  for (int y = 5; y <= 11; ++y)
    for (int x = 5; x <= 11; ++x) img.at(y, x) = 0.9f;  // central body
  img.at(0, 0) = img.at(0, 1) = img.at(1, 0) = 0.9f;    // corner artifact

  auto res = remove_artifacts(img);
  CHECK_FALSE(res.degenerate);
  CHECK(res.image.at(0, 0) == 0.0f);
  CHECK(res.image.at(0, 1) == 0.0f);
  CHECK(res.image.at(1, 0) == 0.0f);
  for (int y = 5; y <= 11; ++y)
    for (int x = 5; x <= 11; ++x) CHECK(res.image.at(y, x) == 0.9f);
}

TEST_CASE("artifact removal keeps dark interior holes of the body") {
  GrayImage img(16, 16, 0.05f);
  for (int y = 3; y <= 12; ++y)
    for (int x = 3; x <= 12; ++x) img.at(y, x) = 0.9f;
  for (int y = 6; y <= 9; ++y)
    for (int x = 6; x <= 9; ++x) img.at(y, x) = 0.1f;  // lung-like hole

  auto res = remove_artifacts(img);
  CHECK(res.image.at(7, 7) == 0.1f);  // interior preserved, not zeroed
}

TEST_CASE("artifact removal flags an all-zero image as degenerate") {
  GrayImage img(8, 8, 0.0f);
  auto res = remove_artifacts(img);
  CHECK(res.degenerate);
  CHECK(res.image.pixels == img.pixels);
}

TEST_CASE("preprocess output shape equals the configured target") {
  PreprocessConfig cfg;
  cfg.target_height = 64;
  cfg.target_width = 96;
  cfg.thresh_window = 5;
  auto img = make_raw(100, 140);
  std::mt19937_64 rng(11);
  for (auto& v : img.pixels) v = static_cast<float>(rng() % 256);
  auto res = preprocess(img, cfg);
  CHECK(res.image.height == 64);
  CHECK(res.image.width == 96);
  for (float v : res.image.pixels) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("preprocess with artifact removal disabled stops at the enhance stage") {
  PreprocessConfig cfg;
  cfg.target_height = 48;
  cfg.target_width = 48;
  cfg.thresh_window = 5;
  cfg.artifact_removal = false;
  auto img = make_raw(60, 60);
  std::mt19937_64 rng(12);
  for (auto& v : img.pixels) v = static_cast<float>(rng() % 256);

  auto stages = preprocess_stages(img, cfg);
  CHECK(stages.body.pixels == stages.enhanced.pixels);
}

TEST_CASE("preprocess is deterministic") {
  PreprocessConfig cfg;
  cfg.target_height = 64;
  cfg.target_width = 64;
  cfg.thresh_window = 5;
  auto img = make_raw(80, 80);
  std::mt19937_64 rng(13);
  for (auto& v : img.pixels) v = static_cast<float>(rng() % 256);

  auto a = preprocess(img, cfg);
  auto b = preprocess(img, cfg);
  CHECK(a.image.pixels == b.image.pixels);
  CHECK(a.degenerate == b.degenerate);
}

TEST_CASE("all preprocessing stages stay in unit range and keep their shape") {
  PreprocessConfig cfg;
  cfg.target_height = 64;
  cfg.target_width = 64;
  cfg.thresh_window = 9;
  auto img = make_raw(90, 70);
  std::mt19937_64 rng(14);
  for (auto& v : img.pixels) v = static_cast<float>(rng() % 256);

  auto st = preprocess_stages(img, cfg);
  for (const GrayImage* stage : {&st.resized, &st.median, &st.enhanced, &st.body}) {
    CHECK(stage->height == 64);
    CHECK(stage->width == 64);
    for (float v : stage->pixels) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("preprocess config validation rejects bad values") {
  PreprocessConfig cfg;
  cfg.median_window = 4;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.median_window = 3;
  cfg.enhance_alpha = 0.0f;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.enhance_alpha = 1.0f;
  cfg.target_height = 16;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
