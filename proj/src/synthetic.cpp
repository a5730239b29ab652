#include "fusionlung/synthetic.hpp"

#include <array>
#include <cmath>
#include <random>

namespace fs = std::filesystem;

namespace fusionlung {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

}  // namespace

SynthSample make_ellipse_sample(const SynthConfig& cfg, uint64_t index) {
  std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + index + 1);

  const int h = cfg.height, w = cfg.width;
  const double cy = uniform(rng, 0.3, 0.7) * h;
  const double cx = uniform(rng, 0.3, 0.7) * w;
  const double ry = uniform(rng, 0.12, 0.3) * h;
  const double rx = uniform(rng, 0.12, 0.3) * w;
  const double angle = uniform(rng, 0.0, 3.14159265358979312);
  const double fg = uniform(rng, 0.65, 0.9);
  const double bg = uniform(rng, 0.1, 0.3);
  const double noise_amp = 0.05;
  const double ca = std::cos(angle), sa = std::sin(angle);

  // A couple of dim distractor blobs outside the mask.
  struct Blob {
    double y, x, r, v;
  };
  std::array<Blob, 2> blobs;
  for (auto& b : blobs) {
    b = {uniform(rng, 0.05, 0.95) * h, uniform(rng, 0.05, 0.95) * w,
         uniform(rng, 0.02, 0.05) * std::min(h, w), uniform(rng, 0.4, 0.55)};
  }

  SynthSample s;
  s.image = GrayImage(h, w);
  s.mask = BinaryMask(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double dy = y - cy, dx = x - cx;
      double u = (dx * ca + dy * sa) / rx;
      double v = (-dx * sa + dy * ca) / ry;
      bool inside = u * u + v * v <= 1.0;
      double value = inside ? fg : bg;
      for (const auto& b : blobs) {
        double by = y - b.y, bx = x - b.x;
        if (!inside && by * by + bx * bx <= b.r * b.r) value = b.v;
      }
      value += uniform(rng, -noise_amp, noise_amp);
      s.image.at(y, x) = static_cast<float>(std::clamp(value, 0.0, 1.0));
      s.mask.at(y, x) = inside ? 1 : 0;
    }
  }
  return s;
}

void generate_ellipse_dataset(const fs::path& root, const SynthConfig& cfg) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  for (int i = 0; i < cfg.count; ++i) {
    auto sample = make_ellipse_sample(cfg, static_cast<uint64_t>(i));
    char name[32];
    std::snprintf(name, sizeof(name), "synth_%04d", i);
    write_gray_png8(root / "images" / (std::string(name) + ".png"), sample.image);
    write_mask_png(root / "masks" / (std::string(name) + ".png"), sample.mask);
  }
}

}  // namespace fusionlung
