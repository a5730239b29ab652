#pragma once

#include <cstdint>
#include <filesystem>

#include "fusionlung/image.hpp"

namespace fusionlung {

/// Seeded synthetic segmentation corpus: one bright rotated ellipse per
/// image over a noisy darker background, plus small distractor blobs that
/// are not part of the mask. Useful for desk-scale end-to-end runs.
struct SynthConfig {
  int count = 240;
  int height = 160;
  int width = 160;
  uint64_t seed = 7;
};

struct SynthSample {
  GrayImage image;  // [0,1]
  BinaryMask mask;
};

SynthSample make_ellipse_sample(const SynthConfig& cfg, uint64_t index);

/// Writes `root/images/synth_####.png` (8-bit) and matching masks.
void generate_ellipse_dataset(const std::filesystem::path& root, const SynthConfig& cfg);

}  // namespace fusionlung
