#pragma once

#include "fusionlung/image.hpp"

namespace fusionlung {

struct PreprocessConfig {
  int target_height = 320;
  int target_width = 320;
  int median_window = 3;    // odd, >= 3
  int thresh_window = 15;   // odd, >= 3
  float thresh_k = 0.0f;    // std-dev multiplier in T(x,y)
  float enhance_alpha = 1.2f;
  float enhance_beta = 0.05f;
  bool artifact_removal = true;

  /// Throws ConfigError on invalid values (even windows, size < 32, alpha <= 0).
  void validate() const;
};

/// Bilinear resize with half-pixel centers; values never leave the input
/// range. Returns the input untouched when the size already matches.
RawImage resize(const RawImage& img, int out_height, int out_width);
GrayImage resize_unit(const GrayImage& img, int out_height, int out_width);

/// Nearest-neighbour mask resize; output stays strictly {0,1}.
BinaryMask resize_mask(const BinaryMask& mask, int out_height, int out_width);

/// Per-image min-max normalization to [0,1], collapsing color to grayscale
/// by channel mean. A constant image maps to all zeros.
GrayImage normalize_minmax(const RawImage& img);

/// Exact windowed median with edge replication at the borders.
GrayImage median_filter(const GrayImage& img, int window);

/// Contrast enhancement gated by the local dynamic threshold
/// T = mean + k*std over thresh_window: pixels above T become
/// clamp(alpha*v + beta, 0, 1), the rest pass through.
GrayImage dynamic_threshold_enhance(const GrayImage& img, const PreprocessConfig& cfg);

struct ArtifactResult {
  GrayImage image;
  bool degenerate = false;  // Otsu found no foreground; image passed through
};

/// Keeps the body region (largest connected component of the Otsu
/// foreground, holes filled) and zeroes everything outside it.
ArtifactResult remove_artifacts(const GrayImage& img);

/// Otsu threshold over a 256-bin histogram of [0,1] values. Returns the
/// bin index k; foreground is bin(v) > k. Returns -1 when no split exists
/// (single occupied bin).
int otsu_threshold_bin(const GrayImage& img);

struct PreprocessStages {
  GrayImage resized;   // post-resize, normalized to [0,1]
  GrayImage median;
  GrayImage enhanced;
  GrayImage body;      // final output (equals `enhanced` when artifact removal is off)
  bool degenerate = false;
};

/// Full pipeline in §-order: resize -> normalize -> median -> enhance ->
/// artifact removal (optional). Deterministic.
PreprocessStages preprocess_stages(const RawImage& img, const PreprocessConfig& cfg);

struct PreprocessResult {
  GrayImage image;
  bool degenerate = false;
};

PreprocessResult preprocess(const RawImage& img, const PreprocessConfig& cfg);

}  // namespace fusionlung
