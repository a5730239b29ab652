#include "fusionlung/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <vector>

namespace fusionlung {

void PreprocessConfig::validate() const {
  if (target_height < 32 || target_width < 32) {
    throw ConfigError("preprocess.target_size components must be >= 32");
  }
  if (median_window < 3 || median_window % 2 == 0) {
    throw ConfigError("preprocess.median_window must be odd and >= 3");
  }
  if (thresh_window < 3 || thresh_window % 2 == 0) {
    throw ConfigError("preprocess.thresh_window must be odd and >= 3");
  }
  if (!(enhance_alpha > 0.0f)) {
    throw ConfigError("preprocess.enhance_alpha must be > 0");
  }
}

namespace {

// Source coordinate for half-pixel-center bilinear sampling.
inline void bilinear_coords(int out, int in, int o, int& i0, int& i1, double& w1) {
  double s = (o + 0.5) * static_cast<double>(in) / out - 0.5;
  s = std::clamp(s, 0.0, static_cast<double>(in - 1));
  i0 = static_cast<int>(s);
  i1 = std::min(i0 + 1, in - 1);
  w1 = s - i0;
}

}  // namespace

RawImage resize(const RawImage& img, int out_height, int out_width) {
  if (out_height < 1 || out_width < 1) {
    throw ConfigError("resize target must be >= 1 in both dimensions");
  }
  if (out_height == img.height && out_width == img.width) {
    return img;
  }
  RawImage out;
  out.height = out_height;
  out.width = out_width;
  out.channels = img.channels;
  out.bit_depth = img.bit_depth;
  out.pixels.resize(static_cast<size_t>(out_height) * out_width * img.channels);

  const double hi = img.max_value();
  for (int oy = 0; oy < out_height; ++oy) {
    int y0, y1;
    double wy;
    bilinear_coords(out_height, img.height, oy, y0, y1, wy);
    for (int ox = 0; ox < out_width; ++ox) {
      int x0, x1;
      double wx;
      bilinear_coords(out_width, img.width, ox, x0, x1, wx);
      for (int c = 0; c < img.channels; ++c) {
        double top = (1.0 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c);
        double bot = (1.0 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c);
        double v = (1.0 - wy) * top + wy * bot;
        out.at(oy, ox, c) = static_cast<float>(std::clamp(v, 0.0, hi));
      }
    }
  }
  return out;
}

GrayImage resize_unit(const GrayImage& img, int out_height, int out_width) {
  if (out_height == img.height && out_width == img.width) {
    return img;
  }
  GrayImage out(out_height, out_width);
  for (int oy = 0; oy < out_height; ++oy) {
    int y0, y1;
    double wy;
    bilinear_coords(out_height, img.height, oy, y0, y1, wy);
    for (int ox = 0; ox < out_width; ++ox) {
      int x0, x1;
      double wx;
      bilinear_coords(out_width, img.width, ox, x0, x1, wx);
      double top = (1.0 - wx) * img.at(y0, x0) + wx * img.at(y0, x1);
      double bot = (1.0 - wx) * img.at(y1, x0) + wx * img.at(y1, x1);
      double v = (1.0 - wy) * top + wy * bot;
      out.at(oy, ox) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return out;
}

BinaryMask resize_mask(const BinaryMask& mask, int out_height, int out_width) {
  if (out_height == mask.height && out_width == mask.width) {
    return mask;
  }
  BinaryMask out(out_height, out_width);
  for (int oy = 0; oy < out_height; ++oy) {
    int sy = std::min(static_cast<int>((oy + 0.5) * mask.height / out_height), mask.height - 1);
    for (int ox = 0; ox < out_width; ++ox) {
      int sx = std::min(static_cast<int>((ox + 0.5) * mask.width / out_width), mask.width - 1);
      out.at(oy, ox) = mask.at(sy, sx);
    }
  }
  return out;
}

GrayImage normalize_minmax(const RawImage& img) {
  GrayImage out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      float v = 0.0f;
      for (int c = 0; c < img.channels; ++c) v += img.at(y, x, c);
      out.at(y, x) = v / img.channels;
    }
  }
  auto [mn, mx] = std::minmax_element(out.pixels.begin(), out.pixels.end());
  float lo = *mn, span = *mx - *mn;
  if (span <= 0.0f) {
    std::fill(out.pixels.begin(), out.pixels.end(), 0.0f);
    return out;
  }
  for (float& v : out.pixels) v = (v - lo) / span;
  return out;
}

GrayImage median_filter(const GrayImage& img, int window) {
  if (window < 3 || window % 2 == 0) {
    throw ConfigError("median window must be odd and >= 3");
  }
  const int r = window / 2;
  GrayImage out(img.height, img.width);
  std::vector<float> patch(static_cast<size_t>(window) * window);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      size_t n = 0;
      for (int dy = -r; dy <= r; ++dy) {
        int sy = std::clamp(y + dy, 0, img.height - 1);
        for (int dx = -r; dx <= r; ++dx) {
          int sx = std::clamp(x + dx, 0, img.width - 1);
          patch[n++] = img.at(sy, sx);
        }
      }
      auto mid = patch.begin() + n / 2;
      std::nth_element(patch.begin(), mid, patch.begin() + n);
      out.at(y, x) = *mid;
    }
  }
  return out;
}

GrayImage dynamic_threshold_enhance(const GrayImage& img, const PreprocessConfig& cfg) {
  const int r = cfg.thresh_window / 2;
  const double n = static_cast<double>(cfg.thresh_window) * cfg.thresh_window;
  GrayImage out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double sum = 0.0, sumsq = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        int sy = std::clamp(y + dy, 0, img.height - 1);
        for (int dx = -r; dx <= r; ++dx) {
          int sx = std::clamp(x + dx, 0, img.width - 1);
          double v = img.at(sy, sx);
          sum += v;
          sumsq += v * v;
        }
      }
      double mean = sum / n;
      double var = std::max(0.0, sumsq / n - mean * mean);
      double t = mean + cfg.thresh_k * std::sqrt(var);
      double v = img.at(y, x);
      out.at(y, x) = v > t
                         ? static_cast<float>(std::clamp(cfg.enhance_alpha * v + cfg.enhance_beta, 0.0, 1.0))
                         : static_cast<float>(v);
    }
  }
  return out;
}

int otsu_threshold_bin(const GrayImage& img) {
  std::array<int64_t, 256> hist{};
  for (float v : img.pixels) {
    int b = std::min(255, static_cast<int>(std::clamp(v, 0.0f, 1.0f) * 256.0f));
    hist[b]++;
  }
  const double total = static_cast<double>(img.size());
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * static_cast<double>(hist[i]);

  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int best_k = -1;
  for (int k = 0; k < 255; ++k) {
    w0 += static_cast<double>(hist[k]);
    if (w0 == 0.0) continue;
    double w1 = total - w0;
    if (w1 == 0.0) break;
    sum0 += k * static_cast<double>(hist[k]);
    double mu0 = sum0 / w0;
    double mu1 = (sum_all - sum0) / w1;
    double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best) {
      best = between;
      best_k = k;
    }
  }
  return best_k;
}

namespace {

// Largest 8-connected component of `fg`, holes filled by 4-connected flood
// fill of the complement from the border.
std::vector<uint8_t> body_mask(const std::vector<uint8_t>& fg, int h, int w) {
  std::vector<int> label(fg.size(), -1);
  int n_labels = 0;
  size_t best_size = 0;
  int best_label = -1;
  std::vector<int> stack;
  for (size_t start = 0; start < fg.size(); ++start) {
    if (!fg[start] || label[start] >= 0) continue;
    int cur = n_labels++;
    size_t cur_size = 0;
    stack.push_back(static_cast<int>(start));
    label[start] = cur;
    while (!stack.empty()) {
      int p = stack.back();
      stack.pop_back();
      ++cur_size;
      int y = p / w, x = p % w;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dy == 0 && dx == 0) continue;
          int ny = y + dy, nx = x + dx;
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          int q = ny * w + nx;
          if (fg[q] && label[q] < 0) {
            label[q] = cur;
            stack.push_back(q);
          }
        }
      }
    }
    if (cur_size > best_size) {
      best_size = cur_size;
      best_label = cur;
    }
  }

  std::vector<uint8_t> body(fg.size(), 0);
  for (size_t i = 0; i < fg.size(); ++i) body[i] = label[i] == best_label ? 1 : 0;

  // Mark complement pixels reachable from the border; the rest are holes.
  std::vector<uint8_t> outside(fg.size(), 0);
  auto push_if_open = [&](int y, int x) {
    int p = y * w + x;
    if (!body[p] && !outside[p]) {
      outside[p] = 1;
      stack.push_back(p);
    }
  };
  for (int x = 0; x < w; ++x) {
    push_if_open(0, x);
    push_if_open(h - 1, x);
  }
  for (int y = 0; y < h; ++y) {
    push_if_open(y, 0);
    push_if_open(y, w - 1);
  }
  while (!stack.empty()) {
    int p = stack.back();
    stack.pop_back();
    int y = p / w, x = p % w;
    if (y > 0) push_if_open(y - 1, x);
    if (y + 1 < h) push_if_open(y + 1, x);
    if (x > 0) push_if_open(y, x - 1);
    if (x + 1 < w) push_if_open(y, x + 1);
  }
  for (size_t i = 0; i < fg.size(); ++i) {
    if (!body[i] && !outside[i]) body[i] = 1;  // interior hole
  }
  return body;
}

}  // namespace

ArtifactResult remove_artifacts(const GrayImage& img) {
  ArtifactResult res;
  int k = otsu_threshold_bin(img);
  if (k < 0) {
    res.image = img;
    res.degenerate = true;
    return res;
  }
  std::vector<uint8_t> fg(img.size(), 0);
  size_t fg_count = 0;
  for (size_t i = 0; i < img.size(); ++i) {
    int b = std::min(255, static_cast<int>(std::clamp(img.pixels[i], 0.0f, 1.0f) * 256.0f));
    if (b > k) {
      fg[i] = 1;
      ++fg_count;
    }
  }
  if (fg_count == 0) {
    res.image = img;
    res.degenerate = true;
    return res;
  }
  auto body = body_mask(fg, img.height, img.width);
  res.image = GrayImage(img.height, img.width);
  for (size_t i = 0; i < img.size(); ++i) {
    res.image.pixels[i] = body[i] ? img.pixels[i] : 0.0f;
  }
  return res;
}

PreprocessStages preprocess_stages(const RawImage& img, const PreprocessConfig& cfg) {
  cfg.validate();
  if (!img.valid()) {
    throw ShapeError("invalid raw image");
  }
  PreprocessStages st;
  RawImage resized = resize(img, cfg.target_height, cfg.target_width);
  st.resized = normalize_minmax(resized);
  st.median = median_filter(st.resized, cfg.median_window);
  st.enhanced = dynamic_threshold_enhance(st.median, cfg);
  if (cfg.artifact_removal) {
    auto res = remove_artifacts(st.enhanced);
    st.body = std::move(res.image);
    st.degenerate = res.degenerate;
  } else {
    st.body = st.enhanced;
  }
  return st;
}

PreprocessResult preprocess(const RawImage& img, const PreprocessConfig& cfg) {
  PreprocessStages st = preprocess_stages(img, cfg);
  return {std::move(st.body), st.degenerate};
}

}  // namespace fusionlung
