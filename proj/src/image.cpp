#include "fusionlung/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <cmath>

namespace fusionlung {

namespace {

cv::Mat imread_checked(const std::filesystem::path& path, int flags) {
  if (!std::filesystem::exists(path)) {
    throw DecodeError("no such file: " + path.string());
  }
  cv::Mat m = cv::imread(path.string(), flags);
  if (m.empty()) {
    throw DecodeError("cannot decode " + path.string());
  }
  return m;
}

void imwrite_checked(const std::filesystem::path& path, const cv::Mat& m) {
  if (!cv::imwrite(path.string(), m)) {
    throw Error("cannot write " + path.string());
  }
}

}  // namespace

RawImage read_image(const std::filesystem::path& path) {
  cv::Mat m = imread_checked(path, cv::IMREAD_UNCHANGED | cv::IMREAD_ANYDEPTH);
  if (m.channels() == 4) {
    // Drop alpha; PNG exports sometimes carry it.
    cv::Mat bgr(m.rows, m.cols, CV_MAKETYPE(m.depth(), 3));
    int from_to[] = {0, 0, 1, 1, 2, 2};
    cv::mixChannels(&m, 1, &bgr, 1, from_to, 3);
    m = bgr;
  }
  if (m.channels() != 1 && m.channels() != 3) {
    throw DecodeError(path.string() + ": unsupported channel count " + std::to_string(m.channels()));
  }

  RawImage img;
  img.height = m.rows;
  img.width = m.cols;
  img.channels = m.channels();
  img.pixels.resize(static_cast<size_t>(m.rows) * m.cols * m.channels());

  if (m.depth() == CV_8U) {
    img.bit_depth = 8;
  } else if (m.depth() == CV_16U) {
    img.bit_depth = 16;
  } else {
    throw DecodeError(path.string() + ": unsupported pixel depth");
  }

  // OpenCV stores color as BGR; keep declared channel order as RGB.
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) {
      if (img.channels == 1) {
        img.at(y, x) = img.bit_depth == 8 ? static_cast<float>(m.at<uint8_t>(y, x))
                                          : static_cast<float>(m.at<uint16_t>(y, x));
      } else if (img.bit_depth == 8) {
        const auto& px = m.at<cv::Vec3b>(y, x);
        img.at(y, x, 0) = px[2];
        img.at(y, x, 1) = px[1];
        img.at(y, x, 2) = px[0];
      } else {
        const auto& px = m.at<cv::Vec3w>(y, x);
        img.at(y, x, 0) = px[2];
        img.at(y, x, 1) = px[1];
        img.at(y, x, 2) = px[0];
      }
    }
  }
  return img;
}

BinaryMask read_mask(const std::filesystem::path& path) {
  cv::Mat m = imread_checked(path, cv::IMREAD_GRAYSCALE);
  BinaryMask mask(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) {
      mask.at(y, x) = m.at<uint8_t>(y, x) > 127 ? 1 : 0;
    }
  }
  return mask;
}

GrayImage read_gray_unit(const std::filesystem::path& path) {
  cv::Mat m = imread_checked(path, cv::IMREAD_UNCHANGED | cv::IMREAD_ANYDEPTH);
  if (m.channels() != 1) {
    throw DecodeError(path.string() + ": expected single-channel image");
  }
  GrayImage img(m.rows, m.cols);
  if (m.depth() == CV_8U) {
    for (int y = 0; y < m.rows; ++y)
      for (int x = 0; x < m.cols; ++x) img.at(y, x) = m.at<uint8_t>(y, x) / 255.0f;
  } else if (m.depth() == CV_16U) {
    for (int y = 0; y < m.rows; ++y)
      for (int x = 0; x < m.cols; ++x) img.at(y, x) = m.at<uint16_t>(y, x) / 65535.0f;
  } else {
    throw DecodeError(path.string() + ": unsupported pixel depth");
  }
  return img;
}

void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
  cv::Mat m(mask.height, mask.width, CV_8UC1);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) m.at<uint8_t>(y, x) = mask.at(y, x) ? 255 : 0;
  imwrite_checked(path, m);
}

void write_gray_png8(const std::filesystem::path& path, const GrayImage& img) {
  cv::Mat m(img.height, img.width, CV_8UC1);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      float v = std::clamp(img.at(y, x), 0.0f, 1.0f);
      m.at<uint8_t>(y, x) = static_cast<uint8_t>(std::lround(v * 255.0f));
    }
  }
  imwrite_checked(path, m);
}

void write_gray_png16(const std::filesystem::path& path, const GrayImage& img) {
  cv::Mat m(img.height, img.width, CV_16UC1);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      float v = std::clamp(img.at(y, x), 0.0f, 1.0f);
      m.at<uint16_t>(y, x) = static_cast<uint16_t>(std::lround(v * 65535.0f));
    }
  }
  imwrite_checked(path, m);
}

}  // namespace fusionlung
