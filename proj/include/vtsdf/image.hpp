#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace vtsdf {

template <typename T>
struct Image {
  int width = 0, height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), data(size_t(w) * h, fill) {}

  T& at(int x, int y) { return data[size_t(y) * width + x]; }
  const T& at(int x, int y) const { return data[size_t(y) * width + x]; }
  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
  size_t size() const { return data.size(); }
};

// Depth images store meters; NaN marks invalid pixels.
inline bool depth_valid(float d) { return std::isfinite(d); }
constexpr float kInvalidDepth = std::numeric_limits<float>::quiet_NaN();

// 16-bit PGM (P5, big-endian payload per the format) and 1-bit PBM (P4).
void save_pgm16(const Image<uint16_t>& img, const std::string& path);
Image<uint16_t> load_pgm16(const std::string& path);
void save_pbm(const Image<uint8_t>& img, const std::string& path);
Image<uint8_t> load_pbm(const std::string& path);

}  // namespace vtsdf
