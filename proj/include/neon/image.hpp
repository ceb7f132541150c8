#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace neon {

// Raw 8-bit color frame, B,G,R samples row-major.
struct Frame {
  int width = 0, height = 0;
  std::vector<std::uint8_t> bgr;  // width*height*3 samples

  Frame() = default;
  Frame(int w, int h) : width(w), height(h), bgr(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::size_t pixel_index(int x, int y) const {
    return (static_cast<std::size_t>(y) * width + x) * 3;
  }
  void set(int x, int y, std::uint8_t b, std::uint8_t g, std::uint8_t r) {
    const std::size_t i = pixel_index(x, y);
    bgr[i] = b;
    bgr[i + 1] = g;
    bgr[i + 2] = r;
  }
  bool operator==(const Frame&) const = default;
};

struct GrayFrame {
  int width = 0, height = 0;
  std::vector<std::uint8_t> v;  // width*height samples

  GrayFrame() = default;
  GrayFrame(int w, int h) : width(w), height(h), v(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const GrayFrame&) const = default;
};

// Binary image, samples in {0,1}. Observations are the fixed 160x90 case.
struct BinaryImage {
  int width = 0, height = 0;
  std::vector<std::uint8_t> v;

  BinaryImage() = default;
  BinaryImage(int w, int h) : width(w), height(h), v(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const BinaryImage&) const = default;
};

using Observation = BinaryImage;

inline constexpr int kObservationWidth = 160;
inline constexpr int kObservationHeight = 90;

// 256-bin gray-level histogram; bins sum to the source pixel count.
struct Histogram {
  std::array<std::int64_t, 256> bins{};

  std::int64_t total() const {
    std::int64_t t = 0;
    for (std::int64_t b : bins) t += b;
    return t;
  }
};

// Binary PPM (P6) and PGM (P5), maxval 255. Observations are written with
// samples scaled to {0,255} so they are viewable; load_observation_pgm maps
// any sample >= 128 back to 1.
void save_ppm(const std::string& path, const Frame& frame);
Frame load_ppm(const std::string& path);
void save_pgm(const std::string& path, const GrayFrame& image);
GrayFrame load_pgm(const std::string& path);
void save_observation_pgm(const std::string& path, const BinaryImage& image);
BinaryImage load_observation_pgm(const std::string& path);

}  // namespace neon
