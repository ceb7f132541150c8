#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "neon/image.hpp"
#include "neon/rng.hpp"

namespace neon {

// Luminance y = 0.299 R + 0.587 G + 0.114 B, rounded to nearest (ties away
// from zero). Evaluated in exact integer arithmetic so results are identical
// on every platform.
GrayFrame to_grayscale(const Frame& frame);
std::uint8_t gray_value(std::uint8_t b, std::uint8_t g, std::uint8_t r);

// Keeps rows [floor(top*H), H - floor(bottom*H)) and
// cols [floor(side*W), W - floor(side*W)). Rejects an empty result.
GrayFrame crop(const GrayFrame& frame, double top_frac = 0.5384, double bottom_frac = 0.20,
               double side_frac = 0.20);

struct CropWindow {
  int row_begin, row_end, col_begin, col_end;
};
CropWindow crop_window(int width, int height, double top_frac = 0.5384,
                       double bottom_frac = 0.20, double side_frac = 0.20);

// Triangle (Zack) threshold: the chord runs from the histogram peak to the
// farthest nonempty tail bin; the threshold is the bin between them with the
// maximum perpendicular distance to that chord (lowest bin wins ties).
// Output pixel = 1 iff value > threshold. A single-valued image yields its
// value as threshold and an all-zero output.
struct ThresholdResult {
  int threshold;
  BinaryImage binary;
};
ThresholdResult triangle_threshold(const GrayFrame& frame);
int triangle_threshold_bin(const std::array<std::int64_t, 256>& histogram);

// Area-interpolation downscale: each output pixel is the overlap-weighted
// mean of the source pixels its back-projected rectangle covers. Gray images
// round to nearest (half away from zero); binary images re-binarize by the
// >= 0.5 majority rule. Upscales are rejected.
GrayFrame resize_area(const GrayFrame& image, int out_w, int out_h);
BinaryImage resize_area(const BinaryImage& image, int out_w, int out_h);

// Full observation filter: grayscale -> crop -> triangle threshold ->
// area resize to 160x90.
Observation preprocess(const Frame& frame);

// Elementwise current - previous, values in {-1, 0, 1}.
std::vector<std::int8_t> diff_observation(const Observation& current,
                                          const Observation& previous);

// Replaces each pixel independently with probability p by black or white
// (all channels, equal odds). Bit-exact for a given rng state.
Frame add_salt_pepper(const Frame& frame, double p, Rng& rng);

// 256-bin histogram of the grayscaled frame.
Histogram gray_histogram(const Frame& frame);

// d = sqrt(1 - sum_i sqrt(h1_i*h2_i) / sqrt(sum h1 * sum h2)), in [0, 1].
// Rejects an all-zero histogram.
double bhattacharyya(const Histogram& h1, const Histogram& h2);

// True iff the frame's histogram is within Bhattacharyya distance 0.15 of
// the reference (the canonical game-over screen).
bool detect_game_over(const Frame& frame, const Frame& reference);
bool detect_game_over(const Frame& frame, const Histogram& reference_histogram);

inline constexpr double kGameOverDistanceThreshold = 0.15;

}  // namespace neon
