#include "neon/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace neon {

std::uint8_t gray_value(std::uint8_t b, std::uint8_t g, std::uint8_t r) {
  // (299 R + 587 G + 114 B) / 1000, rounded half away from zero. Integer
  // form of the 0.299/0.587/0.114 weights, exact for every input.
  const std::int64_t num = 299LL * r + 587LL * g + 114LL * b;
  return static_cast<std::uint8_t>((2 * num + 1000) / 2000);
}

GrayFrame to_grayscale(const Frame& frame) {
  GrayFrame out(frame.width, frame.height);
  const std::size_t n = out.v.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i * 3;
    out.v[i] = gray_value(frame.bgr[j], frame.bgr[j + 1], frame.bgr[j + 2]);
  }
  return out;
}

CropWindow crop_window(int width, int height, double top_frac, double bottom_frac,
                       double side_frac) {
  CropWindow w{};
  w.row_begin = static_cast<int>(std::floor(top_frac * height));
  w.row_end = height - static_cast<int>(std::floor(bottom_frac * height));
  w.col_begin = static_cast<int>(std::floor(side_frac * width));
  w.col_end = width - static_cast<int>(std::floor(side_frac * width));
  return w;
}

GrayFrame crop(const GrayFrame& frame, double top_frac, double bottom_frac, double side_frac) {
  const CropWindow w = crop_window(frame.width, frame.height, top_frac, bottom_frac, side_frac);
  if (w.row_begin >= w.row_end || w.col_begin >= w.col_end)
    throw std::invalid_argument("crop: empty region for " + std::to_string(frame.width) + "x" +
                                std::to_string(frame.height));
  GrayFrame out(w.col_end - w.col_begin, w.row_end - w.row_begin);
  for (int y = w.row_begin; y < w.row_end; ++y) {
    const std::uint8_t* src = frame.v.data() + static_cast<std::size_t>(y) * frame.width;
    std::uint8_t* dst = out.v.data() + static_cast<std::size_t>(y - w.row_begin) * out.width;
    std::copy(src + w.col_begin, src + w.col_end, dst);
  }
  return out;
}

int triangle_threshold_bin(const std::array<std::int64_t, 256>& h) {
  int lo = -1, hi = -1, peak = 0;
  for (int b = 0; b < 256; ++b) {
    if (h[static_cast<std::size_t>(b)] > 0) {
      if (lo < 0) lo = b;
      hi = b;
      if (h[static_cast<std::size_t>(b)] > h[static_cast<std::size_t>(peak)]) peak = b;
    }
  }
  if (lo < 0) throw std::invalid_argument("triangle_threshold: empty histogram");
  if (lo == hi) return lo;  // single gray level

  // Farthest nonempty tail from the peak; left tail wins the tie.
  const int tail = (peak - lo) >= (hi - peak) ? lo : hi;

  // Perpendicular distance of bin b to the chord (tail, h[tail])-(peak,
  // h[peak]) is |cross| / |chord|; the chord length is constant, so the
  // argmax is decided on the integer cross product alone. Signs are oriented
  // so bins below the chord (the valley) score positive.
  const std::int64_t dx = static_cast<std::int64_t>(peak) - tail;
  const std::int64_t dy = h[static_cast<std::size_t>(peak)] - h[static_cast<std::size_t>(tail)];
  const std::int64_t orient = dx > 0 ? 1 : -1;

  const int b0 = std::min(tail, peak), b1 = std::max(tail, peak);
  int best = b0;
  std::int64_t best_score = std::numeric_limits<std::int64_t>::min();
  for (int b = b0; b <= b1; ++b) {
    const std::int64_t cross =
        dx * (h[static_cast<std::size_t>(b)] - h[static_cast<std::size_t>(tail)]) -
        dy * (static_cast<std::int64_t>(b) - tail);
    const std::int64_t score = -orient * cross;
    if (score > best_score) {
      best_score = score;
      best = b;
    }
  }
  return best;
}

ThresholdResult triangle_threshold(const GrayFrame& frame) {
  std::array<std::int64_t, 256> h{};
  for (std::uint8_t v : frame.v) ++h[v];

  ThresholdResult result;
  result.threshold = triangle_threshold_bin(h);
  result.binary = BinaryImage(frame.width, frame.height);
  for (std::size_t i = 0; i < frame.v.size(); ++i)
    result.binary.v[i] = frame.v[i] > result.threshold ? 1 : 0;
  return result;
}

namespace {

// Shared integer box-filter core. Source pixel r spans [r*out, (r+1)*out) and
// destination pixel i spans [i*in, (i+1)*in) on the axis scaled by out, so
// every overlap length is an exact integer.
struct AxisOverlap {
  std::vector<int> begin;                // first source index per output index
  std::vector<std::vector<std::int64_t>> weight;  // overlap per covered source
};

AxisOverlap axis_overlaps(int in, int out) {
  AxisOverlap a;
  a.begin.resize(static_cast<std::size_t>(out));
  a.weight.resize(static_cast<std::size_t>(out));
  for (int i = 0; i < out; ++i) {
    const std::int64_t d0 = static_cast<std::int64_t>(i) * in;
    const std::int64_t d1 = d0 + in;
    const int r0 = static_cast<int>(d0 / out);
    const int r1 = static_cast<int>((d1 - 1) / out);
    a.begin[static_cast<std::size_t>(i)] = r0;
    for (int r = r0; r <= r1; ++r) {
      const std::int64_t s0 = static_cast<std::int64_t>(r) * out;
      const std::int64_t s1 = s0 + out;
      a.weight[static_cast<std::size_t>(i)].push_back(std::min(d1, s1) - std::max(d0, s0));
    }
  }
  return a;
}

void check_downscale(int in_w, int in_h, int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0)
    throw std::invalid_argument("resize_area: output extents must be positive");
  if (out_w > in_w || out_h > in_h)
    throw std::invalid_argument("resize_area: upscale " + std::to_string(in_w) + "x" +
                                std::to_string(in_h) + " -> " + std::to_string(out_w) + "x" +
                                std::to_string(out_h) + " rejected (downscale only)");
}

template <class Image, class Round>
Image resize_core(const Image& image, int out_w, int out_h, Round round) {
  check_downscale(image.width, image.height, out_w, out_h);
  const AxisOverlap ax = axis_overlaps(image.width, out_w);
  const AxisOverlap ay = axis_overlaps(image.height, out_h);

  Image out(out_w, out_h);
  for (int oy = 0; oy < out_h; ++oy) {
    const auto& wy = ay.weight[static_cast<std::size_t>(oy)];
    const int y0 = ay.begin[static_cast<std::size_t>(oy)];
    for (int ox = 0; ox < out_w; ++ox) {
      const auto& wx = ax.weight[static_cast<std::size_t>(ox)];
      const int x0 = ax.begin[static_cast<std::size_t>(ox)];
      std::int64_t sum = 0, area = 0;
      for (std::size_t ky = 0; ky < wy.size(); ++ky) {
        const std::uint8_t* row =
            image.v.data() + static_cast<std::size_t>(y0 + static_cast<int>(ky)) * image.width;
        for (std::size_t kx = 0; kx < wx.size(); ++kx) {
          const std::int64_t w = wy[ky] * wx[kx];
          sum += w * row[x0 + static_cast<int>(kx)];
          area += w;
        }
      }
      out.v[static_cast<std::size_t>(oy) * out_w + ox] = round(sum, area);
    }
  }
  return out;
}

}  // namespace

GrayFrame resize_area(const GrayFrame& image, int out_w, int out_h) {
  // round(sum/area) half away from zero, exactly: (2*sum + area) / (2*area).
  return resize_core(image, out_w, out_h, [](std::int64_t sum, std::int64_t area) {
    return static_cast<std::uint8_t>((2 * sum + area) / (2 * area));
  });
}

BinaryImage resize_area(const BinaryImage& image, int out_w, int out_h) {
  // mean >= 0.5  <=>  2*sum >= area.
  return resize_core(image, out_w, out_h, [](std::int64_t sum, std::int64_t area) {
    return static_cast<std::uint8_t>(2 * sum >= area ? 1 : 0);
  });
}

Observation preprocess(const Frame& frame) {
  const GrayFrame cropped = crop(to_grayscale(frame));
  const ThresholdResult thresholded = triangle_threshold(cropped);
  return resize_area(thresholded.binary, kObservationWidth, kObservationHeight);
}

std::vector<std::int8_t> diff_observation(const Observation& current,
                                          const Observation& previous) {
  if (current.width != previous.width || current.height != previous.height)
    throw std::invalid_argument("diff_observation: shape mismatch " +
                                std::to_string(current.width) + "x" +
                                std::to_string(current.height) + " vs " +
                                std::to_string(previous.width) + "x" +
                                std::to_string(previous.height));
  std::vector<std::int8_t> out(current.v.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::int8_t>(static_cast<int>(current.v[i]) -
                                      static_cast<int>(previous.v[i]));
  return out;
}

Frame add_salt_pepper(const Frame& frame, double p, Rng& rng) {
  if (p < 0.0 || p > 1.0)
    throw std::invalid_argument("add_salt_pepper: p must lie in [0, 1]");
  Frame out = frame;
  const std::size_t pixels = out.bgr.size() / 3;
  for (std::size_t i = 0; i < pixels; ++i) {
    if (rng.uniform() < p) {
      const std::uint8_t v = rng.uniform() < 0.5 ? 0 : 255;
      out.bgr[i * 3] = v;
      out.bgr[i * 3 + 1] = v;
      out.bgr[i * 3 + 2] = v;
    }
  }
  return out;
}

Histogram gray_histogram(const Frame& frame) {
  Histogram h;
  const std::size_t n = frame.bgr.size() / 3;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i * 3;
    ++h.bins[gray_value(frame.bgr[j], frame.bgr[j + 1], frame.bgr[j + 2])];
  }
  return h;
}

double bhattacharyya(const Histogram& h1, const Histogram& h2) {
  const std::int64_t t1 = h1.total(), t2 = h2.total();
  if (t1 == 0 || t2 == 0)
    throw std::invalid_argument("bhattacharyya: all-zero histogram");
  double coeff = 0.0;
  for (std::size_t b = 0; b < 256; ++b)
    coeff += std::sqrt(static_cast<double>(h1.bins[b]) * static_cast<double>(h2.bins[b]));
  coeff /= std::sqrt(static_cast<double>(t1) * static_cast<double>(t2));
  const double radicand = 1.0 - coeff;
  return std::sqrt(radicand > 0.0 ? radicand : 0.0);
}

bool detect_game_over(const Frame& frame, const Histogram& reference_histogram) {
  return bhattacharyya(gray_histogram(frame), reference_histogram) <=
         kGameOverDistanceThreshold;
}

bool detect_game_over(const Frame& frame, const Frame& reference) {
  return detect_game_over(frame, gray_histogram(reference));
}

}  // namespace neon
