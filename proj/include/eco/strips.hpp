#pragma once

// Vertical strips of a rectified face, normalized onto a fixed square canvas.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "eco/geometry.hpp"
#include "eco/image.hpp"

namespace eco {

inline constexpr int kDefaultStripWidth = 100;
inline constexpr int kStripCanvas = 500;

/// Axis-aligned integer rectangle [x, x + width) x [y, y + height).
struct PixelRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

struct StripSource {
  std::string store;
  std::string frame;
  std::string category;
  int theta = 0;  // ordinal, increasing left to right
};

struct StripGeometry {
  double world_width = 0.0;
  double distance = 0.0;  // camera center to slab centroid
};

struct Strip {
  Image pixels;
  StripSource source;
  StripGeometry geometry;
};

/// floor(rect.width / strip_width) full-height strips, left to right. The
/// sliver on the right is dropped.
inline std::vector<Image> extract_strips(const Image& rectified, const PixelRect& rect, int strip_width) {
  if (strip_width < 1) fail(ErrorCode::invalid_argument, "strip width must be at least 1");
  std::vector<Image> strips;
  const int count = rect.width / strip_width;
  strips.reserve(count);
  for (int i = 0; i < count; ++i)
    strips.push_back(rectified.crop(rect.x + i * strip_width, rect.y, strip_width, rect.height));
  return strips;
}

namespace detail {

struct FilterTap {
  int first = 0;
  std::vector<double> weights;
};

/// Triangle-filter taps for resampling n_in samples to n_out. The filter is
/// widened by the downscale factor so shrinking averages instead of aliasing;
/// at unit scale each output copies exactly one input.
inline std::vector<FilterTap> triangle_taps(int n_in, int n_out) {
  const double scale = static_cast<double>(n_in) / n_out;
  const double support = std::max(1.0, scale);
  std::vector<FilterTap> taps(n_out);
  for (int o = 0; o < n_out; ++o) {
    const double center = (o + 0.5) * scale - 0.5;
    const int lo = std::max(0, static_cast<int>(std::floor(center - support)) + 1);
    const int hi = std::min(n_in - 1, static_cast<int>(std::ceil(center + support)) - 1);
    FilterTap& tap = taps[o];
    tap.first = lo;
    double total = 0.0;
    for (int i = lo; i <= hi; ++i) {
      const double w = std::max(0.0, 1.0 - std::abs(i - center) / support);
      tap.weights.push_back(w);
      total += w;
    }
    if (total <= 0.0) {
      // center fell outside the source; clamp to the nearest sample
      tap.first = std::clamp(static_cast<int>(std::lround(center)), 0, n_in - 1);
      tap.weights.assign(1, 1.0);
    } else {
      for (double& w : tap.weights) w /= total;
    }
  }
  return taps;
}

}  // namespace detail

/// Separable triangle-filter resize.
inline Image resize(const Image& src, int width, int height) {
  if (width < 1 || height < 1 || src.empty()) fail(ErrorCode::invalid_argument, "bad resize size");
  const auto htaps = detail::triangle_taps(src.width(), width);
  const auto vtaps = detail::triangle_taps(src.height(), height);

  std::vector<double> tmp(static_cast<std::size_t>(width) * src.height() * 3);
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        const auto& t = htaps[x];
        for (std::size_t k = 0; k < t.weights.size(); ++k)
          acc += t.weights[k] * src.at(t.first + static_cast<int>(k), y, c);
        tmp[(static_cast<std::size_t>(y) * width + x) * 3 + c] = acc;
      }

  Image out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        const auto& t = vtaps[y];
        for (std::size_t k = 0; k < t.weights.size(); ++k)
          acc += t.weights[k] * tmp[(static_cast<std::size_t>(t.first + k) * width + x) * 3 + c];
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
      }
  return out;
}

/// Scale to 500 px tall keeping aspect, then center on a black 500x500 canvas.
inline Image normalize_strip(const Image& raw) {
  if (raw.height() < 1 || raw.width() < 1) fail(ErrorCode::invalid_argument, "empty strip");
  const int w = std::max(1, static_cast<int>(std::lround(
                                static_cast<double>(raw.width()) * kStripCanvas / raw.height())));
  if (w > kStripCanvas)
    fail(ErrorCode::strip_too_wide,
         "strip would be " + std::to_string(w) + " px wide after height normalization");
  const Image scaled = (w == raw.width() && raw.height() == kStripCanvas) ? raw : resize(raw, w, kStripCanvas);
  Image canvas(kStripCanvas, kStripCanvas);
  const int offset = (kStripCanvas - w) / 2;
  for (int y = 0; y < kStripCanvas; ++y)
    for (int x = 0; x < w; ++x) canvas.set(offset + x, y, scaled.pixel(x, y));
  return canvas;
}

/// Horizontal placement of a strip of `width` px after normalize_strip.
inline int normalized_offset(int raw_width, int raw_height) {
  const int w = static_cast<int>(std::lround(static_cast<double>(raw_width) * kStripCanvas / raw_height));
  return (kStripCanvas - w) / 2;
}

using ChannelMeans = std::array<double, 3>;

/// Signed HWC tensor after mean subtraction.
struct PixelTensor {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  float at(int x, int y, int c) const {
    return values[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

inline PixelTensor preprocess(const Image& strip, const ChannelMeans& means) {
  PixelTensor t{strip.width(), strip.height(), {}};
  t.values.resize(strip.data().size());
  for (std::size_t i = 0; i < strip.data().size(); ++i)
    t.values[i] = static_cast<float>(strip.data()[i] - means[i % 3]);
  return t;
}

inline ChannelMeans channel_means(std::span<const Image> images) {
  std::array<double, 3> sum{0.0, 0.0, 0.0};
  double count = 0.0;
  for (const auto& img : images) {
    const auto& d = img.data();
    for (std::size_t i = 0; i < d.size(); i += 3)
      for (int c = 0; c < 3; ++c) sum[c] += d[i + c];
    count += static_cast<double>(d.size() / 3);
  }
  if (count == 0.0) return {0.0, 0.0, 0.0};
  return {sum[0] / count, sum[1] / count, sum[2] / count};
}

/// World width and camera distance of the face slab covered by canvas
/// columns [u0, u1). The rectified view is fronto-parallel, so canvas u is
/// an affine function of position along the face's horizontal edge.
inline StripGeometry slab_geometry(const std::array<Vec3, 4>& face_corners, double u_left,
                                   double u_right, double u0, double u1, const Vec3& camera_center) {
  const double span = u_right - u_left;
  if (std::abs(span) < 1e-12) fail(ErrorCode::invalid_span, "degenerate face width");
  const double t0 = (u0 - u_left) / span;
  const double t1 = (u1 - u_left) / span;
  const Vec3 across = face_corners[1] - face_corners[0];
  const Vec3 down = face_corners[3] - face_corners[0];
  const Vec3 centroid = face_corners[0] + 0.5 * (t0 + t1) * across + 0.5 * down;
  return {std::abs(t1 - t0) * across.norm(), (centroid - camera_center).norm()};
}

}  // namespace eco
