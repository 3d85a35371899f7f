#pragma once

// Per-frame color-grid features and the binary feature-track format.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <ranges>
#include <span>
#include <string>
#include <vector>

#include "hilite/binary_io.hpp"
#include "hilite/corpus.hpp"
#include "hilite/error.hpp"
#include "hilite/parallel.hpp"

namespace hilite {

// Dense per-frame feature vectors for one video, stored frame-major.
struct FrameFeatureTrack {
  std::string video_id;
  std::size_t dim = 0;
  std::vector<float> values;

  FrameFeatureTrack() = default;
  FrameFeatureTrack(std::string id, std::size_t d, std::size_t frames = 0)
      : video_id(std::move(id)), dim(d), values(d * frames, 0.0f) {}

  std::size_t frames() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const float> frame(std::size_t f) const { return {values.data() + f * dim, dim}; }
  std::span<float> frame(std::size_t f) { return {values.data() + f * dim, dim}; }
  // Frames [first, first + count) as one contiguous span.
  std::span<const float> window(std::size_t first, std::size_t count) const {
    return {values.data() + first * dim, count * dim};
  }

  void append(std::span<const float> v) {
    if (v.size() != dim) throw DataError("feature dimension mismatch on append");
    values.insert(values.end(), v.begin(), v.end());
  }

  friend bool operator==(const FrameFeatureTrack&, const FrameFeatureTrack&) = default;
};

// Interleaved H x W x C image.
template <typename Pixel>
struct ImageView {
  std::span<const Pixel> data;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 3;

  Pixel at(std::size_t row, std::size_t col, std::size_t ch) const {
    return data[(row * width + col) * channels + ch];
  }
};

// Owning 8-bit RGB frame.
struct Frame {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> rgb;

  ImageView<std::uint8_t> view() const { return {rgb, height, width, 3}; }
};

namespace detail {
// round(n * r / grid), halves rounded up.
constexpr std::size_t cell_bound(std::size_t n, std::size_t r, std::size_t grid) {
  return (2 * n * r + grid) / (2 * grid);
}
}  // namespace detail

constexpr std::size_t color_grid_dim(std::size_t grid = 4) { return 3 * grid * grid; }

// Mean of each color channel over a grid x grid partition of the frame,
// scaled by 1/255. Output index = grid*grid*channel + grid*row + col.
template <typename Pixel>
std::vector<float> frame_feature(const ImageView<Pixel>& img, std::size_t grid = 4) {
  if (img.channels != 3)
    throw DataError("frame must have 3 channels, got " + std::to_string(img.channels));
  if (grid == 0 || img.height < grid || img.width < grid)
    throw DataError("frame " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                    " is smaller than the " + std::to_string(grid) + "x" + std::to_string(grid) +
                    " grid");
  if (img.data.size() != img.height * img.width * img.channels)
    throw DataError("frame buffer size does not match its dimensions");

  std::vector<float> out(color_grid_dim(grid));
  for (std::size_t r = 0; r < grid; ++r) {
    const std::size_t y0 = detail::cell_bound(img.height, r, grid);
    const std::size_t y1 = detail::cell_bound(img.height, r + 1, grid);
    for (std::size_t q = 0; q < grid; ++q) {
      const std::size_t x0 = detail::cell_bound(img.width, q, grid);
      const std::size_t x1 = detail::cell_bound(img.width, q + 1, grid);
      double sum[3] = {0.0, 0.0, 0.0};
      for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x)
          for (std::size_t c = 0; c < 3; ++c) sum[c] += static_cast<double>(img.at(y, x, c));
      const double n = double((y1 - y0) * (x1 - x0));
      for (std::size_t c = 0; c < 3; ++c)
        out[grid * grid * c + grid * r + q] = static_cast<float>(sum[c] / n / 255.0);
    }
  }
  return out;
}

template <typename T>
concept FrameLike = requires(const T& f) {
  { f.view() };
};

// Feature track from a sequence of frames. The range must yield exactly
// meta.frame_count owning frames. Frames are buffered in batches and
// processed by up to `workers` threads; output order follows input order.
template <std::ranges::input_range Frames>
  requires FrameLike<std::ranges::range_value_t<Frames>>
FrameFeatureTrack video_features(Frames&& frames, const VideoMeta& meta, std::size_t workers = 1,
                                 std::size_t grid = 4) {
  FrameFeatureTrack track(meta.video_id, color_grid_dim(grid));
  track.values.reserve(meta.frame_count * track.dim);
  using Value = std::ranges::range_value_t<Frames>;
  std::vector<Value> batch;
  const std::size_t batch_size = 64 * std::max<std::size_t>(1, workers);
  std::size_t seen = 0;

  auto flush = [&] {
    std::vector<std::vector<float>> feats(batch.size());
    parallel_for(batch.size(), workers, [&](std::size_t i) { feats[i] = frame_feature(batch[i].view(), grid); });
    for (const auto& f : feats) track.append(f);
    batch.clear();
  };

  for (auto&& f : frames) {
    if (++seen > meta.frame_count)
      throw DataError("video " + meta.video_id + ": more frames than frame_count=" +
                      std::to_string(meta.frame_count));
    batch.push_back(std::forward<decltype(f)>(f));
    if (batch.size() == batch_size) flush();
  }
  flush();
  if (seen != meta.frame_count)
    throw DataError("video " + meta.video_id + ": got " + std::to_string(seen) +
                    " frames, expected " + std::to_string(meta.frame_count));
  return track;
}

// Reads packed rgb24 frames (as produced by `ffmpeg -f rawvideo -pix_fmt rgb24`).
class RawRgbReader {
 public:
  RawRgbReader(std::istream& is, std::size_t width, std::size_t height)
      : is_(&is), width_(width), height_(height) {}

  std::optional<Frame> next() {
    Frame f{height_, width_, std::vector<std::uint8_t>(width_ * height_ * 3)};
    is_->read(reinterpret_cast<char*>(f.rgb.data()), static_cast<std::streamsize>(f.rgb.size()));
    const auto got = static_cast<std::size_t>(is_->gcount());
    if (got == 0) return std::nullopt;
    if (got != f.rgb.size()) throw DataError("truncated frame in raw rgb stream");
    return f;
  }

  // All remaining frames.
  std::vector<Frame> read_all() {
    std::vector<Frame> out;
    while (auto f = next()) out.push_back(std::move(*f));
    return out;
  }

 private:
  std::istream* is_;
  std::size_t width_, height_;
};

// ---------------------------------------------------------------------------
// Binary format: "FTRK", u32 version, u32 dim, u64 frame_count, f32 values.

inline constexpr char kFeatureTrackMagic[4] = {'F', 'T', 'R', 'K'};
inline constexpr std::uint32_t kFeatureTrackVersion = 1;

inline void write_feature_track(std::ostream& os, const FrameFeatureTrack& t) {
  if (t.dim == 0) throw DataError("feature track dim must be positive");
  if (t.values.size() % t.dim != 0) throw DataError("feature track values not a multiple of dim");
  binio::put_bytes(os, std::string_view(kFeatureTrackMagic, 4));
  binio::put<std::uint32_t>(os, kFeatureTrackVersion);
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.dim));
  binio::put<std::uint64_t>(os, t.frames());
  for (float v : t.values) binio::put_f32(os, v);
}

inline FrameFeatureTrack read_feature_track(std::istream& is, std::string video_id) {
  const auto magic = binio::get_bytes(is, 4, "feature track magic");
  if (magic != std::string_view(kFeatureTrackMagic, 4)) throw DataError("not a feature track (bad magic)");
  const auto version = binio::get<std::uint32_t>(is, "feature track version");
  if (version != kFeatureTrackVersion)
    throw DataError("unsupported feature track version " + std::to_string(version));
  const auto dim = binio::get<std::uint32_t>(is, "feature track dim");
  const auto n = binio::get<std::uint64_t>(is, "feature track frame count");
  if (dim == 0) throw DataError("feature track dim must be positive");
  FrameFeatureTrack t(std::move(video_id), dim);
  t.values.resize(static_cast<std::size_t>(n) * dim);
  std::vector<char> raw(t.values.size() * 4);
  is.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(is.gcount()) != raw.size())
    throw DataError("feature track holds fewer values than dim x frame_count = " +
                    std::to_string(t.values.size()));
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    std::uint32_t u = 0;
    for (int b = 3; b >= 0; --b) u = (u << 8) | static_cast<unsigned char>(raw[i * 4 + b]);
    const float v = std::bit_cast<float>(u);
    if (!std::isfinite(v)) throw DataError("non-finite feature value at index " + std::to_string(i));
    t.values[i] = v;
  }
  if (!binio::at_eof(is)) throw DataError("trailing data after feature track values");
  return t;
}

inline void save_feature_track(const fs::path& path, const FrameFeatureTrack& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write feature track " + path.string());
  write_feature_track(os, t);
}

inline FrameFeatureTrack load_feature_track(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open feature track " + path.string());
  auto stem = path.filename().string();
  stem = stem.substr(0, stem.find('.'));
  return read_feature_track(is, stem);
}

}  // namespace hilite
