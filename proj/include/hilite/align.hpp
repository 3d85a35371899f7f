#pragma once

// Template matching of highlight-reel feature tracks against full-video
// tracks, clip segmentation and label emission.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "hilite/corpus.hpp"
#include "hilite/error.hpp"
#include "hilite/framefeat.hpp"
#include "hilite/parallel.hpp"

namespace hilite {

inline constexpr std::size_t kDefaultWindow = 60;

struct WindowMatch {
  std::size_t highlight_start_frame = 0;
  std::size_t video_offset = 0;
  double score = 0.0;  // distance, lower is better

  friend bool operator==(const WindowMatch&, const WindowMatch&) = default;
};

using ClipSpan = FrameInterval;

// `frames` consecutive feature vectors of width `dim`, frame-major.
struct FeatureWindow {
  std::span<const float> values;
  std::size_t dim = 0;

  std::size_t frames() const { return dim == 0 ? 0 : values.size() / dim; }

  static FeatureWindow of(const FrameFeatureTrack& t, std::size_t first, std::size_t count) {
    if (first + count > t.frames())
      throw DataError("window [" + std::to_string(first) + ", " + std::to_string(first + count) +
                      ") exceeds track length " + std::to_string(t.frames()));
    return {t.window(first, count), t.dim};
  }
};

// Mean of squared component differences over the whole window.
struct MeanSquaredDistance {
  double operator()(const FeatureWindow& a, const FeatureWindow& b) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      const double d = double(a.values[i]) - double(b.values[i]);
      sum += d * d;
    }
    return a.values.empty() ? 0.0 : sum / double(a.values.size());
  }
};

template <typename Metric>
double window_distance(const FeatureWindow& a, const FeatureWindow& b, const Metric& metric) {
  if (a.dim != b.dim || a.values.size() != b.values.size())
    throw DataError("window shape mismatch: " + std::to_string(a.frames()) + "x" +
                    std::to_string(a.dim) + " vs " + std::to_string(b.frames()) + "x" +
                    std::to_string(b.dim));
  return metric(a, b);
}

inline double window_distance(const FeatureWindow& a, const FeatureWindow& b) {
  return window_distance(a, b, MeanSquaredDistance{});
}

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline RowMatrix to_double_rows(const FrameFeatureTrack& t) {
  RowMatrix m(static_cast<Eigen::Index>(t.frames()), static_cast<Eigen::Index>(t.dim));
  for (std::size_t i = 0; i < t.values.size(); ++i) m.data()[i] = t.values[i];
  return m;
}

// Sum of squared norms over every length-W window of a track.
inline std::vector<double> window_norms(const RowMatrix& m, std::size_t window) {
  const std::size_t n = static_cast<std::size_t>(m.rows());
  std::vector<double> frame_norm(n);
  for (std::size_t i = 0; i < n; ++i) frame_norm[i] = m.row(static_cast<Eigen::Index>(i)).squaredNorm();
  std::vector<double> out(n + 1 - window);
  for (std::size_t o = 0; o < out.size(); ++o) {
    // Summed directly so each value is independent of its neighbours.
    double s = 0.0;
    for (std::size_t i = 0; i < window; ++i) s += frame_norm[o + i];
    out[o] = s;
  }
  return out;
}

// Exhaustive MSE matching of every highlight window start against every
// video offset. Cross terms come from a blocked matrix product and are
// slid along diagonals; near-optimal candidates are then re-scored with the
// direct distance so the reported score and argmin are those of the naive
// scan.
class MsdProfileKernel {
 public:
  MsdProfileKernel(const FrameFeatureTrack& highlight, const FrameFeatureTrack& video,
                   std::size_t window, std::size_t stride)
      : highlight_(highlight),
        video_(video),
        window_(window),
        stride_(stride),
        hl_(to_double_rows(highlight)),
        vid_(to_double_rows(video)),
        hl_norms_(window_norms(hl_, window)),
        vid_norms_(window_norms(vid_, window)),
        vid_norm_max_(*std::max_element(vid_norms_.begin(), vid_norms_.end())) {}

  std::size_t window_count() const { return (highlight_.frames() - window_) / stride_ + 1; }

  // Fills out[k] for window indices k in [first, last).
  void run(std::size_t first, std::size_t last, std::vector<WindowMatch>& out) const {
    const std::size_t offsets = video_.frames() - window_ + 1;
    const std::size_t row0 = first * stride_;
    const std::size_t row1 = (last - 1) * stride_ + window_;
    const RowMatrix dots = hl_.middleRows(static_cast<Eigen::Index>(row0),
                                          static_cast<Eigen::Index>(row1 - row0)) *
                           vid_.transpose();
    auto drow = [&](std::size_t hl_frame) { return dots.data() + (hl_frame - row0) * dots.cols(); };

    std::vector<double> cross(offsets), next(offsets);
    auto direct = [&](std::size_t h, std::size_t o_begin, std::size_t o_end, std::vector<double>& c) {
      std::fill(c.begin() + static_cast<std::ptrdiff_t>(o_begin), c.begin() + static_cast<std::ptrdiff_t>(o_end), 0.0);
      for (std::size_t i = 0; i < window_; ++i) {
        const double* d = drow(h + i) + i;
        for (std::size_t o = o_begin; o < o_end; ++o) c[o] += d[o];
      }
    };

    for (std::size_t k = first; k < last; ++k) {
      const std::size_t h = k * stride_;
      if (k == first || stride_ >= window_) {
        direct(h, 0, offsets, cross);
      } else {
        // cross(h, o) = cross(h - s, o - s) - leaving terms + entering terms
        const std::size_t s = stride_;
        const std::size_t hp = h - s;
        const std::size_t lo = std::min(s, offsets);
        direct(h, 0, lo, next);
        for (std::size_t o = lo; o < offsets; ++o) next[o] = cross[o - s];
        for (std::size_t j = 0; j < s; ++j) {
          const double* leave = drow(hp + j) + j;            // D(hp + j, o - s + j)
          const double* enter = drow(hp + window_ + j) + window_ + j;
          for (std::size_t o = lo; o < offsets; ++o) next[o] += enter[o - s] - leave[o - s];
        }
        cross.swap(next);
      }
      out[k] = best_match(h, cross);
    }
  }

 private:
  WindowMatch best_match(std::size_t h, const std::vector<double>& cross) const {
    const double denom = double(window_ * highlight_.dim);
    const double tn = hl_norms_[h];
    double best = std::numeric_limits<double>::infinity();
    const double tol = 1e-10 * (tn + vid_norm_max_ + 1.0) / denom;
    std::vector<std::size_t> candidates;
    for (std::size_t o = 0; o < cross.size(); ++o) {
      const double fast = (tn + vid_norms_[o] - 2.0 * cross[o]) / denom;
      if (fast < best - tol) {
        candidates.clear();
      }
      if (fast <= best + tol) candidates.push_back(o);
      best = std::min(best, fast);
    }
    WindowMatch m{h, 0, std::numeric_limits<double>::infinity()};
    const auto tmpl = FeatureWindow::of(highlight_, h, window_);
    for (std::size_t o : candidates) {
      const double fast = (tn + vid_norms_[o] - 2.0 * cross[o]) / denom;
      if (fast > best + tol) continue;
      const double exact = MeanSquaredDistance{}(tmpl, FeatureWindow::of(video_, o, window_));
      if (exact < m.score) m = {h, o, exact};
    }
    return m;
  }

  const FrameFeatureTrack& highlight_;
  const FrameFeatureTrack& video_;
  std::size_t window_, stride_;
  RowMatrix hl_, vid_;
  std::vector<double> hl_norms_, vid_norms_;
  double vid_norm_max_;
};

inline void check_match_inputs(const FrameFeatureTrack& highlight, const FrameFeatureTrack& video,
                               std::size_t window, std::size_t stride) {
  if (window == 0) throw UsageError("window must be positive");
  if (stride == 0) throw UsageError("stride must be positive");
  if (highlight.dim != video.dim)
    throw DataError("feature dimension mismatch: highlight " + std::to_string(highlight.dim) +
                    " vs video " + std::to_string(video.dim));
  if (video.frames() < window)
    throw DataError("video has " + std::to_string(video.frames()) + " frames, shorter than window " +
                    std::to_string(window));
  if (highlight.frames() < window)
    throw DataError("highlight has " + std::to_string(highlight.frames()) +
                    " frames, shorter than window " + std::to_string(window));
}

}  // namespace detail

// Best-matching video offset for each highlight window start h = 0, stride,
// 2*stride, ... (every start with a full window). Ties go to the smallest
// offset. MeanSquaredDistance takes an accelerated exhaustive path; any
// other metric is scanned directly.
template <typename Metric = MeanSquaredDistance>
std::vector<WindowMatch> match_profile(const FrameFeatureTrack& highlight, const FrameFeatureTrack& video,
                                       std::size_t window = kDefaultWindow, std::size_t stride = 1,
                                       std::size_t workers = 1, const Metric& metric = {}) {
  detail::check_match_inputs(highlight, video, window, stride);
  const std::size_t count = (highlight.frames() - window) / stride + 1;
  std::vector<WindowMatch> out(count);

  if constexpr (std::is_same_v<Metric, MeanSquaredDistance>) {
    const detail::MsdProfileKernel kernel(highlight, video, window, stride);
    constexpr std::size_t kChunk = 256;
    const std::size_t chunks = (count + kChunk - 1) / kChunk;
    parallel_for(chunks, workers, [&](std::size_t c) {
      kernel.run(c * kChunk, std::min(count, (c + 1) * kChunk), out);
    });
  } else {
    const std::size_t offsets = video.frames() - window + 1;
    parallel_for(count, workers, [&](std::size_t k) {
      const std::size_t h = k * stride;
      const auto tmpl = FeatureWindow::of(highlight, h, window);
      WindowMatch best{h, 0, std::numeric_limits<double>::infinity()};
      for (std::size_t o = 0; o < offsets; ++o) {
        const double d = metric(tmpl, FeatureWindow::of(video, o, window));
        if (d < best.score) best = {h, o, d};
      }
      out[k] = best;
    });
  }
  return out;
}

// Offset in `video` minimizing the distance to `templ` (whose frame count
// is the window length).
template <typename Metric = MeanSquaredDistance>
WindowMatch match_window(const FeatureWindow& templ, const FrameFeatureTrack& video, const Metric& metric = {}) {
  FrameFeatureTrack t("template", templ.dim);
  t.values.assign(templ.values.begin(), templ.values.end());
  return match_profile(t, video, templ.frames(), 1, 1, metric).front();
}

// ---------------------------------------------------------------------------
// Segmentation

struct ThresholdPolicy {
  enum class Kind { robust, absolute };
  Kind kind = Kind::robust;
  double mad_multiplier = 3.0;  // robust: median + k * MAD
  double value = 0.0;           // absolute threshold

  static ThresholdPolicy robust(double k = 3.0) { return {Kind::robust, k, 0.0}; }
  static ThresholdPolicy fixed(double v) { return {Kind::absolute, 0.0, v}; }
};

struct ClipRun {
  std::size_t first_window = 0;  // highlight start frame of the first window
  std::size_t last_window = 0;
  ClipSpan span;
  double mean_score = 0.0;
  double max_score = 0.0;
};

struct Segmentation {
  std::vector<ClipSpan> clips;
  std::vector<ClipRun> runs;
  double threshold = 0.0;
  bool degenerate = false;  // no window fell below the threshold
};

namespace detail {
inline double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
}  // namespace detail

inline double resolve_threshold(std::span<const WindowMatch> profile, const ThresholdPolicy& policy) {
  if (policy.kind == ThresholdPolicy::Kind::absolute) return policy.value;
  std::vector<double> scores;
  scores.reserve(profile.size());
  for (const auto& m : profile) scores.push_back(m.score);
  const double med = detail::median(scores);
  for (auto& s : scores) s = std::abs(s - med);
  return med + policy.mad_multiplier * detail::median(scores);
}

// Windows scoring above the threshold mark clip transitions. Consecutive
// below-threshold windows whose offsets advance by stride +/- drift_tolerance
// form one clip spanning [first offset, last offset + window).
inline Segmentation segment_clips(std::span<const WindowMatch> profile, std::size_t window,
                                  std::size_t stride = 1, const ThresholdPolicy& policy = {},
                                  std::size_t drift_tolerance = 2) {
  if (profile.empty()) throw DataError("cannot segment an empty match profile");
  Segmentation seg;
  seg.threshold = resolve_threshold(profile, policy);

  std::optional<ClipRun> run;
  double sum = 0.0;
  std::size_t n = 0;
  std::size_t last_offset = 0;
  auto close = [&] {
    if (!run) return;
    run->mean_score = sum / double(n);
    run->span.end = last_offset + window;
    seg.clips.push_back(run->span);
    seg.runs.push_back(*run);
    run.reset();
  };

  for (std::size_t k = 0; k < profile.size(); ++k) {
    const auto& m = profile[k];
    if (m.score > seg.threshold) {
      close();
      continue;
    }
    if (run) {
      const auto drift = static_cast<long long>(m.video_offset) - static_cast<long long>(last_offset) -
                         static_cast<long long>(stride);
      if (std::llabs(drift) > static_cast<long long>(drift_tolerance)) close();
    }
    if (!run) {
      run = ClipRun{m.highlight_start_frame, m.highlight_start_frame, {m.video_offset, 0}, 0.0, 0.0};
      sum = 0.0;
      n = 0;
    }
    run->last_window = m.highlight_start_frame;
    run->max_score = std::max(run->max_score, m.score);
    sum += m.score;
    ++n;
    last_offset = m.video_offset;
  }
  close();
  seg.degenerate = seg.clips.empty();
  return seg;
}

// Frames inside any clip are positive; overlapping clips merge.
inline LabelTrack labels_from_clips(std::span<const ClipSpan> clips, std::size_t frame_count,
                                    std::string video_id = "video") {
  LabelTrack track(std::move(video_id), frame_count);
  for (const auto& c : clips) {
    if (c.start >= c.end || c.end > frame_count)
      throw DataError("clip [" + std::to_string(c.start) + ", " + std::to_string(c.end) +
                      ") outside video of " + std::to_string(frame_count) + " frames");
    track.set(c);
  }
  return track;
}

// Keeps only the last ceil(keep_fraction * L) frames of every positive run.
inline LabelTrack truncate_positives(const LabelTrack& track, double keep_fraction = 0.25) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw UsageError("keep_fraction must be in (0, 1]");
  LabelTrack out(track.video_id, track.size());
  for (const auto& r : track.runs()) {
    // The epsilon absorbs representation error such as 0.1 * 30 > 3.
    auto keep = static_cast<std::size_t>(std::ceil(keep_fraction * double(r.length()) - 1e-9));
    keep = std::clamp<std::size_t>(keep, 1, r.length());
    out.set({r.end - keep, r.end});
  }
  return out;
}

}  // namespace hilite
