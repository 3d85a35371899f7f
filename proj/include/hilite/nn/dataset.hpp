#pragma once

// Per-video model inputs, example construction and epoch sampling.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "hilite/chatenc.hpp"
#include "hilite/corpus.hpp"
#include "hilite/error.hpp"
#include "hilite/framefeat.hpp"
#include "hilite/nn/model.hpp"
#include "hilite/rng.hpp"

namespace hilite::nn {

// Everything a model may look at for one video.
struct VideoInputs {
  std::string video_id;
  double fps = 30.0;
  std::size_t frame_count = 0;
  std::optional<FrameFeatureTrack> features;
  std::optional<ChatLog> chat;
};

// Frame indices feeding the vision LSTM for a prediction at `frame`, oldest
// first; negative entries fall before the start of the video.
inline std::vector<std::int64_t> vision_frames(const ModelConfig& c, std::size_t frame) {
  std::vector<std::int64_t> out(c.vision_steps);
  for (std::size_t j = 0; j < c.vision_steps; ++j)
    out[j] = static_cast<std::int64_t>(frame) -
             static_cast<std::int64_t>((c.vision_steps - 1 - j) * c.frame_stride);
  return out;
}

// True when the vision window at `frame` reaches before frame 0.
inline bool vision_padded(const ModelConfig& c, std::size_t frame) {
  return c.uses_vision() && frame < (c.vision_steps - 1) * c.frame_stride;
}

// Builds Examples from VideoInputs. Holds pointers into `videos`, which must
// outlive the builder and not be resized.
class ExampleBuilder {
 public:
  ExampleBuilder(const ModelConfig& c, std::span<const VideoInputs> videos, const WordVocab* vocab = nullptr)
      : config_(c), videos_(videos), vocab_(vocab) {
    if (c.kind == ModelKind::lang_word && !vocab) throw UsageError("word model needs a vocabulary");
    const WindowConfig wc{c.text_window_s};
    for (const auto& v : videos) {
      if (v.frame_count == 0) throw DataError("video " + v.video_id + " has no frames");
      if (c.uses_vision()) {
        if (!v.features) throw DataError("video " + v.video_id + " has no feature track");
        if (v.features->dim != c.feature_dim)
          throw DataError("video " + v.video_id + ": feature dim " + std::to_string(v.features->dim) +
                          " != model " + std::to_string(c.feature_dim));
        if (v.features->frames() != v.frame_count)
          throw DataError("video " + v.video_id + ": feature track has " + std::to_string(v.features->frames()) +
                          " frames, expected " + std::to_string(v.frame_count));
      }
      if (c.uses_language() && !v.chat) throw DataError("video " + v.video_id + " has no chat log");
      if (c.kind == ModelKind::lang_char || c.kind == ModelKind::joint) {
        encoders_.emplace_back(*v.chat, wc);
      } else if (c.kind == ModelKind::lang_word) {
        std::vector<std::vector<std::uint32_t>> msgs;
        msgs.reserve(v.chat->messages.size());
        for (const auto& m : v.chat->messages) {
          std::vector<std::uint32_t> ids;
          for (const auto& w : tokenize_words(sanitize(m.text))) ids.push_back(vocab_->lookup(w));
          msgs.push_back(std::move(ids));
        }
        word_msgs_.push_back(std::move(msgs));
      }
    }
  }

  const ModelConfig& config() const { return config_; }
  std::span<const VideoInputs> videos() const { return videos_; }

  Example make(std::size_t video, std::size_t frame, int target = 0) const {
    const auto& v = videos_[video];
    if (frame >= v.frame_count)
      throw UsageError("frame " + std::to_string(frame) + " beyond end of " + v.video_id);
    Example ex;
    ex.target = target;
    const double t = double(frame) / v.fps;
    if (config_.kind == ModelKind::lang_word) {
      const auto [first, last] = window_range(*v.chat, t, WindowConfig{config_.text_window_s});
      for (std::size_t i = first; i < last; ++i) {
        const auto& ids = word_msgs_[video][i];
        ex.tokens.insert(ex.tokens.end(), ids.begin(), ids.end());
        ex.tokens.push_back(vocab_->stop_index());
      }
    } else if (config_.uses_language()) {
      const auto w = encoders_[video].at(t, frame);
      ex.tokens.assign(w.indices.begin(), w.indices.end());
    }
    if (config_.uses_vision()) {
      const std::size_t d = config_.feature_dim;
      ex.vision.assign(config_.vision_steps * d, 0.0f);
      const auto frames = vision_frames(config_, frame);
      for (std::size_t j = 0; j < frames.size(); ++j) {
        if (frames[j] < 0) continue;
        const auto src = v.features->frame(static_cast<std::size_t>(frames[j]));
        std::copy(src.begin(), src.end(), ex.vision.begin() + static_cast<std::ptrdiff_t>(j * d));
      }
    }
    return ex;
  }

 private:
  ModelConfig config_;
  std::span<const VideoInputs> videos_;
  const WordVocab* vocab_;
  std::vector<ChatWindowEncoder> encoders_;
  std::vector<std::vector<std::vector<std::uint32_t>>> word_msgs_;
};

// ---------------------------------------------------------------------------
// Sampling

struct FrameRef {
  std::uint32_t video = 0;
  std::uint64_t frame = 0;
  bool positive = false;

  friend bool operator==(const FrameRef&, const FrameRef&) = default;
};

// A set of frames across videos stored as runs, indexable without
// materializing every frame.
class FramePool {
 public:
  void add(std::uint32_t video, FrameInterval run) {
    if (run.length() == 0) return;
    runs_.push_back({video, run});
    ends_.push_back(size() + run.length());
  }

  std::size_t size() const { return ends_.empty() ? 0 : ends_.back(); }

  std::pair<std::uint32_t, std::uint64_t> at(std::size_t k) const {
    const auto it = std::upper_bound(ends_.begin(), ends_.end(), k);
    const auto r = static_cast<std::size_t>(it - ends_.begin());
    const std::size_t begin = r == 0 ? 0 : ends_[r - 1];
    return {runs_[r].video, runs_[r].run.start + (k - begin)};
  }

  bool contains(std::uint32_t video, std::uint64_t frame) const {
    for (const auto& r : runs_)
      if (r.video == video && r.run.contains(static_cast<std::size_t>(frame))) return true;
    return false;
  }

 private:
  struct Run {
    std::uint32_t video;
    FrameInterval run;
  };
  std::vector<Run> runs_;
  std::vector<std::size_t> ends_;
};

struct SamplePools {
  FramePool positives;
  FramePool negatives;

  // Positives come from the truncated tracks. Negatives are frames negative
  // in `full` (the untruncated labels) so the discarded head of a clip is
  // never taught as a non-highlight; with `full` empty the truncated tracks
  // define both classes.
  static SamplePools build(std::span<const LabelTrack> truncated, std::span<const LabelTrack> full = {}) {
    if (!full.empty() && full.size() != truncated.size())
      throw UsageError("truncated and full label lists differ in length");
    SamplePools p;
    for (std::size_t v = 0; v < truncated.size(); ++v) {
      const auto id = static_cast<std::uint32_t>(v);
      for (const auto& r : truncated[v].runs()) p.positives.add(id, r);
      const LabelTrack& neg_src = full.empty() ? truncated[v] : full[v];
      if (neg_src.size() != truncated[v].size())
        throw DataError("label tracks for " + truncated[v].video_id + " differ in length");
      std::size_t prev = 0;
      for (const auto& r : neg_src.runs()) {
        p.negatives.add(id, {prev, r.start});
        prev = r.end;
      }
      p.negatives.add(id, {prev, neg_src.size()});
    }
    return p;
  }
};

struct EpochSample {
  std::vector<FrameRef> refs;  // shuffled; positives and negatives mixed
  bool positives_with_replacement = false;
  bool negatives_with_replacement = false;
};

namespace detail {

// k distinct indices of [0, n) (Floyd), or k draws with replacement when
// the pool is too small.
inline std::vector<std::size_t> draw_indices(std::size_t n, std::size_t k, Rng& rng, bool& replaced) {
  std::vector<std::size_t> out;
  out.reserve(k);
  replaced = k > n;
  if (replaced) {
    for (std::size_t i = 0; i < k; ++i) out.push_back(uniform_index(rng, n));
    return out;
  }
  std::unordered_set<std::size_t> seen;
  seen.reserve(k * 2);
  for (std::size_t j = n - k; j < n; ++j) {
    const std::size_t t = uniform_index(rng, j + 1);
    const std::size_t pick = seen.count(t) ? j : t;
    seen.insert(pick);
    out.push_back(pick);
  }
  return out;
}

}  // namespace detail

inline EpochSample sample_epoch(const SamplePools& pools, std::size_t positives, std::size_t negatives, Rng& rng) {
  if (pools.positives.size() == 0) throw DataError("no positive frames to sample from");
  if (negatives > 0 && pools.negatives.size() == 0) throw DataError("no negative frames to sample from");
  EpochSample s;
  s.refs.reserve(positives + negatives);
  for (auto k : detail::draw_indices(pools.positives.size(), positives, rng, s.positives_with_replacement)) {
    const auto [v, f] = pools.positives.at(k);
    s.refs.push_back({v, f, true});
  }
  if (negatives > 0)
    for (auto k : detail::draw_indices(pools.negatives.size(), negatives, rng, s.negatives_with_replacement)) {
      const auto [v, f] = pools.negatives.at(k);
      s.refs.push_back({v, f, false});
    }
  shuffle(s.refs, rng);
  return s;
}

}  // namespace hilite::nn
