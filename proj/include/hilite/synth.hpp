#pragma once

// Synthetic videos with known highlight clips: feature tracks, chat logs,
// highlight reels and ground-truth labels.
//
// Features are a reflected Gaussian random walk in [0, 1]^dim. Frames inside
// a clip get a shared signature offset plus a small per-clip jitter. The reel
// concatenates the clip excerpts, optionally with bounded uniform noise. Chat
// is a Poisson process whose rate is multiplied by `burst_multiplier` while
// the audience reacts to a clip (the clip shifted by `reaction_lag_s`).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hilite/align.hpp"
#include "hilite/corpus.hpp"
#include "hilite/error.hpp"
#include "hilite/framefeat.hpp"
#include "hilite/rng.hpp"
#include "hilite/strings.hpp"

namespace hilite {

inline std::vector<std::string> default_noise_vocab() {
  return {"gg",   "lol",  "nice", "wp",     "kappa",  "ez",     "rip",   "wow",  "666",  "nt",
          "jaja", "ㅋㅋㅋ", "대박",  "好",     "大招",    "加油",    "привет", "давай", "どうも", "草",
          "vamos", "olé", "😂",   "🔥",     "ayy",    "xd",     "gl hf", "?",    "omg",  "<deleted>"};
}

struct SynthSpec {
  std::string video_id = "synth";
  std::size_t frame_count = 54000;
  double fps = 30.0;

  // Explicit clips; when empty, `clip_count` clips are placed at random.
  std::vector<FrameInterval> clips;
  std::size_t clip_count = 5;
  std::size_t clip_min_frames = 300;
  std::size_t clip_max_frames = 1200;
  std::size_t min_gap_frames = 300;

  // Chat. The base rate is chosen so the expected message count equals
  // expected_messages.
  double expected_messages = 7490.0;
  double burst_multiplier = 5.0;
  double reaction_lag_s = 3.5;
  std::string signal_token = "HYPE";
  double signal_prob_in = 0.8;
  double signal_prob_out = 0.02;
  std::vector<std::string> noise_vocab = default_noise_vocab();
  std::size_t max_message_words = 3;

  // Features.
  std::size_t dim = 48;
  double walk_step = 0.02;
  double signature = 0.3;    // magnitude of the shared in-clip offset
  double clip_jitter = 0.05;  // magnitude of the per-clip offset
  std::uint64_t signature_seed = 7;
  double reel_noise = 0.0;  // uniform noise bound added to reel frames

  std::uint64_t seed = 1;

  void validate() const {
    auto need = [](bool ok, const std::string& what) {
      if (!ok) throw UsageError("synth spec: " + what);
    };
    need(frame_count > 0, "frame_count must be positive");
    need(fps > 0 && std::isfinite(fps), "fps must be positive");
    need(dim > 0, "dim must be positive");
    need(expected_messages >= 0 && std::isfinite(expected_messages), "expected_messages must be non-negative");
    need(burst_multiplier > 0, "burst multiplier must be positive");
    need(signal_prob_in >= 0 && signal_prob_in <= 1 && signal_prob_out >= 0 && signal_prob_out <= 1,
         "signal probabilities must be in [0, 1]");
    need(!noise_vocab.empty(), "noise vocabulary is empty");
    need(max_message_words > 0, "max_message_words must be positive");
    need(walk_step >= 0 && signature >= 0 && clip_jitter >= 0 && reel_noise >= 0,
         "feature amplitudes must be non-negative");
    need(reaction_lag_s >= 0, "reaction lag must be non-negative");
    if (clips.empty()) {
      need(clip_min_frames > 0 && clip_min_frames <= clip_max_frames, "clip length range is empty");
      need(clip_count * clip_max_frames + (clip_count + 1) * min_gap_frames <= frame_count,
           "clips exceed the video duration");
    } else {
      std::size_t prev_end = 0;
      for (std::size_t i = 0; i < clips.size(); ++i) {
        need(clips[i].start < clips[i].end, "clip " + std::to_string(i) + " is empty");
        need(clips[i].end <= frame_count, "clip " + std::to_string(i) + " exceeds the video duration");
        need(i == 0 || clips[i].start >= prev_end, "clips must be ascending and disjoint");
        prev_end = clips[i].end;
      }
    }
  }
};

struct SynthVideo {
  FrameFeatureTrack features;
  ChatLog chat;
  FrameFeatureTrack highlight;
  LabelTrack labels;
  std::vector<FrameInterval> clips;
};

namespace detail {

// SplitMix64 finalizer for deriving independent seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::vector<FrameInterval> place_clips(const SynthSpec& s, Rng& rng) {
  std::vector<std::size_t> lengths(s.clip_count);
  std::size_t used = 0;
  for (auto& l : lengths) {
    l = s.clip_min_frames + uniform_index(rng, s.clip_max_frames - s.clip_min_frames + 1);
    used += l;
  }
  // Spread the slack over the clip_count + 1 gaps by sorted cut points.
  const std::size_t slack = s.frame_count - used - (s.clip_count + 1) * s.min_gap_frames;
  std::vector<std::size_t> cuts(s.clip_count);
  for (auto& c : cuts) c = uniform_index(rng, slack + 1);
  std::sort(cuts.begin(), cuts.end());
  std::vector<FrameInterval> out;
  std::size_t pos = 0, prev_cut = 0;
  for (std::size_t i = 0; i < s.clip_count; ++i) {
    pos += s.min_gap_frames + (cuts[i] - prev_cut);
    prev_cut = cuts[i];
    out.push_back({pos, pos + lengths[i]});
    pos += lengths[i];
  }
  return out;
}

inline double reflect_unit(double x) {
  x = std::fmod(x, 2.0);
  if (x < 0) x += 2.0;
  return x > 1.0 ? 2.0 - x : x;
}

}  // namespace detail

inline SynthVideo generate(const SynthSpec& s) {
  s.validate();
  Rng rng(s.seed);
  SynthVideo out;
  out.clips = s.clips.empty() ? detail::place_clips(s, rng) : s.clips;

  // Shared signature: a fixed +-1 pattern, identical for every video built
  // with the same signature_seed.
  std::vector<double> signature(s.dim);
  {
    Rng sig(s.signature_seed);
    for (auto& v : signature) v = bernoulli(sig, 0.5) ? s.signature : -s.signature;
  }

  auto& f = out.features;
  f.video_id = s.video_id;
  f.dim = s.dim;
  f.values.resize(s.frame_count * s.dim);
  std::vector<double> walk(s.dim);
  for (auto& w : walk) w = uniform01(rng);
  std::size_t next_clip = 0;
  std::vector<double> offset(s.dim, 0.0);
  for (std::size_t t = 0; t < s.frame_count; ++t) {
    for (auto& w : walk) w = detail::reflect_unit(w + s.walk_step * normal(rng));
    while (next_clip < out.clips.size() && out.clips[next_clip].end <= t) ++next_clip;
    const bool inside = next_clip < out.clips.size() && out.clips[next_clip].contains(t);
    if (inside && t == out.clips[next_clip].start)
      for (std::size_t d = 0; d < s.dim; ++d) offset[d] = signature[d] + uniform(rng, -s.clip_jitter, s.clip_jitter);
    for (std::size_t d = 0; d < s.dim; ++d)
      f.values[t * s.dim + d] = static_cast<float>(walk[d] + (inside ? offset[d] : 0.0));
  }

  out.highlight.video_id = s.video_id;
  out.highlight.dim = s.dim;
  for (const auto& c : out.clips)
    for (std::size_t t = c.start; t < c.end; ++t)
      for (std::size_t d = 0; d < s.dim; ++d) {
        double v = f.values[t * s.dim + d];
        if (s.reel_noise > 0) v += uniform(rng, -s.reel_noise, s.reel_noise);
        out.highlight.values.push_back(static_cast<float>(v));
      }

  out.labels = labels_from_clips(out.clips, s.frame_count, s.video_id);

  // Chat: piecewise-constant rate over [0, duration).
  const double duration = double(s.frame_count) / s.fps;
  struct Segment {
    double start, end;
    bool burst;
  };
  std::vector<Segment> segs;
  double cursor = 0, burst_time = 0;
  for (const auto& c : out.clips) {
    const double a = std::min(duration, double(c.start) / s.fps + s.reaction_lag_s);
    const double b = std::min(duration, double(c.end) / s.fps + s.reaction_lag_s);
    if (a > cursor) segs.push_back({cursor, a, false});
    if (b > std::max(a, cursor)) segs.push_back({std::max(a, cursor), b, true});
    burst_time += std::max(0.0, b - std::max(a, cursor));
    cursor = std::max(cursor, b);
  }
  if (cursor < duration) segs.push_back({cursor, duration, false});
  const double base_rate = s.expected_messages / (duration - burst_time + s.burst_multiplier * burst_time);

  out.chat.video_id = s.video_id;
  if (base_rate > 0) {
    for (const auto& seg : segs) {
      const double rate = seg.burst ? base_rate * s.burst_multiplier : base_rate;
      for (double t = seg.start + exponential(rng, rate); t < seg.end; t += exponential(rng, rate)) {
        ChatMessage m;
        m.timestamp_s = detail::quantize_ms(t);
        const std::size_t words = 1 + uniform_index(rng, s.max_message_words);
        for (std::size_t w = 0; w < words; ++w) {
          if (w) m.text += ' ';
          m.text += s.noise_vocab[uniform_index(rng, s.noise_vocab.size())];
        }
        if (bernoulli(rng, seg.burst ? s.signal_prob_in : s.signal_prob_out)) m.text += " " + s.signal_token;
        m.author_hash = "u" + std::to_string(uniform_index(rng, 5000));
        out.chat.messages.push_back(std::move(m));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Datasets

struct SynthDatasetSpec {
  SynthSpec video;  // template; video_id and seed are set per video
  std::size_t videos = 6;
};

struct SynthDataset {
  std::vector<SynthVideo> videos;
  DatasetManifest manifest;
};

// Video i is game (i % 3) + 1 of week (i / 3) % 9 + 1, so every three
// consecutive videos form one match.
inline std::pair<int, int> synth_week_game(std::size_t i) {
  return {static_cast<int>((i / 3) % 9) + 1, static_cast<int>(i % 3) + 1};
}

inline SynthSpec dataset_video_spec(const SynthDatasetSpec& ds, std::size_t i) {
  SynthSpec s = ds.video;
  const auto [week, game] = synth_week_game(i);
  s.video_id = "w" + std::to_string(week) + "g" + std::to_string(game) + "_" + std::to_string(i);
  s.seed = detail::mix_seed(ds.video.seed, i);
  return s;
}

inline SynthDataset generate_dataset(const SynthDatasetSpec& ds) {
  if (ds.videos == 0) throw UsageError("synth dataset needs at least one video");
  SynthDataset out;
  for (std::size_t i = 0; i < ds.videos; ++i) {
    const auto s = dataset_video_spec(ds, i);
    out.videos.push_back(generate(s));
    ManifestEntry e;
    e.video_id = s.video_id;
    const auto [week, game] = synth_week_game(i);
    e.week = week;
    e.game = game;
    e.split = split_assignment(week, game);
    e.fps = s.fps;
    e.artifacts = {{"features", s.video_id + ".ftrk"},
                   {"chat", s.video_id + ".chat"},
                   {"highlight", s.video_id + ".hl.ftrk"},
                   {"labels", s.video_id + ".gt.lbl"}};
    out.manifest.entries.push_back(std::move(e));
  }
  return out;
}

inline void save_dataset(const SynthDataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < ds.videos.size(); ++i) {
    const auto& v = ds.videos[i];
    const auto& e = ds.manifest.entries[i];
    save_feature_track(dir / e.artifacts.at("features"), v.features);
    save_chat_log(dir / e.artifacts.at("chat"), v.chat);
    save_feature_track(dir / e.artifacts.at("highlight"), v.highlight);
    save_label_track(dir / e.artifacts.at("labels"), v.labels);
  }
  std::ofstream os(dir / "manifest.txt");
  if (!os) throw DataError("cannot write manifest in " + dir.string());
  write_manifest(os, ds.manifest);
}

// key=value per line, `#` comments. Keys mirror the SynthSpec fields plus
// `videos`; `clips` is a comma-separated list of start-end pairs and
// `noise_vocab` a `|`-separated word list.
inline SynthDatasetSpec parse_synth_spec(std::istream& is, std::string_view source = "synth spec") {
  SynthDatasetSpec ds;
  auto& s = ds.video;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    auto fail = [&](const std::string& what) {
      throw UsageError(std::string(source) + ":" + std::to_string(lineno) + ": " + what);
    };
    if (eq == std::string_view::npos) fail("expected key=value");
    const std::string key(text::trim(body.substr(0, eq)));
    const std::string value(text::trim(body.substr(eq + 1)));
    auto size = [&]() {
      const auto v = text::parse_int<std::size_t>(value);
      if (!v) fail("bad integer for " + key);
      return *v;
    };
    auto real = [&]() {
      const auto v = text::parse_double(value);
      if (!v) fail("bad number for " + key);
      return *v;
    };
    if (key == "videos") ds.videos = size();
    else if (key == "video_id") s.video_id = value;
    else if (key == "frame_count") s.frame_count = size();
    else if (key == "fps") s.fps = real();
    else if (key == "clip_count") s.clip_count = size();
    else if (key == "clip_min_frames") s.clip_min_frames = size();
    else if (key == "clip_max_frames") s.clip_max_frames = size();
    else if (key == "min_gap_frames") s.min_gap_frames = size();
    else if (key == "expected_messages") s.expected_messages = real();
    else if (key == "burst_multiplier") s.burst_multiplier = real();
    else if (key == "reaction_lag_s") s.reaction_lag_s = real();
    else if (key == "signal_token") s.signal_token = value;
    else if (key == "signal_prob_in") s.signal_prob_in = real();
    else if (key == "signal_prob_out") s.signal_prob_out = real();
    else if (key == "max_message_words") s.max_message_words = size();
    else if (key == "dim") s.dim = size();
    else if (key == "walk_step") s.walk_step = real();
    else if (key == "signature") s.signature = real();
    else if (key == "clip_jitter") s.clip_jitter = real();
    else if (key == "signature_seed") s.signature_seed = size();
    else if (key == "reel_noise") s.reel_noise = real();
    else if (key == "seed") s.seed = size();
    else if (key == "noise_vocab") {
      s.noise_vocab.clear();
      std::size_t start = 0;
      while (start <= value.size()) {
        const auto bar = value.find('|', start);
        const auto word = value.substr(start, bar == std::string::npos ? std::string::npos : bar - start);
        if (!word.empty()) s.noise_vocab.push_back(word);
        if (bar == std::string::npos) break;
        start = bar + 1;
      }
    } else if (key == "clips") {
      s.clips.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const auto dash = item.find('-');
        if (dash == std::string::npos) fail("clip must be start-end");
        const auto a = text::parse_int<std::size_t>(text::trim(std::string_view(item).substr(0, dash)));
        const auto b = text::parse_int<std::size_t>(text::trim(std::string_view(item).substr(dash + 1)));
        if (!a || !b) fail("bad clip `" + item + "`");
        s.clips.push_back({*a, *b});
      }
    } else {
      fail("unknown key `" + key + "`");
    }
  }
  s.validate();
  return ds;
}

inline SynthDatasetSpec load_synth_spec(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open synth spec " + path.string());
  return parse_synth_spec(is, path.string());
}

}  // namespace hilite
