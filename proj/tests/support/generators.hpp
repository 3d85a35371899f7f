#pragma once

// Hand-rolled random generators for property tests.

#include <cstdint>
#include <string>
#include <vector>

#include "hilite/corpus.hpp"
#include "hilite/framefeat.hpp"
#include "hilite/rng.hpp"

namespace hilite::testing {

inline std::size_t gen_size(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(uniform_index(rng, hi - lo + 1));
}

inline FrameFeatureTrack gen_track(Rng& rng, std::size_t frames, std::size_t dim, std::string id = "v") {
  FrameFeatureTrack t(std::move(id), dim);
  t.values.resize(frames * dim);
  for (auto& v : t.values) v = static_cast<float>(uniform01(rng));
  return t;
}

// Random walk in [0, 1], the kind of track alignment is designed for.
inline FrameFeatureTrack gen_walk(Rng& rng, std::size_t frames, std::size_t dim, double step = 0.03,
                                  std::string id = "v") {
  FrameFeatureTrack t(std::move(id), dim);
  t.values.resize(frames * dim);
  std::vector<double> x(dim);
  for (auto& v : x) v = uniform01(rng);
  for (std::size_t f = 0; f < frames; ++f)
    for (std::size_t d = 0; d < dim; ++d) {
      double v = x[d] + step * normal(rng);
      v = v < 0 ? -v : v > 1 ? 2 - v : v;
      x[d] = v;
      t.values[f * dim + d] = static_cast<float>(v);
    }
  return t;
}

inline LabelTrack gen_labels(Rng& rng, std::size_t frames, double density = 0.3, std::string id = "v") {
  LabelTrack t(std::move(id), frames);
  for (auto& l : t.labels) l = bernoulli(rng, density) ? 1 : 0;
  return t;
}

// Ascending disjoint intervals inside [0, frames).
inline std::vector<FrameInterval> gen_intervals(Rng& rng, std::size_t frames, std::size_t max_count) {
  std::vector<FrameInterval> out;
  std::size_t pos = 0;
  const std::size_t count = gen_size(rng, 0, max_count);
  for (std::size_t i = 0; i < count && pos + 2 < frames; ++i) {
    const std::size_t start = pos + gen_size(rng, 0, (frames - pos) / 3);
    const std::size_t len = 1 + gen_size(rng, 0, (frames - start) / 3);
    if (start + len > frames) break;
    out.push_back({start, start + len});
    pos = start + len + 1;
  }
  return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

// Codepoint drawn from a mix of scripts: ASCII (with backslashes and
// control characters), Latin-1, Cyrillic, CJK, Hangul, emoji and the
// supplementary planes. Surrogates are never produced.
inline char32_t gen_codepoint(Rng& rng) {
  switch (uniform_index(rng, 8)) {
    case 0: return static_cast<char32_t>(uniform_index(rng, 0x80));
    case 1: return U'\\';
    case 2: return static_cast<char32_t>(0x80 + uniform_index(rng, 0x780));
    case 3: return static_cast<char32_t>(0x400 + uniform_index(rng, 0x100));
    case 4: return static_cast<char32_t>(0x4E00 + uniform_index(rng, 0x5200));
    case 5: return static_cast<char32_t>(0xAC00 + uniform_index(rng, 0x2BA4));
    case 6: return static_cast<char32_t>(0x1F300 + uniform_index(rng, 0x300));
    default: {
      char32_t cp = static_cast<char32_t>(0xE000 + uniform_index(rng, 0x10FFFF - 0xE000 + 1));
      return cp;
    }
  }
}

inline std::string gen_unicode(Rng& rng, std::size_t max_codepoints) {
  std::string s;
  const std::size_t n = gen_size(rng, 0, max_codepoints);
  for (std::size_t i = 0; i < n; ++i) append_utf8(s, gen_codepoint(rng));
  return s;
}

// Arbitrary bytes, usually not valid UTF-8.
inline std::string gen_bytes(Rng& rng, std::size_t max_len) {
  std::string s(gen_size(rng, 0, max_len), '\0');
  for (auto& c : s) c = static_cast<char>(uniform_index(rng, 256));
  return s;
}

inline ChatLog gen_chat(Rng& rng, std::size_t messages, double duration_s, std::string id = "v") {
  ChatLog log;
  log.video_id = std::move(id);
  for (std::size_t i = 0; i < messages; ++i) {
    ChatMessage m;
    m.timestamp_s = std::round(uniform(rng, 0.0, duration_s) * 1000.0) / 1000.0;
    m.text = gen_unicode(rng, 12);
    if (bernoulli(rng, 0.5)) m.author_hash = "a" + std::to_string(uniform_index(rng, 100));
    log.messages.push_back(std::move(m));
  }
  std::stable_sort(log.messages.begin(), log.messages.end(),
                   [](const ChatMessage& a, const ChatMessage& b) { return a.timestamp_s < b.timestamp_s; });
  return log;
}

inline Frame gen_frame(Rng& rng, std::size_t height, std::size_t width) {
  Frame f{height, width, std::vector<std::uint8_t>(height * width * 3)};
  for (auto& p : f.rgb) p = static_cast<std::uint8_t>(uniform_index(rng, 256));
  return f;
}

}  // namespace hilite::testing
