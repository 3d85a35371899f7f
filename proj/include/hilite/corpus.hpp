#pragma once

// Data model and on-disk formats for videos, chat logs, label tracks and the
// dataset manifest.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hilite/error.hpp"
#include "hilite/strings.hpp"

namespace hilite {

namespace fs = std::filesystem;

// Half-open frame interval [start, end).
struct FrameInterval {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool contains(std::size_t f) const { return f >= start && f < end; }
  friend bool operator==(const FrameInterval&, const FrameInterval&) = default;
};

// ---------------------------------------------------------------------------
// Chat

struct ChatMessage {
  double timestamp_s = 0.0;  // seconds from video start
  std::string text;
  std::string author_hash;  // opaque, may be empty

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

// Messages are kept sorted by timestamp (stable on ties).
struct ChatLog {
  std::string video_id;
  std::vector<ChatMessage> messages;

  std::size_t size() const { return messages.size(); }
};

namespace detail {

// Backslash escaping for the tab-separated chat format.
inline std::string escape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::optional<std::string> unescape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i == s.size()) return std::nullopt;
    switch (s[i]) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: return std::nullopt;
    }
  }
  return out;
}

inline double quantize_ms(double seconds) { return std::round(seconds * 1000.0) / 1000.0; }

inline std::string line_error(std::string_view what, std::size_t line, std::string_view detail) {
  std::ostringstream os;
  os << what << ": line " << line << ": " << detail;
  return os.str();
}

}  // namespace detail

// Reads `<timestamp_s>\t<author_hash>\t<text>` records. Timestamps are rounded
// to milliseconds; out-of-order records are accepted and sorted.
inline ChatLog parse_chat_log(std::istream& is, std::string video_id,
                              std::string_view source = "chat log") {
  ChatLog log;
  log.video_id = std::move(video_id);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos)
      throw DataError(detail::line_error(source, lineno, "expected 3 tab-separated fields"));
    const auto ts = text::parse_double(std::string_view(line).substr(0, t1));
    if (!ts || !std::isfinite(*ts) || *ts < 0.0)
      throw DataError(detail::line_error(source, lineno, "unparsable timestamp"));
    auto author = detail::unescape_field(std::string_view(line).substr(t1 + 1, t2 - t1 - 1));
    auto body = detail::unescape_field(std::string_view(line).substr(t2 + 1));
    if (!author || !body)
      throw DataError(detail::line_error(source, lineno, "bad escape sequence"));
    log.messages.push_back({detail::quantize_ms(*ts), std::move(*body), std::move(*author)});
  }
  std::stable_sort(log.messages.begin(), log.messages.end(),
                   [](const ChatMessage& a, const ChatMessage& b) {
                     return a.timestamp_s < b.timestamp_s;
                   });
  return log;
}

inline ChatLog load_chat_log(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open chat log " + path.string());
  return parse_chat_log(is, path.stem().string(), path.string());
}

inline void write_chat_log(std::ostream& os, const ChatLog& log) {
  for (const auto& m : log.messages) {
    os << text::format_double(m.timestamp_s) << '\t' << detail::escape_field(m.author_hash)
       << '\t' << detail::escape_field(m.text) << '\n';
  }
}

inline void save_chat_log(const fs::path& path, const ChatLog& log) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write chat log " + path.string());
  write_chat_log(os, log);
}

// ---------------------------------------------------------------------------
// Video metadata and labels

struct VideoMeta {
  std::string video_id;
  double fps = 30.0;
  std::size_t frame_count = 1;
  int width = 0;
  int height = 0;

  void validate() const {
    if (!(fps > 0.0) || !std::isfinite(fps)) throw DataError("video " + video_id + ": fps must be positive");
    if (frame_count < 1) throw DataError("video " + video_id + ": frame_count must be >= 1");
  }
  double duration_s() const { return double(frame_count) / fps; }
};

// Per-frame binary highlight labels.
struct LabelTrack {
  std::string video_id;
  std::vector<std::uint8_t> labels;  // 0 or 1 per frame

  LabelTrack() = default;
  LabelTrack(std::string id, std::size_t frame_count)
      : video_id(std::move(id)), labels(frame_count, 0) {}

  std::size_t size() const { return labels.size(); }
  bool operator[](std::size_t f) const { return labels[f] != 0; }

  std::size_t positives() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
  }

  // Maximal runs of positive frames, ascending.
  std::vector<FrameInterval> runs() const {
    std::vector<FrameInterval> out;
    std::size_t f = 0;
    while (f < labels.size()) {
      if (!labels[f]) {
        ++f;
        continue;
      }
      std::size_t e = f;
      while (e < labels.size() && labels[e]) ++e;
      out.push_back({f, e});
      f = e;
    }
    return out;
  }

  void set(FrameInterval iv, bool value = true) {
    std::fill(labels.begin() + static_cast<std::ptrdiff_t>(iv.start),
              labels.begin() + static_cast<std::ptrdiff_t>(iv.end), std::uint8_t(value ? 1 : 0));
  }

  friend bool operator==(const LabelTrack&, const LabelTrack&) = default;
};

// Header `video_id frame_count`, then one `start end` line per positive run.
inline void write_label_track(std::ostream& os, const LabelTrack& track) {
  if (track.video_id.empty() || track.video_id.find_first_of(" \t\r\n") != std::string::npos)
    throw DataError("label track video_id must be non-empty and contain no whitespace");
  os << track.video_id << ' ' << track.size() << '\n';
  for (const auto& r : track.runs()) os << r.start << ' ' << r.end << '\n';
}

inline LabelTrack read_label_track(std::istream& is, std::string_view source = "label track") {
  std::string header;
  if (!std::getline(is, header)) throw DataError(std::string(source) + ": missing header");
  const auto head = text::split_blanks(header);
  if (head.size() != 2) throw DataError(std::string(source) + ": header must be `video_id frame_count`");
  const auto n = text::parse_int<std::size_t>(head[1]);
  if (!n) throw DataError(std::string(source) + ": bad frame count");
  LabelTrack track(std::string(head[0]), *n);

  std::string rest((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const auto tokens = text::split_blanks([&] {
    std::replace(rest.begin(), rest.end(), '\n', ' ');
    return std::string_view(rest);
  }());
  if (tokens.size() % 2 != 0) throw DataError(std::string(source) + ": odd number of interval bounds");
  std::size_t prev_end = 0;
  for (std::size_t i = 0; i < tokens.size(); i += 2) {
    const auto s = text::parse_int<std::size_t>(tokens[i]);
    const auto e = text::parse_int<std::size_t>(tokens[i + 1]);
    if (!s || !e) throw DataError(std::string(source) + ": bad interval bound");
    if (*s >= *e || *e > *n || (i > 0 && *s < prev_end))
      throw DataError(std::string(source) + ": intervals must be non-empty, ascending, disjoint and within frame_count");
    track.set({*s, *e});
    prev_end = *e;
  }
  return track;
}

inline void save_label_track(const fs::path& path, const LabelTrack& track) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write label track " + path.string());
  write_label_track(os, track);
}

inline LabelTrack load_label_track(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open label track " + path.string());
  return read_label_track(is, path.string());
}

// ---------------------------------------------------------------------------
// Splits and manifest

enum class Split { train, val, test };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  return std::nullopt;
}

// Games 1 and 3 of a match train; game 2 validates in weeks 1-4 and tests
// afterwards.
inline Split split_assignment(int week, int game_index_in_match) {
  if (week < 1 || week > 9) throw UsageError("week must be in [1, 9], got " + std::to_string(week));
  if (game_index_in_match < 1 || game_index_in_match > 3)
    throw UsageError("game index must be in {1, 2, 3}, got " + std::to_string(game_index_in_match));
  if (game_index_in_match != 2) return Split::train;
  return week <= 4 ? Split::val : Split::test;
}

struct ManifestEntry {
  std::string video_id;
  Split split = Split::train;
  std::optional<int> week;
  std::optional<int> game;
  double fps = 30.0;
  std::map<std::string, fs::path> artifacts;  // key -> path as written

  bool has(const std::string& key) const { return artifacts.count(key) != 0; }
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  fs::path base_dir;  // relative artifact paths resolve against this

  static constexpr std::string_view kArtifactKeys[] = {"video", "features", "chat", "highlight",
                                                       "labels"};

  fs::path resolve(const ManifestEntry& e, const std::string& key) const {
    auto it = e.artifacts.find(key);
    if (it == e.artifacts.end())
      throw DataError("manifest entry " + e.video_id + " has no `" + key + "` artifact");
    return it->second.is_absolute() ? it->second : base_dir / it->second;
  }

  const ManifestEntry& find(std::string_view video_id) const {
    for (const auto& e : entries)
      if (e.video_id == video_id) return e;
    throw DataError("video " + std::string(video_id) + " not in manifest");
  }

  std::vector<const ManifestEntry*> in_split(Split s) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries)
      if (e.split == s) out.push_back(&e);
    return out;
  }

  void validate_unique() const {
    std::set<std::string> seen;
    for (const auto& e : entries)
      if (!seen.insert(e.video_id).second) throw DataError("duplicate video_id in manifest: " + e.video_id);
  }

  void validate_paths() const {
    for (const auto& e : entries)
      for (const auto& [key, p] : e.artifacts) {
        const auto full = resolve(e, key);
        if (!fs::exists(full))
          throw DataError("manifest entry " + e.video_id + ": " + key + " artifact missing: " +
                          full.string());
      }
  }
};

// One entry per line: whitespace-separated key=value pairs. Required key:
// video_id. split defaults to split_assignment(week, game) when both are
// given; an explicit split must agree with them.
inline DatasetManifest parse_manifest(std::istream& is, fs::path base_dir,
                                      std::string_view source = "manifest") {
  DatasetManifest m;
  m.base_dir = std::move(base_dir);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    ManifestEntry e;
    std::optional<Split> explicit_split;
    for (auto tok : text::split_blanks(body)) {
      const auto eq = tok.find('=');
      if (eq == std::string_view::npos || eq == 0)
        throw DataError(detail::line_error(source, lineno, "expected key=value, got `" + std::string(tok) + "`"));
      const std::string key(tok.substr(0, eq));
      const auto value = tok.substr(eq + 1);
      if (key == "video_id") {
        e.video_id = value;
      } else if (key == "split") {
        explicit_split = parse_split(value);
        if (!explicit_split) throw DataError(detail::line_error(source, lineno, "unknown split"));
      } else if (key == "week" || key == "game") {
        const auto v = text::parse_int<int>(value);
        if (!v) throw DataError(detail::line_error(source, lineno, "bad " + key));
        (key == "week" ? e.week : e.game) = *v;
      } else if (key == "fps") {
        const auto v = text::parse_double(value);
        if (!v || !(*v > 0)) throw DataError(detail::line_error(source, lineno, "bad fps"));
        e.fps = *v;
      } else if (std::find(std::begin(DatasetManifest::kArtifactKeys),
                           std::end(DatasetManifest::kArtifactKeys),
                           key) != std::end(DatasetManifest::kArtifactKeys)) {
        e.artifacts[key] = fs::path(std::string(value));
      } else {
        throw DataError(detail::line_error(source, lineno, "unknown key `" + key + "`"));
      }
    }
    if (e.video_id.empty()) throw DataError(detail::line_error(source, lineno, "missing video_id"));
    std::optional<Split> derived;
    if (e.week && e.game) {
      try {
        derived = split_assignment(*e.week, *e.game);
      } catch (const UsageError& err) {
        throw DataError(detail::line_error(source, lineno, err.what()));
      }
    }
    if (explicit_split && derived && *explicit_split != *derived)
      throw DataError(detail::line_error(source, lineno, "split disagrees with week/game"));
    if (!explicit_split && !derived)
      throw DataError(detail::line_error(source, lineno, "need split or week+game"));
    e.split = explicit_split ? *explicit_split : *derived;
    m.entries.push_back(std::move(e));
  }
  m.validate_unique();
  return m;
}

inline DatasetManifest load_manifest(const fs::path& path, bool check_paths = true) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest " + path.string());
  auto m = parse_manifest(is, path.parent_path(), path.string());
  if (check_paths) m.validate_paths();
  return m;
}

inline void write_manifest(std::ostream& os, const DatasetManifest& m) {
  for (const auto& e : m.entries) {
    os << "video_id=" << e.video_id << " split=" << to_string(e.split);
    if (e.week) os << " week=" << *e.week;
    if (e.game) os << " game=" << *e.game;
    os << " fps=" << text::format_double(e.fps);
    for (const auto& [k, p] : e.artifacts) os << ' ' << k << '=' << p.generic_string();
    os << '\n';
  }
}

struct SplitCounts {
  std::size_t train = 0, val = 0, test = 0, total = 0;
  friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

inline SplitCounts manifest_counts(const DatasetManifest& m) {
  SplitCounts c;
  for (const auto& e : m.entries) {
    switch (e.split) {
      case Split::train: ++c.train; break;
      case Split::val: ++c.val; break;
      case Split::test: ++c.test; break;
    }
    ++c.total;
  }
  return c;
}

}  // namespace hilite
