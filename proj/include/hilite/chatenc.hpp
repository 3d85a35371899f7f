#pragma once

// Chat text to model input: sanitization, reversible ASCII expansion of
// multilingual text, chat windows and the word-level vocabulary.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hilite/binary_io.hpp"
#include "hilite/corpus.hpp"
#include "hilite/error.hpp"

namespace hilite {

// ---------------------------------------------------------------------------
// UTF-8

namespace utf8 {

struct Decoded {
  char32_t codepoint = 0;
  std::size_t length = 0;  // 0 when the bytes at the position are not valid UTF-8
};

inline Decoded decode(std::string_view s, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) return {b0, 1};
  std::size_t len = 0;
  char32_t cp = 0, min = 0;
  if ((b0 & 0xE0) == 0xC0) { len = 2; cp = b0 & 0x1F; min = 0x80; }
  else if ((b0 & 0xF0) == 0xE0) { len = 3; cp = b0 & 0x0F; min = 0x800; }
  else if ((b0 & 0xF8) == 0xF0) { len = 4; cp = b0 & 0x07; min = 0x10000; }
  else return {};
  if (pos + len > s.size()) return {};
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xC0) != 0x80) return {};
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return {};
  return {cp, len};
}

inline void append(std::string& out, char32_t cp) {
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

inline bool is_space(char32_t cp) {
  return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 || cp == 0xA0 || cp == 0x1680 ||
         (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 || cp == 0x202F ||
         cp == 0x205F || cp == 0x3000;
}

}  // namespace utf8

// ---------------------------------------------------------------------------
// Text normalization

inline constexpr std::string_view kDeletedMarker = "<deleted>";

// Deleted-content placeholders become a single line feed.
inline std::string sanitize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  for (;;) {
    const auto hit = text.find(kDeletedMarker, pos);
    if (hit == std::string_view::npos) break;
    out.append(text.substr(pos, hit - pos));
    out += '\n';
    pos = hit + kDeletedMarker.size();
  }
  out.append(text.substr(pos));
  return out;
}

namespace detail {
inline void append_hex_escape(std::string& out, char kind, std::uint32_t value) {
  static constexpr char kHex[] = "0123456789abcdef";
  char buf[8];
  int n = 0;
  do {
    buf[n++] = kHex[value & 0xF];
    value >>= 4;
  } while (value != 0);
  out += '\\';
  out += kind;
  out += '{';
  while (n > 0) out += buf[--n];
  out += '}';
}
}  // namespace detail

// ASCII passes through except `\`, which doubles. Every other codepoint
// becomes `\u{hex}`; bytes that are not valid UTF-8 become `\x{hex}`.
// The mapping is injective and undone by collapse_from_ascii.
inline std::string expand_to_ascii(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto d = utf8::decode(text, i);
    if (d.length == 0) {
      detail::append_hex_escape(out, 'x', static_cast<unsigned char>(text[i]));
      ++i;
    } else if (d.codepoint < 0x80) {
      if (d.codepoint == '\\') out += '\\';
      out += static_cast<char>(d.codepoint);
      i += 1;
    } else {
      detail::append_hex_escape(out, 'u', d.codepoint);
      i += d.length;
    }
  }
  return out;
}

inline std::string collapse_from_ascii(std::string_view ascii) {
  std::string out;
  out.reserve(ascii.size());
  std::size_t i = 0;
  auto bad = [&] { return DataError("malformed ASCII escape at offset " + std::to_string(i)); };
  while (i < ascii.size()) {
    const char c = ascii[i];
    if (c != '\\') {
      out += c;
      ++i;
      continue;
    }
    if (i + 1 >= ascii.size()) throw bad();
    const char kind = ascii[i + 1];
    if (kind == '\\') {
      out += '\\';
      i += 2;
      continue;
    }
    if ((kind != 'u' && kind != 'x') || i + 2 >= ascii.size() || ascii[i + 2] != '{') throw bad();
    const auto close = ascii.find('}', i + 3);
    if (close == std::string_view::npos || close == i + 3 || close - (i + 3) > 8) throw bad();
    std::uint32_t v = 0;
    for (std::size_t k = i + 3; k < close; ++k) {
      const char h = ascii[k];
      int digit = (h >= '0' && h <= '9') ? h - '0' : (h >= 'a' && h <= 'f') ? h - 'a' + 10 : -1;
      if (digit < 0) throw bad();
      v = (v << 4) | static_cast<std::uint32_t>(digit);
    }
    if (kind == 'x') {
      if (v > 0xFF) throw bad();
      out += static_cast<char>(v);
    } else {
      if (v < 0x80 || v > 0x10FFFF || (v >= 0xD800 && v <= 0xDFFF)) throw bad();
      utf8::append(out, v);
    }
    i = close + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Character vocabulary: ASCII 0-127 by code, STOP, PAD.

struct CharVocab {
  static constexpr std::uint8_t kStop = 128;
  static constexpr std::uint8_t kPad = 129;
  static constexpr std::size_t kSize = 130;
};

inline std::vector<std::uint8_t> encode_chars(std::string_view ascii) {
  std::vector<std::uint8_t> out;
  out.reserve(ascii.size());
  for (std::size_t i = 0; i < ascii.size(); ++i) {
    const auto b = static_cast<unsigned char>(ascii[i]);
    if (b > 127) throw DataError("non-ASCII byte " + std::to_string(b) + " at offset " + std::to_string(i));
    out.push_back(b);
  }
  return out;
}

// Appends each chat's indices followed by STOP.
inline std::vector<std::uint8_t> encode_chats(std::span<const std::string> ascii_chats) {
  std::vector<std::uint8_t> out;
  for (const auto& c : ascii_chats) {
    const auto e = encode_chars(c);
    out.insert(out.end(), e.begin(), e.end());
    out.push_back(CharVocab::kStop);
  }
  return out;
}

inline std::string decode_chars(std::span<const std::uint8_t> indices) {
  std::string out;
  out.reserve(indices.size());
  for (auto i : indices) {
    if (i > 127) throw DataError("index " + std::to_string(i) + " is not an ASCII character");
    out += static_cast<char>(i);
  }
  return out;
}

// Splits a STOP-terminated window back into its chats.
inline std::vector<std::string> decode_chats(std::span<const std::uint8_t> indices) {
  std::vector<std::string> out;
  std::string cur;
  for (auto i : indices) {
    if (i == CharVocab::kStop) {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (i > 127) {
      throw DataError("unexpected index " + std::to_string(i) + " in chat window");
    } else {
      cur += static_cast<char>(i);
    }
  }
  if (!cur.empty()) throw DataError("chat window does not end with STOP");
  return out;
}

// ---------------------------------------------------------------------------
// Windows

struct WindowConfig {
  double text_window_s = 7.0;

  void validate() const {
    if (!(text_window_s > 0.0)) throw UsageError("text window must be positive");
  }
};

struct EncodedWindow {
  std::uint64_t frame_index = 0;
  std::vector<std::uint8_t> indices;
  std::size_t chat_count = 0;

  friend bool operator==(const EncodedWindow&, const EncodedWindow&) = default;
};

// Index range of messages with timestamp in [t, t + window).
inline std::pair<std::size_t, std::size_t> window_range(const ChatLog& log, double t,
                                                        const WindowConfig& cfg) {
  const auto by_time = [](const ChatMessage& m, double v) { return m.timestamp_s < v; };
  const auto first = std::lower_bound(log.messages.begin(), log.messages.end(), t, by_time);
  const auto last = std::lower_bound(first, log.messages.end(), t + cfg.text_window_s, by_time);
  return {static_cast<std::size_t>(first - log.messages.begin()),
          static_cast<std::size_t>(last - log.messages.begin())};
}

inline std::vector<std::uint8_t> encode_message(std::string_view text) {
  return encode_chars(expand_to_ascii(sanitize(text)));
}

// Chats in the forward window [t, t + W_t), each sanitized, expanded and
// followed by STOP, in timestamp order.
inline EncodedWindow window_chats(const ChatLog& log, double t, const WindowConfig& cfg,
                                  std::uint64_t frame_index = 0) {
  if (!(t >= 0.0)) throw UsageError("window start must be non-negative");
  cfg.validate();
  EncodedWindow w;
  w.frame_index = frame_index;
  const auto [first, last] = window_range(log, t, cfg);
  for (std::size_t i = first; i < last; ++i) {
    const auto e = encode_message(log.messages[i].text);
    w.indices.insert(w.indices.end(), e.begin(), e.end());
    w.indices.push_back(CharVocab::kStop);
  }
  w.chat_count = last - first;
  return w;
}

// Caches per-message encodings so many windows over one log are cheap.
class ChatWindowEncoder {
 public:
  ChatWindowEncoder(const ChatLog& log, WindowConfig cfg) : log_(&log), cfg_(cfg) {
    cfg_.validate();
    encoded_.reserve(log.messages.size());
    for (const auto& m : log.messages) encoded_.push_back(encode_message(m.text));
  }

  EncodedWindow at(double t, std::uint64_t frame_index = 0) const {
    EncodedWindow w;
    w.frame_index = frame_index;
    const auto [first, last] = window_range(*log_, t, cfg_);
    for (std::size_t i = first; i < last; ++i) {
      w.indices.insert(w.indices.end(), encoded_[i].begin(), encoded_[i].end());
      w.indices.push_back(CharVocab::kStop);
    }
    w.chat_count = last - first;
    return w;
  }

  const WindowConfig& config() const { return cfg_; }

 private:
  const ChatLog* log_;
  WindowConfig cfg_;
  std::vector<std::vector<std::uint8_t>> encoded_;
};

// windows.enc: repeated (u64 frame_index, u32 length, u8 indices[length]).
inline void write_encoded_windows(std::ostream& os, std::span<const EncodedWindow> windows) {
  for (const auto& w : windows) {
    binio::put<std::uint64_t>(os, w.frame_index);
    binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(w.indices.size()));
    os.write(reinterpret_cast<const char*>(w.indices.data()), static_cast<std::streamsize>(w.indices.size()));
  }
}

inline std::vector<EncodedWindow> read_encoded_windows(std::istream& is) {
  std::vector<EncodedWindow> out;
  while (!binio::at_eof(is)) {
    EncodedWindow w;
    w.frame_index = binio::get<std::uint64_t>(is, "window frame index");
    const auto len = binio::get<std::uint32_t>(is, "window length");
    w.indices.resize(len);
    binio::read_exact(is, reinterpret_cast<char*>(w.indices.data()), len, "window indices");
    for (auto i : w.indices) {
      if (i >= CharVocab::kSize) throw DataError("window index out of vocabulary: " + std::to_string(i));
      if (i == CharVocab::kStop) ++w.chat_count;
    }
    out.push_back(std::move(w));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Word vocabulary for the word-level baseline

// Splits on Unicode whitespace and lowercases ASCII letters.
inline std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto d = utf8::decode(text, i);
    const std::size_t len = d.length == 0 ? 1 : d.length;
    if (d.length != 0 && utf8::is_space(d.codepoint)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else if (len == 1) {
      char c = text[i];
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      cur += c;
    } else {
      cur.append(text.substr(i, len));
    }
    i += len;
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// Index 0 is UNK; words follow in byte order. stop_index() == size() is the
// chat separator used by word windows.
struct WordVocab {
  static constexpr std::string_view kUnk = "<unk>";

  std::vector<std::string> words{std::string(kUnk)};
  std::unordered_map<std::string, std::uint32_t> index;
  std::size_t min_count = 10;

  std::size_t size() const { return words.size(); }
  std::uint32_t stop_index() const { return static_cast<std::uint32_t>(words.size()); }
  bool contains(std::string_view w) const { return index.count(std::string(w)) != 0; }
  std::uint32_t lookup(std::string_view w) const {
    const auto it = index.find(std::string(w));
    return it == index.end() ? 0u : it->second;
  }

  static WordVocab from_words(std::vector<std::string> sorted_words, std::size_t min_count) {
    WordVocab v;
    v.min_count = min_count;
    for (auto& w : sorted_words) {
      v.index.emplace(w, static_cast<std::uint32_t>(v.words.size()));
      v.words.push_back(std::move(w));
    }
    return v;
  }
};

// Words that occur strictly more than min_count times across the corpus.
inline WordVocab build_word_vocab(std::span<const ChatLog> corpus, std::size_t min_count = 10) {
  std::map<std::string, std::size_t> counts;  // ordered: result independent of document order
  for (const auto& log : corpus)
    for (const auto& m : log.messages)
      for (auto& w : tokenize_words(sanitize(m.text))) ++counts[std::move(w)];
  std::vector<std::string> kept;
  for (auto& [w, c] : counts)
    if (c > min_count && w != WordVocab::kUnk) kept.push_back(w);
  return WordVocab::from_words(std::move(kept), min_count);
}

// Word indices of the chats in [t, t + W_t), each followed by stop_index().
inline std::vector<std::uint32_t> word_window(const ChatLog& log, double t, const WindowConfig& cfg,
                                              const WordVocab& vocab) {
  std::vector<std::uint32_t> out;
  const auto [first, last] = window_range(log, t, cfg);
  for (std::size_t i = first; i < last; ++i) {
    for (const auto& w : tokenize_words(sanitize(log.messages[i].text))) out.push_back(vocab.lookup(w));
    out.push_back(vocab.stop_index());
  }
  return out;
}

}  // namespace hilite
