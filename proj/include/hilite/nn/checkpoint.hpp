#pragma once

// Versioned binary model container:
//   "HLCK" u32 version
//   config   : u32 length + key=value text
//   params   : u32 count, then per tensor { string name, u32 rows, u32 cols, f32 values (column-major) }
//   vocab    : u32 count, then strings (word model only; may be 0)
//   metadata : u32 length + key=value text
// All integers and floats little-endian; strings are u32 length + bytes.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "hilite/binary_io.hpp"
#include "hilite/chatenc.hpp"
#include "hilite/error.hpp"
#include "hilite/nn/model.hpp"
#include "hilite/strings.hpp"

namespace hilite::nn {

struct ModelCheckpoint {
  ModelConfig config;
  ModelParams<float> params;
  WordVocab word_vocab;  // lang_word only
  std::map<std::string, std::string> metadata;
};

inline constexpr char kCheckpointMagic[4] = {'H', 'L', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline std::string encode_keyed(const std::map<std::string, std::string>& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

inline std::map<std::string, std::string> decode_keyed(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("checkpoint: malformed key=value line `" + line + "`");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

inline std::map<std::string, std::string> config_to_keyed(const ModelConfig& c) {
  auto n = [](std::size_t v) { return std::to_string(v); };
  return {{"kind", std::string(to_string(c.kind))},
          {"lang_hidden", n(c.lang_hidden)},
          {"lang_layers", n(c.lang_layers)},
          {"vision_hidden", n(c.vision_hidden)},
          {"vision_layers", n(c.vision_layers)},
          {"mlp_hidden", n(c.mlp_hidden)},
          {"char_vocab", n(c.char_vocab)},
          {"word_vocab", n(c.word_vocab)},
          {"feature_dim", n(c.feature_dim)},
          {"vision_steps", n(c.vision_steps)},
          {"frame_stride", n(c.frame_stride)},
          {"text_window_s", text::format_double(c.text_window_s)},
          {"fps", text::format_double(c.fps)}};
}

inline ModelConfig config_from_keyed(const std::map<std::string, std::string>& kv) {
  auto get = [&](const std::string& k) -> const std::string& {
    const auto it = kv.find(k);
    if (it == kv.end()) throw DataError("checkpoint config missing `" + k + "`");
    return it->second;
  };
  auto size = [&](const std::string& k) {
    const auto v = text::parse_int<std::size_t>(get(k));
    if (!v) throw DataError("checkpoint config: bad `" + k + "`");
    return *v;
  };
  auto real = [&](const std::string& k) {
    const auto v = text::parse_double(get(k));
    if (!v) throw DataError("checkpoint config: bad `" + k + "`");
    return *v;
  };
  ModelConfig c;
  const auto kind = parse_model_kind(get("kind"));
  if (!kind) throw DataError("checkpoint config: unknown kind `" + get("kind") + "`");
  c.kind = *kind;
  c.lang_hidden = size("lang_hidden");
  c.lang_layers = size("lang_layers");
  c.vision_hidden = size("vision_hidden");
  c.vision_layers = size("vision_layers");
  c.mlp_hidden = size("mlp_hidden");
  c.char_vocab = size("char_vocab");
  c.word_vocab = size("word_vocab");
  c.feature_dim = size("feature_dim");
  c.vision_steps = size("vision_steps");
  c.frame_stride = size("frame_stride");
  c.text_window_s = real("text_window_s");
  c.fps = real("fps");
  return c;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const ModelCheckpoint& ck) {
  binio::put_bytes(os, std::string_view(kCheckpointMagic, 4));
  binio::put<std::uint32_t>(os, kCheckpointVersion);
  binio::put_string(os, detail::encode_keyed(detail::config_to_keyed(ck.config)));
  const auto tensors = ck.params.tensors();
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    binio::put_string(os, name);
    binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(m->rows()));
    binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(m->cols()));
    for (Eigen::Index i = 0; i < m->size(); ++i) binio::put_f32(os, m->data()[i]);
  }
  // UNK is implicit at index 0.
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(ck.word_vocab.size() - 1));
  for (std::size_t i = 1; i < ck.word_vocab.words.size(); ++i) binio::put_string(os, ck.word_vocab.words[i]);
  binio::put_string(os, detail::encode_keyed(ck.metadata));
}

inline ModelCheckpoint read_checkpoint(std::istream& is) {
  const auto magic = binio::get_bytes(is, 4, "checkpoint magic");
  if (magic != std::string_view(kCheckpointMagic, 4)) throw DataError("not a model checkpoint (bad magic)");
  const auto version = binio::get<std::uint32_t>(is, "checkpoint version");
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));

  ModelCheckpoint ck;
  ck.config = detail::config_from_keyed(detail::decode_keyed(binio::get_string(is, "checkpoint config")));
  ck.config.validate();
  ck.params = ModelParams<float>::zeros(ck.config);

  auto tensors = ck.params.tensors();
  const auto count = binio::get<std::uint32_t>(is, "tensor count");
  if (count != tensors.size())
    throw DataError("checkpoint holds " + std::to_string(count) + " tensors, config expects " +
                    std::to_string(tensors.size()));
  for (auto& [expected, m] : tensors) {
    const auto name = binio::get_string(is, "tensor name");
    const auto rows = binio::get<std::uint32_t>(is, "tensor rows");
    const auto cols = binio::get<std::uint32_t>(is, "tensor cols");
    if (name != expected || rows != m->rows() || cols != m->cols())
      throw DataError("checkpoint tensor `" + name + "` does not match expected `" + expected + "` shape");
    for (Eigen::Index i = 0; i < m->size(); ++i) {
      const float v = binio::get_f32(is, "tensor values");
      if (!std::isfinite(v)) throw DataError("non-finite value in tensor " + name);
      m->data()[i] = v;
    }
  }
  const auto words = binio::get<std::uint32_t>(is, "vocab size");
  std::vector<std::string> list;
  for (std::uint32_t i = 0; i < words; ++i) list.push_back(binio::get_string(is, "vocab word"));
  ck.word_vocab = WordVocab::from_words(std::move(list), 0);
  ck.metadata = detail::decode_keyed(binio::get_string(is, "checkpoint metadata"));
  if (const auto it = ck.metadata.find("word_min_count"); it != ck.metadata.end())
    if (const auto v = text::parse_int<std::size_t>(it->second)) ck.word_vocab.min_count = *v;
  if (ck.config.kind == ModelKind::lang_word && ck.config.word_vocab != ck.word_vocab.size() + 1)
    throw DataError("checkpoint word vocabulary does not match config");
  if (!binio::at_eof(is)) throw DataError("trailing data after checkpoint");
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& ck) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  write_checkpoint(os, ck);
}

inline ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  return read_checkpoint(is);
}

}  // namespace hilite::nn
