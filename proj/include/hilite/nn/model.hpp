#pragma once

// Highlight classifiers built from the LSTM engine:
//   lang_char  - character LSTM over a chat window -> affine -> 2 logits
//   lang_word  - same over word indices
//   vision_seq - LSTM over a strided window of frame features -> affine
//   joint      - [F_v; F_l] -> affine -> tanh -> affine (2-layer MLP)

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "hilite/error.hpp"
#include "hilite/nn/lstm.hpp"
#include "hilite/rng.hpp"

namespace hilite::nn {

enum class ModelKind { lang_char, lang_word, vision_seq, joint };

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::lang_char: return "lang_char";
    case ModelKind::lang_word: return "lang_word";
    case ModelKind::vision_seq: return "vision_seq";
    case ModelKind::joint: return "joint";
  }
  return "?";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
  for (auto k : {ModelKind::lang_char, ModelKind::lang_word, ModelKind::vision_seq, ModelKind::joint})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

struct ModelConfig {
  ModelKind kind = ModelKind::joint;
  std::size_t lang_hidden = 128;
  std::size_t lang_layers = 3;
  std::size_t vision_hidden = 128;
  std::size_t vision_layers = 1;
  std::size_t mlp_hidden = 128;
  std::size_t char_vocab = 130;
  std::size_t word_vocab = 0;  // token count for lang_word, separator included
  std::size_t feature_dim = 48;
  std::size_t vision_steps = 16;
  std::size_t frame_stride = 10;
  double text_window_s = 7.0;
  double fps = 30.0;

  bool uses_language() const { return kind != ModelKind::vision_seq; }
  bool uses_vision() const { return kind == ModelKind::vision_seq || kind == ModelKind::joint; }
  std::size_t language_inputs() const { return kind == ModelKind::lang_word ? word_vocab : char_vocab; }

  void validate() const {
    auto need = [](bool ok, const char* what) {
      if (!ok) throw UsageError(std::string("model config: ") + what);
    };
    if (uses_language()) {
      need(lang_hidden > 0 && lang_layers > 0, "language LSTM needs hidden size and layers");
      need(language_inputs() > 0, "language vocabulary is empty");
    }
    if (uses_vision()) {
      need(vision_hidden > 0 && vision_layers > 0, "vision LSTM needs hidden size and layers");
      need(feature_dim > 0 && vision_steps > 0 && frame_stride > 0, "vision window is empty");
    }
    if (kind == ModelKind::joint) need(mlp_hidden > 0, "joint model needs an MLP hidden size");
    need(text_window_s > 0 && fps > 0, "text window and fps must be positive");
  }
};

// One training or inference sample.
struct Example {
  std::vector<std::uint32_t> tokens;  // chat window (chars or words), may be empty
  std::vector<float> vision;          // vision_steps x feature_dim, oldest step first
  int target = 0;                     // 1 = highlight
};

template <typename T>
struct ModelParams {
  LstmParams<T> lang;
  Mat<T> lang_empty;  // F_l for an empty chat window
  LstmParams<T> vision;
  Mat<T> head_w, head_b;  // single-modality output layer
  Mat<T> mlp_w1, mlp_b1, mlp_w2, mlp_b2;

  static ModelParams zeros(const ModelConfig& c) {
    ModelParams p;
    auto Z = [](std::size_t r, std::size_t cols) {
      return Mat<T>::Zero(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cols));
    };
    if (c.uses_language()) {
      p.lang = LstmParams<T>::zeros(c.language_inputs(), c.lang_hidden, c.lang_layers);
      p.lang_empty = Z(c.lang_hidden, 1);
    }
    if (c.uses_vision()) p.vision = LstmParams<T>::zeros(c.feature_dim, c.vision_hidden, c.vision_layers);
    if (c.kind == ModelKind::joint) {
      p.mlp_w1 = Z(c.mlp_hidden, c.vision_hidden + c.lang_hidden);
      p.mlp_b1 = Z(c.mlp_hidden, 1);
      p.mlp_w2 = Z(2, c.mlp_hidden);
      p.mlp_b2 = Z(2, 1);
    } else {
      p.head_w = Z(2, c.uses_vision() ? c.vision_hidden : c.lang_hidden);
      p.head_b = Z(2, 1);
    }
    return p;
  }

  // Every parameter tensor in a fixed order with a stable name.
  template <typename Self>
  static auto tensors_of(Self& self) {
    using M = std::conditional_t<std::is_const_v<Self>, const Mat<T>, Mat<T>>;
    std::vector<std::pair<std::string, M*>> out;
    auto add_lstm = [&](auto& lstm, const std::string& prefix) {
      for (std::size_t l = 0; l < lstm.layers.size(); ++l) {
        const auto base = prefix + ".l" + std::to_string(l);
        out.emplace_back(base + ".wx", &lstm.layers[l].wx);
        out.emplace_back(base + ".wh", &lstm.layers[l].wh);
        out.emplace_back(base + ".b", &lstm.layers[l].b);
      }
    };
    add_lstm(self.lang, "lang");
    if (self.lang_empty.size()) out.emplace_back("lang.empty", &self.lang_empty);
    add_lstm(self.vision, "vision");
    if (self.head_w.size()) {
      out.emplace_back("head.w", &self.head_w);
      out.emplace_back("head.b", &self.head_b);
    }
    if (self.mlp_w1.size()) {
      out.emplace_back("mlp.w1", &self.mlp_w1);
      out.emplace_back("mlp.b1", &self.mlp_b1);
      out.emplace_back("mlp.w2", &self.mlp_w2);
      out.emplace_back("mlp.b2", &self.mlp_b2);
    }
    return out;
  }
  auto tensors() { return tensors_of(*this); }
  auto tensors() const { return tensors_of(*this); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, m] : tensors()) n += static_cast<std::size_t>(m->size());
    return n;
  }

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    auto cast_lstm = [](const LstmParams<T>& src) {
      LstmParams<U> dst;
      for (const auto& l : src.layers) dst.layers.push_back({l.wx.template cast<U>(), l.wh.template cast<U>(), l.b.template cast<U>()});
      return dst;
    };
    out.lang = cast_lstm(lang);
    out.vision = cast_lstm(vision);
    out.lang_empty = lang_empty.template cast<U>();
    out.head_w = head_w.template cast<U>();
    out.head_b = head_b.template cast<U>();
    out.mlp_w1 = mlp_w1.template cast<U>();
    out.mlp_b1 = mlp_b1.template cast<U>();
    out.mlp_w2 = mlp_w2.template cast<U>();
    out.mlp_b2 = mlp_b2.template cast<U>();
    return out;
  }
};

template <typename T>
ModelParams<T> init_params(const ModelConfig& c, Rng& rng) {
  c.validate();
  auto p = ModelParams<T>::zeros(c);
  init_lstm(p.lang, rng);
  init_lstm(p.vision, rng);
  auto fill = [&](Mat<T>& m, double fan_in) {
    const double k = 1.0 / std::sqrt(fan_in);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(uniform(rng, -k, k));
  };
  if (p.lang_empty.size()) fill(p.lang_empty, double(c.lang_hidden));
  if (p.head_w.size()) {
    fill(p.head_w, double(p.head_w.cols()));
    fill(p.head_b, double(p.head_w.cols()));
  }
  if (p.mlp_w1.size()) {
    fill(p.mlp_w1, double(p.mlp_w1.cols()));
    fill(p.mlp_b1, double(p.mlp_w1.cols()));
    fill(p.mlp_w2, double(p.mlp_w2.cols()));
    fill(p.mlp_b2, double(p.mlp_w2.cols()));
  }
  return p;
}

// Everything the backward pass needs from one forward pass.
template <typename T>
struct ForwardTape {
  LstmTape<T> lang, vision;
  Mat<T> vision_input;
  bool lang_empty = false;
  Vec<T> f_lang, f_vision, mlp_in, mlp_act, logits;
};

// Two-layer MLP on [F_v; F_l]; exposed for compositional checks.
template <typename T>
Vec<T> joint_head(const ModelParams<T>& p, const Vec<T>& f_vision, const Vec<T>& f_lang,
                  Vec<T>* mlp_in = nullptr, Vec<T>* mlp_act = nullptr) {
  Vec<T> in(f_vision.size() + f_lang.size());
  in << f_vision, f_lang;
  Vec<T> act = (p.mlp_w1 * in + p.mlp_b1.col(0)).array().tanh().matrix();
  Vec<T> logits = p.mlp_w2 * act + p.mlp_b2.col(0);
  if (mlp_in) *mlp_in = std::move(in);
  if (mlp_act) *mlp_act = std::move(act);
  return logits;
}

template <typename T>
Vec<T> model_forward(const ModelConfig& c, const ModelParams<T>& p, const Example& ex, ForwardTape<T>& tape) {
  if (c.uses_language()) {
    tape.lang_empty = ex.tokens.empty();
    if (tape.lang_empty) {
      tape.f_lang = p.lang_empty.col(0);
    } else {
      tape.f_lang = lstm_forward(p.lang, LstmInput<T>{ex.tokens, nullptr}, tape.lang);
    }
  }
  if (c.uses_vision()) {
    if (ex.vision.size() != c.vision_steps * c.feature_dim)
      throw DataError("vision window has " + std::to_string(ex.vision.size()) + " values, expected " +
                      std::to_string(c.vision_steps * c.feature_dim));
    tape.vision_input = Eigen::Map<const Eigen::MatrixXf>(ex.vision.data(),
                                                          static_cast<Eigen::Index>(c.feature_dim),
                                                          static_cast<Eigen::Index>(c.vision_steps))
                            .template cast<T>();
    tape.f_vision = lstm_forward(p.vision, LstmInput<T>{{}, &tape.vision_input}, tape.vision);
  }
  switch (c.kind) {
    case ModelKind::joint:
      tape.logits = joint_head(p, tape.f_vision, tape.f_lang, &tape.mlp_in, &tape.mlp_act);
      break;
    case ModelKind::vision_seq:
      tape.logits = p.head_w * tape.f_vision + p.head_b.col(0);
      break;
    default:
      tape.logits = p.head_w * tape.f_lang + p.head_b.col(0);
  }
  return tape.logits;
}

template <typename T>
Vec<T> softmax(const Vec<T>& logits) {
  const T m = logits.maxCoeff();
  Vec<T> e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

template <typename T>
T cross_entropy(const Vec<T>& logits, int target) {
  const T m = logits.maxCoeff();
  const T lse = m + std::log((logits.array() - m).exp().sum());
  return lse - logits(target);
}

// Adds scale * dL/dtheta of the cross-entropy of one example to `grad`.
template <typename T>
void model_backward(const ModelConfig& c, const ModelParams<T>& p, const Example& ex,
                    const ForwardTape<T>& tape, T scale, ModelParams<T>& grad) {
  Vec<T> d_logits = softmax(tape.logits);
  d_logits(ex.target) -= T(1);
  d_logits *= scale;

  Vec<T> d_vision, d_lang;
  if (c.kind == ModelKind::joint) {
    grad.mlp_w2.noalias() += d_logits * tape.mlp_act.transpose();
    grad.mlp_b2.col(0) += d_logits;
    Vec<T> d_act = p.mlp_w2.transpose() * d_logits;
    Vec<T> d_pre = (d_act.array() * (T(1) - tape.mlp_act.array().square())).matrix();
    grad.mlp_w1.noalias() += d_pre * tape.mlp_in.transpose();
    grad.mlp_b1.col(0) += d_pre;
    Vec<T> d_in = p.mlp_w1.transpose() * d_pre;
    d_vision = d_in.head(static_cast<Eigen::Index>(c.vision_hidden));
    d_lang = d_in.tail(static_cast<Eigen::Index>(c.lang_hidden));
  } else {
    grad.head_w.noalias() += d_logits * (c.uses_vision() ? tape.f_vision : tape.f_lang).transpose();
    grad.head_b.col(0) += d_logits;
    (c.uses_vision() ? d_vision : d_lang) = p.head_w.transpose() * d_logits;
  }

  if (c.uses_vision())
    lstm_backward(p.vision, LstmInput<T>{{}, &tape.vision_input}, tape.vision, d_vision, grad.vision);
  if (c.uses_language()) {
    if (tape.lang_empty)
      grad.lang_empty.col(0) += d_lang;
    else
      lstm_backward(p.lang, LstmInput<T>{ex.tokens, nullptr}, tape.lang, d_lang, grad.lang);
  }
}

template <typename T>
void set_zero(ModelParams<T>& p) {
  for (auto& [name, m] : p.tensors()) m->setZero();
}

template <typename T>
T l2_sum(const ModelParams<T>& p) {
  T s = 0;
  for (const auto& [name, m] : p.tensors()) s += m->squaredNorm();
  return s;
}

// Mean cross-entropy over the batch plus weight_decay/2 * ||theta||^2.
template <typename T>
T batch_loss(const ModelConfig& c, const ModelParams<T>& p, std::span<const Example* const> batch,
             double weight_decay) {
  if (batch.empty()) throw UsageError("empty batch");
  ForwardTape<T> tape;
  T loss = 0;
  for (const Example* ex : batch) loss += cross_entropy(model_forward(c, p, *ex, tape), ex->target);
  return loss / T(batch.size()) + T(0.5 * weight_decay) * l2_sum(p);
}

// Loss as in batch_loss; `grad` is overwritten with its exact gradient.
template <typename T>
T batch_gradient(const ModelConfig& c, const ModelParams<T>& p, std::span<const Example* const> batch,
                 double weight_decay, ModelParams<T>& grad) {
  if (batch.empty()) throw UsageError("empty batch");
  set_zero(grad);
  ForwardTape<T> tape;
  T loss = 0;
  const T scale = T(1) / T(batch.size());
  for (const Example* ex : batch) {
    if (ex->target != 0 && ex->target != 1) throw DataError("target must be 0 or 1");
    loss += cross_entropy(model_forward(c, p, *ex, tape), ex->target);
    model_backward(c, p, *ex, tape, scale, grad);
  }
  loss *= scale;
  if (weight_decay != 0.0) {
    loss += T(0.5 * weight_decay) * l2_sum(p);
    auto gt = grad.tensors();
    auto pt = p.tensors();
    for (std::size_t i = 0; i < gt.size(); ++i) *gt[i].second += T(weight_decay) * (*pt[i].second);
  }
  if (!std::isfinite(static_cast<double>(loss))) throw NumericError("non-finite loss");
  return loss;
}

// Probability of the highlight class.
template <typename T>
T highlight_probability(const ModelConfig& c, const ModelParams<T>& p, const Example& ex) {
  ForwardTape<T> tape;
  return softmax(model_forward(c, p, ex, tape))(1);
}

}  // namespace hilite::nn
