#pragma once

// Multi-layer LSTM with explicit backpropagation through time.
//
// Gate rows are stacked [input; forget; output; cell] in every weight
// matrix:
//   z_t = Wx x_t + Wh h_{t-1} + b
//   i, f, o = sigmoid(z_i, z_f, z_o);  g = tanh(z_g)
//   c_t = f * c_{t-1} + i * g;         h_t = o * tanh(c_t)
// Token inputs select a column of layer 0's Wx, which equals multiplying by
// a one-hot vector.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hilite/error.hpp"
#include "hilite/rng.hpp"

namespace hilite::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
struct LstmLayer {
  Mat<T> wx;  // 4H x input
  Mat<T> wh;  // 4H x H
  Mat<T> b;   // 4H x 1
};

template <typename T>
struct LstmParams {
  std::vector<LstmLayer<T>> layers;

  static LstmParams zeros(std::size_t input, std::size_t hidden, std::size_t depth) {
    LstmParams p;
    for (std::size_t l = 0; l < depth; ++l) {
      const auto in = static_cast<Eigen::Index>(l == 0 ? input : hidden);
      const auto h = static_cast<Eigen::Index>(hidden);
      p.layers.push_back({Mat<T>::Zero(4 * h, in), Mat<T>::Zero(4 * h, h), Mat<T>::Zero(4 * h, 1)});
    }
    return p;
  }

  bool empty() const { return layers.empty(); }
  std::size_t hidden() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers[0].wh.cols()); }
  std::size_t input_size() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers[0].wx.cols()); }
};

// Uniform(-1/sqrt(H), 1/sqrt(H)) weights; forget-gate bias starts at 1.
template <typename T>
void init_lstm(LstmParams<T>& p, Rng& rng) {
  for (auto& layer : p.layers) {
    const double k = 1.0 / std::sqrt(double(layer.wh.cols()));
    for (auto* m : {&layer.wx, &layer.wh, &layer.b})
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = static_cast<T>(uniform(rng, -k, k));
    const auto h = layer.wh.cols();
    layer.b.block(h, 0, h, 1).setConstant(T(1));
  }
}

// Per-layer activations kept for the backward pass.
template <typename T>
struct LstmTape {
  std::vector<Mat<T>> gates;       // 4H x steps, post-activation
  std::vector<Mat<T>> cells;       // H x steps
  std::vector<Mat<T>> tanh_cells;  // H x steps
  std::vector<Mat<T>> hidden;      // H x steps
};

// Layer-0 input: either token ids or dense vectors (input x steps).
template <typename T>
struct LstmInput {
  std::span<const std::uint32_t> tokens;
  const Mat<T>* dense = nullptr;

  std::size_t steps() const { return dense ? static_cast<std::size_t>(dense->cols()) : tokens.size(); }
};

namespace detail {
template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}
}  // namespace detail

// Runs every layer over the whole sequence and returns the top layer's last
// hidden state. Requires at least one step.
template <typename T>
Vec<T> lstm_forward(const LstmParams<T>& p, const LstmInput<T>& in, LstmTape<T>& tape) {
  const std::size_t steps = in.steps();
  if (steps == 0) throw DataError("LSTM input sequence is empty");
  if (p.empty()) throw UsageError("LSTM has no layers");
  const auto h = static_cast<Eigen::Index>(p.hidden());
  const auto s = static_cast<Eigen::Index>(steps);
  const auto depth = p.layers.size();
  tape.gates.resize(depth);
  tape.cells.resize(depth);
  tape.tanh_cells.resize(depth);
  tape.hidden.resize(depth);

  Mat<T> pre;
  Vec<T> z(4 * h);
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& L = p.layers[l];
    if (l == 0) {
      if (in.dense) {
        if (in.dense->rows() != L.wx.cols())
          throw DataError("LSTM input width " + std::to_string(in.dense->rows()) + " != " +
                          std::to_string(L.wx.cols()));
        if (!in.dense->allFinite()) throw DataError("non-finite LSTM input");
        pre.noalias() = L.wx * (*in.dense);
      } else {
        pre.resize(4 * h, s);
        for (Eigen::Index t = 0; t < s; ++t) {
          const auto tok = in.tokens[static_cast<std::size_t>(t)];
          if (tok >= static_cast<std::uint32_t>(L.wx.cols()))
            throw DataError("token " + std::to_string(tok) + " outside input vocabulary of " +
                            std::to_string(L.wx.cols()));
          pre.col(t) = L.wx.col(tok);
        }
      }
    } else {
      pre.noalias() = L.wx * tape.hidden[l - 1];
    }
    pre.colwise() += L.b.col(0);

    auto& G = tape.gates[l];
    auto& C = tape.cells[l];
    auto& TC = tape.tanh_cells[l];
    auto& H = tape.hidden[l];
    G.resize(4 * h, s);
    C.resize(h, s);
    TC.resize(h, s);
    H.resize(h, s);
    for (Eigen::Index t = 0; t < s; ++t) {
      z = pre.col(t);
      if (t > 0) z.noalias() += L.wh * H.col(t - 1);
      for (Eigen::Index k = 0; k < 3 * h; ++k) G(k, t) = detail::sigmoid(z(k));
      for (Eigen::Index k = 3 * h; k < 4 * h; ++k) G(k, t) = std::tanh(z(k));
      for (Eigen::Index k = 0; k < h; ++k) {
        const T c_prev = t > 0 ? C(k, t - 1) : T(0);
        const T c = G(h + k, t) * c_prev + G(k, t) * G(3 * h + k, t);
        C(k, t) = c;
        TC(k, t) = std::tanh(c);
        H(k, t) = G(2 * h + k, t) * TC(k, t);
      }
    }
  }
  return tape.hidden.back().col(s - 1);
}

// Accumulates parameter gradients into `grad` given dL/d(last hidden state)
// of the top layer.
template <typename T>
void lstm_backward(const LstmParams<T>& p, const LstmInput<T>& in, const LstmTape<T>& tape,
                   const Vec<T>& d_last, LstmParams<T>& grad) {
  const auto h = static_cast<Eigen::Index>(p.hidden());
  const auto s = static_cast<Eigen::Index>(in.steps());
  Mat<T> d_out = Mat<T>::Zero(h, s);  // dL/dh_t flowing in from above
  d_out.col(s - 1) = d_last;
  Mat<T> dz(4 * h, s);
  Vec<T> dh_rec(h), dc_rec(h);

  for (std::size_t l = p.layers.size(); l-- > 0;) {
    const auto& L = p.layers[l];
    auto& Gd = grad.layers[l];
    const auto& G = tape.gates[l];
    const auto& C = tape.cells[l];
    const auto& TC = tape.tanh_cells[l];
    const auto& H = tape.hidden[l];
    dh_rec.setZero();
    dc_rec.setZero();
    for (Eigen::Index t = s - 1; t >= 0; --t) {
      for (Eigen::Index k = 0; k < h; ++k) {
        const T dh = d_out(k, t) + dh_rec(k);
        const T i = G(k, t), f = G(h + k, t), o = G(2 * h + k, t), g = G(3 * h + k, t);
        const T tc = TC(k, t);
        const T dc = dc_rec(k) + dh * o * (T(1) - tc * tc);
        const T c_prev = t > 0 ? C(k, t - 1) : T(0);
        dz(k, t) = dc * g * i * (T(1) - i);
        dz(h + k, t) = dc * c_prev * f * (T(1) - f);
        dz(2 * h + k, t) = dh * tc * o * (T(1) - o);
        dz(3 * h + k, t) = dc * i * (T(1) - g * g);
        dc_rec(k) = dc * f;
      }
      dh_rec.noalias() = L.wh.transpose() * dz.col(t);
    }
    if (s > 1) Gd.wh.noalias() += dz.rightCols(s - 1) * H.leftCols(s - 1).transpose();
    Gd.b.col(0) += dz.rowwise().sum();
    if (l > 0) {
      Gd.wx.noalias() += dz * tape.hidden[l - 1].transpose();
      d_out.noalias() = L.wx.transpose() * dz;
    } else if (in.dense) {
      Gd.wx.noalias() += dz * in.dense->transpose();
    } else {
      for (Eigen::Index t = 0; t < s; ++t) Gd.wx.col(in.tokens[static_cast<std::size_t>(t)]) += dz.col(t);
    }
  }
}

}  // namespace hilite::nn
