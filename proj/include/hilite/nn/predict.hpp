#pragma once

// Sparse evaluation with nearest-frame hold between evaluated frames.

#include <span>
#include <vector>

#include "hilite/corpus.hpp"
#include "hilite/error.hpp"
#include "hilite/nn/checkpoint.hpp"
#include "hilite/nn/dataset.hpp"
#include "hilite/nn/model.hpp"
#include "hilite/parallel.hpp"

namespace hilite::nn {

struct PredictOptions {
  std::size_t eval_stride = 0;  // 0 = the model's frame stride
  std::size_t workers = 1;
  double threshold = 0.5;
};

struct Prediction {
  LabelTrack labels;
  std::vector<float> scores;       // per frame, highlight-class probability
  std::vector<std::size_t> evaluated;  // frames the model actually ran on
  std::size_t padded_windows = 0;  // evaluated frames whose vision window was left-padded
};

// Expands scores at frames 0, s, 2s, ... to every frame. A frame takes the
// nearer evaluated neighbour; an exact tie goes to the earlier one, and
// frames past the last evaluated frame hold it.
inline std::vector<float> hold_interpolate(std::span<const float> evaluated, std::size_t stride,
                                           std::size_t frame_count) {
  if (stride == 0) throw UsageError("interpolation stride must be positive");
  if (frame_count == 0) return {};
  if (evaluated.size() != (frame_count - 1) / stride + 1)
    throw UsageError("evaluated score count does not match frame count and stride");
  std::vector<float> out(frame_count);
  for (std::size_t f = 0; f < frame_count; ++f) {
    const std::size_t k = f / stride, r = f % stride;
    const bool later = 2 * r > stride && k + 1 < evaluated.size();
    out[f] = evaluated[later ? k + 1 : k];
  }
  return out;
}

inline Prediction predict_track(const ModelCheckpoint& ck, const VideoInputs& video, const PredictOptions& opt = {}) {
  const std::size_t stride = opt.eval_stride ? opt.eval_stride : ck.config.frame_stride;
  if (stride == 0) throw UsageError("evaluation stride must be positive");
  const ExampleBuilder builder(ck.config, std::span<const VideoInputs>(&video, 1), &ck.word_vocab);

  Prediction pred;
  for (std::size_t f = 0; f < video.frame_count; f += stride) {
    pred.evaluated.push_back(f);
    pred.padded_windows += vision_padded(ck.config, f);
  }
  std::vector<float> sparse(pred.evaluated.size());
  parallel_for(sparse.size(), opt.workers, [&](std::size_t i) {
    const auto ex = builder.make(0, pred.evaluated[i]);
    sparse[i] = highlight_probability(ck.config, ck.params, ex);
  });
  pred.scores = hold_interpolate(sparse, stride, video.frame_count);
  pred.labels = LabelTrack(video.video_id, video.frame_count);
  for (std::size_t f = 0; f < video.frame_count; ++f) pred.labels.labels[f] = pred.scores[f] > opt.threshold;
  return pred;
}

}  // namespace hilite::nn
