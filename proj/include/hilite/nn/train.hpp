#pragma once

// Minibatch SGD with a step learning-rate schedule and L2 weight decay.
// Positives are restricted to the tail of each highlight clip.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hilite/align.hpp"
#include "hilite/chatenc.hpp"
#include "hilite/error.hpp"
#include "hilite/nn/checkpoint.hpp"
#include "hilite/nn/dataset.hpp"
#include "hilite/nn/model.hpp"
#include "hilite/parallel.hpp"
#include "hilite/rng.hpp"
#include "hilite/strings.hpp"

namespace hilite::nn {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 60;
  double weight_decay = 1e-4;
  double lr_initial = 1e-2;
  double lr_final = 1e-3;
  std::size_t lr_switch_epoch = 20;  // last epoch (1-based) run at lr_initial
  std::size_t positives_per_epoch = 5000;
  std::size_t negatives_per_epoch = 5000;
  double keep_fraction = 0.25;
  std::size_t word_min_count = 10;
  std::uint64_t seed = 1;
  std::size_t workers = 1;

  void validate() const {
    auto need = [](bool ok, const char* what) {
      if (!ok) throw UsageError(std::string("train config: ") + what);
    };
    need(batch_size > 0, "batch size must be positive");
    need(epochs > 0, "epochs must be positive");
    need(weight_decay >= 0 && std::isfinite(weight_decay), "weight decay must be non-negative");
    need(lr_initial > 0 && lr_final > 0, "learning rates must be positive");
    need(positives_per_epoch > 0, "positive sample count must be positive");
    need(keep_fraction > 0 && keep_fraction <= 1, "keep fraction must be in (0, 1]");
  }

  double learning_rate(std::size_t epoch) const { return epoch <= lr_switch_epoch ? lr_initial : lr_final; }
};

struct TrainingSet {
  std::vector<VideoInputs> videos;
  std::vector<LabelTrack> labels;  // untruncated ground truth, parallel to videos
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double learning_rate = 0;
  double mean_loss = 0;  // mean batch objective, weight decay included
  std::size_t steps = 0;
  bool positives_with_replacement = false;
  bool negatives_with_replacement = false;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Gradient over a batch. The batch is cut into a fixed number of shards
// whose gradients are summed in shard order, so the result does not depend
// on the worker count.
class ShardedGradient {
 public:
  static constexpr std::size_t kShards = 4;

  ShardedGradient(const ModelConfig& c, std::size_t workers) : config_(c), workers_(workers) {
    for (std::size_t s = 0; s < kShards; ++s) shards_.push_back(ModelParams<float>::zeros(c));
    losses_.resize(kShards);
  }

  // Returns the batch objective; `grad` receives its gradient.
  double compute(const ModelParams<float>& p, std::span<const Example> batch, double weight_decay,
                 ModelParams<float>& grad) {
    const std::size_t n = batch.size();
    const float scale = 1.0f / float(n);
    parallel_for(kShards, workers_, [&](std::size_t s) {
      auto& g = shards_[s];
      set_zero(g);
      ForwardTape<float> tape;
      double loss = 0;
      for (std::size_t i = n * s / kShards; i < n * (s + 1) / kShards; ++i) {
        loss += cross_entropy(model_forward(config_, p, batch[i], tape), batch[i].target);
        model_backward(config_, p, batch[i], tape, scale, g);
      }
      losses_[s] = loss;
    });
    double loss = 0;
    set_zero(grad);
    auto gt = grad.tensors();
    for (std::size_t s = 0; s < kShards; ++s) {
      loss += losses_[s];
      auto st = shards_[s].tensors();
      for (std::size_t t = 0; t < gt.size(); ++t) *gt[t].second += *st[t].second;
    }
    loss /= double(n);
    if (weight_decay != 0.0) {
      loss += 0.5 * weight_decay * double(l2_sum(p));
      auto pt = p.tensors();
      for (std::size_t t = 0; t < gt.size(); ++t) *gt[t].second += float(weight_decay) * (*pt[t].second);
    }
    return loss;
  }

 private:
  ModelConfig config_;
  std::size_t workers_;
  std::vector<ModelParams<float>> shards_;
  std::vector<double> losses_;
};

inline WordVocab training_vocab(const TrainingSet& data, std::size_t min_count) {
  std::vector<ChatLog> logs;
  for (const auto& v : data.videos)
    if (v.chat) logs.push_back(*v.chat);
  return build_word_vocab(logs, min_count);
}

inline ModelCheckpoint train(ModelConfig config, const TrainConfig& tc, const TrainingSet& data,
                             const EpochCallback& on_epoch = {}) {
  tc.validate();
  if (data.videos.empty()) throw DataError("training set is empty");
  if (data.labels.size() != data.videos.size()) throw UsageError("training set needs one label track per video");

  ModelCheckpoint ck;
  if (config.kind == ModelKind::lang_word) {
    ck.word_vocab = training_vocab(data, tc.word_min_count);
    config.word_vocab = ck.word_vocab.size() + 1;
  }
  config.validate();
  ck.config = config;

  std::vector<LabelTrack> truncated;
  for (std::size_t v = 0; v < data.videos.size(); ++v) {
    if (data.labels[v].size() != data.videos[v].frame_count)
      throw DataError("labels for " + data.videos[v].video_id + " have " + std::to_string(data.labels[v].size()) +
                      " frames, video has " + std::to_string(data.videos[v].frame_count));
    truncated.push_back(truncate_positives(data.labels[v], tc.keep_fraction));
  }
  const auto pools = SamplePools::build(truncated, data.labels);
  const ExampleBuilder builder(config, data.videos, &ck.word_vocab);

  Rng rng(tc.seed);
  ck.params = init_params<float>(config, rng);
  auto grad = ModelParams<float>::zeros(config);
  ShardedGradient engine(config, tc.workers);
  std::vector<Example> batch;

  double last_loss = 0;
  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    const double lr = tc.learning_rate(epoch);
    const auto sample = sample_epoch(pools, tc.positives_per_epoch, tc.negatives_per_epoch, rng);
    EpochLog log{epoch, lr, 0.0, 0, sample.positives_with_replacement, sample.negatives_with_replacement};
    double total = 0;
    for (std::size_t first = 0; first < sample.refs.size(); first += tc.batch_size) {
      const std::size_t last = std::min(sample.refs.size(), first + tc.batch_size);
      batch.resize(last - first);
      parallel_for(batch.size(), tc.workers, [&](std::size_t i) {
        const auto& r = sample.refs[first + i];
        batch[i] = builder.make(r.video, static_cast<std::size_t>(r.frame), r.positive ? 1 : 0);
      });
      const double loss = engine.compute(ck.params, batch, tc.weight_decay, grad);
      ++log.steps;
      if (!std::isfinite(loss))
        throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(log.steps));
      total += loss;
      auto pt = ck.params.tensors();
      auto gt = grad.tensors();
      for (std::size_t t = 0; t < pt.size(); ++t) *pt[t].second -= float(lr) * (*gt[t].second);
    }
    log.mean_loss = total / double(log.steps);
    last_loss = log.mean_loss;
    if (on_epoch) on_epoch(log);
  }

  ck.metadata = {{"seed", std::to_string(tc.seed)},
                 {"epochs", std::to_string(tc.epochs)},
                 {"batch_size", std::to_string(tc.batch_size)},
                 {"weight_decay", text::format_double(tc.weight_decay)},
                 {"lr_initial", text::format_double(tc.lr_initial)},
                 {"lr_final", text::format_double(tc.lr_final)},
                 {"lr_switch_epoch", std::to_string(tc.lr_switch_epoch)},
                 {"positives_per_epoch", std::to_string(tc.positives_per_epoch)},
                 {"negatives_per_epoch", std::to_string(tc.negatives_per_epoch)},
                 {"keep_fraction", text::format_double(tc.keep_fraction)},
                 {"train_videos", std::to_string(data.videos.size())},
                 {"final_loss", text::format_double(last_loss)}};
  if (config.kind == ModelKind::lang_word) ck.metadata["word_min_count"] = std::to_string(tc.word_min_count);
  return ck;
}

}  // namespace hilite::nn
