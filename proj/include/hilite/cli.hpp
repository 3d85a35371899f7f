#pragma once

// Command-line front end. Stages communicate only through files.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hilite/align.hpp"
#include "hilite/chatenc.hpp"
#include "hilite/corpus.hpp"
#include "hilite/error.hpp"
#include "hilite/evalkit.hpp"
#include "hilite/framefeat.hpp"
#include "hilite/nn/checkpoint.hpp"
#include "hilite/nn/predict.hpp"
#include "hilite/nn/train.hpp"
#include "hilite/parallel.hpp"
#include "hilite/synth.hpp"

namespace hilite::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

enum class LogLevel { quiet, info, debug };

// HILITE_LOG=quiet|info|debug; default info. Messages go to stderr.
class Log {
 public:
  Log() {
    if (const char* env = std::getenv("HILITE_LOG")) {
      const std::string v(env);
      if (v == "quiet" || v == "0") level_ = LogLevel::quiet;
      else if (v == "debug" || v == "2") level_ = LogLevel::debug;
    }
  }
  void info(const std::string& msg) const {
    if (level_ >= LogLevel::info) std::cerr << "hilite: " << msg << '\n';
  }
  void debug(const std::string& msg) const {
    if (level_ >= LogLevel::debug) std::cerr << "hilite: " << msg << '\n';
  }

 private:
  LogLevel level_ = LogLevel::info;
};

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::size_t workers = default_workers();
};

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

inline std::size_t video_frame_count(const DatasetManifest& m, const ManifestEntry& e,
                                     const std::optional<FrameFeatureTrack>& features) {
  if (features) return features->frames();
  if (e.has("labels")) return load_label_track(m.resolve(e, "labels")).size();
  throw DataError("video " + e.video_id + ": frame count unknown (no features or labels artifact)");
}

inline nn::VideoInputs load_inputs(const DatasetManifest& m, const ManifestEntry& e, const nn::ModelConfig& c) {
  nn::VideoInputs in;
  in.video_id = e.video_id;
  in.fps = e.fps;
  if (c.uses_vision()) in.features = load_feature_track(m.resolve(e, "features"));
  if (c.uses_language()) {
    in.chat = load_chat_log(m.resolve(e, "chat"));
    in.chat->video_id = e.video_id;
  }
  in.frame_count = video_frame_count(m, e, in.features);
  return in;
}

inline LabelTrack load_labels_for(const DatasetManifest& m, const ManifestEntry& e,
                                  const std::optional<fs::path>& labels_dir) {
  return labels_dir ? load_label_track(*labels_dir / (e.video_id + ".lbl")) : load_label_track(m.resolve(e, "labels"));
}

// ---------------------------------------------------------------------------

inline void add_synth(CLI::App& app, const GlobalOptions& g, const Log& log) {
  auto* cmd = app.add_subcommand("synth", "Generate a synthetic corpus with known highlights");
  auto spec = std::make_shared<fs::path>();
  auto out = std::make_shared<fs::path>();
  cmd->add_option("--spec", *spec, "key=value spec file")->required();
  cmd->add_option("--out-dir", *out, "Output directory")->required();
  cmd->callback([=, &g, &log] {
    auto ds = load_synth_spec(*spec);
    if (g.seed) ds.video.seed = *g.seed;
    const auto data = generate_dataset(ds);
    save_dataset(data, *out);
    const auto counts = manifest_counts(data.manifest);
    log.info("wrote " + std::to_string(counts.total) + " videos (train " + std::to_string(counts.train) + ", val " +
             std::to_string(counts.val) + ", test " + std::to_string(counts.test) + ") to " + out->string());
  });
}

inline void add_extract(CLI::App& app, const GlobalOptions& g, const Log& log) {
  auto* cmd = app.add_subcommand("extract-features", "Color-grid features from raw rgb24 frames");
  struct Opts {
    std::string input = "-";
    std::size_t width = 0, height = 0, grid = 4;
    std::optional<std::size_t> frames;
    std::string video_id;
    fs::path out;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--input", o->input, "Raw rgb24 file, or - for stdin")->capture_default_str();
  cmd->add_option("--width", o->width, "Frame width")->required()->check(CLI::PositiveNumber);
  cmd->add_option("--height", o->height, "Frame height")->required()->check(CLI::PositiveNumber);
  cmd->add_option("--grid", o->grid, "Grid cells per side")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--frames", o->frames, "Expected frame count");
  cmd->add_option("--video-id", o->video_id, "Video id (default: output file stem)");
  cmd->add_option("--out", o->out, "Output feature track")->required();
  cmd->callback([=, &g, &log] {
    std::ifstream file;
    std::istream* is = &std::cin;
    if (o->input != "-") {
      file.open(o->input, std::ios::binary);
      if (!file) throw DataError("cannot open " + o->input);
      is = &file;
    }
    RawRgbReader reader(*is, o->width, o->height);
    auto frames = reader.read_all();
    VideoMeta meta;
    meta.video_id = o->video_id.empty() ? o->out.filename().string().substr(0, o->out.filename().string().find('.'))
                                        : o->video_id;
    meta.frame_count = frames.size();
    meta.width = static_cast<int>(o->width);
    meta.height = static_cast<int>(o->height);
    if (o->frames && *o->frames != frames.size())
      throw DataError("expected " + std::to_string(*o->frames) + " frames, stream has " + std::to_string(frames.size()));
    const auto track = video_features(frames, meta, g.workers, o->grid);
    save_feature_track(o->out, track);
    log.info("extracted " + std::to_string(track.frames()) + " frames x " + std::to_string(track.dim));
  });
}

inline nlohmann::json align_report(const std::string& id, const std::vector<WindowMatch>& profile,
                                   const Segmentation& seg) {
  nlohmann::json clips = nlohmann::json::array();
  for (const auto& r : seg.runs)
    clips.push_back({{"start", r.span.start},
                     {"end", r.span.end},
                     {"reel_first_window", r.first_window},
                     {"reel_last_window", r.last_window},
                     {"mean_score", r.mean_score},
                     {"max_score", r.max_score}});
  return {{"video_id", id},
          {"windows", profile.size()},
          {"threshold", seg.threshold},
          {"degenerate", seg.degenerate},
          {"clips", std::move(clips)}};
}

inline void add_align(CLI::App& app, const GlobalOptions& g, const Log& log) {
  auto* cmd = app.add_subcommand("align", "Label frames by matching a highlight reel against the video");
  struct Opts {
    fs::path video, highlight, out, manifest, out_dir, report;
    std::size_t window = kDefaultWindow, stride = 1, drift = 2;
    double mad_k = 3.0;
    std::optional<double> threshold;
  };
  auto o = std::make_shared<Opts>();
  auto* video = cmd->add_option("--video", o->video, "Full-video feature track");
  auto* hl = cmd->add_option("--highlight", o->highlight, "Highlight-reel feature track");
  auto* out = cmd->add_option("--out", o->out, "Output label track");
  auto* manifest = cmd->add_option("--manifest", o->manifest, "Align every manifest entry with a highlight");
  auto* out_dir = cmd->add_option("--out-dir", o->out_dir, "Output directory for manifest mode (<id>.lbl)");
  video->needs(hl)->needs(out)->excludes(manifest);
  manifest->needs(out_dir);
  cmd->add_option("--report", o->report, "JSON report of detected clips");
  cmd->add_option("--window", o->window, "Window length in frames")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--stride", o->stride, "Reel window stride")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--drift", o->drift, "Allowed offset drift within a clip")->capture_default_str();
  cmd->add_option("--mad-k", o->mad_k, "Robust threshold multiplier")->capture_default_str();
  cmd->add_option("--threshold", o->threshold, "Absolute threshold (overrides --mad-k)");
  cmd->callback([=, &g, &log] {
    if (o->video.empty() && o->manifest.empty()) throw UsageError("align needs --video/--highlight/--out or --manifest");
    const auto policy = o->threshold ? ThresholdPolicy::fixed(*o->threshold) : ThresholdPolicy::robust(o->mad_k);
    auto one = [&](const FrameFeatureTrack& video, const FrameFeatureTrack& reel, const fs::path& dest) {
      const auto profile = match_profile(reel, video, o->window, o->stride, g.workers);
      const auto seg = segment_clips(profile, o->window, o->stride, policy, o->drift);
      if (seg.degenerate) log.info(video.video_id + ": no clip found below threshold");
      save_label_track(dest, labels_from_clips(seg.clips, video.frames(), video.video_id));
      log.info(video.video_id + ": " + std::to_string(seg.clips.size()) + " clips");
      return align_report(video.video_id, profile, seg);
    };
    nlohmann::json report;
    if (!o->manifest.empty()) {
      const auto m = load_manifest(o->manifest);
      fs::create_directories(o->out_dir);
      report = nlohmann::json::array();
      for (const auto& e : m.entries) {
        if (!e.has("highlight")) continue;
        auto video = load_feature_track(m.resolve(e, "features"));
        video.video_id = e.video_id;
        report.push_back(one(video, load_feature_track(m.resolve(e, "highlight")), o->out_dir / (e.video_id + ".lbl")));
      }
    } else {
      report = one(load_feature_track(o->video), load_feature_track(o->highlight), o->out);
    }
    if (!o->report.empty()) write_json(o->report, report);
  });
}

inline void add_encode_chat(CLI::App& app, const GlobalOptions&, const Log& log) {
  auto* cmd = app.add_subcommand("encode-chat", "Encode forward chat windows at every stride-th frame");
  struct Opts {
    fs::path chat, out, features;
    std::optional<std::size_t> frames;
    double fps = 30.0, window = 7.0;
    std::size_t stride = 10;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--chat", o->chat, "Chat log")->required();
  auto* frames = cmd->add_option("--frames", o->frames, "Video frame count");
  auto* feats = cmd->add_option("--features", o->features, "Feature track supplying the frame count");
  frames->excludes(feats);
  cmd->add_option("--fps", o->fps, "Frames per second")->capture_default_str();
  cmd->add_option("--window", o->window, "Text window in seconds")->capture_default_str();
  cmd->add_option("--stride", o->stride, "Frame stride")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--out", o->out, "Output window file")->required();
  cmd->callback([=, &log] {
    if (!o->frames && o->features.empty()) throw UsageError("encode-chat needs --frames or --features");
    if (!(o->fps > 0)) throw UsageError("fps must be positive");
    const std::size_t n = o->frames ? *o->frames : load_feature_track(o->features).frames();
    const auto log_data = load_chat_log(o->chat);
    const ChatWindowEncoder enc(log_data, WindowConfig{o->window});
    std::vector<EncodedWindow> windows;
    for (std::size_t f = 0; f < n; f += o->stride) windows.push_back(enc.at(double(f) / o->fps, f));
    std::ofstream os(o->out, std::ios::binary);
    if (!os) throw DataError("cannot write " + o->out.string());
    write_encoded_windows(os, windows);
    log.info("encoded " + std::to_string(windows.size()) + " windows");
  });
}

inline void add_train(CLI::App& app, const GlobalOptions& g, const Log& log) {
  auto* cmd = app.add_subcommand("train", "Train a highlight classifier on the manifest's train split");
  struct Opts {
    std::string kind = "joint";
    fs::path manifest, out, log_json;
    std::optional<fs::path> labels_dir;
    nn::ModelConfig model;
    nn::TrainConfig train;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--kind", o->kind, "lang_char | lang_word | vision_seq | joint")
      ->capture_default_str()
      ->check(CLI::IsMember({"lang_char", "lang_word", "vision_seq", "joint"}));
  cmd->add_option("--manifest", o->manifest, "Dataset manifest")->required();
  cmd->add_option("--out", o->out, "Output checkpoint")->required();
  cmd->add_option("--labels-dir", o->labels_dir, "Read <id>.lbl from here instead of the manifest labels");
  cmd->add_option("--log-json", o->log_json, "Write per-epoch losses as JSON");
  cmd->add_option("--lang-hidden", o->model.lang_hidden)->capture_default_str();
  cmd->add_option("--lang-layers", o->model.lang_layers)->capture_default_str();
  cmd->add_option("--vision-hidden", o->model.vision_hidden)->capture_default_str();
  cmd->add_option("--vision-layers", o->model.vision_layers)->capture_default_str();
  cmd->add_option("--mlp-hidden", o->model.mlp_hidden)->capture_default_str();
  cmd->add_option("--vision-steps", o->model.vision_steps)->capture_default_str();
  cmd->add_option("--frame-stride", o->model.frame_stride)->capture_default_str();
  cmd->add_option("--text-window", o->model.text_window_s, "Seconds")->capture_default_str();
  cmd->add_option("--epochs", o->train.epochs)->capture_default_str();
  cmd->add_option("--batch", o->train.batch_size)->capture_default_str();
  cmd->add_option("--weight-decay", o->train.weight_decay)->capture_default_str();
  cmd->add_option("--lr", o->train.lr_initial)->capture_default_str();
  cmd->add_option("--lr-final", o->train.lr_final)->capture_default_str();
  cmd->add_option("--lr-switch-epoch", o->train.lr_switch_epoch)->capture_default_str();
  cmd->add_option("--positives", o->train.positives_per_epoch)->capture_default_str();
  cmd->add_option("--negatives", o->train.negatives_per_epoch)->capture_default_str();
  cmd->add_option("--keep-fraction", o->train.keep_fraction)->capture_default_str();
  cmd->add_option("--word-min-count", o->train.word_min_count)->capture_default_str();
  cmd->callback([=, &g, &log] {
    auto model = o->model;
    model.kind = *nn::parse_model_kind(o->kind);
    auto tc = o->train;
    tc.seed = g.seed.value_or(1);
    tc.workers = g.workers;
    tc.validate();
    const auto m = load_manifest(o->manifest);
    nn::TrainingSet data;
    for (const auto* e : m.in_split(Split::train)) {
      data.videos.push_back(load_inputs(m, *e, model));
      data.labels.push_back(load_labels_for(m, *e, o->labels_dir));
    }
    if (!data.videos.empty()) model.fps = data.videos.front().fps;
    log.info("training " + o->kind + " on " + std::to_string(data.videos.size()) + " videos");
    nlohmann::json epochs = nlohmann::json::array();
    const auto ck = nn::train(model, tc, data, [&](const nn::EpochLog& e) {
      log.info("epoch " + std::to_string(e.epoch) + " lr=" + text::format_double(e.learning_rate) +
               " loss=" + text::format_double(e.mean_loss) +
               (e.positives_with_replacement ? " (positives drawn with replacement)" : ""));
      epochs.push_back({{"epoch", e.epoch},
                        {"lr", e.learning_rate},
                        {"loss", e.mean_loss},
                        {"steps", e.steps},
                        {"positives_with_replacement", e.positives_with_replacement},
                        {"negatives_with_replacement", e.negatives_with_replacement}});
    });
    nn::save_checkpoint(o->out, ck);
    if (!o->log_json.empty()) write_json(o->log_json, epochs);
  });
}

inline void add_predict(CLI::App& app, const GlobalOptions& g, const Log& log) {
  auto* cmd = app.add_subcommand("predict", "Predict per-frame highlight labels");
  struct Opts {
    fs::path model, manifest, out, out_dir, scores;
    std::string video_id, split;
    std::size_t stride = 0;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--model", o->model, "Checkpoint")->required();
  cmd->add_option("--manifest", o->manifest, "Dataset manifest")->required();
  auto* vid = cmd->add_option("--video-id", o->video_id, "Single video to predict");
  auto* out = cmd->add_option("--out", o->out, "Output label track (single video)");
  auto* split = cmd->add_option("--split", o->split, "Predict every video of a split")
                    ->check(CLI::IsMember({"train", "val", "test"}));
  auto* out_dir = cmd->add_option("--out-dir", o->out_dir, "Output directory for --split (<id>.lbl)");
  vid->needs(out)->excludes(split);
  split->needs(out_dir);
  cmd->add_option("--scores", o->scores, "Per-frame scores as a 1-dim feature track (single video)");
  cmd->add_option("--eval-stride", o->stride, "Evaluate every n-th frame (default: model stride)");
  cmd->callback([=, &g, &log] {
    if (o->video_id.empty() && o->split.empty()) throw UsageError("predict needs --video-id or --split");
    const auto ck = nn::load_checkpoint(o->model);
    const auto m = load_manifest(o->manifest);
    nn::PredictOptions opt;
    opt.eval_stride = o->stride;
    opt.workers = g.workers;
    auto one = [&](const ManifestEntry& e, const fs::path& dest) {
      const auto inputs = load_inputs(m, e, ck.config);
      const auto pred = nn::predict_track(ck, inputs, opt);
      if (pred.padded_windows)
        log.info(e.video_id + ": " + std::to_string(pred.padded_windows) + " evaluated frames used a left-padded vision window");
      save_label_track(dest, pred.labels);
      return pred;
    };
    if (!o->video_id.empty()) {
      const auto pred = one(m.find(o->video_id), o->out);
      if (!o->scores.empty()) {
        FrameFeatureTrack t(o->video_id, 1);
        t.values = pred.scores;
        save_feature_track(o->scores, t);
      }
    } else {
      fs::create_directories(o->out_dir);
      for (const auto* e : m.in_split(*parse_split(o->split))) one(*e, o->out_dir / (e->video_id + ".lbl"));
    }
  });
}

inline void add_eval(CLI::App& app, const GlobalOptions&, const Log&) {
  auto* cmd = app.add_subcommand("eval", "Precision / recall / F-score of predicted labels");
  struct Opts {
    std::vector<fs::path> gt, pred;
    fs::path manifest, pred_dir, json;
    std::string split = "test";
  };
  auto o = std::make_shared<Opts>();
  auto* gt = cmd->add_option("--gt", o->gt, "Ground-truth label tracks");
  auto* pred = cmd->add_option("--pred", o->pred, "Predicted label tracks, parallel to --gt");
  auto* manifest = cmd->add_option("--manifest", o->manifest, "Score a split: ground truth from the manifest");
  auto* pred_dir = cmd->add_option("--pred-dir", o->pred_dir, "Predictions (<id>.lbl) for --manifest");
  cmd->add_option("--split", o->split, "Split for --manifest")->capture_default_str()->check(
      CLI::IsMember({"train", "val", "test"}));
  cmd->add_option("--json", o->json, "Also write the report as JSON");
  gt->needs(pred)->excludes(manifest);
  manifest->needs(pred_dir);
  cmd->callback([=] {
    std::vector<VideoEval> evals;
    if (!o->manifest.empty()) {
      const auto m = load_manifest(o->manifest);
      for (const auto* e : m.in_split(*parse_split(o->split))) {
        const auto g = load_label_track(m.resolve(*e, "labels"));
        const auto p = load_label_track(o->pred_dir / (e->video_id + ".lbl"));
        evals.push_back({e->video_id, evaluate(g, p)});
      }
    } else {
      if (o->gt.empty()) throw UsageError("eval needs --gt/--pred or --manifest/--pred-dir");
      if (o->gt.size() != o->pred.size()) throw UsageError("--gt and --pred must list the same number of files");
      for (std::size_t i = 0; i < o->gt.size(); ++i) {
        const auto g = load_label_track(o->gt[i]);
        evals.push_back({g.video_id, evaluate(g, load_label_track(o->pred[i]))});
      }
    }
    const auto rep = report(evals);
    std::cout << format_text(rep);
    if (!o->json.empty()) write_json(o->json, to_json(rep));
  });
}

inline int run(int argc, const char* const* argv) {
  Log log;
  GlobalOptions g;
  CLI::App app{"hilite: highlight labeling, training and evaluation for broadcast videos", "hilite"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--seed", g.seed, "Seed for every random choice (default 1)");
  app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);
  add_synth(app, g, log);
  add_extract(app, g, log);
  add_align(app, g, log);
  add_encode_chat(app, g, log);
  add_train(app, g, log);
  add_predict(app, g, log);
  add_eval(app, g, log);
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "hilite: usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "hilite: numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const DataError& e) {
    std::cerr << "hilite: data error: " << e.what() << '\n';
    return kData;
  } catch (const std::bad_alloc&) {
    std::cerr << "hilite: out of memory\n";
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "hilite: data error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}

}  // namespace hilite::cli
