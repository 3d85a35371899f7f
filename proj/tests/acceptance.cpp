// Acceptance run: one PASS/FAIL line per criterion. Exits non-zero when any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hilite/hilite.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace hilite;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::size_t workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// Tracks of `frames` frames with exactly tp true positives, fp false
// positives and fn false negatives.
std::pair<LabelTrack, LabelTrack> tracks_with_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t n = tp + fp + fn + 100;
  LabelTrack gt("c1", n), pred("c1", n);
  gt.set({0, tp + fn});
  pred.set({fn, fn + tp + fp});
  return {gt, pred};
}

// ---------------------------------------------------------------------------

Outcome metric_arithmetic() {
  // P = a/100, R = b/100 exactly: tp = a*b, predicted = 100*b, actual = 100*a.
  auto f_of = [](int a, int b) {
    const std::size_t tp = std::size_t(a) * b;
    const auto [gt, pred] = tracks_with_counts(tp, 100 * std::size_t(b) - tp, 100 * std::size_t(a) - tp);
    return evaluate(gt, pred).f_score;
  };
  const double headline = f_of(77, 72);
  bool ok = std::abs(headline - 74.43) <= 0.01;
  std::string detail = fmt("F(0.77,0.72)=%.4f target 74.43+-0.01 %s", headline, ok ? "ok" : "MISS");

  struct Row {
    const char* name;
    int p, r;
    double printed;
  };
  const Row rows[] = {{"L-Char 100%", 11, 99, 19.6},     {"L-Char last25", 35, 51, 41.5},
                      {"L-Word last25", 10, 99, 19.2},   {"V-CNN 100%", 40, 93, 56.2},
                      {"V-CNN last25", 57, 74, 64.0},    {"V-CNN-LSTM last25", 58, 82, 68.3},
                      {"lv-LSTM last25", 77, 72, 74.8}};
  for (const auto& row : rows) {
    const double f = f_of(row.p, row.r);
    const bool row_ok = std::abs(f - row.printed) <= 0.8;
    ok &= row_ok;
    detail += fmt("; %s %.2f vs %.1f %s", row.name, f, row.printed, row_ok ? "ok" : "MISS");
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------

SynthSpec alignment_instance(std::uint64_t i, double noise) {
  Rng rng(detail::mix_seed(2024, i));
  SynthSpec s;
  s.video_id = "align" + std::to_string(i);
  s.frame_count = 2000 + uniform_index(rng, 8001);
  s.clip_count = 1 + uniform_index(rng, 5);
  s.min_gap_frames = 100;
  s.clip_min_frames = 200;
  s.clip_max_frames = std::min<std::size_t>(900, (s.frame_count - (s.clip_count + 1) * 100) / s.clip_count);
  s.expected_messages = 0;
  s.reel_noise = noise;
  s.seed = detail::mix_seed(7, i);
  return s;
}

Outcome alignment_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t exact = 0, clips = 0, close = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto v = generate(alignment_instance(i, 0.0));
    const auto seg = segment_clips(match_profile(v.highlight, v.features, kDefaultWindow, 1, workers()), kDefaultWindow);
    exact += labels_from_clips(seg.clips, v.features.frames()).runs() == v.clips;
  }
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto v = generate(alignment_instance(1000 + i, 0.01));
    const auto seg = segment_clips(match_profile(v.highlight, v.features, kDefaultWindow, 1, workers()), kDefaultWindow);
    const auto found = labels_from_clips(seg.clips, v.features.frames()).runs();
    for (const auto& c : v.clips) {
      ++clips;
      std::size_t best = SIZE_MAX;
      for (const auto& r : found) {
        const std::size_t ds = r.start > c.start ? r.start - c.start : c.start - r.start;
        const std::size_t de = r.end > c.end ? r.end - c.end : c.end - r.end;
        best = std::min(best, std::max(ds, de));
      }
      close += best <= 2;
    }
  }
  const double secs = seconds_since(t0);
  const double frac = double(close) / double(clips);
  const bool ok = exact == 100 && frac >= 0.95 && secs < 30;
  return {ok, fmt("clean exact %zu/100; noisy clips within 2 frames %zu/%zu (%.1f%%); %.1fs (limit 30s)", exact,
                  close, clips, 100 * frac, secs)};
}

// ---------------------------------------------------------------------------

Outcome kernel_oracle() {
  Rng rng(99);
  std::size_t argmin_ok = 0;
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t frames = testing::gen_size(rng, 100, 1500), window = testing::gen_size(rng, 5, 80);
    const auto video = testing::gen_walk(rng, frames, 48);
    FrameFeatureTrack tmpl("t", 48);
    if (i % 2 == 0) {
      // A perturbed copy of a video window.
      const std::size_t at = uniform_index(rng, frames - window + 1);
      for (std::size_t k = 0; k < window * 48; ++k)
        tmpl.values.push_back(video.values[at * 48 + k] + float(uniform(rng, -1e-3, 1e-3)));
    } else {
      tmpl = testing::gen_walk(rng, window, 48);
    }
    const auto fast = match_window(FeatureWindow::of(tmpl, 0, window), video);
    const auto naive = testing::naive_best_offset(tmpl, 0, video, window);
    argmin_ok += fast.video_offset == naive.offset;
    worst = std::max(worst, std::abs(fast.score - naive.score) / std::max(naive.score, 1e-300));
  }
  return {argmin_ok == 1000 && worst <= 1e-6,
          fmt("argmin agrees %zu/1000; worst score relative error %.2e (limit 1e-6)", argmin_ok, worst)};
}

// ---------------------------------------------------------------------------

nn::Example random_example(Rng& rng, const nn::ModelConfig& c, bool empty_chat) {
  nn::Example ex;
  if (c.uses_language() && !empty_chat)
    for (std::size_t n = testing::gen_size(rng, 1, 16); n > 0; --n)
      ex.tokens.push_back(static_cast<std::uint32_t>(uniform_index(rng, c.language_inputs())));
  if (c.uses_vision())
    for (std::size_t i = 0; i < c.vision_steps * c.feature_dim; ++i) ex.vision.push_back(float(uniform01(rng)));
  ex.target = bernoulli(rng, 0.5);
  return ex;
}

Outcome gradient_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = true;
  for (const auto kind : {nn::ModelKind::lang_char, nn::ModelKind::vision_seq, nn::ModelKind::joint}) {
    nn::ModelConfig c;
    c.kind = kind;
    c.lang_hidden = c.vision_hidden = c.mlp_hidden = 8;
    double worst = 0;
    std::size_t checked = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      Rng rng(seed);
      auto p = nn::init_params<double>(c, rng);
      std::vector<nn::Example> batch;
      for (int i = 0; i < 3; ++i) batch.push_back(random_example(rng, c, i == 2));
      std::vector<const nn::Example*> ptrs;
      for (const auto& e : batch) ptrs.push_back(&e);
      auto grad = nn::ModelParams<double>::zeros(c);
      nn::batch_gradient<double>(c, p, ptrs, 1e-4, grad);
      auto pt = p.tensors();
      auto gt = grad.tensors();
      for (std::size_t t = 0; t < pt.size(); ++t) {
        auto& m = *pt[t].second;
        for (Eigen::Index i = 0; i < m.size(); ++i) {
          const double keep = m.data()[i], eps = 1e-4;
          m.data()[i] = keep + eps;
          const double up = nn::batch_loss<double>(c, p, ptrs, 1e-4);
          m.data()[i] = keep - eps;
          const double down = nn::batch_loss<double>(c, p, ptrs, 1e-4);
          m.data()[i] = keep;
          const double numeric = (up - down) / (2 * eps), analytic = gt[t].second->data()[i];
          const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-7});
          worst = std::max(worst, std::abs(numeric - analytic) / denom);
          ++checked;
        }
      }
    }
    ok &= worst <= 1e-4;
    detail += fmt("%s max rel err %.2e over %zu entries; ", std::string(nn::to_string(kind)).c_str(), worst, checked);
  }
  const double secs = seconds_since(t0);
  ok &= secs < 60;
  return {ok, detail + fmt("%.1fs (limit 60s)", secs)};
}

// ---------------------------------------------------------------------------

struct LearnSetup {
  nn::TrainingSet train;
  std::vector<nn::VideoInputs> held_out;
  std::vector<LabelTrack> held_out_gt;
};

LearnSetup learn_setup(bool null_signal) {
  SynthDatasetSpec ds;
  ds.videos = 9;
  auto& s = ds.video;
  s.frame_count = 18000;
  s.clip_count = 4;
  s.clip_min_frames = 600;
  s.clip_max_frames = 1500;
  s.min_gap_frames = 600;
  s.expected_messages = 200;
  s.max_message_words = 2;
  if (null_signal) {
    s.burst_multiplier = 1;
    s.signal_prob_in = s.signal_prob_out = 0.1;
  }
  const auto data = generate_dataset(ds);
  LearnSetup out;
  for (std::size_t i = 0; i < data.videos.size(); ++i) {
    const auto& v = data.videos[i];
    nn::VideoInputs in{v.features.video_id, 30.0, v.features.frames(), v.features, v.chat};
    if (data.manifest.entries[i].split == Split::train) {
      out.train.videos.push_back(std::move(in));
      out.train.labels.push_back(v.labels);
    } else {
      out.held_out.push_back(std::move(in));
      out.held_out_gt.push_back(v.labels);
    }
  }
  return out;
}

nn::ModelConfig learn_model(nn::ModelKind kind) {
  nn::ModelConfig c;
  c.kind = kind;
  c.lang_hidden = c.vision_hidden = c.mlp_hidden = 16;
  return c;
}

struct HeldOut {
  EvalReport report;
  double chance = 0;  // F of a random labeller with the model's positive rate
};

HeldOut evaluate_held_out(const nn::ModelCheckpoint& ck, const LearnSetup& setup) {
  std::vector<VideoEval> per;
  double predicted = 0, actual = 0, frames = 0;
  nn::PredictOptions opt;
  opt.workers = workers();
  for (std::size_t i = 0; i < setup.held_out.size(); ++i) {
    const auto p = nn::predict_track(ck, setup.held_out[i], opt);
    per.push_back({setup.held_out[i].video_id, evaluate(setup.held_out_gt[i], p.labels)});
    predicted += double(p.labels.positives());
    actual += double(setup.held_out_gt[i].positives());
    frames += double(p.labels.size());
  }
  const double q = predicted / frames, pi = actual / frames;
  return {report(per), q + pi > 0 ? 200 * q * pi / (q + pi) : 0.0};
}

std::vector<nn::EpochLog> g_joint_logs;  // reused by the protocol check

Outcome learnability() {
  const auto t0 = std::chrono::steady_clock::now();
  nn::TrainConfig tc;  // 60 epochs, batch 32, 1e-2 -> 1e-3 after epoch 20, 5000/5000
  tc.workers = workers();

  const auto strong = learn_setup(false);
  const auto joint = nn::train(learn_model(nn::ModelKind::joint), tc, strong.train,
                               [](const nn::EpochLog& l) { g_joint_logs.push_back(l); });
  const auto j = evaluate_held_out(joint, strong);

  const auto null = learn_setup(true);
  const auto lang = nn::train(learn_model(nn::ModelKind::lang_char), tc, null.train);
  const auto n = evaluate_held_out(lang, null);

  const double secs = seconds_since(t0);
  const bool ok = j.report.micro.f_score >= 90 && std::abs(n.report.micro.f_score - n.chance) <= 10 && secs < 600;
  return {ok, fmt("joint held-out F %.2f (micro) / %.2f (macro), need >= 90; null lang_char F %.2f vs chance %.2f "
                  "(within 10); %.0fs (limit 600s)",
                  j.report.micro.f_score, j.report.macro.f_score, n.report.micro.f_score, n.chance, secs)};
}

// ---------------------------------------------------------------------------

Outcome protocol_fidelity() {
  const auto setup = learn_setup(false);
  const auto& labels = setup.train.labels;
  std::vector<LabelTrack> truncated;
  for (const auto& l : labels) truncated.push_back(truncate_positives(l));
  const auto pools = nn::SamplePools::build(truncated, labels);

  // Membership oracle: frame f of a run [s, e) is kept when f >= e - ceil(L / 4).
  auto in_last_quarter = [&](std::size_t v, std::uint64_t f) {
    for (const auto& r : labels[v].runs())
      if (r.contains(f)) return f >= r.end - (r.length() + 3) / 4;
    return false;
  };

  Rng rng(5);
  std::size_t bad_pos = 0, bad_neg = 0, pos = 0, neg = 0;
  for (int epoch = 0; epoch < 3; ++epoch) {
    const auto s = nn::sample_epoch(pools, 5000, 5000, rng);
    for (const auto& r : s.refs) {
      if (r.positive) {
        ++pos;
        bad_pos += !in_last_quarter(r.video, r.frame);
      } else {
        ++neg;
        bad_neg += labels[r.video][r.frame];
      }
    }
  }
  const nn::TrainConfig tc;
  const bool lr_ok = tc.learning_rate(20) == 1e-2 && tc.learning_rate(21) == 1e-3;
  bool logs_ok = g_joint_logs.size() == 60;
  for (const auto& l : g_joint_logs)
    logs_ok &= l.steps == 313 && l.learning_rate == (l.epoch <= 20 ? 1e-2 : 1e-3) && !l.positives_with_replacement &&
               !l.negatives_with_replacement;
  const bool ok = bad_pos == 0 && bad_neg == 0 && pos == 15000 && neg == 15000 && lr_ok && logs_ok;
  return {ok, fmt("3 epochs drew %zu/%zu pos/neg, %zu positives outside last 25%%, %zu negatives inside clips; "
                  "lr(20)=%g lr(21)=%g; training log %s",
                  pos, neg, bad_pos, bad_neg, tc.learning_rate(20), tc.learning_rate(21),
                  logs_ok ? "60 epochs x 313 steps at scheduled rates" : "MISMATCH")};
}

// ---------------------------------------------------------------------------

// write -> read -> write gives the same bytes.
template <typename T, typename Write, typename Read>
bool bytes_round_trip(const T& value, const Write& write, const Read& read) {
  std::ostringstream a;
  write(a, value);
  std::istringstream in(a.str());
  std::ostringstream b;
  write(b, read(in));
  return a.str() == b.str();
}

Outcome determinism() {
  const auto setup = learn_setup(false);
  nn::TrainConfig tc;
  tc.epochs = 3;
  tc.positives_per_epoch = tc.negatives_per_epoch = 300;
  auto bytes = [](const nn::ModelCheckpoint& ck) {
    std::ostringstream os;
    nn::write_checkpoint(os, ck);
    return os.str();
  };
  std::vector<std::string> checks;
  bool ok = true;
  for (const auto kind : {nn::ModelKind::joint, nn::ModelKind::lang_word}) {
    const auto first = bytes(nn::train(learn_model(kind), tc, setup.train));
    tc.workers = workers() + 1;
    const auto second = bytes(nn::train(learn_model(kind), tc, setup.train));
    tc.workers = 1;
    std::istringstream is(first);
    const bool same = first == second, rt = bytes(nn::read_checkpoint(is)) == first;
    ok &= same && rt;
    checks.push_back(std::string(nn::to_string(kind)) + (same ? " retrain identical" : " retrain DIFFERS") +
                     (rt ? ", checkpoint round trip exact" : ", checkpoint round trip BROKEN"));
  }

  // Every other file format.
  Rng rng(77);
  bool formats = true;
  for (int i = 0; i < 50; ++i) {
    const auto track = testing::gen_track(rng, testing::gen_size(rng, 0, 200), testing::gen_size(rng, 1, 48));
    formats &= bytes_round_trip(track, [](std::ostream& os, const FrameFeatureTrack& t) { write_feature_track(os, t); },
                                [](std::istream& is) { return read_feature_track(is, "v"); });
    const auto labels = testing::gen_labels(rng, testing::gen_size(rng, 1, 500), uniform01(rng));
    formats &= bytes_round_trip(labels, [](std::ostream& os, const LabelTrack& t) { write_label_track(os, t); },
                                [](std::istream& is) { return read_label_track(is); });
    const auto chat = testing::gen_chat(rng, testing::gen_size(rng, 1, 60), 300.0);
    formats &= bytes_round_trip(chat, [](std::ostream& os, const ChatLog& c) { write_chat_log(os, c); },
                                [](std::istream& is) { return parse_chat_log(is, "v"); });
    const ChatWindowEncoder enc(chat, WindowConfig{});
    std::vector<EncodedWindow> windows;
    for (std::uint64_t f = 0; f < 9000; f += 300) windows.push_back(enc.at(double(f) / 30.0, f));
    formats &= bytes_round_trip(
        windows, [](std::ostream& os, const std::vector<EncodedWindow>& w) { write_encoded_windows(os, w); },
        [](std::istream& is) { return read_encoded_windows(is); });
  }
  SynthDatasetSpec mds;
  mds.videos = 27;
  mds.video.frame_count = 100;
  mds.video.clips = {{10, 40}};
  mds.video.expected_messages = 10;
  formats &= bytes_round_trip(generate_dataset(mds).manifest,
                              [](std::ostream& os, const DatasetManifest& m) { write_manifest(os, m); },
                              [](std::istream& is) { return parse_manifest(is, "."); });
  ok &= formats;
  checks.push_back(formats ? "feature/label/chat/window/manifest formats exact" : "a file format round trip BROKE");

  // Multilingual strings through the character pipeline.
  std::size_t text_ok = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto s = testing::gen_unicode(rng, 24);
    const auto ascii = expand_to_ascii(s);
    text_ok += collapse_from_ascii(decode_chars(encode_chars(ascii))) == s;
  }
  ok &= text_ok == 10000;
  checks.push_back(fmt("%zu/10000 multilingual strings round trip", text_ok));

  std::string detail;
  for (const auto& c : checks) detail += (detail.empty() ? "" : "; ") + c;
  return {ok, detail};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "metric arithmetic", metric_arithmetic},     {2, "alignment oracle equivalence", alignment_equivalence},
      {3, "kernel oracle", kernel_oracle},             {4, "gradient checks", gradient_checks},
      {5, "end-to-end learnability", learnability},    {6, "protocol fidelity", protocol_fidelity},
      {7, "determinism and round trips", determinism}};
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %d %-30s %s  [%.1fs] %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", seconds_since(t0),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
