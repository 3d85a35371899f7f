#pragma once

// Frame-set precision / recall / F-score and aggregate reports.

#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hilite/corpus.hpp"
#include "hilite/error.hpp"

namespace hilite {

struct EvalResult {
  double precision = 0.0;  // [0, 1]
  double recall = 0.0;     // [0, 1]
  double f_score = 0.0;    // [0, 100]
  std::size_t tp = 0, fp = 0, fn = 0;
};

// Harmonic mean scaled to [0, 100]; 0 when P + R == 0.
inline double f_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s * 100.0 : 0.0;
}

inline EvalResult from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  EvalResult r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.precision = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
  r.f_score = f_score(r.precision, r.recall);
  return r;
}

inline EvalResult evaluate(const LabelTrack& gt, const LabelTrack& pred) {
  if (gt.size() != pred.size())
    throw DataError("label length mismatch for " + gt.video_id + ": ground truth has " +
                    std::to_string(gt.size()) + " frames, prediction has " + std::to_string(pred.size()));
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t f = 0; f < gt.size(); ++f) {
    const bool g = gt[f], p = pred[f];
    tp += g && p;
    fp += !g && p;
    fn += g && !p;
  }
  return from_counts(tp, fp, fn);
}

struct VideoEval {
  std::string video_id;
  EvalResult result;
};

struct EvalReport {
  std::vector<VideoEval> videos;
  EvalResult macro;  // per-video averages of P, R and F; counts pooled
  EvalResult micro;  // from pooled counts
};

inline EvalReport report(std::span<const VideoEval> per_video) {
  if (per_video.empty()) throw DataError("empty evaluation set");
  EvalReport rep;
  rep.videos.assign(per_video.begin(), per_video.end());
  std::size_t tp = 0, fp = 0, fn = 0;
  double p = 0.0, r = 0.0, f = 0.0;
  for (const auto& v : per_video) {
    tp += v.result.tp;
    fp += v.result.fp;
    fn += v.result.fn;
    p += v.result.precision;
    r += v.result.recall;
    f += v.result.f_score;
  }
  const double n = double(per_video.size());
  rep.micro = from_counts(tp, fp, fn);
  rep.macro = {p / n, r / n, f / n, tp, fp, fn};
  return rep;
}

inline nlohmann::json to_json(const EvalResult& r) {
  return {{"precision", r.precision}, {"recall", r.recall}, {"f_score", r.f_score},
          {"tp", r.tp},               {"fp", r.fp},         {"fn", r.fn}};
}

inline nlohmann::json to_json(const EvalReport& rep) {
  nlohmann::json videos = nlohmann::json::array();
  for (const auto& v : rep.videos) {
    auto j = to_json(v.result);
    j["video_id"] = v.video_id;
    videos.push_back(std::move(j));
  }
  return {{"videos", std::move(videos)}, {"macro", to_json(rep.macro)}, {"micro", to_json(rep.micro)}};
}

// key=value lines, one per video plus the two aggregates.
inline std::string format_text(const EvalReport& rep) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  auto line = [&](const std::string& name, const EvalResult& r) {
    os << name << " precision=" << r.precision << " recall=" << r.recall << " f=" << r.f_score
       << " tp=" << r.tp << " fp=" << r.fp << " fn=" << r.fn << '\n';
  };
  for (const auto& v : rep.videos) line("video=" + v.video_id, v.result);
  line("aggregate=macro", rep.macro);
  line("aggregate=micro", rep.micro);
  return os.str();
}

}  // namespace hilite
