#include <gtest/gtest.h>

#include "hilite/align.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

namespace hilite {
namespace {

FrameFeatureTrack excerpt(const FrameFeatureTrack& t, std::size_t start, std::size_t end) {
  FrameFeatureTrack out("reel", t.dim);
  out.values.assign(t.values.begin() + static_cast<std::ptrdiff_t>(start * t.dim),
                    t.values.begin() + static_cast<std::ptrdiff_t>(end * t.dim));
  return out;
}

void append(FrameFeatureTrack& dst, const FrameFeatureTrack& src) {
  dst.values.insert(dst.values.end(), src.values.begin(), src.values.end());
}

TEST(WindowDistance, IdenticalWindowsScoreZero) {
  Rng rng(1);
  const auto t = testing::gen_track(rng, 100, 48);
  const auto w = FeatureWindow::of(t, 10, 60);
  EXPECT_EQ(window_distance(w, w), 0.0);
}

TEST(WindowDistance, ShapeMismatchThrows) {
  Rng rng(1);
  const auto a = testing::gen_track(rng, 100, 4);
  const auto b = testing::gen_track(rng, 100, 5);
  EXPECT_THROW(window_distance(FeatureWindow::of(a, 0, 10), FeatureWindow::of(a, 0, 11)), DataError);
  EXPECT_THROW(window_distance(FeatureWindow::of(a, 0, 10), FeatureWindow::of(b, 0, 8)), DataError);
  EXPECT_THROW(FeatureWindow::of(a, 95, 10), DataError);
}

TEST(MatchWindow, ExactExcerptFoundAtItsOffset) {
  Rng rng(2);
  const auto video = testing::gen_walk(rng, 2000, 48);
  const auto m = match_window(FeatureWindow::of(video, 1234, 60), video);
  EXPECT_EQ(m.video_offset, 1234u);
  EXPECT_EQ(m.score, 0.0);
}

TEST(MatchWindow, TiesGoToSmallestOffset) {
  // A video whose second half repeats its first half.
  Rng rng(3);
  const auto half = testing::gen_track(rng, 200, 8);
  FrameFeatureTrack video("v", 8);
  append(video, half);
  append(video, half);
  const auto m = match_window(FeatureWindow::of(half, 50, 30), video);
  EXPECT_EQ(m.video_offset, 50u);

  FrameFeatureTrack flat("flat", 2);
  flat.values.assign(2 * 40, 0.5f);
  EXPECT_EQ(match_window(FeatureWindow::of(flat, 3, 10), flat).video_offset, 0u);
}

TEST(MatchProfile, AgreesWithNaiveScan) {
  Rng rng(4);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t dim = testing::gen_size(rng, 1, 12);
    const std::size_t window = testing::gen_size(rng, 1, 40);
    const auto video = bernoulli(rng, 0.5) ? testing::gen_walk(rng, testing::gen_size(rng, window, 400), dim)
                                           : testing::gen_track(rng, testing::gen_size(rng, window, 400), dim);
    const auto reel = testing::gen_track(rng, testing::gen_size(rng, window, 200), dim);
    const std::size_t stride = testing::gen_size(rng, 1, 70);
    const std::size_t workers = testing::gen_size(rng, 1, 4);
    const auto profile = match_profile(reel, video, window, stride, workers);
    ASSERT_EQ(profile.size(), (reel.frames() - window) / stride + 1);
    for (std::size_t k = 0; k < profile.size(); ++k) {
      const auto want = testing::naive_best_offset(reel, k * stride, video, window);
      EXPECT_EQ(profile[k].highlight_start_frame, k * stride);
      EXPECT_EQ(profile[k].video_offset, want.offset) << "trial " << trial << " window " << k;
      EXPECT_NEAR(profile[k].score, want.score, 1e-6 * std::max(want.score, 1e-300));
    }
  }
}

TEST(MatchProfile, WorkerCountDoesNotChangeResult) {
  Rng rng(5);
  const auto video = testing::gen_walk(rng, 1500, 16);
  const auto reel = testing::gen_walk(rng, 900, 16);
  const auto one = match_profile(reel, video, 60, 1, 1);
  const auto many = match_profile(reel, video, 60, 1, 3);
  EXPECT_EQ(one, many);
}

TEST(MatchProfile, GenericMetricPathMatchesFastPath) {
  struct SlowMsd {
    double operator()(const FeatureWindow& a, const FeatureWindow& b) const { return MeanSquaredDistance{}(a, b); }
  };
  Rng rng(6);
  const auto video = testing::gen_walk(rng, 300, 6);
  const auto reel = excerpt(video, 40, 160);
  const auto fast = match_profile(reel, video, 20, 3);
  const auto slow = match_profile(reel, video, 20, 3, 1, SlowMsd{});
  ASSERT_EQ(fast.size(), slow.size());
  for (std::size_t k = 0; k < fast.size(); ++k) {
    EXPECT_EQ(fast[k].video_offset, slow[k].video_offset);
    EXPECT_EQ(fast[k].score, slow[k].score);
  }
}

TEST(MatchProfile, RejectsBadInputs) {
  Rng rng(7);
  const auto a = testing::gen_track(rng, 100, 4);
  const auto b = testing::gen_track(rng, 100, 5);
  const auto tiny = testing::gen_track(rng, 10, 4);
  EXPECT_THROW(match_profile(a, b), DataError);
  EXPECT_THROW(match_profile(a, tiny, 60), DataError);
  EXPECT_THROW(match_profile(tiny, a, 60), DataError);
  EXPECT_THROW(match_profile(a, a, 0), UsageError);
  EXPECT_THROW(match_profile(a, a, 10, 0), UsageError);
}

TEST(SegmentClips, TwoSplicedExcerptsGiveTwoClips) {
  Rng rng(8);
  const auto video = testing::gen_walk(rng, 3000, 48);
  FrameFeatureTrack reel("reel", 48);
  append(reel, excerpt(video, 2000, 2300));
  append(reel, excerpt(video, 500, 700));
  const auto profile = match_profile(reel, video);
  const auto seg = segment_clips(profile, kDefaultWindow);
  const std::vector<ClipSpan> want{{2000, 2300}, {500, 700}};
  EXPECT_EQ(seg.clips, want);
  EXPECT_FALSE(seg.degenerate);
  ASSERT_EQ(seg.runs.size(), 2u);
  EXPECT_EQ(seg.runs[0].first_window, 0u);
  EXPECT_EQ(seg.runs[1].first_window, 300u);
  EXPECT_EQ(seg.runs[1].last_window, 440u);
}

TEST(SegmentClips, StrideStillRecoversBoundariesOnGrid) {
  Rng rng(9);
  const auto video = testing::gen_walk(rng, 3000, 48);
  FrameFeatureTrack reel("reel", 48);
  append(reel, excerpt(video, 100, 400));  // 300 frames: last window start 240
  append(reel, excerpt(video, 1000, 1300));
  const auto seg = segment_clips(match_profile(reel, video, 60, 5), 60, 5);
  const std::vector<ClipSpan> want{{100, 400}, {1000, 1300}};
  EXPECT_EQ(seg.clips, want);
}

TEST(SegmentClips, HandBuiltProfile) {
  // Offsets advance by one except for a jump; one high-score window.
  std::vector<WindowMatch> p;
  for (std::size_t k = 0; k < 5; ++k) p.push_back({k, 100 + k, 0.01});
  p.push_back({5, 7, 9.0});
  for (std::size_t k = 6; k < 10; ++k) p.push_back({k, 500 + k, 0.01});
  for (std::size_t k = 10; k < 12; ++k) p.push_back({k, 900 + k, 0.01});
  const auto seg = segment_clips(p, 10, 1, ThresholdPolicy::fixed(1.0));
  const std::vector<ClipSpan> want{{100, 114}, {506, 519}, {910, 921}};
  EXPECT_EQ(seg.clips, want);
  EXPECT_EQ(seg.threshold, 1.0);
}

TEST(SegmentClips, DriftTolerance) {
  std::vector<WindowMatch> p{{0, 100, 0}, {1, 103, 0}, {2, 104, 0}};
  EXPECT_EQ(segment_clips(p, 10, 1, ThresholdPolicy::fixed(1), 2).clips.size(), 1u);
  EXPECT_EQ(segment_clips(p, 10, 1, ThresholdPolicy::fixed(1), 1).clips.size(), 2u);
}

TEST(SegmentClips, RobustThresholdIsMedianPlusKMad) {
  std::vector<WindowMatch> p;
  const double scores[] = {1, 2, 3, 4, 100};
  for (std::size_t k = 0; k < 5; ++k) p.push_back({k, k, scores[k]});
  // median 3, |dev| = {2, 1, 0, 1, 97} -> MAD 1
  EXPECT_DOUBLE_EQ(resolve_threshold(p, ThresholdPolicy::robust(3)), 6.0);
  EXPECT_DOUBLE_EQ(resolve_threshold(p, ThresholdPolicy::fixed(0.5)), 0.5);
}

TEST(SegmentClips, AllAboveThresholdIsDegenerate) {
  std::vector<WindowMatch> p{{0, 0, 5.0}, {1, 1, 6.0}};
  const auto seg = segment_clips(p, 10, 1, ThresholdPolicy::fixed(1.0));
  EXPECT_TRUE(seg.degenerate);
  EXPECT_TRUE(seg.clips.empty());
  EXPECT_THROW(segment_clips(std::vector<WindowMatch>{}, 10), DataError);
}

TEST(Labels, FromClipsMarksExactlyTheClipFrames) {
  Rng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = testing::gen_size(rng, 1, 500);
    const auto clips = testing::gen_intervals(rng, n, 6);
    const auto t = labels_from_clips(clips, n, "v");
    ASSERT_EQ(t.size(), n);
    for (std::size_t f = 0; f < n; ++f) {
      bool in = false;
      for (const auto& c : clips) in = in || (f >= c.start && f < c.end);
      EXPECT_EQ(t[f], in);
    }
  }
  const std::vector<ClipSpan> bad{{5, 20}};
  EXPECT_THROW(labels_from_clips(bad, 10), DataError);
}

TEST(Labels, OverlappingClipsMerge) {
  const std::vector<ClipSpan> clips{{0, 10}, {5, 15}};
  const auto t = labels_from_clips(clips, 20);
  EXPECT_EQ(t.runs(), (std::vector<FrameInterval>{{0, 15}}));
}

TEST(TruncatePositives, KeepsLastQuarter) {
  LabelTrack t("v", 200);
  t.set({0, 100});
  t.set({150, 151});
  t.set({160, 170});
  const auto out = truncate_positives(t);
  const std::vector<FrameInterval> want{{75, 100}, {150, 151}, {167, 170}};
  EXPECT_EQ(out.runs(), want);
}

TEST(TruncatePositives, CountMatchesCeilingRule) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = testing::gen_size(rng, 1, 400);
    const auto t = labels_from_clips(testing::gen_intervals(rng, n, 5), n);
    const double keep = std::max(0.01, uniform01(rng));
    const auto out = truncate_positives(t, keep);
    const auto in_runs = t.runs(), out_runs = out.runs();
    ASSERT_EQ(in_runs.size(), out_runs.size());
    for (std::size_t i = 0; i < in_runs.size(); ++i) {
      // Smallest k with k >= keep * L, found by counting up.
      std::size_t k = 1;
      while (double(k) < keep * double(in_runs[i].length()) - 1e-9) ++k;
      EXPECT_EQ(out_runs[i].end, in_runs[i].end);
      EXPECT_EQ(out_runs[i].length(), std::min(k, in_runs[i].length()));
    }
    for (std::size_t f = 0; f < n; ++f)
      if (out[f]) EXPECT_TRUE(t[f]);
  }
}

TEST(TruncatePositives, RejectsBadFraction) {
  LabelTrack t("v", 10);
  EXPECT_THROW(truncate_positives(t, 0.0), UsageError);
  EXPECT_THROW(truncate_positives(t, 1.5), UsageError);
  EXPECT_EQ(truncate_positives(t, 1.0), t);
}

}  // namespace
}  // namespace hilite
