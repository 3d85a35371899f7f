#include <gtest/gtest.h>

#include "hilite/evalkit.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

namespace hilite {
namespace {

TEST(FScore, HarmonicMeanOnPercentScale) {
  EXPECT_NEAR(f_score(0.77, 0.72), 74.4161, 1e-4);
  EXPECT_DOUBLE_EQ(f_score(1.0, 1.0), 100.0);
  EXPECT_DOUBLE_EQ(f_score(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(f_score(0.5, 0.0), 0.0);
}

TEST(Evaluate, HandCountedExample) {
  LabelTrack gt("v", 10), pred("v", 10);
  gt.set({0, 4});
  pred.set({2, 7});
  const auto r = evaluate(gt, pred);
  EXPECT_EQ(r.tp, 2u);
  EXPECT_EQ(r.fp, 3u);
  EXPECT_EQ(r.fn, 2u);
  EXPECT_DOUBLE_EQ(r.precision, 0.4);
  EXPECT_DOUBLE_EQ(r.recall, 0.5);
}

TEST(Evaluate, EmptyPredictionScoresZero) {
  LabelTrack gt("v", 5), pred("v", 5);
  gt.set({1, 2});
  const auto r = evaluate(gt, pred);
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.f_score, 0.0);
}

TEST(Evaluate, AgreesWithSetOracle) {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = testing::gen_size(rng, 1, 400);
    const auto gt = testing::gen_labels(rng, n, uniform01(rng));
    const auto pred = testing::gen_labels(rng, n, uniform01(rng));
    const auto got = evaluate(gt, pred);
    const auto want = testing::set_scores(gt, pred);
    EXPECT_NEAR(got.precision, want.precision, 1e-12);
    EXPECT_NEAR(got.recall, want.recall, 1e-12);
    EXPECT_NEAR(got.f_score, want.f, 1e-9);
  }
}

TEST(Evaluate, LengthMismatchNamesBothLengths) {
  try {
    evaluate(LabelTrack("clip", 10), LabelTrack("clip", 12));
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("10"), std::string::npos);
    EXPECT_NE(msg.find("12"), std::string::npos);
    EXPECT_NE(msg.find("clip"), std::string::npos);
  }
}

TEST(Report, MacroAveragesAndMicroPools) {
  const std::vector<VideoEval> per{{"a", from_counts(9, 1, 0)}, {"b", from_counts(1, 0, 9)}};
  const auto rep = report(per);
  EXPECT_DOUBLE_EQ(rep.macro.precision, 0.95);
  EXPECT_DOUBLE_EQ(rep.macro.recall, 0.55);
  EXPECT_NEAR(rep.macro.f_score, (f_score(0.9, 1.0) + f_score(1.0, 0.1)) / 2, 1e-12);
  EXPECT_DOUBLE_EQ(rep.micro.precision, 10.0 / 11.0);
  EXPECT_DOUBLE_EQ(rep.micro.recall, 10.0 / 19.0);
  EXPECT_EQ(rep.micro.tp, 10u);
  EXPECT_THROW(report(std::vector<VideoEval>{}), DataError);
}

TEST(Report, JsonAndTextCarryEveryVideo) {
  const std::vector<VideoEval> per{{"a", from_counts(3, 1, 2)}, {"b", from_counts(0, 0, 4)}};
  const auto rep = report(per);
  const auto j = to_json(rep);
  EXPECT_EQ(j["videos"].size(), 2u);
  EXPECT_EQ(j["videos"][1]["video_id"], "b");
  EXPECT_EQ(j["micro"]["tp"], 3);
  const auto text = format_text(rep);
  EXPECT_NE(text.find("video=a precision=0.7500"), std::string::npos);
  EXPECT_NE(text.find("aggregate=micro"), std::string::npos);
}

}  // namespace
}  // namespace hilite
