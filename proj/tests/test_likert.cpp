#include <gtest/gtest.h>

#include "revcal/likert.hpp"

using namespace revcal;

TEST(Likert, RecommendationWeights) {
  EXPECT_EQ(encode_likert("Strong Accept", Scale::kRecommendation).value(), 3.0);
  EXPECT_EQ(encode_likert("Borderline", Scale::kRecommendation).value(), 0.0);
  EXPECT_EQ(encode_likert("Strong Reject", Scale::kRecommendation).value(), -3.0);
  EXPECT_EQ(encode_likert("Weak Reject", Scale::kRecommendation).value(), -1.0);
}

TEST(Likert, CriterionAndConfidence) {
  EXPECT_EQ(encode_likert("Excellent", Scale::kCriterion).value(), 1.0);
  EXPECT_EQ(encode_likert("Excellent", Scale::kConfidence).value(), 1.2);
  EXPECT_EQ(encode_likert("Fair", Scale::kCriterion).value(), -0.5);
  EXPECT_EQ(encode_likert("Poor", Scale::kConfidence).value(), 0.8);
}

TEST(Likert, LabelsAreCaseAndSpaceInsensitive) {
  EXPECT_EQ(encode_likert("  strong ACCEPT ", Scale::kRecommendation).value(), 3.0);
  EXPECT_EQ(encode_likert("very GOOD", Scale::kCriterion).value(), 0.5);
}

TEST(Likert, UnknownLabelThrows) {
  EXPECT_THROW(encode_likert("Maybe", Scale::kRecommendation), Error);
  EXPECT_THROW(encode_likert("Accept", Scale::kCriterion), Error);
  EXPECT_THROW(encode_likert("Excellent", Scale::kRecommendation), Error);
}

TEST(Likert, LabelRoundTrip) {
  for (int i = 0; i < 7; ++i) {
    const auto r = static_cast<Recommendation>(i);
    EXPECT_EQ(parse_recommendation(label(r)), r);
    EXPECT_EQ(weight(r), 3 - i);
  }
  for (int i = 0; i < 5; ++i) {
    const auto g = static_cast<Grade>(i);
    EXPECT_EQ(parse_grade(label(g)), g);
    EXPECT_DOUBLE_EQ(criterion_weight(g).value(), 1.0 - 0.5 * i);
    EXPECT_DOUBLE_EQ(confidence_weight(g), 1.2 - 0.1 * i);
  }
}
