#pragma once

// Likert scales of the review form and their numeric weights.
//
//   recommendation (7 points): Strong Accept .. Strong Reject -> +3 .. -3
//   criterion      (5 points): Excellent .. Poor              -> +1 .. -1 step 0.5
//   confidence     (5 points): Excellent .. Poor              -> 1.2 .. 0.8 step 0.1
//
// Weights are exact rationals. Review scores live on a 0.5 lattice, so they
// are carried as an integer count of half steps until aggregation.

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "revcal/common.hpp"

namespace revcal {

enum class Recommendation {
  kStrongAccept,
  kAccept,
  kWeakAccept,
  kBorderline,
  kWeakReject,
  kReject,
  kStrongReject,
};

/// Five-level grade shared by the quality criteria and the confidence item.
enum class Grade { kExcellent, kVeryGood, kGood, kFair, kPoor };

enum class Scale { kRecommendation, kCriterion, kConfidence };

struct Rational {
  int num = 0;
  int den = 1;

  double value() const { return static_cast<double>(num) / den; }
  bool operator==(const Rational&) const = default;
};

/// A score on the 0.5 lattice, stored as 2*value.
struct HalfSteps {
  int count = 0;

  double value() const { return count / 2.0; }
  HalfSteps operator+(HalfSteps o) const { return {count + o.count}; }
  auto operator<=>(const HalfSteps&) const = default;
};

namespace detail {

inline constexpr std::array<std::string_view, 7> kRecommendationLabels = {
    "Strong Accept", "Accept", "Weak Accept", "Borderline",
    "Weak Reject",   "Reject", "Strong Reject"};
inline constexpr std::array<int, 7> kRecommendationWeights = {3,  2,  1, 0,
                                                              -1, -2, -3};

inline constexpr std::array<std::string_view, 5> kGradeLabels = {
    "Excellent", "Very good", "Good", "Fair", "Poor"};
// criterion weights in half steps
inline constexpr std::array<int, 5> kCriterionHalfSteps = {2, 1, 0, -1, -2};
// confidence weights in tenths
inline constexpr std::array<int, 5> kConfidenceTenths = {12, 11, 10, 9, 8};

template <std::size_t N>
std::optional<std::size_t> match_label(
    std::string_view label, const std::array<std::string_view, N>& labels) {
  const std::string key = to_lower(trim(label));
  for (std::size_t i = 0; i < N; ++i) {
    if (to_lower(labels[i]) == key) return i;
  }
  return std::nullopt;
}

}  // namespace detail

/// Case-insensitive after trimming; anything else is unknown.
inline std::optional<Recommendation> parse_recommendation(
    std::string_view label) {
  if (auto i = detail::match_label(label, detail::kRecommendationLabels)) {
    return static_cast<Recommendation>(*i);
  }
  return std::nullopt;
}

inline std::optional<Grade> parse_grade(std::string_view label) {
  if (auto i = detail::match_label(label, detail::kGradeLabels)) {
    return static_cast<Grade>(*i);
  }
  return std::nullopt;
}

inline std::string_view label(Recommendation r) {
  return detail::kRecommendationLabels[static_cast<std::size_t>(r)];
}

inline std::string_view label(Grade g) {
  return detail::kGradeLabels[static_cast<std::size_t>(g)];
}

inline int weight(Recommendation r) {
  return detail::kRecommendationWeights[static_cast<std::size_t>(r)];
}

inline HalfSteps criterion_weight(Grade g) {
  return {detail::kCriterionHalfSteps[static_cast<std::size_t>(g)]};
}

inline double confidence_weight(Grade g) {
  return detail::kConfidenceTenths[static_cast<std::size_t>(g)] / 10.0;
}

/// Table lookup for a label on the named scale. Throws on unknown labels.
inline Rational encode_likert(std::string_view text, Scale scale) {
  switch (scale) {
    case Scale::kRecommendation:
      if (auto r = parse_recommendation(text)) return {weight(*r), 1};
      break;
    case Scale::kCriterion:
      if (auto g = parse_grade(text)) return {criterion_weight(*g).count, 2};
      break;
    case Scale::kConfidence:
      if (auto g = parse_grade(text)) {
        return {detail::kConfidenceTenths[static_cast<std::size_t>(*g)], 10};
      }
      break;
  }
  throw Error("unknown label '" + std::string(text) + "'");
}

}  // namespace revcal
