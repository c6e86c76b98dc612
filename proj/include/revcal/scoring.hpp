#pragma once

// Review scores, per-paper aggregation, [0,100] normalization, the
// harmonic-mean score index and the acceptance-rate cutoff.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "revcal/common.hpp"
#include "revcal/csv.hpp"
#include "revcal/likert.hpp"
#include "revcal/review_data.hpp"

namespace revcal {

struct ReviewScore {
  PaperId paper;
  ReviewerId reviewer;
  HalfSteps score;          // s_rp on the 0.5 lattice, in [-7, 8]
  double confidence = 1.0;  // R_c, used only as an aggregation weight

  double value() const { return score.value(); }
};

inline constexpr HalfSteps kMinReviewScore{-14};
inline constexpr HalfSteps kMaxReviewScore{16};

/// s_rp = S + C1 + C2 + C3 + C4 + AQ. Confidence is carried, not added.
inline ReviewScore review_score(const ReviewForm& form) {
  HalfSteps s{2 * weight(form.recommendation)};
  for (Grade c : form.criteria) s = s + criterion_weight(c);
  if (form.award) s = s + HalfSteps{2};
  return {form.paper, form.reviewer, s, confidence_weight(form.confidence)};
}

inline std::vector<ReviewScore> review_scores(
    const std::vector<ReviewForm>& forms) {
  std::vector<ReviewScore> out;
  out.reserve(forms.size());
  for (const auto& f : forms) out.push_back(review_score(f));
  return out;
}

inline double weighted_mean(std::span<const double> values,
                            std::span<const double> weights) {
  if (values.empty()) throw Error("weighted mean of an empty list");
  if (values.size() != weights.size()) {
    throw Error("weighted mean: values and weights differ in length");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    num += weights[i] * values[i];
    den += weights[i];
  }
  return num / den;
}

/// Confidence-weighted mean of one paper's review scores.
inline double paper_score(std::span<const ReviewScore> reviews) {
  if (reviews.empty()) throw Error("paper score: no reviews");
  std::vector<double> values;
  std::vector<double> weights;
  for (const auto& r : reviews) {
    values.push_back(r.value());
    weights.push_back(r.confidence);
  }
  return weighted_mean(values, weights);
}

/// Unweighted mean of one paper's meta-review recommendations.
inline double meta_score(std::span<const MetaReviewForm> metas) {
  if (metas.empty()) throw Error("meta score: no meta-reviews");
  double sum = 0.0;
  for (const auto& m : metas) sum += weight(m.recommendation);
  return sum / static_cast<double>(metas.size());
}

/// Per-paper confidence-weighted mean of `values` (aligned with `reviews`).
/// Passing the reviews' own scores reproduces paper_score for every paper.
inline std::map<PaperId, double> aggregate_by_paper(
    std::span<const ReviewScore> reviews, std::span<const double> values) {
  if (reviews.size() != values.size()) {
    throw Error("aggregate: values not aligned with reviews");
  }
  std::map<PaperId, std::pair<double, double>> acc;
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    auto& [num, den] = acc[reviews[i].paper];
    num += reviews[i].confidence * values[i];
    den += reviews[i].confidence;
  }
  std::map<PaperId, double> out;
  for (const auto& [p, nd] : acc) out.emplace(p, nd.first / nd.second);
  return out;
}

inline std::map<PaperId, double> aggregate_by_paper(
    std::span<const ReviewScore> reviews) {
  std::vector<double> values;
  values.reserve(reviews.size());
  for (const auto& r : reviews) values.push_back(r.value());
  return aggregate_by_paper(reviews, values);
}

inline std::map<PaperId, double> meta_scores_by_paper(
    std::span<const MetaReviewForm> metas) {
  std::map<PaperId, std::vector<MetaReviewForm>> groups;
  for (const auto& m : metas) groups[m.paper].push_back(m);
  std::map<PaperId, double> out;
  for (const auto& [p, g] : groups) out.emplace(p, meta_score(g));
  return out;
}

/// 100 * (v - min) / (max - min). A constant vector maps to 50 everywhere
/// and records a warning.
inline std::vector<double> normalize(std::span<const double> v,
                                     Diagnostics* diag = nullptr) {
  if (v.empty()) throw Error("normalize: empty vector");
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  std::vector<double> out(v.size());
  if (hi == lo) {
    warn(diag, "normalize: constant input, all values mapped to 50");
    std::fill(out.begin(), out.end(), 50.0);
    return out;
  }
  const double range = hi - lo;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = 100.0 * (v[i] - lo) / range;
  }
  // pin the extremes exactly
  out[static_cast<std::size_t>(lo_it - v.begin())] = 0.0;
  out[static_cast<std::size_t>(hi_it - v.begin())] = 100.0;
  return out;
}

enum class ZeroScorePolicy {
  kContinuity,          // harmonic mean with SI(0, x) = 0
  kArithmeticFallback,  // arithmetic mean whenever either input is 0
};

/// Harmonic mean 2ab/(a+b); SI(0,0) = 0.
inline double score_index(double sR, double sM,
                          ZeroScorePolicy policy = ZeroScorePolicy::kContinuity) {
  if (sR == 0.0 || sM == 0.0) {
    return policy == ZeroScorePolicy::kArithmeticFallback ? (sR + sM) / 2.0
                                                          : 0.0;
  }
  return 2.0 * sR * sM / (sR + sM);
}

inline std::vector<double> score_index(
    std::span<const double> sR, std::span<const double> sM,
    ZeroScorePolicy policy = ZeroScorePolicy::kContinuity) {
  if (sR.size() != sM.size()) throw Error("score index: length mismatch");
  std::vector<double> out(sR.size());
  for (std::size_t i = 0; i < sR.size(); ++i) {
    out[i] = score_index(sR[i], sM[i], policy);
  }
  return out;
}

struct PaperRow {
  PaperId paper;
  double s_p = 0.0;
  double xi_p = 0.0;
  double sR_norm = 0.0;
  double sM_norm = 0.0;
  double SI = 0.0;
  std::optional<double> sR_cal;
  std::optional<double> sM_cal;
  std::optional<double> SI_cal;
};

/// One row per paper, ordered by PaperId.
struct ScoreTable {
  std::vector<PaperRow> rows;

  std::size_t size() const { return rows.size(); }
  bool calibrated() const {
    return !rows.empty() && rows.front().SI_cal.has_value();
  }
  std::vector<PaperId> papers() const {
    std::vector<PaperId> out;
    for (const auto& r : rows) out.push_back(r.paper);
    return out;
  }
};

/// Builds the table from per-paper reviewer and meta aggregates. Both maps
/// must cover the same papers.
inline ScoreTable make_score_table(
    const std::map<PaperId, double>& reviewer_scores,
    const std::map<PaperId, double>& meta_scores,
    ZeroScorePolicy policy = ZeroScorePolicy::kContinuity,
    Diagnostics* diag = nullptr) {
  for (const auto& [p, _] : reviewer_scores) {
    if (!meta_scores.count(p)) {
      throw Error("paper '" + p.value + "' has reviews but no meta-review");
    }
  }
  for (const auto& [p, _] : meta_scores) {
    if (!reviewer_scores.count(p)) {
      throw Error("paper '" + p.value + "' has a meta-review but no reviews");
    }
  }
  if (reviewer_scores.empty()) throw Error("score table: no papers");
  ScoreTable table;
  std::vector<double> s;
  std::vector<double> xi;
  for (const auto& [p, v] : reviewer_scores) {
    table.rows.push_back(PaperRow{p, v, meta_scores.at(p)});
    s.push_back(v);
    xi.push_back(meta_scores.at(p));
  }
  const auto sR = normalize(s, diag);
  const auto sM = normalize(xi, diag);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    table.rows[i].sR_norm = sR[i];
    table.rows[i].sM_norm = sM[i];
    table.rows[i].SI = score_index(sR[i], sM[i], policy);
  }
  return table;
}

inline ScoreTable build_score_table(
    std::span<const ReviewScore> reviews, std::span<const MetaReviewForm> metas,
    ZeroScorePolicy policy = ZeroScorePolicy::kContinuity,
    Diagnostics* diag = nullptr) {
  return make_score_table(aggregate_by_paper(reviews),
                          meta_scores_by_paper(metas), policy, diag);
}

/// Fills the calibrated columns from normalized calibrated reviewer and meta
/// scores aligned with `table.rows`.
inline void attach_calibrated(
    ScoreTable& table, std::span<const double> sR_cal,
    std::span<const double> sM_cal,
    ZeroScorePolicy policy = ZeroScorePolicy::kContinuity) {
  if (sR_cal.size() != table.size() || sM_cal.size() != table.size()) {
    throw Error("calibrated columns not aligned with the score table");
  }
  for (std::size_t i = 0; i < table.size(); ++i) {
    table.rows[i].sR_cal = sR_cal[i];
    table.rows[i].sM_cal = sM_cal[i];
    table.rows[i].SI_cal = score_index(sR_cal[i], sM_cal[i], policy);
  }
}

// ---- decisions ---------------------------------------------------------------

enum class TiePolicy {
  kMetaThenId,  // higher normalized meta score, then PaperId ascending
  kIdOnly,
};

struct DecisionConfig {
  double acceptance_rate = 40.0;  // percent, in (0, 100]
  TiePolicy tie = TiePolicy::kMetaThenId;
  ZeroScorePolicy zero = ZeroScorePolicy::kContinuity;

  void check() const {
    if (!(acceptance_rate > 0.0 && acceptance_rate <= 100.0)) {
      throw Error("acceptance rate must lie in (0, 100]");
    }
  }
};

/// floor(a/100 * P), robust to the binary representation of a.
inline std::size_t acceptance_slots(double rate_percent, std::size_t papers) {
  const double exact = rate_percent * static_cast<double>(papers) / 100.0;
  return static_cast<std::size_t>(std::floor(exact + 1e-9));
}

/// Percentage of `papers` represented by `accepted`.
inline double acceptance_rate_percent(std::size_t accepted,
                                      std::size_t papers) {
  if (papers == 0) throw Error("acceptance rate of zero papers");
  return 100.0 * static_cast<double>(accepted) / static_cast<double>(papers);
}

struct Decision {
  std::size_t rank = 0;  // 1-based
  PaperId paper;
  double score = 0.0;
  bool accepted = false;
};

struct DecisionList {
  std::vector<Decision> entries;  // rank order

  std::size_t accepted_count() const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(),
                      [](const Decision& d) { return d.accepted; }));
  }
  std::map<PaperId, bool> by_paper() const {
    std::map<PaperId, bool> out;
    for (const auto& d : entries) out.emplace(d.paper, d.accepted);
    return out;
  }
};

enum class RankColumn { kSI, kSICalibrated };

/// Sorts by score descending under the tie policy and accepts the top
/// floor(a/100 * P) papers.
inline DecisionList rank_and_cut(const ScoreTable& table,
                                 const DecisionConfig& cfg,
                                 RankColumn column = RankColumn::kSI) {
  cfg.check();
  struct Key {
    double score;
    double meta;
    const PaperId* paper;
  };
  std::vector<Key> keys;
  keys.reserve(table.size());
  for (const auto& r : table.rows) {
    if (column == RankColumn::kSI) {
      keys.push_back({r.SI, r.sM_norm, &r.paper});
    } else {
      if (!r.SI_cal) throw Error("rank: calibrated columns missing");
      keys.push_back({*r.SI_cal, r.sM_cal.value_or(r.sM_norm), &r.paper});
    }
  }
  const bool use_meta = cfg.tie == TiePolicy::kMetaThenId;
  std::stable_sort(keys.begin(), keys.end(), [&](const Key& a, const Key& b) {
    if (a.score != b.score) return a.score > b.score;
    if (use_meta && a.meta != b.meta) return a.meta > b.meta;
    return *a.paper < *b.paper;
  });
  const std::size_t slots = acceptance_slots(cfg.acceptance_rate, keys.size());
  DecisionList out;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    out.entries.push_back({i + 1, *keys[i].paper, keys[i].score, i < slots});
  }
  return out;
}

// ---- export ------------------------------------------------------------------

inline std::string to_csv(const ScoreTable& table) {
  std::string out;
  const bool cal = table.calibrated();
  std::vector<std::string> header = {"paper_id", "s_p",     "xi_p",
                                     "sR_norm",  "sM_norm", "SI"};
  if (cal) {
    header.insert(header.end(), {"sR_cal", "sM_cal", "SI_cal"});
  }
  csv::write_row(out, header);
  for (const auto& r : table.rows) {
    std::vector<std::string> row = {
        r.paper.value,           format_double(r.s_p),
        format_double(r.xi_p),   format_double(r.sR_norm),
        format_double(r.sM_norm), format_double(r.SI)};
    if (cal) {
      row.push_back(format_double(r.sR_cal.value()));
      row.push_back(format_double(r.sM_cal.value()));
      row.push_back(format_double(r.SI_cal.value()));
    }
    csv::write_row(out, row);
  }
  return out;
}

inline ScoreTable score_table_from_csv(std::string_view text) {
  auto rows = csv::parse(text);
  if (rows.empty()) throw Error("score table: missing header");
  const auto& header = rows.front().fields;
  const std::vector<std::string> base = {"paper_id", "s_p",     "xi_p",
                                         "sR_norm",  "sM_norm", "SI"};
  std::vector<std::string> with_cal = base;
  with_cal.insert(with_cal.end(), {"sR_cal", "sM_cal", "SI_cal"});
  std::vector<std::string> got;
  for (const auto& h : header) got.emplace_back(trim(h));
  const bool cal = got == with_cal;
  if (!cal && got != base) {
    throw Error("score table: unexpected header");
  }
  ScoreTable table;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    if (f.size() != got.size()) {
      throw Error("score table line " + std::to_string(rows[i].line) +
                  ": wrong field count");
    }
    PaperRow r;
    r.paper = PaperId(std::string(trim(f[0])));
    r.s_p = parse_double(f[1], "s_p");
    r.xi_p = parse_double(f[2], "xi_p");
    r.sR_norm = parse_double(f[3], "sR_norm");
    r.sM_norm = parse_double(f[4], "sM_norm");
    r.SI = parse_double(f[5], "SI");
    if (cal) {
      r.sR_cal = parse_double(f[6], "sR_cal");
      r.sM_cal = parse_double(f[7], "sM_cal");
      r.SI_cal = parse_double(f[8], "SI_cal");
    }
    table.rows.push_back(std::move(r));
  }
  return table;
}

inline nlohmann::json to_json(const ScoreTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) {
    nlohmann::json j = {{"paper_id", r.paper.value}, {"s_p", r.s_p},
                        {"xi_p", r.xi_p},            {"sR_norm", r.sR_norm},
                        {"sM_norm", r.sM_norm},      {"SI", r.SI}};
    if (r.SI_cal) {
      j["sR_cal"] = *r.sR_cal;
      j["sM_cal"] = *r.sM_cal;
      j["SI_cal"] = *r.SI_cal;
    }
    rows.push_back(std::move(j));
  }
  return rows;
}

inline std::string to_csv(const DecisionList& list) {
  std::string out;
  csv::write_row(out, {"rank", "paper_id", "SI", "decision"});
  for (const auto& d : list.entries) {
    csv::write_row(out, {std::to_string(d.rank), d.paper.value,
                         format_double(d.score),
                         d.accepted ? "accept" : "reject"});
  }
  return out;
}

}  // namespace revcal
