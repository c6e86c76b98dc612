#pragma once

// Typed review records and their CSV / JSON ingestion.
//
// Review CSV header (any column order, names case-insensitive):
//   paper_id,reviewer_id,recommendation,c1,c2,c3,c4,confidence,award,comments
// confidence, award and comments may be omitted. Meta-review CSV:
//   paper_id,metareviewer_id,recommendation
// JSON input is {"reviews": [...], "meta_reviews": [...]} with the same field
// names, or a bare array of review objects.
//
// Bad records are rejected one by one into ReviewData::rejections; structural
// problems (unreadable file, unknown or missing column) throw.

#include <algorithm>
#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "revcal/common.hpp"
#include "revcal/csv.hpp"
#include "revcal/likert.hpp"

namespace revcal {

struct ReviewForm {
  PaperId paper;
  ReviewerId reviewer;
  Recommendation recommendation = Recommendation::kBorderline;
  std::array<Grade, 4> criteria{Grade::kGood, Grade::kGood, Grade::kGood,
                                Grade::kGood};
  Grade confidence = Grade::kGood;
  bool award = false;
  std::string comments;

  bool operator==(const ReviewForm&) const = default;
};

struct MetaReviewForm {
  PaperId paper;
  MetaReviewerId metareviewer;
  Recommendation recommendation = Recommendation::kBorderline;

  bool operator==(const MetaReviewForm&) const = default;
};

struct AssignmentSet {
  std::vector<std::pair<ReviewerId, PaperId>> review_pairs;
  std::vector<std::pair<MetaReviewerId, PaperId>> meta_pairs;
  std::map<ReviewerId, std::string> reviewer_tags;  // "Rev1".."Rev4"
  std::set<std::pair<ReviewerId, PaperId>> conflicts;
};

struct Rejection {
  std::string source;
  std::size_t line = 0;
  std::string reason;  // short class, e.g. "unknown label"
  std::string detail;
};

struct ReviewData {
  AssignmentSet assignments;
  std::vector<ReviewForm> reviews;
  std::vector<MetaReviewForm> metas;
  std::vector<Rejection> rejections;
  std::vector<std::string> warnings;
};

enum class Format { kCsv, kJson };

struct Finding {
  std::string kind;
  std::string paper;
  std::string reviewer;

  auto operator<=>(const Finding&) const = default;
};

namespace finding {
inline constexpr std::string_view kBelowMinimum = "below minimum reviews";
inline constexpr std::string_view kDuplicate = "duplicate assignment";
inline constexpr std::string_view kDuplicateMeta = "duplicate meta assignment";
inline constexpr std::string_view kNoMeta = "missing meta-review";
inline constexpr std::string_view kConflict = "conflict";
}  // namespace finding

struct ValidationReport {
  std::size_t papers = 0;
  std::size_t reviewers = 0;
  std::size_t metareviewers = 0;
  std::size_t reviews = 0;
  std::size_t meta_reviews = 0;
  std::map<std::size_t, std::size_t> reviews_per_paper;  // count -> papers
  double mean_reviews_per_paper = 0.0;
  std::vector<Finding> findings;
  std::vector<Rejection> rejections;
  std::vector<std::string> warnings;

  std::size_t count(std::string_view kind) const {
    return static_cast<std::size_t>(
        std::count_if(findings.begin(), findings.end(),
                      [&](const Finding& f) { return f.kind == kind; }));
  }
};

inline constexpr std::size_t kMinReviewsPerPaper = 2;

namespace detail {

enum class Column {
  kPaper,
  kReviewer,
  kMetaReviewer,
  kRecommendation,
  kC1,
  kC2,
  kC3,
  kC4,
  kConfidence,
  kAward,
  kComments,
};

struct ColumnSpec {
  std::string_view name;
  Column column;
  bool required;
};

inline constexpr std::array<ColumnSpec, 10> kReviewColumns = {{
    {"paper_id", Column::kPaper, true},
    {"reviewer_id", Column::kReviewer, true},
    {"recommendation", Column::kRecommendation, true},
    {"c1", Column::kC1, true},
    {"c2", Column::kC2, true},
    {"c3", Column::kC3, true},
    {"c4", Column::kC4, true},
    {"confidence", Column::kConfidence, false},
    {"award", Column::kAward, false},
    {"comments", Column::kComments, false},
}};

inline constexpr std::array<ColumnSpec, 3> kMetaColumns = {{
    {"paper_id", Column::kPaper, true},
    {"metareviewer_id", Column::kMetaReviewer, true},
    {"recommendation", Column::kRecommendation, true},
}};

/// Raw field values keyed by column, whatever the source format.
using RawRecord = std::map<Column, std::string>;

template <std::size_t N>
std::vector<Column> map_header(const std::vector<std::string>& header,
                               const std::array<ColumnSpec, N>& specs,
                               const std::string& source) {
  std::vector<Column> cols;
  std::set<Column> seen;
  for (const auto& raw : header) {
    const std::string name = to_lower(trim(raw));
    auto it = std::find_if(specs.begin(), specs.end(),
                           [&](const ColumnSpec& s) { return s.name == name; });
    if (it == specs.end()) {
      throw Error(source + ": unknown column '" + std::string(trim(raw)) + "'");
    }
    if (!seen.insert(it->column).second) {
      throw Error(source + ": duplicate column '" + name + "'");
    }
    cols.push_back(it->column);
  }
  for (const auto& s : specs) {
    if (s.required && !seen.count(s.column)) {
      throw Error(source + ": missing required column '" +
                  std::string(s.name) + "'");
    }
  }
  return cols;
}

struct RecordError {
  std::string reason;
  std::string detail;
};

inline Recommendation need_recommendation(const RawRecord& rec) {
  const auto& text = rec.at(Column::kRecommendation);
  if (auto r = parse_recommendation(text)) return *r;
  throw RecordError{"unknown label",
                    "recommendation '" + std::string(trim(text)) + "'"};
}

inline Grade need_grade(const RawRecord& rec, Column col, std::string_view name) {
  const auto& text = rec.at(col);
  if (auto g = parse_grade(text)) return *g;
  throw RecordError{"unknown label", std::string(name) + " '" +
                                         std::string(trim(text)) + "'"};
}

inline std::string need_id(const RawRecord& rec, Column col,
                           std::string_view name) {
  std::string id(trim(rec.at(col)));
  if (id.empty()) throw RecordError{"empty identifier", std::string(name)};
  return id;
}

inline ReviewForm make_review(const RawRecord& rec, const std::string& where,
                              std::vector<std::string>& warnings) {
  ReviewForm form;
  form.paper = PaperId(need_id(rec, Column::kPaper, "paper_id"));
  form.reviewer = ReviewerId(need_id(rec, Column::kReviewer, "reviewer_id"));
  form.recommendation = need_recommendation(rec);
  form.criteria = {need_grade(rec, Column::kC1, "c1"),
                   need_grade(rec, Column::kC2, "c2"),
                   need_grade(rec, Column::kC3, "c3"),
                   need_grade(rec, Column::kC4, "c4")};
  auto conf = rec.find(Column::kConfidence);
  if (conf == rec.end() || trim(conf->second).empty()) {
    form.confidence = Grade::kGood;
    warnings.push_back(where + ": missing confidence, defaulted to Good");
  } else {
    form.confidence = need_grade(rec, Column::kConfidence, "confidence");
  }
  auto award = rec.find(Column::kAward);
  if (award != rec.end()) {
    const auto v = trim(award->second);
    if (v == "1") {
      form.award = true;
    } else if (v == "0" || v.empty()) {
      form.award = false;
    } else {
      throw RecordError{"invalid award", "award '" + std::string(v) + "'"};
    }
  }
  if (auto c = rec.find(Column::kComments); c != rec.end()) {
    form.comments = c->second;
  }
  return form;
}

inline MetaReviewForm make_meta(const RawRecord& rec) {
  MetaReviewForm form;
  form.paper = PaperId(need_id(rec, Column::kPaper, "paper_id"));
  form.metareviewer =
      MetaReviewerId(need_id(rec, Column::kMetaReviewer, "metareviewer_id"));
  form.recommendation = need_recommendation(rec);
  return form;
}

/// Runs `make` on every record; failures become rejections.
template <class T, class Make>
void ingest(const std::vector<std::pair<std::size_t, RawRecord>>& records,
            const std::string& source, std::vector<T>& out,
            std::vector<Rejection>& rejections, Make make) {
  for (const auto& [line, rec] : records) {
    try {
      out.push_back(make(rec, source + ":" + std::to_string(line)));
    } catch (const RecordError& e) {
      rejections.push_back({source, line, e.reason, e.detail});
    }
  }
}

template <std::size_t N>
std::vector<std::pair<std::size_t, RawRecord>> csv_records(
    std::string_view text, const std::array<ColumnSpec, N>& specs,
    const std::string& source, std::vector<Rejection>& rejections) {
  auto rows = csv::parse(text);
  if (rows.empty()) throw Error(source + ": missing header");
  const auto cols = map_header(rows.front().fields, specs, source);
  std::vector<std::pair<std::size_t, RawRecord>> records;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.fields.size() != cols.size()) {
      rejections.push_back({source, row.line, "wrong field count",
                            std::to_string(row.fields.size()) + " fields, " +
                                std::to_string(cols.size()) + " expected"});
      continue;
    }
    RawRecord rec;
    for (std::size_t c = 0; c < cols.size(); ++c) rec[cols[c]] = row.fields[c];
    records.emplace_back(row.line, std::move(rec));
  }
  return records;
}

template <std::size_t N>
std::vector<std::pair<std::size_t, RawRecord>> json_records(
    const nlohmann::json& array, const std::array<ColumnSpec, N>& specs,
    const std::string& source, std::vector<Rejection>& rejections) {
  if (!array.is_array()) throw Error(source + ": expected a JSON array");
  std::vector<std::pair<std::size_t, RawRecord>> records;
  std::size_t index = 0;
  for (const auto& obj : array) {
    ++index;
    if (!obj.is_object()) {
      rejections.push_back({source, index, "not an object", ""});
      continue;
    }
    RawRecord rec;
    std::vector<std::string> keys;
    for (const auto& [key, value] : obj.items()) keys.push_back(key);
    const auto cols = map_header(keys, specs, source);
    bool ok = true;
    std::size_t k = 0;
    for (const auto& [key, value] : obj.items()) {
      const Column col = cols[k++];
      if (value.is_string()) {
        rec[col] = value.template get<std::string>();
      } else if (value.is_number_integer() || value.is_boolean()) {
        rec[col] = value.is_boolean() ? (value.template get<bool>() ? "1" : "0")
                                      : std::to_string(value.template get<long long>());
      } else if (value.is_null()) {
        rec[col] = "";
      } else {
        rejections.push_back({source, index, "invalid value", key});
        ok = false;
        break;
      }
    }
    if (ok) records.emplace_back(index, std::move(rec));
  }
  return records;
}

inline void rebuild_pairs(ReviewData& data) {
  data.assignments.review_pairs.clear();
  data.assignments.meta_pairs.clear();
  for (const auto& r : data.reviews) {
    data.assignments.review_pairs.emplace_back(r.reviewer, r.paper);
  }
  for (const auto& m : data.metas) {
    data.assignments.meta_pairs.emplace_back(m.metareviewer, m.paper);
  }
}

}  // namespace detail

inline void parse_reviews_csv(std::string_view text, const std::string& source,
                              ReviewData& data) {
  auto records = detail::csv_records(text, detail::kReviewColumns, source,
                                     data.rejections);
  detail::ingest(records, source, data.reviews, data.rejections,
                 [&](const detail::RawRecord& rec, const std::string& where) {
                   return detail::make_review(rec, where, data.warnings);
                 });
  detail::rebuild_pairs(data);
}

inline void parse_meta_csv(std::string_view text, const std::string& source,
                           ReviewData& data) {
  auto records =
      detail::csv_records(text, detail::kMetaColumns, source, data.rejections);
  detail::ingest(records, source, data.metas, data.rejections,
                 [](const detail::RawRecord& rec, const std::string&) {
                   return detail::make_meta(rec);
                 });
  detail::rebuild_pairs(data);
}

inline void parse_json(std::string_view text, const std::string& source,
                       ReviewData& data) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(source + ": " + e.what());
  }
  nlohmann::json reviews = nlohmann::json::array();
  nlohmann::json metas = nlohmann::json::array();
  if (doc.is_array()) {
    reviews = doc;
  } else if (doc.is_object()) {
    for (const auto& [key, value] : doc.items()) {
      if (key == "reviews") {
        reviews = value;
      } else if (key == "meta_reviews") {
        metas = value;
      } else {
        throw Error(source + ": unknown key '" + key + "'");
      }
    }
  } else {
    throw Error(source + ": expected a JSON object or array");
  }
  auto review_records = detail::json_records(
      reviews, detail::kReviewColumns, source + "#reviews", data.rejections);
  detail::ingest(review_records, source + "#reviews", data.reviews,
                 data.rejections,
                 [&](const detail::RawRecord& rec, const std::string& where) {
                   return detail::make_review(rec, where, data.warnings);
                 });
  auto meta_records = detail::json_records(
      metas, detail::kMetaColumns, source + "#meta_reviews", data.rejections);
  detail::ingest(meta_records, source + "#meta_reviews", data.metas,
                 data.rejections,
                 [](const detail::RawRecord& rec, const std::string&) {
                   return detail::make_meta(rec);
                 });
  detail::rebuild_pairs(data);
}

/// Loads reviews (CSV) or a reviews+meta bundle (JSON).
inline ReviewData load_reviews(const std::filesystem::path& path,
                               Format format) {
  ReviewData data;
  const std::string text = csv::read_file(path);
  if (format == Format::kCsv) {
    parse_reviews_csv(text, path.filename().string(), data);
  } else {
    parse_json(text, path.filename().string(), data);
  }
  return data;
}

/// Adds meta-reviews from a separate file to already loaded data.
inline void load_meta_reviews(const std::filesystem::path& path, Format format,
                              ReviewData& data) {
  const std::string text = csv::read_file(path);
  if (format == Format::kCsv) {
    parse_meta_csv(text, path.filename().string(), data);
    return;
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(path.filename().string() + ": " + e.what());
  }
  if (doc.is_array()) doc = nlohmann::json{{"meta_reviews", doc}};
  parse_json(doc.dump(), path.filename().string(), data);
}

/// Two-column CSV `reviewer_id,tag`.
inline void load_reviewer_tags(const std::filesystem::path& path,
                               AssignmentSet& set) {
  auto rows = csv::parse(csv::read_file(path));
  if (rows.empty()) throw Error(path.string() + ": missing header");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].fields.size() != 2) {
      throw Error(path.string() + ":" + std::to_string(rows[i].line) +
                  ": expected reviewer_id,tag");
    }
    set.reviewer_tags[ReviewerId(std::string(trim(rows[i].fields[0])))] =
        std::string(trim(rows[i].fields[1]));
  }
}

/// Two-column CSV `reviewer_id,paper_id`.
inline void load_conflicts(const std::filesystem::path& path,
                           AssignmentSet& set) {
  auto rows = csv::parse(csv::read_file(path));
  if (rows.empty()) throw Error(path.string() + ": missing header");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].fields.size() != 2) {
      throw Error(path.string() + ":" + std::to_string(rows[i].line) +
                  ": expected reviewer_id,paper_id");
    }
    set.conflicts.emplace(ReviewerId(std::string(trim(rows[i].fields[0]))),
                          PaperId(std::string(trim(rows[i].fields[1]))));
  }
}

inline ValidationReport validate(const ReviewData& data) {
  ValidationReport rep;
  std::map<PaperId, std::size_t> per_paper;
  std::map<PaperId, std::size_t> metas_per_paper;
  std::set<ReviewerId> reviewers;
  std::set<MetaReviewerId> metareviewers;
  std::map<std::pair<ReviewerId, PaperId>, std::size_t> pair_count;
  std::map<std::pair<MetaReviewerId, PaperId>, std::size_t> meta_pair_count;

  for (const auto& r : data.reviews) {
    ++per_paper[r.paper];
    reviewers.insert(r.reviewer);
    ++pair_count[{r.reviewer, r.paper}];
  }
  for (const auto& m : data.metas) {
    per_paper.try_emplace(m.paper, 0);
    ++metas_per_paper[m.paper];
    metareviewers.insert(m.metareviewer);
    ++meta_pair_count[{m.metareviewer, m.paper}];
  }

  rep.papers = per_paper.size();
  rep.reviewers = reviewers.size();
  rep.metareviewers = metareviewers.size();
  rep.reviews = data.reviews.size();
  rep.meta_reviews = data.metas.size();
  rep.mean_reviews_per_paper =
      rep.papers == 0 ? 0.0
                      : static_cast<double>(rep.reviews) /
                            static_cast<double>(rep.papers);

  for (const auto& [paper, n] : per_paper) {
    ++rep.reviews_per_paper[n];
    if (n < kMinReviewsPerPaper) {
      rep.findings.push_back({std::string(finding::kBelowMinimum),
                              paper.value, ""});
    }
    if (!metas_per_paper.count(paper)) {
      rep.findings.push_back({std::string(finding::kNoMeta), paper.value, ""});
    }
  }
  for (const auto& [pair, n] : pair_count) {
    if (n > 1) {
      rep.findings.push_back({std::string(finding::kDuplicate),
                              pair.second.value, pair.first.value});
    }
    if (data.assignments.conflicts.count(pair)) {
      rep.findings.push_back({std::string(finding::kConflict),
                              pair.second.value, pair.first.value});
    }
  }
  for (const auto& [pair, n] : meta_pair_count) {
    if (n > 1) {
      rep.findings.push_back({std::string(finding::kDuplicateMeta),
                              pair.second.value, pair.first.value});
    }
  }
  std::sort(rep.findings.begin(), rep.findings.end());

  rep.rejections = data.rejections;
  std::sort(rep.rejections.begin(), rep.rejections.end(),
            [](const Rejection& a, const Rejection& b) {
              return std::tie(a.source, a.line) < std::tie(b.source, b.line);
            });
  rep.warnings = data.warnings;
  return rep;
}

inline nlohmann::json to_json(const ValidationReport& rep) {
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [n, papers] : rep.reviews_per_paper) {
    hist[std::to_string(n)] = papers;
  }
  nlohmann::json findings = nlohmann::json::array();
  for (const auto& f : rep.findings) {
    findings.push_back(
        {{"kind", f.kind}, {"paper_id", f.paper}, {"reviewer_id", f.reviewer}});
  }
  nlohmann::json rejected = nlohmann::json::array();
  for (const auto& r : rep.rejections) {
    rejected.push_back({{"source", r.source},
                        {"line", r.line},
                        {"reason", r.reason},
                        {"detail", r.detail}});
  }
  return {{"papers", rep.papers},
          {"reviewers", rep.reviewers},
          {"metareviewers", rep.metareviewers},
          {"reviews", rep.reviews},
          {"meta_reviews", rep.meta_reviews},
          {"mean_reviews_per_paper", rep.mean_reviews_per_paper},
          {"reviews_per_paper_histogram", hist},
          {"findings", findings},
          {"rejections", rejected},
          {"warnings", rep.warnings}};
}

// ---- canonical export ------------------------------------------------------

inline std::string export_reviews_csv(const std::vector<ReviewForm>& reviews) {
  std::string out;
  csv::write_row(out, {"paper_id", "reviewer_id", "recommendation", "c1", "c2",
                       "c3", "c4", "confidence", "award", "comments"});
  for (const auto& r : reviews) {
    csv::write_row(out, {r.paper.value, r.reviewer.value,
                         std::string(label(r.recommendation)),
                         std::string(label(r.criteria[0])),
                         std::string(label(r.criteria[1])),
                         std::string(label(r.criteria[2])),
                         std::string(label(r.criteria[3])),
                         std::string(label(r.confidence)),
                         r.award ? "1" : "0", r.comments});
  }
  return out;
}

inline std::string export_meta_csv(const std::vector<MetaReviewForm>& metas) {
  std::string out;
  csv::write_row(out, {"paper_id", "metareviewer_id", "recommendation"});
  for (const auto& m : metas) {
    csv::write_row(out, {m.paper.value, m.metareviewer.value,
                         std::string(label(m.recommendation))});
  }
  return out;
}

inline nlohmann::json to_json(const std::vector<ReviewForm>& reviews,
                              const std::vector<MetaReviewForm>& metas) {
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : reviews) {
    rs.push_back({{"paper_id", r.paper.value},
                  {"reviewer_id", r.reviewer.value},
                  {"recommendation", label(r.recommendation)},
                  {"c1", label(r.criteria[0])},
                  {"c2", label(r.criteria[1])},
                  {"c3", label(r.criteria[2])},
                  {"c4", label(r.criteria[3])},
                  {"confidence", label(r.confidence)},
                  {"award", r.award ? 1 : 0},
                  {"comments", r.comments}});
  }
  nlohmann::json ms = nlohmann::json::array();
  for (const auto& m : metas) {
    ms.push_back({{"paper_id", m.paper.value},
                  {"metareviewer_id", m.metareviewer.value},
                  {"recommendation", label(m.recommendation)}});
  }
  return {{"reviews", rs}, {"meta_reviews", ms}};
}

}  // namespace revcal
