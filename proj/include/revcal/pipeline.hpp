#pragma once

// End-to-end decision pipeline:
//   load -> score -> [dequantize] -> [calibrate] -> fuse -> rank -> report
// Every artifact is written atomically and is a pure function of the
// configuration (including the seed).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "revcal/calibrator.hpp"
#include "revcal/common.hpp"
#include "revcal/csv.hpp"
#include "revcal/dequantizer.hpp"
#include "revcal/reports.hpp"
#include "revcal/review_data.hpp"
#include "revcal/scoring.hpp"

namespace revcal {

struct GridConfig {
  double min = 1e-2;
  double max = 1e2;
  std::size_t points = 13;

  GridSpec spec() const { return GridSpec::logarithmic(min, max, points); }
};

struct PipelineConfig {
  std::filesystem::path reviews;
  std::optional<std::filesystem::path> meta;  // CSV input needs one
  Format format = Format::kCsv;
  std::filesystem::path out_dir = "out";
  bool dequantize = false;
  bool calibrate = false;
  DequantConfig dequant;
  GridConfig grid;
  DecisionConfig decision;
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  std::size_t bins = 20;

  void check() const {
    if (!std::filesystem::exists(reviews)) {
      throw Error("input file not found: " + reviews.string());
    }
    if (meta && !std::filesystem::exists(*meta)) {
      throw Error("meta-review file not found: " + meta->string());
    }
    if (format == Format::kCsv && !meta) {
      throw Error("CSV input needs a meta-review file (--meta)");
    }
    dequant.check();
    decision.check();
    if (samples == 0) throw Error("samples must be >= 1");
  }
};

inline Format parse_format(const std::string& s) {
  const auto v = to_lower(trim(s));
  if (v == "csv") return Format::kCsv;
  if (v == "json") return Format::kJson;
  throw Error("unknown format '" + s + "' (csv|json)");
}

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
  const auto s = to_lower(trim(v));
  if (s == "true" || s == "on" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "off" || s == "no" || s == "0") return false;
  throw Error("config: '" + key + "' expects true/false, got '" + v + "'");
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
  const double d = parse_double(v, key);
  if (d < 0 || d != static_cast<double>(static_cast<std::size_t>(d))) {
    throw Error("config: '" + key + "' expects a non-negative integer");
  }
  return static_cast<std::size_t>(d);
}

}  // namespace detail

/// Applies one `key = value` setting; keys are the CLI long-flag names.
inline void apply_setting(PipelineConfig& cfg, const std::string& key,
                          const std::string& value) {
  if (key == "input") {
    cfg.reviews = value;
  } else if (key == "meta") {
    cfg.meta = std::filesystem::path(value);
  } else if (key == "out") {
    cfg.out_dir = value;
  } else if (key == "format") {
    cfg.format = parse_format(value);
  } else if (key == "seed") {
    cfg.seed = std::stoull(value);
  } else if (key == "acceptance-rate") {
    cfg.decision.acceptance_rate = parse_double(value, key);
  } else if (key == "tie-policy") {
    const auto v = to_lower(value);
    if (v == "meta-then-id") {
      cfg.decision.tie = TiePolicy::kMetaThenId;
    } else if (v == "id") {
      cfg.decision.tie = TiePolicy::kIdOnly;
    } else {
      throw Error("config: tie-policy must be meta-then-id or id");
    }
  } else if (key == "zero-score-policy") {
    const auto v = to_lower(value);
    if (v == "continuity") {
      cfg.decision.zero = ZeroScorePolicy::kContinuity;
    } else if (v == "arithmetic") {
      cfg.decision.zero = ZeroScorePolicy::kArithmeticFallback;
    } else {
      throw Error("config: zero-score-policy must be continuity or arithmetic");
    }
  } else if (key == "dequantize") {
    cfg.dequantize = detail::parse_bool(key, value);
  } else if (key == "calibrate") {
    cfg.calibrate = detail::parse_bool(key, value);
  } else if (key == "lambda") {
    cfg.dequant.lambda = parse_double(value, key);
  } else if (key == "grid-min") {
    cfg.grid.min = parse_double(value, key);
  } else if (key == "grid-max") {
    cfg.grid.max = parse_double(value, key);
  } else if (key == "grid-points") {
    cfg.grid.points = detail::parse_count(key, value);
  } else if (key == "samples") {
    cfg.samples = detail::parse_count(key, value);
  } else if (key == "bins") {
    cfg.bins = detail::parse_count(key, value);
  } else {
    throw Error("config: unknown key '" + key + "'");
  }
}

/// Parses `key = value` lines; '#' starts a comment, blank lines are ignored.
inline std::vector<std::pair<std::string, std::string>> parse_config(
    std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error("config line " + std::to_string(line_no) + ": expected key = value");
    }
    out.emplace_back(std::string(trim(line.substr(0, eq))),
                     std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

inline void apply_config_file(PipelineConfig& cfg,
                              const std::filesystem::path& path) {
  for (const auto& [k, v] : parse_config(csv::read_file(path))) {
    apply_setting(cfg, k, v);
  }
}

struct PipelineResult {
  ValidationReport validation;
  std::vector<ReviewScore> reviews;
  std::vector<double> review_values;  // after optional dequantization
  std::optional<DequantResult> dequant;
  std::optional<ReviewCalibration> calibration;
  std::optional<MetaCalibration> meta_calibration;
  std::optional<AcceptanceEstimate> acceptance;
  ScoreTable table;
  DecisionList decisions;
  std::optional<DecisionList> calibrated_decisions;
  GrayAreaReport gray;
  std::vector<std::string> warnings;
  std::vector<std::filesystem::path> files;
};

namespace detail {

template <class F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw Error(std::string("stage '") + name + "': " + e.what());
  }
}

inline std::string review_level_csv(const PipelineResult& r) {
  std::string out;
  std::vector<std::string> header = {"paper_id", "reviewer_id", "s_rp",
                                     "confidence"};
  if (r.dequant) header.push_back("s_dq");
  if (r.calibration) header.push_back("mu_y");
  csv::write_row(out, header);
  // the calibration inputs keep review order
  for (std::size_t i = 0; i < r.reviews.size(); ++i) {
    const auto& s = r.reviews[i];
    std::vector<std::string> row = {s.paper.value, s.reviewer.value,
                                    format_double(s.value()),
                                    format_double(s.confidence)};
    if (r.dequant) row.push_back(format_double(r.dequant->scores[i]));
    if (r.calibration) {
      row.push_back(format_double(
          r.calibration->post.mean[static_cast<Eigen::Index>(i)]));
    }
    csv::write_row(out, row);
  }
  return out;
}

}  // namespace detail

inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  detail::stage("config", [&] {
    cfg.check();
    return 0;
  });
  PipelineResult res;
  Diagnostics diag;

  auto data = detail::stage("load", [&] {
    auto d = load_reviews(cfg.reviews, cfg.format);
    if (cfg.meta) load_meta_reviews(*cfg.meta, cfg.format, d);
    return d;
  });
  res.validation = validate(data);

  detail::stage("score", [&] {
    res.reviews = review_scores(data.reviews);
    for (const auto& r : res.reviews) res.review_values.push_back(r.value());
    return 0;
  });

  if (cfg.dequantize) {
    detail::stage("dequantize", [&] {
      res.dequant = dequantize(res.reviews, cfg.dequant);
      res.review_values = res.dequant->scores;
      return 0;
    });
  }

  detail::stage("fuse", [&] {
    res.table = make_score_table(aggregate_by_paper(res.reviews, res.review_values),
                                 meta_scores_by_paper(data.metas),
                                 cfg.decision.zero, &diag);
    return 0;
  });

  if (cfg.calibrate) {
    detail::stage("calibrate", [&] {
      const auto grid = cfg.grid.spec();
      res.calibration = calibrate_reviews(res.reviews, res.review_values, grid, &diag);
      res.meta_calibration = calibrate_meta(data.metas, grid, &diag);
      res.acceptance = acceptance_probability(res.calibration->inputs,
                                              res.calibration->post, cfg.decision,
                                              cfg.samples, cfg.seed);
      // both calibrated vectors follow PaperId order, as does the table
      if (res.calibration->papers.papers != res.table.papers() ||
          res.meta_calibration->papers != res.table.papers()) {
        throw Error("calibrated papers do not match the score table");
      }
      attach_calibrated(res.table, res.calibration->papers.normalized,
                        res.meta_calibration->normalized, cfg.decision.zero);
      return 0;
    });
  }

  detail::stage("rank", [&] {
    res.decisions = rank_and_cut(res.table, cfg.decision, RankColumn::kSI);
    if (cfg.calibrate) {
      res.calibrated_decisions =
          rank_and_cut(res.table, cfg.decision, RankColumn::kSICalibrated);
    }
    return 0;
  });

  detail::stage("report", [&] {
    if (res.calibrated_decisions) {
      res.gray = gray_area(res.decisions, *res.calibrated_decisions);
    } else {
      res.gray.notice = "calibration disabled; no gray-area comparison";
    }
    res.warnings = data.warnings;
    res.warnings.insert(res.warnings.end(), diag.warnings.begin(),
                        diag.warnings.end());

    const auto& dir = cfg.out_dir;
    auto put = [&](const std::string& name, const std::string& content) {
      write_atomic(dir / name, content);
      res.files.push_back(dir / name);
    };
    put("validation.json", to_json(res.validation).dump(2) + "\n");
    put("reviews_scored.csv", detail::review_level_csv(res));
    put("score_table.csv", to_csv(res.table));
    put("score_table.json", to_json(res.table).dump(2) + "\n");
    put("decisions.csv", to_csv(res.decisions));
    put("gray_area.json", to_json(res.gray).dump(2) + "\n");
    if (res.calibrated_decisions) {
      put("decisions_cal.csv", to_csv(*res.calibrated_decisions));
      put("gray_area.csv", to_csv(res.gray));
      nlohmann::json fit = {{"reviews", to_json(res.calibration->fit)}};
      fit["meta_reviews"] = res.meta_calibration->fit
                                ? to_json(*res.meta_calibration->fit)
                                : nlohmann::json(nullptr);
      fit["meta_passthrough"] = res.meta_calibration->passthrough;
      fit["acceptance"] = {{"samples", res.acceptance->samples},
                           {"seed", res.acceptance->seed},
                           {"slots", res.acceptance->slots}};
      put("calibration_fit.json", fit.dump(2) + "\n");

      PlotData plot;
      const auto& mu = res.calibration->post.mean;
      plot.calibrated_review_scores.assign(mu.data(), mu.data() + mu.size());
      plot.papers = res.calibration->papers.papers;
      plot.paper_calibrated = res.calibration->papers.raw;
      plot.acceptance = res.acceptance->probability;
      plot.meta_papers = res.meta_calibration->papers;
      plot.meta_original = res.meta_calibration->original;
      plot.meta_calibrated = res.meta_calibration->calibrated;
      plot.bins = cfg.bins;
      for (auto& f : emit_plots(plot, dir)) res.files.push_back(std::move(f));
    }
    nlohmann::json summary = {
        {"papers", res.table.size()},
        {"acceptance_rate", cfg.decision.acceptance_rate},
        {"accepted", res.decisions.accepted_count()},
        {"dequantize", cfg.dequantize},
        {"calibrate", cfg.calibrate},
        {"seed", cfg.seed},
        {"warnings", res.warnings}};
    put("summary.json", summary.dump(2) + "\n");
    return 0;
  });
  return res;
}

}  // namespace revcal
