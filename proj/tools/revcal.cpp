// revcal: command-line front end for review scoring, calibration,
// assignment and decision reports.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "revcal/revcal.hpp"

namespace fs = std::filesystem;
using namespace revcal;

namespace {

struct Options {
  std::string input;
  std::string meta;
  std::string out = "out";
  std::string format = "csv";
  std::string config;
  std::uint64_t seed = 0;
  double acceptance_rate = 40.0;
  double lambda = 2.0;
  double grid_min = 1e-2;
  double grid_max = 1e2;
  std::size_t grid_points = 13;
  std::size_t samples = 1000;
  std::size_t bins = 20;
  std::string tie_policy = "meta-then-id";
  std::string zero_policy = "continuity";
  bool dequantize = false;
  bool calibrate = false;
  // assign
  std::string tags;
  std::string conflicts;
  std::size_t min_reviewers = 4;
  std::size_t max_load = 8;
  std::size_t max_author = 1;
  std::string author_tag = "Rev2";
};

PipelineConfig to_config(const Options& o) {
  PipelineConfig cfg;
  cfg.reviews = o.input;
  if (!o.meta.empty()) cfg.meta = fs::path(o.meta);
  cfg.out_dir = o.out;
  cfg.format = parse_format(o.format);
  cfg.seed = o.seed;
  cfg.dequantize = o.dequantize;
  cfg.calibrate = o.calibrate;
  cfg.dequant.lambda = o.lambda;
  cfg.grid = {o.grid_min, o.grid_max, o.grid_points};
  cfg.samples = o.samples;
  cfg.bins = o.bins;
  cfg.decision.acceptance_rate = o.acceptance_rate;
  apply_setting(cfg, "tie-policy", o.tie_policy);
  apply_setting(cfg, "zero-score-policy", o.zero_policy);
  if (!o.config.empty()) apply_config_file(cfg, o.config);
  return cfg;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

void emit(const fs::path& path, const std::string& content) {
  write_atomic(path, content);
  std::cout << "wrote " << path.string() << "\n";
}

ReviewData load_all(const PipelineConfig& cfg, bool need_meta) {
  if (!fs::exists(cfg.reviews)) {
    throw Error("input file not found: " + cfg.reviews.string());
  }
  auto data = load_reviews(cfg.reviews, cfg.format);
  if (cfg.meta) {
    load_meta_reviews(*cfg.meta, cfg.format, data);
  } else if (need_meta && cfg.format == Format::kCsv) {
    throw Error("CSV input needs a meta-review file (--meta)");
  }
  return data;
}

int cmd_validate(const Options& o) {
  const auto cfg = to_config(o);
  const auto data = load_all(cfg, false);
  const auto rep = validate(data);
  print_warnings(rep.warnings);
  emit(cfg.out_dir / "validation.json", to_json(rep).dump(2) + "\n");
  std::cout << rep.papers << " papers, " << rep.reviews << " reviews, "
            << rep.meta_reviews << " meta-reviews, mean "
            << format_double(rep.mean_reviews_per_paper)
            << " reviews/paper, " << rep.findings.size() << " findings, "
            << rep.rejections.size() << " rejected rows\n";
  return 0;
}

int cmd_score(const Options& o) {
  auto cfg = to_config(o);
  cfg.dequantize = false;
  cfg.calibrate = false;
  const auto res = run_pipeline(cfg);
  print_warnings(res.warnings);
  for (const auto& f : res.files) std::cout << "wrote " << f.string() << "\n";
  return 0;
}

int cmd_dequantize(const Options& o) {
  const auto cfg = to_config(o);
  cfg.dequant.check();
  const auto data = load_all(cfg, false);
  const auto scores = review_scores(data.reviews);
  const auto dq = dequantize(scores, cfg.dequant);
  std::string out;
  csv::write_row(out, {"paper_id", "reviewer_id", "s_rp", "confidence", "s_dq"});
  for (std::size_t i = 0; i < scores.size(); ++i) {
    csv::write_row(out, {scores[i].paper.value, scores[i].reviewer.value,
                         format_double(scores[i].value()),
                         format_double(scores[i].confidence),
                         format_double(dq.scores[i])});
  }
  print_warnings(data.warnings);
  emit(cfg.out_dir / "reviews_dequantized.csv", out);
  std::cout << "lambda " << format_double(cfg.dequant.lambda) << ", cost "
            << format_double(dq.cost) << "\n";
  return 0;
}

int cmd_calibrate(const Options& o) {
  auto cfg = to_config(o);
  cfg.calibrate = true;
  const auto res = run_pipeline(cfg);
  print_warnings(res.warnings);
  for (const auto& f : res.files) std::cout << "wrote " << f.string() << "\n";
  const auto& hp = res.calibration->fit.best;
  std::cout << "sigma_q2 " << format_double(hp.sigma_q2) << ", bias ratio "
            << format_double(hp.bias_ratio) << ", noise ratio "
            << format_double(hp.noise_ratio) << ", nll "
            << format_double(res.calibration->fit.nll) << "\n";
  return 0;
}

int cmd_rank(const Options& o) {
  const auto cfg = to_config(o);
  const auto table = score_table_from_csv(csv::read_file(cfg.reviews));
  const auto list = rank_and_cut(table, cfg.decision, RankColumn::kSI);
  emit(cfg.out_dir / "decisions.csv", to_csv(list));
  if (table.calibrated()) {
    emit(cfg.out_dir / "decisions_cal.csv",
         to_csv(rank_and_cut(table, cfg.decision, RankColumn::kSICalibrated)));
  }
  std::cout << list.accepted_count() << " of " << table.size()
            << " papers accepted\n";
  return 0;
}

int cmd_report(const Options& o) {
  const auto cfg = to_config(o);
  const auto table = score_table_from_csv(csv::read_file(cfg.reviews));
  const auto by_si = rank_and_cut(table, cfg.decision, RankColumn::kSI);
  GrayAreaReport rep;
  if (table.calibrated()) {
    rep = gray_area(by_si,
                    rank_and_cut(table, cfg.decision, RankColumn::kSICalibrated));
    emit(cfg.out_dir / "gray_area.csv", to_csv(rep));
  } else {
    rep.notice = "score table has no calibrated columns; no gray-area comparison";
    std::cerr << "warning: " << rep.notice << "\n";
  }
  emit(cfg.out_dir / "gray_area.json", to_json(rep).dump(2) + "\n");
  std::cout << rep.agree_accept << " agree-accept, " << rep.agree_reject
            << " agree-reject, " << rep.disagree << " for human review\n";
  return 0;
}

int cmd_assign(const Options& o) {
  if (o.input.empty() || !fs::exists(o.input)) {
    throw Error("similarity file not found: " + o.input);
  }
  auto prob = load_similarity_csv(o.input);
  AssignmentConstraints cons;
  cons.min_reviewers = o.min_reviewers;
  cons.max_papers_per_reviewer = o.max_load;
  cons.max_author_reviewers = o.max_author;
  cons.author_tag = o.author_tag;
  AssignmentSet extra;
  if (!o.tags.empty()) load_reviewer_tags(o.tags, extra);
  if (!o.conflicts.empty()) load_conflicts(o.conflicts, extra);
  prob.tags = extra.reviewer_tags;
  cons.conflicts = extra.conflicts;
  const auto res = assign(prob, cons);
  const fs::path dir = o.out;
  emit(dir / "assignment.csv", to_csv(res));
  emit(dir / "assignment_report.json", to_json(res).dump(2) + "\n");
  for (const auto& s : res.shortfalls) {
    std::cerr << "shortfall: paper " << s.paper.value << " missing " << s.missing
              << " (" << s.binding << ")\n";
  }
  std::cout << res.pairs.size() << " pairs, total similarity "
            << format_double(res.total_similarity) << "\n";
  return res.feasible ? 0 : 3;
}

int cmd_pipeline(const Options& o) {
  const auto cfg = to_config(o);
  const auto res = run_pipeline(cfg);
  print_warnings(res.warnings);
  for (const auto& f : res.files) std::cout << "wrote " << f.string() << "\n";
  std::cout << res.decisions.accepted_count() << " of " << res.table.size()
            << " papers accepted ("
            << format_double(acceptance_rate_percent(
                   res.decisions.accepted_count(), res.table.size()))
            << "%)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conference review scoring, calibration and decision reports"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool needs_meta) {
    sub->add_option("--input,-i", o.input, "Input file")->required();
    if (needs_meta) sub->add_option("--meta", o.meta, "Meta-review CSV");
    sub->add_option("--out,-o", o.out, "Output directory");
    sub->add_option("--format", o.format, "Input format")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--seed", o.seed, "Random seed");
    sub->add_option("--acceptance-rate", o.acceptance_rate, "Percent accepted");
    sub->add_option("--config", o.config,
                    "key = value file; its settings override flags");
  };
  auto scoring = [&](CLI::App* sub) {
    sub->add_option("--tie-policy", o.tie_policy, "meta-then-id or id");
    sub->add_option("--zero-score-policy", o.zero_policy,
                    "continuity or arithmetic");
  };
  auto calibration = [&](CLI::App* sub) {
    sub->add_option("--grid-min", o.grid_min, "Smallest variance ratio");
    sub->add_option("--grid-max", o.grid_max, "Largest variance ratio");
    sub->add_option("--grid-points", o.grid_points, "Points per grid axis");
    sub->add_option("--samples", o.samples, "Monte-Carlo draws");
    sub->add_option("--bins", o.bins, "Histogram bins");
  };

  auto* validate_cmd = app.add_subcommand("validate", "Validate review exports");
  common(validate_cmd, true);

  auto* assign_cmd = app.add_subcommand("assign", "Assign reviewers to papers");
  common(assign_cmd, false);
  assign_cmd->add_option("--tags", o.tags, "reviewer_id,tag CSV");
  assign_cmd->add_option("--conflicts", o.conflicts, "reviewer_id,paper_id CSV");
  assign_cmd->add_option("--min-reviewers", o.min_reviewers, "Reviewers per paper");
  assign_cmd->add_option("--max-load", o.max_load, "Papers per reviewer");
  assign_cmd->add_option("--max-author-reviewers", o.max_author,
                         "Tagged reviewers per paper");
  assign_cmd->add_option("--author-tag", o.author_tag, "Tag of author-reviewers");

  auto* score_cmd = app.add_subcommand("score", "Score and fuse reviews");
  common(score_cmd, true);
  scoring(score_cmd);

  auto* dq_cmd = app.add_subcommand("dequantize", "Dequantize review scores");
  common(dq_cmd, false);
  dq_cmd->add_option("--lambda", o.lambda, "Fidelity weight");

  auto* cal_cmd = app.add_subcommand("calibrate", "Remove reviewer bias");
  common(cal_cmd, true);
  scoring(cal_cmd);
  calibration(cal_cmd);
  cal_cmd->add_flag("--dequantize", o.dequantize, "Dequantize before calibrating");
  cal_cmd->add_option("--lambda", o.lambda, "Fidelity weight");

  auto* rank_cmd = app.add_subcommand("rank", "Rank a score table and cut");
  common(rank_cmd, false);
  scoring(rank_cmd);

  auto* report_cmd = app.add_subcommand("report", "Gray-area report");
  common(report_cmd, false);
  scoring(report_cmd);

  auto* pipe_cmd = app.add_subcommand("pipeline", "Run every stage");
  common(pipe_cmd, true);
  scoring(pipe_cmd);
  calibration(pipe_cmd);
  pipe_cmd->add_flag("--dequantize", o.dequantize, "Enable dequantization");
  pipe_cmd->add_flag("--calibrate", o.calibrate, "Enable calibration");
  pipe_cmd->add_option("--lambda", o.lambda, "Fidelity weight");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate_cmd) return cmd_validate(o);
    if (*assign_cmd) return cmd_assign(o);
    if (*score_cmd) return cmd_score(o);
    if (*dq_cmd) return cmd_dequantize(o);
    if (*cal_cmd) return cmd_calibrate(o);
    if (*rank_cmd) return cmd_rank(o);
    if (*report_cmd) return cmd_report(o);
    if (*pipe_cmd) return cmd_pipeline(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
