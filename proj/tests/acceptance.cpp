// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances and budgets are pinned below.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "fixture5.hpp"
#include "grid_oracle.hpp"
#include "posterior_oracle.hpp"
#include "revcal/revcal.hpp"
#include "synth.hpp"

using namespace revcal;

namespace tol {
constexpr double kScoreExact = 1e-12;
constexpr double kRatePercent = 0.01;
constexpr double kMeanLoad = 0.005;
constexpr double kDequantGrid = 1e-6;
constexpr double kDequantBand = 0.25;
constexpr double kStationarity = 1e-5;
constexpr double kPosterior = 1e-8;
constexpr double kNoBias = 1e-9;
constexpr double kRateBudgetSeconds = 5.0;
constexpr double kDequantBudgetSeconds = 60.0;
constexpr double kBiasBudgetSeconds = 300.0;
}  // namespace tol

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

// ---- criteria ---------------------------------------------------------------

Outcome score_exactness() {
  const auto scores = review_scores(fixture5::reviews());
  double err = 0.0;
  bool lattice = true;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    err = std::max(err, std::abs(scores[i].value() - fixture5::kReviewScores[i]));
    const double s = scores[i].value();
    lattice = lattice && std::floor(2 * s) == 2 * s && s >= -7.0 && s <= 8.0;
  }
  const auto table = build_score_table(scores, fixture5::metas());
  const auto sR = fixture5::expected_sR();
  const auto sM = fixture5::expected_sM();
  const auto si = fixture5::expected_SI();
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& r = table.rows[i];
    err = std::max({err, std::abs(r.s_p - fixture5::kPaperScores[i]),
                    std::abs(r.xi_p - fixture5::kMetaScores[i]),
                    std::abs(r.sR_norm - sR[i]), std::abs(r.sM_norm - sM[i]),
                    std::abs(r.SI - si[i])});
  }
  // every form the scale can express stays on the lattice
  for (int rec = 0; rec < 7; ++rec)
    for (int g = 0; g < 625; ++g)
      for (int aq = 0; aq < 2; ++aq) {
        ReviewForm f;
        f.recommendation = static_cast<Recommendation>(rec);
        int code = g;
        for (auto& c : f.criteria) {
          c = static_cast<Grade>(code % 5);
          code /= 5;
        }
        f.award = aq == 1;
        const auto h = review_score(f).score;
        lattice = lattice && h.count >= kMinReviewScore.count &&
                  h.count <= kMaxReviewScore.count;
      }
  return {err <= tol::kScoreExact && lattice,
          "max abs error " + fmt(err) + " (tol 1e-12), lattice " +
              (lattice ? "ok" : "violated")};
}

/// Reviews CSV with the reported totals: 18,996 reviews over 5,526 papers.
std::filesystem::path write_load_fixture() {
  const auto dir = synth::temp_dir("acceptance_load");
  std::mt19937_64 rng(2025);
  std::uniform_int_distribution<int> rec(0, 6), grade(0, 4);
  std::string reviews;
  csv::write_row(reviews, {"paper_id", "reviewer_id", "recommendation", "c1",
                           "c2", "c3", "c4", "confidence", "award"});
  std::string metas;
  csv::write_row(metas, {"paper_id", "metareviewer_id", "recommendation"});
  const std::size_t papers = 5526;
  const std::size_t four = 18996 - 3 * papers;  // papers with a fourth review
  std::size_t next = 0;
  for (std::size_t p = 0; p < papers; ++p) {
    const std::size_t k = p < four ? 4 : 3;
    for (std::size_t i = 0; i < k; ++i) {
      const auto g = [&] { return std::string(label(static_cast<Grade>(grade(rng)))); };
      csv::write_row(reviews,
                     {synth::pid(p), synth::rid(next++ % 2000),
                      std::string(label(static_cast<Recommendation>(rec(rng)))),
                      g(), g(), g(), g(), g(), "0"});
    }
    csv::write_row(metas, {synth::pid(p), synth::mid(p % 300),
                           std::string(label(static_cast<Recommendation>(rec(rng))))});
  }
  write_atomic(dir / "reviews.csv", reviews);
  write_atomic(dir / "meta.csv", metas);
  return dir;
}

Outcome acceptance_rate(const std::filesystem::path& dir) {
  const auto t0 = Clock::now();
  PipelineConfig cfg;
  cfg.reviews = dir / "reviews.csv";
  cfg.meta = dir / "meta.csv";
  cfg.out_dir = dir / "out";
  const auto res = run_pipeline(cfg);
  const double secs = seconds_since(t0);
  const std::size_t slots = acceptance_slots(40.0, res.table.size());
  const double reported = acceptance_rate_percent(2152, 5526);
  const bool ok = res.table.size() == 5526 && slots == 2210 &&
                  res.decisions.accepted_count() == 2210 &&
                  std::abs(reported - 38.94) <= tol::kRatePercent &&
                  secs < tol::kRateBudgetSeconds;
  return {ok, "P=" + std::to_string(res.table.size()) + ", slots " +
                  std::to_string(slots) + ", accepted " +
                  std::to_string(res.decisions.accepted_count()) +
                  ", 2152/5526 = " + fmt(reported) + "% (tol 0.01), full run " +
                  fmt(secs) + " s (budget 5 s)"};
}

Outcome review_load(const std::filesystem::path& dir) {
  auto data = load_reviews(dir / "reviews.csv", Format::kCsv);
  load_meta_reviews(dir / "meta.csv", Format::kCsv, data);
  const auto rep = validate(data);
  const bool ok = rep.reviews == 18996 && rep.papers == 5526 &&
                  std::abs(rep.mean_reviews_per_paper - 3.44) <= tol::kMeanLoad;
  return {ok, std::to_string(rep.reviews) + " reviews / " +
                  std::to_string(rep.papers) + " papers = " +
                  fmt(rep.mean_reviews_per_paper) + " (target 3.44 +- 0.005)"};
}

Outcome dequantization() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> half(-14, 16), papers_d(1, 3), reviews_d(1, 4);
  std::uniform_real_distribution<double> lam(0.0, 5.0);
  double worst_gap = -1e300;
  for (int t = 0; t < 100; ++t) {
    const double lambda = t % 4 == 0 ? 2.0 : lam(rng);
    DequantConfig cfg;
    cfg.lambda = lambda;
    std::vector<ReviewScore> reviews;
    const int np = papers_d(rng);
    for (int p = 0; p < np; ++p) {
      const int nr = reviews_d(rng);
      for (int r = 0; r < nr; ++r) {
        ReviewScore s;
        s.paper = PaperId(synth::pid(static_cast<std::size_t>(p)));
        s.reviewer = ReviewerId(synth::rid(static_cast<std::size_t>(r)));
        s.score = HalfSteps{half(rng)};
        reviews.push_back(s);
      }
    }
    const auto res = dequantize(reviews, cfg);
    // the cost separates over papers, so the joint grid minimum is the sum
    double grid = 0.0;
    for (int p = 0; p < np; ++p) {
      std::vector<double> s;
      for (const auto& r : reviews) {
        if (r.paper.value == synth::pid(static_cast<std::size_t>(p))) s.push_back(r.value());
      }
      grid += oracle::grid_min_cost(s, lambda, 0.25, 0.01);
    }
    worst_gap = std::max(worst_gap, res.cost - grid);
  }
  double worst_move = 0.0;
  std::uniform_real_distribution<double> lam_wide(0.0, 50.0);
  for (int t = 0; t < 100000; ++t) {
    DequantConfig cfg;
    cfg.lambda = t % 10 == 0 ? 0.0 : lam_wide(rng);
    std::vector<double> s(static_cast<std::size_t>(1 + t % 8));
    for (auto& x : s) x = 0.5 * half(rng);
    const auto x = dequantize_group(s, cfg);
    for (std::size_t i = 0; i < s.size(); ++i) {
      worst_move = std::max(worst_move, std::abs(x[i] - s[i]));
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = worst_gap <= tol::kDequantGrid &&
                  worst_move <= tol::kDequantBand + 1e-12 &&
                  secs < tol::kDequantBudgetSeconds;
  return {ok, "max(cost - grid cost) " + fmt(worst_gap) +
                  " over 100 instances (tol 1e-6), max |s_dq - s| " +
                  fmt(worst_move) + " over 1e5 instances, " + fmt(secs) +
                  " s (budget 60 s)"};
}

/// Random design with at most `max_n` entries and no repeated pair.
CalibrationInputs random_design(std::mt19937_64& rng, std::size_t max_n) {
  std::uniform_int_distribution<std::size_t> n_d(2, max_n);
  const std::size_t target = n_d(rng);
  const std::size_t raters = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
  std::normal_distribution<double> normal(0.0, 1.5);
  std::vector<ReviewScore> reviews;
  std::vector<double> values;
  std::size_t p = 0;
  while (reviews.size() < target) {
    std::vector<std::size_t> pool(raters);
    std::iota(pool.begin(), pool.end(), 0);
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, raters)(rng);
    for (std::size_t i = 0; i < k && reviews.size() < target; ++i) {
      ReviewScore s;
      s.paper = PaperId(synth::pid(p));
      s.reviewer = ReviewerId(synth::rid(pool[i]));
      s.confidence = 1.0;
      reviews.push_back(s);
      values.push_back(normal(rng));
    }
    ++p;
  }
  return make_calibration_inputs(reviews, values);
}

Outcome stationarity() {
  std::mt19937_64 rng(88);
  const auto grid = GridSpec::standard();
  std::uniform_int_distribution<std::size_t> pick(0, grid.bias_ratios.size() - 1);
  double worst = 0.0;
  std::size_t checked = 0;
  for (int t = 0; t < 50; ++t) {
    const auto in = random_design(rng, 200);
    const double b = grid.bias_ratios[pick(rng)];
    const double e = grid.noise_ratios[pick(rng)];
    const auto k = build_covariance(in, b, e);
    const double mu = in.scores.mean();
    const auto fit = fit_sigma_q(in.scores, k, mu);
    if (fit.degenerate) continue;
    ++checked;
    const double v = fit.sigma_q2;
    const double h = 1e-4 * v;
    const double deriv =
        (nll(in.scores, k, v + h, mu) - nll(in.scores, k, v - h, mu)) / (2 * h);
    // relative to N / (2 sigma_q^2), the size of either term of the derivative
    const double scale = static_cast<double>(in.size()) / (2.0 * v);
    worst = std::max(worst, std::abs(deriv) / scale);
  }
  return {checked == 50 && worst < tol::kStationarity,
          std::to_string(checked) + " instances (N <= 200), max relative d nll / d sigma_q^2 " +
              fmt(worst) + " (tol 1e-5)"};
}

Outcome posterior_desk_scale() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  double worst = 0.0;
  double worst_nobias = 0.0;
  for (int t = 0; t < 500; ++t) {
    const auto in = random_design(rng, 6);
    const Hyperparams hp{u(rng), u(rng), u(rng), in.scores.mean() + u(rng) - 2.5};
    const auto post = posterior(in, hp);
    const auto bf = oracle::brute_force_posterior(in, hp);
    worst = std::max({worst, (post.mean - bf.mean).cwiseAbs().maxCoeff(),
                      (post.cov - bf.cov).cwiseAbs().maxCoeff()});
    Hyperparams flat = hp;
    flat.bias_ratio = 0.0;
    const auto nb = posterior(in, flat);
    worst_nobias = std::max(worst_nobias, (nb.mean - in.scores).cwiseAbs().maxCoeff());
  }
  return {worst <= tol::kPosterior && worst_nobias <= tol::kNoBias,
          "500 instances (N <= 6): max |diff| vs brute force " + fmt(worst) +
              " (tol 1e-8); sigma_b = 0 max |mu_y - s| " + fmt(worst_nobias) +
              " (tol 1e-9)"};
}

Outcome bias_recovery() {
  const auto t0 = Clock::now();
  const auto grid = GridSpec::standard();
  int wins = 0;
  double raw_sum = 0.0, cal_sum = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto c = synth::continuous(200, 50, 4, 1.0, 0.3, 1000 + seed);
    const auto fit = fit_hyperparams(c.inputs, grid);
    const auto post = posterior(c.inputs, fit.best);
    const auto raw = aggregate_entries(c.inputs, c.inputs.scores);
    const auto cal = aggregate_entries(c.inputs, post.mean);
    const double t_raw = synth::kendall_tau(raw, c.quality);
    const double t_cal = synth::kendall_tau(cal, c.quality);
    raw_sum += t_raw;
    cal_sum += t_cal;
    wins += t_cal > t_raw;
  }
  const double secs = seconds_since(t0);
  return {wins >= 95 && secs < tol::kBiasBudgetSeconds,
          "calibrated tau > raw tau in " + std::to_string(wins) +
              "/100 seeds (need 95); mean tau raw " + fmt(raw_sum / 100) +
              ", calibrated " + fmt(cal_sum / 100) + "; " + fmt(secs) +
              " s (budget 300 s)"};
}

Outcome sampling_identity() {
  const auto c = synth::continuous(150, 40, 3, 0.8, 0.4, 5);
  const auto fit = fit_hyperparams(c.inputs, GridSpec::standard());
  const auto post = posterior(c.inputs, fit.best);
  bool ok = true;
  std::size_t slots = 0;
  for (double rate : {40.0, 25.0, 33.3}) {
    DecisionConfig cfg;
    cfg.acceptance_rate = rate;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto est = acceptance_probability(c.inputs, post, cfg, 1000, seed);
      std::size_t total = 0;
      for (auto a : est.accepted) total += a;
      ok = ok && total == est.slots * 1000 && est.samples == 1000 &&
           est.slots == acceptance_slots(rate, 150);
      if (rate == 40.0) slots = est.slots;
    }
  }
  return {ok, "30 runs (3 rates x 10 seeds), 1000 samples each: sum of "
              "acceptance counts = floor(a/100 P) * 1000 in every run (a=40: " +
                  std::to_string(slots) + " slots)"};
}

Outcome gray_area_partition() {
  std::mt19937_64 rng(11);
  bool ok = true;
  auto list = [](std::size_t n, const std::vector<bool>& acc) {
    DecisionList d;
    for (std::size_t i = 0; i < n; ++i) {
      d.entries.push_back({i + 1, PaperId(synth::pid(i)), 0.0, acc[i]});
    }
    return d;
  };
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + static_cast<std::size_t>(t % 60);
    std::bernoulli_distribution coin(0.4);
    std::vector<bool> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = coin(rng);
      b[i] = coin(rng);
    }
    const auto rep = gray_area(list(n, a), list(n, b));
    std::size_t sym = 0;
    for (std::size_t i = 0; i < n; ++i) sym += a[i] != b[i];
    ok = ok && rep.size() == n &&
         rep.agree_accept + rep.agree_reject + rep.disagree == n &&
         rep.disagree == sym;
  }
  // one paper swapped across the cutoff
  std::size_t swaps_ok = 0;
  for (std::size_t n = 2; n <= 50; ++n) {
    const std::size_t k = acceptance_slots(40.0, n);
    if (k == 0 || k == n) continue;
    std::vector<bool> a(n, false);
    for (std::size_t i = 0; i < k; ++i) a[i] = true;
    auto b = a;
    b[k - 1] = false;
    b[k] = true;
    swaps_ok += gray_area(list(n, a), list(n, b)).disagree == 2;
    ok = ok && gray_area(list(n, a), list(n, b)).disagree == 2;
  }
  return {ok, "1000 random list pairs partition the papers; " +
                  std::to_string(swaps_ok) + " single swaps give exactly 2 disagreements"};
}

Outcome assignment() {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t ok_count = 0;
  double worst_gain = 1e300;
  for (int t = 0; t < 100; ++t) {
    const std::size_t papers = 5 + static_cast<std::size_t>(t % 30);
    const std::size_t reviewers = papers + 5 + static_cast<std::size_t>(t % 20);
    AssignmentProblem prob;
    AssignmentConstraints cons;  // min 4, max load 8, at most 1 Rev2
    for (std::size_t p = 0; p < papers; ++p) prob.papers.emplace_back(synth::pid(p));
    std::vector<std::size_t> plain;
    for (std::size_t r = 0; r < reviewers; ++r) {
      prob.reviewers.emplace_back(synth::rid(r));
      if (u(rng) < 0.3) {
        prob.tags[ReviewerId(synth::rid(r))] = "Rev2";
      } else {
        plain.push_back(r);
      }
    }
    // a planted feasible assignment over non-authors, loads <= 8
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    std::size_t next = 0;
    for (std::size_t p = 0; p < papers; ++p) {
      for (int k = 0; k < 4; ++k) pairs.emplace(plain[next++ % plain.size()], p);
    }
    for (std::size_t p = 0; p < papers; ++p) {
      for (std::size_t r = 0; r < reviewers; ++r) {
        if (pairs.count({r, p})) continue;
        const double x = u(rng);
        if (x < 0.3) {
          pairs.emplace(r, p);
        } else if (x < 0.36) {
          pairs.emplace(r, p);
          cons.conflicts.emplace(ReviewerId(synth::rid(r)), PaperId(synth::pid(p)));
        }
      }
    }
    for (const auto& [r, p] : pairs) {
      std::optional<double> tpms;
      if (u(rng) < 0.8) tpms = u(rng);
      prob.candidates.push_back(
          {ReviewerId(synth::rid(r)), PaperId(synth::pid(p)), {u(rng), u(rng), tpms}});
    }
    const auto greedy = greedy_assign(prob, cons);
    const auto res = assign(prob, cons);
    // independent audit of the three hard constraints
    std::map<std::string, std::size_t> per_paper, authors;
    std::size_t conflicts = 0;
    for (const auto& a : res.pairs) {
      ++per_paper[a.paper.value];
      authors[a.paper.value] += prob.tags.count(a.reviewer);
      conflicts += cons.conflicts.count({a.reviewer, a.paper});
    }
    bool good = res.feasible && res.report.all_pass() && conflicts == 0 &&
                per_paper.size() == papers;
    for (const auto& [p, n] : per_paper) good = good && n >= 4;
    for (const auto& [p, n] : authors) good = good && n <= 1;
    good = good && res.total_similarity >= greedy.total_similarity - 1e-9;
    worst_gain = std::min(worst_gain, res.total_similarity - greedy.total_similarity);
    ok_count += good;
  }
  return {ok_count == 100, std::to_string(ok_count) +
                               "/100 feasible instances satisfy min-4, <=1 Rev2, "
                               "no conflicts; min(objective - greedy) " +
                               fmt(worst_gain)};
}

Outcome figure_shape() {
  const auto dir = synth::temp_dir("acceptance_fig2");
  synth::write_conference(synth::conference(500, 150, 3, 25, 2024), dir);
  PipelineConfig cfg;
  cfg.reviews = dir / "reviews.csv";
  cfg.meta = dir / "meta.csv";
  cfg.out_dir = dir / "out";
  cfg.calibrate = true;
  cfg.seed = 1;
  const auto res = run_pipeline(cfg);
  const auto& prob = res.acceptance->probability;
  const auto& score = res.calibration->papers.raw;
  const double rho = synth::spearman(score, prob);
  std::vector<std::size_t> order(score.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return score[a] < score[b]; });
  double low = 0, high = 0;
  std::size_t band = 0;
  for (std::size_t i = 0; i < 100; ++i) low += prob[order[i]] / 100;
  for (std::size_t i = 400; i < 500; ++i) high += prob[order[i]] / 100;
  for (std::size_t i = 250; i < 350; ++i) band += prob[order[i]] > 0.05 && prob[order[i]] < 0.95;
  return {rho > 0.9 && low < 0.05 && high > 0.95 && band > 10,
          "500 papers: Spearman " + fmt(rho) + " (need > 0.9), mean p bottom fifth " +
              fmt(low) + ", top fifth " + fmt(high) + ", " + std::to_string(band) +
              " papers in (0.05, 0.95) around the cut"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  std::filesystem::path load_dir;
  const std::vector<Criterion> criteria = {
      {"score pipeline exactness", score_exactness},
      {"acceptance-rate reproduction",
       [&] {
         load_dir = write_load_fixture();
         return acceptance_rate(load_dir);
       }},
      {"review-load statistic", [&] { return review_load(load_dir); }},
      {"dequantization optimality", dequantization},
      {"calibration stationarity", stationarity},
      {"posterior correctness at desk scale", posterior_desk_scale},
      {"bias recovery", bias_recovery},
      {"sampling identity", sampling_identity},
      {"gray-area partition", gray_area_partition},
      {"assignment constraints", assignment},
      {"acceptance-probability shape (qualitative)", figure_shape},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
