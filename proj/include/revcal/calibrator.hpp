#pragma once

// Reviewer bias calibration with a Gaussian latent-variable model.
//
// Each review score decomposes as s = q_paper + b_reviewer + eps, with
//   q ~ N(mu_q, sigma_q^2), b ~ N(0, sigma_b^2), eps ~ N(0, sigma_eps^2).
// Stacking the N reviews, s ~ N(mu_q 1, K) where
//
//   K[e,f] = sigma_q^2 * (same_paper + same_reviewer * bias_ratio
//                         + same_paper * same_reviewer * noise_ratio)
//
// with bias_ratio = sigma_b^2 / sigma_q^2 and noise_ratio = sigma_eps^2 /
// sigma_q^2. For fixed ratios sigma_q^2 has a closed-form maximizer, so the
// likelihood is searched over a 2-D grid of ratios. Bias-free scores
// y = q + eps have covariance K_y = sigma_q^2 same_paper + sigma_eps^2
// same_both and the conditional
//
//   mu_y    = mu_q 1 + K_y K^-1 (s - mu_q 1)
//   Sigma_y = K_y - K_y K^-1 K_y.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "revcal/common.hpp"
#include "revcal/review_data.hpp"
#include "revcal/scoring.hpp"

namespace revcal {

/// Stacked scores with the paper / rater index of every entry. Papers and
/// raters are indexed in sorted id order.
struct CalibrationInputs {
  Eigen::VectorXd scores;
  std::vector<std::size_t> paper;
  std::vector<std::size_t> rater;
  std::vector<double> weight;  // aggregation weight per entry
  std::vector<PaperId> papers;
  std::vector<std::string> raters;

  std::size_t size() const { return paper.size(); }

  /// Labels aligned and in range, every (paper, rater) pair at most once.
  void check_labels() const {
    const auto n = static_cast<std::size_t>(scores.size());
    if (n == 0) throw Error("calibration inputs: no scores");
    if (paper.size() != n || rater.size() != n || weight.size() != n) {
      throw Error("calibration inputs: label vectors not aligned with scores");
    }
    for (std::size_t e = 0; e < n; ++e) {
      if (paper[e] >= papers.size() || rater[e] >= raters.size()) {
        throw Error("calibration inputs: label index out of range");
      }
    }
    // a repeated pair duplicates a row of K and makes it singular
    if (has_duplicate_pairs()) {
      throw Error("calibration inputs: repeated (paper, rater) pair");
    }
  }

  /// Labels valid and at least two scores, as the fit requires.
  void check() const {
    check_labels();
    if (size() < 2) throw Error("calibration needs at least two scores");
  }

  bool has_duplicate_pairs() const {
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (std::size_t e = 0; e < size(); ++e) {
      if (!seen.emplace(paper[e], rater[e]).second) return true;
    }
    return false;
  }
};

namespace detail {

template <class PaperOf, class RaterOf, class ValueOf, class WeightOf>
CalibrationInputs make_inputs(std::size_t n, PaperOf paper_of, RaterOf rater_of,
                              ValueOf value_of, WeightOf weight_of) {
  std::set<PaperId> papers;
  std::set<std::string> raters;
  for (std::size_t i = 0; i < n; ++i) {
    papers.insert(paper_of(i));
    raters.insert(rater_of(i));
  }
  CalibrationInputs in;
  in.papers.assign(papers.begin(), papers.end());
  in.raters.assign(raters.begin(), raters.end());
  std::map<PaperId, std::size_t> pidx;
  std::map<std::string, std::size_t> ridx;
  for (std::size_t i = 0; i < in.papers.size(); ++i) pidx[in.papers[i]] = i;
  for (std::size_t i = 0; i < in.raters.size(); ++i) ridx[in.raters[i]] = i;
  in.scores.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    in.scores[static_cast<Eigen::Index>(i)] = value_of(i);
    in.paper.push_back(pidx.at(paper_of(i)));
    in.rater.push_back(ridx.at(rater_of(i)));
    in.weight.push_back(weight_of(i));
  }
  return in;
}

}  // namespace detail

/// Reviews with per-review values (raw s_rp or dequantized), confidence as
/// the aggregation weight.
inline CalibrationInputs make_calibration_inputs(
    std::span<const ReviewScore> reviews, std::span<const double> values) {
  if (reviews.size() != values.size()) {
    throw Error("calibration: values not aligned with reviews");
  }
  return detail::make_inputs(
      reviews.size(), [&](std::size_t i) { return reviews[i].paper; },
      [&](std::size_t i) { return reviews[i].reviewer.value; },
      [&](std::size_t i) { return values[i]; },
      [&](std::size_t i) { return reviews[i].confidence; });
}

inline CalibrationInputs make_calibration_inputs(
    std::span<const ReviewScore> reviews) {
  std::vector<double> values;
  for (const auto& r : reviews) values.push_back(r.value());
  return make_calibration_inputs(reviews, values);
}

/// Meta-reviews with meta-reviewers in the rater role, equal weights.
inline CalibrationInputs make_calibration_inputs(
    std::span<const MetaReviewForm> metas) {
  return detail::make_inputs(
      metas.size(), [&](std::size_t i) { return metas[i].paper; },
      [&](std::size_t i) { return metas[i].metareviewer.value; },
      [&](std::size_t i) {
        return static_cast<double>(weight(metas[i].recommendation));
      },
      [](std::size_t) { return 1.0; });
}

struct Hyperparams {
  double sigma_q2 = 1.0;
  double bias_ratio = 0.0;   // sigma_b^2 / sigma_q^2
  double noise_ratio = 1.0;  // sigma_eps^2 / sigma_q^2
  double mu_q = 0.0;

  double sigma_b2() const { return bias_ratio * sigma_q2; }
  double sigma_eps2() const { return noise_ratio * sigma_q2; }

  void check() const {
    if (!(sigma_q2 > 0.0)) throw Error("hyperparameters: sigma_q^2 must be > 0");
    if (!(bias_ratio >= 0.0)) {
      throw Error("hyperparameters: bias ratio must be >= 0");
    }
    if (!(noise_ratio > 0.0)) {
      throw Error("hyperparameters: noise ratio must be > 0");
    }
  }
};

/// Scaled covariance K / sigma_q^2.
inline Eigen::MatrixXd build_covariance(std::span<const std::size_t> paper,
                                        std::span<const std::size_t> rater,
                                        double bias_ratio, double noise_ratio) {
  if (paper.size() != rater.size()) {
    throw Error("covariance: label vectors differ in length");
  }
  const auto n = static_cast<Eigen::Index>(paper.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index e = 0; e < n; ++e) {
    for (Eigen::Index f = 0; f < n; ++f) {
      const bool same_paper = paper[e] == paper[f];
      const bool same_rater = rater[e] == rater[f];
      k(e, f) = (same_paper ? 1.0 : 0.0) + (same_rater ? bias_ratio : 0.0) +
                (same_paper && same_rater ? noise_ratio : 0.0);
    }
  }
  return k;
}

inline Eigen::MatrixXd build_covariance(const CalibrationInputs& in,
                                        double bias_ratio, double noise_ratio) {
  return build_covariance(in.paper, in.rater, bias_ratio, noise_ratio);
}

namespace detail {

inline Eigen::LLT<Eigen::MatrixXd> factor_spd(const Eigen::MatrixXd& m,
                                              const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw Error(std::string(what) + ": matrix is not positive definite");
  }
  return llt;
}

inline double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace detail

/// Negative log-likelihood of s under N(mu_q 1, sigma_q2 * k_hat), through a
/// Cholesky factorization of k_hat.
inline double nll(const Eigen::VectorXd& s, const Eigen::MatrixXd& k_hat,
                  double sigma_q2, double mu_q) {
  if (k_hat.rows() != s.size() || k_hat.cols() != s.size()) {
    throw Error("nll: dimension mismatch");
  }
  if (!(sigma_q2 > 0.0)) throw Error("nll: sigma_q^2 must be > 0");
  const auto llt = detail::factor_spd(k_hat, "nll");
  const Eigen::VectorXd r = s.array() - mu_q;
  const double quad = r.dot(llt.solve(r));
  const double n = static_cast<double>(s.size());
  return 0.5 * n * std::log(2.0 * std::numbers::pi * sigma_q2) +
         0.5 * detail::log_det(llt) + quad / (2.0 * sigma_q2);
}

struct SigmaFit {
  double sigma_q2 = 0.0;
  bool degenerate = false;
};

namespace detail {

inline bool zero_residual(const Eigen::VectorXd& r, const Eigen::VectorXd& s) {
  return r.squaredNorm() <= 1e-24 * std::max(1.0, s.squaredNorm());
}

}  // namespace detail

/// sigma_q^2 = r' k_hat^-1 r / N, the stationary point of nll in sigma_q^2.
inline SigmaFit fit_sigma_q(const Eigen::VectorXd& s,
                            const Eigen::MatrixXd& k_hat, double mu_q) {
  const Eigen::VectorXd r = s.array() - mu_q;
  if (detail::zero_residual(r, s)) return {0.0, true};
  const auto llt = detail::factor_spd(k_hat, "fit_sigma_q");
  const double v = r.dot(llt.solve(r)) / static_cast<double>(s.size());
  return {v, !(v > 0.0)};
}

/// Evaluates r' k_hat^-1 r and log|k_hat| through the low-rank structure
/// k_hat = noise * I + U C U' with U = [paper indicators | rater indicators],
/// C = diag(I, bias * I), using Woodbury and the determinant lemma. The
/// factorized matrix is (P + R) square instead of N square. Valid when no
/// (paper, rater) pair repeats; otherwise the noise term is not a multiple
/// of the identity, which check_labels() rules out.
class StructuredLikelihood {
 public:
  explicit StructuredLikelihood(const CalibrationInputs& in)
      : n_(in.size()),
        papers_(in.papers.size()),
        raters_(in.raters.size()),
        paper_(in.paper),
        rater_(in.rater) {
    const auto dim = static_cast<Eigen::Index>(papers_ + raters_);
    gram_ = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t e = 0; e < n_; ++e) {
      const auto p = static_cast<Eigen::Index>(paper_[e]);
      const auto r = static_cast<Eigen::Index>(papers_ + rater_[e]);
      gram_(p, p) += 1.0;
      gram_(r, r) += 1.0;
      gram_(p, r) += 1.0;
      gram_(r, p) += 1.0;
    }
  }

  struct Terms {
    double quad = 0.0;     // r' k_hat^-1 r
    double log_det = 0.0;  // log |k_hat|
  };

  Terms evaluate(const Eigen::VectorXd& r, double bias_ratio,
                 double noise_ratio) const {
    const bool with_raters = bias_ratio > 0.0;
    const auto dim =
        static_cast<Eigen::Index>(papers_ + (with_raters ? raters_ : 0));
    Eigen::VectorXd z = Eigen::VectorXd::Zero(dim);
    for (std::size_t e = 0; e < n_; ++e) {
      const auto ei = static_cast<Eigen::Index>(e);
      z(static_cast<Eigen::Index>(paper_[e])) += r(ei);
      if (with_raters) z(static_cast<Eigen::Index>(papers_ + rater_[e])) += r(ei);
    }
    Eigen::MatrixXd m = gram_.topLeftCorner(dim, dim) / noise_ratio;
    const auto p = static_cast<Eigen::Index>(papers_);
    m.diagonal().head(p).array() += 1.0;
    if (with_raters) m.diagonal().tail(dim - p).array() += 1.0 / bias_ratio;
    const auto llt = detail::factor_spd(m, "structured likelihood");

    Terms t;
    t.quad = (r.squaredNorm() - z.dot(llt.solve(z)) / noise_ratio) / noise_ratio;
    t.log_det = static_cast<double>(n_) * std::log(noise_ratio) +
                detail::log_det(llt);
    if (with_raters) {
      t.log_det += static_cast<double>(raters_) * std::log(bias_ratio);
    }
    return t;
  }

 private:
  std::size_t n_;
  std::size_t papers_;
  std::size_t raters_;
  std::vector<std::size_t> paper_;
  std::vector<std::size_t> rater_;
  Eigen::MatrixXd gram_;
};

struct GridSpec {
  std::vector<double> bias_ratios;
  std::vector<double> noise_ratios;

  /// `points` log-spaced values in [lo, hi] on both axes.
  static GridSpec logarithmic(double lo, double hi, std::size_t points) {
    if (!(lo > 0.0) || !(hi >= lo) || points == 0) {
      throw Error("grid: need 0 < min <= max and at least one point");
    }
    std::vector<double> axis;
    for (std::size_t i = 0; i < points; ++i) {
      const double t =
          points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
      axis.push_back(std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))));
    }
    return {axis, axis};
  }

  static GridSpec standard() { return logarithmic(1e-2, 1e2, 13); }
};

struct GridPoint {
  double bias_ratio = 0.0;
  double noise_ratio = 0.0;
  double sigma_q2 = 0.0;
  double nll = 0.0;
  bool degenerate = false;
};

struct HyperFit {
  Hyperparams best;
  double nll = 0.0;
  std::vector<GridPoint> table;
};

enum class LikelihoodRoute { kStructured, kDense };

/// mu_q = mean(s); for each grid point sigma_q^2 at its closed-form optimum
/// and the NLL there; returns the first grid argmin.
inline HyperFit fit_hyperparams(
    const CalibrationInputs& in, const GridSpec& grid,
    LikelihoodRoute route = LikelihoodRoute::kStructured) {
  in.check();
  if (grid.bias_ratios.empty() || grid.noise_ratios.empty()) {
    throw Error("fit: empty grid");
  }
  const auto n = static_cast<double>(in.size());
  const double mu = in.scores.mean();
  const Eigen::VectorXd r = in.scores.array() - mu;
  const bool flat = detail::zero_residual(r, in.scores);
  std::optional<StructuredLikelihood> structured;
  if (route == LikelihoodRoute::kStructured && !flat) structured.emplace(in);

  HyperFit fit;
  bool found = false;
  for (double b : grid.bias_ratios) {
    for (double e : grid.noise_ratios) {
      if (!(b >= 0.0) || !(e > 0.0)) throw Error("fit: invalid grid value");
      GridPoint gp{b, e};
      if (flat) {
        gp.degenerate = true;
      } else if (route == LikelihoodRoute::kStructured) {
        const auto t = structured->evaluate(r, b, e);
        gp.sigma_q2 = t.quad / n;
        gp.degenerate = !(gp.sigma_q2 > 0.0);
        if (!gp.degenerate) {
          gp.nll = 0.5 * n * std::log(2.0 * std::numbers::pi * gp.sigma_q2) +
                   0.5 * t.log_det + 0.5 * n;
        }
      } else {
        const auto k_hat = build_covariance(in, b, e);
        const auto sf = fit_sigma_q(in.scores, k_hat, mu);
        gp.sigma_q2 = sf.sigma_q2;
        gp.degenerate = sf.degenerate;
        if (!gp.degenerate) gp.nll = nll(in.scores, k_hat, sf.sigma_q2, mu);
      }
      if (!gp.degenerate && (!found || gp.nll < fit.nll)) {
        found = true;
        fit.nll = gp.nll;
        fit.best = {gp.sigma_q2, b, e, mu};
      }
      fit.table.push_back(gp);
    }
  }
  if (!found) throw Error("fit: every grid point is degenerate");
  return fit;
}

struct Posterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Bias-free covariance K_y = sigma_q^2 same_paper + sigma_eps^2 same_both.
inline Eigen::MatrixXd bias_free_covariance(const CalibrationInputs& in,
                                            const Hyperparams& hp) {
  const auto n = static_cast<Eigen::Index>(in.size());
  Eigen::MatrixXd ky(n, n);
  for (Eigen::Index e = 0; e < n; ++e) {
    for (Eigen::Index f = 0; f < n; ++f) {
      const bool same_paper = in.paper[e] == in.paper[f];
      const bool same_rater = in.rater[e] == in.rater[f];
      ky(e, f) = (same_paper ? hp.sigma_q2 : 0.0) +
                 (same_paper && same_rater ? hp.sigma_eps2() : 0.0);
    }
  }
  return ky;
}

inline Posterior posterior(const CalibrationInputs& in, const Hyperparams& hp) {
  in.check_labels();
  hp.check();
  const Eigen::MatrixXd k =
      hp.sigma_q2 * build_covariance(in, hp.bias_ratio, hp.noise_ratio);
  const Eigen::MatrixXd ky = bias_free_covariance(in, hp);
  const auto llt = detail::factor_spd(k, "posterior");
  const Eigen::VectorXd r = in.scores.array() - hp.mu_q;

  Posterior post;
  post.mean = ky * llt.solve(r);
  post.mean.array() += hp.mu_q;
  const Eigen::MatrixXd b = llt.matrixL().solve(ky);
  post.cov = ky - b.transpose() * b;
  post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
  return post;
}

/// Per-paper calibrated scores: weighted mean of the entry values, then
/// normalized to [0, 100].
struct CalibratedPapers {
  std::vector<PaperId> papers;
  std::vector<double> raw;
  std::vector<double> normalized;
};

inline std::vector<double> aggregate_entries(const CalibrationInputs& in,
                                             const Eigen::VectorXd& values) {
  if (static_cast<std::size_t>(values.size()) != in.size()) {
    throw Error("aggregate: values not aligned with calibration inputs");
  }
  std::vector<double> num(in.papers.size(), 0.0);
  std::vector<double> den(in.papers.size(), 0.0);
  for (std::size_t e = 0; e < in.size(); ++e) {
    num[in.paper[e]] += in.weight[e] * values[static_cast<Eigen::Index>(e)];
    den[in.paper[e]] += in.weight[e];
  }
  for (std::size_t p = 0; p < num.size(); ++p) num[p] /= den[p];
  return num;
}

inline CalibratedPapers aggregate_calibrated(const CalibrationInputs& in,
                                             const Eigen::VectorXd& mean,
                                             Diagnostics* diag = nullptr) {
  CalibratedPapers out;
  out.papers = in.papers;
  out.raw = aggregate_entries(in, mean);
  out.normalized = normalize(out.raw, diag);
  return out;
}

struct AcceptanceEstimate {
  std::vector<PaperId> papers;
  std::vector<double> probability;
  std::vector<std::size_t> accepted;  // per paper, out of `samples`
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::size_t slots = 0;  // papers accepted in every draw
};

/// Square root of a PSD matrix via eigendecomposition. Eigenvalues down to
/// -1e-8 * lambda_max are clamped to zero; anything more negative throws.
inline Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw Error("covariance eigensolver failed");
  Eigen::VectorXd ev = es.eigenvalues();
  const double top = std::max(ev.maxCoeff(), 0.0);
  if (ev.minCoeff() < -1e-8 * std::max(top, 1e-300)) {
    throw Error("covariance is not positive semidefinite");
  }
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal();
}

/// Draws conferences from N(mu_y, Sigma_y), aggregates every draw per paper,
/// accepts the top floor(a/100 * P) papers and counts acceptances.
inline AcceptanceEstimate acceptance_probability(const CalibrationInputs& in,
                                                 const Posterior& post,
                                                 const DecisionConfig& cfg,
                                                 std::size_t n_samples,
                                                 std::uint64_t seed) {
  cfg.check();
  if (n_samples == 0) throw Error("acceptance: need at least one sample");
  const auto n = static_cast<Eigen::Index>(in.size());
  if (post.mean.size() != n || post.cov.rows() != n || post.cov.cols() != n) {
    throw Error("acceptance: sampling dimension mismatch");
  }
  const Eigen::MatrixXd factor = psd_factor(post.cov);
  const std::size_t papers = in.papers.size();

  AcceptanceEstimate est;
  est.papers = in.papers;
  est.samples = n_samples;
  est.seed = seed;
  est.slots = acceptance_slots(cfg.acceptance_rate, papers);
  est.accepted.assign(papers, 0);

  std::vector<std::size_t> order(papers);
  Eigen::VectorXd z(n);
  for (std::size_t d = 0; d < n_samples; ++d) {
    std::mt19937_64 rng(mix_seed(seed ^ mix_seed(d)));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
    const Eigen::VectorXd draw = post.mean + factor * z;
    const auto agg = aggregate_entries(in, draw);
    for (std::size_t p = 0; p < papers; ++p) order[p] = p;
    // paper indices follow id order, so index breaks ties deterministically
    std::partial_sort(order.begin(),
                      order.begin() + static_cast<std::ptrdiff_t>(est.slots),
                      order.end(), [&](std::size_t a, std::size_t b) {
                        if (agg[a] != agg[b]) return agg[a] > agg[b];
                        return a < b;
                      });
    for (std::size_t k = 0; k < est.slots; ++k) ++est.accepted[order[k]];
  }
  for (std::size_t p = 0; p < papers; ++p) {
    est.probability.push_back(static_cast<double>(est.accepted[p]) /
                              static_cast<double>(n_samples));
  }
  return est;
}

// ---- end-to-end helpers -------------------------------------------------------

struct ReviewCalibration {
  CalibrationInputs inputs;
  HyperFit fit;
  Posterior post;
  CalibratedPapers papers;
};

inline ReviewCalibration calibrate_reviews(std::span<const ReviewScore> reviews,
                                           std::span<const double> values,
                                           const GridSpec& grid,
                                           Diagnostics* diag = nullptr) {
  ReviewCalibration out;
  out.inputs = make_calibration_inputs(reviews, values);
  out.fit = fit_hyperparams(out.inputs, grid);
  out.post = posterior(out.inputs, out.fit.best);
  out.papers = aggregate_calibrated(out.inputs, out.post.mean, diag);
  return out;
}

struct MetaCalibration {
  std::vector<PaperId> papers;
  std::vector<double> original;    // xi_p
  std::vector<double> calibrated;  // per-paper mean of mu_y
  std::vector<double> normalized;
  bool passthrough = false;
  std::optional<HyperFit> fit;
};

/// Same model with meta-reviewers as raters. When no meta-reviewer handles
/// more than one paper the offsets are unidentifiable and the inputs are
/// returned unchanged with a warning.
inline MetaCalibration calibrate_meta(std::span<const MetaReviewForm> metas,
                                      const GridSpec& grid,
                                      Diagnostics* diag = nullptr) {
  if (metas.empty()) throw Error("meta calibration: no meta-reviews");
  MetaCalibration out;
  const auto xi = meta_scores_by_paper(metas);
  for (const auto& [p, v] : xi) {
    out.papers.push_back(p);
    out.original.push_back(v);
  }

  std::map<MetaReviewerId, std::set<PaperId>> load;
  for (const auto& m : metas) load[m.metareviewer].insert(m.paper);
  const bool identifiable =
      metas.size() >= 2 &&
      std::any_of(load.begin(), load.end(),
                  [](const auto& kv) { return kv.second.size() > 1; });

  auto passthrough = [&](const std::string& why) {
    warn(diag, "meta calibration skipped: " + why);
    out.passthrough = true;
    out.calibrated = out.original;
    out.normalized = normalize(out.original, diag);
    return out;
  };
  if (!identifiable) {
    return passthrough("no meta-reviewer handles more than one paper");
  }
  const auto in = make_calibration_inputs(metas);
  try {
    out.fit = fit_hyperparams(in, grid);
  } catch (const Error& e) {
    return passthrough(e.what());
  }
  const auto post = posterior(in, out.fit->best);
  std::vector<double> num(in.papers.size(), 0.0);
  std::vector<double> cnt(in.papers.size(), 0.0);
  for (std::size_t e = 0; e < in.size(); ++e) {
    num[in.paper[e]] += post.mean[static_cast<Eigen::Index>(e)];
    cnt[in.paper[e]] += 1.0;
  }
  for (std::size_t p = 0; p < num.size(); ++p) {
    out.calibrated.push_back(num[p] / cnt[p]);
  }
  out.normalized = normalize(out.calibrated, diag);
  return out;
}

inline nlohmann::json to_json(const HyperFit& fit) {
  nlohmann::json grid = nlohmann::json::array();
  for (const auto& g : fit.table) {
    grid.push_back({{"bias_ratio", g.bias_ratio},
                    {"noise_ratio", g.noise_ratio},
                    {"sigma_q2", g.sigma_q2},
                    {"nll", g.degenerate ? nlohmann::json(nullptr)
                                         : nlohmann::json(g.nll)},
                    {"degenerate", g.degenerate}});
  }
  const auto& b = fit.best;
  return {{"mu_q", b.mu_q},
          {"sigma_q2", b.sigma_q2},
          {"sigma_b2", b.sigma_b2()},
          {"sigma_eps2", b.sigma_eps2()},
          {"bias_ratio", b.bias_ratio},
          {"noise_ratio", b.noise_ratio},
          {"nll", fit.nll},
          {"grid", grid}};
}

}  // namespace revcal
