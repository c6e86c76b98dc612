#include <gtest/gtest.h>

#include <random>

#include "posterior_oracle.hpp"
#include "revcal/calibrator.hpp"
#include "synth.hpp"

using namespace revcal;

namespace {

CalibrationInputs inputs(std::vector<double> s, std::vector<std::size_t> paper,
                         std::vector<std::size_t> rater) {
  CalibrationInputs in;
  in.scores = Eigen::Map<Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
  in.paper = paper;
  in.rater = rater;
  in.weight.assign(s.size(), 1.0);
  const auto np = *std::max_element(paper.begin(), paper.end()) + 1;
  const auto nr = *std::max_element(rater.begin(), rater.end()) + 1;
  for (std::size_t p = 0; p < np; ++p) in.papers.emplace_back(synth::pid(p));
  for (std::size_t r = 0; r < nr; ++r) in.raters.push_back(synth::rid(r));
  return in;
}

/// Random design without repeated (paper, rater) pairs.
CalibrationInputs random_inputs(std::mt19937_64& rng, std::size_t max_n) {
  std::uniform_int_distribution<std::size_t> np_d(1, std::max<std::size_t>(1, max_n / 2));
  const std::size_t np = np_d(rng);
  const std::size_t nr = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
  std::normal_distribution<double> normal(0.0, 2.0);
  std::vector<double> s;
  std::vector<std::size_t> paper, rater;
  for (std::size_t p = 0; p < np && s.size() < max_n; ++p) {
    std::vector<std::size_t> pool(nr);
    std::iota(pool.begin(), pool.end(), 0);
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, nr)(rng);
    for (std::size_t i = 0; i < k && s.size() < max_n; ++i) {
      s.push_back(normal(rng));
      paper.push_back(p);
      rater.push_back(pool[i]);
    }
  }
  // relabel so that every index is used
  std::map<std::size_t, std::size_t> pm, rm;
  for (auto& p : paper) p = pm.try_emplace(p, pm.size()).first->second;
  for (auto& r : rater) r = rm.try_emplace(r, rm.size()).first->second;
  return inputs(s, paper, rater);
}

}  // namespace

TEST(Covariance, SmallCases) {
  const std::vector<std::size_t> p1 = {0}, r1 = {0};
  EXPECT_DOUBLE_EQ(build_covariance(p1, r1, 0.3, 0.7)(0, 0), 2.0);

  const std::vector<std::size_t> p = {0, 0, 1, 2}, r = {0, 1, 2, 0};
  const auto k = build_covariance(p, r, 0.5, 0.25);
  EXPECT_EQ(k(0, 1), 1.0);   // same paper, different raters
  EXPECT_EQ(k(1, 2), 0.0);   // nothing shared
  EXPECT_EQ(k(0, 3), 0.5);   // same rater, different papers
  EXPECT_EQ(k(2, 2), 1.75);
  EXPECT_TRUE(k.isApprox(k.transpose()));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j) EXPECT_LT(k(i, j), k(i, i));
}

TEST(Nll, ScalarValue) {
  Eigen::VectorXd s(1);
  s << 0.7;
  Eigen::MatrixXd k(1, 1);
  k << 1.0;
  EXPECT_NEAR(nll(s, k, 1.0, 0.7), 0.5 * std::log(2 * std::numbers::pi), 1e-15);
}

TEST(Nll, Homogeneity) {
  std::mt19937_64 rng(2);
  auto in = random_inputs(rng, 12);
  const auto k = build_covariance(in, 0.4, 0.6);
  const double mu = in.scores.mean();
  const double a = nll(in.scores, k, 1.3, mu);
  Eigen::VectorXd scaled = (2.0 * (in.scores.array() - mu) + mu).matrix();
  const double b = nll(scaled, k, 4 * 1.3, mu);
  // only the log(2 pi sigma^2) term changes: by N/2 log 4
  EXPECT_NEAR(b - a, 0.5 * static_cast<double>(in.size()) * std::log(4.0), 1e-9);
}

TEST(FitSigma, IdentityIsSecondMoment) {
  Eigen::VectorXd s(4);
  s << -1.5, 0.5, 2.0, -1.0;
  const auto f = fit_sigma_q(s, Eigen::MatrixXd::Identity(4, 4), 0.0);
  EXPECT_NEAR(f.sigma_q2, s.squaredNorm() / 4, 1e-15);
  EXPECT_FALSE(f.degenerate);
  const auto flat = fit_sigma_q(Eigen::VectorXd::Constant(3, 2.0),
                                Eigen::MatrixXd::Identity(3, 3), 2.0);
  EXPECT_EQ(flat.sigma_q2, 0.0);
  EXPECT_TRUE(flat.degenerate);
}

TEST(FitSigma, IdentityMinimizerByCalculus) {
  // d/dv [N/2 log(2 pi v) + q/(2v)] = 0  =>  v = q / N
  Eigen::VectorXd s(3);
  s << 1.0, -2.0, 1.0;
  const auto f = fit_sigma_q(s, Eigen::MatrixXd::Identity(3, 3), 0.0);
  EXPECT_NEAR(f.sigma_q2, 2.0, 1e-15);
}

TEST(FitSigma, FiniteDifferenceStationarity) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 30; ++t) {
    auto in = random_inputs(rng, 20);
    if (in.size() < 2) continue;
    const auto k = build_covariance(in, 0.3 + 0.1 * t, 0.5);
    const double mu = in.scores.mean();
    const auto f = fit_sigma_q(in.scores, k, mu);
    if (f.degenerate) continue;
    const double h = 1e-4;
    const double up = nll(in.scores, k, f.sigma_q2 * std::exp(h), mu);
    const double dn = nll(in.scores, k, f.sigma_q2 * std::exp(-h), mu);
    const double slope = (up - dn) / (2 * h);  // d nll / d log sigma^2
    EXPECT_LT(std::abs(slope) / (0.5 * static_cast<double>(in.size())), 1e-5);
    EXPECT_GT(up, nll(in.scores, k, f.sigma_q2, mu));
    EXPECT_GT(dn, nll(in.scores, k, f.sigma_q2, mu));
  }
}

TEST(Fit, StructuredMatchesDense) {
  std::mt19937_64 rng(4);
  const auto grid = GridSpec::logarithmic(1e-2, 1e2, 5);
  for (int t = 0; t < 20; ++t) {
    auto in = random_inputs(rng, 40);
    if (in.size() < 2) continue;
    const auto a = fit_hyperparams(in, grid, LikelihoodRoute::kStructured);
    const auto b = fit_hyperparams(in, grid, LikelihoodRoute::kDense);
    ASSERT_EQ(a.table.size(), b.table.size());
    for (std::size_t i = 0; i < a.table.size(); ++i) {
      EXPECT_NEAR(a.table[i].nll, b.table[i].nll, 1e-8 * std::max(1.0, std::abs(b.table[i].nll)));
      EXPECT_NEAR(a.table[i].sigma_q2, b.table[i].sigma_q2, 1e-8 * b.table[i].sigma_q2);
    }
  }
}

TEST(Fit, RepeatedPairRejected) {
  auto in = inputs({1.0, 2.5, -1.0, 0.5}, {0, 0, 1, 1}, {0, 0, 0, 1});
  ASSERT_TRUE(in.has_duplicate_pairs());
  EXPECT_THROW(fit_hyperparams(in, GridSpec::standard()), Error);
  EXPECT_THROW(posterior(in, Hyperparams{}), Error);
}

TEST(Fit, DuplicateGridPointsDoNotChangeResult) {
  std::mt19937_64 rng(5);
  auto in = random_inputs(rng, 30);
  auto grid = GridSpec::logarithmic(1e-2, 1e2, 7);
  const auto a = fit_hyperparams(in, grid);
  auto dup = grid;
  dup.bias_ratios.insert(dup.bias_ratios.end(), grid.bias_ratios.begin(), grid.bias_ratios.end());
  dup.noise_ratios.push_back(grid.noise_ratios[3]);
  const auto b = fit_hyperparams(in, dup);
  EXPECT_EQ(a.best.bias_ratio, b.best.bias_ratio);
  EXPECT_EQ(a.best.noise_ratio, b.best.noise_ratio);
  EXPECT_EQ(a.nll, b.nll);
}

TEST(Fit, AllFlatThrows) {
  auto in = inputs({1.0, 1.0, 1.0}, {0, 1, 2}, {0, 0, 1});
  EXPECT_THROW(fit_hyperparams(in, GridSpec::standard()), Error);
}

TEST(Fit, NoBiasSelectsSmallBiasRatio) {
  const auto c = synth::continuous(100, 25, 4, 0.0, 2.0, 6);
  const auto grid = GridSpec::standard();
  const auto fit = fit_hyperparams(c.inputs, grid);
  EXPECT_LE(fit.best.bias_ratio, grid.bias_ratios[1] * (1 + 1e-12));
}

TEST(Fit, PlantedOffsetsRecovered) {
  // offsets +-1 (variance 1), tiny noise, 50 reviewers
  auto c = synth::continuous(200, 50, 4, 0.0, 0.05, 8);
  std::vector<double> offs(50);
  for (std::size_t r = 0; r < 50; ++r) offs[r] = r % 2 == 0 ? 1.0 : -1.0;
  for (std::size_t e = 0; e < c.inputs.size(); ++e) {
    c.inputs.scores[static_cast<Eigen::Index>(e)] += offs[c.inputs.rater[e]];
  }
  const auto fit = fit_hyperparams(c.inputs, GridSpec::standard());
  EXPECT_GT(fit.best.sigma_b2(), 1.0 / 3.0);
  EXPECT_LT(fit.best.sigma_b2(), 3.0);
}

TEST(Posterior, MatchesBruteForceAtDeskScale) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  for (int t = 0; t < 200; ++t) {
    auto in = random_inputs(rng, 1 + t % 6);
    const Hyperparams hp{u(rng), u(rng), u(rng), in.scores.mean() + 0.3};
    const auto post = posterior(in, hp);
    const auto bf = oracle::brute_force_posterior(in, hp);
    EXPECT_LT((post.mean - bf.mean).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((post.cov - bf.cov).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((hp.sigma_q2 * build_covariance(in, hp.bias_ratio, hp.noise_ratio) - bf.cov_s)
                  .cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Posterior, NoBiasKeepsScores) {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 50; ++t) {
    auto in = random_inputs(rng, 30);
    const Hyperparams hp{1.7, 0.0, 0.4, 0.2};
    const auto post = posterior(in, hp);
    EXPECT_LT((post.mean - in.scores).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Posterior, ScalarFormula) {
  auto in = inputs({2.0}, {0}, {0});
  const Hyperparams hp{1.5, 0.4, 0.6, 0.5};
  const auto post = posterior(in, hp);
  const double k = 1.5 * (1 + 0.4 + 0.6);
  const double ky = 1.5 * (1 + 0.6);
  EXPECT_NEAR(post.mean[0], 0.5 + ky / k * 1.5, 1e-14);
  EXPECT_NEAR(post.cov(0, 0), ky - ky * ky / k, 1e-14);
}

TEST(Posterior, ShiftedReviewerPulledBack) {
  // reviewer 0 reads +2 everywhere; calibration reduces the error vs quality
  auto c = synth::continuous(60, 12, 4, 0.0, 0.01, 11);
  for (std::size_t e = 0; e < c.inputs.size(); ++e) {
    if (c.inputs.rater[e] == 0) c.inputs.scores[static_cast<Eigen::Index>(e)] += 2.0;
  }
  const auto fit = fit_hyperparams(c.inputs, GridSpec::standard());
  const auto post = posterior(c.inputs, fit.best);
  double raw = 0, cal = 0, shift = 0;
  std::size_t n0 = 0;
  for (std::size_t e = 0; e < c.inputs.size(); ++e) {
    const auto ei = static_cast<Eigen::Index>(e);
    const double q = c.quality[c.inputs.paper[e]];
    raw += std::abs(c.inputs.scores[ei] - q);
    cal += std::abs(post.mean[ei] - q);
    if (c.inputs.rater[e] == 0) {
      shift += c.inputs.scores[ei] - post.mean[ei];
      ++n0;
    }
  }
  EXPECT_LT(cal, raw);
  EXPECT_GT(shift / static_cast<double>(n0), 1.0);
}

TEST(Aggregate, SingleReviewAndPermutation) {
  auto in = inputs({3.0, 1.0, 2.0, -1.0}, {0, 1, 1, 2}, {0, 0, 1, 1});
  in.weight = {1.0, 1.2, 0.8, 1.0};
  const auto agg = aggregate_entries(in, in.scores);
  EXPECT_EQ(agg[0], 3.0);
  EXPECT_NEAR(agg[1], (1.2 * 1.0 + 0.8 * 2.0) / 2.0, 1e-15);

  // permuting the review order leaves per-paper results unchanged
  std::vector<ReviewScore> reviews;
  std::vector<double> values;
  const auto cc = synth::continuous(20, 6, 3, 1.0, 0.3, 12);
  for (std::size_t e = 0; e < cc.inputs.size(); ++e) {
    ReviewScore s;
    s.paper = cc.inputs.papers[cc.inputs.paper[e]];
    s.reviewer = ReviewerId(cc.inputs.raters[cc.inputs.rater[e]]);
    s.confidence = 0.8 + 0.1 * static_cast<double>(e % 5);
    reviews.push_back(s);
    values.push_back(cc.inputs.scores[static_cast<Eigen::Index>(e)]);
  }
  const auto grid = GridSpec::logarithmic(0.1, 10, 5);
  const auto a = calibrate_reviews(reviews, values, grid);
  std::vector<std::size_t> perm(reviews.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(13);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<ReviewScore> r2;
  std::vector<double> v2;
  for (auto i : perm) {
    r2.push_back(reviews[i]);
    v2.push_back(values[i]);
  }
  const auto b = calibrate_reviews(r2, v2, grid);
  ASSERT_EQ(a.papers.papers, b.papers.papers);
  for (std::size_t p = 0; p < a.papers.raw.size(); ++p) {
    EXPECT_NEAR(a.papers.raw[p], b.papers.raw[p], 1e-9);
  }
}

TEST(Aggregate, NoBiasMatchesUncalibratedPipeline) {
  const auto conf = synth::conference(40, 15, 3, 4, 14);
  const auto reviews = review_scores(conf.reviews);
  auto in = make_calibration_inputs(reviews);
  Hyperparams hp{1.0, 0.0, 0.5, in.scores.mean()};
  const auto post = posterior(in, hp);
  const auto cal = aggregate_calibrated(in, post.mean);
  const auto by_paper = aggregate_by_paper(reviews);
  std::vector<double> raw;
  for (const auto& [p, v] : by_paper) raw.push_back(v);
  const auto expect = normalize(raw);
  for (std::size_t p = 0; p < expect.size(); ++p) {
    EXPECT_NEAR(cal.normalized[p], expect[p], 1e-9);
  }
}

TEST(Acceptance, CountingIdentityAndDominance) {
  auto c = synth::continuous(30, 10, 3, 0.5, 0.3, 15);
  // paper 0 far above everything else
  for (std::size_t e = 0; e < c.inputs.size(); ++e) {
    if (c.inputs.paper[e] == 0) c.inputs.scores[static_cast<Eigen::Index>(e)] += 100.0;
  }
  const Hyperparams hp{1.0, 0.3, 0.2, c.inputs.scores.mean()};
  const auto post = posterior(c.inputs, hp);
  DecisionConfig cfg;
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    const auto est = acceptance_probability(c.inputs, post, cfg, 1000, seed);
    std::size_t total = 0;
    for (auto a : est.accepted) total += a;
    EXPECT_EQ(total, est.slots * 1000);
    EXPECT_EQ(est.slots, 12u);
    EXPECT_EQ(est.probability[0], 1.0);
  }
  const auto a = acceptance_probability(c.inputs, post, cfg, 200, 5);
  const auto b = acceptance_probability(c.inputs, post, cfg, 200, 5);
  EXPECT_EQ(a.accepted, b.accepted);
}

TEST(PsdFactor, ReproducesCovariance) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Random(6, 3);
  const Eigen::MatrixXd cov = m * m.transpose();  // rank 3
  const auto f = psd_factor(cov);
  EXPECT_LT((f * f.transpose() - cov).cwiseAbs().maxCoeff(), 1e-10);
  Eigen::MatrixXd bad = cov;
  bad(0, 0) -= 10.0;
  EXPECT_THROW(psd_factor(bad), Error);
}

TEST(MetaCalibration, PassthroughWhenUnidentifiable) {
  std::vector<MetaReviewForm> metas;
  for (int p = 0; p < 5; ++p) {
    metas.push_back({PaperId(synth::pid(p)), MetaReviewerId(synth::mid(p)),
                     static_cast<Recommendation>(p)});
  }
  Diagnostics diag;
  const auto out = calibrate_meta(metas, GridSpec::standard(), &diag);
  EXPECT_TRUE(out.passthrough);
  EXPECT_EQ(out.calibrated, out.original);
  EXPECT_FALSE(diag.warnings.empty());
}

TEST(MetaCalibration, RecoversPlantedOffsetSigns) {
  // 400 papers, 25 ACs with 16 papers each, offsets +-1.5
  std::mt19937_64 rng(16);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<MetaReviewForm> metas;
  std::vector<double> offset(25);
  for (std::size_t m = 0; m < 25; ++m) offset[m] = m % 2 == 0 ? 1.5 : -1.5;
  for (std::size_t p = 0; p < 400; ++p) {
    const std::size_t m = p % 25;
    metas.push_back({PaperId(synth::pid(p)), MetaReviewerId(synth::mid(m)),
                     synth::recommendation_near(normal(rng) + offset[m])});
  }
  const auto out = calibrate_meta(metas, GridSpec::standard());
  ASSERT_FALSE(out.passthrough);
  ASSERT_TRUE(out.fit.has_value());
  // estimated offset of an AC: mean of (original - calibrated) over its papers
  std::vector<double> est(25, 0.0);
  for (std::size_t p = 0; p < 400; ++p) {
    est[p % 25] += out.original[p] - out.calibrated[p];
  }
  for (std::size_t m = 0; m < 25; ++m) {
    EXPECT_GT(est[m] * offset[m], 0.0) << "AC " << m;
  }
}
