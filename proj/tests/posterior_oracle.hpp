#pragma once

// Brute-force conditional Gaussian for the bias model. The latent vector
// z = (q_1..q_P, b_1..b_R, eps_1..eps_N) has a diagonal prior; scores are
// s = mu + A z and bias-free scores y = mu + B z. Everything is formed
// explicitly and the conditional uses a full-pivot LU inverse.

#include <Eigen/Dense>

#include "revcal/calibrator.hpp"

namespace oracle {

struct Conditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd cov_s;  // marginal covariance of s
};

inline Conditional brute_force_posterior(const revcal::CalibrationInputs& in,
                                         const revcal::Hyperparams& hp) {
  const auto n = static_cast<Eigen::Index>(in.size());
  const auto np = static_cast<Eigen::Index>(in.papers.size());
  const auto nr = static_cast<Eigen::Index>(in.raters.size());
  const Eigen::Index dim = np + nr + n;
  Eigen::VectorXd prior(dim);
  prior.head(np).setConstant(hp.sigma_q2);
  prior.segment(np, nr).setConstant(hp.bias_ratio * hp.sigma_q2);
  prior.tail(n).setConstant(hp.noise_ratio * hp.sigma_q2);

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, dim);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, dim);
  for (Eigen::Index e = 0; e < n; ++e) {
    const auto p = static_cast<Eigen::Index>(in.paper[static_cast<std::size_t>(e)]);
    const auto r = static_cast<Eigen::Index>(in.rater[static_cast<std::size_t>(e)]);
    a(e, p) = 1.0;
    a(e, np + r) = 1.0;
    a(e, np + nr + e) = 1.0;
    b(e, p) = 1.0;
    b(e, np + nr + e) = 1.0;
  }
  const Eigen::MatrixXd d = prior.asDiagonal();
  const Eigen::MatrixXd ss = a * d * a.transpose();
  const Eigen::MatrixXd ys = b * d * a.transpose();
  const Eigen::MatrixXd yy = b * d * b.transpose();
  const Eigen::MatrixXd inv = ss.fullPivLu().inverse();

  Conditional c;
  const Eigen::VectorXd r = in.scores.array() - hp.mu_q;
  c.mean = (ys * inv * r).array() + hp.mu_q;
  c.cov = yy - ys * inv * ys.transpose();
  c.cov_s = ss;
  return c;
}

}  // namespace oracle
