#pragma once

// Review dequantization.
//
// For each paper, with reviews s_1..s_n, find x minimizing
//
//   sum_i (x_i - mean(x))^2 + lambda * sum_i (x_i - s_i)^2
//   subject to |x_i - s_i| <= band.
//
// Without the box the minimizer is x_i = (mean(s) + lambda s_i) / (1 + lambda),
// i.e. ((1 + n lambda) s_i + sum_{j != i} s_j) / (n (1 + lambda)).
// With the box the optimum satisfies the fixed point
//
//   x_i = clip((m + lambda s_i) / (1 + lambda), s_i - band, s_i + band),
//   m = mean(x).
//
// h(m) = mean_i x_i(m) - m is continuous, piecewise linear and non-increasing,
// so the root is found exactly by scanning its breakpoints. When no review is
// clipped at m = mean(s) this reduces to the closed form above.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "revcal/common.hpp"
#include "revcal/scoring.hpp"

namespace revcal {

struct DequantConfig {
  double lambda = 2.0;
  double band = 0.25;

  void check() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw Error("dequantize: lambda must be a non-negative finite number");
    }
    if (!(band >= 0.0)) throw Error("dequantize: band must be non-negative");
  }
};

struct PaperDequant {
  PaperId paper;
  std::size_t reviews = 0;  // n_p
  double mean = 0.0;        // mean of the dequantized scores
};

struct DequantResult {
  std::vector<double> scores;  // aligned with the input reviews
  std::vector<PaperDequant> papers;
  double cost = 0.0;
};

namespace detail {

inline double clamp_to_band(double y, double s, double band) {
  return std::clamp(y, s - band, s + band);
}

inline double group_mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

}  // namespace detail

/// Unconstrained closed form followed by per-review clipping.
inline std::vector<double> closed_form_dequantize_group(
    std::span<const double> s, const DequantConfig& cfg) {
  cfg.check();
  if (s.empty()) throw Error("dequantize: empty paper group");
  const double n = static_cast<double>(s.size());
  const double total = std::accumulate(s.begin(), s.end(), 0.0);
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double y = (1.0 + n * cfg.lambda) / (n * (1.0 + cfg.lambda)) * s[i] +
                     (total - s[i]) / (n * (1.0 + cfg.lambda));
    out[i] = detail::clamp_to_band(y, s[i], cfg.band);
  }
  return out;
}

/// Exact minimizer of the box-constrained cost for one paper.
inline std::vector<double> dequantize_group(std::span<const double> s,
                                            const DequantConfig& cfg) {
  cfg.check();
  if (s.empty()) throw Error("dequantize: empty paper group");
  const double lambda = cfg.lambda;
  const double w = cfg.band;
  const std::size_t n = s.size();

  auto at = [&](double m, std::vector<double>& x) {
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = detail::clamp_to_band((m + lambda * s[i]) / (1.0 + lambda), s[i], w);
    }
  };
  auto h = [&](double m) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum += detail::clamp_to_band((m + lambda * s[i]) / (1.0 + lambda), s[i], w);
    }
    return sum / static_cast<double>(n) - m;
  };

  std::vector<double> x(n);
  const double m0 = detail::group_mean(s);
  bool clipped = false;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = (m0 + lambda * s[i]) / (1.0 + lambda);
    if (y < s[i] - w || y > s[i] + w) clipped = true;
  }
  if (!clipped) {
    at(m0, x);
    return x;
  }

  std::vector<double> bp;
  bp.reserve(2 * n);
  for (double si : s) {
    bp.push_back(si - (1.0 + lambda) * w);
    bp.push_back(si + (1.0 + lambda) * w);
  }
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());

  // h(bp.front()) >= 0 >= h(bp.back()); find the segment holding the root.
  double root = bp.front();
  double h_prev = h(bp.front());
  if (h_prev <= 0.0) {
    root = bp.front();
  } else {
    root = bp.back();
    for (std::size_t k = 1; k < bp.size(); ++k) {
      const double h_k = h(bp[k]);
      if (h_k <= 0.0) {
        // h is affine on [bp[k-1], bp[k]]
        const double t = h_prev / (h_prev - h_k);
        root = bp[k - 1] + t * (bp[k] - bp[k - 1]);
        break;
      }
      h_prev = h_k;
    }
  }
  at(root, x);
  return x;
}

/// sum (x - mean(x))^2 + lambda * sum (x - s)^2 for one paper.
inline double dq_group_cost(std::span<const double> x, std::span<const double> s,
                            double lambda) {
  if (x.size() != s.size()) throw Error("dq cost: misaligned inputs");
  if (x.empty()) return 0.0;
  const double m = detail::group_mean(x);
  double spread = 0.0;
  double fidelity = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    spread += (x[i] - m) * (x[i] - m);
    fidelity += (x[i] - s[i]) * (x[i] - s[i]);
  }
  return spread + lambda * fidelity;
}

namespace detail {

inline std::map<PaperId, std::vector<std::size_t>> group_by_paper(
    std::span<const ReviewScore> reviews) {
  std::map<PaperId, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    groups[reviews[i].paper].push_back(i);
  }
  return groups;
}

}  // namespace detail

/// Cost summed over papers; `dequantized` is aligned with `reviews`.
inline double dq_cost(std::span<const ReviewScore> reviews,
                      std::span<const double> dequantized, double lambda) {
  if (reviews.size() != dequantized.size()) {
    throw Error("dq cost: misaligned inputs");
  }
  double total = 0.0;
  for (const auto& [paper, idx] : detail::group_by_paper(reviews)) {
    std::vector<double> x;
    std::vector<double> s;
    for (std::size_t i : idx) {
      x.push_back(dequantized[i]);
      s.push_back(reviews[i].value());
    }
    total += dq_group_cost(x, s, lambda);
  }
  return total;
}

/// Dequantizes every paper independently. Meta-reviews are never touched.
inline DequantResult dequantize(std::span<const ReviewScore> reviews,
                                const DequantConfig& cfg) {
  cfg.check();
  DequantResult out;
  out.scores.assign(reviews.size(), 0.0);
  for (const auto& [paper, idx] : detail::group_by_paper(reviews)) {
    std::vector<double> s;
    s.reserve(idx.size());
    for (std::size_t i : idx) s.push_back(reviews[i].value());
    const auto x = dequantize_group(s, cfg);
    for (std::size_t k = 0; k < idx.size(); ++k) out.scores[idx[k]] = x[k];
    out.papers.push_back({paper, idx.size(), detail::group_mean(x)});
    out.cost += dq_group_cost(x, s, cfg.lambda);
  }
  return out;
}

}  // namespace revcal
