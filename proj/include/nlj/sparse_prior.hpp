#pragma once

#include <cmath>

#include "nlj/array_model.hpp"
#include "nlj/common.hpp"

namespace nlj {

// Parameters of the sparsity-promoting prior over the grid powers d.
// q in (0, 1] controls how aggressively small powers are shrunk; the prior
// is calibrated against k_snapshots so that likelihood and prior stay on
// comparable scales as K grows.
struct PriorParams {
  double q = 1.0;
  int k_snapshots = 1;
  double noise_power = 1.0;

  void validate() const {
    if (!(q > 0.0 && q <= 1.0))
      throw std::invalid_argument("PriorParams: q must be in (0, 1]");
    if (k_snapshots < 1)
      throw std::invalid_argument("PriorParams: need at least 1 snapshot");
    if (!(noise_power >= 1.0))
      throw std::invalid_argument("PriorParams: noise power must be >= 1");
  }
};

namespace detail {

inline Eigen::LLT<CMat> cov_chol(const CMat& m) {
  Eigen::LLT<CMat> llt(m);
  if (llt.info() != Eigen::Success)
    throw numeric_error("covariance Cholesky failed (not positive definite)");
  return llt;
}

inline double chol_logdet(const Eigen::LLT<CMat>& llt) {
  double s = 0.0;
  const auto& l = llt.matrixLLT();
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i).real());
  return 2.0 * s;
}

// Penalty sum of the prior exponent: sum_l (K/q) (d_l^q - 1).
inline double prior_penalty(const RVec& d, const PriorParams& p) {
  double s = 0.0;
  for (Eigen::Index l = 0; l < d.size(); ++l) {
    if (d(l) < 0.0)
      throw std::invalid_argument("prior: d must be nonnegative");
    s += std::pow(d(l), p.q) - 1.0;
  }
  return s * (static_cast<double>(p.k_snapshots) / p.q);
}

}  // namespace detail

// log of the (unnormalized) prior density:
//   (K - 1) log det M(d) - sum_l (K/q)(d_l^q - 1),  M = sigma2 I + V D V'.
inline double log_prior(const RVec& d, const PriorParams& params,
                        const Dictionary& dict) {
  params.validate();
  const CMat m = interference_covariance(params.noise_power, d, dict);
  const auto llt = detail::cov_chol(m);
  return (params.k_snapshots - 1) * detail::chol_logdet(llt) -
         detail::prior_penalty(d, params);
}

// Objective maximized by the cyclic estimator: log-likelihood of the scatter
// matrix s plus log-prior,
//   g(d) = -K N log pi - log det M - tr(M^-1 S) - sum_l (K/q)(d_l^q - 1).
inline double log_joint_objective(const RVec& d, const CMat& s,
                                  const PriorParams& params,
                                  const Dictionary& dict) {
  params.validate();
  if (s.rows() != dict.n_channels || s.cols() != dict.n_channels)
    throw std::invalid_argument("log_joint_objective: S size mismatch");
  const int n = dict.n_channels;
  const int k = params.k_snapshots;
  const CMat m = interference_covariance(params.noise_power, d, dict);
  const auto llt = detail::cov_chol(m);
  const double trace_term = llt.solve(s).trace().real();
  return -static_cast<double>(k) * n * std::log(kPi) -
         detail::chol_logdet(llt) - trace_term -
         detail::prior_penalty(d, params);
}

// Prior factor along a single coordinate with the rest of the model frozen:
//   (1 + d_i a)^(K-1) exp(-(K/q)(d_i^q - 1)),
// where a = v_i' A^-1 v_i and A is the covariance without coordinate i.
// For sigma2 >= 1, a <= 1 and the factor is maximal at d_i = 0; a > 1 admits
// an interior maximum. Raw value overflows for large K; prefer the log form.
inline double coordinate_factor(double d_i, double a,
                                const PriorParams& params) {
  params.validate();
  if (d_i < 0.0)
    throw std::invalid_argument("coordinate_factor: d_i must be >= 0");
  if (!(a > 0.0))
    throw std::invalid_argument("coordinate_factor: a must be positive");
  const double k = params.k_snapshots;
  return std::pow(1.0 + d_i * a, k - 1.0) *
         std::exp(-(k / params.q) * (std::pow(d_i, params.q) - 1.0));
}

inline double log_coordinate_factor(double d_i, double a,
                                    const PriorParams& params) {
  params.validate();
  if (d_i < 0.0)
    throw std::invalid_argument("log_coordinate_factor: d_i must be >= 0");
  if (!(a > 0.0))
    throw std::invalid_argument("log_coordinate_factor: a must be positive");
  const double k = params.k_snapshots;
  return (k - 1.0) * std::log1p(d_i * a) -
         (k / params.q) * (std::pow(d_i, params.q) - 1.0);
}

}  // namespace nlj
