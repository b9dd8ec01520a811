#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nlj/array_model.hpp"
#include "nlj/common.hpp"
#include "nlj/cyclic_estimator.hpp"
#include "nlj/parallel.hpp"
#include "nlj/rng.hpp"

namespace nlj {

enum class DetectorKind { kScLrt, kSdcLrt, kSpiceLrt };

inline const char* to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::kScLrt: return "sc_lrt";
    case DetectorKind::kSdcLrt: return "sdc_lrt";
    case DetectorKind::kSpiceLrt: return "spice_lrt";
  }
  throw std::invalid_argument("unknown detector kind");
}

inline DetectorKind detector_from_string(const std::string& name) {
  if (name == "sc_lrt") return DetectorKind::kScLrt;
  if (name == "sdc_lrt") return DetectorKind::kSdcLrt;
  if (name == "spice_lrt") return DetectorKind::kSpiceLrt;
  throw config_error("unknown detector: " + name);
}

inline std::uint64_t detector_id(DetectorKind kind) {
  return static_cast<std::uint64_t>(kind) + 1;
}

struct SpiceConfig {
  int max_iters = 200;
  double rel_tol = 1e-3;
  double power_floor = 1e-12;  // keeps the multiplicative updates alive

  void validate() const {
    if (max_iters < 1)
      throw std::invalid_argument("SpiceConfig: max_iters must be >= 1");
    if (!(rel_tol > 0.0))
      throw std::invalid_argument("SpiceConfig: rel_tol must be > 0");
    if (!(power_floor > 0.0))
      throw std::invalid_argument("SpiceConfig: power_floor must be > 0");
  }
};

// Shared detector settings. `threshold` is the comparison level eta the
// decision uses; calibrate_threshold produces it.
struct DetectorConfig {
  EstimatorConfig estimator;
  SpiceConfig spice;
  double threshold = 0.0;
};

struct DetectionReport {
  double statistic = 0.0;
  double threshold = 0.0;
  bool decision = false;  // statistic > threshold
  SparseEstimate estimate;
};

// Gaussian log-density of K snapshots with scatter matrix s under
// M = noise_power I + V diag(d) V':  -K N log pi - K log det M - tr(M^-1 S).
inline double log_pdf(const CMat& s, double noise_power, const RVec& d,
                      const Dictionary& dict, int k) {
  if (k < 1) throw std::invalid_argument("log_pdf: k must be >= 1");
  if (s.rows() != dict.n_channels || s.cols() != dict.n_channels)
    throw std::invalid_argument("log_pdf: S size mismatch");
  const int n = dict.n_channels;
  const CMat m = interference_covariance(noise_power, d, dict);
  const auto llt = detail::cov_chol(m);
  return -static_cast<double>(k) * n * std::log(kPi) -
         k * detail::chol_logdet(llt) - llt.solve(s).trace().real();
}

namespace detail {

// log_pdf specialization at d = 0 (diagonal M), used by every denominator.
inline double log_pdf_h0(double tr_s, int n, int k, double noise_power) {
  return -static_cast<double>(k) * n * std::log(kPi) -
         static_cast<double>(k) * n * std::log(noise_power) -
         tr_s / noise_power;
}

}  // namespace detail

// Sigma-clairvoyant LRT: the noise level is supplied (true value in the
// simulation protocol); only the jammer powers are estimated.
inline DetectionReport sc_lrt(const SnapshotSet& z, double noise_power_est,
                              const Dictionary& dict,
                              const DetectorConfig& config) {
  if (!(noise_power_est >= 1.0))
    throw std::invalid_argument("sc_lrt: noise power must be >= 1");
  const int k = z.n_snapshots();
  DetectionReport report;
  report.estimate =
      estimate_known_sigma(z.sample_cov, noise_power_est, dict, k,
                           config.estimator);
  const double num =
      log_pdf(z.sample_cov, noise_power_est, report.estimate.d, dict, k);
  const double den = detail::log_pdf_h0(z.sample_cov.trace().real(),
                                        dict.n_channels, k, noise_power_est);
  report.statistic = num - den;
  report.threshold = config.threshold;
  report.decision = report.statistic > report.threshold;
  return report;
}

// Sigma-unaware LRT: both hypotheses use their own noise-level estimates
// (joint sparse fit under H1, Tr(S)/(KN) under H0).
inline DetectionReport sdc_lrt(const SnapshotSet& z, const Dictionary& dict,
                               const DetectorConfig& config) {
  const int k = z.n_snapshots();
  DetectionReport report;
  report.estimate = estimate_joint(z.sample_cov, dict, k, config.estimator);
  const double num = log_pdf(z.sample_cov, report.estimate.noise_power,
                             report.estimate.d, dict, k);
  const double sigma0 = noise_mle_h0(z.sample_cov, dict.n_channels, k);
  const double den = detail::log_pdf_h0(z.sample_cov.trace().real(),
                                        dict.n_channels, k, sigma0);
  report.statistic = num - den;
  report.threshold = config.threshold;
  report.decision = report.statistic > report.threshold;
  return report;
}

// Covariance-fitting baseline (homogeneous-noise SPICE). Minimizes
//   f(p, sigma2) = tr(R^-1 Stilde) + sum_l w_l p_l + w_sig sigma2,
// R = V diag(p) V' + sigma2 I, w_l = v_l' Stilde^-1 v_l, w_sig = tr Stilde^-1,
// by cyclic multiplicative updates; f is nonincreasing along iterates.
inline SparseEstimate spice_estimate(const CMat& s, const Dictionary& dict,
                                     int k, const SpiceConfig& config) {
  config.validate();
  if (k < 1) throw std::invalid_argument("spice_estimate: k must be >= 1");
  if (s.rows() != dict.n_channels || s.cols() != dict.n_channels)
    throw std::invalid_argument("spice_estimate: S size mismatch");
  const int n = dict.n_channels;
  const int ell = static_cast<int>(dict.size());
  const CMat stilde = s / static_cast<double>(k);

  SparseEstimate est;
  est.low_sample_support = k < n;

  // Weights from Stilde^-1; rank-deficient Stilde (K < N) gets a
  // trace-scaled ridge and the estimate is flagged.
  CMat sreg = stilde;
  if (est.low_sample_support)
    sreg += (1e-8 * stilde.trace().real() / n) * CMat::Identity(n, n);
  Eigen::LLT<CMat> sllt(sreg);
  if (sllt.info() != Eigen::Success)
    throw numeric_error("spice_estimate: sample covariance not PD");
  const CMat sinv_v = sllt.solve(dict.matrix);
  RVec w(ell);
  for (int l = 0; l < ell; ++l)
    w(l) = std::max(dict.matrix.col(l).dot(sinv_v.col(l)).real(),
                    config.power_floor);
  const double w_sig = sllt.solve(CMat::Identity(n, n)).trace().real();

  RVec p(ell);
  for (int l = 0; l < ell; ++l)
    p(l) = std::max(dict.matrix.col(l).dot(stilde * dict.matrix.col(l)).real(),
                    config.power_floor);
  double sigma2 = stilde.trace().real() / n;

  int iters = 0;
  for (int it = 1; it <= config.max_iters; ++it) {
    iters = it;
    const CMat r = interference_covariance(sigma2, p, dict);
    const auto rllt = detail::cov_chol(r);
    const CMat rs = rllt.solve(stilde);  // R^-1 Stilde
    est.objective_trace.push_back(rs.trace().real() + w.dot(p) +
                                  w_sig * sigma2);
    const CMat rv = rllt.solve(dict.matrix);  // R^-1 V
    const CMat srv = stilde * rv;
    RVec p_next(ell);
    for (int l = 0; l < ell; ++l) {
      const double quad = std::max(rv.col(l).dot(srv.col(l)).real(), 0.0);
      p_next(l) = p(l) * std::sqrt(quad / w(l));
    }
    const double tr_quad =
        std::max(rllt.solve(rs.adjoint()).trace().real(), 0.0);
    const double sigma2_next = sigma2 * std::sqrt(tr_quad / w_sig);

    const double num = std::sqrt((p_next - p).squaredNorm() +
                                 (sigma2_next - sigma2) * (sigma2_next - sigma2));
    const double den = std::sqrt(p.squaredNorm() + sigma2 * sigma2);
    p = p_next;
    sigma2 = sigma2_next;
    if (den > 0.0 && num < config.rel_tol * den) break;
  }

  est.d = p;
  est.noise_power = sigma2;
  est.q_selected = 0.0;
  est.order = static_cast<int>((p.array() > 0.0).count());
  est.iters_used = iters;
  return est;
}

// LRT with SPICE plug-in estimates under H1 and the H0 noise MLE under H0.
inline DetectionReport spice_lrt(const SnapshotSet& z, const Dictionary& dict,
                                 const DetectorConfig& config) {
  const int k = z.n_snapshots();
  DetectionReport report;
  report.estimate = spice_estimate(z.sample_cov, dict, k, config.spice);
  const double num = log_pdf(z.sample_cov, report.estimate.noise_power,
                             report.estimate.d, dict, k);
  const double sigma0 = noise_mle_h0(z.sample_cov, dict.n_channels, k);
  const double den = detail::log_pdf_h0(z.sample_cov.trace().real(),
                                        dict.n_channels, k, sigma0);
  report.statistic = num - den;
  report.threshold = config.threshold;
  report.decision = report.statistic > report.threshold;
  return report;
}

// Dispatch helper. scenario_noise_power feeds the sigma-clairvoyant detector
// only; the others estimate their own noise level.
inline DetectionReport run_detector(DetectorKind kind, const SnapshotSet& z,
                                    double scenario_noise_power,
                                    const Dictionary& dict,
                                    const DetectorConfig& config) {
  switch (kind) {
    case DetectorKind::kScLrt:
      return sc_lrt(z, scenario_noise_power, dict, config);
    case DetectorKind::kSdcLrt:
      return sdc_lrt(z, dict, config);
    case DetectorKind::kSpiceLrt:
      return spice_lrt(z, dict, config);
  }
  throw std::invalid_argument("unknown detector kind");
}

namespace detail {

// eta = ceil((1 - p) n)-th smallest of n sorted statistics (1-based), with a
// small epsilon so exact-integer products are not pushed up by roundoff.
inline double threshold_order_statistic(std::vector<double> stats,
                                        double p_fjd) {
  const std::size_t n = stats.size();
  std::sort(stats.begin(), stats.end());
  const std::size_t idx = static_cast<std::size_t>(
      std::ceil((1.0 - p_fjd) * static_cast<double>(n) - 1e-6));
  return stats[std::min(idx, n) - 1];
}

}  // namespace detail

inline constexpr std::uint64_t kStreamThreshold = 1;
inline constexpr std::uint64_t kStreamTrial = 2;
inline constexpr std::uint64_t kStreamGhost = 3;
inline constexpr std::uint64_t kStreamDemo = 4;

// Monte Carlo threshold for a target false-alarm (jammer-detection)
// probability: the ceil((1 - p_fjd) n)-th ascending H0 statistic.
// h0_scenario must be jammer-free and match the dictionary's channel count.
inline double calibrate_threshold(DetectorKind kind,
                                  const ScenarioConfig& h0_scenario,
                                  const Dictionary& dict, double p_fjd,
                                  int n_trials, std::uint64_t seed,
                                  const DetectorConfig& config) {
  if (!(p_fjd > 0.0 && p_fjd < 0.5))
    throw std::invalid_argument("calibrate_threshold: p_fjd out of range");
  if (n_trials * p_fjd < 1.0)
    throw std::invalid_argument(
        "calibrate_threshold: n_trials too small for p_fjd");
  h0_scenario.validate();
  if (!h0_scenario.jammers.empty())
    throw std::invalid_argument(
        "calibrate_threshold: H0 scenario must have no jammers");
  if (h0_scenario.n_channels != dict.n_channels)
    throw std::invalid_argument("calibrate_threshold: channel mismatch");

  const CMat cov = scenario_covariance(h0_scenario);
  std::vector<double> stats(static_cast<std::size_t>(n_trials));
  parallel_for(stats.size(), [&](std::size_t t) {
    const std::uint64_t trial_seed =
        derive_seed(seed, {kStreamThreshold, detector_id(kind), t});
    const SnapshotSet z =
        draw_snapshots(cov, h0_scenario.n_snapshots, trial_seed);
    stats[t] = run_detector(kind, z, h0_scenario.noise_power, dict, config)
                   .statistic;
  });
  return detail::threshold_order_statistic(std::move(stats), p_fjd);
}

}  // namespace nlj
