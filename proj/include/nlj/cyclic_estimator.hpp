#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include "nlj/array_model.hpp"
#include "nlj/common.hpp"
#include "nlj/sparse_prior.hpp"

namespace nlj {

struct EstimatorConfig {
  std::vector<double> q_grid = {0.1, 0.2, 0.3, 0.4, 0.5,
                                0.6, 0.7, 0.8, 0.9, 1.0};
  int nj_max = 6;              // largest candidate model order
  int inner_max_iters = 30;    // fixed-point sweeps per noise level
  int outer_max_iters = 50;    // alternating d / sigma2 rounds
  int refine_max_sweeps = 20;  // coordinate sweeps per refinement
  double rel_tol_inner = 1e-3;
  double rel_tol_outer = 1e-2;
  double init_floor = 1e-6;  // matched-filter init floor, keeps d^(0) > 0

  void validate() const {
    if (q_grid.empty())
      throw std::invalid_argument("EstimatorConfig: empty q grid");
    for (double q : q_grid)
      if (!(q > 0.0 && q <= 1.0))
        throw std::invalid_argument("EstimatorConfig: q must be in (0, 1]");
    if (nj_max < 1)
      throw std::invalid_argument("EstimatorConfig: nj_max must be >= 1");
    if (inner_max_iters < 2 || outer_max_iters < 1 || refine_max_sweeps < 1)
      throw std::invalid_argument("EstimatorConfig: iteration caps too small");
    if (!(rel_tol_inner > 0.0) || !(rel_tol_outer > 0.0))
      throw std::invalid_argument("EstimatorConfig: tolerances must be > 0");
    if (!(init_floor > 0.0))
      throw std::invalid_argument("EstimatorConfig: init floor must be > 0");
  }
};

// Output of the sparse estimators. For the cyclic estimators objective_trace
// holds the ascent objective g after each fixed-point step of the selected
// trajectory (nondecreasing); for the SPICE baseline it holds the covariance
// fitting criterion (nonincreasing). order counts strictly positive entries
// of d; the cyclic estimators keep order <= nj_max, SPICE may exceed it.
struct SparseEstimate {
  RVec d;
  double noise_power = 1.0;
  double q_selected = 0.0;  // 0 when no q was selected (SPICE, order-0 winner)
  int order = 0;
  std::vector<double> objective_trace;
  int iters_used = 0;
  bool low_sample_support = false;  // SPICE with fewer snapshots than channels
};

namespace detail {

// Gram-domain view of one scatter matrix: everything the refinement, BIC and
// noise updates need, at cost O(m^3) per active-set operation instead of
// O(N^3). Built once per estimation call.
struct GramCache {
  CMat vv;        // L x L, V' V
  CMat vsv;       // L x L, V' S V
  double tr_s;    // Re tr S
  int n_channels; // N

  static GramCache build(const CMat& s, const Dictionary& dict) {
    GramCache g;
    g.n_channels = dict.n_channels;
    g.vv.noalias() = dict.matrix.adjoint() * dict.matrix;
    g.vsv.noalias() = dict.matrix.adjoint() * (s * dict.matrix);
    g.tr_s = s.trace().real();
    return g;
  }
};

// Low-rank factorization of M = sigma2 I + sum_{a in act} gamma_a v_a v_a'.
// Uses the symmetric Woodbury form with B = I + sigma2^-1 G^1/2 (U'U) G^1/2,
// which stays well conditioned for arbitrarily small gamma.
class ActiveModel {
 public:
  ActiveModel(const GramCache& g, const std::vector<int>& act,
              const RVec& gamma_act, double sigma2)
      : g_(&g), act_(act), sigma2_(sigma2), inv_s2_(1.0 / sigma2) {
    const int m = static_cast<int>(act.size());
    sg_.resize(m);
    for (int a = 0; a < m; ++a) sg_(a) = std::sqrt(gamma_act(a));
    if (m > 0) {
      CMat b(m, m);
      CMat w(m, m);
      for (int a = 0; a < m; ++a)
        for (int c = 0; c < m; ++c) {
          const Cplx vv_ac = g.vv(act[a], act[c]);
          b(a, c) = inv_s2_ * sg_(a) * sg_(c) * vv_ac;
          w(a, c) = sg_(a) * sg_(c) * g.vsv(act[a], act[c]);
        }
      b += CMat::Identity(m, m);
      llt_.compute(b);
      if (llt_.info() != Eigen::Success)
        throw numeric_error("ActiveModel: low-rank factor not PD");
      logdet_ = g.n_channels * std::log(sigma2) + chol_logdet(llt_);
      trace_ = inv_s2_ * g.tr_s -
               inv_s2_ * inv_s2_ * llt_.solve(w).trace().real();
    } else {
      logdet_ = g.n_channels * std::log(sigma2);
      trace_ = inv_s2_ * g.tr_s;
    }
  }

  double logdet_m() const { return logdet_; }
  double trace_m_inv_s() const { return trace_; }

  // alpha = v_i' M^-1 v_i, beta = v_i' M^-1 S M^-1 v_i for grid column i.
  void column_quads(int i, double& alpha, double& beta) const {
    const GramCache& g = *g_;
    const int m = static_cast<int>(act_.size());
    if (m == 0) {
      alpha = inv_s2_ * g.vv(i, i).real();
      beta = inv_s2_ * inv_s2_ * g.vsv(i, i).real();
      return;
    }
    CVec u(m), svec(m);
    for (int a = 0; a < m; ++a) {
      u(a) = sg_(a) * g.vv(act_[a], i);
      svec(a) = g.vsv(act_[a], i);
    }
    const CVec y = llt_.solve(u);
    alpha = inv_s2_ * g.vv(i, i).real() -
            inv_s2_ * inv_s2_ * u.dot(y).real();
    CVec c(m);
    for (int a = 0; a < m; ++a) c(a) = inv_s2_ * inv_s2_ * sg_(a) * y(a);
    Cplx cross = Cplx(0, 0);
    for (int a = 0; a < m; ++a) cross += std::conj(c(a)) * svec(a);
    Cplx quad = Cplx(0, 0);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b)
        quad += std::conj(c(a)) * g.vsv(act_[a], act_[b]) * c(b);
    beta = inv_s2_ * inv_s2_ * g.vsv(i, i).real() -
           2.0 * inv_s2_ * cross.real() + quad.real();
  }

 private:
  const GramCache* g_;
  std::vector<int> act_;
  RVec sg_;
  double sigma2_, inv_s2_;
  Eigen::LLT<CMat> llt_;
  double logdet_ = 0.0;
  double trace_ = 0.0;
};

// Data log-likelihood of the scatter matrix under (sigma2, active set):
// -K N log pi - K log det M - tr(M^-1 S).
inline double active_loglik(const GramCache& g, const std::vector<int>& act,
                            const RVec& gamma_act, double sigma2, int k) {
  const ActiveModel model(g, act, gamma_act, sigma2);
  return -static_cast<double>(k) * g.n_channels * std::log(kPi) -
         k * model.logdet_m() - model.trace_m_inv_s();
}

inline std::vector<int> positive_subset(const std::vector<int>& support,
                                        const RVec& values,
                                        RVec* kept = nullptr) {
  std::vector<int> act;
  std::vector<double> vals;
  for (std::size_t j = 0; j < support.size(); ++j)
    if (values(static_cast<Eigen::Index>(j)) > 0.0) {
      act.push_back(support[j]);
      vals.push_back(values(static_cast<Eigen::Index>(j)));
    }
  if (kept) {
    kept->resize(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t j = 0; j < vals.size(); ++j)
      (*kept)(static_cast<Eigen::Index>(j)) = vals[j];
  }
  return act;
}

// Cyclic likelihood refinement over a fixed index set. Each coordinate gets
// the closed-form argmax of the likelihood with the others frozen:
//   d_i = max{ (v'A^-1 S A^-1 v - K v'A^-1 v) / (K (v'A^-1 v)^2), 0 },
// A = covariance of the other support coordinates. Values clamped to zero
// stay in the set and are re-evaluated on later sweeps.
inline RVec refine_values(const GramCache& g, const std::vector<int>& support,
                          RVec values, double sigma2, int k, int max_sweeps,
                          double rel_tol,
                          std::vector<double>* loglik_trace = nullptr) {
  const int m = static_cast<int>(support.size());
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const RVec before = values;
    for (int pos = 0; pos < m; ++pos) {
      std::vector<int> others;
      std::vector<double> other_vals;
      for (int j = 0; j < m; ++j)
        if (j != pos && values(j) > 0.0) {
          others.push_back(support[j]);
          other_vals.push_back(values(j));
        }
      RVec gamma(static_cast<Eigen::Index>(other_vals.size()));
      for (std::size_t j = 0; j < other_vals.size(); ++j)
        gamma(static_cast<Eigen::Index>(j)) = other_vals[j];
      const ActiveModel base(g, others, gamma, sigma2);
      double alpha = 0.0, beta = 0.0;
      base.column_quads(support[pos], alpha, beta);
      values(pos) = std::max((beta - k * alpha) / (k * alpha * alpha), 0.0);
      if (loglik_trace) {
        RVec kept;
        const std::vector<int> act = positive_subset(support, values, &kept);
        loglik_trace->push_back(active_loglik(g, act, kept, sigma2, k));
      }
    }
    const double den = before.norm();
    const double num = (values - before).norm();
    if (den == 0.0 ? num == 0.0 : num < rel_tol * den) break;
  }
  return values;
}

// BIC of a refined candidate:
//   2 K log det M + 2 tr(M^-1 S) + order log(2 N K),
// order = number of strictly positive entries actually kept.
inline double bic_from_values(const GramCache& g,
                              const std::vector<int>& support,
                              const RVec& values, double sigma2, int k,
                              int* order_out = nullptr) {
  RVec kept;
  const std::vector<int> act = positive_subset(support, values, &kept);
  const ActiveModel model(g, act, kept, sigma2);
  const int order = static_cast<int>(act.size());
  if (order_out) *order_out = order;
  return 2.0 * k * model.logdet_m() + 2.0 * model.trace_m_inv_s() +
         order * std::log(2.0 * g.n_channels * k);
}

struct StepEval {
  RVec d_next;
  double g_at_input;  // ascent objective evaluated at the input d
};

// One majorize-maximize fixed-point step. Zeros are absorbing. Also returns
// g(d) since the Cholesky of M(d) is already in hand.
inline StepEval fixed_point_step_eval(const RVec& d, double sigma2, double q,
                                      const CMat& s, const Dictionary& dict,
                                      int k) {
  const int n = dict.n_channels;
  const CMat m = interference_covariance(sigma2, d, dict);
  const auto llt = cov_chol(m);
  const double logdet = chol_logdet(llt);
  const double trace = llt.solve(s).trace().real();
  PriorParams prior{q, k, sigma2};
  StepEval out;
  out.g_at_input = -static_cast<double>(k) * n * std::log(kPi) - logdet -
                   trace - prior_penalty(d, prior);
  const CMat w = llt.solve(dict.matrix);
  const CMat x = s * w;
  out.d_next.resize(d.size());
  for (Eigen::Index l = 0; l < d.size(); ++l) {
    if (d(l) == 0.0) {
      out.d_next(l) = 0.0;
      continue;
    }
    const double quad =
        (w.col(l).dot(x.col(l)) - dict.matrix.col(l).dot(w.col(l))).real();
    out.d_next(l) =
        std::pow(d(l), 2.0 - q) / k * std::max(quad, 0.0);
  }
  return out;
}

}  // namespace detail

// H(d) = M^-1 S M^-1 - M^-1 with M = noise_power I + V diag(d) V'.
// Hermitian up to roundoff; sign of v' H v decides growth vs clamp.
inline CMat h_matrix(const RVec& d, double noise_power, const CMat& s,
                     const Dictionary& dict) {
  const CMat m = interference_covariance(noise_power, d, dict);
  const auto llt = detail::cov_chol(m);
  const CMat y = llt.solve(s);  // M^-1 S
  const int n = dict.n_channels;
  return llt.solve(y.adjoint()) - llt.solve(CMat::Identity(n, n));
}

// Public fixed-point step: requires every d entry strictly positive (the
// estimator's internal trajectories own the zeros-are-absorbing semantics).
inline RVec fixed_point_step(const RVec& d, double noise_power, double q,
                             const CMat& s, const Dictionary& dict, int k) {
  if (!(noise_power >= 1.0))
    throw std::invalid_argument("fixed_point_step: noise power must be >= 1");
  if (!(q > 0.0 && q <= 1.0))
    throw std::invalid_argument("fixed_point_step: q must be in (0, 1]");
  if (k < 1) throw std::invalid_argument("fixed_point_step: k must be >= 1");
  if (d.size() != static_cast<Eigen::Index>(dict.size()))
    throw std::invalid_argument("fixed_point_step: d length mismatch");
  for (Eigen::Index l = 0; l < d.size(); ++l)
    if (!(d(l) > 0.0))
      throw std::invalid_argument(
          "fixed_point_step: d entries must be strictly positive");
  return detail::fixed_point_step_eval(d, noise_power, q, s, dict, k).d_next;
}

// Cyclic likelihood refinement restricted to `support`. Returns a full-length
// vector, zero off-support. Appends the post-update log-likelihood to
// loglik_trace after every coordinate update when provided (nondecreasing).
inline RVec refine_support(const RVec& d_in, const std::vector<int>& support,
                           double noise_power, const CMat& s,
                           const Dictionary& dict, int k,
                           const EstimatorConfig& config,
                           std::vector<double>* loglik_trace = nullptr) {
  config.validate();
  if (!(noise_power >= 1.0))
    throw std::invalid_argument("refine_support: noise power must be >= 1");
  if (d_in.size() != static_cast<Eigen::Index>(dict.size()))
    throw std::invalid_argument("refine_support: d length mismatch");
  std::vector<int> sorted = support;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("refine_support: duplicate support index");
  for (int i : sorted)
    if (i < 0 || i >= static_cast<int>(dict.size()))
      throw std::invalid_argument("refine_support: support index out of range");
  const auto gram = detail::GramCache::build(s, dict);
  RVec init(static_cast<Eigen::Index>(sorted.size()));
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    if (d_in(sorted[j]) < 0.0)
      throw std::invalid_argument("refine_support: d must be nonnegative");
    init(static_cast<Eigen::Index>(j)) = d_in(sorted[j]);
  }
  const RVec refined = detail::refine_values(
      gram, sorted, init, noise_power, k, config.refine_max_sweeps,
      config.rel_tol_inner, loglik_trace);
  RVec full = RVec::Zero(d_in.size());
  for (std::size_t j = 0; j < sorted.size(); ++j)
    full(sorted[j]) = refined(static_cast<Eigen::Index>(j));
  return full;
}

// BIC of a refined estimate; `order` must equal the count of strictly
// positive entries of d_refined.
inline double bic_score(const RVec& d_refined, double noise_power,
                        const CMat& s, const Dictionary& dict, int k,
                        int order) {
  if (!(noise_power > 0.0))
    throw std::invalid_argument("bic_score: noise power must be positive");
  int nnz = 0;
  for (Eigen::Index l = 0; l < d_refined.size(); ++l) {
    if (d_refined(l) < 0.0)
      throw std::invalid_argument("bic_score: d must be nonnegative");
    if (d_refined(l) > 0.0) ++nnz;
  }
  if (nnz != order)
    throw std::invalid_argument("bic_score: order does not match support size");
  const int n = dict.n_channels;
  const CMat m = interference_covariance(noise_power, d_refined, dict);
  const auto llt = detail::cov_chol(m);
  return 2.0 * k * detail::chol_logdet(llt) +
         2.0 * llt.solve(s).trace().real() +
         order * std::log(2.0 * n * k);
}

// H0 maximum-likelihood noise level: Tr(S) / (K N).
inline double noise_mle_h0(const CMat& s, int n, int k) {
  if (s.rows() != n || s.cols() != n)
    throw std::invalid_argument("noise_mle_h0: size mismatch");
  if (k < 1) throw std::invalid_argument("noise_mle_h0: k must be >= 1");
  return s.trace().real() / (static_cast<double>(k) * n);
}

// Stationary-point solve for the noise level on [1, inf):
//   f(x) = sum_i (s_i - K (x + lambda_i)) / (x + lambda_i)^2 = 0.
// All sign-change brackets on a 2048-point log grid over [1, ub] are
// bisected to 1e-10 relative width (plus a Newton polish); the boundary
// x = 1 always competes. Returns the candidate maximizing
//   L(x) = -K sum log(x + lambda_i) - sum s_i / (x + lambda_i).
inline double solve_sigma_stationary(const RVec& eigvals, const RVec& s_diag,
                                     int k) {
  const Eigen::Index n = eigvals.size();
  if (n < 1 || s_diag.size() != n)
    throw std::invalid_argument("solve_sigma_stationary: size mismatch");
  if (k < 1)
    throw std::invalid_argument("solve_sigma_stationary: k must be >= 1");
  for (Eigen::Index i = 0; i < n; ++i)
    if (eigvals(i) < 0.0 || s_diag(i) < 0.0)
      throw std::invalid_argument(
          "solve_sigma_stationary: negative eigenvalue or power");

  const auto f = [&](double x) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = x + eigvals(i);
      s += (s_diag(i) - k * t) / (t * t);
    }
    return s;
  };
  const auto fprime = [&](double x) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = x + eigvals(i);
      s += (k * t - 2.0 * s_diag(i)) / (t * t * t);
    }
    return s;
  };
  const auto loglik = [&](double x) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = x + eigvals(i);
      s += -static_cast<double>(k) * std::log(t) - s_diag(i) / t;
    }
    return s;
  };

  const double ub = s_diag.sum() / k + eigvals.maxCoeff() + 1.0;
  std::vector<double> candidates{1.0};
  if (ub > 1.0) {
    constexpr int kGridPoints = 2048;
    const double log_ub = std::log(ub);
    double x_prev = 1.0;
    double f_prev = f(x_prev);
    if (f_prev == 0.0) candidates.push_back(x_prev);
    for (int j = 1; j < kGridPoints; ++j) {
      const double x = std::exp(log_ub * j / (kGridPoints - 1));
      const double fx = f(x);
      if (fx == 0.0) {
        candidates.push_back(x);
      } else if (f_prev != 0.0 && std::signbit(fx) != std::signbit(f_prev)) {
        double lo = x_prev, hi = x;
        double flo = f_prev;
        while (hi - lo > 1e-10 * (0.5 * (hi + lo))) {
          const double mid = 0.5 * (lo + hi);
          const double fm = f(mid);
          if (fm == 0.0) {
            lo = hi = mid;
            break;
          }
          if (std::signbit(fm) == std::signbit(flo)) {
            lo = mid;
            flo = fm;
          } else {
            hi = mid;
          }
        }
        double root = 0.5 * (lo + hi);
        for (int it = 0; it < 2; ++it) {
          const double fp = fprime(root);
          if (fp == 0.0) break;
          const double next = root - f(root) / fp;
          if (next > lo - (hi - lo) && next < hi + (hi - lo) && next >= 1.0)
            root = next;
        }
        candidates.push_back(root);
      }
      x_prev = x;
      f_prev = fx;
    }
  }
  double best = candidates.front();
  double best_l = loglik(best);
  for (double c : candidates) {
    const double l = loglik(c);
    if (l > best_l) {
      best_l = l;
      best = c;
    }
  }
  return best;
}

namespace detail {

struct Candidate {
  double bic = std::numeric_limits<double>::infinity();
  int order = 0;
  double q = 0.0;
  int h_nominal = 0;
  RVec d;
};

inline bool candidate_less(const Candidate& a, const Candidate& b) {
  if (a.bic != b.bic) return a.bic < b.bic;
  if (a.order != b.order) return a.order < b.order;
  if (a.q != b.q) return a.q < b.q;
  return a.h_nominal < b.h_nominal;
}

// estimate_known_sigma body, sharing a prebuilt GramCache so the joint loop
// pays the O(N^2 L) Gram setup once per scatter matrix.
inline SparseEstimate estimate_known_sigma_impl(const GramCache& gram,
                                                const CMat& s, double sigma2,
                                                const Dictionary& dict, int k,
                                                const EstimatorConfig& cfg) {
  const int ell = static_cast<int>(dict.size());
  const int n = dict.n_channels;

  // Matched-filter initialization, shared by every q trajectory.
  RVec d0(ell);
  for (int l = 0; l < ell; ++l)
    d0(l) = std::max(gram.vsv(l, l).real() / k - sigma2, cfg.init_floor);

  struct Trajectory {
    RVec d;
    std::vector<double> trace;
  };
  std::vector<Trajectory> traj(cfg.q_grid.size());
  for (auto& t : traj) t.d = d0;

  const double bic_zero = 2.0 * k * n * std::log(sigma2) +
                          2.0 * gram.tr_s / sigma2;

  Candidate winner, prev_winner;
  bool have_prev = false;
  int iters = 0;
  for (int it = 1; it <= cfg.inner_max_iters; ++it) {
    iters = it;
    for (std::size_t qi = 0; qi < cfg.q_grid.size(); ++qi) {
      auto step = fixed_point_step_eval(traj[qi].d, sigma2, cfg.q_grid[qi], s,
                                        dict, k);
      traj[qi].trace.push_back(step.g_at_input);
      // A step clamping every coordinate to zero would end the trajectory
      // (zeros are absorbing) before refinement ever saw its support, and
      // committing it can decrease g when K is small and H(d) is indefinite.
      // Freeze such a trajectory at its last live iterate instead.
      if (step.d_next.maxCoeff() > 0.0) traj[qi].d = std::move(step.d_next);
    }

    // Candidate generation: refinement results depend only on the support,
    // so they are shared across the q grid within this sweep. The order-0
    // reference model competes in every sweep.
    winner = Candidate{};
    winner.bic = bic_zero;
    winner.order = 0;
    winner.q = cfg.q_grid.front();
    winner.h_nominal = 0;
    winner.d = RVec::Zero(ell);
    std::map<std::vector<int>, std::pair<RVec, std::pair<double, int>>> cache;
    for (std::size_t qi = 0; qi < cfg.q_grid.size(); ++qi) {
      const RVec& dq = traj[qi].d;
      std::vector<int> pos;
      for (int l = 0; l < ell; ++l)
        if (dq(l) > 0.0) pos.push_back(l);
      if (pos.empty()) {
        Candidate c;
        c.bic = bic_zero;
        c.order = 0;
        c.q = cfg.q_grid[qi];
        c.h_nominal = 0;
        c.d = RVec::Zero(ell);
        if (candidate_less(c, winner)) winner = c;
        continue;
      }
      std::stable_sort(pos.begin(), pos.end(),
                       [&](int a, int b) { return dq(a) > dq(b); });
      const int h_max = std::min<int>(cfg.nj_max, static_cast<int>(pos.size()));
      for (int h = 1; h <= h_max; ++h) {
        std::vector<int> support(pos.begin(), pos.begin() + h);
        std::sort(support.begin(), support.end());
        auto found = cache.find(support);
        if (found == cache.end()) {
          RVec init(h);
          for (int j = 0; j < h; ++j) init(j) = dq(support[j]);
          const RVec refined =
              refine_values(gram, support, init, sigma2, k,
                            cfg.refine_max_sweeps, cfg.rel_tol_inner);
          int order = 0;
          const double bic = bic_from_values(gram, support, refined, sigma2,
                                             k, &order);
          RVec full = RVec::Zero(ell);
          for (int j = 0; j < h; ++j) full(support[j]) = refined(j);
          found = cache.emplace(std::move(support),
                                std::make_pair(std::move(full),
                                               std::make_pair(bic, order)))
                      .first;
        }
        Candidate c;
        c.bic = found->second.second.first;
        c.order = found->second.second.second;
        c.q = cfg.q_grid[qi];
        c.h_nominal = h;
        c.d = found->second.first;
        if (candidate_less(c, winner)) winner = c;
      }
    }

    if (have_prev) {
      const double den = prev_winner.d.norm();
      const double num = (winner.d - prev_winner.d).norm();
      const bool converged = den == 0.0 ? num == 0.0 : num < cfg.rel_tol_inner * den;
      if (converged) break;
    }
    prev_winner = winner;
    have_prev = true;
  }

  SparseEstimate est;
  est.d = winner.d;
  est.noise_power = sigma2;
  est.q_selected = winner.order > 0 ? winner.q : 0.0;
  est.order = winner.order;
  est.iters_used = iters;
  const std::size_t win_qi =
      std::find(cfg.q_grid.begin(), cfg.q_grid.end(), winner.q) -
      cfg.q_grid.begin();
  est.objective_trace = traj[win_qi].trace;
  // Close the trace with g at the final trajectory point.
  est.objective_trace.push_back(
      fixed_point_step_eval(traj[win_qi].d, sigma2, winner.q, s, dict, k)
          .g_at_input);
  return est;
}

inline void validate_estimator_inputs(const CMat& s, const Dictionary& dict,
                                      int k, const EstimatorConfig& cfg) {
  cfg.validate();
  if (s.rows() != dict.n_channels || s.cols() != dict.n_channels)
    throw std::invalid_argument("estimator: S size mismatch");
  if (k < 1) throw std::invalid_argument("estimator: k must be >= 1");
  if (cfg.nj_max >= dict.n_channels)
    throw std::invalid_argument("estimator: nj_max must be < n_channels");
  if (cfg.nj_max > static_cast<int>(dict.size()))
    throw std::invalid_argument("estimator: nj_max exceeds grid size");
}

}  // namespace detail

// Sparse power estimation at a known noise level. Runs one fixed-point
// trajectory per q, refines the top-h supports (h = 1..nj_max) each sweep,
// scores them by BIC, and stops when the BIC winner's d stabilizes.
inline SparseEstimate estimate_known_sigma(const CMat& s, double noise_power,
                                           const Dictionary& dict, int k,
                                           const EstimatorConfig& config) {
  detail::validate_estimator_inputs(s, dict, k, config);
  if (!(noise_power >= 1.0))
    throw std::invalid_argument(
        "estimate_known_sigma: noise power must be >= 1");
  const auto gram = detail::GramCache::build(s, dict);
  return detail::estimate_known_sigma_impl(gram, s, noise_power, dict, k,
                                           config);
}

// Joint estimation of (d, sigma2): alternate the known-sigma estimator with
// the stationary noise solve until the combined relative change
// ||delta d|| / ||d|| + |delta sigma2| / sigma2 drops below rel_tol_outer.
inline SparseEstimate estimate_joint(const CMat& s, const Dictionary& dict,
                                     int k, const EstimatorConfig& config) {
  detail::validate_estimator_inputs(s, dict, k, config);
  const auto gram = detail::GramCache::build(s, dict);
  const int n = dict.n_channels;

  double sigma2 = std::max(1.0, gram.tr_s / (static_cast<double>(k) * n));
  RVec prev_d = RVec::Zero(static_cast<Eigen::Index>(dict.size()));
  double prev_sigma2 = sigma2;

  SparseEstimate est;
  int outer = 0;
  for (int it = 1; it <= config.outer_max_iters; ++it) {
    outer = it;
    est = detail::estimate_known_sigma_impl(gram, s, sigma2, dict, k, config);

    // Noise update: eigenvalues of V diag(d) V' in low-rank form. The N - m
    // zero eigenvalues enter the stationary equation only through their
    // total snapshot power, so the residual trace is split equally.
    std::vector<int> act;
    for (Eigen::Index l = 0; l < est.d.size(); ++l)
      if (est.d(l) > 0.0) act.push_back(static_cast<int>(l));
    const int m = static_cast<int>(act.size());
    RVec lambda = RVec::Zero(n);
    RVec s_diag = RVec::Zero(n);
    int m_eff = 0;
    double captured = 0.0;
    if (m > 0) {
      CMat gmat(m, m), wmat(m, m);
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
          const double sg =
              std::sqrt(est.d(act[a])) * std::sqrt(est.d(act[b]));
          gmat(a, b) = sg * gram.vv(act[a], act[b]);
          wmat(a, b) = sg * gram.vsv(act[a], act[b]);
        }
      Eigen::SelfAdjointEigenSolver<CMat> es(gmat);
      if (es.info() != Eigen::Success)
        throw numeric_error("estimate_joint: eigensolve failed");
      const double mu_max = std::max(es.eigenvalues().maxCoeff(), 0.0);
      for (int j = m - 1; j >= 0; --j) {  // descending order
        const double mu = es.eigenvalues()(j);
        if (mu <= 1e-12 * std::max(mu_max, 1.0)) continue;
        const CVec qv = es.eigenvectors().col(j);
        const double sval =
            std::max((qv.adjoint() * wmat * qv)(0, 0).real() / mu, 0.0);
        lambda(m_eff) = mu;
        s_diag(m_eff) = sval;
        captured += sval;
        ++m_eff;
      }
    }
    if (m_eff < n) {
      const double rest = std::max(gram.tr_s - captured, 0.0) / (n - m_eff);
      for (int i = m_eff; i < n; ++i) s_diag(i) = rest;
    }
    const double sigma2_new = solve_sigma_stationary(lambda, s_diag, k);

    const double den = prev_d.norm();
    const double num = (est.d - prev_d).norm();
    const double d_term =
        den == 0.0
            ? (num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity())
            : num / den;
    const double s_term = std::abs(sigma2_new - prev_sigma2) / prev_sigma2;
    prev_d = est.d;
    prev_sigma2 = sigma2_new;
    sigma2 = sigma2_new;
    if (d_term + s_term < config.rel_tol_outer) break;
  }
  est.noise_power = sigma2;
  est.iters_used = outer;
  return est;
}

}  // namespace nlj
