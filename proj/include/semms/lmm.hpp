#ifndef SEMMS_LMM_HPP
#define SEMMS_LMM_HPP

#include <vector>

#include "semms/dataset.hpp"
#include "semms/types.hpp"

namespace semms {

/// One grouping factor with a random intercept, a random slope on a
/// continuous covariate, or both.
struct ReSpec {
  bool intercept = true;
  bool slope = false;
  std::vector<int> group;  // dense cluster codes, length N
  Vec slope_covariate;     // length N iff slope

  int n_clusters() const;
  int q() const { return (intercept ? 1 : 0) + (slope ? 1 : 0); }
};

ReSpec re_from_dataset(const Dataset& d, bool intercept, bool slope);

struct VarComp {
  double sigma_b0 = 0.0;
  double sigma_b1 = 0.0;
  double rho = 0.0;      // meaningful only when both REs are present
  double sigma_e = 1.0;
};

enum class MixedMethod { ML, REML };

struct ReFit {
  VarComp varcomp;
  Vec fixed_coefs;
  Vec u_hat;        // per-observation BLUP contribution, length N
  double loglik;    // ML log-likelihood (reported for REML fits too)
  MixedMethod method = MixedMethod::ML;
  double aic;
  Vec theta;        // converged relative-Cholesky parameters
  double deviance;  // -2 x (restricted) log-likelihood at the optimum
  Vec fitted_full;
  Vec fitted_fixed;
  Mat ranef;        // m x q cluster-level BLUPs
};

/// Profiled (restricted) maximum likelihood over the Cholesky factor of
/// D / sigma2_e, fixed effects and the residual variance profiled out
/// analytically.  Derivative-free optimization with scaled restarts.
ReFit fit_lmm(const Vec& y, const Mat& w, const ReSpec& re, MixedMethod method);

/// Full fitted values minus fixed-effects-only fitted values.
Vec blup_offset(const ReFit& fit);

/// -2 x profiled (restricted) log-likelihood at theta.  Theta holds the
/// relative Cholesky factor: one value per single random effect, or
/// (l00, l10, l11) when both intercept and slope are present.  Signs are
/// immaterial; non-finite input yields +infinity.
double profiled_deviance(const Vec& theta, const Vec& y, const Mat& w,
                         const ReSpec& re, MixedMethod method);

namespace detail {

/// Per-cluster cross-products for the profiled deviance; data may be
/// row-scaled by sqrt(weights) before entry.  zre_raw keeps the
/// unscaled RE design for BLUP offset expansion.
struct LmmCore {
  int n = 0, p = 0, q = 0, m = 0;
  std::vector<Mat> ztz;  // q x q per cluster
  std::vector<Mat> ztw;  // q x p per cluster
  std::vector<Vec> zty;  // q per cluster
  Mat wtw;               // p x p total
  Vec wty;               // p total
  double yty = 0.0;
  double sum_log_w = 0.0;  // Jacobian of the row scaling
  std::vector<std::vector<int>> cluster_rows;
  Mat zre_raw;  // N x q
};

struct ThetaEval {
  double deviance = 0.0;
  Vec beta;
  double sigma2 = 0.0;  // profiled residual variance (1 when fixed)
  double logdet_v = 0.0;
  double r_vinv_r = 0.0;
};

LmmCore build_core(const Vec& y, const Mat& w, const ReSpec& re,
                   const Vec* weights);
Mat lambda_from_theta(const Vec& theta, int q);
ThetaEval eval_theta(const LmmCore& core, const Vec& theta, MixedMethod method,
                     bool fix_unit_sigma);
/// Shared fitting path; weights may be null.  fix_unit_sigma pins the
/// residual variance of the working model to 1 (PQL dispersion).
ReFit fit_core(const Vec& y, const Mat& w, const ReSpec& re, MixedMethod method,
               bool fix_unit_sigma, const Vec* weights);

}  // namespace detail

}  // namespace semms

#endif
