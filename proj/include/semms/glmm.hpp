#ifndef SEMMS_GLMM_HPP
#define SEMMS_GLMM_HPP

#include "semms/lmm.hpp"

namespace semms {

/// Canonical family registry: Poisson/log and binomial/logit (Gaussian/
/// identity is included so the degenerate identity-link algebra can be
/// exercised).  Dispersion is fixed at 1.
struct FamilySpec {
  Family family = Family::Gaussian;

  double link(double mu) const;
  double inv_link(double eta) const;
  double variance(double mu) const;
  double deta_dmu(double mu) const;
  /// Poisson means are pinned to [1e-8, inf), binomial to
  /// [1e-8, 1 - 1e-8] before any link evaluation.
  double clamp_mean(double mu) const;

  static FamilySpec make(Family f);
};

struct GlmmFit {
  VarComp varcomp;
  Vec fixed_coefs;
  Vec eta_full;
  Vec eta_fixed;
  Vec mu_hat;
  Vec u_hat;  // link-scale RE contribution, eta_full - eta_fixed
  double approx_loglik = 0.0;  // final working-model Gaussian likelihood
  int n_iters = 0;
  bool converged = false;
  Mat ranef;
};

/// RE-adjusted working response W* = eta_fixed + (y - mu) * deta/dmu.
Vec working_response(const Vec& y, const Vec& mu_hat, const Vec& eta_fixed,
                     const FamilySpec& fam);

/// Documented alternative: g(y) - u_hat with y clamped to the
/// family-safe mean range first.
Vec link_adjusted_response(const Vec& y, const Vec& u_hat,
                           const FamilySpec& fam);

/// Penalized quasi-likelihood: iterates working response and weights
/// w = v(mu), refits a weighted Gaussian LMM with the dispersion fixed
/// at 1, and refreshes the fitted means; ML weighting throughout.
GlmmFit fit_glmm_pql(const Vec& y, const Mat& w_fixed, const ReSpec& re,
                     const FamilySpec& fam);

/// Weighted Gaussian LMM with residual covariance sigma2_e diag(1/w);
/// reduces to fit_lmm at unit weights.
ReFit fit_lmm_weighted(const Vec& y, const Mat& w_fixed, const ReSpec& re,
                       const Vec& weights, MixedMethod method = MixedMethod::ML);

/// Plain (no random effects) GLM by IRLS; used for initial linear
/// predictors.  Returns the coefficient vector.
Vec glm_irls(const Vec& y, const Mat& x, const FamilySpec& fam);

}  // namespace semms

#endif
