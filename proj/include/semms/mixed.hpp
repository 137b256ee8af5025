#ifndef SEMMS_MIXED_HPP
#define SEMMS_MIXED_HPP

#include <optional>
#include <string>
#include <vector>

#include "semms/gam.hpp"
#include "semms/glmm.hpp"

namespace semms {

struct MixedConfig {
  bool re_intercept = true;
  bool re_slope = false;
  double conv_tol = 1e-3;  // on max |delta u_hat|
  int max_outer = 10;
  FitConfig semms;
  Family family = Family::Gaussian;
  /// Use g(y) - u_hat instead of the full working response in the
  /// non-Gaussian fixed-effects step.
  bool link_adjusted = false;
  /// Diagnostics switch: skip the null-model warm start (u starts at 0).
  bool warm_start = true;
};

struct FinalModel {
  std::optional<ReFit> lmm;
  std::optional<GlmmFit> glmm;
  double aic = 0.0;
  Vec vif;  // one entry per fixed-design column (1.0 for constants)
  std::vector<std::string> fixed_names;
};

struct MixedFit {
  MixtureState state;
  FinalModel final_model;
  Vec u_hat;
  int outer_iters = 0;
  bool converged = false;
  std::vector<double> u_trace;                   // max |delta u| per iteration
  std::vector<std::vector<int>> selected_trace;  // active set per iteration
  std::vector<double> re_loglik_trace;           // RE refit (approx) logliks
  SemmsFit semms_fit;                            // last fixed-effects step
};

/// Alternating fixed-effects / random-effects loop: warm start from a
/// null RE model, then repeat (adjusted response -> SEMMS -> RE refit)
/// until the BLUP offset stabilizes; final refit by REML (Gaussian) or
/// PQL/ML (Poisson, binomial).
MixedFit fit_semms_mixed(const Dataset& d, const MixedConfig& cfg);

/// Standalone refit of the selected model plus AIC and variance
/// inflation factors for the fixed design.
FinalModel run_final_model(const Dataset& d, const MixtureState& state,
                           const MixedConfig& cfg);

}  // namespace semms

#endif
