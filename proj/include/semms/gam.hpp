#ifndef SEMMS_GAM_HPP
#define SEMMS_GAM_HPP

#include <utility>
#include <vector>

#include "semms/mixture.hpp"

namespace semms {

struct FitConfig {
  int nn = 5;              // size of the correlation-ranked initial set
  double mincor = 0.7;     // pairwise redundancy threshold at initialization
  double minchange = 1.0;  // minimum accepted objective gain
  int max_gam_iters = 100;
  double em_tol = 1e-6;
  int em_max_iters = 200;
};

struct SemmsFit {
  MixtureState state;
  ModelParams params;
  std::vector<double> trace;  // prior + likelihood after init and each move
  int n_iters = 0;            // accepted moves (outer rounds for the GLM path)
  bool converged = false;
  std::vector<double> em_loglik_trace;  // concatenated per-EM-step likelihoods
};

/// Ranks candidates by |cor(Z_k, y)| and takes the top nn, skipping any
/// candidate whose absolute pairwise correlation with an already-chosen
/// one exceeds mincor.  Signs follow the marginal correlations.
MixtureState init_active_set(const Dataset& d, const FitConfig& cfg);

/// Inner EM over (mu, beta, sigma2_e, sigma2_r) with the active
/// coefficient deviations as latent variables.  Monotone in the marginal
/// likelihood; appends per-iteration likelihood values to *lik_trace
/// when given.  With an empty active set this reduces to OLS.
ModelParams em_update(const Dataset& d, const MixtureState& state,
                      ModelParams p, const FitConfig& cfg,
                      std::vector<double>* lik_trace = nullptr);

/// One greedy pass: evaluates every admissible reassignment and applies
/// the single best move if its gain exceeds minchange.
std::pair<MixtureState, bool> greedy_step(const Dataset& d,
                                          const MixtureState& state,
                                          const ModelParams& p,
                                          const FitConfig& cfg);

/// Full Gaussian fit: alternating greedy moves and EM refreshes until no
/// acceptable move remains, run from two deterministic starts (the
/// correlation-ranked set and the empty set) with the better final
/// objective returned.  Z is standardized internally.
SemmsFit fit_semms(const Dataset& d, const FitConfig& cfg);

/// Poisson/binomial fit: an outer IRLS loop forms a working response
/// around the current fitted linear predictor and reuses the Gaussian
/// machinery; stops when the active set is stable (max 10 rounds).
SemmsFit fit_semms_glm(const Dataset& d, const FitConfig& cfg);

/// Posterior-mean fitted values X beta + ZG (mu 1 + m).
Vec semms_fitted(const Dataset& d, const MixtureState& state,
                 const ModelParams& p);

namespace detail {
/// Cache-reusing variants for the fit loop.
std::pair<MixtureState, bool> greedy_step(const GramCache& g,
                                          const MixtureState& state,
                                          const ModelParams& p,
                                          const FitConfig& cfg);
ModelParams initial_params(const Dataset& d, const MixtureState& state);
}  // namespace detail

}  // namespace semms

#endif
