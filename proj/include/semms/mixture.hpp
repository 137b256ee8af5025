#ifndef SEMMS_MIXTURE_HPP
#define SEMMS_MIXTURE_HPP

#include <cstdint>
#include <vector>

#include "semms/dataset.hpp"
#include "semms/types.hpp"

namespace semms {

/// Ternary label per candidate: -1 (negative effect), 0 (null),
/// +1 (positive effect).  `active` lists the nonzero indices in
/// ascending order; the component counts are kept in sync by set().
struct MixtureState {
  std::vector<std::int8_t> gamma;
  std::vector<int> active;
  int n_minus = 0;
  int n_zero = 0;
  int n_plus = 0;

  static MixtureState null_state(int k);

  void set(int k, std::int8_t s);
  int L() const { return n_minus + n_plus; }
  int K() const { return static_cast<int>(gamma.size()); }
  bool counts_consistent() const;
};

struct ModelParams {
  double mu = 0.1;       // common effect magnitude, > 0 while the set is nonempty
  Vec beta;              // fixed effects for X
  double sigma2_e = 1.0; // observation noise variance
  double sigma2_r = 0.01;// active-coefficient deviation variance
};

/// Cross-products reused across likelihood evaluations for one active
/// set.  B = (I_L + (sigma2_r/sigma2_e) Zg'Zg)^{-1} is the only block
/// that depends on the variance parameters; refresh_b updates it alone.
/// No N x N matrix is ever formed.
struct LikelihoodWorkspace {
  Mat ZG;    // N x L, signed active columns Z_S diag(gamma_S)
  Mat ZtZ;   // L x L
  Mat B;     // L x L
  double logdet_ib = 0.0;  // log|I + ratio * ZtZ|
  Mat HtH;   // (P+L) x (P+L), H = [X | ZG]
  Vec HtY;   // P+L
  double yty = 0.0;
};

/// Multiplicity log-prior: sum over components of L_s log(L_s / K),
/// with 0 log 0 = 0.  Always <= 0; equals 0 iff one component holds
/// every label.
double prior_log_score(const MixtureState& state, int k);

LikelihoodWorkspace build_workspace(const Dataset& d, const MixtureState& state,
                                    const ModelParams& p);

/// Recomputes B and its log-determinant from the current variance ratio.
void refresh_b(LikelihoodWorkspace& w, const ModelParams& p);

/// Marginal Gaussian log-likelihood of y with mean X beta + ZG mu 1 and
/// covariance sigma2_e I + sigma2_r ZG ZG', evaluated through the
/// Woodbury identity and the matrix determinant lemma.
double log_likelihood(const Dataset& d, const MixtureState& state,
                      const ModelParams& p, const LikelihoodWorkspace& w);

/// Full cross-products of one dataset, computed once per fit so that
/// candidate moves only gather small sub-blocks.
struct GramCache {
  Mat ZtZ;  // K x K
  Mat XtZ;  // P x K
  Mat XtX;  // P x P
  Vec Zty;  // K
  Vec Xty;  // P
  double yty = 0.0;
  int n = 0;

  static GramCache build(const Dataset& d);
};

/// prior + likelihood for an arbitrary signed active set, from gathered
/// gram blocks.  `signs` is aligned with `active`.
double objective_from_grams(const GramCache& g, const std::vector<int>& active,
                            const std::vector<std::int8_t>& signs,
                            const ModelParams& p, int k_total);

/// Objective change from reassigning gamma_k <- s with parameters held
/// fixed.  Requires s != gamma_k.
double delta_score(const GramCache& g, const MixtureState& state,
                   const ModelParams& p, int k, std::int8_t s);

/// Convenience overload that builds the gram cache; intended for small
/// problems and tests.
double delta_score(const Dataset& d, const MixtureState& state,
                   const ModelParams& p, int k, std::int8_t s);

struct Move {
  int k = -1;
  std::int8_t s = 0;
  double gain = 0.0;
};

/// Gains for every admissible reassignment (k, s != gamma_k), in a fixed
/// order: k ascending, s in (+1, -1, 0).  The OpenMP variant computes
/// the same values as the serial reference bit-for-bit.
std::vector<Move> sweep_gains_serial(const GramCache& g, const MixtureState& state,
                                     const ModelParams& p);
std::vector<Move> sweep_gains(const GramCache& g, const MixtureState& state,
                              const ModelParams& p);

/// Deterministic winner: largest gain, ties broken by smallest k, then
/// +1 before -1 before 0.
Move best_move(const std::vector<Move>& moves);

}  // namespace semms

#endif
