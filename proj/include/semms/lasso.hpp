#ifndef SEMMS_LASSO_HPP
#define SEMMS_LASSO_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "semms/dataset.hpp"

namespace semms {

struct LassoResult {
  std::vector<int> selected;   // nonzero candidate coefficients at lambda_chosen
  double lambda_chosen = 0.0;
  std::vector<std::pair<double, double>> cv_curve;  // (lambda, mean CV deviance)
  Vec coef_z;  // candidate coefficients at lambda_chosen (standardized scale)
  Vec coef_x;  // unpenalized fixed-design coefficients
  std::uint64_t seed = 0;
  int refold_attempts = 0;
};

/// Cyclic coordinate descent over a 100-point log-spaced path from
/// lambda_max down to 0.001 lambda_max, K-fold CV with observation-level
/// folds, minimum-mean-deviance rule.  Z is standardized internally.
/// Poisson/binomial paths wrap the descent in IRLS.
LassoResult fit_lasso_cv(const Dataset& d, Family fam, int nfolds,
                         int n_lambda, std::uint64_t seed);

}  // namespace semms

#endif
