#ifndef SEMMS_OPTIM_HPP
#define SEMMS_OPTIM_HPP

#include <functional>

#include "semms/types.hpp"

namespace semms {

/// Brent minimization on [a, b].  Tolerance is on the argument.
double brent_min(const std::function<double(double)>& fn, double a, double b,
                 double tol = 1e-10, int max_iter = 200);

struct NelderMeadResult {
  Vec x;
  double fx = 0.0;
  int n_evals = 0;
  bool converged = false;
};

/// Downhill simplex with adaptive restarts handled by the caller.
/// `step` sets the initial simplex edge per coordinate.
NelderMeadResult nelder_mead(const std::function<double(const Vec&)>& fn,
                             const Vec& x0, double step, double ftol = 1e-10,
                             int max_iter = 2000);

}  // namespace semms

#endif
