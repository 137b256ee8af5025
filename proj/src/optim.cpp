#include "semms/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace semms {

double brent_min(const std::function<double(double)>& fn, double a, double b,
                 double tol, int max_iter) {
  const double golden = 0.5 * (3.0 - std::sqrt(5.0));
  double x = a + golden * (b - a);
  double w = x, v = x;
  double fx = fn(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;

  for (int iter = 0; iter < max_iter; ++iter) {
    const double mid = 0.5 * (a + b);
    const double tol1 = tol * std::abs(x) + 1e-14;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - mid) <= tol2 - 0.5 * (b - a)) break;

    bool use_golden = true;
    if (std::abs(e) > tol1) {
      // Parabolic interpolation through (v, w, x).
      const double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double e_old = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * e_old) && p > q * (a - x) &&
          p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (mid > x) ? tol1 : -tol1;
        use_golden = false;
      }
    }
    if (use_golden) {
      e = (x < mid) ? b - x : a - x;
      d = golden * e;
    }
    const double u = (std::abs(d) >= tol1) ? x + d : x + ((d > 0) ? tol1 : -tol1);
    const double fu = fn(u);
    if (fu <= fx) {
      if (u < x) b = x; else a = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return x;
}

NelderMeadResult nelder_mead(const std::function<double(const Vec&)>& fn,
                             const Vec& x0, double step, double ftol,
                             int max_iter) {
  const int dim = static_cast<int>(x0.size());
  std::vector<Vec> simplex(dim + 1, x0);
  std::vector<double> fvals(dim + 1);
  for (int i = 1; i <= dim; ++i) {
    simplex[i](i - 1) += (x0(i - 1) != 0.0) ? step * std::abs(x0(i - 1)) : step;
  }
  NelderMeadResult result;
  for (int i = 0; i <= dim; ++i) {
    fvals[i] = fn(simplex[i]);
    ++result.n_evals;
  }

  std::vector<int> order(dim + 1);
  for (int iter = 0; iter < max_iter; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return fvals[a] < fvals[b]; });
    const int best = order[0], worst = order[dim], second = order[dim - 1];

    const double spread = std::abs(fvals[worst] - fvals[best]);
    if (spread <= ftol * (std::abs(fvals[best]) + ftol)) {
      result.converged = true;
      result.x = simplex[best];
      result.fx = fvals[best];
      return result;
    }

    Vec centroid = Vec::Zero(dim);
    for (int i = 0; i <= dim; ++i) {
      if (i != worst) centroid += simplex[i];
    }
    centroid /= dim;

    auto eval = [&](const Vec& x) {
      ++result.n_evals;
      return fn(x);
    };

    const Vec reflected = centroid + (centroid - simplex[worst]);
    const double f_reflected = eval(reflected);
    if (f_reflected < fvals[best]) {
      const Vec expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double f_expanded = eval(expanded);
      if (f_expanded < f_reflected) {
        simplex[worst] = expanded; fvals[worst] = f_expanded;
      } else {
        simplex[worst] = reflected; fvals[worst] = f_reflected;
      }
    } else if (f_reflected < fvals[second]) {
      simplex[worst] = reflected; fvals[worst] = f_reflected;
    } else {
      const Vec contracted = centroid + 0.5 * (simplex[worst] - centroid);
      const double f_contracted = eval(contracted);
      if (f_contracted < fvals[worst]) {
        simplex[worst] = contracted; fvals[worst] = f_contracted;
      } else {
        // Shrink toward the best vertex.
        for (int i = 0; i <= dim; ++i) {
          if (i == best) continue;
          simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
          fvals[i] = eval(simplex[i]);
        }
      }
    }
  }

  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return fvals[a] < fvals[b]; });
  result.x = simplex[order[0]];
  result.fx = fvals[order[0]];
  return result;
}

}  // namespace semms
