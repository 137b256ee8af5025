#include "semms/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "semms/glmm.hpp"
#include "semms/rng.hpp"

namespace semms {

namespace {

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

struct PathPoint {
  Vec coef_z;
  Vec coef_x;
};

// Penalized weighted least squares by cyclic coordinate descent:
// (1/2N) sum w_i (u_i - x_i'bx - z_i'bz)^2 + lambda ||bz||_1,
// with the fixed-design part unpenalized.  N is the full-data count so
// lambda means the same thing across CV folds.
void weighted_cd(const Mat& x, const Mat& z, const Vec& u, const Vec& w,
                 double lambda, double n_norm, Vec& bx, Vec& bz) {
  const int k = static_cast<int>(z.cols());
  Vec r = u - x * bx - z * bz;
  Vec znorm(k);
  for (int j = 0; j < k; ++j) {
    znorm(j) = z.col(j).cwiseProduct(w).dot(z.col(j)) / n_norm;
  }
  const Mat xw = w.asDiagonal() * x;
  const Mat xtx = x.transpose() * xw;

  for (int cycle = 0; cycle < 1000; ++cycle) {
    double max_change = 0.0;
    // Unpenalized block by weighted OLS on the partial residual.
    const Vec bx_new = xtx.ldlt().solve(xw.transpose() * (r + x * bx));
    r += x * (bx - bx_new);
    max_change = std::max(max_change, (bx - bx_new).cwiseAbs().maxCoeff());
    bx = bx_new;

    for (int j = 0; j < k; ++j) {
      if (znorm(j) <= 0.0) continue;
      const double rho =
          z.col(j).cwiseProduct(w).dot(r) / n_norm + znorm(j) * bz(j);
      const double bj = soft_threshold(rho, lambda) / znorm(j);
      if (bj != bz(j)) {
        r += z.col(j) * (bz(j) - bj);
        max_change = std::max(max_change, std::abs(bj - bz(j)));
        bz(j) = bj;
      }
    }
    if (max_change < 1e-7) break;
  }
}

// Gaussian path along a descending lambda grid with warm starts.
std::vector<PathPoint> gaussian_path(const Mat& x, const Mat& z, const Vec& y,
                                     const std::vector<double>& lambdas,
                                     double n_norm) {
  const Vec w = Vec::Ones(y.size());
  Vec bx = (x.transpose() * x).ldlt().solve(x.transpose() * y);
  Vec bz = Vec::Zero(z.cols());
  std::vector<PathPoint> path;
  path.reserve(lambdas.size());
  for (double lam : lambdas) {
    weighted_cd(x, z, y, w, lam, n_norm, bx, bz);
    path.push_back({bz, bx});
  }
  return path;
}

// IRLS-wrapped path for poisson/binomial.
std::vector<PathPoint> glm_path(const Mat& x, const Mat& z, const Vec& y,
                                const std::vector<double>& lambdas,
                                double n_norm, const FamilySpec& fam) {
  Vec bx = glm_irls(y, x, fam);
  Vec bz = Vec::Zero(z.cols());
  std::vector<PathPoint> path;
  path.reserve(lambdas.size());
  const int n = static_cast<int>(y.size());
  for (double lam : lambdas) {
    for (int outer = 0; outer < 50; ++outer) {
      const Vec eta = x * bx + z * bz;
      Vec mu(n), w(n), u(n);
      for (int i = 0; i < n; ++i) {
        mu(i) = fam.clamp_mean(fam.inv_link(eta(i)));
        w(i) = fam.variance(mu(i));
        u(i) = eta(i) + (y(i) - mu(i)) / w(i);
      }
      const Vec bx_old = bx;
      const Vec bz_old = bz;
      weighted_cd(x, z, u, w, lam, n_norm, bx, bz);
      const double change = std::max((bx - bx_old).cwiseAbs().maxCoeff(),
                                     (bz - bz_old).cwiseAbs().maxCoeff());
      if (change < 1e-6) break;
    }
    path.push_back({bz, bx});
  }
  return path;
}

std::vector<PathPoint> fit_path(const Mat& x, const Mat& z, const Vec& y,
                                const std::vector<double>& lambdas,
                                double n_norm, const FamilySpec& fam) {
  if (fam.family == Family::Gaussian) {
    return gaussian_path(x, z, y, lambdas, n_norm);
  }
  return glm_path(x, z, y, lambdas, n_norm, fam);
}

double deviance(const Vec& y, const Vec& mu, const FamilySpec& fam) {
  double dev = 0.0;
  for (int i = 0; i < y.size(); ++i) {
    switch (fam.family) {
      case Family::Gaussian: {
        const double r = y(i) - mu(i);
        dev += r * r;
        break;
      }
      case Family::Poisson: {
        const double m = std::max(mu(i), 1e-12);
        dev += 2.0 * ((y(i) > 0.0 ? y(i) * std::log(y(i) / m) : 0.0) -
                      (y(i) - m));
        break;
      }
      case Family::Binomial: {
        const double m = std::clamp(mu(i), 1e-12, 1.0 - 1e-12);
        dev += -2.0 * (y(i) * std::log(m) + (1.0 - y(i)) * std::log(1.0 - m));
        break;
      }
    }
  }
  return dev;
}

std::vector<int> fold_assignment(int n, int nfolds, std::uint64_t seed,
                                 int attempt) {
  Rng rng(seed, 1000 + static_cast<std::uint64_t>(attempt));
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[i], perm[j]);
  }
  std::vector<int> fold(n);
  for (int pos = 0; pos < n; ++pos) fold[perm[pos]] = pos % nfolds;
  return fold;
}

}  // namespace

LassoResult fit_lasso_cv(const Dataset& d, Family fam, int nfolds,
                         int n_lambda, std::uint64_t seed) {
  if (nfolds < 2) throw std::invalid_argument("nfolds must be at least 2");
  if (n_lambda < 2) throw std::invalid_argument("n_lambda must be at least 2");
  const Dataset ds = standardize(d);
  const FamilySpec spec = FamilySpec::make(fam);
  const int n = ds.n();
  const double n_norm = static_cast<double>(n);

  // Entry point of the path: the gradient of the unpenalized null model.
  Vec mu0(n);
  if (fam == Family::Gaussian) {
    const Vec bx0 =
        (ds.X.transpose() * ds.X).ldlt().solve(ds.X.transpose() * ds.y);
    mu0 = ds.X * bx0;
  } else {
    const Vec bx0 = glm_irls(ds.y, ds.X, spec);
    mu0 = (ds.X * bx0).unaryExpr(
        [&](double e) { return spec.clamp_mean(spec.inv_link(e)); });
  }
  const double lambda_max =
      (ds.Z.transpose() * (ds.y - mu0)).cwiseAbs().maxCoeff() / n_norm;
  if (lambda_max <= 0.0) {
    throw numerical_error("degenerate lasso path (zero gradient at the null)");
  }
  std::vector<double> lambdas(n_lambda);
  const double log_max = std::log(lambda_max);
  const double log_min = std::log(1e-3 * lambda_max);
  for (int i = 0; i < n_lambda; ++i) {
    lambdas[i] =
        std::exp(log_max + (log_min - log_max) * i / (n_lambda - 1.0));
  }

  // Fold assignment; binomial folds must contain both classes in training.
  std::vector<int> fold;
  int attempt = 0;
  for (;; ++attempt) {
    if (attempt >= 5) {
      throw numerical_error("could not build non-degenerate CV folds");
    }
    fold = fold_assignment(n, nfolds, seed, attempt);
    if (fam != Family::Binomial) break;
    bool ok = true;
    for (int f = 0; f < nfolds && ok; ++f) {
      int ones = 0, zeros = 0;
      for (int i = 0; i < n; ++i) {
        if (fold[i] != f) (ds.y(i) > 0.5 ? ones : zeros) += 1;
      }
      ok = ones > 0 && zeros > 0;
    }
    if (ok) break;
  }

  std::vector<double> cv_dev(n_lambda, 0.0);
  for (int f = 0; f < nfolds; ++f) {
    std::vector<int> train, val;
    for (int i = 0; i < n; ++i) (fold[i] == f ? val : train).push_back(i);
    Mat xt(train.size(), ds.p()), zt(train.size(), ds.k());
    Vec yt(train.size());
    for (std::size_t r = 0; r < train.size(); ++r) {
      xt.row(r) = ds.X.row(train[r]);
      zt.row(r) = ds.Z.row(train[r]);
      yt(r) = ds.y(train[r]);
    }
    const auto path = fit_path(xt, zt, yt, lambdas, n_norm, spec);
    for (int li = 0; li < n_lambda; ++li) {
      Vec mu_val(val.size()), y_val(val.size());
      for (std::size_t r = 0; r < val.size(); ++r) {
        const int i = val[r];
        const double eta =
            ds.X.row(i).dot(path[li].coef_x) + ds.Z.row(i).dot(path[li].coef_z);
        mu_val(r) = fam == Family::Gaussian
                        ? eta
                        : spec.clamp_mean(spec.inv_link(eta));
        y_val(r) = ds.y(i);
      }
      cv_dev[li] += deviance(y_val, mu_val, spec);
    }
  }

  LassoResult result;
  result.seed = seed;
  result.refold_attempts = attempt;
  int best = 0;
  for (int li = 0; li < n_lambda; ++li) {
    cv_dev[li] /= n;
    result.cv_curve.emplace_back(lambdas[li], cv_dev[li]);
    if (cv_dev[li] < cv_dev[best]) best = li;
  }
  result.lambda_chosen = lambdas[best];

  const auto full_path = fit_path(ds.X, ds.Z, ds.y, lambdas, n_norm, spec);
  result.coef_z = full_path[best].coef_z;
  result.coef_x = full_path[best].coef_x;
  for (int j = 0; j < ds.k(); ++j) {
    if (result.coef_z(j) != 0.0) result.selected.push_back(j);
  }
  return result;
}

}  // namespace semms
