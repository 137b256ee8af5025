#include "semms/glmm.hpp"

#include <algorithm>
#include <cmath>

namespace semms {

namespace {
constexpr double kMeanEps = 1e-8;
}

FamilySpec FamilySpec::make(Family f) {
  FamilySpec spec;
  spec.family = f;
  return spec;
}

double FamilySpec::link(double mu) const {
  switch (family) {
    case Family::Gaussian: return mu;
    case Family::Poisson: return std::log(mu);
    case Family::Binomial: return std::log(mu / (1.0 - mu));
  }
  return mu;
}

double FamilySpec::inv_link(double eta) const {
  switch (family) {
    case Family::Gaussian: return eta;
    case Family::Poisson: return std::exp(eta);
    case Family::Binomial: return 1.0 / (1.0 + std::exp(-eta));
  }
  return eta;
}

double FamilySpec::variance(double mu) const {
  switch (family) {
    case Family::Gaussian: return 1.0;
    case Family::Poisson: return mu;
    case Family::Binomial: return mu * (1.0 - mu);
  }
  return 1.0;
}

double FamilySpec::deta_dmu(double mu) const {
  // Canonical links: deta/dmu = 1 / v(mu).
  return 1.0 / variance(mu);
}

double FamilySpec::clamp_mean(double mu) const {
  switch (family) {
    case Family::Gaussian: return mu;
    case Family::Poisson: return std::max(mu, kMeanEps);
    case Family::Binomial: return std::clamp(mu, kMeanEps, 1.0 - kMeanEps);
  }
  return mu;
}

Vec working_response(const Vec& y, const Vec& mu_hat, const Vec& eta_fixed,
                     const FamilySpec& fam) {
  Vec w(y.size());
  for (int i = 0; i < y.size(); ++i) {
    const double mu = fam.clamp_mean(mu_hat(i));
    w(i) = eta_fixed(i) + (y(i) - mu) * fam.deta_dmu(mu);
  }
  return w;
}

Vec link_adjusted_response(const Vec& y, const Vec& u_hat,
                           const FamilySpec& fam) {
  Vec out(y.size());
  for (int i = 0; i < y.size(); ++i) {
    out(i) = fam.link(fam.clamp_mean(y(i))) - u_hat(i);
  }
  return out;
}

Vec glm_irls(const Vec& y, const Mat& x, const FamilySpec& fam) {
  const int n = static_cast<int>(y.size());
  if (fam.family == Family::Gaussian) {
    return (x.transpose() * x).ldlt().solve(x.transpose() * y);
  }
  // Mean initialization away from the boundary.
  Vec mu(n);
  if (fam.family == Family::Poisson) {
    const double ybar = std::max(y.mean(), 0.1);
    for (int i = 0; i < n; ++i) mu(i) = fam.clamp_mean(0.5 * (y(i) + ybar));
  } else {
    for (int i = 0; i < n; ++i) mu(i) = fam.clamp_mean(0.5 * (y(i) + 0.5));
  }
  Vec eta = mu.unaryExpr([&](double m) { return fam.link(m); });
  Vec beta = Vec::Zero(x.cols());
  for (int iter = 0; iter < 100; ++iter) {
    Vec w(n), u(n);
    for (int i = 0; i < n; ++i) {
      const double v = fam.variance(mu(i));
      w(i) = v;  // canonical link: weight = v(mu)
      u(i) = eta(i) + (y(i) - mu(i)) / v;
    }
    const Mat xw = w.asDiagonal() * x;
    Vec beta_new = (x.transpose() * xw).ldlt().solve(xw.transpose() * u);
    if (!beta_new.allFinite()) {
      throw numerical_error("GLM IRLS produced non-finite coefficients");
    }
    const double change = (beta_new - beta).cwiseAbs().maxCoeff();
    beta = beta_new;
    eta = x * beta;
    for (int i = 0; i < n; ++i) mu(i) = fam.clamp_mean(fam.inv_link(eta(i)));
    if (change < 1e-10) break;
  }
  return beta;
}

ReFit fit_lmm_weighted(const Vec& y, const Mat& w_fixed, const ReSpec& re,
                       const Vec& weights, MixedMethod method) {
  return detail::fit_core(y, w_fixed, re, method, false, &weights);
}

GlmmFit fit_glmm_pql(const Vec& y, const Mat& w_fixed, const ReSpec& re,
                     const FamilySpec& fam) {
  if (fam.family == Family::Gaussian) {
    throw std::invalid_argument("fit_glmm_pql is for poisson/binomial data");
  }
  const int n = static_cast<int>(y.size());

  Vec mu(n);
  if (fam.family == Family::Poisson) {
    const double ybar = std::max(y.mean(), 0.1);
    for (int i = 0; i < n; ++i) mu(i) = fam.clamp_mean(0.5 * (y(i) + ybar));
  } else {
    for (int i = 0; i < n; ++i) mu(i) = fam.clamp_mean(0.5 * (y(i) + 0.5));
  }
  Vec eta_full = mu.unaryExpr([&](double m) { return fam.link(m); });
  Vec eta_fixed = eta_full;  // u starts at zero

  GlmmFit out;
  ReFit inner;
  int boundary_streak = 0;
  constexpr int kMaxIter = 50;
  for (int iter = 1; iter <= kMaxIter; ++iter) {
    Vec resp(n), weights(n);
    for (int i = 0; i < n; ++i) {
      const double v = fam.variance(mu(i));
      resp(i) = eta_full(i) + (y(i) - mu(i)) / v;
      weights(i) = v;
    }
    // Weighted working model with a free residual scale: the fitted
    // sigma_e absorbs the linearization misfit, which keeps the
    // random-effect variances well calibrated for binary data.
    inner = fit_lmm_weighted(resp, w_fixed, re, weights, MixedMethod::ML);

    const Vec eta_full_new = inner.fitted_full;
    if (!eta_full_new.allFinite()) {
      throw numerical_error("PQL diverged (non-finite linear predictor) at iteration " +
                            std::to_string(iter));
    }
    const double delta = (eta_full_new - eta_full).cwiseAbs().maxCoeff();
    eta_full = eta_full_new;
    eta_fixed = inner.fitted_fixed;

    int clamped = 0;
    for (int i = 0; i < n; ++i) {
      const double raw = fam.inv_link(eta_full(i));
      mu(i) = fam.clamp_mean(raw);
      if (mu(i) != raw) ++clamped;
    }
    if (fam.family == Family::Binomial && clamped > n / 4) {
      if (++boundary_streak >= 5) {
        throw numerical_error(
            "PQL means pinned at the boundary repeatedly (possible complete "
            "separation) at iteration " + std::to_string(iter));
      }
    } else {
      boundary_streak = 0;
    }

    out.n_iters = iter;
    if (delta < 1e-6) {
      out.converged = true;
      break;
    }
  }

  out.varcomp = inner.varcomp;
  out.fixed_coefs = inner.fixed_coefs;
  out.eta_full = eta_full;
  out.eta_fixed = eta_fixed;
  out.mu_hat = mu;
  out.u_hat = eta_full - eta_fixed;
  out.approx_loglik = inner.loglik;
  out.ranef = inner.ranef;
  return out;
}

}  // namespace semms
