#include "semms/lmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "semms/optim.hpp"

namespace semms {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

int ReSpec::n_clusters() const {
  int m = 0;
  for (int g : group) m = std::max(m, g + 1);
  return m;
}

ReSpec re_from_dataset(const Dataset& d, bool intercept, bool slope) {
  ReSpec re;
  re.intercept = intercept;
  re.slope = slope;
  if (!d.has_group()) {
    throw std::invalid_argument("random effects require a group column");
  }
  re.group = d.group;
  if (slope) {
    if (!d.has_slope()) {
      throw std::invalid_argument(
          "a random slope requires a slope covariate column");
    }
    re.slope_covariate = d.slope_covariate;
  }
  return re;
}

namespace detail {

LmmCore build_core(const Vec& y, const Mat& w, const ReSpec& re,
                   const Vec* weights) {
  const int n = static_cast<int>(y.size());
  if (!re.intercept && !re.slope) {
    throw std::invalid_argument("at least one random effect is required");
  }
  if (static_cast<int>(re.group.size()) != n) {
    throw std::invalid_argument("group length does not match the response");
  }
  if (re.slope && re.slope_covariate.size() != n) {
    throw std::invalid_argument("slope covariate length mismatch");
  }

  LmmCore core;
  core.n = n;
  core.p = static_cast<int>(w.cols());
  core.q = re.q();
  core.m = re.n_clusters();
  if (core.m < 2) throw std::invalid_argument("need at least 2 clusters");

  core.zre_raw.resize(n, core.q);
  int col = 0;
  if (re.intercept) core.zre_raw.col(col++).setOnes();
  if (re.slope) core.zre_raw.col(col) = re.slope_covariate;

  Vec sw = Vec::Ones(n);
  if (weights) {
    for (int i = 0; i < n; ++i) {
      if ((*weights)(i) <= 0.0) {
        throw std::invalid_argument("weights must be strictly positive");
      }
      sw(i) = std::sqrt((*weights)(i));
      core.sum_log_w += std::log((*weights)(i));
    }
  }

  core.cluster_rows.resize(core.m);
  for (int i = 0; i < n; ++i) core.cluster_rows[re.group[i]].push_back(i);

  core.ztz.assign(core.m, Mat::Zero(core.q, core.q));
  core.ztw.assign(core.m, Mat::Zero(core.q, core.p));
  core.zty.assign(core.m, Vec::Zero(core.q));
  core.wtw = Mat::Zero(core.p, core.p);
  core.wty = Vec::Zero(core.p);

  for (int g = 0; g < core.m; ++g) {
    for (int i : core.cluster_rows[g]) {
      const Vec zi = sw(i) * core.zre_raw.row(i).transpose();
      const Vec wi = sw(i) * w.row(i).transpose();
      const double yi = sw(i) * y(i);
      core.ztz[g] += zi * zi.transpose();
      core.ztw[g] += zi * wi.transpose();
      core.zty[g] += zi * yi;
      core.wtw += wi * wi.transpose();
      core.wty += wi * yi;
      core.yty += yi * yi;
    }
  }
  return core;
}

Mat lambda_from_theta(const Vec& theta, int q) {
  Mat lambda = Mat::Zero(q, q);
  if (q == 1) {
    lambda(0, 0) = theta(0);
  } else {
    lambda(0, 0) = theta(0);
    lambda(1, 0) = theta(1);
    lambda(1, 1) = theta(2);
  }
  return lambda;
}

ThetaEval eval_theta(const LmmCore& core, const Vec& theta, MixedMethod method,
                     bool fix_unit_sigma) {
  ThetaEval ev;
  if (!theta.allFinite()) {
    ev.deviance = std::numeric_limits<double>::infinity();
    return ev;
  }
  const Mat lambda = lambda_from_theta(theta, core.q);

  Mat a = core.wtw;
  Vec b = core.wty;
  double c = core.yty;
  double logdet = 0.0;
  for (int g = 0; g < core.m; ++g) {
    Mat mg = Mat::Identity(core.q, core.q) +
             lambda.transpose() * core.ztz[g] * lambda;
    Eigen::LLT<Mat> llt(mg);
    if (llt.info() != Eigen::Success) {
      ev.deviance = std::numeric_limits<double>::infinity();
      return ev;
    }
    logdet += 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const Mat u = lambda.transpose() * core.ztw[g];  // q x p
    const Vec v = lambda.transpose() * core.zty[g];  // q
    const Mat mu = llt.solve(u);
    const Vec mv = llt.solve(v);
    a -= u.transpose() * mu;
    b -= u.transpose() * mv;
    c -= v.dot(mv);
  }

  Eigen::LDLT<Mat> ldlt(a);
  ev.beta = ldlt.solve(b);
  if (!ev.beta.allFinite()) {
    ev.deviance = std::numeric_limits<double>::infinity();
    return ev;
  }
  double rvr = c - 2.0 * ev.beta.dot(b) + ev.beta.dot(a * ev.beta);
  if (rvr < 1e-300) rvr = 1e-300;
  ev.logdet_v = logdet;
  ev.r_vinv_r = rvr;

  const int n = core.n, p = core.p;
  if (fix_unit_sigma) {
    ev.sigma2 = 1.0;
    ev.deviance = logdet + n * kLog2Pi + rvr - core.sum_log_w;
    return ev;
  }
  if (method == MixedMethod::ML) {
    ev.sigma2 = rvr / n;
    ev.deviance = logdet + n * (1.0 + std::log(2.0 * M_PI * ev.sigma2)) -
                  core.sum_log_w;
  } else {
    ev.sigma2 = rvr / (n - p);
    double logdet_a = 0.0;
    for (int j = 0; j < p; ++j) {
      logdet_a += std::log(std::abs(ldlt.vectorD()(j)));
    }
    ev.deviance = logdet + logdet_a +
                  (n - p) * (1.0 + std::log(2.0 * M_PI * ev.sigma2)) -
                  core.sum_log_w;
  }
  return ev;
}

namespace {

// Moment-based starting scale for the relative Cholesky diagonal.
Vec moment_guess(const LmmCore& core, const ReSpec& re, const Vec& y,
                 const Mat& w) {
  const Vec beta = (w.transpose() * w).ldlt().solve(w.transpose() * y);
  const Vec resid = y - w * beta;
  const int m = core.m;

  double within_ss = 0.0;
  int within_df = 0;
  std::vector<double> cluster_means(m, 0.0);
  for (int g = 0; g < m; ++g) {
    const auto& rows = core.cluster_rows[g];
    double mean = 0.0;
    for (int i : rows) mean += resid(i);
    mean /= static_cast<double>(rows.size());
    cluster_means[g] = mean;
    for (int i : rows) within_ss += (resid(i) - mean) * (resid(i) - mean);
    within_df += static_cast<int>(rows.size()) - 1;
  }
  const double vw = within_ss / std::max(within_df, 1);
  double vb = 0.0;
  double nbar = static_cast<double>(core.n) / m;
  for (int g = 0; g < m; ++g) vb += cluster_means[g] * cluster_means[g];
  vb /= m;

  auto clamp_scale = [](double s) { return std::clamp(s, 1e-2, 1e3); };
  double lam0 = clamp_scale(
      std::sqrt(std::max(vb - vw / nbar, 0.0) / std::max(vw, 1e-12)));

  double lam1 = 0.5;
  if (re.slope) {
    // Variance of per-cluster residual slopes on the centered covariate.
    double ss_slopes = 0.0;
    int used = 0;
    for (int g = 0; g < m; ++g) {
      const auto& rows = core.cluster_rows[g];
      if (rows.size() < 2) continue;
      double tm = 0.0;
      for (int i : rows) tm += re.slope_covariate(i);
      tm /= static_cast<double>(rows.size());
      double stt = 0.0, str = 0.0;
      for (int i : rows) {
        const double tc = re.slope_covariate(i) - tm;
        stt += tc * tc;
        str += tc * (resid(i) - cluster_means[g]);
      }
      if (stt <= 0.0) continue;
      const double slope = str / stt;
      ss_slopes += slope * slope;
      ++used;
    }
    if (used > 0) {
      lam1 = clamp_scale(
          std::sqrt(std::max(ss_slopes / used, 0.0) / std::max(vw, 1e-12)));
    }
  }

  if (core.q == 1) {
    Vec g(1);
    g(0) = re.intercept ? lam0 : lam1;
    return g;
  }
  Vec g(3);
  g << lam0, 0.0, lam1;
  return g;
}

Vec optimize_theta(const LmmCore& core, const ReSpec& re, const Vec& y,
                   const Mat& w, MixedMethod method, bool fix_unit_sigma) {
  auto dev = [&](const Vec& theta) {
    return eval_theta(core, theta, method, fix_unit_sigma).deviance;
  };
  const Vec guess = moment_guess(core, re, y, w);

  if (core.q == 1) {
    // Coarse scan to bracket the minimum, then Brent.
    const double g = std::max(std::abs(guess(0)), 1e-3);
    std::vector<double> grid = {0.0,     0.01 * g, 0.1 * g, 0.3 * g, g,
                                3.0 * g, 10.0 * g, 100.0 * g};
    auto dev1 = [&](double lam) { return dev(Vec::Constant(1, lam)); };
    int best = 0;
    double best_val = dev1(grid[0]);
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const double v = dev1(grid[i]);
      if (v < best_val) {
        best_val = v;
        best = static_cast<int>(i);
      }
    }
    double lo = best > 0 ? grid[best - 1] : 0.0;
    double hi = best + 1 < static_cast<int>(grid.size()) ? grid[best + 1]
                                                         : 10.0 * grid.back();
    while (dev1(hi) < dev1(0.9 * hi) && hi < 1e6) hi *= 10.0;  // open edge
    const double lam = brent_min(dev1, lo, hi, 1e-11);
    return Vec::Constant(1, lam);
  }

  // Both intercept and slope: Nelder-Mead from scaled restarts.
  NelderMeadResult best;
  best.fx = std::numeric_limits<double>::infinity();
  for (double scale : {0.1, 1.0, 10.0}) {
    Vec x0 = guess;
    x0(0) = std::max(guess(0) * scale, 1e-4);
    x0(2) = std::max(guess(2) * scale, 1e-4);
    auto res = nelder_mead(dev, x0, 0.5, 1e-12, 4000);
    if (res.fx < best.fx) best = res;
  }
  // One cyclic Brent polish pass per coordinate.
  Vec theta = best.x;
  for (int j = 0; j < 3; ++j) {
    const double center = theta(j);
    const double radius = std::max(0.5 * std::abs(center), 0.05);
    auto dev_j = [&](double v) {
      Vec t = theta;
      t(j) = v;
      return dev(t);
    };
    theta(j) = brent_min(dev_j, center - radius, center + radius, 1e-11);
  }
  if (dev(theta) > best.fx) theta = best.x;

  if (!std::isfinite(dev(theta))) {
    throw numerical_error("variance-component optimization failed to converge");
  }
  return theta;
}

}  // namespace

ReFit fit_core(const Vec& y, const Mat& w, const ReSpec& re,
               MixedMethod method, bool fix_unit_sigma, const Vec* weights) {
  const int n = static_cast<int>(y.size());
  const int p = static_cast<int>(w.cols());
  if (n < p + 2) throw std::invalid_argument("too few rows for the fixed design");
  Eigen::ColPivHouseholderQR<Mat> qr(w);
  if (qr.rank() < p) {
    throw std::invalid_argument("fixed design is rank deficient");
  }

  LmmCore core = build_core(y, w, re, weights);
  Vec y_use = y;
  Mat w_use = w;
  if (weights) {
    const Vec sw = weights->array().sqrt();
    y_use = sw.asDiagonal() * y;
    w_use = sw.asDiagonal() * w;
  }
  const Vec theta = optimize_theta(core, re, y_use, w_use, method, fix_unit_sigma);
  const ThetaEval ev = eval_theta(core, theta, method, fix_unit_sigma);
  if (!std::isfinite(ev.deviance)) {
    throw numerical_error("profiled deviance is not finite at the optimum");
  }

  ReFit fit;
  fit.method = method;
  fit.theta = theta;
  fit.deviance = ev.deviance;
  fit.fixed_coefs = ev.beta;

  const Mat lambda = lambda_from_theta(theta, core.q);
  const Mat dstar = lambda * lambda.transpose();  // D / sigma2
  const double sigma2 = ev.sigma2;
  fit.varcomp.sigma_e = std::sqrt(sigma2);
  int col = 0;
  if (re.intercept) {
    fit.varcomp.sigma_b0 = std::sqrt(sigma2 * dstar(col, col));
    ++col;
  }
  if (re.slope) {
    fit.varcomp.sigma_b1 = std::sqrt(sigma2 * dstar(col, col));
  }
  if (re.intercept && re.slope) {
    const double den = std::sqrt(dstar(0, 0) * dstar(1, 1));
    fit.varcomp.rho = den > 0.0 ? dstar(0, 1) / den : 0.0;
  }

  // Cluster-level BLUPs: u_g = Lambda Lambda' Z_g' Vstar^{-1} r_g.
  fit.ranef = Mat::Zero(core.m, core.q);
  for (int g = 0; g < core.m; ++g) {
    const Vec zr = core.zty[g] - core.ztw[g] * ev.beta;
    Mat mg = Mat::Identity(core.q, core.q) +
             lambda.transpose() * core.ztz[g] * lambda;
    const Vec inner =
        zr - core.ztz[g] * (lambda * mg.llt().solve(lambda.transpose() * zr));
    fit.ranef.row(g) = (dstar * inner).transpose();
  }

  fit.u_hat.resize(n);
  for (int g = 0; g < core.m; ++g) {
    for (int i : core.cluster_rows[g]) {
      fit.u_hat(i) = core.zre_raw.row(i).dot(fit.ranef.row(g));
    }
  }
  fit.fitted_fixed = w * ev.beta;
  fit.fitted_full = fit.fitted_fixed + fit.u_hat;

  // ML log-likelihood at the fitted parameters (REML variance plugged in
  // when method == REML) so AIC is comparable across fits.
  fit.loglik = -0.5 * (ev.logdet_v + n * std::log(2.0 * M_PI * sigma2) +
                       ev.r_vinv_r / sigma2 - core.sum_log_w);
  int n_varcomp = 1;  // sigma_e
  n_varcomp += (re.intercept ? 1 : 0) + (re.slope ? 1 : 0);
  if (re.intercept && re.slope) ++n_varcomp;  // rho
  fit.aic = -2.0 * fit.loglik + 2.0 * (p + n_varcomp);
  return fit;
}

}  // namespace detail

ReFit fit_lmm(const Vec& y, const Mat& w, const ReSpec& re, MixedMethod method) {
  return detail::fit_core(y, w, re, method, false, nullptr);
}

Vec blup_offset(const ReFit& fit) { return fit.fitted_full - fit.fitted_fixed; }

double profiled_deviance(const Vec& theta, const Vec& y, const Mat& w,
                         const ReSpec& re, MixedMethod method) {
  const detail::LmmCore core = detail::build_core(y, w, re, nullptr);
  const int want = core.q == 1 ? 1 : 3;
  if (theta.size() != want) {
    throw std::invalid_argument("theta has the wrong length for this RE spec");
  }
  return detail::eval_theta(core, theta, method, false).deviance;
}

}  // namespace semms
