#include "semms/gam.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "semms/glmm.hpp"

namespace semms {

namespace {

constexpr double kMuMin = 1e-8;
constexpr double kSigma2rFloor = 1e-12;

Vec column_correlations(const Mat& z, const Vec& y) {
  const Vec yc = y.array() - y.mean();
  const double y_ss = yc.squaredNorm();
  Vec cors(z.cols());
  for (int j = 0; j < z.cols(); ++j) {
    const Vec zc = z.col(j).array() - z.col(j).mean();
    const double z_ss = zc.squaredNorm();
    cors(j) = (z_ss > 0.0 && y_ss > 0.0)
                  ? zc.dot(yc) / std::sqrt(z_ss * y_ss)
                  : 0.0;
  }
  return cors;
}

double pair_correlation(const Mat& z, int a, int b) {
  const Vec za = z.col(a).array() - z.col(a).mean();
  const Vec zb = z.col(b).array() - z.col(b).mean();
  const double den = std::sqrt(za.squaredNorm() * zb.squaredNorm());
  return den > 0.0 ? za.dot(zb) / den : 0.0;
}

Vec ols(const Mat& x, const Vec& y) {
  return (x.transpose() * x).ldlt().solve(x.transpose() * y);
}

}  // namespace

MixtureState init_active_set(const Dataset& d, const FitConfig& cfg) {
  MixtureState state = MixtureState::null_state(d.k());
  if (cfg.nn <= 0 || d.k() == 0) return state;

  const Vec cors = column_correlations(d.Z, d.y);
  std::vector<int> order(d.k());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(cors(a)) > std::abs(cors(b));
  });

  // Top nn by marginal correlation, skipping candidates that are nearly
  // collinear (pairwise |cor| above mincor) with an already-chosen one.
  std::vector<int> chosen;
  for (int k : order) {
    if (static_cast<int>(chosen.size()) == cfg.nn) break;
    bool redundant = false;
    for (int j : chosen) {
      if (std::abs(pair_correlation(d.Z, k, j)) > cfg.mincor) {
        redundant = true;
        break;
      }
    }
    if (redundant) continue;
    chosen.push_back(k);
    state.set(k, cors(k) < 0.0 ? std::int8_t{-1} : std::int8_t{+1});
  }
  return state;
}

namespace detail {

ModelParams initial_params(const Dataset& d, const MixtureState& state) {
  ModelParams p;
  p.beta = ols(d.X, d.y);
  const Vec resid = d.y - d.X * p.beta;
  p.sigma2_e = std::max(resid.squaredNorm() / d.n(), 1e-10);
  const double resid_sd = std::sqrt(p.sigma2_e);

  // The common effect starts at the strongest marginal coefficient so
  // that first additions from a small set are priced realistically; EM
  // takes over as soon as the set is nonempty.
  double max_coef = 0.0;
  for (int k = 0; k < d.k(); ++k) {
    max_coef = std::max(max_coef, std::abs(d.Z.col(k).dot(resid)) / (d.n() - 1));
  }
  if (state.L() > 0) {
    double mean_signed = 0.0;
    for (int k : state.active) {
      mean_signed += state.gamma[k] * d.Z.col(k).dot(resid) / (d.n() - 1);
    }
    mean_signed /= state.L();
    p.mu = std::max(mean_signed, 0.1 * resid_sd);
  } else {
    p.mu = std::max(max_coef, 0.1 * resid_sd);
  }
  p.sigma2_r = std::max(0.25 * p.mu * p.mu, 1e-6);
  return p;
}

}  // namespace detail

ModelParams em_update(const Dataset& d, const MixtureState& state, ModelParams p,
                      const FitConfig& cfg, std::vector<double>* lik_trace) {
  const int n = d.n();
  const int np = d.p();
  const int l = state.L();

  if (l == 0) {
    p.beta = ols(d.X, d.y);
    const Vec resid = d.y - d.X * p.beta;
    p.sigma2_e = resid.squaredNorm() / n;
    if (p.sigma2_e < 1e-12) {
      throw numerical_error("residual variance collapsed below 1e-12");
    }
    return p;
  }

  LikelihoodWorkspace w = build_workspace(d, state, p);
  const Mat& xtx = w.HtH.topLeftCorner(np, np);
  const Mat& xtzg = w.HtH.topRightCorner(np, l);
  const Mat& ztz = w.HtH.bottomRightCorner(l, l);
  const Vec xty = w.HtY.head(np);
  const Vec zgty = w.HtY.tail(l);
  const Vec ones = Vec::Ones(l);
  const Vec xtzg_one = xtzg * ones;
  const double zbar_sq = ones.dot(ztz * ones);

  double loglik = log_likelihood(d, state, p, w);
  if (lik_trace) lik_trace->push_back(loglik);

  for (int iter = 0; iter < cfg.em_max_iters; ++iter) {
    // E-step: Gaussian posterior of the coefficient deviations.
    Vec theta(np + l);
    theta.head(np) = p.beta;
    theta.tail(l).setConstant(p.mu);
    const Vec ztr = w.HtY.tail(l) - (w.HtH * theta).tail(l);
    const double ratio = p.sigma2_r / p.sigma2_e;
    const Vec post_mean = ratio * (w.B * ztr);
    const double tr_v = p.sigma2_r * w.B.trace();
    const double tr_ztz_v = p.sigma2_r * (ztz * w.B).trace();

    // M-step: sigma2_r, then (beta, mu) jointly, then sigma2_e.
    const double sigma2_r_new =
        std::max((post_mean.squaredNorm() + tr_v) / l, kSigma2rFloor);

    Mat a(np + 1, np + 1);
    a.topLeftCorner(np, np) = xtx;
    a.topRightCorner(np, 1) = xtzg_one;
    a.bottomLeftCorner(1, np) = xtzg_one.transpose();
    a(np, np) = zbar_sq;
    Vec rhs(np + 1);
    rhs.head(np) = xty - xtzg * post_mean;
    rhs(np) = ones.dot(zgty) - ones.dot(ztz * post_mean);
    Vec sol = a.ldlt().solve(rhs);

    Vec beta_new;
    double mu_new;
    if (sol(np) >= kMuMin) {
      beta_new = sol.head(np);
      mu_new = sol(np);
    } else {
      mu_new = kMuMin;
      beta_new = xtx.ldlt().solve(xty - xtzg * post_mean - mu_new * xtzg_one);
    }

    Vec theta_new(np + l);
    theta_new.head(np) = beta_new;
    theta_new.tail(l).setConstant(mu_new);
    const Vec hth_theta = w.HtH * theta_new;
    double rss = w.yty - 2.0 * theta_new.dot(w.HtY) + theta_new.dot(hth_theta) -
                 2.0 * post_mean.dot(zgty) + 2.0 * post_mean.dot(hth_theta.tail(l)) +
                 post_mean.dot(ztz * post_mean);
    if (rss < 0.0) rss = 0.0;
    const double sigma2_e_new = (rss + tr_ztz_v) / n;
    if (sigma2_e_new < 1e-12) {
      throw numerical_error("residual variance collapsed below 1e-12");
    }

    p.mu = mu_new;
    p.beta = beta_new;
    p.sigma2_e = sigma2_e_new;
    p.sigma2_r = sigma2_r_new;
    refresh_b(w, p);

    const double loglik_new = log_likelihood(d, state, p, w);
    if (lik_trace) lik_trace->push_back(loglik_new);
    const double rel_change =
        std::abs(loglik_new - loglik) / (std::abs(loglik) + 1.0);
    loglik = loglik_new;
    if (rel_change < cfg.em_tol) break;
  }
  return p;
}

namespace detail {

std::pair<MixtureState, bool> greedy_step(const GramCache& g,
                                          const MixtureState& state,
                                          const ModelParams& p,
                                          const FitConfig& cfg) {
  const std::vector<Move> moves = sweep_gains(g, state, p);
  const Move best = best_move(moves);
  if (best.k < 0 || best.gain <= cfg.minchange) return {state, false};
  MixtureState next = state;
  next.set(best.k, best.s);
  return {next, true};
}

}  // namespace detail

std::pair<MixtureState, bool> greedy_step(const Dataset& d,
                                          const MixtureState& state,
                                          const ModelParams& p,
                                          const FitConfig& cfg) {
  return detail::greedy_step(GramCache::build(d), state, p, cfg);
}

namespace {

double objective_of(const GramCache& g, const MixtureState& state,
                    const ModelParams& p) {
  std::vector<std::int8_t> signs;
  signs.reserve(state.active.size());
  for (int idx : state.active) signs.push_back(state.gamma[idx]);
  return objective_from_grams(g, state.active, signs, p, state.K());
}

SemmsFit run_gam(const Dataset& d_std, const GramCache& cache,
                 MixtureState start, const FitConfig& cfg) {
  SemmsFit fit;
  fit.state = std::move(start);
  fit.params = detail::initial_params(d_std, fit.state);
  fit.params = em_update(d_std, fit.state, fit.params, cfg, &fit.em_loglik_trace);
  fit.trace.push_back(objective_of(cache, fit.state, fit.params));

  for (int iter = 1; iter <= cfg.max_gam_iters; ++iter) {
    auto [next, accepted] = detail::greedy_step(cache, fit.state, fit.params, cfg);
    if (!accepted) {
      fit.converged = true;
      break;
    }
    fit.state = std::move(next);
    fit.params =
        em_update(d_std, fit.state, fit.params, cfg, &fit.em_loglik_trace);
    fit.trace.push_back(objective_of(cache, fit.state, fit.params));
    fit.n_iters = iter;
  }
  return fit;
}

SemmsFit fit_semms_gaussian(const Dataset& d_std, const FitConfig& cfg) {
  const GramCache cache = GramCache::build(d_std);

  // Two deterministic starts: the correlation-ranked set and the empty
  // set.  The greedy objective is multimodal (the multiplicity prior
  // rewards concentrated label splits), so the paths can converge to
  // different local optima; the better final objective wins, with the
  // ranked start preferred on ties.
  SemmsFit ranked = run_gam(d_std, cache, init_active_set(d_std, cfg), cfg);
  if (ranked.state.L() == 0) return ranked;  // starts coincide
  SemmsFit scratch = run_gam(d_std, cache, MixtureState::null_state(d_std.k()), cfg);
  return scratch.trace.back() > ranked.trace.back() ? scratch : ranked;
}

}  // namespace

SemmsFit fit_semms(const Dataset& d, const FitConfig& cfg) {
  if (d.family != Family::Gaussian) {
    throw std::invalid_argument(
        "fit_semms requires a gaussian response; use fit_semms_glm");
  }
  return fit_semms_gaussian(standardize(d), cfg);
}

Vec semms_fitted(const Dataset& d, const MixtureState& state,
                 const ModelParams& p) {
  Vec eta = d.X * p.beta;
  const int l = state.L();
  if (l == 0) return eta;
  LikelihoodWorkspace w = build_workspace(d, state, p);
  Vec theta(d.p() + l);
  theta.head(d.p()) = p.beta;
  theta.tail(l).setConstant(p.mu);
  const Vec ztr = w.HtY.tail(l) - (w.HtH * theta).tail(l);
  const Vec post_mean = (p.sigma2_r / p.sigma2_e) * (w.B * ztr);
  eta += w.ZG * (Vec::Constant(l, p.mu) + post_mean);
  return eta;
}

SemmsFit fit_semms_glm(const Dataset& d, const FitConfig& cfg) {
  if (d.family == Family::Gaussian) {
    throw std::invalid_argument("fit_semms_glm is for poisson/binomial data");
  }
  const FamilySpec fam = FamilySpec::make(d.family);
  const Dataset d_std = standardize(d);

  // Linearization point from a fixed-effects-only GLM.
  Vec eta = d_std.X * glm_irls(d_std.y, d_std.X, fam);
  Vec mu = eta.unaryExpr([&](double e) { return fam.clamp_mean(fam.inv_link(e)); });

  SemmsFit fit;
  std::vector<int> prev_active;
  constexpr int kMaxRounds = 10;
  for (int round = 1; round <= kMaxRounds; ++round) {
    Dataset work = d_std;
    work.family = Family::Gaussian;
    work.y = working_response(d_std.y, mu, eta, fam);
    fit = fit_semms_gaussian(work, cfg);
    fit.n_iters = round;
    if (round > 1 && fit.state.active == prev_active) {
      fit.converged = true;
      break;
    }
    prev_active = fit.state.active;
    eta = semms_fitted(work, fit.state, fit.params);
    mu = eta.unaryExpr([&](double e) { return fam.clamp_mean(fam.inv_link(e)); });
    fit.converged = false;
  }
  return fit;
}

}  // namespace semms
