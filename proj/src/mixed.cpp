#include "semms/mixed.hpp"

#include <cmath>

namespace semms {

namespace {

Mat selected_design(const Dataset& d, const MixtureState& state,
                    std::vector<std::string>* names) {
  const int l = state.L();
  Mat w(d.n(), d.p() + l);
  w.leftCols(d.p()) = d.X;
  if (names) {
    for (int j = 0; j < d.p(); ++j) {
      names->push_back(j == 0 ? "(intercept)" : "x" + std::to_string(j));
    }
  }
  for (int j = 0; j < l; ++j) {
    const int k = state.active[j];
    w.col(d.p() + j) = d.Z.col(k);
    if (names) {
      names->push_back(k < static_cast<int>(d.z_names.size())
                           ? d.z_names[k]
                           : "V" + std::to_string(k + 1));
    }
  }
  return w;
}

Vec vif_of(const Mat& w) {
  const int p = static_cast<int>(w.cols());
  Vec vif = Vec::Ones(p);
  for (int j = 0; j < p; ++j) {
    const Vec col = w.col(j);
    const double mean = col.mean();
    const double tss = (col.array() - mean).square().sum();
    if (tss <= 0.0) continue;  // constant column
    Mat others(w.rows(), p - 1);
    int c = 0;
    for (int k = 0; k < p; ++k) {
      if (k != j) others.col(c++) = w.col(k);
    }
    const Vec coef =
        (others.transpose() * others).ldlt().solve(others.transpose() * col);
    const double rss = (col - others * coef).squaredNorm();
    const double r2 = 1.0 - rss / tss;
    vif(j) = 1.0 / std::max(1.0 - r2, 1e-12);
  }
  return vif;
}

int n_varcomp(bool intercept, bool slope) {
  int n = 1 + (intercept ? 1 : 0) + (slope ? 1 : 0);
  if (intercept && slope) ++n;
  return n;
}

}  // namespace

FinalModel run_final_model(const Dataset& d, const MixtureState& state,
                           const MixedConfig& cfg) {
  FinalModel out;
  const Mat w = selected_design(d, state, &out.fixed_names);
  const ReSpec re = re_from_dataset(d, cfg.re_intercept, cfg.re_slope);
  if (cfg.family == Family::Gaussian) {
    out.lmm = fit_lmm(d.y, w, re, MixedMethod::REML);
    out.aic = out.lmm->aic;
  } else {
    out.glmm = fit_glmm_pql(d.y, w, re, FamilySpec::make(cfg.family));
    out.aic = -2.0 * out.glmm->approx_loglik +
              2.0 * (w.cols() + n_varcomp(cfg.re_intercept, cfg.re_slope));
  }
  out.vif = vif_of(w);
  return out;
}

MixedFit fit_semms_mixed(const Dataset& d, const MixedConfig& cfg) {
  if (!d.has_group()) {
    throw std::invalid_argument("fit_semms_mixed requires a group column");
  }
  if (!cfg.re_intercept && !cfg.re_slope) {
    throw std::invalid_argument("at least one random effect must be requested");
  }
  const ReSpec re = re_from_dataset(d, cfg.re_intercept, cfg.re_slope);
  const bool gaussian = cfg.family == Family::Gaussian;
  const FamilySpec fam = FamilySpec::make(cfg.family);
  const int n = d.n();

  MixedFit out;
  Vec u_hat = Vec::Zero(n);
  Vec eta_fixed, mu_hat;

  // Warm start from the null RE model (fixed part = X).
  if (cfg.warm_start) {
    if (gaussian) {
      const ReFit null_fit = fit_lmm(d.y, d.X, re, MixedMethod::ML);
      u_hat = blup_offset(null_fit);
    } else {
      const GlmmFit null_fit = fit_glmm_pql(d.y, d.X, re, fam);
      u_hat = null_fit.u_hat;
      eta_fixed = null_fit.eta_fixed;
      mu_hat = null_fit.mu_hat;
    }
  } else if (!gaussian) {
    const Vec beta0 = glm_irls(d.y, d.X, fam);
    eta_fixed = d.X * beta0;
    mu_hat = eta_fixed.unaryExpr(
        [&](double e) { return fam.clamp_mean(fam.inv_link(e)); });
  }

  for (int t = 1; t <= cfg.max_outer; ++t) {
    Dataset adjusted = d;
    adjusted.family = Family::Gaussian;
    if (gaussian) {
      adjusted.y = d.y - u_hat;
    } else if (cfg.link_adjusted) {
      adjusted.y = link_adjusted_response(d.y, u_hat, fam);
    } else {
      adjusted.y = working_response(d.y, mu_hat, eta_fixed, fam);
    }

    out.semms_fit = fit_semms(adjusted, cfg.semms);
    out.state = out.semms_fit.state;
    out.selected_trace.push_back(out.state.active);

    const Mat w = selected_design(d, out.state, nullptr);
    Vec u_new;
    try {
      if (gaussian) {
        const ReFit refit = fit_lmm(d.y, w, re, MixedMethod::ML);
        out.re_loglik_trace.push_back(refit.loglik);
        u_new = refit.u_hat;
      } else {
        const GlmmFit refit = fit_glmm_pql(d.y, w, re, fam);
        out.re_loglik_trace.push_back(refit.approx_loglik);
        u_new = refit.u_hat;
        eta_fixed = refit.eta_fixed;
        mu_hat = refit.mu_hat;
      }
    } catch (const numerical_error& err) {
      throw numerical_error("random-effects refit failed at outer iteration " +
                            std::to_string(t) + ": " + err.what());
    }

    const double delta = (u_new - u_hat).cwiseAbs().maxCoeff();
    out.u_trace.push_back(delta);
    u_hat = u_new;
    out.outer_iters = t;
    if (delta < cfg.conv_tol) {
      out.converged = true;
      break;
    }
  }

  out.u_hat = u_hat;
  out.final_model = run_final_model(d, out.state, cfg);
  return out;
}

}  // namespace semms
