#include "semms/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace semms {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double xlogx_ratio(int count, int total) {
  if (count == 0) return 0.0;
  return count * std::log(static_cast<double>(count) / total);
}

}  // namespace

MixtureState MixtureState::null_state(int k) {
  MixtureState s;
  s.gamma.assign(k, 0);
  s.n_zero = k;
  return s;
}

void MixtureState::set(int k, std::int8_t s) {
  const std::int8_t old = gamma[k];
  if (old == s) return;
  auto bump = [this](std::int8_t v, int by) {
    if (v < 0) n_minus += by;
    else if (v > 0) n_plus += by;
    else n_zero += by;
  };
  bump(old, -1);
  bump(s, +1);
  gamma[k] = s;
  auto pos = std::lower_bound(active.begin(), active.end(), k);
  if (old == 0) {
    active.insert(pos, k);
  } else if (s == 0) {
    active.erase(pos);
  }
}

bool MixtureState::counts_consistent() const {
  int minus = 0, zero = 0, plus = 0;
  for (auto g : gamma) {
    if (g < 0) ++minus;
    else if (g > 0) ++plus;
    else ++zero;
  }
  if (minus != n_minus || zero != n_zero || plus != n_plus) return false;
  if (static_cast<int>(active.size()) != minus + plus) return false;
  for (int idx : active) {
    if (gamma[idx] == 0) return false;
  }
  return std::is_sorted(active.begin(), active.end());
}

double prior_log_score(const MixtureState& state, int k) {
  return xlogx_ratio(state.n_minus, k) + xlogx_ratio(state.n_zero, k) +
         xlogx_ratio(state.n_plus, k);
}

LikelihoodWorkspace build_workspace(const Dataset& d, const MixtureState& state,
                                    const ModelParams& p) {
  const int n = d.n();
  const int np = d.p();
  const int l = state.L();
  LikelihoodWorkspace w;
  w.ZG.resize(n, l);
  for (int j = 0; j < l; ++j) {
    const int k = state.active[j];
    w.ZG.col(j) = static_cast<double>(state.gamma[k]) * d.Z.col(k);
  }
  w.ZtZ = w.ZG.transpose() * w.ZG;
  Mat h(n, np + l);
  h.leftCols(np) = d.X;
  h.rightCols(l) = w.ZG;
  w.HtH = h.transpose() * h;
  w.HtY = h.transpose() * d.y;
  w.yty = d.y.squaredNorm();
  refresh_b(w, p);
  return w;
}

void refresh_b(LikelihoodWorkspace& w, const ModelParams& p) {
  const int l = static_cast<int>(w.ZtZ.rows());
  if (l == 0) {
    w.B.resize(0, 0);
    w.logdet_ib = 0.0;
    return;
  }
  const double ratio = p.sigma2_r / p.sigma2_e;
  Mat m = Mat::Identity(l, l) + ratio * w.ZtZ;
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success) {
    throw numerical_error("singular (I + ratio Z'Z) in likelihood workspace");
  }
  w.B = llt.solve(Mat::Identity(l, l));
  w.logdet_ib = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

namespace {

// Shared likelihood kernel: all inputs are cross-products, so the cost
// is O(L^3 + (P+L)^2) regardless of N.
double loglik_kernel(int n, double yty, const Mat& hth, const Vec& hty,
                     const ModelParams& p, int l, const Mat* b,
                     double logdet_ib) {
  const int np = static_cast<int>(hty.size()) - l;
  Vec theta(np + l);
  theta.head(np) = p.beta;
  theta.tail(l).setConstant(p.mu);

  const Vec hth_theta = hth * theta;
  double rtr = yty - 2.0 * theta.dot(hty) + theta.dot(hth_theta);
  if (rtr < 0.0) rtr = 0.0;  // round-off guard near exact fits

  double quad = rtr / p.sigma2_e;
  double logdet_prec = -n * std::log(p.sigma2_e);
  if (l > 0) {
    const Vec ztr = hty.tail(l) - hth_theta.tail(l);
    const Vec bz = (*b) * ztr;
    quad -= (p.sigma2_r / (p.sigma2_e * p.sigma2_e)) * ztr.dot(bz);
    logdet_prec -= logdet_ib;
  }

  const double ll = -0.5 * n * kLog2Pi + 0.5 * logdet_prec - 0.5 * quad;
  if (!std::isfinite(ll)) {
    const char* term = !std::isfinite(quad) ? "quadratic form" : "log-determinant";
    throw numerical_error(std::string("non-finite log-likelihood (") + term + ")");
  }
  return ll;
}

}  // namespace

double log_likelihood(const Dataset& d, const MixtureState& state,
                      const ModelParams& p, const LikelihoodWorkspace& w) {
  return loglik_kernel(d.n(), w.yty, w.HtH, w.HtY, p, state.L(), &w.B,
                       w.logdet_ib);
}

GramCache GramCache::build(const Dataset& d) {
  GramCache g;
  g.ZtZ = d.Z.transpose() * d.Z;
  g.XtZ = d.X.transpose() * d.Z;
  g.XtX = d.X.transpose() * d.X;
  g.Zty = d.Z.transpose() * d.y;
  g.Xty = d.X.transpose() * d.y;
  g.yty = d.y.squaredNorm();
  g.n = d.n();
  return g;
}

double objective_from_grams(const GramCache& g, const std::vector<int>& active,
                            const std::vector<std::int8_t>& signs,
                            const ModelParams& p, int k_total) {
  const int l = static_cast<int>(active.size());
  const int np = static_cast<int>(g.XtX.rows());

  int n_plus = 0, n_minus = 0;
  for (auto s : signs) (s > 0 ? n_plus : n_minus) += 1;
  const double prior = xlogx_ratio(n_minus, k_total) +
                       xlogx_ratio(k_total - l, k_total) +
                       xlogx_ratio(n_plus, k_total);

  // Gather signed blocks for H = [X | Z_S diag(signs)].
  Mat hth(np + l, np + l);
  hth.topLeftCorner(np, np) = g.XtX;
  Vec hty(np + l);
  hty.head(np) = g.Xty;
  for (int j = 0; j < l; ++j) {
    const double sj = signs[j];
    hth.block(0, np + j, np, 1) = sj * g.XtZ.col(active[j]);
    hty(np + j) = sj * g.Zty(active[j]);
    for (int i = 0; i <= j; ++i) {
      const double v = signs[i] * sj * g.ZtZ(active[i], active[j]);
      hth(np + i, np + j) = v;
      hth(np + j, np + i) = v;
    }
  }
  hth.block(np, 0, l, np) = hth.block(0, np, np, l).transpose();

  Mat b;
  double logdet_ib = 0.0;
  if (l > 0) {
    const double ratio = p.sigma2_r / p.sigma2_e;
    Mat m = Mat::Identity(l, l) + ratio * hth.block(np, np, l, l);
    Eigen::LLT<Mat> llt(m);
    if (llt.info() != Eigen::Success) {
      throw numerical_error("singular (I + ratio Z'Z) in move evaluation");
    }
    b = llt.solve(Mat::Identity(l, l));
    logdet_ib = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  }
  const double lik =
      loglik_kernel(g.n, g.yty, hth, hty, p, l, l > 0 ? &b : nullptr, logdet_ib);
  return prior + lik;
}

namespace {

void modified_set(const MixtureState& state, int k, std::int8_t s,
                  std::vector<int>& active, std::vector<std::int8_t>& signs) {
  active.clear();
  signs.clear();
  bool inserted = false;
  for (int idx : state.active) {
    if (idx == k) {
      if (s != 0) {
        active.push_back(k);
        signs.push_back(s);
      }
      inserted = true;
      continue;
    }
    if (!inserted && idx > k && state.gamma[k] == 0 && s != 0) {
      active.push_back(k);
      signs.push_back(s);
      inserted = true;
    }
    active.push_back(idx);
    signs.push_back(state.gamma[idx]);
  }
  if (!inserted && state.gamma[k] == 0 && s != 0) {
    active.push_back(k);
    signs.push_back(s);
  }
}

double current_objective(const GramCache& g, const MixtureState& state,
                         const ModelParams& p) {
  std::vector<std::int8_t> signs;
  signs.reserve(state.active.size());
  for (int idx : state.active) signs.push_back(state.gamma[idx]);
  return objective_from_grams(g, state.active, signs, p, state.K());
}

}  // namespace

double delta_score(const GramCache& g, const MixtureState& state,
                   const ModelParams& p, int k, std::int8_t s) {
  if (s == state.gamma[k]) {
    throw std::invalid_argument("delta_score: s equals the current label");
  }
  std::vector<int> active;
  std::vector<std::int8_t> signs;
  modified_set(state, k, s, active, signs);
  return objective_from_grams(g, active, signs, p, state.K()) -
         current_objective(g, state, p);
}

double delta_score(const Dataset& d, const MixtureState& state,
                   const ModelParams& p, int k, std::int8_t s) {
  return delta_score(GramCache::build(d), state, p, k, s);
}

namespace {

std::vector<Move> admissible_moves(const MixtureState& state) {
  static constexpr std::int8_t kOrder[3] = {+1, -1, 0};
  std::vector<Move> moves;
  moves.reserve(2 * state.K());
  for (int k = 0; k < state.K(); ++k) {
    for (std::int8_t s : kOrder) {
      if (s != state.gamma[k]) moves.push_back({k, s, 0.0});
    }
  }
  return moves;
}

}  // namespace

std::vector<Move> sweep_gains_serial(const GramCache& g,
                                     const MixtureState& state,
                                     const ModelParams& p) {
  std::vector<Move> moves = admissible_moves(state);
  const double curr = current_objective(g, state, p);
  std::vector<int> active;
  std::vector<std::int8_t> signs;
  for (auto& mv : moves) {
    modified_set(state, mv.k, mv.s, active, signs);
    mv.gain = objective_from_grams(g, active, signs, p, state.K()) - curr;
  }
  return moves;
}

std::vector<Move> sweep_gains(const GramCache& g, const MixtureState& state,
                              const ModelParams& p) {
  std::vector<Move> moves = admissible_moves(state);
  const double curr = current_objective(g, state, p);
  const int n_moves = static_cast<int>(moves.size());
#pragma omp parallel
  {
    std::vector<int> active;
    std::vector<std::int8_t> signs;
#pragma omp for schedule(static)
    for (int i = 0; i < n_moves; ++i) {
      modified_set(state, moves[i].k, moves[i].s, active, signs);
      moves[i].gain =
          objective_from_grams(g, active, signs, p, state.K()) - curr;
    }
  }
  return moves;
}

Move best_move(const std::vector<Move>& moves) {
  Move best;
  best.gain = -std::numeric_limits<double>::infinity();
  // Moves are ordered by (k asc, s in +1,-1,0); a strict comparison keeps
  // the first of any tied pair, which is exactly the tie-break contract.
  for (const auto& mv : moves) {
    if (mv.gain > best.gain) best = mv;
  }
  return best;
}

}  // namespace semms
