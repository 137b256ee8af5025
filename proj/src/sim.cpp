#include "semms/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "semms/csv.hpp"
#include "semms/gam.hpp"
#include "semms/lasso.hpp"
#include "semms/mixed.hpp"
#include "semms/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace semms {

std::pair<Dataset, std::vector<int>> generate(const SimScenario& s) {
  Rng rng(s.seed, 0);
  const int n_total = s.total_n();

  Dataset d;
  d.family = s.family;
  d.X = Mat::Ones(n_total, 1);
  d.Z.resize(n_total, s.k);
  for (int r = 0; r < n_total; ++r) {
    for (int j = 0; j < s.k; ++j) d.Z(r, j) = rng.normal();
  }
  for (int j = 0; j < s.k; ++j) d.z_names.push_back("V" + std::to_string(j + 1));

  // Time covariate 1..n standardized to zero mean, unit sample SD.
  Vec t(s.n);
  for (int j = 0; j < s.n; ++j) t(j) = j + 1;
  const double t_mean = t.mean();
  const double t_sd = std::sqrt((t.array() - t_mean).square().sum() / (s.n - 1));
  t = (t.array() - t_mean) / t_sd;

  Vec b0(s.m), b1(s.m);
  for (int i = 0; i < s.m; ++i) {
    b0(i) = s.sigma_b0 * rng.normal();
    b1(i) = s.sigma_b1 * rng.normal();
  }

  d.y.resize(n_total);
  d.group.resize(n_total);
  d.slope_covariate.resize(n_total);
  for (int i = 0; i < s.m; ++i) d.group_labels.push_back(std::to_string(i + 1));

  for (int i = 0; i < s.m; ++i) {
    for (int j = 0; j < s.n; ++j) {
      const int row = i * s.n + j;
      d.group[row] = i;
      d.slope_covariate(row) = t(j);
      double eta = b0(i) + b1(i) * t(j);
      for (std::size_t v = 0; v < s.true_idx.size(); ++v) {
        eta += s.beta_true(v) * d.Z(row, s.true_idx[v]);
      }
      switch (s.family) {
        case Family::Gaussian:
          d.y(row) = eta + rng.normal();
          break;
        case Family::Poisson:
          d.y(row) = static_cast<double>(rng.poisson(std::exp(eta)));
          break;
        case Family::Binomial:
          d.y(row) = rng.bernoulli(1.0 / (1.0 + std::exp(-eta))) ? 1.0 : 0.0;
          break;
      }
    }
  }
  return {std::move(d), s.true_idx};
}

Dataset load_sleepstudy(const std::string& path) {
  const CsvTable table = read_csv(path);
  int col_reaction = -1, col_days = -1, col_subject = -1;
  for (int c = 0; c < table.n_cols(); ++c) {
    if (table.header[c] == "Reaction") col_reaction = c;
    if (table.header[c] == "Days") col_days = c;
    if (table.header[c] == "Subject") col_subject = c;
  }
  if (col_reaction < 0 || col_days < 0 || col_subject < 0) {
    throw std::invalid_argument(
        "expected Reaction, Days, Subject columns in " + path);
  }

  std::vector<double> y, days;
  std::vector<std::string> subject;
  for (int r = 0; r < table.n_rows(); ++r) {
    const double day = parse_cell(table.rows[r][col_days], r + 1, col_days + 1);
    if (day < 2.0) continue;  // adaptation and training days
    y.push_back(parse_cell(table.rows[r][col_reaction], r + 1, col_reaction + 1));
    days.push_back(day);
    subject.push_back(table.rows[r][col_subject]);
  }

  Dataset d;
  const int n = static_cast<int>(y.size());
  d.y = Eigen::Map<Vec>(y.data(), n);
  d.slope_covariate = Eigen::Map<Vec>(days.data(), n);
  d.X = Mat::Ones(n, 1);
  d.Z.resize(n, 0);
  d.group.resize(n);
  std::map<std::string, int> codes;
  for (int i = 0; i < n; ++i) {
    auto [it, inserted] =
        codes.try_emplace(subject[i], static_cast<int>(d.group_labels.size()));
    if (inserted) d.group_labels.push_back(subject[i]);
    d.group[i] = it->second;
  }
  d.family = Family::Gaussian;
  return d;
}

std::pair<Dataset, std::vector<int>> augment_semisynthetic(
    const Dataset& base, int k,
    const std::vector<std::pair<int, double>>& signal, std::uint64_t seed) {
  const int n = base.n();
  Rng rng(seed, 0);
  Dataset d = base;
  d.Z.resize(n, k);
  d.z_names.clear();
  for (int r = 0; r < n; ++r) {
    for (int j = 0; j < k; ++j) d.Z(r, j) = rng.normal();
  }
  for (int j = 0; j < k; ++j) {
    const double mean = d.Z.col(j).mean();
    const double sd =
        std::sqrt((d.Z.col(j).array() - mean).square().sum() / (n - 1));
    d.Z.col(j) = (d.Z.col(j).array() - mean) / sd;
    d.z_names.push_back("V" + std::to_string(j + 1));
  }
  std::vector<int> truth;
  for (const auto& [idx, coef] : signal) {
    if (idx < 0 || idx >= k) {
      throw std::invalid_argument("signal index out of range");
    }
    d.y += coef * d.Z.col(idx);
    truth.push_back(idx);
  }
  std::sort(truth.begin(), truth.end());
  return {std::move(d), truth};
}

SelectionMetrics score_selection(const std::vector<int>& selected,
                                 const std::vector<int>& truth) {
  SelectionMetrics m;
  for (int s : selected) {
    if (std::find(truth.begin(), truth.end(), s) != truth.end()) {
      ++m.tp;
    } else {
      ++m.fp;
    }
  }
  m.exact = (m.tp == static_cast<int>(truth.size())) && m.fp == 0;
  return m;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::PlainSemms: return "plain-semms";
    case Method::MixedSemms: return "mixed-semms";
    case Method::LassoCv: return "lasso-cv";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "plain-semms" || name == "plain") return Method::PlainSemms;
  if (name == "mixed-semms" || name == "mixed") return Method::MixedSemms;
  if (name == "lasso-cv" || name == "lasso") return Method::LassoCv;
  throw std::invalid_argument("unknown method: " + name);
}

namespace {

ReplicateRow fit_one(const SimScenario& s, Method method, const Dataset& d,
                     const std::vector<int>& truth, int rep,
                     std::uint64_t seed) {
  ReplicateRow row;
  row.rep = rep;
  row.seed = seed;
  row.method = method;
  try {
    std::vector<int> selected;
    switch (method) {
      case Method::PlainSemms: {
        const SemmsFit fit = d.family == Family::Gaussian
                                 ? fit_semms(d, FitConfig{})
                                 : fit_semms_glm(d, FitConfig{});
        selected = fit.state.active;
        row.converged = fit.converged;
        break;
      }
      case Method::MixedSemms: {
        MixedConfig cfg;
        cfg.family = d.family;
        cfg.re_intercept = true;
        cfg.re_slope = s.sigma_b1 > 0.0;
        const MixedFit fit = fit_semms_mixed(d, cfg);
        selected = fit.state.active;
        row.outer_iters = fit.outer_iters;
        row.converged = fit.converged;
        break;
      }
      case Method::LassoCv: {
        const LassoResult fit = fit_lasso_cv(d, d.family, 5, 100, seed);
        selected = fit.selected;
        break;
      }
    }
    const SelectionMetrics m = score_selection(selected, truth);
    row.tp = m.tp;
    row.fp = m.fp;
    row.exact = m.exact;
    row.selected = std::move(selected);
  } catch (const std::exception& err) {
    row.failed = true;
    row.error = err.what();
  }
  return row;
}

}  // namespace

std::vector<MethodSummary> aggregate_rows(const std::vector<Method>& methods,
                                          const std::vector<ReplicateRow>& rows) {
  std::vector<MethodSummary> out;
  for (Method m : methods) {
    MethodSummary s;
    s.method = m;
    long sum_tp = 0, sum_fp = 0, sum_exact = 0, sum_outer = 0;
    for (const auto& row : rows) {
      if (row.method != m) continue;
      if (row.failed) {
        ++s.n_failed;
        continue;
      }
      ++s.n_ok;
      sum_tp += row.tp;
      sum_fp += row.fp;
      sum_exact += row.exact ? 1 : 0;
      sum_outer += row.outer_iters;
      s.max_outer_iters = std::max(s.max_outer_iters, row.outer_iters);
      s.n_converged += row.converged ? 1 : 0;
    }
    if (s.n_ok > 0) {
      s.mean_tp = static_cast<double>(sum_tp) / s.n_ok;
      s.mean_fp = static_cast<double>(sum_fp) / s.n_ok;
      s.exact_rate = static_cast<double>(sum_exact) / s.n_ok;
      if (m == Method::MixedSemms) {
        s.mean_outer_iters = static_cast<double>(sum_outer) / s.n_ok;
      }
    }
    out.push_back(s);
  }
  return out;
}

BenchmarkTable run_benchmark(const SimScenario& s,
                             const std::vector<Method>& methods, int reps,
                             std::uint64_t base_seed, int workers) {
  BenchmarkTable table;
  table.scenario = s.name;
  table.n_reps = reps;
  table.base_seed = base_seed;
  const int n_methods = static_cast<int>(methods.size());
  table.rows.resize(static_cast<std::size_t>(reps) * n_methods);
  for (int r = 0; r < reps; ++r) table.seeds.push_back(base_seed + r);

#pragma omp parallel for schedule(dynamic) num_threads(std::max(workers, 1))
  for (int r = 0; r < reps; ++r) {
    SimScenario rep_scenario = s;
    rep_scenario.seed = base_seed + r;
    const auto [data, truth] = generate(rep_scenario);
    for (int mi = 0; mi < n_methods; ++mi) {
      table.rows[static_cast<std::size_t>(r) * n_methods + mi] =
          fit_one(s, methods[mi], data, truth, r, rep_scenario.seed);
    }
  }

  table.methods = aggregate_rows(methods, table.rows);
  return table;
}

std::string benchmark_json(const BenchmarkTable& table) {
  nlohmann::ordered_json j;
  j["scenario"] = table.scenario;
  j["n_reps"] = table.n_reps;
  j["base_seed"] = table.base_seed;
  j["seeds"] = table.seeds;
  j["methods"] = nlohmann::ordered_json::array();
  for (const auto& m : table.methods) {
    nlohmann::ordered_json jm;
    jm["method"] = method_name(m.method);
    jm["n_ok"] = m.n_ok;
    jm["n_failed"] = m.n_failed;
    jm["mean_tp"] = m.mean_tp;
    jm["mean_fp"] = m.mean_fp;
    jm["exact_rate"] = m.exact_rate;
    if (m.mean_outer_iters >= 0.0) {
      jm["mean_outer_iters"] = m.mean_outer_iters;
      jm["max_outer_iters"] = m.max_outer_iters;
      jm["n_converged"] = m.n_converged;
    } else {
      jm["mean_outer_iters"] = nullptr;
    }
    j["methods"].push_back(jm);
  }
  return j.dump(2);
}

void write_replicates_csv(const std::string& path, const BenchmarkTable& table) {
  CsvTable csv;
  csv.header = {"scenario", "rep",  "seed",       "method",    "failed",
                "tp",       "fp",   "exact",      "outer_iters", "converged",
                "selected", "error"};
  for (const auto& row : table.rows) {
    std::ostringstream sel;
    for (std::size_t i = 0; i < row.selected.size(); ++i) {
      if (i) sel << ' ';
      sel << row.selected[i] + 1;  // 1-based on disk
    }
    std::string error = row.error;
    std::replace(error.begin(), error.end(), ',', ';');
    csv.rows.push_back({table.scenario, std::to_string(row.rep),
                        std::to_string(row.seed), method_name(row.method),
                        row.failed ? "1" : "0", std::to_string(row.tp),
                        std::to_string(row.fp), row.exact ? "1" : "0",
                        std::to_string(row.outer_iters),
                        row.converged ? "1" : "0", sel.str(), error});
  }
  write_csv(path, csv);
}

double design_effect(int n_i, double rho) {
  if (n_i < 1) throw std::invalid_argument("cluster size must be at least 1");
  if (rho < 0.0 || rho > 1.0) {
    throw std::invalid_argument("rho must lie in [0, 1]");
  }
  return 1.0 + (n_i - 1) * rho;
}

double icc_logistic(double sigma_b0) {
  const double v = sigma_b0 * sigma_b0;
  return v / (v + M_PI * M_PI / 3.0);
}

namespace {

SimScenario make_scenario(const std::string& name, int m, int n, int k,
                          std::initializer_list<double> beta, double sb0,
                          double sb1, Family family) {
  SimScenario s;
  s.name = name;
  s.m = m;
  s.n = n;
  s.k = k;
  s.beta_true.resize(static_cast<int>(beta.size()));
  int i = 0;
  for (double b : beta) {
    s.beta_true(i) = b;
    s.true_idx.push_back(i);
    ++i;
  }
  s.sigma_b0 = sb0;
  s.sigma_b1 = sb1;
  s.family = family;
  return s;
}

}  // namespace

SimScenario scenario_by_name(const std::string& name) {
  if (name == "sim1") {
    return make_scenario("sim1", 20, 10, 100, {1.5, -1.2, 1.0, -0.9, 0.8}, 1.5,
                         0.5, Family::Gaussian);
  }
  if (name == "sim2") {
    return make_scenario("sim2", 20, 10, 100, {0.8, -0.7, 0.6, -0.6, 0.5}, 3.0,
                         1.0, Family::Gaussian);
  }
  if (name == "sim3") {
    return make_scenario("sim3", 30, 3, 200, {2.0, -1.8, 1.5, -1.5, 1.2}, 1.5,
                         0.5, Family::Gaussian);
  }
  if (name == "sim4") {
    return make_scenario("sim4", 30, 10, 100, {0.6, -0.5, 0.4, -0.4, 0.3}, 1.0,
                         0.3, Family::Poisson);
  }
  if (name == "sim5") {
    return make_scenario("sim5", 30, 20, 100, {1.5, -1.3, 1.1, -1.0, 0.9}, 3.0,
                         1.0, Family::Binomial);
  }
  if (name == "sim6") {
    return make_scenario("sim6", 50, 20, 100, {0.8, -0.7, 0.6, -0.5, 0.5}, 3.0,
                         0.0, Family::Binomial);
  }
  std::ostringstream msg;
  msg << "unknown scenario \"" << name << "\"; available:";
  for (const auto& s : scenario_names()) msg << ' ' << s;
  throw std::invalid_argument(msg.str());
}

std::vector<std::string> scenario_names() {
  return {"sim1", "sim2", "sim3", "sim4", "sim5", "sim6"};
}

SimScenario parse_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scenario file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("scenario file line " +
                                  std::to_string(line_no) +
                                  " is not key=value");
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  auto require = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw std::invalid_argument("scenario file is missing key: " + key);
    }
    return it->second;
  };
  auto parse_list = [](const std::string& text) {
    std::vector<double> values;
    std::istringstream stream(text);
    std::string item;
    while (std::getline(stream, item, ',')) values.push_back(std::stod(item));
    return values;
  };

  SimScenario s;
  s.name = kv.count("name") ? kv["name"] : "custom";
  s.m = std::stoi(require("m"));
  s.n = std::stoi(require("n"));
  s.k = std::stoi(require("K"));
  const auto beta = parse_list(require("beta"));
  s.beta_true.resize(static_cast<int>(beta.size()));
  for (std::size_t i = 0; i < beta.size(); ++i) s.beta_true(i) = beta[i];
  if (kv.count("true_idx")) {
    for (double v : parse_list(kv["true_idx"])) {
      s.true_idx.push_back(static_cast<int>(v) - 1);  // file is 1-based
    }
  } else {
    for (std::size_t i = 0; i < beta.size(); ++i) {
      s.true_idx.push_back(static_cast<int>(i));
    }
  }
  if (s.true_idx.size() != beta.size()) {
    throw std::invalid_argument("true_idx and beta lengths differ");
  }
  s.sigma_b0 = std::stod(require("sigma_b0"));
  s.sigma_b1 = std::stod(require("sigma_b1"));
  s.family = family_from_name(require("family"));
  if (kv.count("seed")) s.seed = std::stoull(kv["seed"]);
  for (int idx : s.true_idx) {
    if (idx < 0 || idx >= s.k) {
      throw std::invalid_argument("true_idx out of range");
    }
  }
  return s;
}

}  // namespace semms
