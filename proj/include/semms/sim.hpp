#ifndef SEMMS_SIM_HPP
#define SEMMS_SIM_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "semms/dataset.hpp"

namespace semms {

struct SimScenario {
  std::string name;
  int m = 20;  // subjects
  int n = 10;  // observations per subject
  int k = 100; // candidate predictors
  std::vector<int> true_idx;  // 0-based
  Vec beta_true;
  double sigma_b0 = 0.0;
  double sigma_b1 = 0.0;
  Family family = Family::Gaussian;
  std::uint64_t seed = 0;

  int total_n() const { return m * n; }
};

/// Draws one replicate: Z iid standard normal, t = 1..n standardized,
/// independent normal random intercepts/slopes, unit Gaussian noise or
/// the Poisson/Bernoulli response through the canonical link.
std::pair<Dataset, std::vector<int>> generate(const SimScenario& s);

/// Reads the bundled reaction-time table and keeps days >= 2
/// (the earlier days are training sessions).
Dataset load_sleepstudy(const std::string& path);

/// Appends k standardized synthetic predictors and adds the requested
/// signal columns to the response.  Default signal: +20 V1 - 15 V2.
std::pair<Dataset, std::vector<int>> augment_semisynthetic(
    const Dataset& base, int k,
    const std::vector<std::pair<int, double>>& signal, std::uint64_t seed);

struct SelectionMetrics {
  int tp = 0;
  int fp = 0;
  bool exact = false;
};

SelectionMetrics score_selection(const std::vector<int>& selected,
                                 const std::vector<int>& truth);

enum class Method { PlainSemms, MixedSemms, LassoCv };
std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct ReplicateRow {
  int rep = 0;
  std::uint64_t seed = 0;
  Method method = Method::PlainSemms;
  bool failed = false;
  std::string error;
  int tp = 0;
  int fp = 0;
  bool exact = false;
  int outer_iters = 0;  // mixed only
  bool converged = true;
  std::vector<int> selected;  // 0-based
};

struct MethodSummary {
  Method method = Method::PlainSemms;
  int n_ok = 0;
  int n_failed = 0;
  double mean_tp = 0.0;
  double mean_fp = 0.0;
  double exact_rate = 0.0;
  double mean_outer_iters = -1.0;  // -1 when not applicable
  int max_outer_iters = 0;
  int n_converged = 0;
};

struct BenchmarkTable {
  std::string scenario;
  int n_reps = 0;
  std::uint64_t base_seed = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<MethodSummary> methods;
  std::vector<ReplicateRow> rows;
};

/// Replicate r draws with seed base_seed + r; every method fits the same
/// generated data.  Failures are recorded, never fatal.  Replicates run
/// in parallel over `workers` threads; aggregation is serial, so the
/// result is independent of the thread count.
BenchmarkTable run_benchmark(const SimScenario& s,
                             const std::vector<Method>& methods, int reps,
                             std::uint64_t base_seed, int workers);

std::vector<MethodSummary> aggregate_rows(const std::vector<Method>& methods,
                                          const std::vector<ReplicateRow>& rows);

/// Deterministic aggregate report (no timings, stable key order).
std::string benchmark_json(const BenchmarkTable& table);
void write_replicates_csv(const std::string& path, const BenchmarkTable& table);

double design_effect(int n_i, double rho);
double icc_logistic(double sigma_b0);

SimScenario scenario_by_name(const std::string& name);
std::vector<std::string> scenario_names();
/// Plain key=value file: m, n, K, beta (comma list), sigma_b0, sigma_b1,
/// family, optional true_idx (1-based comma list) and name.
SimScenario parse_scenario_file(const std::string& path);

}  // namespace semms

#endif
