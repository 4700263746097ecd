#include "recap/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <thread>

#include "recap/errors.hpp"

namespace recap {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double quantile_sorted(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = prob * (static_cast<double>(sorted.size()) - 1.0);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

struct ReplicateRecord {
  double N_hat = std::numeric_limits<double>::quiet_NaN();
  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();
  bool censored = false;
  bool covered = false;
  bool converged = false;
  bool unstable = false;
  bool has_ci = false;
};

}  // namespace

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = base;
  std::uint64_t h = splitmix64(x);
  x ^= a;
  h ^= splitmix64(x);
  x ^= b;
  h ^= splitmix64(x);
  return h;
}

std::string scenario_token(Scenario s) {
  switch (s) {
    case Scenario::A: return "A";
    case Scenario::B: return "B";
    case Scenario::C: return "C";
    case Scenario::Custom: return "custom";
  }
  return "?";
}

ScenarioConfig make_scenario(Scenario s, double N0, int K, int reps, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.scenario = s;
  cfg.N0 = N0;
  cfg.K = K;
  cfg.reps = reps;
  cfg.seed = seed;
  ModelSpec model;
  model.covariate_columns = {0, 1};
  switch (s) {
    case Scenario::A:
      model.family = ModelFamily::Mh;
      cfg.beta0 = Eigen::Vector3d(0.1, -2.5, -0.15);
      break;
    case Scenario::B:
      model.family = ModelFamily::Mhb;
      cfg.beta0 = Eigen::Vector4d(0.1, -2.5, -0.15, 0.8);
      break;
    case Scenario::C:
      model.family = ModelFamily::Mhb;
      cfg.beta0 = Eigen::Vector4d(0.1, -2.5, -0.15, -0.8);
      break;
    case Scenario::Custom:
      model.family = ModelFamily::Mh;
      cfg.beta0 = Eigen::Vector3d(0.1, -2.5, -0.15);
      break;
  }
  cfg.model_true = model;
  cfg.model_fit = model;
  return cfg;
}

Eigen::VectorXi simulate_history(const ModelSpec& model, const Eigen::VectorXd& beta,
                                 const Eigen::VectorXd& x, int K, Rng& rng) {
  Eigen::VectorXi d = Eigen::VectorXi::Zero(K);
  const int s = model.param_dim(K);
  if (beta.size() != s) throw DataError("simulate_history: parameter dimension mismatch");
  Eigen::VectorXd z(s);
  bool captured_before = false;
  for (int k = 0; k < K; ++k) {
    int pos = 0;
    if (model.has_intercept()) z[pos++] = 1.0;
    if (model.has_heterogeneity()) {
      z.segment(pos, x.size()) = x;
      pos += static_cast<int>(x.size());
    }
    if (model.has_time()) {
      z.segment(pos, K).setZero();
      z[pos + k] = 1.0;
      pos += K;
    }
    if (model.has_behavior()) z[pos++] = captured_before ? 1.0 : 0.0;
    d[k] = rng.bernoulli(logistic(beta.dot(z)));
    if (d[k]) captured_before = true;
  }
  return d;
}

CaptureDataset generate_population(const ScenarioConfig& cfg, int replicate, int* resampled) {
  const int N0 = static_cast<int>(cfg.N0);
  const int K = cfg.K;
  const int s_needed = std::max(cfg.model_true.param_dim(K), cfg.model_fit.param_dim(K));
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(replicate),
                     static_cast<std::uint64_t>(attempt)));
    std::vector<Eigen::VectorXi> hist;
    std::vector<Eigen::Vector2d> cov;
    for (int j = 0; j < N0; ++j) {
      const double x1 = rng.normal();
      const double x2 = rng.bernoulli(0.5);
      const Eigen::Vector2d x(x1, x2);
      const Eigen::VectorXi d = simulate_history(cfg.model_true, cfg.beta0, x, K, rng);
      if (d.sum() > 0) {
        hist.push_back(d);
        cov.push_back(x);
      }
    }
    const int n = static_cast<int>(hist.size());
    if (n < s_needed + 2) continue;

    CaptureDataset data;
    data.histories.resize(n, K);
    data.covariates.resize(n, 2);
    for (int i = 0; i < n; ++i) {
      data.histories.row(i) = hist[static_cast<size_t>(i)].transpose();
      data.covariates.row(i) = cov[static_cast<size_t>(i)].transpose();
    }
    data.covariate_names = {"x1", "x2"};
    data.history_names.clear();
    for (int k = 1; k <= K; ++k) data.history_names.push_back("d" + std::to_string(k));
    if (resampled) *resampled = attempt;
    return data;
  }
  throw NumericalError("generate_population: could not draw a usable replicate");
}

SimulationReport run_study(const ScenarioConfig& cfg, const std::vector<Method>& estimators,
                           const StudyOptions& options) {
  const int reps = cfg.reps;
  const int E = static_cast<int>(estimators.size());
  std::vector<std::vector<ReplicateRecord>> records(
      static_cast<size_t>(E), std::vector<ReplicateRecord>(static_cast<size_t>(reps)));
  std::vector<int> attempts(static_cast<size_t>(reps), 0);

  const auto run_replicate = [&](int r) {
    int resampled = 0;
    const CaptureDataset data = generate_population(cfg, r, &resampled);
    attempts[static_cast<size_t>(r)] = resampled;
    const DatasetSummary summary = summarize(data);
    const PenaltyConfig pen = penalty_config(summary);

    for (int e = 0; e < E; ++e) {
      ReplicateRecord rec;
      const Method method = estimators[static_cast<size_t>(e)];
      if (method == Method::CL) {
        const FitResult fit = em_cl(data, cfg.model_fit, options.ctrl);
        rec.N_hat = std::fmin(fit.N_hat, options.ctrl.n_cap);
        rec.converged = fit.converged;
        rec.unstable = fit.unstable;
        if (options.with_ci) {
          const ConfidenceInterval ci = wald_ci_cl(fit, data, cfg.model_fit, cfg.level);
          rec.has_ci = true;
          rec.lower = ci.lower;
          rec.upper = ci.upper;
          rec.censored = ci.upper_censored;
          rec.unstable = rec.unstable || ci.unstable;
          rec.covered = cfg.N0 >= ci.lower && (ci.upper_censored || cfg.N0 <= ci.upper);
        }
      } else {
        const PenaltyConfig use_pen =
            (method == Method::PEL) ? pen : PenaltyConfig{pen.chao, 0.0};
        const FitResult fit = em_unknown_n(data, cfg.model_fit, use_pen, options.ctrl);
        rec.N_hat = fit.N_hat;
        rec.converged = fit.converged;
        if (options.with_ci) {
          const ConfidenceInterval ci = ratio_ci(fit, data, cfg.model_fit, cfg.level, options.ctrl);
          rec.has_ci = true;
          rec.lower = ci.lower;
          rec.upper = ci.upper;
          rec.censored = ci.upper_censored;
          rec.covered = cfg.N0 >= ci.lower && (ci.upper_censored || cfg.N0 <= ci.upper);
        }
      }
      records[static_cast<size_t>(e)][static_cast<size_t>(r)] = rec;
    }
  };

  const int nthreads = std::max(1, options.threads);
  if (nthreads == 1) {
    for (int r = 0; r < reps; ++r) run_replicate(r);
  } else {
    std::atomic<int> next{0};
    const auto worker = [&]() {
      int r;
      while ((r = next.fetch_add(1)) < reps) run_replicate(r);
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  SimulationReport report;
  report.scenario = scenario_token(cfg.scenario);
  report.N0 = cfg.N0;
  report.K = cfg.K;
  report.reps = reps;
  report.seed = cfg.seed;
  report.level = cfg.level;
  report.model_fit = family_token(cfg.model_fit.family);
  report.with_ci = options.with_ci;
  for (const int a : attempts) report.resampled += a;

  for (int e = 0; e < E; ++e) {
    EstimatorReport er;
    er.name = method_token(estimators[static_cast<size_t>(e)]);
    double sq_sum = 0.0, sum = 0.0;
    int covered = 0, with_ci = 0;
    std::vector<double> widths, log_widths;
    for (int r = 0; r < reps; ++r) {
      const ReplicateRecord& rec = records[static_cast<size_t>(e)][static_cast<size_t>(r)];
      er.N_hats.push_back(rec.N_hat);
      const double err = rec.N_hat - cfg.N0;
      sq_sum += err * err;
      sum += rec.N_hat;
      if (!rec.converged) ++er.unconverged;
      if (rec.unstable) ++er.unstable;
      if (rec.has_ci) {
        ++with_ci;
        er.lowers.push_back(rec.lower);
        er.uppers.push_back(rec.upper);
        if (rec.censored) ++er.censored_upper;
        if (rec.covered) ++covered;
        const double width = rec.upper - rec.lower;
        widths.push_back(width);
        log_widths.push_back(width > 0.0 ? std::log(width) : -std::numeric_limits<double>::infinity());
      }
    }
    const double R = static_cast<double>(reps);
    er.rmse = std::sqrt(sq_sum / R);
    er.mean_N_hat = sum / R;
    double var = 0.0;
    for (const double v : er.N_hats) var += (v - er.mean_N_hat) * (v - er.mean_N_hat);
    er.mc_se_mean = reps > 1 ? std::sqrt(var / (R * (R - 1.0))) : 0.0;
    er.coverage = with_ci > 0 ? static_cast<double>(covered) / with_ci
                              : std::numeric_limits<double>::quiet_NaN();
    std::sort(widths.begin(), widths.end());
    std::sort(log_widths.begin(), log_widths.end());
    er.median_width = quantile_sorted(widths, 0.5);
    er.iqr_width = quantile_sorted(widths, 0.75) - quantile_sorted(widths, 0.25);
    er.median_log_width = quantile_sorted(log_widths, 0.5);
    er.iqr_log_width = quantile_sorted(log_widths, 0.75) - quantile_sorted(log_widths, 0.25);
    report.estimators.push_back(std::move(er));
  }
  return report;
}

}  // namespace recap
