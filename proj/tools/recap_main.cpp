#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "recap/dataset.hpp"
#include "recap/design.hpp"
#include "recap/em.hpp"
#include "recap/inference.hpp"
#include "recap/likelihood.hpp"
#include "recap/simulate.hpp"

namespace {

using nlohmann::ordered_json;

// JSON has no inf/nan; emit explicit string sentinels instead.
ordered_json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(csv);
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int default_threads() {
  if (const char* env = std::getenv("RECAP_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

struct DataArgs {
  std::string path;
  std::string history_cols;
  std::string history_prefix = "d";
  std::string covariate_cols;
  bool covariate_cols_given = false;
};

void add_data_options(CLI::App* cmd, DataArgs& args) {
  cmd->add_option("--data", args.path, "CSV data file with a header row")->required();
  cmd->add_option("--history-cols", args.history_cols,
                  "comma-separated capture-history columns in occasion order");
  cmd->add_option("--history-prefix", args.history_prefix,
                  "prefix for auto-detected history columns (default: d)");
  cmd->add_option("--covariate-cols", args.covariate_cols,
                  "comma-separated covariate columns (default: all remaining)")
      ->each([&args](const std::string&) { args.covariate_cols_given = true; });
}

std::vector<std::string> read_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw recap::DataError("cannot open data file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw recap::DataError("empty input: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.pop_back();
    size_t b = 0;
    while (b < field.size() && (field[b] == ' ' || field[b] == '\t')) ++b;
    header.push_back(field.substr(b));
  }
  return header;
}

recap::CsvSchema resolve_schema(const DataArgs& args, bool wants_covariates) {
  recap::CsvSchema schema;
  const std::vector<std::string> header = read_header(args.path);
  if (!args.history_cols.empty()) {
    schema.history_columns = split_list(args.history_cols);
  } else {
    // auto-detect <prefix><number> columns, ordered by the number
    std::vector<std::pair<int, std::string>> found;
    for (const auto& name : header) {
      if (name.size() <= args.history_prefix.size()) continue;
      if (name.compare(0, args.history_prefix.size(), args.history_prefix) != 0) continue;
      const std::string tail = name.substr(args.history_prefix.size());
      if (tail.find_first_not_of("0123456789") != std::string::npos) continue;
      found.emplace_back(std::stoi(tail), name);
    }
    std::sort(found.begin(), found.end());
    for (const auto& [k, name] : found) schema.history_columns.push_back(name);
    if (schema.history_columns.empty())
      throw recap::DataError("no history columns detected with prefix '" +
                             args.history_prefix + "'; pass --history-cols");
  }
  if (args.covariate_cols_given) {
    schema.covariate_columns = split_list(args.covariate_cols);
  } else if (wants_covariates) {
    for (const auto& name : header) {
      if (std::find(schema.history_columns.begin(), schema.history_columns.end(), name) ==
          schema.history_columns.end())
        schema.covariate_columns.push_back(name);
    }
  }
  return schema;
}

recap::ModelSpec make_model(const std::string& token, const recap::CaptureDataset& data) {
  const auto family = recap::parse_family(token);
  if (!family) throw CLI::ValidationError("--model", "unknown model token: " + token);
  recap::ModelSpec model;
  model.family = *family;
  if (model.has_heterogeneity()) {
    for (int j = 0; j < data.q(); ++j) model.covariate_columns.push_back(j);
  }
  model.validate();
  return model;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw recap::DataError("cannot write output file: " + path);
  out << text;
}

std::string format_ci(const recap::ConfidenceInterval& ci) {
  std::ostringstream os;
  if (ci.unstable && !std::isfinite(ci.lower)) return "[unstable]";
  os << '[' << ci.lower_rounded() << ", ";
  if (ci.upper_censored)
    os << ">1e9]";
  else
    os << ci.upper_rounded() << ']';
  return os.str();
}

struct FitOutput {
  recap::FitResult fit;
  recap::ConfidenceInterval ci;
  double se = 0.0;
  double aic_value = 0.0;
  recap::DatasetSummary summary;
  recap::PenaltyConfig pen;
  std::vector<std::string> warnings;
};

FitOutput run_fit(const recap::CaptureDataset& data, const recap::ModelSpec& model,
                  recap::Method method, double level, const recap::EMControl& ctrl) {
  FitOutput out;
  out.summary = recap::summarize(data);
  out.pen = recap::penalty_config(out.summary);
  switch (method) {
    case recap::Method::PEL:
      out.fit = recap::em_unknown_n(data, model, out.pen, ctrl);
      out.se = recap::profile_se(out.fit, data, model, ctrl);
      out.ci = recap::ratio_ci(out.fit, data, model, level, ctrl);
      break;
    case recap::Method::EL:
      out.fit = recap::em_unknown_n(data, model, recap::PenaltyConfig{out.pen.chao, 0.0}, ctrl);
      out.se = recap::profile_se(out.fit, data, model, ctrl);
      out.ci = recap::ratio_ci(out.fit, data, model, level, ctrl);
      break;
    case recap::Method::CL: {
      out.fit = recap::em_cl(data, model, ctrl);
      const double var = recap::cl_variance(out.fit, data, model);
      out.se = std::sqrt(var);
      out.ci = recap::wald_ci_cl(out.fit, data, model, level);
      break;
    }
  }
  out.aic_value = recap::aic(out.fit);
  if (!out.fit.converged) out.warnings.push_back("fit did not converge within max_iter");
  if (out.fit.boundary_N) out.warnings.push_back("abundance estimate hit the search cap");
  if (out.fit.separation) out.warnings.push_back("regression parameters are extreme (separation)");
  if (out.fit.unstable || out.ci.unstable)
    out.warnings.push_back("estimate is numerically unstable");
  if (out.se > 1e3) out.warnings.push_back("standard error exceeds 1e3");
  if (out.ci.below_n_warning)
    out.warnings.push_back("Wald interval extends below the observed count n");
  if (out.ci.upper_censored) out.warnings.push_back("upper confidence limit censored at 1e9");
  if (out.ci.inner_unconverged)
    out.warnings.push_back("an inner profile fit did not fully converge");
  return out;
}

ordered_json fit_to_json(const FitOutput& out, const recap::CaptureDataset& data,
                         const std::string& model_token) {
  ordered_json j;
  j["command"] = "fit";
  j["method"] = recap::method_token(out.fit.method);
  j["model"] = model_token;
  j["n"] = data.n();
  j["K"] = data.K();
  j["N_hat"] = num(out.fit.N_hat);
  j["N_hat_rounded"] = out.fit.N_rounded;
  j["SE"] = num(out.se);
  j["CI"] = ordered_json{{"lower", num(out.ci.lower)},
                         {"upper", num(out.ci.upper_censored ? out.ci.upper : out.ci.upper)},
                         {"lower_rounded", out.ci.lower_rounded()},
                         {"upper_rounded", out.ci.upper_censored ? ordered_json("censored")
                                                                 : ordered_json(out.ci.upper_rounded())},
                         {"level", out.ci.level},
                         {"method", out.ci.method},
                         {"upper_censored", out.ci.upper_censored}};
  j["alpha_hat"] = num(out.fit.alpha_hat);
  ordered_json beta = ordered_json::array();
  for (Eigen::Index i = 0; i < out.fit.beta_hat.size(); ++i) beta.push_back(num(out.fit.beta_hat[i]));
  j["beta_hat"] = beta;
  j["beta_names"] = out.fit.model.coef_names(data.K(), data.covariate_names);
  j["chao"] = num(out.pen.chao);
  j["C"] = num(out.pen.C);
  j["AIC"] = num(out.aic_value);
  j["loglik"] = num(out.fit.loglik);
  j["iterations"] = out.fit.iterations;
  j["converged"] = out.fit.converged;
  j["warnings"] = out.warnings;
  return j;
}

std::string fit_to_csv(const FitOutput& out, const std::string& model_token) {
  std::ostringstream os;
  os << "method,model,N_hat,N_hat_rounded,SE,ci_lower,ci_upper,ci_level,upper_censored,"
        "alpha_hat,chao,C,AIC,iterations,converged\n";
  os.precision(17);
  os << recap::method_token(out.fit.method) << ',' << model_token << ',' << out.fit.N_hat << ','
     << out.fit.N_rounded << ',' << out.se << ',' << out.ci.lower << ',' << out.ci.upper << ','
     << out.ci.level << ',' << (out.ci.upper_censored ? 1 : 0) << ',' << out.fit.alpha_hat << ','
     << out.pen.chao << ',' << out.pen.C << ',' << out.aic_value << ',' << out.fit.iterations
     << ',' << (out.fit.converged ? 1 : 0) << '\n';
  return os.str();
}

ordered_json report_to_json(const recap::SimulationReport& report) {
  ordered_json j;
  j["command"] = "simulate";
  j["scenario"] = report.scenario;
  j["N0"] = report.N0;
  j["K"] = report.K;
  j["reps"] = report.reps;
  j["seed"] = report.seed;
  j["level"] = report.level;
  j["model_fit"] = report.model_fit;
  j["with_ci"] = report.with_ci;
  j["resampled"] = report.resampled;
  ordered_json est = ordered_json::array();
  for (const auto& er : report.estimators) {
    ordered_json e;
    e["name"] = er.name;
    e["rmse"] = num(er.rmse);
    e["mean_N_hat"] = num(er.mean_N_hat);
    e["mc_se_mean"] = num(er.mc_se_mean);
    e["coverage"] = num(er.coverage);
    e["median_width"] = num(er.median_width);
    e["iqr_width"] = num(er.iqr_width);
    e["median_log_width"] = num(er.median_log_width);
    e["iqr_log_width"] = num(er.iqr_log_width);
    e["censored_upper"] = er.censored_upper;
    e["unconverged"] = er.unconverged;
    e["unstable"] = er.unstable;
    ordered_json nh = ordered_json::array();
    for (const double v : er.N_hats) nh.push_back(num(v));
    e["N_hats"] = nh;
    ordered_json lo = ordered_json::array(), up = ordered_json::array();
    for (const double v : er.lowers) lo.push_back(num(v));
    for (const double v : er.uppers) up.push_back(num(v));
    e["ci_lower"] = lo;
    e["ci_upper"] = up;
    est.push_back(e);
  }
  j["estimators"] = est;
  return j;
}

std::string report_to_csv(const recap::SimulationReport& report) {
  std::ostringstream os;
  os << "scenario,K,N0,reps,seed";
  for (const auto& er : report.estimators) os << ",rmse_" << er.name;
  for (const auto& er : report.estimators) os << ",coverage_" << er.name;
  for (const auto& er : report.estimators) os << ",censored_" << er.name;
  os << ",resampled\n";
  os.precision(17);
  os << report.scenario << ',' << report.K << ',' << report.N0 << ',' << report.reps << ','
     << report.seed;
  for (const auto& er : report.estimators) os << ',' << er.rmse;
  for (const auto& er : report.estimators) os << ',' << er.coverage;
  for (const auto& er : report.estimators) os << ',' << er.censored_upper;
  os << ',' << report.resampled << '\n';
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-population abundance estimation from capture-recapture data"};
  app.require_subcommand(1);

  // ---- fit ----
  DataArgs fit_data;
  std::string fit_model_token = "mh";
  std::string fit_method = "pel";
  double fit_level = 0.95;
  std::string fit_out, fit_format = "json";
  recap::EMControl fit_ctrl;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit one estimator to a dataset");
  add_data_options(fit_cmd, fit_data);
  fit_cmd->add_option("--model", fit_model_token, "model family: m0 mt mb mtb mh mht mhb mhtb");
  fit_cmd->add_option("--method", fit_method, "estimation method: pel, el, or cl")
      ->check(CLI::IsMember({"pel", "el", "cl"}));
  fit_cmd->add_option("--level", fit_level, "confidence level (default 0.95)");
  fit_cmd->add_option("--out", fit_out, "file for machine-readable output ('-' = stdout)");
  fit_cmd->add_option("--format", fit_format, "machine output format")
      ->check(CLI::IsMember({"json", "csv"}));
  fit_cmd->add_option("--tol", fit_ctrl.tol, "EM objective increment tolerance");
  fit_cmd->add_option("--max-iter", fit_ctrl.max_iter, "EM iteration cap");

  // ---- summary ----
  DataArgs sum_data;
  std::string sum_out;
  CLI::App* sum_cmd = app.add_subcommand("summary", "summarize a capture-history dataset");
  add_data_options(sum_cmd, sum_data);
  sum_cmd->add_option("--out", sum_out, "file for JSON output ('-' = stdout)");

  // ---- curve ----
  DataArgs curve_data;
  std::string curve_model_token = "mh";
  std::string curve_method = "pel";
  double grid_from = 0.0, grid_to = 0.0;
  int grid_points = 101;
  std::string curve_out = "-";
  int curve_threads = default_threads();
  CLI::App* curve_cmd = app.add_subcommand("curve", "export the abundance ratio curve as CSV");
  add_data_options(curve_cmd, curve_data);
  curve_cmd->add_option("--model", curve_model_token, "model family token");
  curve_cmd->add_option("--method", curve_method, "pel or el")
      ->check(CLI::IsMember({"pel", "el"}));
  curve_cmd->add_option("--grid-from", grid_from, "grid start (default n)");
  curve_cmd->add_option("--grid-to", grid_to, "grid end (default 4 * N_hat)");
  curve_cmd->add_option("--grid-points", grid_points, "number of grid points");
  curve_cmd->add_option("--out", curve_out, "output CSV file ('-' = stdout)");
  curve_cmd->add_option("--threads", curve_threads, "worker threads for grid evaluation");

  // ---- simulate ----
  std::string sim_scenario = "A";
  double sim_N0 = 200.0;
  int sim_K = 6, sim_reps = 1000;
  std::uint64_t sim_seed = 1;
  double sim_level = 0.95;
  std::string sim_estimators = "pel,el,cl";
  std::string sim_fit_model;
  bool sim_no_ci = false;
  int sim_threads = default_threads();
  std::string sim_out = "-", sim_csv;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "run a Monte Carlo study");
  sim_cmd->add_option("--scenario", sim_scenario, "A, B, or C")
      ->check(CLI::IsMember({"A", "B", "C", "a", "b", "c"}));
  sim_cmd->add_option("--N0", sim_N0, "true population size");
  sim_cmd->add_option("--K", sim_K, "number of capture occasions");
  sim_cmd->add_option("--reps", sim_reps, "replicate count");
  sim_cmd->add_option("--seed", sim_seed, "base seed");
  sim_cmd->add_option("--level", sim_level, "confidence level");
  sim_cmd->add_option("--estimators", sim_estimators, "subset of pel,el,cl");
  sim_cmd->add_option("--fit-model", sim_fit_model,
                      "model family used for fitting (default: the true model)");
  sim_cmd->add_flag("--no-ci", sim_no_ci, "skip interval construction (point estimates only)");
  sim_cmd->add_option("--threads", sim_threads, "worker threads (env RECAP_THREADS)");
  sim_cmd->add_option("--out", sim_out, "JSON report file ('-' = stdout)");
  sim_cmd->add_option("--csv", sim_csv, "optional CSV summary file");

  try {
    app.parse(argc, argv);

    if (fit_cmd->parsed()) {
      const auto schema_probe = resolve_schema(fit_data, true);
      const auto family = recap::parse_family(fit_model_token);
      if (!family) throw CLI::ValidationError("--model", "unknown model token: " + fit_model_token);
      recap::ModelSpec probe;
      probe.family = *family;
      recap::CsvSchema schema = schema_probe;
      if (!probe.has_heterogeneity() && !fit_data.covariate_cols_given)
        schema.covariate_columns.clear();
      const recap::CaptureDataset data = recap::load_dataset(fit_data.path, schema);
      const recap::ModelSpec model = make_model(fit_model_token, data);
      recap::Method method = recap::Method::PEL;
      if (fit_method == "el") method = recap::Method::EL;
      if (fit_method == "cl") method = recap::Method::CL;

      const FitOutput out = run_fit(data, model, method, fit_level, fit_ctrl);

      std::cout << "method  model  n    K   Est.   SE        " << (fit_level * 100) << "% CI\n";
      std::ostringstream row;
      row << recap::method_token(out.fit.method) << "     " << fit_model_token << "   "
          << data.n() << "   " << data.K() << "   " << out.fit.N_rounded << "   ";
      row.precision(4);
      row << std::fixed << out.se;
      std::cout << row.str() << "   " << format_ci(out.ci) << '\n';
      for (const auto& w : out.warnings) std::cout << "warning: " << w << '\n';

      if (!fit_out.empty()) {
        if (fit_format == "json")
          write_output(fit_out, fit_to_json(out, data, fit_model_token).dump(2) + "\n");
        else
          write_output(fit_out, fit_to_csv(out, fit_model_token));
      }
      return 0;
    }

    if (sum_cmd->parsed()) {
      const recap::CsvSchema schema = resolve_schema(sum_data, true);
      const recap::CaptureDataset data = recap::load_dataset(sum_data.path, schema);
      const recap::DatasetSummary s = recap::summarize(data);
      const recap::PenaltyConfig pen = recap::penalty_config(s);
      std::cout << "n = " << s.n << "\nK = " << s.K << "\nm1 = " << s.m1 << "\nm2 = " << s.m2
                << "\nchao_lower_bound = " << pen.chao << "\ntuning_constant_C = " << pen.C
                << "\ncaptures_per_occasion =";
      for (const int c : s.capture_counts) std::cout << ' ' << c;
      std::cout << '\n';
      if (!sum_out.empty()) {
        ordered_json j;
        j["command"] = "summary";
        j["n"] = s.n;
        j["K"] = s.K;
        j["m1"] = s.m1;
        j["m2"] = s.m2;
        j["chao"] = num(pen.chao);
        j["C"] = num(pen.C);
        j["capture_counts"] = s.capture_counts;
        write_output(sum_out, j.dump(2) + "\n");
      }
      return 0;
    }

    if (curve_cmd->parsed()) {
      const recap::CsvSchema schema = resolve_schema(curve_data, true);
      const recap::CaptureDataset data = recap::load_dataset(curve_data.path, schema);
      const recap::ModelSpec model = make_model(curve_model_token, data);
      const recap::DatasetSummary s = recap::summarize(data);
      recap::PenaltyConfig pen = recap::penalty_config(s);
      if (curve_method == "el") pen.C = 0.0;
      const recap::FitResult fit = recap::em_unknown_n(data, model, pen, {});
      recap::GridSpec grid;
      grid.from = grid_from > 0 ? grid_from : data.n();
      grid.to = grid_to > 0 ? grid_to : 4.0 * fit.N_hat;
      grid.points = grid_points;
      const recap::RatioCurve curve = recap::ratio_curve(fit, data, model, grid, {}, curve_threads);
      std::ostringstream os;
      os.precision(17);
      os << "N,ratio\n";
      for (size_t i = 0; i < curve.grid.size(); ++i)
        os << curve.grid[i] << ',' << curve.values[i] << '\n';
      write_output(curve_out, os.str());
      return 0;
    }

    if (sim_cmd->parsed()) {
      recap::Scenario sc = recap::Scenario::A;
      const char s0 = static_cast<char>(std::toupper(static_cast<unsigned char>(sim_scenario[0])));
      if (s0 == 'B') sc = recap::Scenario::B;
      if (s0 == 'C') sc = recap::Scenario::C;
      recap::ScenarioConfig cfg = recap::make_scenario(sc, sim_N0, sim_K, sim_reps, sim_seed);
      cfg.level = sim_level;
      if (!sim_fit_model.empty()) {
        const auto fam = recap::parse_family(sim_fit_model);
        if (!fam) throw CLI::ValidationError("--fit-model", "unknown model token: " + sim_fit_model);
        cfg.model_fit.family = *fam;
        cfg.model_fit.covariate_columns = cfg.model_fit.has_heterogeneity()
                                              ? std::vector<int>{0, 1}
                                              : std::vector<int>{};
      }
      std::vector<recap::Method> estimators;
      for (const auto& token : split_list(sim_estimators)) {
        if (token == "pel") estimators.push_back(recap::Method::PEL);
        else if (token == "el") estimators.push_back(recap::Method::EL);
        else if (token == "cl") estimators.push_back(recap::Method::CL);
        else throw CLI::ValidationError("--estimators", "unknown estimator: " + token);
      }
      recap::StudyOptions options;
      options.with_ci = !sim_no_ci;
      options.threads = sim_threads;
      const recap::SimulationReport report = recap::run_study(cfg, estimators, options);
      for (const auto& er : report.estimators) {
        std::cerr << er.name << ": rmse=" << er.rmse << " coverage=" << er.coverage
                  << " censored=" << er.censored_upper << " unconverged=" << er.unconverged
                  << '\n';
      }
      write_output(sim_out, report_to_json(report).dump(2) + "\n");
      if (!sim_csv.empty()) write_output(sim_csv, report_to_csv(report));
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const recap::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const recap::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
