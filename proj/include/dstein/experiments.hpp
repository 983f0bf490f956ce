#pragma once

#include <string>
#include <vector>

#include "dstein/gof.hpp"
#include "dstein/sampler.hpp"

namespace dstein {

// Ground truth for experiment metrics: enumerate the model exactly when
// feasible, or run long Gibbs chains and cache the result on disk.
struct GroundTruthSpec {
  std::string source = "enumerate";  // "enumerate" | "gibbs"
  int chains = 500;
  int sweeps = 100000;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  std::string experiment;  // categorical_tv | ising_mse | rbm_mmd |
                           // gof_type1 | gof_power | bnn_toy
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  int trials = 1;
  std::vector<std::string> methods;
  std::vector<double> parameters;  // sample sizes n, or ensemble sizes
  std::string model_json;          // serialized model spec, where applicable

  SamplerConfig sampler;
  SurrogateMode surrogate_mode = SurrogateMode::kBaseOnly;
  GofConfig gof;
  double coupling_factor = 2.0;  // gof_power alternative: couplings scaled
  GroundTruthSpec ground_truth;

  // bnn_toy settings
  int bnn_data_n = 60;
  double bnn_separation = 4.0;
  int bnn_hidden = 8;
  int bnn_steps = 300;
  int bnn_batch = 20;
};

// Parses and validates a JSON experiment config. Unknown keys are
// rejected; every field above has a default.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const std::string& text);

struct ResultRow {
  std::string experiment;
  std::string method;
  double parameter;
  int trial;
  std::string metric;
  double value;
};

struct ResultTable {
  std::vector<ResultRow> rows;

  // Throws on duplicate (experiment, method, parameter, trial, metric).
  void check_unique() const;
  std::string to_csv() const;
  static ResultTable from_csv(const std::string& path);
};

struct ExperimentOutcome {
  ResultTable table;
  bool any_failed = false;
  std::vector<std::string> artifacts;  // files written, relative to output_dir
};

// Executes every (method x parameter x trial) cell on the thread pool,
// each cell with its own spawned random stream, and writes results.csv,
// timings.csv, per-run traces when enabled, and an SVG plot of the mean
// metric per method. Numeric failures mark the cell "failed" and the run
// continues.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

// Merges result CSVs into a text summary: mean metric per (method,
// parameter), per-parameter method ranking, and log-log slope fits for
// series measured over at least three parameters. Wall-clock means are
// pulled from a timings.csv next to each input when present. Throws when
// the methods of a group share no common parameter.
std::string compare_report(const std::vector<std::string>& csv_paths);

// Least-squares slope of log(y) against log(x); x and y positive.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// Minimal SVG line chart, one polyline per series.
struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};
std::string render_svg_plot(const std::string& title, const std::string& x_label,
                            const std::string& y_label,
                            const std::vector<PlotSeries>& series);

}  // namespace dstein
