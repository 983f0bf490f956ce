#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dstein/baselines.hpp"
#include "dstein/experiments.hpp"
#include "dstein/gof.hpp"
#include "dstein/sampler.hpp"

namespace {

using namespace dstein;

std::vector<Vec> read_data_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open data file: " + path);
  std::vector<Vec> data;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (!data.empty() && static_cast<Eigen::Index>(row.size()) != data[0].size())
      throw std::invalid_argument("ragged data CSV: " + path);
    data.push_back(Eigen::Map<const Vec>(row.data(), row.size()));
  }
  if (data.empty()) throw std::invalid_argument("empty data file: " + path);
  return data;
}

SurrogateMode surrogate_from_flag(const std::string& s) {
  if (s == "base") return SurrogateMode::kBaseOnly;
  if (s == "smooth") return SurrogateMode::kSmoothRelaxed;
  throw CLI::ValidationError("--surrogate must be base or smooth");
}

int cmd_run(const std::string& config_path) {
  ExperimentConfig config;
  try {
    config = load_experiment_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  const ExperimentOutcome outcome = run_experiment(config);
  int failed_cells = 0;
  for (const auto& r : outcome.table.rows)
    if (r.metric == "failed") ++failed_cells;
  std::cout << "experiment " << config.experiment << ": "
            << outcome.table.rows.size() << " result rows, " << failed_cells
            << " failed cells\n";
  for (const auto& a : outcome.artifacts)
    std::cout << "  wrote " << config.output_dir << "/" << a << "\n";
  return outcome.any_failed ? 3 : 0;
}

int cmd_report(const std::vector<std::string>& csv_paths,
               const std::string& out_path) {
  std::string report;
  try {
    report = compare_report(csv_paths);
  } catch (const std::exception& e) {
    std::cerr << "report error: " << e.what() << "\n";
    return 2;
  }
  if (out_path.empty()) {
    std::cout << report;
  } else {
    std::ofstream out(out_path);
    if (!out) {
      std::cerr << "cannot write " << out_path << "\n";
      return 2;
    }
    out << report;
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int cmd_gof(const std::string& model_path, const std::string& data_path,
            const GofConfig& config) {
  std::vector<Vec> data;
  std::shared_ptr<const DiscreteModel> model;
  try {
    model = std::shared_ptr<const DiscreteModel>(load_model_json(model_path));
    data = read_data_csv(data_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  const ContinuousParameterization cp = make_gaussian_parameterization(model);
  const GofResult result = run_gof_test(data, cp, config);
  std::cout << gof_result_json(result, static_cast<int>(data.size()),
                               config.bootstrap_count, config.seed)
            << "\n";
  return 0;
}

int cmd_sample(const std::string& model_path, const std::string& method, int n,
               int iters, std::uint64_t seed, const std::string& out_path,
               double step_size, SurrogateMode surrogate_mode) {
  std::shared_ptr<const DiscreteModel> model;
  try {
    model = std::shared_ptr<const DiscreteModel>(load_model_json(model_path));
    if (n < 1) throw std::invalid_argument("--n must be >= 1");
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  RandomStream rng(seed);
  Mat samples;
  if (method == "gfsvgd") {
    const ContinuousParameterization cp = make_gaussian_parameterization(model);
    const Surrogate surrogate(cp, surrogate_mode);
    SamplerConfig config;
    config.num_particles = n;
    config.iterations = iters;
    config.step_size = step_size;
    config.seed = seed;
    samples = run_sampler(cp, surrogate, config).discrete_samples;
  } else if (method == "gibbs") {
    Mat init(n, model->dim());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < model->dim(); ++j)
        init(i, j) = rng.uniform() < 0.5 ? -1.0 : 1.0;
    if (const auto* ising = dynamic_cast<const IsingModel*>(model.get())) {
      samples = gibbs_sample_ising(*ising, init, iters, rng.raw());
    } else if (const auto* rbm =
                   dynamic_cast<const BernoulliRbm*>(model.get())) {
      samples = gibbs_sample_rbm(*rbm, init, iters, rng.raw());
    } else {
      std::cerr << "config error: gibbs supports ising and rbm models\n";
      return 2;
    }
  } else {
    samples = exact_mc_sample(*model, n, rng);
  }
  write_samples_csv(out_path, samples);
  std::cout << "wrote " << out_path << " (" << samples.rows() << " samples)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discrete-stein: gradient-free Stein sampling and testing "
               "for discrete distributions"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run a bundled experiment config");
  run->add_option("config", config_path, "experiment config JSON")->required();

  std::vector<std::string> csv_paths;
  std::string report_out;
  auto* report = app.add_subcommand("report", "summarize result tables");
  report->add_option("csv", csv_paths, "results.csv files")->required();
  report->add_option("--out", report_out, "write the report to a file");

  std::string model_path, data_path, surrogate_name = "base";
  GofConfig gof_config;
  auto* gof = app.add_subcommand("gof", "goodness-of-fit test");
  gof->add_option("model", model_path, "null model JSON")->required();
  gof->add_option("data", data_path, "discrete sample CSV")->required();
  gof->add_option("--bootstrap", gof_config.bootstrap_count, "replicates");
  gof->add_option("--alpha", gof_config.alpha, "significance level");
  gof->add_option("--surrogate", surrogate_name, "base or smooth");
  gof->add_option("--seed", gof_config.seed, "random seed");
  gof->add_flag("--smooth-p", gof_config.smooth_p_value,
                "(count+1)/(m+1) p-value");

  std::string sample_model, method = "gfsvgd", sample_out = "samples.csv";
  std::string sample_surrogate = "base";
  int sample_n = 100, sample_iters = 500;
  std::uint64_t sample_seed = 0;
  double sample_step = 0.05;
  auto* sample = app.add_subcommand("sample", "draw samples from a model");
  sample->add_option("model", sample_model, "model JSON")->required();
  sample->add_option("--method", method, "gfsvgd, gibbs, or mc")
      ->check(CLI::IsMember({"gfsvgd", "gibbs", "mc"}));
  sample->add_option("--n", sample_n, "number of samples");
  sample->add_option("--iters", sample_iters, "iterations or sweeps");
  sample->add_option("--seed", sample_seed, "random seed");
  sample->add_option("--out", sample_out, "output CSV path");
  sample->add_option("--step", sample_step, "optimizer step size");
  sample->add_option("--surrogate", sample_surrogate, "base or smooth");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (report->parsed()) return cmd_report(csv_paths, report_out);
    if (gof->parsed()) {
      gof_config.surrogate_mode = surrogate_from_flag(surrogate_name);
      return cmd_gof(model_path, data_path, gof_config);
    }
    return cmd_sample(sample_model, method, sample_n, sample_iters, sample_seed,
                      sample_out, sample_step,
                      surrogate_from_flag(sample_surrogate));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
