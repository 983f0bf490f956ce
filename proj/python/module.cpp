#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dstein/baselines.hpp"
#include "dstein/experiments.hpp"
#include "dstein/gof.hpp"
#include "dstein/sampler.hpp"

namespace py = pybind11;
using namespace dstein;

namespace {

std::shared_ptr<const DiscreteModel> model_from_text(const std::string& json) {
  return std::shared_ptr<const DiscreteModel>(parse_model_json(json));
}

SurrogateMode surrogate_mode(const std::string& name) {
  if (name == "base") return SurrogateMode::kBaseOnly;
  if (name == "smooth") return SurrogateMode::kSmoothRelaxed;
  throw std::invalid_argument("surrogate must be 'base' or 'smooth'");
}

Mat sample_gfsvgd(const std::string& model_json, int n, int iterations,
                  double step_size, std::uint64_t seed,
                  const std::string& surrogate, double init_mean,
                  double init_std, const std::string& weights) {
  auto model = model_from_text(model_json);
  const ContinuousParameterization cp = make_gaussian_parameterization(model);
  const Surrogate rho(cp, surrogate_mode(surrogate));
  SamplerConfig config;
  config.num_particles = n;
  config.iterations = iterations;
  config.step_size = step_size;
  config.seed = seed;
  config.init_mean = init_mean;
  config.init_std = init_std;
  if (weights == "rank") config.weight_scheme = WeightScheme::kRankBased;
  else if (weights != "importance")
    throw std::invalid_argument("weights must be 'importance' or 'rank'");
  return run_sampler(cp, rho, config).discrete_samples;
}

Mat sample_gibbs(const std::string& model_json, int n, int sweeps,
                 std::uint64_t seed) {
  auto model = model_from_text(model_json);
  RandomStream rng(seed);
  Mat init(n, model->dim());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < model->dim(); ++j)
      init(i, j) = rng.uniform() < 0.5 ? -1.0 : 1.0;
  if (const auto* ising = dynamic_cast<const IsingModel*>(model.get()))
    return gibbs_sample_ising(*ising, init, sweeps, rng.raw());
  if (const auto* rbm = dynamic_cast<const BernoulliRbm*>(model.get()))
    return gibbs_sample_rbm(*rbm, init, sweeps, rng.raw());
  throw std::invalid_argument("gibbs supports ising and rbm models");
}

Mat sample_mc(const std::string& model_json, int n, std::uint64_t seed) {
  auto model = model_from_text(model_json);
  RandomStream rng(seed);
  return exact_mc_sample(*model, n, rng);
}

py::dict gof_test(const std::string& model_json, const Mat& data, int bootstrap,
                  double alpha, const std::string& surrogate,
                  std::uint64_t seed) {
  auto model = model_from_text(model_json);
  const ContinuousParameterization cp = make_gaussian_parameterization(model);
  GofConfig config;
  config.bootstrap_count = bootstrap;
  config.alpha = alpha;
  config.surrogate_mode = surrogate_mode(surrogate);
  config.seed = seed;
  std::vector<Vec> points;
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    points.push_back(data.row(i).transpose());
  const GofResult result = run_gof_test(points, cp, config);
  py::dict out;
  out["statistic"] = result.statistic;
  out["p_value"] = result.p_value;
  out["reject"] = result.reject;
  out["alpha"] = result.alpha;
  return out;
}

py::tuple enumerate_model(const std::string& model_json) {
  auto model = model_from_text(model_json);
  const EnumeratedDistribution table = enumerate_log_mass(*model);
  Mat states(table.states.size(), model->dim());
  Vec probs(table.states.size());
  for (std::size_t i = 0; i < table.states.size(); ++i) {
    states.row(i) = table.states[i].transpose();
    probs[i] = table.probs[i];
  }
  return py::make_tuple(states, probs);
}

py::dict run_experiment_json(const std::string& config_json) {
  const ExperimentConfig config = parse_experiment_config(config_json);
  const ExperimentOutcome outcome = run_experiment(config);
  py::dict out;
  out["csv"] = outcome.table.to_csv();
  out["any_failed"] = outcome.any_failed;
  out["artifacts"] = outcome.artifacts;
  out["output_dir"] = config.output_dir;
  return out;
}

}  // namespace

PYBIND11_MODULE(_dstein, m) {
  m.doc() = "gradient-free Stein sampling and testing for discrete models";
  m.def("sample_gfsvgd", &sample_gfsvgd, py::arg("model_json"), py::arg("n"),
        py::arg("iterations") = 500, py::arg("step_size") = 0.05,
        py::arg("seed") = 0, py::arg("surrogate") = "base",
        py::arg("init_mean") = 0.0, py::arg("init_std") = 1.0,
        py::arg("weights") = "importance");
  m.def("sample_gibbs", &sample_gibbs, py::arg("model_json"), py::arg("n"),
        py::arg("sweeps") = 500, py::arg("seed") = 0);
  m.def("sample_mc", &sample_mc, py::arg("model_json"), py::arg("n"),
        py::arg("seed") = 0);
  m.def("gof_test", &gof_test, py::arg("model_json"), py::arg("data"),
        py::arg("bootstrap") = 1000, py::arg("alpha") = 0.05,
        py::arg("surrogate") = "base", py::arg("seed") = 0);
  m.def("enumerate_model", &enumerate_model, py::arg("model_json"));
  m.def("mmd_hamming", &mmd_hamming, py::arg("sample_a"), py::arg("sample_b"));
  m.def("median_bandwidth", &median_bandwidth, py::arg("particles"));
  m.def("run_experiment", &run_experiment_json, py::arg("config_json"));
}
