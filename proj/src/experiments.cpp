#include "dstein/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dstein/baselines.hpp"
#include "dstein/bnn.hpp"

namespace dstein {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_param(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

void require_keys(const json& j, const std::set<std::string>& allowed,
                  const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw std::invalid_argument("unknown config field \"" + key + "\" in " +
                                  where);
}

WeightScheme parse_weight_scheme(const std::string& s) {
  if (s == "importance") return WeightScheme::kNormalizedImportance;
  if (s == "rank") return WeightScheme::kRankBased;
  throw std::invalid_argument("unknown weight scheme: " + s);
}

SurrogateMode parse_surrogate_mode(const std::string& s) {
  if (s == "base") return SurrogateMode::kBaseOnly;
  if (s == "smooth") return SurrogateMode::kSmoothRelaxed;
  throw std::invalid_argument("unknown surrogate mode: " + s);
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

std::string matrix_csv(const Mat& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += fmt_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

Mat matrix_from_csv_text(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty matrix CSV");
  Mat m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size())
      throw std::runtime_error("ragged matrix CSV");
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

// Loads a cached matrix if present and checksummed, otherwise computes,
// writes, and checksums it.
Mat cached_matrix(const std::string& csv_path,
                  const std::function<Mat()>& compute) {
  const std::string sum_path = csv_path + ".checksum";
  if (fs::exists(csv_path) && fs::exists(sum_path)) {
    const std::string text = read_file(csv_path);
    std::uint64_t stored = 0;
    std::stringstream(read_file(sum_path)) >> std::hex >> stored;
    if (fnv1a(text) != stored)
      throw std::runtime_error("checksum mismatch for cached file: " + csv_path);
    return matrix_from_csv_text(text);
  }
  const Mat m = compute();
  const std::string text = matrix_csv(m);
  write_file(csv_path, text);
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx\n",
                static_cast<unsigned long long>(fnv1a(text)));
  write_file(sum_path, buf);
  return m;
}

Mat random_spin_matrix(int n, int d, RandomStream& rng) {
  Mat m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.uniform() < 0.5 ? -1.0 : 1.0;
  return m;
}

SamplerConfig parse_sampler(const json& j) {
  require_keys(j,
               {"particles", "step_size", "iterations", "use_adam", "weights",
                "init_mean", "init_std", "record_trace"},
               "sampler");
  SamplerConfig c;
  c.num_particles = j.value("particles", c.num_particles);
  c.step_size = j.value("step_size", c.step_size);
  c.iterations = j.value("iterations", c.iterations);
  c.use_adam = j.value("use_adam", c.use_adam);
  if (j.contains("weights"))
    c.weight_scheme = parse_weight_scheme(j.at("weights").get<std::string>());
  c.init_mean = j.value("init_mean", c.init_mean);
  c.init_std = j.value("init_std", c.init_std);
  c.record_trace = j.value("record_trace", c.record_trace);
  return c;
}

GofConfig parse_gof(const json& j) {
  require_keys(j, {"bootstrap", "alpha", "surrogate", "smooth_p_value"}, "gof");
  GofConfig c;
  c.bootstrap_count = j.value("bootstrap", c.bootstrap_count);
  c.alpha = j.value("alpha", c.alpha);
  if (j.contains("surrogate"))
    c.surrogate_mode = parse_surrogate_mode(j.at("surrogate").get<std::string>());
  c.smooth_p_value = j.value("smooth_p_value", c.smooth_p_value);
  return c;
}

const std::set<std::string> kExperiments = {"categorical_tv", "ising_mse",
                                            "rbm_mmd",        "gof_type1",
                                            "gof_power",      "bnn_toy"};

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
  const json j = json::parse(text);
  require_keys(j,
               {"experiment", "output_dir", "seed", "trials", "methods",
                "parameters", "model", "sampler", "surrogate", "gof",
                "perturbation", "ground_truth", "bnn"},
               "config root");
  ExperimentConfig c;
  c.experiment = j.at("experiment").get<std::string>();
  if (!kExperiments.count(c.experiment))
    throw std::invalid_argument("unknown experiment: " + c.experiment);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.seed = j.value("seed", c.seed);
  c.trials = j.value("trials", c.trials);
  if (c.trials < 1) throw std::invalid_argument("trials must be >= 1");
  c.methods = j.at("methods").get<std::vector<std::string>>();
  c.parameters = j.at("parameters").get<std::vector<double>>();
  if (c.methods.empty() || c.parameters.empty())
    throw std::invalid_argument("methods and parameters must be non-empty");
  if (j.contains("model")) c.model_json = j.at("model").dump();
  if (j.contains("sampler")) c.sampler = parse_sampler(j.at("sampler"));
  if (j.contains("surrogate"))
    c.surrogate_mode = parse_surrogate_mode(j.at("surrogate").get<std::string>());
  if (j.contains("gof")) c.gof = parse_gof(j.at("gof"));
  if (j.contains("perturbation")) {
    require_keys(j.at("perturbation"), {"coupling_factor"}, "perturbation");
    c.coupling_factor = j.at("perturbation").value("coupling_factor", 2.0);
  }
  if (j.contains("ground_truth")) {
    const json& g = j.at("ground_truth");
    require_keys(g, {"source", "chains", "sweeps", "seed"}, "ground_truth");
    c.ground_truth.source = g.value("source", c.ground_truth.source);
    if (c.ground_truth.source != "enumerate" && c.ground_truth.source != "gibbs")
      throw std::invalid_argument("ground_truth.source must be enumerate or gibbs");
    c.ground_truth.chains = g.value("chains", c.ground_truth.chains);
    c.ground_truth.sweeps = g.value("sweeps", c.ground_truth.sweeps);
    c.ground_truth.seed = g.value("seed", c.ground_truth.seed);
  }
  if (j.contains("bnn")) {
    const json& b = j.at("bnn");
    require_keys(b, {"data_n", "separation", "hidden", "steps", "batch"}, "bnn");
    c.bnn_data_n = b.value("data_n", c.bnn_data_n);
    c.bnn_separation = b.value("separation", c.bnn_separation);
    c.bnn_hidden = b.value("hidden", c.bnn_hidden);
    c.bnn_steps = b.value("steps", c.bnn_steps);
    c.bnn_batch = b.value("batch", c.bnn_batch);
  }
  if (c.experiment != "bnn_toy" && c.model_json.empty())
    throw std::invalid_argument("experiment " + c.experiment +
                                " requires a model");
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

void ResultTable::check_unique() const {
  std::set<std::string> seen;
  for (const auto& r : rows) {
    const std::string key = r.experiment + "|" + r.method + "|" +
                            fmt_param(r.parameter) + "|" +
                            std::to_string(r.trial) + "|" + r.metric;
    if (!seen.insert(key).second)
      throw std::logic_error("duplicate result key: " + key);
  }
}

std::string ResultTable::to_csv() const {
  check_unique();
  std::string out = "experiment,method,parameter,trial,metric,value\n";
  for (const auto& r : rows) {
    out += r.experiment + "," + r.method + "," + fmt_param(r.parameter) + "," +
           std::to_string(r.trial) + "," + r.metric + "," + fmt_double(r.value) +
           "\n";
  }
  return out;
}

ResultTable ResultTable::from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open results file: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      line != "experiment,method,parameter,trial,metric,value")
    throw std::invalid_argument("unrecognized results schema in " + path);
  ResultTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    ResultRow r;
    std::string param, trial, value;
    if (!std::getline(ls, r.experiment, ',') ||
        !std::getline(ls, r.method, ',') || !std::getline(ls, param, ',') ||
        !std::getline(ls, trial, ',') || !std::getline(ls, r.metric, ',') ||
        !std::getline(ls, value))
      throw std::invalid_argument("malformed results row in " + path);
    r.parameter = std::stod(param);
    r.trial = std::stoi(trial);
    r.value = std::stod(value);
    table.rows.push_back(std::move(r));
  }
  return table;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("loglog_slope: need matched series, n >= 2");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] <= 0.0 || y[i] <= 0.0)
      throw std::invalid_argument("loglog_slope: values must be positive");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(x.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::string render_svg_plot(const std::string& title, const std::string& x_label,
                            const std::string& y_label,
                            const std::vector<PlotSeries>& series) {
  const int width = 640, height = 480;
  const double left = 70, right = 600, top = 50, bottom = 420;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series) {
    for (double v : s.x) xmin = std::min(xmin, v), xmax = std::max(xmax, v);
    for (double v : s.y) ymin = std::min(ymin, v), ymax = std::max(ymax, v);
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;
  auto px = [&](double v) {
    return left + (right - left) * (v - xmin) / (xmax - xmin);
  };
  auto py = [&](double v) {
    return bottom - (bottom - top) * (v - ymin) / (ymax - ymin);
  };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"320\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">"
      << title << "</text>\n"
      << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right
      << "\" y2=\"" << bottom << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left
      << "\" y2=\"" << bottom << "\" stroke=\"black\"/>\n"
      << "<text x=\"320\" y=\"460\" text-anchor=\"middle\" font-size=\"13\">"
      << x_label << "</text>\n"
      << "<text x=\"18\" y=\"240\" text-anchor=\"middle\" font-size=\"13\" "
         "transform=\"rotate(-90 18 240)\">"
      << y_label << "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = xmin + (xmax - xmin) * t / 4.0;
    const double yv = ymin + (ymax - ymin) * t / 4.0;
    svg << "<text x=\"" << px(xv) << "\" y=\"" << bottom + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt_param(xv)
        << "</text>\n"
        << "<text x=\"" << left - 8 << "\" y=\"" << py(yv) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << fmt_param(yv)
        << "</text>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = palette[s % 6];
    svg << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size(); ++i)
      svg << px(series[s].x[i]) << "," << py(series[s].y[i]) << " ";
    svg << "\"/>\n";
    for (std::size_t i = 0; i < series[s].x.size(); ++i)
      svg << "<circle cx=\"" << px(series[s].x[i]) << "\" cy=\""
          << py(series[s].y[i]) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    svg << "<text x=\"" << right - 140 << "\" y=\"" << top + 18 * (s + 1)
        << "\" font-size=\"12\" fill=\"" << color << "\">" << series[s].label
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

namespace {

// Shared context built once before the cell grid runs.
struct ExperimentContext {
  std::shared_ptr<const DiscreteModel> model;
  std::shared_ptr<ContinuousParameterization> cp;
  std::shared_ptr<ContinuousParameterization> alt_cp;  // gof_power data source
  Vec truth_mean;                                      // ising_mse
  Mat truth_sample;                                    // rbm_mmd
  std::vector<double> probs;                           // categorical_tv
  Dataset dataset;                                     // bnn_toy
  std::string primary_metric;
};

ExperimentContext build_context(const ExperimentConfig& config) {
  ExperimentContext ctx;
  if (!config.model_json.empty()) {
    ctx.model = std::shared_ptr<const DiscreteModel>(
        parse_model_json(config.model_json));
    ctx.cp = std::make_shared<ContinuousParameterization>(
        make_gaussian_parameterization(ctx.model));
  }
  const std::string& name = config.experiment;
  if (name == "categorical_tv") {
    ctx.probs = enumerate_log_mass(*ctx.model).probs;
    ctx.primary_metric = "tv";
  } else if (name == "ising_mse") {
    ctx.primary_metric = "mse";
    if (config.ground_truth.source == "enumerate") {
      const EnumeratedDistribution table = enumerate_log_mass(*ctx.model);
      ctx.truth_mean = Vec::Zero(ctx.model->dim());
      for (std::size_t i = 0; i < table.states.size(); ++i)
        ctx.truth_mean += table.probs[i] * table.states[i];
    } else {
      const auto* ising = dynamic_cast<const IsingModel*>(ctx.model.get());
      if (!ising)
        throw std::invalid_argument("ising_mse requires an ising model");
      const GroundTruthSpec& g = config.ground_truth;
      const Mat truth = cached_matrix(
          config.output_dir + "/ground_truth.csv", [&] {
            RandomStream rng(g.seed);
            const Mat init = random_spin_matrix(g.chains, ising->dim(), rng);
            return gibbs_sample_ising(*ising, init, g.sweeps, rng.raw());
          });
      ctx.truth_mean = truth.colwise().mean().transpose();
    }
  } else if (name == "rbm_mmd") {
    ctx.primary_metric = "mmd";
    const GroundTruthSpec& g = config.ground_truth;
    ctx.truth_sample = cached_matrix(
        config.output_dir + "/ground_truth.csv", [&] {
          RandomStream rng(g.seed);
          if (config.ground_truth.source == "enumerate")
            return exact_mc_sample(*ctx.model, g.chains, rng);
          const auto* rbm = dynamic_cast<const BernoulliRbm*>(ctx.model.get());
          if (!rbm)
            throw std::invalid_argument("rbm_mmd requires an rbm model");
          const Mat init = random_spin_matrix(g.chains, rbm->dim(), rng);
          return gibbs_sample_rbm(*rbm, init, g.sweeps, rng.raw());
        });
  } else if (name == "gof_type1" || name == "gof_power") {
    ctx.primary_metric = "reject";
    if (name == "gof_power") {
      const auto* ising = dynamic_cast<const IsingModel*>(ctx.model.get());
      if (!ising)
        throw std::invalid_argument(
            "gof_power perturbs couplings and requires an ising model");
      auto alt = std::make_shared<const IsingModel>(
          ising->scaled_couplings(config.coupling_factor));
      ctx.alt_cp = std::make_shared<ContinuousParameterization>(
          make_gaussian_parameterization(alt));
    }
    // Warm the enumeration caches before cells touch them in parallel.
    RandomStream warm(0);
    ctx.cp->sample_exact(warm);
    if (ctx.alt_cp) ctx.alt_cp->sample_exact(warm);
  } else if (name == "bnn_toy") {
    ctx.primary_metric = "accuracy";
    ctx.dataset = two_blob_dataset(config.bnn_data_n, config.bnn_separation,
                                   RandomStream(config.seed).spawn(1u << 20).raw());
  }
  return ctx;
}

double tv_distance(const Mat& samples, const EvenPartition& partition,
                   const std::vector<double>& probs) {
  std::vector<double> freq(probs.size(), 0.0);
  for (Eigen::Index i = 0; i < samples.rows(); ++i)
    freq[partition.label_index(0, samples(i, 0))] += 1.0;
  double tv = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k)
    tv += std::abs(freq[k] / samples.rows() - probs[k]);
  return tv / 2.0;
}

struct CellOutput {
  std::vector<ResultRow> rows;
  std::vector<std::pair<std::string, std::string>> artifacts;  // name, content
  double seconds = 0.0;
  bool failed = false;
};

CellOutput run_cell(const ExperimentConfig& config, const ExperimentContext& ctx,
                    const std::string& method, double parameter, int trial,
                    RandomStream stream) {
  CellOutput out;
  const auto t0 = std::chrono::steady_clock::now();
  const std::string& name = config.experiment;
  const int n = static_cast<int>(parameter);
  auto add = [&](const std::string& metric, double value) {
    out.rows.push_back({name, method, parameter, trial, metric, value});
  };
  auto run_gfsvgd = [&]() {
    SamplerConfig sc = config.sampler;
    sc.num_particles = n;
    sc.seed = stream.raw();
    const Surrogate surrogate(*ctx.cp, config.surrogate_mode);
    SamplerResult result = run_sampler(*ctx.cp, surrogate, sc);
    if (sc.record_trace) {
      std::string tag = "trace_" + method + "_p" + fmt_param(parameter) + "_t" +
                        std::to_string(trial) + ".csv";
      std::string content = "iteration,bandwidth,weight_entropy,mean_abs_update\n";
      for (const auto& row : result.trace)
        content += std::to_string(row.iteration) + "," +
                   fmt_double(row.bandwidth) + "," +
                   fmt_double(row.weight_entropy) + "," +
                   fmt_double(row.mean_abs_update) + "\n";
      out.artifacts.emplace_back(tag, std::move(content));
    }
    return result.discrete_samples;
  };

  try {
    if (name == "categorical_tv") {
      Mat samples;
      if (method == "gfsvgd") samples = run_gfsvgd();
      else if (method == "mc") samples = exact_mc_sample(*ctx.model, n, stream);
      else throw std::invalid_argument("unknown method: " + method);
      add("tv", tv_distance(samples, ctx.cp->partition(), ctx.probs));
    } else if (name == "ising_mse") {
      Mat samples;
      if (method == "gfsvgd") {
        samples = run_gfsvgd();
      } else if (method == "gibbs") {
        const auto* ising = dynamic_cast<const IsingModel*>(ctx.model.get());
        if (!ising) throw std::invalid_argument("gibbs needs an ising model");
        const Mat init = random_spin_matrix(n, ising->dim(), stream);
        samples = gibbs_sample_ising(*ising, init, config.sampler.iterations,
                                     stream.raw());
      } else if (method == "mc") {
        samples = exact_mc_sample(*ctx.model, n, stream);
      } else {
        throw std::invalid_argument("unknown method: " + method);
      }
      const Vec est = samples.colwise().mean().transpose();
      add("mse", (est - ctx.truth_mean).squaredNorm() / ctx.model->dim());
    } else if (name == "rbm_mmd") {
      Mat samples;
      if (method == "gfsvgd") {
        samples = run_gfsvgd();
      } else if (method == "gibbs") {
        const auto* rbm = dynamic_cast<const BernoulliRbm*>(ctx.model.get());
        if (!rbm) throw std::invalid_argument("gibbs needs an rbm model");
        const Mat init = random_spin_matrix(n, rbm->dim(), stream);
        samples = gibbs_sample_rbm(*rbm, init, config.sampler.iterations,
                                   stream.raw());
      } else if (method == "mc") {
        samples = exact_mc_sample(*ctx.model, n, stream);
      } else {
        throw std::invalid_argument("unknown method: " + method);
      }
      add("mmd", mmd_hamming(samples, ctx.truth_sample));
    } else if (name == "gof_type1" || name == "gof_power") {
      if (method != "gfksd")
        throw std::invalid_argument("unknown method: " + method);
      const ContinuousParameterization& source =
          name == "gof_power" ? *ctx.alt_cp : *ctx.cp;
      const std::vector<Vec> data = source.sample_exact(n, stream);
      GofConfig gc = config.gof;
      gc.seed = stream.raw();
      const GofResult result = run_gof_test(data, *ctx.cp, gc);
      add("reject", result.reject ? 1.0 : 0.0);
      add("p_value", result.p_value);
    } else if (name == "bnn_toy") {
      double acc;
      if (method == "gfsvgd") {
        BnnEnsemble ensemble(std::max(2, n), 2, config.bnn_hidden,
                             ctx.dataset.num_classes, stream.raw());
        ensemble.train(ctx.dataset, config.bnn_steps, config.bnn_batch);
        acc = ensemble.accuracy(ctx.dataset);
      } else if (method == "ste") {
        BaggingEnsemble single(1, 2, config.bnn_hidden,
                               ctx.dataset.num_classes, stream.raw());
        single.train(ctx.dataset, config.bnn_steps, config.bnn_batch);
        acc = single.accuracy(ctx.dataset);
      } else {
        throw std::invalid_argument("unknown method: " + method);
      }
      add("accuracy", acc);
    }
    for (const auto& r : out.rows)
      if (!std::isfinite(r.value))
        throw std::runtime_error("non-finite metric value");
  } catch (const std::exception&) {
    out.rows = {{name, method, parameter, trial, "failed", 1.0}};
    out.failed = true;
  }
  out.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& config) {
  fs::create_directories(config.output_dir);
  const ExperimentContext ctx = build_context(config);

  struct Cell {
    std::string method;
    double parameter;
    int trial;
  };
  std::vector<Cell> cells;
  for (const auto& method : config.methods)
    for (double parameter : config.parameters)
      for (int trial = 0; trial < config.trials; ++trial)
        cells.push_back({method, parameter, trial});

  const RandomStream root(config.seed);
  std::vector<CellOutput> outputs(cells.size());
  parallel_for(cells.size(), [&](std::size_t i) {
    outputs[i] = run_cell(config, ctx, cells[i].method, cells[i].parameter,
                          cells[i].trial, root.spawn(i));
  });

  ExperimentOutcome outcome;
  std::string timings = "method,parameter,trial,seconds\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    outcome.any_failed = outcome.any_failed || outputs[i].failed;
    for (auto& r : outputs[i].rows) outcome.table.rows.push_back(std::move(r));
    for (auto& [tag, content] : outputs[i].artifacts) {
      write_file(config.output_dir + "/" + tag, content);
      outcome.artifacts.push_back(tag);
    }
    timings += cells[i].method + "," + fmt_param(cells[i].parameter) + "," +
               std::to_string(cells[i].trial) + "," +
               fmt_double(outputs[i].seconds) + "\n";
  }
  write_file(config.output_dir + "/results.csv", outcome.table.to_csv());
  outcome.artifacts.push_back("results.csv");
  write_file(config.output_dir + "/timings.csv", timings);
  outcome.artifacts.push_back("timings.csv");

  // Mean of the primary metric per method, plotted against the parameter.
  std::vector<PlotSeries> series;
  for (const auto& method : config.methods) {
    PlotSeries s;
    s.label = method;
    for (double parameter : config.parameters) {
      double sum = 0.0;
      int count = 0;
      for (const auto& r : outcome.table.rows)
        if (r.method == method && r.parameter == parameter &&
            r.metric == ctx.primary_metric) {
          sum += r.value;
          ++count;
        }
      if (count > 0) {
        s.x.push_back(parameter);
        s.y.push_back(sum / count);
      }
    }
    if (!s.x.empty()) series.push_back(std::move(s));
  }
  write_file(config.output_dir + "/plot.svg",
             render_svg_plot(config.experiment, "parameter", ctx.primary_metric,
                             series));
  outcome.artifacts.push_back("plot.svg");
  return outcome;
}

std::string compare_report(const std::vector<std::string>& csv_paths) {
  if (csv_paths.empty())
    throw std::invalid_argument("compare_report: no input tables");

  // (experiment, metric) -> method -> parameter -> values
  std::map<std::pair<std::string, std::string>,
           std::map<std::string, std::map<double, std::vector<double>>>>
      groups;
  std::map<std::string, std::pair<double, int>> wall_clock;  // method -> sum, n
  for (const auto& path : csv_paths) {
    const ResultTable table = ResultTable::from_csv(path);
    for (const auto& r : table.rows) {
      if (r.metric == "failed") continue;
      groups[{r.experiment, r.metric}][r.method][r.parameter].push_back(r.value);
    }
    const fs::path timing = fs::path(path).parent_path() / "timings.csv";
    if (fs::exists(timing)) {
      std::ifstream in(timing);
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        std::stringstream ls(line);
        std::string method, param, trial, secs;
        if (std::getline(ls, method, ',') && std::getline(ls, param, ',') &&
            std::getline(ls, trial, ',') && std::getline(ls, secs)) {
          wall_clock[method].first += std::stod(secs);
          wall_clock[method].second += 1;
        }
      }
    }
  }
  if (groups.empty())
    throw std::invalid_argument("compare_report: tables contain no usable rows");

  std::ostringstream report;
  report << "comparison report\n=================\n";
  for (const auto& [key, methods] : groups) {
    report << "\nexperiment " << key.first << ", metric " << key.second << "\n";
    // Parameters shared by every method in the group.
    std::set<double> common;
    bool first = true;
    for (const auto& [method, by_param] : methods) {
      std::set<double> params;
      for (const auto& [p, values] : by_param) params.insert(p);
      if (first) {
        common = std::move(params);
        first = false;
      } else {
        std::set<double> keep;
        std::set_intersection(common.begin(), common.end(), params.begin(),
                              params.end(), std::inserter(keep, keep.begin()));
        common = std::move(keep);
      }
    }
    if (common.empty())
      throw std::invalid_argument(
          "compare_report: methods share no common parameter for " + key.first +
          "/" + key.second);
    for (double p : common) {
      std::vector<std::pair<double, std::string>> ranked;
      for (const auto& [method, by_param] : methods) {
        const auto& values = by_param.at(p);
        double mean = 0.0;
        for (double v : values) mean += v;
        ranked.emplace_back(mean / values.size(), method);
      }
      std::sort(ranked.begin(), ranked.end());
      report << "  parameter " << fmt_param(p) << ":";
      for (const auto& [mean, method] : ranked)
        report << "  " << method << "=" << fmt_param(mean);
      report << "\n";
    }
    for (const auto& [method, by_param] : methods) {
      std::vector<double> xs, ys;
      for (const auto& [p, values] : by_param) {
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= values.size();
        if (p > 0.0 && mean > 0.0) {
          xs.push_back(p);
          ys.push_back(mean);
        }
      }
      if (xs.size() >= 3)
        report << "  log-log slope, " << method << ": "
               << fmt_param(loglog_slope(xs, ys)) << "\n";
    }
  }
  if (!wall_clock.empty()) {
    report << "\nmean wall clock per cell (s)\n";
    for (const auto& [method, acc] : wall_clock)
      report << "  " << method << ": " << fmt_param(acc.first / acc.second)
             << "\n";
  }
  return report.str();
}

}  // namespace dstein
