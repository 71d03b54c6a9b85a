#include "svb/harness.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "svb/dpm.hpp"
#include "svb/io.hpp"
#include "svb/lanes.hpp"
#include "svb/mcmc.hpp"
#include "svb/mfvb.hpp"
#include "svb/models.hpp"
#include "svb/schools.hpp"

namespace svb {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> tokenize(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::vector<int> parse_schedule(const std::string& value, int line) {
  std::vector<int> out;
  for (const std::string& tok : tokenize(value)) {
    const auto dots = tok.find("..");
    if (dots == std::string::npos) {
      out.push_back(std::stoi(tok));
      continue;
    }
    const auto dots2 = tok.find("..", dots + 2);
    if (dots2 == std::string::npos)
      throw ConfigError("schedule range needs from..to..step", line);
    const int from = std::stoi(tok.substr(0, dots));
    const int to = std::stoi(tok.substr(dots + 2, dots2 - dots - 2));
    const int step = std::stoi(tok.substr(dots2 + 2));
    if (step <= 0 || to < from) throw ConfigError("bad schedule range", line);
    for (int v = from; v <= to; v += step) out.push_back(v);
  }
  return out;
}

const std::map<std::string, std::vector<std::string>> kAllowedMethods = {
    {"ar3", {"svb", "uvb", "uvb-is", "mcmc"}},
    {"mixture", {"svb", "uvb", "uvb-is", "mcmc"}},
    {"schools", {"svb", "uvb", "uvb-is", "mcmc"}},
    {"dpm", {"svb", "uvb", "mfvb", "indep"}},
    {"lanes-prep", {}},
};

void apply_default_methods(ExperimentConfig& config) {
  if (!config.methods.empty()) return;
  if (config.name == "schools")
    config.methods = {"uvb", "uvb-is", "mcmc"};
  else if (config.name == "dpm")
    config.methods = {"svb", "uvb", "mfvb", "indep"};
  else if (config.name != "lanes-prep")
    config.methods = {"svb", "uvb", "uvb-is", "mcmc"};
}

void apply_default_schedule(ExperimentConfig& config) {
  if (!config.schedule.empty() || config.name == "schools" || config.name == "lanes-prep")
    return;
  if (config.name == "ar3")
    for (int b = 100; b <= 500; b += 25) config.schedule.push_back(b);
  else if (config.name == "mixture")
    for (int b = 10; b <= 100; b += 10) config.schedule.push_back(b);
  else if (config.name == "dpm")
    config.schedule = {50, 75, 100};
}

}  // namespace

void ExperimentConfig::validate() const {
  if (kAllowedMethods.find(name) == kAllowedMethods.end())
    throw ConfigError("unknown experiment name '" + name + "'", 0);
  const auto& allowed = kAllowedMethods.at(name);
  for (const std::string& m : methods) {
    bool ok = false;
    for (const std::string& a : allowed) ok = ok || a == m;
    if (!ok) throw ConfigError("methods.set: unknown method '" + m + "' for " + name, 0);
  }
  if (replications < 1) throw ConfigError("experiment.replications must be >= 1", 0);
  if (workers < 1) throw ConfigError("experiment.workers must be >= 1", 0);
  for (int k : components)
    if (k < 1) throw ConfigError("family.components entries must be >= 1", 0);
  if (name == "ar3" || name == "mixture" || name == "dpm") {
    if (schedule.empty()) throw ConfigError("model.schedule required", 0);
    int prev = 0;
    for (int b : schedule) {
      if (b <= prev) throw ConfigError("model.schedule must increase", 0);
      prev = b;
    }
    const int len = name == "ar3" ? ar3_length : (name == "mixture" ? mix_length : dpm_length);
    if (prev > len) throw ConfigError("model.schedule exceeds the data length", 0);
  }
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig config;
  std::stringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  bool saw_tolerance = false;

  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // trim
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", line_no);
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    const auto kl = key.find_last_not_of(" \t");
    key = key.substr(0, kl + 1);
    const auto vf = value.find_first_not_of(" \t");
    value = vf == std::string::npos ? "" : value.substr(vf);
    if (value.empty()) throw ConfigError("empty value for '" + key + "'", line_no);

    const std::string qualified = section + "." + key;
    try {
      if (qualified == "experiment.name") config.name = value;
      else if (qualified == "experiment.replications") config.replications = std::stoi(value);
      else if (qualified == "experiment.seed") config.seed = std::stoull(value);
      else if (qualified == "experiment.out") config.out_dir = value;
      else if (qualified == "experiment.workers") config.workers = std::stoi(value);
      else if (qualified == "experiment.traces") config.traces = value == "on" || value == "true";
      else if (qualified == "methods.set") config.methods = tokenize(value);
      else if (qualified == "family.components") {
        config.components.clear();
        for (const auto& tok : tokenize(value)) config.components.push_back(std::stoi(tok));
      } else if (qualified == "sga.draws") config.draws = std::stoi(value);
      else if (qualified == "sga.is_draws") config.is_draws = std::stoi(value);
      else if (qualified == "sga.max_iterations") config.stop.max_iterations = std::stoi(value);
      else if (qualified == "sga.smoothing_window") config.stop.smoothing_window = std::stoi(value);
      else if (qualified == "sga.tolerance") {
        config.stop.tolerance_rel = std::stod(value);
        saw_tolerance = true;
      } else if (qualified == "sga.adam_rate") config.adam.base_rate = std::stod(value);
      else if (qualified == "sga.ess_warn_fraction") config.ess_warn_fraction = std::stod(value);
      else if (qualified == "model.schedule") config.schedule = parse_schedule(value, line_no);
      else if (qualified == "model.length") {
        config.ar3_length = std::stoi(value);
        config.mix_length = std::stoi(value);
        config.dpm_length = std::stoi(value);
      } else if (qualified == "model.units") {
        config.mix_units = std::stoi(value);
        config.dpm_units = std::stoi(value);
      } else if (qualified == "model.alpha") {
        config.mix_alpha = std::stod(value);
        config.dpm_alpha = std::stod(value);
      } else if (qualified == "model.beta") config.mix_beta = std::stod(value);
      else if (qualified == "model.prob_draws") config.prob_draws = std::stoi(value);
      else if (qualified == "model.horizon") config.dpm_horizon = std::stoi(value);
      else if (qualified == "model.separation") config.dpm_separation = std::stod(value);
      else if (qualified == "model.marginal_draws") config.dpm_marginal_draws = std::stoi(value);
      else if (qualified == "model.panel") config.dpm_panel = value;
      else if (qualified == "model.orderings") config.schools_orderings = std::stoi(value);
      else if (qualified == "predict.draws") config.predictive_draws = std::stoi(value);
      else if (qualified == "mcmc.iterations") config.mcmc_iterations = std::stoi(value);
      else if (qualified == "mcmc.burn_in") config.mcmc_burn_in = std::stoi(value);
      else if (qualified == "mcmc.scale") config.mcmc_scale = std::stod(value);
      else if (qualified == "lanes.input") config.lanes_input = value;
      else if (qualified == "lanes.output") config.lanes_output = value;
      else if (qualified == "lanes.smoothing") config.lanes_smoothing = std::stod(value);
      else if (qualified == "lanes.vehicles") config.lanes_vehicles = std::stoi(value);
      else if (qualified == "lanes.points") config.lanes_points = std::stoi(value);
      else throw ConfigError("unknown key '" + qualified + "'", line_no);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("bad value for '" + qualified + "'", line_no);
    }
  }
  (void)saw_tolerance;
  apply_default_methods(config);
  apply_default_schedule(config);
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  return parse_config(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

namespace {

void ensure_dirs(const ExperimentConfig& config) {
  fs::create_directories(fs::path(config.out_dir) / "data");
  fs::create_directories(fs::path(config.out_dir) / "fits");
}

std::string data_path(const ExperimentConfig& config, const std::string& file) {
  return (fs::path(config.out_dir) / "data" / file).string();
}

std::string fits_path(const ExperimentConfig& config, const std::string& file) {
  return (fs::path(config.out_dir) / "fits" / file).string();
}

void write_metadata(const ExperimentConfig& config) {
  json meta;
  meta["experiment"] = config.name;
  meta["methods"] = config.methods;
  meta["components"] = config.components;
  meta["replications"] = config.replications;
  meta["seed"] = config.seed;
  meta["workers"] = config.workers;
  meta["sga"] = {{"draws", config.draws},
                 {"is_draws", config.is_draws},
                 {"max_iterations", config.stop.max_iterations},
                 {"smoothing_window", config.stop.smoothing_window},
                 {"tolerance_rel", config.stop.tolerance_rel},
                 {"adam_rate", config.adam.base_rate},
                 {"adam_beta1", config.adam.beta1},
                 {"adam_beta2", config.adam.beta2},
                 {"adam_epsilon", config.adam.epsilon},
                 {"ess_warn_fraction", config.ess_warn_fraction}};
  meta["schedule"] = config.schedule;
  meta["predictive_draws"] = config.predictive_draws;
  meta["prob_draws"] = config.prob_draws;
  meta["mcmc"] = {{"iterations", config.mcmc_iterations},
                  {"burn_in", config.mcmc_burn_in},
                  {"scale", config.mcmc_scale}};
  if (config.name == "dpm")
    meta["dpm"] = {{"units", config.dpm_units},
                   {"length", config.dpm_length},
                   {"horizon", config.dpm_horizon},
                   {"separation", config.dpm_separation},
                   {"alpha", config.dpm_alpha},
                   {"marginal_draws", config.dpm_marginal_draws}};
  write_text_file((fs::path(config.out_dir) / "metadata.json").string(), meta.dump(2) + "\n");
}

void parallel_for(int count, int workers, const std::function<void(int)>& body) {
  if (workers <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const int n_threads = std::min(workers, count);
  for (int w = 0; w < n_threads; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

EngineSettings engine_settings(const ExperimentConfig& config) {
  EngineSettings s;
  s.draws = config.draws;
  s.is_draws = config.is_draws;
  s.stop = config.stop;
  s.adam = config.adam;
  s.ess_warn_fraction = config.ess_warn_fraction;
  s.keep_traces = true;
  return s;
}

// per-(rep, method, K) scoped seed streams
std::uint64_t scoped_seed(const ExperimentConfig& config, int rep, int tag) {
  return mix_seed(mix_seed(config.seed, 1000003ull * (rep + 1)), tag);
}

struct MethodArtifacts {
  ScoreTable scores;
  std::vector<std::vector<double>> timing;  // rep, K, boundary, wall, cum_wall
  std::string posteriors;                   // ndjson
  std::string traces;                       // ndjson
};

void flush_artifacts(const ExperimentConfig& config, const std::string& method,
                     const MethodArtifacts& art) {
  write_text_file(fits_path(config, "scores_" + method + ".csv"), art.scores.to_csv(false));
  write_csv(fits_path(config, "timing_" + method + ".csv"),
            {"replication", "K", "boundary", "wall_seconds", "cum_wall_seconds"}, art.timing);
  write_text_file(fits_path(config, "posteriors_" + method + ".ndjson"), art.posteriors);
  if (config.traces)
    write_text_file(fits_path(config, "traces_" + method + ".ndjson"), art.traces);
}

std::string snapshot_line(int rep, const std::string& method, int k, const FitRecord& rec,
                          const MixtureFamily& family) {
  json j;
  j["replication"] = rep;
  j["method"] = method;
  j["K"] = k;
  j["boundary"] = rec.boundary;
  j["iterations"] = rec.iterations;
  j["converged"] = rec.converged;
  j["sga_obs_evals"] = rec.sga_obs_evals;
  j["min_ess"] = rec.min_ess;
  j["lambda"] = std::vector<double>(rec.lambda.data(), rec.lambda.data() + rec.lambda.size());
  j["dim"] = family.dim();
  j["components"] = family.components();
  return j.dump() + "\n";
}

std::string trace_lines(int rep, const std::string& method, int k, const FitRecord& rec) {
  std::string out;
  for (const IterationRecord& it : rec.trace) {
    json j;
    j["replication"] = rep;
    j["method"] = method;
    j["K"] = k;
    j["boundary"] = rec.boundary;
    j["iteration"] = it.iteration;
    j["elbo"] = it.elbo;
    j["grad_norm"] = it.grad_norm;
    j["grad_var_median"] = it.grad_var_median;
    j["grad_var_first"] = it.grad_var_first;
    j["ess"] = it.ess;
    out += j.dump() + "\n";
  }
  return out;
}

Mat thin_rows(const Mat& draws, int want) {
  if (draws.rows() <= want) return draws;
  Mat out(want, draws.cols());
  for (int i = 0; i < want; ++i)
    out.row(i) = draws.row(static_cast<int>((static_cast<long long>(i) * draws.rows()) / want));
  return out;
}

// ---------------------------------------------------------------------------
// AR3 experiment
// ---------------------------------------------------------------------------

void simulate_ar3(const ExperimentConfig& config) {
  std::vector<std::vector<double>> truth_rows;
  for (int rep = 0; rep < config.replications; ++rep) {
    Rng rng(scoped_seed(config, rep, 1));
    const Ar3Params params = ar3_draw_params(rng);
    const Vec y = ar3_simulate(params, config.ar3_length, rng);
    std::vector<std::vector<double>> rows;
    for (int t = 0; t < y.size(); ++t) rows.push_back({static_cast<double>(t), y[t]});
    write_csv(data_path(config, "ar3_rep" + std::to_string(rep) + ".csv"), {"t", "y"}, rows);
    truth_rows.push_back({static_cast<double>(rep), params.mu, params.phi1, params.phi2,
                          params.phi3, params.log_sigma2});
  }
  write_csv(data_path(config, "ar3_truth.csv"),
            {"replication", "mu", "phi1", "phi2", "phi3", "log_sigma2"}, truth_rows);
}

Vec load_ar3_series(const ExperimentConfig& config, int rep) {
  const CsvTable table = read_csv(data_path(config, "ar3_rep" + std::to_string(rep) + ".csv"));
  Vec y(table.rows.size());
  const int c = table.column("y");
  for (std::size_t i = 0; i < table.rows.size(); ++i) y[i] = table.rows[i][c];
  return y;
}

void score_ar3_sequence(const ExperimentConfig& config, const Ar3Model& model, int rep,
                        const std::string& method, int k, const PosteriorSequence& seq,
                        MethodArtifacts& art) {
  for (const FitRecord& rec : seq.records) {
    const int boundary = rec.boundary;
    if (boundary < model.length()) {
      Rng rng(scoped_seed(config, rep, 50000 + boundary));
      const DrawBatch draws = seq.family.sample(rec.lambda, config.predictive_draws, rng);
      const double ls = ar3_predictive_logscore(draws.draws, model.last3(boundary),
                                                model.series()[boundary]);
      art.scores.append({rep, method, k, boundary, "ls", ls, rec.cum_wall_seconds});
    }
    art.timing.push_back({static_cast<double>(rep), static_cast<double>(k),
                          static_cast<double>(boundary), rec.wall_seconds,
                          rec.cum_wall_seconds});
    art.posteriors += snapshot_line(rep, method, k, rec, seq.family);
    if (config.traces) art.traces += trace_lines(rep, method, k, rec);
  }
}

void fit_ar3(const ExperimentConfig& config) {
  const UpdateSchedule schedule{config.schedule};
  const bool want_svb = std::count(config.methods.begin(), config.methods.end(), "svb") > 0;
  const bool want_mcmc = std::count(config.methods.begin(), config.methods.end(), "mcmc") > 0;
  if (!want_svb && !want_mcmc) return;

  std::vector<MethodArtifacts> svb_parts(config.replications);
  std::vector<MethodArtifacts> mcmc_parts(config.replications);

  parallel_for(config.replications, config.workers, [&](int rep) {
    Ar3Model model(load_ar3_series(config, rep));
    if (want_svb) {
      for (int k : config.components) {
        MixtureFamily family(5, k);
        const PosteriorSequence seq = svb_sequence(model, schedule, family,
                                                   engine_settings(config),
                                                   scoped_seed(config, rep, 10 + k));
        score_ar3_sequence(config, model, rep, "svb", k, seq, svb_parts[rep]);
      }
    }
    if (want_mcmc) {
      double cum = 0.0;
      for (int boundary : config.schedule) {
        ChainConfig chain;
        chain.iterations = config.mcmc_iterations;
        chain.burn_in = config.mcmc_burn_in;
        chain.initial_scale = config.mcmc_scale;
        chain.seed = scoped_seed(config, rep, 900 + boundary);
        const auto start = std::chrono::steady_clock::now();
        TargetDensity target{[&model, boundary](const Vec& theta) {
                               return model.log_prior(theta) +
                                      model.window_loglik(theta, {0, boundary});
                             },
                             "ar3-posterior"};
        const ChainResult chain_result = rwmh_sample(target, 5, chain);
        cum += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (boundary < model.length()) {
          const Mat draws = thin_rows(chain_result.draws, config.predictive_draws);
          const double ls = ar3_predictive_logscore(draws, model.last3(boundary),
                                                    model.series()[boundary]);
          mcmc_parts[rep].scores.append({rep, "mcmc", 0, boundary, "ls", ls, cum});
        }
        mcmc_parts[rep].timing.push_back({static_cast<double>(rep), 0.0,
                                          static_cast<double>(boundary), 0.0, cum});
      }
    }
  });

  if (want_svb) {
    MethodArtifacts merged;
    for (auto& part : svb_parts) {
      merged.scores.rows.insert(merged.scores.rows.end(), part.scores.rows.begin(),
                                part.scores.rows.end());
      merged.timing.insert(merged.timing.end(), part.timing.begin(), part.timing.end());
      merged.posteriors += part.posteriors;
      merged.traces += part.traces;
    }
    flush_artifacts(config, "svb", merged);
  }
  if (want_mcmc) {
    MethodArtifacts merged;
    for (auto& part : mcmc_parts) {
      merged.scores.rows.insert(merged.scores.rows.end(), part.scores.rows.begin(),
                                part.scores.rows.end());
      merged.timing.insert(merged.timing.end(), part.timing.begin(), part.timing.end());
      merged.posteriors += part.posteriors;
    }
    flush_artifacts(config, "mcmc", merged);
  }
}

void update_ar3(const ExperimentConfig& config) {
  const UpdateSchedule schedule{config.schedule};
  for (const std::string method : {std::string("uvb"), std::string("uvb-is")}) {
    if (!std::count(config.methods.begin(), config.methods.end(), method)) continue;
    std::vector<MethodArtifacts> parts(config.replications);
    parallel_for(config.replications, config.workers, [&](int rep) {
      Ar3Model model(load_ar3_series(config, rep));
      for (int k : config.components) {
        MixtureFamily family(5, k);
        const PosteriorSequence seq =
            method == "uvb"
                ? uvb_run(model, schedule, family, engine_settings(config),
                          scoped_seed(config, rep, 20 + k))
                : uvbis_run(model, schedule, family, engine_settings(config),
                            scoped_seed(config, rep, 30 + k));
        score_ar3_sequence(config, model, rep, method, k, seq, parts[rep]);
      }
    });
    MethodArtifacts merged;
    for (auto& part : parts) {
      merged.scores.rows.insert(merged.scores.rows.end(), part.scores.rows.begin(),
                                part.scores.rows.end());
      merged.timing.insert(merged.timing.end(), part.timing.begin(), part.timing.end());
      merged.posteriors += part.posteriors;
      merged.traces += part.traces;
    }
    flush_artifacts(config, method, merged);
  }
}

// ---------------------------------------------------------------------------
// Mixture experiment
// ---------------------------------------------------------------------------

void simulate_mixture(const ExperimentConfig& config) {
  for (int rep = 0; rep < config.replications; ++rep) {
    Rng rng(scoped_seed(config, rep, 2));
    const MixturePanel panel = mixture_simulate(config.mix_units, config.mix_length, rng);
    std::vector<std::vector<double>> rows, labels;
    for (int i = 0; i < panel.y.rows(); ++i) {
      labels.push_back({static_cast<double>(i), static_cast<double>(panel.labels[i])});
      for (int t = 0; t < panel.y.cols(); ++t)
        rows.push_back({static_cast<double>(i), static_cast<double>(t), panel.y(i, t)});
    }
    write_csv(data_path(config, "mixture_rep" + std::to_string(rep) + ".csv"),
              {"unit", "t", "y"}, rows);
    write_csv(data_path(config, "mixture_labels" + std::to_string(rep) + ".csv"),
              {"unit", "k"}, labels);
  }
}

std::pair<Mat, std::vector<int>> load_mixture(const ExperimentConfig& config, int rep) {
  const Mat panel =
      read_deviation_panel_csv(data_path(config, "mixture_rep" + std::to_string(rep) + ".csv"));
  const CsvTable labels =
      read_csv(data_path(config, "mixture_labels" + std::to_string(rep) + ".csv"));
  std::vector<int> truth(labels.rows.size());
  const int c_unit = labels.column("unit"), c_k = labels.column("k");
  for (const auto& row : labels.rows)
    truth[static_cast<int>(row[c_unit])] = static_cast<int>(row[c_k]);
  return {panel, truth};
}

std::vector<int> argmax_labels(const Mat& probs) {
  std::vector<int> out(probs.rows());
  for (int i = 0; i < probs.rows(); ++i) out[i] = probs(i, 1) > probs(i, 0);
  return out;
}

void fit_mixture(const ExperimentConfig& config) {
  const UpdateSchedule schedule{config.schedule};
  const bool want_svb = std::count(config.methods.begin(), config.methods.end(), "svb") > 0;
  const bool want_mcmc = std::count(config.methods.begin(), config.methods.end(), "mcmc") > 0;
  if (!want_svb && !want_mcmc) return;
  std::vector<MethodArtifacts> svb_parts(config.replications), mcmc_parts(config.replications);

  parallel_for(config.replications, config.workers, [&](int rep) {
    const auto [panel, truth] = load_mixture(config, rep);
    MixtureModel model(panel, config.mix_alpha, config.mix_beta, 10.0, config.prob_draws);
    if (want_svb) {
      for (int k : config.components) {
        MixtureFamily family(4, k);
        const PosteriorSequence seq = svb_sequence(model, schedule, family,
                                                   engine_settings(config),
                                                   scoped_seed(config, rep, 40 + k));
        for (const FitRecord& rec : seq.records) {
          Rng rng(scoped_seed(config, rep, 60000 + 100 * k + rec.boundary));
          const DrawBatch draws = family.sample(rec.lambda, config.prob_draws, rng);
          const Mat probs =
              model.estimate_class_probs(draws.draws, {0, rec.boundary}, model.initial_probs());
          const double ca = classification_accuracy(argmax_labels(probs), truth);
          svb_parts[rep].scores.append({rep, "svb", k, rec.boundary, "ca", ca,
                                        rec.cum_wall_seconds});
          svb_parts[rep].timing.push_back({static_cast<double>(rep), static_cast<double>(k),
                                           static_cast<double>(rec.boundary), rec.wall_seconds,
                                           rec.cum_wall_seconds});
          svb_parts[rep].posteriors += snapshot_line(rep, "svb", k, rec, family);
          if (config.traces) svb_parts[rep].traces += trace_lines(rep, "svb", k, rec);
        }
      }
    }
    if (want_mcmc) {
      double cum = 0.0;
      for (int boundary : config.schedule) {
        ChainConfig chain;
        chain.iterations = config.mcmc_iterations;
        chain.burn_in = config.mcmc_burn_in;
        chain.initial_scale = config.mcmc_scale;
        chain.seed = scoped_seed(config, rep, 70000 + boundary);
        const Mat prior_probs = model.initial_probs();
        TargetDensity target{[&](const Vec& theta) {
                               return model.log_prior(theta) +
                                      mixture_marginal_loglik(theta, panel, {0, boundary},
                                                              prior_probs);
                             },
                             "mixture-posterior"};
        const auto start = std::chrono::steady_clock::now();
        const ChainResult chain_result = rwmh_sample(target, 4, chain);
        cum += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const Mat draws = thin_rows(chain_result.draws, config.prob_draws);
        const Mat probs = model.estimate_class_probs(draws, {0, boundary}, prior_probs);
        const double ca = classification_accuracy(argmax_labels(probs), truth);
        mcmc_parts[rep].scores.append({rep, "mcmc", 0, boundary, "ca", ca, cum});
        mcmc_parts[rep].timing.push_back({static_cast<double>(rep), 0.0,
                                          static_cast<double>(boundary), 0.0, cum});
      }
    }
  });

  const auto merge_and_flush = [&](const std::string& method,
                                   std::vector<MethodArtifacts>& parts) {
    MethodArtifacts merged;
    for (auto& part : parts) {
      merged.scores.rows.insert(merged.scores.rows.end(), part.scores.rows.begin(),
                                part.scores.rows.end());
      merged.timing.insert(merged.timing.end(), part.timing.begin(), part.timing.end());
      merged.posteriors += part.posteriors;
      merged.traces += part.traces;
    }
    flush_artifacts(config, method, merged);
  };
  if (want_svb) merge_and_flush("svb", svb_parts);
  if (want_mcmc) merge_and_flush("mcmc", mcmc_parts);
}

void update_mixture(const ExperimentConfig& config) {
  const UpdateSchedule schedule{config.schedule};
  for (const std::string method : {std::string("uvb"), std::string("uvb-is")}) {
    if (!std::count(config.methods.begin(), config.methods.end(), method)) continue;
    std::vector<MethodArtifacts> parts(config.replications);
    parallel_for(config.replications, config.workers, [&](int rep) {
      const auto [panel, truth] = load_mixture(config, rep);
      for (int k : config.components) {
        MixtureModel model(panel, config.mix_alpha, config.mix_beta, 10.0, config.prob_draws);
        MixtureFamily family(4, k);
        const PosteriorSequence seq =
            method == "uvb"
                ? uvb_run(model, schedule, family, engine_settings(config),
                          scoped_seed(config, rep, 80 + k))
                : uvbis_run(model, schedule, family, engine_settings(config),
                            scoped_seed(config, rep, 90 + k));
        // the recursion refreshed the class table after each boundary; replay
        // CA per boundary from the label history
        const auto& history = model.label_history();
        for (std::size_t n = 0; n < seq.records.size(); ++n) {
          const FitRecord& rec = seq.records[n];
          const double ca = classification_accuracy(history[n], truth);
          parts[rep].scores.append({rep, method, k, rec.boundary, "ca", ca,
                                    rec.cum_wall_seconds});
          parts[rep].timing.push_back({static_cast<double>(rep), static_cast<double>(k),
                                       static_cast<double>(rec.boundary), rec.wall_seconds,
                                       rec.cum_wall_seconds});
          parts[rep].posteriors += snapshot_line(rep, method, k, rec, family);
          if (config.traces) parts[rep].traces += trace_lines(rep, method, k, rec);
        }
      }
    });
    MethodArtifacts merged;
    for (auto& part : parts) {
      merged.scores.rows.insert(merged.scores.rows.end(), part.scores.rows.begin(),
                                part.scores.rows.end());
      merged.timing.insert(merged.timing.end(), part.timing.begin(), part.timing.end());
      merged.posteriors += part.posteriors;
      merged.traces += part.traces;
    }
    flush_artifacts(config, method, merged);
  }
}

// ---------------------------------------------------------------------------
// Schools experiment
// ---------------------------------------------------------------------------

void simulate_schools(const ExperimentConfig& config) {
  const SchoolsData data = canonical_schools();
  std::vector<std::vector<double>> rows;
  for (int j = 0; j < data.size(); ++j)
    rows.push_back({static_cast<double>(j), data.y[j], data.sigma[j]});
  write_csv(data_path(config, "schools.csv"), {"school", "y", "sigma"}, rows);
}

SchoolsData load_schools(const ExperimentConfig& config) {
  const CsvTable table = read_csv(data_path(config, "schools.csv"));
  SchoolsData data;
  data.y.resize(table.rows.size());
  data.sigma.resize(table.rows.size());
  const int c_y = table.column("y"), c_s = table.column("sigma");
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    data.y[i] = table.rows[i][c_y];
    data.sigma[i] = table.rows[i][c_s];
  }
  return data;
}

std::vector<int> schools_ordering(const ExperimentConfig& config, int rep, int n) {
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng rng(scoped_seed(config, rep, 3));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

void fit_schools(const ExperimentConfig& config) {
  const SchoolsData data = load_schools(config);
  if (std::count(config.methods.begin(), config.methods.end(), "mcmc")) {
    // one oracle for the full posterior; the data order is irrelevant
    std::vector<int> order(data.size());
    for (int i = 0; i < data.size(); ++i) order[i] = i;
    const TargetDensity target = schools_target(data, order, data.size());
    ChainConfig chain;
    chain.iterations = config.mcmc_iterations;
    chain.burn_in = config.mcmc_burn_in;
    chain.initial_scale = config.mcmc_scale;
    chain.seed = mix_seed(config.seed, 4);
    chain.init = Vec::Zero(data.size() + 2);
    chain.init[0] = data.y.mean();
    chain.init[1] = std::log(5.0);
    for (int j = 0; j < data.size(); ++j) chain.init[2 + j] = data.y[j];
    const ChainResult result = rwmh_sample(target, data.size() + 2, chain);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < result.draws.rows(); ++i) {
      std::vector<double> row(result.draws.cols());
      for (int c = 0; c < result.draws.cols(); ++c) row[c] = result.draws(i, c);
      rows.push_back(std::move(row));
    }
    std::vector<std::string> header = {"mu", "log_tau"};
    for (int j = 0; j < data.size(); ++j) header.push_back("theta" + std::to_string(j));
    write_csv(fits_path(config, "schools_oracle.csv"), header, rows);
  }
  if (std::count(config.methods.begin(), config.methods.end(), "svb")) {
    MethodArtifacts art;
    for (int rep = 0; rep < config.schools_orderings; ++rep) {
      const std::vector<int> order = schools_ordering(config, rep, data.size());
      const auto steps = schools_sequence(data, order, SchoolsMethod::Svb, config.draws,
                                          config.stop, config.adam,
                                          scoped_seed(config, rep, 5));
      json j;
      j["replication"] = rep;
      j["method"] = "svb";
      j["order"] = order;
      const Vec& lambda = steps.back().lambda;
      j["lambda"] = std::vector<double>(lambda.data(), lambda.data() + lambda.size());
      art.posteriors += j.dump() + "\n";
    }
    flush_artifacts(config, "svb", art);
  }
}

void update_schools(const ExperimentConfig& config) {
  const SchoolsData data = load_schools(config);
  const std::string oracle_path = fits_path(config, "schools_oracle.csv");
  if (!fs::exists(oracle_path))
    throw Error("schools oracle missing; run the fit stage first");
  const CsvTable oracle_csv = read_csv(oracle_path);
  Mat oracle(oracle_csv.rows.size(), oracle_csv.header.size());
  for (std::size_t i = 0; i < oracle_csv.rows.size(); ++i)
    for (std::size_t c = 0; c < oracle_csv.header.size(); ++c)
      oracle(i, c) = oracle_csv.rows[i][c];

  const int kl_samples = 4000;
  const Mat oracle_thinned = thin_rows(oracle, 6000);

  for (const std::string method : {std::string("uvb"), std::string("uvb-is")}) {
    if (!std::count(config.methods.begin(), config.methods.end(), method)) continue;
    std::vector<MethodArtifacts> parts(config.schools_orderings);
    parallel_for(config.schools_orderings, config.workers, [&](int rep) {
      const std::vector<int> order = schools_ordering(config, rep, data.size());
      const auto steps = schools_sequence(
          data, order, method == "uvb" ? SchoolsMethod::Uvb : SchoolsMethod::UvbIs,
          method == "uvb" ? config.draws : config.is_draws, config.stop, config.adam,
          scoped_seed(config, rep, method == "uvb" ? 6 : 7));
      const SchoolsStep& last = steps.back();

      Rng rng(scoped_seed(config, rep, 8));
      const DrawBatch batch = last.family.sample(last.lambda, kl_samples, rng);

      // sample columns follow (mu, log tau, theta_order[0], ...); realign the
      // school effects to their canonical indices for the margin comparison
      Mat aligned(kl_samples, last.family.dim());
      aligned.col(0) = batch.draws.col(0);
      aligned.col(1) = batch.draws.col(1);
      for (int pos = 0; pos < data.size(); ++pos)
        aligned.col(2 + order[pos]) = batch.draws.col(2 + pos);

      const double joint = knn_kl(aligned, oracle_thinned);
      parts[rep].scores.append({rep, method, 1, data.size(), "kl_joint", joint, 0.0});
      parts[rep].scores.append(
          {rep, method, 1, data.size(), "kl_mu", knn_kl(aligned.col(0), oracle_thinned.col(0)),
           0.0});
      parts[rep].scores.append({rep, method, 1, data.size(), "kl_log_tau",
                                knn_kl(aligned.col(1), oracle_thinned.col(1)), 0.0});
      for (int j = 0; j < data.size(); ++j)
        parts[rep].scores.append({rep, method, 1, data.size(),
                                  "kl_theta" + std::to_string(j),
                                  knn_kl(aligned.col(2 + j), oracle_thinned.col(2 + j)), 0.0});

      json snap;
      snap["replication"] = rep;
      snap["method"] = method;
      snap["order"] = order;
      snap["min_ess"] = last.min_ess;
      snap["lambda"] =
          std::vector<double>(last.lambda.data(), last.lambda.data() + last.lambda.size());
      parts[rep].posteriors += snap.dump() + "\n";
    });
    MethodArtifacts merged;
    for (auto& part : parts) {
      merged.scores.rows.insert(merged.scores.rows.end(), part.scores.rows.begin(),
                                part.scores.rows.end());
      merged.posteriors += part.posteriors;
    }
    flush_artifacts(config, method, merged);
  }
}

// ---------------------------------------------------------------------------
// DPM experiment
// ---------------------------------------------------------------------------

void simulate_dpm(const ExperimentConfig& config) {
  for (int rep = 0; rep < config.replications; ++rep) {
    Rng rng(scoped_seed(config, rep, 9));
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> uvar(1.0, 1.6);
    Mat panel(config.dpm_units, config.dpm_length);
    std::vector<std::vector<double>> labels;
    const double s0 = std::sqrt(uvar(rng)), s1 = std::sqrt(uvar(rng));
    for (int i = 0; i < config.dpm_units; ++i) {
      const int group = i % 2;
      const double mu = (group == 0 ? -0.5 : 0.5) * config.dpm_separation;
      const double sd = group == 0 ? s0 : s1;
      labels.push_back({static_cast<double>(i), static_cast<double>(group)});
      for (int t = 0; t < config.dpm_length; ++t) panel(i, t) = mu + sd * n01(rng);
    }
    write_deviation_panel_csv(data_path(config, "dpm_panel" + std::to_string(rep) + ".csv"),
                              panel);
    write_csv(data_path(config, "dpm_labels" + std::to_string(rep) + ".csv"), {"unit", "k"},
              labels);
  }
}

Mat load_dpm_panel(const ExperimentConfig& config, int rep) {
  if (!config.dpm_panel.empty()) return read_deviation_panel_csv(config.dpm_panel);
  return read_deviation_panel_csv(
      data_path(config, "dpm_panel" + std::to_string(rep) + ".csv"));
}

// mean over units of the summed h-step-ahead log scores at one boundary
double dpm_boundary_ls(const ExperimentConfig& config, const DpmModel& model,
                       const DpmJointDraws& draws, int boundary) {
  const int horizon = std::min(config.dpm_horizon, model.length() - boundary);
  double total = 0.0;
  for (int i = 0; i < model.units(); ++i)
    for (int h = 1; h <= horizon; ++h)
      total += dpm_predictive_logscore(model, draws, i, model.panel()(i, boundary + h - 1));
  return total / model.units();
}

void fit_dpm(const ExperimentConfig& config) {
  DpmSettings settings;
  settings.draws = config.draws;
  settings.stop = config.stop;
  settings.adam = config.adam;
  settings.keep_traces = false;

  for (int rep = 0; rep < config.replications; ++rep) {
    const Mat panel = load_dpm_panel(config, rep);
    DpmConfig dpm_config;
    dpm_config.alpha = config.dpm_alpha;
    dpm_config.marginal_draws = config.dpm_marginal_draws;
    DpmModel model(panel, dpm_config);

    if (std::count(config.methods.begin(), config.methods.end(), "svb")) {
      MethodArtifacts art;
      const DpmRunResult run = dpm_svb_run(model, config.schedule, settings,
                                           scoped_seed(config, rep, 11));
      for (const DpmFitRecord& rec : run.records) {
        Rng rng(scoped_seed(config, rep, 91000 + rec.state.boundary));
        const DpmJointDraws draws =
            dpm_joint_draws(model, run.family, rec.state, config.predictive_draws, rng);
        const double ls = dpm_boundary_ls(config, model, draws, rec.state.boundary);
        art.scores.append({rep, "svb", 0, rec.state.boundary, "ls", ls, rec.cum_wall_seconds});
        art.timing.push_back({static_cast<double>(rep), 0.0,
                              static_cast<double>(rec.state.boundary), rec.wall_seconds,
                              rec.cum_wall_seconds});
      }
      flush_artifacts(config, "svb", art);
    }
    if (std::count(config.methods.begin(), config.methods.end(), "mfvb")) {
      MethodArtifacts art;
      double cum = 0.0;
      for (int boundary : config.schedule) {
        const auto start = std::chrono::steady_clock::now();
        const MfvbFit fit = mfvb_fit(panel, boundary, MfvbHyper{}, 1e-3, 500,
                                     scoped_seed(config, rep, 12000 + boundary));
        cum += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        Rng rng(scoped_seed(config, rep, 92000 + boundary));
        const int horizon = std::min(config.dpm_horizon, model.length() - boundary);
        double total = 0.0;
        for (int i = 0; i < model.units(); ++i)
          for (int h = 1; h <= horizon; ++h)
            total += mfvb_predictive_logscore(fit.state, i, panel(i, boundary + h - 1),
                                              config.predictive_draws, rng);
        art.scores.append({rep, "mfvb", 0, boundary, "ls", total / model.units(), cum});
        art.timing.push_back({static_cast<double>(rep), 0.0, static_cast<double>(boundary), 0.0,
                              cum});
      }
      flush_artifacts(config, "mfvb", art);
    }
    if (std::count(config.methods.begin(), config.methods.end(), "indep")) {
      MethodArtifacts art;
      for (int boundary : config.schedule) {
        const int horizon = std::min(config.dpm_horizon, model.length() - boundary);
        double total = 0.0;
        for (int i = 0; i < model.units(); ++i) {
          std::vector<double> history(panel.row(i).data(), panel.row(i).data() + boundary);
          for (int h = 1; h <= horizon; ++h)
            total += independent_predictive_logdensity(history, panel(i, boundary + h - 1));
        }
        art.scores.append({rep, "indep", 0, boundary, "ls", total / model.units(), 0.0});
      }
      flush_artifacts(config, "indep", art);
    }
  }
}

void update_dpm(const ExperimentConfig& config) {
  if (!std::count(config.methods.begin(), config.methods.end(), "uvb")) return;
  DpmSettings settings;
  settings.draws = config.draws;
  settings.stop = config.stop;
  settings.adam = config.adam;

  for (int rep = 0; rep < config.replications; ++rep) {
    const Mat panel = load_dpm_panel(config, rep);
    DpmConfig dpm_config;
    dpm_config.alpha = config.dpm_alpha;
    dpm_config.marginal_draws = config.dpm_marginal_draws;
    DpmModel model(panel, dpm_config);

    MethodArtifacts art;
    const DpmRunResult run =
        dpm_uvb_run(model, config.schedule, settings, scoped_seed(config, rep, 13));
    for (const DpmFitRecord& rec : run.records) {
      Rng rng(scoped_seed(config, rep, 93000 + rec.state.boundary));
      const DpmJointDraws draws =
          dpm_joint_draws(model, run.family, rec.state, config.predictive_draws, rng);
      const double ls = dpm_boundary_ls(config, model, draws, rec.state.boundary);
      art.scores.append({rep, "uvb", 0, rec.state.boundary, "ls", ls, rec.cum_wall_seconds});
      art.timing.push_back({static_cast<double>(rep), 0.0,
                            static_cast<double>(rec.state.boundary), rec.wall_seconds,
                            rec.cum_wall_seconds});
      // cluster snapshot with occupancy weights and a table digest
      const Vec weights = cluster_weights(draws.indicators, model.units());
      json snap;
      snap["replication"] = rep;
      snap["method"] = "uvb";
      snap["boundary"] = rec.state.boundary;
      json clusters = json::array();
      for (int j = 0; j < model.units(); ++j) {
        const Vec mean = run.family.cluster_mean(rec.state.lambda, j);
        clusters.push_back({{"mu", mean[0]}, {"log_sigma2", mean[1]}, {"weight", weights[j]}});
      }
      snap["clusters"] = clusters;
      std::uint64_t digest = 1469598103934665603ull;  // FNV-1a over rounded table entries
      char buf[32];
      for (int i = 0; i < rec.state.indicator_table.rows(); ++i)
        for (int j = 0; j < rec.state.indicator_table.cols(); ++j) {
          std::snprintf(buf, sizeof(buf), "%.12g", rec.state.indicator_table(i, j));
          for (const char* p = buf; *p; ++p) digest = (digest ^ static_cast<unsigned char>(*p)) *
                                                      1099511628211ull;
        }
      std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest));
      snap["indicator_table_digest"] = std::string(buf);
      art.posteriors += snap.dump() + "\n";
    }
    flush_artifacts(config, "uvb", art);
  }
}

// ---------------------------------------------------------------------------
// Lanes experiment
// ---------------------------------------------------------------------------

void simulate_lanes(const ExperimentConfig& config) {
  // synthetic curved lane: vehicles follow the centre with individual offsets
  Rng rng(mix_seed(config.seed, 14));
  std::normal_distribution<double> n01;
  std::vector<std::vector<double>> rows;
  for (int v = 0; v < config.lanes_vehicles; ++v) {
    const double offset = 0.4 * n01(rng);
    const double wobble = 0.05 + 0.05 * std::abs(n01(rng));
    for (int t = 0; t < config.lanes_points; ++t) {
      const double s = 0.5 * t;
      const double cx = s;
      const double cy = 12.0 * std::sin(s / 40.0);
      // unit normal of the centre curve
      const double dx = 1.0, dy = 12.0 / 40.0 * std::cos(s / 40.0);
      const double norm = std::hypot(dx, dy);
      const double off = offset + wobble * n01(rng);
      rows.push_back({static_cast<double>(v), static_cast<double>(t),
                      cx - dy / norm * off, cy + dx / norm * off, 1.0});
    }
  }
  write_csv(data_path(config, "lanes_trajectories.csv"),
            {"vehicle_id", "frame", "x", "y", "lane"}, rows);
}

}  // namespace

void run_lanes_prep(const ExperimentConfig& config) {
  ensure_dirs(config);
  const std::string input = config.lanes_input.empty()
                                ? data_path(config, "lanes_trajectories.csv")
                                : config.lanes_input;
  const auto trajectories = load_trajectories_csv(input);
  if (trajectories.empty()) throw Error("no trajectories in " + input);

  // group by lane, fit one centre line per lane from up to 100 vehicles,
  // then transform every trajectory against its lane's centre
  std::map<int, std::vector<Trajectory>> lanes;
  for (const Trajectory& t : trajectories) lanes[t.lane_id].push_back(t);

  int max_len = 0;
  for (const Trajectory& t : trajectories) max_len = std::max(max_len, t.size());
  Mat panel(static_cast<int>(trajectories.size()), max_len);
  panel.setZero();

  int unit = 0;
  std::vector<std::vector<double>> centre_rows;
  for (auto& [lane_id, members] : lanes) {
    std::vector<Trajectory> sample(members.begin(),
                                   members.begin() + std::min<std::size_t>(members.size(), 100));
    const CentreLine centre = fit_centre_line(sample, config.lanes_smoothing);
    centre_rows.push_back({static_cast<double>(lane_id), centre.d_max,
                           centre.fx.gcv_lambda(), centre.fy.gcv_lambda()});
    for (const Trajectory& t : members) {
      for (int i = 0; i < t.size(); ++i) {
        const LateralDeviation dev = lateral_deviation(t.x[i], t.y[i], centre);
        panel(unit, i) = dev.y_star;
      }
      for (int i = t.size(); i < max_len; ++i) panel(unit, i) = panel(unit, t.size() - 1);
      ++unit;
    }
  }
  write_deviation_panel_csv((fs::path(config.out_dir) / config.lanes_output).string(), panel);
  write_csv(fits_path(config, "lane_centres.csv"),
            {"lane", "d_max", "lambda_x", "lambda_y"}, centre_rows);
}

// ---------------------------------------------------------------------------
// Stage dispatch
// ---------------------------------------------------------------------------

void run_simulate(const ExperimentConfig& config) {
  ensure_dirs(config);
  write_metadata(config);
  if (config.name == "ar3") simulate_ar3(config);
  else if (config.name == "mixture") simulate_mixture(config);
  else if (config.name == "schools") simulate_schools(config);
  else if (config.name == "dpm") simulate_dpm(config);
  else if (config.name == "lanes-prep") simulate_lanes(config);
}

void run_fit(const ExperimentConfig& config) {
  ensure_dirs(config);
  write_metadata(config);
  if (config.name == "ar3") fit_ar3(config);
  else if (config.name == "mixture") fit_mixture(config);
  else if (config.name == "schools") fit_schools(config);
  else if (config.name == "dpm") fit_dpm(config);
}

void run_update(const ExperimentConfig& config) {
  ensure_dirs(config);
  write_metadata(config);
  if (config.name == "ar3") update_ar3(config);
  else if (config.name == "mixture") update_mixture(config);
  else if (config.name == "schools") update_schools(config);
  else if (config.name == "dpm") update_dpm(config);
}

// ---------------------------------------------------------------------------
// Evaluate
// ---------------------------------------------------------------------------

void run_evaluate(const ExperimentConfig& config) {
  ensure_dirs(config);
  // gather the per-method artifacts
  std::vector<std::string> methods = config.methods;
  std::vector<ScoreRow> rows;
  std::string timing = "method,replication,K,boundary,wall_seconds,cum_wall_seconds\n";

  for (const std::string& method : methods) {
    const std::string spath = fits_path(config, "scores_" + method + ".csv");
    if (fs::exists(spath)) {
      std::ifstream in(spath);
      std::string line;
      std::getline(in, line);  // header
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string cell;
        ScoreRow row;
        std::getline(ls, cell, ',');
        row.replication = std::stoi(cell);
        std::getline(ls, row.method, ',');
        std::getline(ls, cell, ',');
        row.components = std::stoi(cell);
        std::getline(ls, cell, ',');
        row.boundary = std::stoi(cell);
        std::getline(ls, row.metric, ',');
        std::getline(ls, cell, ',');
        row.value = std::stod(cell);
        rows.push_back(std::move(row));
      }
    }
    const std::string tpath = fits_path(config, "timing_" + method + ".csv");
    if (fs::exists(tpath)) {
      const CsvTable t = read_csv(tpath);
      char buf[200];
      for (const auto& r : t.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%d,%d,%.17g,%.17g\n", method.c_str(),
                      static_cast<int>(r[0]), static_cast<int>(r[1]), static_cast<int>(r[2]),
                      r[3], r[4]);
        timing += buf;
      }
    }
  }

  // per-replication cumulative log scores
  std::map<std::tuple<std::string, int, int>, std::vector<std::pair<int, double>>> ls_series;
  for (const ScoreRow& row : rows)
    if (row.metric == "ls")
      ls_series[{row.method, row.components, row.replication}].push_back(
          {row.boundary, row.value});
  std::vector<ScoreRow> extra;
  for (auto& [key, series] : ls_series) {
    std::sort(series.begin(), series.end());
    std::vector<double> values;
    for (auto& [b, v] : series) values.push_back(v);
    const CumulativeScores cum = cumulative_log_score(values);
    for (std::size_t i = 0; i < series.size(); ++i)
      extra.push_back({std::get<2>(key), std::get<0>(key), std::get<1>(key), series[i].first,
                       "cls", cum.values[i], 0.0});
  }
  rows.insert(rows.end(), extra.begin(), extra.end());

  // aggregates over replications (replication index -1)
  std::map<std::tuple<std::string, int, int, std::string>, std::pair<double, int>> acc;
  for (const ScoreRow& row : rows) {
    if (row.replication < 0) continue;
    auto& slot = acc[{row.method, row.components, row.boundary, row.metric}];
    slot.first += row.value;
    slot.second += 1;
  }
  for (const auto& [key, sum_count] : acc) {
    const std::string aggregate_name =
        std::get<3>(key) == "ls" ? "mls"
        : std::get<3>(key) == "cls" ? "mcls"
        : std::get<3>(key) == "ca" ? "mca"
                                   : "mean_" + std::get<3>(key);
    rows.push_back({-1, std::get<0>(key), std::get<1>(key), std::get<2>(key), aggregate_name,
                    sum_count.first / sum_count.second, 0.0});
  }

  // deterministic ordering
  std::sort(rows.begin(), rows.end(), [](const ScoreRow& a, const ScoreRow& b) {
    return std::tie(a.method, a.components, a.metric, a.replication, a.boundary) <
           std::tie(b.method, b.components, b.metric, b.replication, b.boundary);
  });

  ScoreTable table;
  table.rows = rows;
  write_text_file((fs::path(config.out_dir) / "scores.csv").string(), table.to_csv(false));
  write_text_file((fs::path(config.out_dir) / "timing.csv").string(), timing);

  // human summary of the final-boundary aggregates
  std::string summary = "# Experiment summary: " + config.name + "\n\n";
  summary += "| method | K | metric | final boundary | value |\n";
  summary += "|---|---|---|---|---|\n";
  std::map<std::tuple<std::string, int, std::string>, std::pair<int, double>> finals;
  for (const ScoreRow& row : rows)
    if (row.replication == -1) {
      auto& slot = finals[{row.method, row.components, row.metric}];
      if (row.boundary >= slot.first) slot = {row.boundary, row.value};
    }
  char line[160];
  for (const auto& [key, val] : finals) {
    std::snprintf(line, sizeof(line), "| %s | %d | %s | %d | %.4f |\n",
                  std::get<0>(key).c_str(), std::get<1>(key), std::get<2>(key).c_str(),
                  val.first, val.second);
    summary += line;
  }
  write_text_file((fs::path(config.out_dir) / "summary.md").string(), summary);
}

void run_all(const ExperimentConfig& config) {
  run_simulate(config);
  if (config.name == "lanes-prep") {
    run_lanes_prep(config);
    return;
  }
  run_fit(config);
  run_update(config);
  run_evaluate(config);
}

}  // namespace svb
