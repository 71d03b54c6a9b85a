#pragma once

#include <string>
#include <vector>

#include "svb/engines.hpp"
#include "svb/eval.hpp"

namespace svb {

/// Experiment description parsed from the sectioned key-value config text.
/// Every field has the study defaults pre-filled, so a bare config with just
/// the experiment name reproduces the desk-scale runs.
struct ExperimentConfig {
  std::string name;  // ar3 | mixture | schools | dpm | lanes-prep
  std::vector<std::string> methods;
  std::vector<int> components = {1};
  int replications = 1;
  std::uint64_t seed = 1;
  std::string out_dir = "runs/out";
  int workers = 1;
  bool traces = false;

  // gradient/optimizer settings
  int draws = 25;
  int is_draws = 100;
  StopRule stop{};
  AdamState adam{};
  double ess_warn_fraction = 0.1;

  // schedules and model sizes
  std::vector<int> schedule;
  int ar3_length = 500;
  int mix_units = 100;
  int mix_length = 100;
  double mix_alpha = 1.0;
  double mix_beta = 1.0;
  int prob_draws = 100;
  int dpm_units = 50;
  int dpm_length = 125;
  int dpm_horizon = 25;
  double dpm_separation = 1.4;
  double dpm_alpha = 1.0;
  int dpm_marginal_draws = 100;
  std::string dpm_panel;  // optional external deviation panel
  int schools_orderings = 20;

  int predictive_draws = 500;

  int mcmc_iterations = 15000;
  int mcmc_burn_in = 10000;
  double mcmc_scale = 0.5;

  std::string lanes_input;
  std::string lanes_output = "deviations.csv";
  double lanes_smoothing = -1.0;
  int lanes_vehicles = 12;
  int lanes_points = 200;

  void validate() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Stage entry points; artifacts land under config.out_dir.
void run_simulate(const ExperimentConfig& config);
void run_fit(const ExperimentConfig& config);
void run_update(const ExperimentConfig& config);
void run_evaluate(const ExperimentConfig& config);
void run_lanes_prep(const ExperimentConfig& config);

/// simulate + fit + update + evaluate.
void run_all(const ExperimentConfig& config);

}  // namespace svb
