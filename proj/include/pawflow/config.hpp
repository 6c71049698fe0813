#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "pawflow/common.hpp"
#include "pawflow/eval.hpp"
#include "pawflow/flowmatch.hpp"
#include "pawflow/tasks.hpp"

namespace pawflow {

// One experiment cell, parsed from a flat-key plain-text config
// (`key = value` lines, `#` comments). Every key is schema-checked; unknown
// keys or ill-typed values are rejected with a line/field diagnostic.
struct ExperimentConfig {
  std::string task;    // "box" | "sgm"
  std::string method;  // "pawsterior" | "fmpe"
  uint64_t seed = 0;

  // box task
  int box_dim = 2;
  double box_noise_sigma = 0.25;

  // sgm task; param_seed 0 derives from the master seed
  int sgm_regimes = 3;
  int sgm_transitions = 4;
  int sgm_state_dim = 2;
  uint64_t sgm_param_seed = 0;

  // network
  int net_hidden = 64;
  int net_blocks = 4;
  std::string net_activation = "gelu";

  // training
  int n_sims = 10000;
  int batch_size = 1024;
  double lr = 1e-3;
  int epochs = 200;
  double val_fraction = 0.05;
  double time_alpha = 0.0;
  double grad_clip = 1.0;

  // sampling
  int sample_steps = 100;

  // evaluation
  int eval_n_observations = 10;
  int eval_n_posterior_samples = 2000;
  int eval_folds = 5;
  int eval_epochs = 24;
  double eval_lr = 1e-3;

  Task make_task() const;
  TrainConfig make_train_config() const;
  C2STConfig make_c2st_config() const;
  Method parsed_method() const { return method_from_name(method); }
  Activation parsed_activation() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Canonical serialization of the parsed config (sorted keys); hashed into
// the run manifest.
std::string config_canonical(const ExperimentConfig& config);
std::string config_hash(const ExperimentConfig& config);

}  // namespace pawflow
