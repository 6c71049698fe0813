#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "pawflow/config.hpp"
#include "pawflow/eval.hpp"
#include "pawflow/io.hpp"

namespace pawflow {

// Stage functions behind the CLI subcommands. Each writes its artifacts,
// records them in the output directory's manifest, and returns what the next
// stage needs. Stage seeds derive from the config's master seed unless an
// explicit override is given.

std::filesystem::path stage_simulate(const ExperimentConfig& config,
                                     const std::filesystem::path& out_file, int n,
                                     std::optional<uint64_t> seed_override);

struct TrainArtifacts {
  std::filesystem::path checkpoint;
  std::filesystem::path curve_csv;
  double best_val_loss = 0.0;
};

TrainArtifacts stage_train(const ExperimentConfig& config,
                           const std::filesystem::path& dataset_file,
                           const std::filesystem::path& out_dir);

std::filesystem::path stage_sample(const std::filesystem::path& checkpoint,
                                   const std::filesystem::path& obs_dataset, int index,
                                   int n, int n_steps, std::optional<uint64_t> seed,
                                   const std::filesystem::path& out_file);

std::filesystem::path stage_reference(const ExperimentConfig& config,
                                      const std::filesystem::path& obs_dataset,
                                      int index, int n, std::optional<uint64_t> seed,
                                      const std::filesystem::path& out_file);

struct EvaluateArtifacts {
  std::filesystem::path report_json;
  double score = 0.0;
};

EvaluateArtifacts stage_evaluate(const ExperimentConfig& config,
                                 const std::filesystem::path& ref_file,
                                 const std::filesystem::path& gen_file,
                                 const std::filesystem::path& out_file);

// Aggregates every *.report.json under run_dir into one CSV
// (task, method, n_sims, depth, hidden, score). Returns the row count.
int stage_report(const std::filesystem::path& run_dir,
                 const std::filesystem::path& out_csv);

}  // namespace pawflow
