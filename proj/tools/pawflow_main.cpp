// Command-line pipeline: simulate -> train -> sample / reference -> evaluate
// -> report. Exit codes: 0 success, 2 config error, 3 numeric failure,
// 4 I/O error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pawflow/pipeline.hpp"

namespace {

std::optional<uint64_t> opt_seed(bool set, uint64_t value) {
  return set ? std::optional<uint64_t>(value) : std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pawflow: simulation-based inference with endpoint flows"};
  app.require_subcommand(1);

  std::string config_path, out_path, dataset_path, checkpoint_path;
  std::string obs_path, ref_path, gen_path, run_dir;
  uint64_t seed = 0;
  bool seed_set = false;
  int n = 0, steps = 100, index = 0;

  auto* sim = app.add_subcommand("simulate", "draw (theta, x) pairs into a dataset file");
  sim->add_option("--config", config_path)->required();
  sim->add_option("--out", out_path)->required();
  sim->add_option("--n", n, "pair count (default: train.n_sims)");
  sim->add_option("--seed", seed)->each([&](const std::string&) { seed_set = true; });

  auto* train = app.add_subcommand("train", "fit a model, write checkpoint and loss curve");
  train->add_option("--config", config_path)->required();
  train->add_option("--dataset", dataset_path)->required();
  train->add_option("--out", out_path, "output directory")->required();

  auto* sample = app.add_subcommand("sample", "draw posterior samples from a checkpoint");
  sample->add_option("--checkpoint", checkpoint_path)->required();
  sample->add_option("--obs", obs_path, "dataset file providing observations")->required();
  sample->add_option("--index", index, "observation column index");
  sample->add_option("--n", n)->required();
  sample->add_option("--steps", steps, "Euler steps (default 100)");
  sample->add_option("--seed", seed)->each([&](const std::string&) { seed_set = true; });
  sample->add_option("--out", out_path)->required();

  auto* reference = app.add_subcommand("reference", "exact posterior samples from the task oracle");
  reference->add_option("--config", config_path)->required();
  reference->add_option("--obs", obs_path)->required();
  reference->add_option("--index", index);
  reference->add_option("--n", n)->required();
  reference->add_option("--seed", seed)->each([&](const std::string&) { seed_set = true; });
  reference->add_option("--out", out_path)->required();

  auto* evaluate = app.add_subcommand("evaluate", "C2ST between reference and generated samples");
  evaluate->add_option("--config", config_path)->required();
  evaluate->add_option("--ref", ref_path)->required();
  evaluate->add_option("--gen", gen_path)->required();
  evaluate->add_option("--out", out_path)->required();

  auto* report = app.add_subcommand("report", "aggregate *.report.json into a CSV");
  report->add_option("--run-dir", run_dir)->required();
  report->add_option("--out", out_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      const auto config = pawflow::load_config(config_path);
      const int count = n > 0 ? n : config.n_sims;
      const auto file =
          pawflow::stage_simulate(config, out_path, count, opt_seed(seed_set, seed));
      std::cout << "dataset: " << file.string() << "\n";
    } else if (train->parsed()) {
      const auto config = pawflow::load_config(config_path);
      const auto art = pawflow::stage_train(config, dataset_path, out_path);
      std::cout << "checkpoint: " << art.checkpoint.string()
                << "\nbest_val_loss: " << art.best_val_loss << "\n";
    } else if (sample->parsed()) {
      const auto file = pawflow::stage_sample(checkpoint_path, obs_path, index, n,
                                              steps, opt_seed(seed_set, seed), out_path);
      std::cout << "samples: " << file.string() << "\n";
    } else if (reference->parsed()) {
      const auto config = pawflow::load_config(config_path);
      const auto file = pawflow::stage_reference(config, obs_path, index, n,
                                                 opt_seed(seed_set, seed), out_path);
      std::cout << "reference: " << file.string() << "\n";
    } else if (evaluate->parsed()) {
      const auto config = pawflow::load_config(config_path);
      const auto art = pawflow::stage_evaluate(config, ref_path, gen_path, out_path);
      std::cout << "c2st: " << art.score << "\nreport: " << art.report_json.string()
                << "\n";
    } else if (report->parsed()) {
      const int rows = pawflow::stage_report(run_dir, out_path);
      std::cout << "rows: " << rows << "\ncsv: " << out_path << "\n";
    }
  } catch (const pawflow::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const pawflow::shape_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const pawflow::numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const pawflow::io_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
