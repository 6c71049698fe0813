#include "pawflow/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>

#include <json.hpp>

#include "pawflow/rng.hpp"

namespace pawflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path manifest_dir(const fs::path& out) {
  return out.has_parent_path() ? out.parent_path() : fs::path(".");
}

}  // namespace

fs::path stage_simulate(const ExperimentConfig& config, const fs::path& out_file,
                        int n, std::optional<uint64_t> seed_override) {
  const Task task = config.make_task();
  const uint64_t seed =
      seed_override ? *seed_override : split_seed(config.seed, "simulate");
  const Dataset data = simulate_dataset(task, n, seed);
  write_dataset(out_file, data, config_canonical(config));
  manifest_record(manifest_dir(out_file), "simulate", config_hash(config), {out_file});
  return out_file;
}

TrainArtifacts stage_train(const ExperimentConfig& config, const fs::path& dataset_file,
                           const fs::path& out_dir) {
  const Task task = config.make_task();
  const Dataset data = read_dataset(dataset_file);
  if (data.task != task.name())
    throw config_error("train: dataset task '" + data.task +
                       "' does not match config task '" + task.name() + "'");
  require_shape(data.theta.rows() == task.theta_dim() && data.x.rows() == task.x_dim(),
                "train: dataset dims do not match task");

  const Model init = make_model(config.parsed_method(), task.theta_dim(), task.x_dim(),
                                task.support(), config.net_hidden, config.net_blocks,
                                config.parsed_activation(), split_seed(config.seed, "model"));
  const TrainResult result = train(init, data, config.make_train_config());

  TrainArtifacts art;
  art.checkpoint = out_dir / (std::string("checkpoint_") + config.method + ".pawf");
  art.curve_csv = out_dir / (std::string("curve_") + config.method + ".csv");
  art.best_val_loss = result.best_val_loss;
  fs::create_directories(out_dir);
  save_checkpoint(art.checkpoint, result.model);
  write_curve_csv(art.curve_csv, result.curve);
  manifest_record(out_dir, std::string("train_") + config.method, config_hash(config),
                  {art.checkpoint, art.curve_csv});
  return art;
}

fs::path stage_sample(const fs::path& checkpoint, const fs::path& obs_dataset,
                      int index, int n, int n_steps, std::optional<uint64_t> seed,
                      const fs::path& out_file) {
  const Model model = load_checkpoint(checkpoint);
  const Dataset obs = read_dataset(obs_dataset);
  if (index < 0 || index >= obs.count())
    throw config_error("sample: observation index out of range");
  require_shape(obs.x.rows() == model.x_dim,
                "sample: observation dim does not match checkpoint");
  const uint64_t s = seed.value_or(split_seed(obs.seed, "sample", static_cast<uint64_t>(index)));
  const Mat samples = euler_sample(model, obs.x.col(index), n, n_steps, s);
  SampleMeta meta;
  meta.count = n;
  meta.dim = model.theta_dim;
  meta.seed = s;
  meta.n_steps = n_steps;
  meta.model_hash = content_hash(checkpoint);
  write_samples(out_file, samples, meta);
  manifest_record(manifest_dir(out_file), "sample", meta.model_hash,
                  {out_file, fs::path(out_file.string() + ".json")});
  return out_file;
}

fs::path stage_reference(const ExperimentConfig& config, const fs::path& obs_dataset,
                         int index, int n, std::optional<uint64_t> seed,
                         const fs::path& out_file) {
  const Task task = config.make_task();
  const Dataset obs = read_dataset(obs_dataset);
  if (index < 0 || index >= obs.count())
    throw config_error("reference: observation index out of range");
  require_shape(obs.x.rows() == task.x_dim(),
                "reference: observation dim does not match task");
  const uint64_t s =
      seed.value_or(split_seed(config.seed, "reference", static_cast<uint64_t>(index)));
  RngStream rng(s);
  const Mat samples = task.reference(obs.x.col(index), n, rng);
  SampleMeta meta;
  meta.count = n;
  meta.dim = task.theta_dim();
  meta.seed = s;
  meta.n_steps = 0;
  meta.model_hash = "oracle";
  write_samples(out_file, samples, meta);
  manifest_record(manifest_dir(out_file), "reference", config_hash(config),
                  {out_file, fs::path(out_file.string() + ".json")});
  return out_file;
}

EvaluateArtifacts stage_evaluate(const ExperimentConfig& config, const fs::path& ref_file,
                                 const fs::path& gen_file, const fs::path& out_file) {
  if (!fs::exists(ref_file))
    throw io_error("evaluate: reference file not found: " + ref_file.string());
  if (!fs::exists(gen_file))
    throw io_error("evaluate: generated file not found: " + gen_file.string());
  SampleMeta ref_meta, gen_meta;
  const Mat ref = read_samples(ref_file, &ref_meta);
  const Mat gen = read_samples(gen_file, &gen_meta);
  require_shape(ref.rows() == gen.rows(), "evaluate: sample dims differ");

  const C2STReport report = c2st(ref, gen, config.make_c2st_config());

  json out;
  out["task"] = config.task;
  out["method"] = config.method;
  out["n_sims"] = config.n_sims;
  out["depth"] = config.net_blocks;
  out["hidden"] = config.net_hidden;
  out["score"] = report.score;
  out["per_fold"] = report.per_fold;
  out["n_ref"] = report.n_ref;
  out["n_gen"] = report.n_gen;
  out["seed"] = report.seed;
  out["model_hash"] = gen_meta.model_hash;
  if (out_file.has_parent_path()) fs::create_directories(out_file.parent_path());
  std::ofstream os(out_file, std::ios::trunc);
  if (!os) throw io_error("cannot write report: " + out_file.string());
  os << out.dump(2) << "\n";
  os.close();
  manifest_record(manifest_dir(out_file), "evaluate", config_hash(config), {out_file});

  return EvaluateArtifacts{out_file, report.score};
}

int stage_report(const fs::path& run_dir, const fs::path& out_csv) {
  if (!fs::exists(run_dir))
    throw io_error("report: run directory not found: " + run_dir.string());
  std::vector<fs::path> reports;
  for (const auto& entry : fs::recursive_directory_iterator(run_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > 12 && name.substr(name.size() - 12) == ".report.json")
      reports.push_back(entry.path());
  }
  std::sort(reports.begin(), reports.end());

  if (out_csv.has_parent_path()) fs::create_directories(out_csv.parent_path());
  std::ofstream os(out_csv, std::ios::trunc);
  if (!os) throw io_error("cannot write report CSV: " + out_csv.string());
  os << "task,method,n_sims,depth,hidden,score\n" << std::setprecision(17);
  int rows = 0;
  for (const auto& p : reports) {
    std::ifstream is(p);
    json r;
    is >> r;
    os << r.at("task").get<std::string>() << "," << r.at("method").get<std::string>()
       << "," << r.at("n_sims").get<long>() << "," << r.at("depth").get<int>() << ","
       << r.at("hidden").get<int>() << "," << r.at("score").get<double>() << "\n";
    ++rows;
  }
  os.close();
  manifest_record(manifest_dir(out_csv), "report", "", {out_csv});
  return rows;
}

}  // namespace pawflow
