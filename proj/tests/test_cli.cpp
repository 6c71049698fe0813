#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "pawflow/io.hpp"
#include "pawflow/rng.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* p = std::getenv("PAWFLOW_CLI");
  REQUIRE_MESSAGE(p != nullptr, "PAWFLOW_CLI must point at the built binary");
  return p;
}

int run(const std::string& args) {
  const std::string cmd = cli_path() + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("pawflow_cli_" + std::to_string(pawflow::split_seed(
                                 static_cast<uint64_t>(
                                     std::chrono::steady_clock::now().time_since_epoch().count()),
                                 "cli")));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("cli: full pipeline through the binary with documented exit codes") {
  TempDir tmp;
  const fs::path cfg = tmp.path / "cell.cfg";
  std::ofstream(cfg) << "task = box\n"
                     << "method = pawsterior\n"
                     << "seed = 7\n"
                     << "box.dim = 2\n"
                     << "net.hidden = 16\n"
                     << "net.blocks = 1\n"
                     << "train.n_sims = 300\n"
                     << "train.batch_size = 128\n"
                     << "train.epochs = 2\n"
                     << "eval.n_posterior_samples = 200\n"
                     << "eval.epochs = 4\n";

  const std::string run_dir = (tmp.path / "run").string();
  const std::string cfg_s = cfg.string();

  CHECK(run("simulate --config " + cfg_s + " --out " + run_dir + "/train.pawd") == 0);
  CHECK(run("simulate --config " + cfg_s + " --out " + run_dir +
            "/obs.pawd --n 3 --seed 99") == 0);
  CHECK(run("train --config " + cfg_s + " --dataset " + run_dir +
            "/train.pawd --out " + run_dir) == 0);
  CHECK(run("sample --checkpoint " + run_dir + "/checkpoint_pawsterior.pawf --obs " +
            run_dir + "/obs.pawd --index 0 --n 200 --steps 50 --out " + run_dir +
            "/gen.f32") == 0);
  CHECK(run("reference --config " + cfg_s + " --obs " + run_dir +
            "/obs.pawd --index 0 --n 200 --out " + run_dir + "/ref.f32") == 0);
  CHECK(run("evaluate --config " + cfg_s + " --ref " + run_dir + "/ref.f32 --gen " +
            run_dir + "/gen.f32 --out " + run_dir + "/cell.report.json") == 0);
  CHECK(run("report --run-dir " + run_dir + " --out " + run_dir + "/summary.csv") == 0);

  CHECK(fs::exists(run_dir + "/summary.csv"));
  CHECK(fs::exists(run_dir + "/manifest.json"));

  // config errors exit 2
  const fs::path bad = tmp.path / "bad.cfg";
  std::ofstream(bad) << "task = box\nmethod = fmpe\nwhat = 1\n";
  CHECK(run("simulate --config " + bad.string() + " --out " + run_dir + "/x.pawd") == 2);

  // missing input files exit 4
  CHECK(run("evaluate --config " + cfg_s + " --ref " + run_dir +
            "/missing.f32 --gen " + run_dir + "/gen.f32 --out " + run_dir +
            "/r.json") == 4);
  CHECK(run("train --config " + cfg_s + " --dataset " + run_dir +
            "/missing.pawd --out " + run_dir) == 4);

  // numeric failures exit 3: a rejection oracle with hopeless acceptance
  const fs::path hopeless = tmp.path / "hopeless.cfg";
  std::ofstream(hopeless) << "task = box\nmethod = pawsterior\nseed = 7\n"
                          << "box.dim = 2\nbox.noise_sigma = 100\n";
  CHECK(run("reference --config " + hopeless.string() + " --obs " + run_dir +
            "/obs.pawd --index 0 --n 100 --out " + run_dir + "/hopeless.f32") == 3);

  // fmpe and pawsterior leave distinct method tags in the manifest
  const fs::path cfg2 = tmp.path / "cell_fmpe.cfg";
  {
    std::ifstream in(cfg);
    std::ofstream out(cfg2);
    std::string line;
    while (std::getline(in, line))
      out << (line == "method = pawsterior" ? "method = fmpe" : line) << "\n";
  }
  CHECK(run("train --config " + cfg2.string() + " --dataset " + run_dir +
            "/train.pawd --out " + run_dir) == 0);
  std::ifstream mf(run_dir + "/manifest.json");
  std::string manifest((std::istreambuf_iterator<char>(mf)),
                       std::istreambuf_iterator<char>());
  CHECK(manifest.find("train_pawsterior") != std::string::npos);
  CHECK(manifest.find("train_fmpe") != std::string::npos);
  CHECK(fs::exists(run_dir + "/checkpoint_fmpe.pawf"));
}
