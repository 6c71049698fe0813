#include "pawflow/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "pawflow/rng.hpp"

namespace pawflow {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

long parse_int(const std::string& v, int line) {
  try {
    size_t pos = 0;
    const long out = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw config_error("line " + std::to_string(line) + ": expected integer, got '" +
                       v + "'");
  }
}

uint64_t parse_u64(const std::string& v, int line) {
  try {
    size_t pos = 0;
    const unsigned long long out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw config_error("line " + std::to_string(line) + ": expected unsigned integer, got '" +
                       v + "'");
  }
}

double parse_real(const std::string& v, int line) {
  try {
    size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw config_error("line " + std::to_string(line) + ": expected real, got '" + v +
                       "'");
  }
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, int line)>;

const std::map<std::string, Setter>& schema() {
  static const std::map<std::string, Setter> s = {
      {"task",
       [](ExperimentConfig& c, const std::string& v, int line) {
         if (v != "box" && v != "sgm")
           throw config_error("line " + std::to_string(line) +
                              ": task must be 'box' or 'sgm'");
         c.task = v;
       }},
      {"method",
       [](ExperimentConfig& c, const std::string& v, int line) {
         if (v != "pawsterior" && v != "fmpe")
           throw config_error("line " + std::to_string(line) +
                              ": method must be 'pawsterior' or 'fmpe'");
         c.method = v;
       }},
      {"seed", [](ExperimentConfig& c, const std::string& v, int l) { c.seed = parse_u64(v, l); }},
      {"box.dim",
       [](ExperimentConfig& c, const std::string& v, int l) { c.box_dim = static_cast<int>(parse_int(v, l)); }},
      {"box.noise_sigma",
       [](ExperimentConfig& c, const std::string& v, int l) { c.box_noise_sigma = parse_real(v, l); }},
      {"sgm.regimes",
       [](ExperimentConfig& c, const std::string& v, int l) { c.sgm_regimes = static_cast<int>(parse_int(v, l)); }},
      {"sgm.transitions",
       [](ExperimentConfig& c, const std::string& v, int l) { c.sgm_transitions = static_cast<int>(parse_int(v, l)); }},
      {"sgm.state_dim",
       [](ExperimentConfig& c, const std::string& v, int l) { c.sgm_state_dim = static_cast<int>(parse_int(v, l)); }},
      {"sgm.param_seed",
       [](ExperimentConfig& c, const std::string& v, int l) { c.sgm_param_seed = parse_u64(v, l); }},
      {"net.hidden",
       [](ExperimentConfig& c, const std::string& v, int l) { c.net_hidden = static_cast<int>(parse_int(v, l)); }},
      {"net.blocks",
       [](ExperimentConfig& c, const std::string& v, int l) { c.net_blocks = static_cast<int>(parse_int(v, l)); }},
      {"net.activation",
       [](ExperimentConfig& c, const std::string& v, int line) {
         if (v != "gelu" && v != "relu")
           throw config_error("line " + std::to_string(line) +
                              ": net.activation must be 'gelu' or 'relu'");
         c.net_activation = v;
       }},
      {"train.n_sims",
       [](ExperimentConfig& c, const std::string& v, int l) { c.n_sims = static_cast<int>(parse_int(v, l)); }},
      {"train.batch_size",
       [](ExperimentConfig& c, const std::string& v, int l) { c.batch_size = static_cast<int>(parse_int(v, l)); }},
      {"train.lr",
       [](ExperimentConfig& c, const std::string& v, int l) { c.lr = parse_real(v, l); }},
      {"train.epochs",
       [](ExperimentConfig& c, const std::string& v, int l) { c.epochs = static_cast<int>(parse_int(v, l)); }},
      {"train.val_fraction",
       [](ExperimentConfig& c, const std::string& v, int l) { c.val_fraction = parse_real(v, l); }},
      {"train.time_alpha",
       [](ExperimentConfig& c, const std::string& v, int l) { c.time_alpha = parse_real(v, l); }},
      {"train.grad_clip",
       [](ExperimentConfig& c, const std::string& v, int l) { c.grad_clip = parse_real(v, l); }},
      {"sample.steps",
       [](ExperimentConfig& c, const std::string& v, int l) { c.sample_steps = static_cast<int>(parse_int(v, l)); }},
      {"eval.n_observations",
       [](ExperimentConfig& c, const std::string& v, int l) { c.eval_n_observations = static_cast<int>(parse_int(v, l)); }},
      {"eval.n_posterior_samples",
       [](ExperimentConfig& c, const std::string& v, int l) { c.eval_n_posterior_samples = static_cast<int>(parse_int(v, l)); }},
      {"eval.folds",
       [](ExperimentConfig& c, const std::string& v, int l) { c.eval_folds = static_cast<int>(parse_int(v, l)); }},
      {"eval.epochs",
       [](ExperimentConfig& c, const std::string& v, int l) { c.eval_epochs = static_cast<int>(parse_int(v, l)); }},
      {"eval.lr",
       [](ExperimentConfig& c, const std::string& v, int l) { c.eval_lr = parse_real(v, l); }},
  };
  return s;
}

void validate(const ExperimentConfig& c) {
  if (c.task.empty()) throw config_error("config: missing required key 'task'");
  if (c.method.empty()) throw config_error("config: missing required key 'method'");
  if (c.n_sims < 1) throw config_error("config: train.n_sims must be >= 1");
  if (c.sample_steps < 1) throw config_error("config: sample.steps must be >= 1");
  if (c.eval_n_observations < 1 || c.eval_n_posterior_samples < 1)
    throw config_error("config: eval counts must be >= 1");
  if (!(c.time_alpha > -1.0))
    throw config_error("config: train.time_alpha must be > -1");
  if (c.task == "box") BoxTaskConfig{c.box_dim, c.box_noise_sigma}.validate();
  if (c.task == "sgm")
    SGMConfig{c.sgm_regimes, c.sgm_transitions, c.sgm_state_dim, 0}.validate();
  NetSpec probe{1, c.net_hidden, c.net_blocks, 1};
  probe.validate();
  ExperimentConfig copy = c;
  copy.make_train_config().validate();
  copy.make_c2st_config().validate();
}

}  // namespace

Task ExperimentConfig::make_task() const {
  if (task == "box") {
    BoxTaskConfig cfg;
    cfg.dim = box_dim;
    cfg.noise_sigma = box_noise_sigma;
    return Task::Box(cfg);
  }
  SGMConfig cfg;
  cfg.regimes = sgm_regimes;
  cfg.transitions = sgm_transitions;
  cfg.state_dim = sgm_state_dim;
  cfg.seed = sgm_param_seed != 0 ? sgm_param_seed : split_seed(seed, "sgm_params");
  return Task::SGM(cfg);
}

TrainConfig ExperimentConfig::make_train_config() const {
  TrainConfig tc;
  tc.batch_size = batch_size;
  tc.lr = lr;
  tc.epochs = epochs;
  tc.val_fraction = val_fraction;
  tc.time_prior.alpha = time_alpha;
  tc.grad_clip = grad_clip;
  tc.seed = split_seed(seed, "train");
  return tc;
}

C2STConfig ExperimentConfig::make_c2st_config() const {
  C2STConfig cc;
  cc.folds = eval_folds;
  cc.max_epochs = eval_epochs;
  cc.lr = eval_lr;
  cc.seed = split_seed(seed, "eval");
  return cc;
}

Activation ExperimentConfig::parsed_activation() const {
  return net_activation == "relu" ? Activation::relu : Activation::gelu;
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig config;
  std::istringstream is(text);
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    const std::string s = trim(raw);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw config_error("line " + std::to_string(line) + ": expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    const auto it = schema().find(key);
    if (it == schema().end())
      throw config_error("line " + std::to_string(line) + ": unknown key '" + key + "'");
    if (value.empty())
      throw config_error("line " + std::to_string(line) + ": empty value for '" + key + "'");
    it->second(config, value, line);
  }
  validate(config);
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot open config: " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

std::string config_canonical(const ExperimentConfig& c) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "box.dim = " << c.box_dim << "\n"
     << "box.noise_sigma = " << c.box_noise_sigma << "\n"
     << "eval.epochs = " << c.eval_epochs << "\n"
     << "eval.folds = " << c.eval_folds << "\n"
     << "eval.lr = " << c.eval_lr << "\n"
     << "eval.n_observations = " << c.eval_n_observations << "\n"
     << "eval.n_posterior_samples = " << c.eval_n_posterior_samples << "\n"
     << "method = " << c.method << "\n"
     << "net.activation = " << c.net_activation << "\n"
     << "net.blocks = " << c.net_blocks << "\n"
     << "net.hidden = " << c.net_hidden << "\n"
     << "sample.steps = " << c.sample_steps << "\n"
     << "seed = " << c.seed << "\n"
     << "sgm.param_seed = " << c.sgm_param_seed << "\n"
     << "sgm.regimes = " << c.sgm_regimes << "\n"
     << "sgm.state_dim = " << c.sgm_state_dim << "\n"
     << "sgm.transitions = " << c.sgm_transitions << "\n"
     << "task = " << c.task << "\n"
     << "train.batch_size = " << c.batch_size << "\n"
     << "train.epochs = " << c.epochs << "\n"
     << "train.grad_clip = " << c.grad_clip << "\n"
     << "train.lr = " << c.lr << "\n"
     << "train.n_sims = " << c.n_sims << "\n"
     << "train.time_alpha = " << c.time_alpha << "\n"
     << "train.val_fraction = " << c.val_fraction << "\n";
  return os.str();
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string canon = config_canonical(config);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace pawflow
