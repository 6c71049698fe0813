#include "pawflow/io.hpp"

#include <bit>
#include <chrono>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace pawflow {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts unsupported");

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw io_error("unexpected end of file");
  return v;
}

void write_f32_matrix(std::ostream& os, const Mat& m) {
  // Sample-major: column i contiguous.
  std::vector<float> buf(static_cast<size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.cols(); ++i) {
    for (Eigen::Index d = 0; d < m.rows(); ++d)
      buf[static_cast<size_t>(d)] = static_cast<float>(m(d, i));
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
}

Mat read_f32_matrix(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  std::vector<float> buf(static_cast<size_t>(rows));
  for (Eigen::Index i = 0; i < cols; ++i) {
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!is) throw io_error("unexpected end of float block");
    for (Eigen::Index d = 0; d < rows; ++d) m(d, i) = buf[static_cast<size_t>(d)];
  }
  return m;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw io_error("cannot open for writing: " + path.string());
  return os;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open for reading: " + path.string());
  return is;
}

void expect_magic(std::istream& is, const char* magic) {
  char got[4];
  is.read(got, 4);
  if (!is || std::memcmp(got, magic, 4) != 0)
    throw io_error(std::string("bad magic, expected ") + magic);
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%FT%TZ");
  return os.str();
}

}  // namespace

void write_dataset(const fs::path& path, const Dataset& data,
                   const std::string& config_echo) {
  json header;
  header["task"] = data.task;
  header["config"] = config_echo;
  header["seed"] = data.seed;
  header["count"] = data.count();
  header["theta_dim"] = data.theta.rows();
  header["x_dim"] = data.x.rows();
  const std::string hs = header.dump();

  auto os = open_out(path);
  os.write("PAWD", 4);
  write_pod<uint32_t>(os, 1);
  write_pod<uint64_t>(os, hs.size());
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  write_f32_matrix(os, data.theta);
  write_f32_matrix(os, data.x);
  if (!os) throw io_error("write failed: " + path.string());
}

Dataset read_dataset(const fs::path& path) {
  auto is = open_in(path);
  expect_magic(is, "PAWD");
  const auto version = read_pod<uint32_t>(is);
  if (version != 1) throw io_error("unsupported dataset version");
  const auto hlen = read_pod<uint64_t>(is);
  std::string hs(hlen, '\0');
  is.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw io_error("truncated dataset header");
  const json header = json::parse(hs);

  Dataset data;
  data.task = header.at("task").get<std::string>();
  data.seed = header.at("seed").get<uint64_t>();
  const auto count = header.at("count").get<Eigen::Index>();
  const auto theta_dim = header.at("theta_dim").get<Eigen::Index>();
  const auto x_dim = header.at("x_dim").get<Eigen::Index>();
  data.theta = read_f32_matrix(is, theta_dim, count);
  data.x = read_f32_matrix(is, x_dim, count);
  return data;
}

void save_checkpoint(const fs::path& path, const Model& model) {
  auto os = open_out(path);
  os.write("PAWF", 4);
  write_pod<uint32_t>(os, 1);
  write_pod<uint8_t>(os, static_cast<uint8_t>(model.method));
  write_pod<uint8_t>(os, static_cast<uint8_t>(model.heads.head1));
  write_pod<uint8_t>(os, static_cast<uint8_t>(model.support.kind));
  write_pod<uint8_t>(os, static_cast<uint8_t>(model.schedule.kind));
  write_pod<uint8_t>(os, static_cast<uint8_t>(model.spec.activation));
  write_pod<uint32_t>(os, static_cast<uint32_t>(model.spec.input_dim));
  write_pod<uint32_t>(os, static_cast<uint32_t>(model.spec.hidden_dim));
  write_pod<uint32_t>(os, static_cast<uint32_t>(model.spec.num_blocks));
  write_pod<uint32_t>(os, static_cast<uint32_t>(model.spec.output_dim));
  write_pod<uint32_t>(os, static_cast<uint32_t>(model.theta_dim));
  write_pod<uint32_t>(os, static_cast<uint32_t>(model.x_dim));

  if (model.support.kind == Support::Kind::box) {
    for (int d = 0; d < model.support.dim; ++d) write_pod<double>(os, model.support.low[d]);
    for (int d = 0; d < model.support.dim; ++d) write_pod<double>(os, model.support.high[d]);
  } else if (model.support.kind == Support::Kind::simplex_product) {
    write_pod<uint32_t>(os, static_cast<uint32_t>(model.support.blocks.size()));
    for (int k : model.support.blocks) write_pod<uint32_t>(os, static_cast<uint32_t>(k));
  }

  for (int d = 0; d < model.x_dim; ++d) write_pod<double>(os, model.x_mean[d]);
  for (int d = 0; d < model.x_dim; ++d) write_pod<double>(os, model.x_std[d]);

  write_pod<uint64_t>(os, static_cast<uint64_t>(model.params.values.size()));
  std::vector<float> buf(static_cast<size_t>(model.params.values.size()));
  for (Eigen::Index i = 0; i < model.params.values.size(); ++i)
    buf[static_cast<size_t>(i)] = static_cast<float>(model.params.values[i]);
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!os) throw io_error("write failed: " + path.string());
}

Model load_checkpoint(const fs::path& path) {
  auto is = open_in(path);
  expect_magic(is, "PAWF");
  const auto version = read_pod<uint32_t>(is);
  if (version != 1) throw io_error("unsupported checkpoint version");

  Model m;
  m.method = static_cast<Method>(read_pod<uint8_t>(is));
  m.heads.head1 = static_cast<Head1Kind>(read_pod<uint8_t>(is));
  const auto support_kind = static_cast<Support::Kind>(read_pod<uint8_t>(is));
  m.schedule.kind = static_cast<Schedule::Kind>(read_pod<uint8_t>(is));
  m.spec.activation = static_cast<Activation>(read_pod<uint8_t>(is));
  m.spec.input_dim = static_cast<int>(read_pod<uint32_t>(is));
  m.spec.hidden_dim = static_cast<int>(read_pod<uint32_t>(is));
  m.spec.num_blocks = static_cast<int>(read_pod<uint32_t>(is));
  m.spec.output_dim = static_cast<int>(read_pod<uint32_t>(is));
  m.theta_dim = static_cast<int>(read_pod<uint32_t>(is));
  m.x_dim = static_cast<int>(read_pod<uint32_t>(is));

  if (support_kind == Support::Kind::box) {
    Vec low(m.theta_dim), high(m.theta_dim);
    for (int d = 0; d < m.theta_dim; ++d) low[d] = read_pod<double>(is);
    for (int d = 0; d < m.theta_dim; ++d) high[d] = read_pod<double>(is);
    m.support = Support::Box(low, high);
  } else if (support_kind == Support::Kind::simplex_product) {
    const auto nb = read_pod<uint32_t>(is);
    std::vector<int> blocks(nb);
    for (auto& k : blocks) k = static_cast<int>(read_pod<uint32_t>(is));
    m.support = Support::SimplexProduct(blocks);
  } else {
    m.support = Support::Unbounded(m.theta_dim);
  }

  m.x_mean.resize(m.x_dim);
  m.x_std.resize(m.x_dim);
  for (int d = 0; d < m.x_dim; ++d) m.x_mean[d] = read_pod<double>(is);
  for (int d = 0; d < m.x_dim; ++d) m.x_std[d] = read_pod<double>(is);

  const auto n_params = read_pod<uint64_t>(is);
  if (n_params != static_cast<uint64_t>(m.spec.param_count()))
    throw io_error("checkpoint parameter count does not match spec");
  std::vector<float> buf(n_params);
  is.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!is) throw io_error("truncated parameter block");
  m.params.values.resize(static_cast<Eigen::Index>(n_params));
  for (uint64_t i = 0; i < n_params; ++i)
    m.params.values[static_cast<Eigen::Index>(i)] = buf[i];
  return m;
}

void write_samples(const fs::path& path, const Mat& samples, const SampleMeta& meta) {
  auto os = open_out(path);
  write_f32_matrix(os, samples);
  if (!os) throw io_error("write failed: " + path.string());

  json side;
  side["shape"] = {samples.cols(), samples.rows()};
  side["seed"] = meta.seed;
  side["n_steps"] = meta.n_steps;
  side["model_hash"] = meta.model_hash;
  std::ofstream js(path.string() + ".json", std::ios::trunc);
  if (!js) throw io_error("cannot write sidecar for: " + path.string());
  js << side.dump(2) << "\n";
}

Mat read_samples(const fs::path& path, SampleMeta* meta) {
  std::ifstream js(path.string() + ".json");
  if (!js) throw io_error("missing sample sidecar: " + path.string() + ".json");
  json side;
  js >> side;
  const auto shape = side.at("shape");
  const Eigen::Index count = shape.at(0).get<Eigen::Index>();
  const Eigen::Index dim = shape.at(1).get<Eigen::Index>();
  if (meta) {
    meta->count = count;
    meta->dim = static_cast<int>(dim);
    meta->seed = side.at("seed").get<uint64_t>();
    meta->n_steps = side.at("n_steps").get<int>();
    meta->model_hash = side.at("model_hash").get<std::string>();
  }
  auto is = open_in(path);
  return read_f32_matrix(is, dim, count);
}

void write_curve_csv(const fs::path& path, const std::vector<CurveRow>& curve) {
  auto os = open_out(path);
  os << "epoch,train_loss,val_loss,lr\n";
  os << std::setprecision(17);
  for (const auto& row : curve)
    os << row.epoch << "," << row.train_loss << "," << row.val_loss << "," << row.lr
       << "\n";
}

std::string content_hash(const fs::path& path) {
  auto is = open_in(path);
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (is) {
    is.read(buf, sizeof(buf));
    const std::streamsize got = is.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void manifest_record(const fs::path& out_dir, const std::string& stage,
                     const std::string& config_hash,
                     const std::vector<fs::path>& outputs) {
  fs::create_directories(out_dir);
  const fs::path mpath = out_dir / "manifest.json";
  json manifest;
  if (fs::exists(mpath)) {
    std::ifstream is(mpath);
    is >> manifest;
  } else {
    manifest["version"] = kVersionString;
    manifest["stages"] = json::array();
  }
  manifest["config_hash"] = config_hash;
  json entry;
  entry["stage"] = stage;
  entry["time"] = iso_timestamp();
  entry["outputs"] = json::array();
  for (const auto& p : outputs) {
    json f;
    f["path"] = p.string();
    f["hash"] = content_hash(p);
    entry["outputs"].push_back(f);
  }
  manifest["stages"].push_back(entry);
  std::ofstream os(mpath, std::ios::trunc);
  if (!os) throw io_error("cannot write manifest: " + mpath.string());
  os << manifest.dump(2) << "\n";
}

}  // namespace pawflow
