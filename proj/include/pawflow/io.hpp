#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pawflow/common.hpp"
#include "pawflow/flowmatch.hpp"
#include "pawflow/tasks.hpp"

namespace pawflow {

// All binary files are little-endian; loaders refuse big-endian hosts.
//
// Dataset ("PAWD"): magic, u32 version, u64 header length, JSON header
// (task id, config echo, seed, count, dims), then the theta block and the x
// block as flat float32 arrays, sample-major.
//
// Checkpoint ("PAWF"): magic, u32 version, u8 method/head/support/schedule/
// activation tags, u32 net spec fields, u32 theta/x dims, the support payload
// (f64 box bounds or u32 block sizes), f64 observation standardization
// stats, u64 parameter count, then the flat float32 parameter vector.
//
// Samples: flat float32 binary, sample-major, with a JSON sidecar at
// <path>.json holding shape, seed, n_steps and the producing model hash.

void write_dataset(const std::filesystem::path& path, const Dataset& data,
                   const std::string& config_echo);
Dataset read_dataset(const std::filesystem::path& path);

void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

struct SampleMeta {
  long count = 0;
  int dim = 0;
  uint64_t seed = 0;
  int n_steps = 0;
  std::string model_hash;
};

void write_samples(const std::filesystem::path& path, const Mat& samples,
                   const SampleMeta& meta);
Mat read_samples(const std::filesystem::path& path, SampleMeta* meta = nullptr);

void write_curve_csv(const std::filesystem::path& path,
                     const std::vector<CurveRow>& curve);

// FNV-1a 64 over the file bytes, as a fixed-width hex string.
std::string content_hash(const std::filesystem::path& path);

// Run manifest: config hash, stage timestamps, and every artifact path with
// its content hash. Stored as manifest.json in the output directory.
void manifest_record(const std::filesystem::path& out_dir, const std::string& stage,
                     const std::string& config_hash,
                     const std::vector<std::filesystem::path>& outputs);

}  // namespace pawflow
