#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "pawflow/common.hpp"

namespace pawflow {

// Derives a stream seed from a master seed and a stage name (plus an optional
// index). FNV-1a over the inputs, then a splitmix64 finalizer. Every random
// stream in the pipeline is obtained this way, so a single master seed pins
// the whole run.
uint64_t split_seed(uint64_t master, std::string_view stage, uint64_t index = 0);

// Deterministic random stream. mt19937_64 gives the raw bits; all
// distributions are derived here with fixed arithmetic rather than the
// implementation-defined std:: distributions, so output is reproducible
// across standard libraries.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; the second deviate is cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // Uniform integer on [0, n). Rejection sampling to stay unbiased.
  int below(int n) {
    if (n <= 0) throw config_error("RngStream::below: n must be positive");
    const uint64_t un = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t r;
    do {
      r = eng_();
    } while (r >= limit);
    return static_cast<int>(r % un);
  }

  // Draw from a normalized probability vector by cumulative scan.
  int categorical(const Vec& probs) {
    const double u = uniform();
    double acc = 0.0;
    for (int k = 0; k < probs.size(); ++k) {
      acc += probs[k];
      if (u < acc) return k;
    }
    return static_cast<int>(probs.size()) - 1;  // fp residue
  }

  void fill_normal(Eigen::Ref<Mat> m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = normal();
  }

  // Fisher-Yates; std::shuffle is implementation-defined, this is not.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace pawflow
