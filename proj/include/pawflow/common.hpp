#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace pawflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error taxonomy; the CLI maps these onto exit codes (config 2, numeric 3, io 4).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct shape_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw shape_error(what);
}

inline constexpr const char* kVersionString = "pawflow 0.1.0";

}  // namespace pawflow
