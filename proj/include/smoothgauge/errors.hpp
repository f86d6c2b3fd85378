#pragma once

#include <stdexcept>
#include <string>

namespace smoothgauge {

// malformed or inconsistent user input (files, flags, shapes)
struct input_error : std::runtime_error {
  explicit input_error(const std::string& what) : std::runtime_error(what) {}
};

// dataset-level problems: id mismatches, islands under CAR fits, bad joins
struct data_error : std::runtime_error {
  explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

// numerical failures: non-PSD matrices, Cholesky breakdown, overflow
struct numerical_error : std::runtime_error {
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

// chains failed the convergence gate
struct convergence_error : std::runtime_error {
  explicit convergence_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace smoothgauge
