#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mam/model.hpp"

namespace mam::gradcheck {

/// A small random bilevel instance and the finite-difference settings used to
/// check the analytic weight-net update against the unrolled meta objective.
struct Options {
  std::size_t p = 3;
  std::size_t d = 4;
  std::size_t batch = 8;       // train batch b
  std::size_t meta_batch = 8;  // m
  std::size_t hidden = 5;
  double fd_step = 1e-5;
  double eta_beta = 0.5;
  double eta_theta = 0.1;
  double lambda = 1e-2;
  double theta_scale = 0.5;  // std of the random weight-net parameters
  double tolerance = 1e-4;
  Task task = Task::regression;
  std::uint64_t seed = 0;
  bool inject_sign_flip = false;  // negate the analytic update (tester self-check)
};

struct BlockError {
  std::string name;  // w1, b1, w2, b2
  double max_abs_error = 0.0;
  double rel_error = 0.0;  // ||analytic - fd||_inf / max(||analytic||_inf, ||fd||_inf)
};

struct Report {
  Task task = Task::regression;
  std::uint64_t seed = 0;
  std::vector<BlockError> blocks;
  double max_rel_error = 0.0;
  bool passed = false;
};

Report check_instance(const Options& opt);

/// One line per block plus a summary line.
void print_report(std::ostream& os, const Report& report);

}  // namespace mam::gradcheck
