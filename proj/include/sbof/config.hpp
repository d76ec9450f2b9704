#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sbof/combiner.hpp"
#include "sbof/rp.hpp"
#include "sbof/sift.hpp"
#include "sbof/spm.hpp"

namespace sbof {

struct RunConfig {
  // Inputs and outputs.
  std::string corpus;    // M4-style training file: id,v1,v2,...
  std::string test;      // optional held-out tails in the same layout
  std::string metadata;  // optional id,period,horizon[,group]
  std::string work_dir = "work";
  int period = 1;   // used when no metadata is given
  int horizon = 6;

  RpParams rp;
  SiftParams sift;

  int codebook_k = 200;
  long long codebook_cap = 200000;
  int kmeans_iters = 100;
  double kmeans_tol = 1e-4;

  int llc_k = 5;
  double llc_lambda = kDefaultLlcLambda;
  PoolingMode pooling = PoolingMode::Signed;

  std::vector<std::string> methods{"naive", "snaive", "rw_drift", "theta", "ets", "stl_ar"};
  std::vector<std::string> external_train;  // forecast CSVs for the inner split
  std::vector<std::string> external_test;   // forecast CSVs for the outer split

  HyperParams hyper;
  int cv_budget = 0;
  int cv_folds = 10;
  bool per_group = true;

  std::uint64_t seed = 42;
  int threads = 1;
};

/// Sets one key from its text form. Throws std::invalid_argument on an
/// unknown key or a malformed value.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// `key = value` lines; `#` starts a comment. Later keys override earlier.
RunConfig parse_config(std::istream& in, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});

/// Applies `key=value` overrides in order.
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides);

/// Every key with its current value, loadable by parse_config.
std::string format_config(const RunConfig& cfg);

/// Range checks on every numeric field; with `check_paths`, input files
/// must exist. Throws std::invalid_argument naming the field.
void validate_config(const RunConfig& cfg, bool check_paths);

}  // namespace sbof
