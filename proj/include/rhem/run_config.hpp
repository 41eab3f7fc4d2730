#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rhem/estimator.hpp"

namespace rhem {

/// Flat `[section]` / `key = value` file. Keys are returned as
/// `section.key`; values have surrounding quotes removed.
std::map<std::string, std::string> parse_key_values(std::istream& in);

struct RunConfig {
  // data
  std::string events;
  std::string attributes;
  std::string eligibility;   // optional SENDER,R1;R2 file
  bool exclude_loops = true;
  // history
  double half_life = 604800.0;
  std::size_t max_order = 0;  // 0: smallest order the covariates need
  std::string load_state;
  std::string save_state;
  // covariates
  std::string covariates;     // spec file
  std::vector<std::string> specs;  // inline specs, appended after the file
  // sampler
  std::size_t k = 100;
  std::uint64_t seed = 0;
  // estimator
  FitOptions fit;
  std::size_t replications = 0;
  bool contrib = false;
  std::string input;          // sampled CSV for `estimate`
  // output
  std::string out;            // file, directory or empty for stdout
  std::string csv;            // estimate: optional CSV results path
  // simulate
  std::size_t actors = 20;
  std::size_t sim_events = 1000;
  std::string beta;
  std::string size_dist;
  double rate = 1.0;
  std::string attributes_out;

  /// Applies `section.key` values. Relative paths resolve against `base_dir`.
  /// Throws InvalidConfig on unknown keys or bad values.
  void apply(const std::map<std::string, std::string>& values, const std::string& base_dir = "");
  static RunConfig load(const std::string& path);

  /// FNV-1a over the input file bytes and every setting that changes the
  /// sampled covariates.
  std::uint64_t hash() const;
  std::string hash_hex() const;
};

}  // namespace rhem
