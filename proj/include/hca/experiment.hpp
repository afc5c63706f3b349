#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace hca::exp {

// Resolved parameters of one command-line run.
struct ExperimentConfig {
  std::string verb;
  std::string machine = "HALT_NOW:0";  // fixture name or machine JSON path
  std::string variant = "one-way";
  std::string boundary = "periodic";
  std::vector<std::string> tape;       // tape cells after the control, padded with A:a1 up to L
  std::uint64_t L = 0;
  std::string v;
  std::string alpha = "1/64";
  std::string mode = "anchored";       // anchored | iid
  std::uint64_t l = 0;
  double eta = 0.9, eps1 = 0.3, gamma = 1.0;
  std::uint64_t seed = 1;
  std::uint64_t samples = 0;
  double t_max = 10.0, dt = 0.5;
  std::vector<double> times;           // explicit grid, overrides t_max/dt
  std::uint64_t max_steps = 1u << 20;
  std::optional<double> t0_override;
  bool override_params = false;
  std::string instance;                // decide: instance file
  std::string decide_mode;             // finite | semi; empty takes the instance value
  std::optional<std::uint64_t> budget;
  std::optional<std::uint32_t> n_prime;
  std::string beta;                    // phase-decode: rational, else derived from v
  bool surrogate = false;              // sample-good: sufficient-statistic sampler
  std::string format = "csv";          // csv | json
  std::string output;
  unsigned threads = 1;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  // Range and consistency checks; throws InvalidInput.
  void validate() const;
};

// Named text outputs of a verb. The first is the main artifact; the others
// carry a file-name suffix.
struct Artifacts {
  std::vector<std::pair<std::string, std::string>> items;  // (suffix, text)
};

const std::vector<std::string>& verbs();
Artifacts run(const ExperimentConfig& cfg);

}  // namespace hca::exp
