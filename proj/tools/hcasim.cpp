// hcasim: command-line front end over the hca C API.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "hca/hca_c.h"

namespace {

int report(hca_status s) {
  std::fprintf(stderr, "hcasim: %s: %s\n", hca_status_name(s), hca_last_message());
  return hca_exit_class(s);
}

bool write_file(const std::string& path, const char* text, size_t len) {
  std::ofstream f(path, std::ios::binary);
  f.write(text, static_cast<std::streamsize>(len));
  return static_cast<bool>(f);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator and verifier for reversible-machine Hamiltonian constructions"};
  app.set_version_flag("--version", std::string(hca_version()));

  std::string verb;
  nlohmann::json cfg = nlohmann::json::object();
  std::string machine, variant, boundary, v, alpha, mode, instance, decide_mode, beta, format, output,
      config_file;
  std::vector<std::string> tape;
  std::vector<double> times;
  std::uint64_t L = 0, l = 0, seed = 1, samples = 0, max_steps = 0, budget = 0;
  std::uint32_t n_prime = 0;
  double eta = 0, eps1 = 0, gamma = 0, t_max = 0, dt = 0, t0_override = 0;
  unsigned threads = 1;
  bool override_params = false, surrogate = false;

  std::string verbs = hca_verbs();
  std::vector<std::string> verb_list;
  for (size_t p = 0, q; (q = verbs.find('\n', p)) != std::string::npos; p = q + 1)
    verb_list.push_back(verbs.substr(p, q - p));

  app.add_option("verb", verb, "orbit | evolve | timeavg | decide | sample-good | gap | phase-decode | build-machine")
      ->required()
      ->check(CLI::IsMember(verb_list));
  app.add_option("--config", config_file, "JSON config; command-line flags take precedence")
      ->check(CLI::ExistingFile);
  app.add_option("--machine", machine, "fixture (HALT_NOW:<k>, PING_PONG, COUNTER:<k>) or machine JSON path");
  app.add_option("--variant", variant, "one-way | two-way | iid-repeat | plain");
  app.add_option("--boundary", boundary, "periodic | open");
  app.add_option("--tape", tape, "tape site tags after the control, e.g. M11:s0,A:a2")->delimiter(',');
  app.add_option("--L", L, "tape length");
  app.add_option("--v", v, "binary input string");
  app.add_option("--alpha", alpha, "density parameter as p/q");
  app.add_option("--mode", mode, "anchored | iid");
  app.add_option("--l", l, "block scale for iid ensembles");
  app.add_option("--eta", eta);
  app.add_option("--eps1", eps1);
  app.add_option("--gamma", gamma);
  app.add_option("--seed", seed, "sampler seed");
  app.add_option("--samples", samples, "draws instead of exhaustive enumeration");
  app.add_option("--t-max", t_max);
  app.add_option("--dt", dt);
  app.add_option("--times", times, "explicit time grid")->delimiter(',');
  app.add_option("--max-steps", max_steps, "orbit step budget");
  app.add_option("--t0-override", t0_override, "finite-lattice time cutoff");
  app.add_flag("--override-params", override_params, "record size-condition violations instead of refusing");
  app.add_option("--instance", instance, "decide: instance JSON file");
  app.add_option("--decide-mode", decide_mode, "finite | semi")->check(CLI::IsMember({"finite", "semi"}));
  app.add_option("--budget", budget, "semi-decision pair budget");
  app.add_option("--n-prime", n_prime, "phase-decode: codeword length");
  app.add_option("--beta", beta, "phase-decode: rational phase");
  app.add_flag("--surrogate", surrogate, "sample-good: sufficient-statistic sampler");
  app.add_option("--format", format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--output,-o", output, "main artifact path; extras go to <path><suffix>");
  app.add_option("--threads", threads)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (!config_file.empty()) {
    std::ifstream f(config_file);
    try {
      f >> cfg;
    } catch (const nlohmann::json::exception& e) {
      std::fprintf(stderr, "hcasim: InvalidInput: config: %s\n", e.what());
      return 2;
    }
    if (!cfg.is_object()) {
      std::fprintf(stderr, "hcasim: InvalidInput: config must be a JSON object\n");
      return 2;
    }
  }
  cfg["verb"] = verb;
  auto set = [&](const char* flag, const char* key, const auto& value) {
    if (app.count(flag)) cfg[key] = value;
  };
  set("--machine", "machine", machine);
  set("--variant", "variant", variant);
  set("--boundary", "boundary", boundary);
  set("--tape", "tape", tape);
  set("--L", "L", L);
  set("--v", "v", v);
  set("--alpha", "alpha", alpha);
  set("--mode", "mode", mode);
  set("--l", "l", l);
  set("--eta", "eta", eta);
  set("--eps1", "eps1", eps1);
  set("--gamma", "gamma", gamma);
  set("--seed", "seed", seed);
  set("--samples", "samples", samples);
  set("--t-max", "t_max", t_max);
  set("--dt", "dt", dt);
  set("--times", "times", times);
  set("--max-steps", "max_steps", max_steps);
  set("--t0-override", "t0_override", t0_override);
  set("--override-params", "override_params", override_params);
  set("--instance", "instance", instance);
  set("--decide-mode", "decide_mode", decide_mode);
  set("--budget", "budget", budget);
  set("--n-prime", "n_prime", n_prime);
  set("--beta", "beta", beta);
  set("--surrogate", "surrogate", surrogate);
  set("--format", "format", format);
  set("--output", "output", output);
  set("--threads", "threads", threads);

  hca_artifacts* arts = nullptr;
  const hca_status s = hca_run(cfg.dump().c_str(), &arts);
  if (s != HCA_OK) return report(s);

  int rc = 0;
  for (size_t i = 0; i < hca_artifacts_count(arts); ++i) {
    size_t len = 0;
    const char* text = hca_artifacts_text(arts, i, &len);
    const std::string suffix = hca_artifacts_suffix(arts, i);
    if (output.empty()) {
      if (i == 0) std::fwrite(text, 1, len, stdout);
      continue;  // extras need an output path
    }
    if (!write_file(output + suffix, text, len)) {
      std::fprintf(stderr, "hcasim: cannot write %s%s\n", output.c_str(), suffix.c_str());
      rc = 4;
    }
  }
  hca_artifacts_free(arts);
  return rc;
}
