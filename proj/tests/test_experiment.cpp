#include <random>
#include <sstream>

#include "doctest.h"

#include "hca/experiment.hpp"
#include "hca/hca_c.h"
#include "hca/rtm.hpp"

using hca::Error;
using hca::ErrorCode;
using hca::exp::ExperimentConfig;
using nlohmann::json;

namespace {

ExperimentConfig random_config(std::mt19937_64& rng) {
  auto pick = [&](std::initializer_list<const char*> xs) {
    std::uniform_int_distribution<std::size_t> u(0, xs.size() - 1);
    return std::string(*(xs.begin() + u(rng)));
  };
  std::uniform_int_distribution<std::uint64_t> n(0, 1000);
  std::uniform_real_distribution<double> r(0.0, 1.0);
  ExperimentConfig c;
  c.verb = pick({"orbit", "evolve", "timeavg", "decide", "gap"});
  c.machine = pick({"HALT_NOW:0", "PING_PONG", "COUNTER:2", "/tmp/m.json"});
  c.variant = pick({"one-way", "two-way"});
  c.boundary = pick({"periodic", "open"});
  for (std::uint64_t i = n(rng) % 4; i > 0; --i) c.tape.push_back(pick({"A:a1", "A:a2", "M11:s0"}));
  c.L = n(rng);
  c.v = pick({"", "1", "0110"});
  c.alpha = pick({"1/64", "1/16", "3/7"});
  c.mode = pick({"anchored", "iid"});
  c.l = n(rng) % 5;
  c.eta = r(rng);
  c.eps1 = r(rng);
  c.gamma = 1.0 + r(rng);
  c.seed = n(rng) * 7919;
  c.samples = n(rng);
  c.t_max = 100 * r(rng);
  c.dt = r(rng) + 0.01;
  for (std::uint64_t i = n(rng) % 3; i > 0; --i) c.times.push_back(r(rng));
  c.max_steps = n(rng) + 1;
  if (r(rng) < 0.5) c.t0_override = 64 * r(rng);
  c.override_params = r(rng) < 0.5;
  if (r(rng) < 0.5) c.budget = n(rng);
  if (r(rng) < 0.5) c.n_prime = static_cast<std::uint32_t>(n(rng));
  c.beta = pick({"", "5/8"});
  c.surrogate = r(rng) < 0.5;
  c.format = pick({"csv", "json"});
  c.output = pick({"", "out.csv"});
  c.threads = 1 + static_cast<unsigned>(n(rng) % 8);
  return c;
}

ErrorCode code_of(const ExperimentConfig& c) {
  try {
    hca::exp::run(c);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

}  // namespace

TEST_CASE("config JSON round trip") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 300; ++i) {
    const auto c = random_config(rng);
    const auto j = c.to_json();
    const auto back = ExperimentConfig::from_json(json::parse(j.dump()));
    CHECK(back.to_json() == j);
  }
}

TEST_CASE("config rejects bad input") {
  CHECK_THROWS_AS(ExperimentConfig::from_json(json::array()), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"L", "six"}}), Error);
  ExperimentConfig c;
  c.verb = "orbit";
  c.L = 4;
  c.validate();
  auto bad = [&](auto mutate) {
    ExperimentConfig d = c;
    mutate(d);
    CHECK(code_of(d) == ErrorCode::InvalidInput);
  };
  bad([](ExperimentConfig& d) { d.verb = "frobnicate"; });
  bad([](ExperimentConfig& d) { d.format = "xml"; });
  bad([](ExperimentConfig& d) { d.mode = "bursty"; });
  bad([](ExperimentConfig& d) { d.dt = 0; });
  bad([](ExperimentConfig& d) { d.threads = 0; });
  bad([](ExperimentConfig& d) { d.v = "102"; });
  bad([](ExperimentConfig& d) { d.L = 0; });
  bad([](ExperimentConfig& d) { d.tape = {"Q:zz"}; });
  bad([](ExperimentConfig& d) { d.variant = "sideways"; });
}

TEST_CASE("orbit artifacts") {
  ExperimentConfig c;
  c.verb = "orbit";
  c.machine = "HALT_NOW:0";
  c.L = 6;
  const auto a = hca::exp::run(c);
  REQUIRE(a.items.size() == 2);
  CHECK(a.items[1].first == ".stats.csv");
  std::istringstream is(a.items[0].second);
  std::string line;
  std::getline(is, line);
  const auto head = json::parse(line).at("meta");
  const std::uint64_t J = head.at("J");
  std::uint64_t rows = 0;
  for (std::uint64_t j = 1; std::getline(is, line); ++j, ++rows) CHECK(json::parse(line).at("j") == j);
  CHECK(rows == J);
  CHECK(head.at("terminal") == "dead_end");
  auto spec = std::make_shared<const hca::rtm::MachineSpec>(
      hca::rtm::fixture_machine("HALT_NOW:0", hca::rtm::Variant::OneWay));
  const auto o = hca::rtm::run_orbit(
      spec, hca::rtm::anchored(*spec, std::vector<std::uint32_t>(6, *spec->symbols.a("a1"))), 1u << 20);
  CHECK(o.length() == J);
}

TEST_CASE("evolve at t = 0 stays within eps1 of e1 for anchored input") {
  ExperimentConfig c;
  c.verb = "evolve";
  c.machine = "HALT_NOW:0";
  c.v = "1";
  c.L = 400;
  c.alpha = "1/64";
  c.override_params = true;
  c.samples = 40;
  c.times = {0.0};
  c.format = "json";
  const auto j = json::parse(hca::exp::run(c).items[0].second);
  const double dist = j.at("rows").at(0).at("dist_e1");
  CHECK(dist <= c.eps1);
  CHECK(dist > 0.0);
}

TEST_CASE("C API") {
  CHECK(std::string(hca_version()) == hca::kVersion);
  CHECK(hca_exit_class(HCA_OK) == 0);
  CHECK(hca_exit_class(HCA_NOT_FOUND) == 2);
  CHECK(hca_exit_class(HCA_GAP_VIOLATION) == 2);
  CHECK(hca_exit_class(HCA_DIMENSION_GUARD) == 3);
  CHECK(hca_exit_class(HCA_PRECISION_VIOLATION) == 3);
  CHECK(hca_exit_class(HCA_INTERNAL) == 4);
  CHECK(std::string(hca_status_name(HCA_PARAMS_VIOLATION)) ==
        hca::error_name(ErrorCode::ParamsViolation));

  hca_machine* m = nullptr;
  REQUIRE(hca_machine_load("COUNTER:1", "one-way", &m) == HCA_OK);
  int rev = 0;
  char* report = nullptr;
  CHECK(hca_machine_validate(m, &rev, &report) == HCA_OK);
  CHECK(rev == 1);
  hca_string_free(report);
  char* text = nullptr;
  REQUIRE(hca_machine_json(m, &text) == HCA_OK);
  CHECK(json::parse(text).is_object());
  hca_string_free(text);
  hca_machine_free(m);

  CHECK(hca_machine_load("/no/such/file.json", "one-way", &m) == HCA_NOT_FOUND);
  CHECK(m == nullptr);
  CHECK(std::string(hca_last_message()).find("machine spec not found") != std::string::npos);

  hca_artifacts* a = nullptr;
  CHECK(hca_run("{not json", &a) == HCA_INVALID_INPUT);
  CHECK(hca_run(R"({"verb":"gap","machine":"HALT_NOW:0","L":6,"format":"json"})", &a) == HCA_OK);
  REQUIRE(hca_artifacts_count(a) == 1);
  size_t len = 0;
  const auto g = json::parse(std::string(hca_artifacts_text(a, 0, &len)));
  CHECK(len > 0);
  CHECK(g.at("bound_holds") == true);
  CHECK(hca_artifacts_text(a, 5, nullptr) == nullptr);
  hca_artifacts_free(a);
  CHECK(hca_last_status() == HCA_OK);
}
