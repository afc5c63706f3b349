#include "hca/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "hca/io.hpp"
#include "hca/verifier.hpp"

namespace hca::exp {

namespace {

using nlohmann::json;

template <class T>
void get_opt(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

json meta(const ExperimentConfig& cfg) {
  return {{"tool", "hcasim"}, {"version", kVersion}, {"config", cfg.to_json()}};
}

std::string csv_preamble(const ExperimentConfig& cfg) {
  return fmt::format("# hcasim {}\n# config {}\n", kVersion, cfg.to_json().dump());
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

rtm::SpecPtr machine_of(const ExperimentConfig& cfg) {
  return std::make_shared<const rtm::MachineSpec>(
      io::load_machine(cfg.machine, rtm::parse_variant(cfg.variant)));
}

enc::EnsembleParams params_of(const ExperimentConfig& cfg, std::uint64_t L) {
  try {
    return enc::EnsembleParams::from_json(
        {{"mode", cfg.mode}, {"L", L}, {"l", cfg.l}, {"alpha", cfg.alpha}, {"override", cfg.override_params}});
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidInput, std::string("ensemble parameters: ") + e.what());
  }
}

std::uint64_t lattice_size(const ExperimentConfig& cfg) {
  return cfg.L ? cfg.L : cfg.tape.size();
}

// Explicit tape, or draws from the encoded ensemble when v is given.
dyn::InitialEnsemble ensemble_of(const rtm::MachineSpec& spec, const ExperimentConfig& cfg,
                                 bool single) {
  const std::uint64_t L = lattice_size(cfg);
  if (cfg.v.empty()) {
    if (L == 0) fail(ErrorCode::InvalidInput, "need --tape or --L");
    if (cfg.tape.size() > L) fail(ErrorCode::InvalidInput, "tape longer than L");
    std::vector<std::uint32_t> tape(L, spec.symbols.a("a1").value_or(0));
    for (std::size_t i = 0; i < cfg.tape.size(); ++i) {
      auto s = spec.symbols.parse_tag(cfg.tape[i]);
      if (!s) fail(ErrorCode::InvalidInput, "unknown tape symbol " + cfg.tape[i]);
      tape[i] = *s;
    }
    const auto b = rtm::parse_boundary(cfg.boundary);
    rtm::Configuration c;
    if (spec.find_state("q1_init")) {
      c = rtm::anchored(spec, tape, b);
    } else {
      // Machines without the staged start state begin in their first state.
      c.boundary = b;
      c.cells.push_back(spec.control(0, 0));
      c.cells.insert(c.cells.end(), tape.begin(), tape.end());
    }
    auto ens = dyn::InitialEnsemble::single(c);
    ens.provenance = "anchored";
    return ens;
  }
  const auto p = params_of(cfg, L);
  const auto in = enc::encode_input(cfg.v);
  if (single || cfg.samples > 0) {
    const std::size_t n = single ? 1 : cfg.samples;
    dyn::InitialEnsemble ens;
    ens.configs = enc::sample_configs(spec, p, in, n, cfg.seed, cfg.threads);
    ens.probs.assign(n, 1.0 / static_cast<double>(n));
    ens.provenance = enc::mode_name(p.mode);
    ens.metadata = {{"sampled", n}, {"seed", cfg.seed}};
    return ens;
  }
  auto ens = enc::build_initial_ensemble(spec, p, in);
  if (ens.size() == 0)
    fail(ErrorCode::DimensionGuard, "ensemble support too large for exhaustive evaluation; pass --samples");
  return ens;
}

std::vector<double> time_grid(const ExperimentConfig& cfg) {
  if (!cfg.times.empty()) return cfg.times;
  std::vector<double> t;
  const auto n = static_cast<std::uint64_t>(std::floor(cfg.t_max / cfg.dt + 1e-9));
  for (std::uint64_t i = 0; i <= n; ++i) t.push_back(static_cast<double>(i) * cfg.dt);
  return t;
}

Artifacts cmd_orbit(const ExperimentConfig& cfg) {
  auto spec = machine_of(cfg);
  const auto c = ensemble_of(*spec, cfg, true).configs.front();
  const auto orbit = rtm::run_orbit(spec, c, cfg.max_steps);
  std::vector<std::pair<std::string, rtm::AmplificationStats>> stats;
  if (orbit.terminal != rtm::Terminal::Truncated)
    for (const char* a : {"a1", "a2"})
      if (spec->symbols.a(a)) stats.emplace_back(a, rtm::amplification_stats(orbit, a));
  const std::string terminal = orbit.terminal == rtm::Terminal::DeadEnd ? "dead_end"
                               : orbit.terminal == rtm::Terminal::Cycle ? "cycle"
                                                                        : "truncated";
  Artifacts out;
  if (cfg.format == "json") {
    json j = meta(cfg);
    j["J"] = orbit.length();
    j["terminal"] = terminal;
    json lines = json::array();
    std::istringstream is(io::orbit_to_jsonl(orbit));
    for (std::string line; std::getline(is, line);) lines.push_back(json::parse(line));
    j["orbit"] = lines;
    json n = json::object();
    for (const auto& [a, s] : stats) n[a] = {{"counts", s.counts}, {"average", io::rational_string(s.average)}};
    j["N_kappa"] = n;
    out.items.emplace_back("", dump(j));
    return out;
  }
  json head = meta(cfg);
  head["J"] = orbit.length();
  head["terminal"] = terminal;
  out.items.emplace_back("", json({{"meta", head}}).dump() + "\n" + io::orbit_to_jsonl(orbit));
  std::string csv = csv_preamble(cfg) + fmt::format("# J {}\n# terminal {}\nj", orbit.length(), terminal);
  for (const auto& [a, s] : stats) csv += ",N_" + a;
  csv += "\n";
  for (std::uint64_t j = 0; j < (stats.empty() ? 0 : orbit.length()); ++j) {
    csv += std::to_string(j + 1);
    for (const auto& [a, s] : stats) csv += "," + std::to_string(s.counts[j]);
    csv += "\n";
  }
  out.items.emplace_back(".stats.csv", csv);
  return out;
}

Artifacts cmd_evolve(const ExperimentConfig& cfg) {
  auto spec = machine_of(cfg);
  const auto ens = ensemble_of(*spec, cfg, false);
  const auto refs = dyn::reference_sites(*spec);
  const std::uint32_t d = spec->site_dim();
  dyn::EnsembleDynamics dynm(spec, ens, cfg.max_steps);
  const auto e1 = dyn::projector(d, refs.e1);
  const dyn::SingleSiteState mix = 0.5 * (e1 + dyn::projector(d, refs.e2));
  Artifacts out;
  json rows = json::array();
  std::string csv = csv_preamble(cfg) +
                    "# trace distances use the unhalved trace norm ||.||_1\n" + dyn::csv_header(d) +
                    ",dist_e1,dist_mix\n";
  for (double t : time_grid(cfg)) {
    const auto rho = dynm.at(t);
    const double a = dyn::trace_distance(rho, e1), b = dyn::trace_distance(rho, mix);
    if (cfg.format == "json")
      rows.push_back({{"t", t}, {"dist_e1", a}, {"dist_mix", b}, {"rho", dyn::state_to_json(rho)}});
    else
      csv += dyn::csv_row(t, rho, {a, b}) + "\n";
  }
  if (cfg.format == "json") {
    json j = meta(cfg);
    j["d"] = d;
    j["members"] = ens.size();
    j["rows"] = rows;
    out.items.emplace_back("", dump(j));
  } else {
    out.items.emplace_back("", csv);
  }
  return out;
}

Artifacts cmd_timeavg(const ExperimentConfig& cfg) {
  auto spec = machine_of(cfg);
  const auto ens = ensemble_of(*spec, cfg, false);
  const auto refs = dyn::reference_sites(*spec);
  const std::uint32_t d = spec->site_dim();
  const auto lt = dyn::longterm_site_average(*spec, ens, cfg.max_steps);
  const auto e1 = dyn::projector(d, refs.e1);
  const dyn::SingleSiteState mix = 0.5 * (e1 + dyn::projector(d, refs.e2));
  const double pe1 = lt.exact(refs.e1, refs.e1).real(), pe2 = lt.exact(refs.e2, refs.e2).real();
  Artifacts out;
  if (cfg.format == "json") {
    json j = meta(cfg);
    j["J_min"] = lt.J_min;
    j["J_max"] = lt.J_max;
    j["radius"] = lt.radius;
    j["p_e1"] = pe1;
    j["p_e2"] = pe2;
    j["dist_e1"] = dyn::trace_distance(lt.exact, e1);
    j["dist_mix"] = dyn::trace_distance(lt.exact, mix);
    j["dist_uniform"] = dyn::trace_distance(lt.exact, lt.uniform);
    j["exact"] = dyn::state_to_json(lt.exact);
    out.items.emplace_back("", dump(j));
  } else {
    std::string csv = csv_preamble(cfg) + "# trace distances use the unhalved trace norm ||.||_1\n" +
                      "J_min,J_max,radius,p_e1,p_e2,dist_e1,dist_mix,dist_uniform\n";
    csv += fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", lt.J_min, lt.J_max,
                       lt.radius, pe1, pe2, dyn::trace_distance(lt.exact, e1),
                       dyn::trace_distance(lt.exact, mix), dyn::trace_distance(lt.exact, lt.uniform));
    out.items.emplace_back("", csv);
  }
  return out;
}

Artifacts cmd_gap(const ExperimentConfig& cfg) {
  auto spec = machine_of(cfg);
  const auto c = ensemble_of(*spec, cfg, true).configs.front();
  const auto orbit = rtm::run_orbit(spec, c, cfg.max_steps);
  if (orbit.terminal == rtm::Terminal::Truncated)
    fail(ErrorCode::TruncatedOrbit, "orbit exceeded the step budget");
  const auto sp = ham::orbit_spectrum(orbit);
  const double gap = sp.min_gap();
  const Rational bound = ham::energy_gap_bound(orbit);
  json j = meta(cfg);
  j["J"] = orbit.length();
  j["terminal"] = rtm::terminal_name(orbit.terminal);
  j["min_gap"] = std::isfinite(gap) ? json(gap) : json(nullptr);
  j["gap_bound"] = io::rational_string(bound);
  j["bound_holds"] = !std::isfinite(gap) || gap >= to_double(bound) - 1e-12;
  Artifacts out;
  if (cfg.format == "json") {
    out.items.emplace_back("", dump(j));
  } else {
    out.items.emplace_back("", csv_preamble(cfg) + fmt::format("J,terminal,min_gap,gap_bound\n{},{},{:.17g},{}\n",
                                                            orbit.length(), rtm::terminal_name(orbit.terminal),
                                                            gap, io::rational_string(bound)));
  }
  return out;
}

Artifacts cmd_sample_good(const ExperimentConfig& cfg) {
  if (cfg.v.empty()) fail(ErrorCode::InvalidInput, "sample-good needs --v");
  if (cfg.samples == 0) fail(ErrorCode::InvalidInput, "sample-good needs --samples");
  auto spec = machine_of(cfg);
  const auto p = params_of(cfg, lattice_size(cfg));
  const auto in = enc::encode_input(cfg.v);
  if (!cfg.override_params) {
    const auto viol = p.violations(in);
    if (!viol.empty()) fail(ErrorCode::ParamsViolation, "parameters violate: " + viol.front());
  }
  double rate = 0.0;
  if (cfg.surrogate) {
    std::function<enc::GoodnessVerdict(std::mt19937_64&)> draw;
    if (p.mode == enc::Mode::Anchored) {
      enc::AnchoredStatSampler s{p, in};
      draw = [s](std::mt19937_64& r) { return s.draw(r); };
    } else {
      enc::IidStatSampler s{p, in};
      draw = [s](std::mt19937_64& r) { return s.draw(r); };
    }
    rate = enc::bad_rate(draw, cfg.samples, cfg.seed, cfg.threads);
  } else {
    const auto configs = enc::sample_configs(*spec, p, in, cfg.samples, cfg.seed, cfg.threads);
    std::size_t bad = 0;
    for (const auto& c : configs) bad += enc::classify_good(*spec, c, p, in).good ? 0 : 1;
    rate = static_cast<double>(bad) / static_cast<double>(cfg.samples);
  }
  const auto bounds = enc::good_rate_bounds(p, in);
  const auto bound = p.mode == enc::Mode::Anchored ? bounds.anchored : bounds.iid;
  json j = meta(cfg);
  j["bad_rate"] = rate;
  j["samples"] = cfg.samples;
  j["bound"] = bound ? json(io::rational_string(*bound)) : json(nullptr);
  j["within_bound"] = bound ? json(rate <= to_double(*bound)) : json(nullptr);
  Artifacts out;
  if (cfg.format == "json")
    out.items.emplace_back("", dump(j));
  else
    out.items.emplace_back("", csv_preamble(cfg) + fmt::format("samples,bad_rate,bound\n{},{:.17g},{}\n", cfg.samples,
                                                            rate, bound ? io::rational_string(*bound) : ""));
  return out;
}

Artifacts cmd_phase_decode(const ExperimentConfig& cfg) {
  Rational beta;
  if (!cfg.beta.empty()) {
    try {
      beta = Rational(cfg.beta);
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidInput, "beta must be a rational p/q");
    }
  } else if (!cfg.v.empty()) {
    beta = enc::beta_of(cfg.v);
  } else {
    fail(ErrorCode::InvalidInput, "phase-decode needs --v or --beta");
  }
  const std::uint32_t np = cfg.n_prime ? *cfg.n_prime : static_cast<std::uint32_t>(cfg.v.size());
  const auto r = enc::phase_decode(beta, np);
  json j = meta(cfg);
  j["beta"] = io::rational_string(beta);
  j["n_prime"] = np;
  j["length"] = r.length;
  j["v"] = r.v;
  j["worst_basis_deviation"] = r.worst_basis_deviation;
  j["copy_points"] = r.copy_points;
  j["rotations"] = r.rotations;
  Artifacts out;
  if (cfg.format == "json")
    out.items.emplace_back("", dump(j));
  else
    out.items.emplace_back("", csv_preamble(cfg) + fmt::format("length,v,worst_basis_deviation,copy_points\n{},{},{:.6e},{}\n",
                                                            r.length, r.v, r.worst_basis_deviation, r.copy_points));
  return out;
}

Artifacts cmd_build_machine(const ExperimentConfig& cfg) {
  auto spec = machine_of(cfg);
  const auto rep = rtm::validate_reversible(*spec);
  json j = meta(cfg);
  j["machine"] = io::machine_to_json(*spec);
  j["states"] = spec->num_states();
  j["tape_symbols"] = spec->num_tape();
  j["site_dim"] = spec->site_dim();
  j["reversible"] = rep.empty();
  if (!rep.empty()) j["report"] = rep.summary(*spec);
  Artifacts out;
  out.items.emplace_back("", dump(j));
  return out;
}

Artifacts cmd_decide(const ExperimentConfig& cfg) {
  if (cfg.instance.empty()) fail(ErrorCode::InvalidInput, "decide needs --instance");
  std::ifstream f(cfg.instance);
  if (!std::filesystem::is_regular_file(cfg.instance) || !f)
    fail(ErrorCode::NotFound, "instance file not found: " + cfg.instance);
  json ij;
  try {
    f >> ij;
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidInput, std::string("instance: ") + e.what());
  }
  auto inst = ver::DecisionInstance::from_json(ij);
  if (cfg.t0_override) inst.t0_override = cfg.t0_override;
  if (cfg.budget) inst.budget = *cfg.budget;
  inst.threads = cfg.threads;
  std::string mode = cfg.decide_mode.empty() ? ij.value("mode", std::string("finite")) : cfg.decide_mode;
  ver::Decision d;
  if (mode == "finite") d = ver::decide_finite(inst);
  else if (mode == "semi") d = ver::semi_decide(inst);
  else fail(ErrorCode::InvalidInput, "mode must be finite or semi");
  json j = meta(cfg);
  j["mode"] = mode;
  j["instance"] = inst.to_json();
  const json dj = d.to_json();
  for (auto& [k, v] : dj.items()) j[k] = v;
  if (mode == "semi") j["pairs"] = d.pairs;
  Artifacts out;
  out.items.emplace_back("", dump(j));
  return out;
}

}  // namespace

json ExperimentConfig::to_json() const {
  json j = {{"verb", verb},
            {"machine", machine},
            {"variant", variant},
            {"boundary", boundary},
            {"tape", tape},
            {"L", L},
            {"v", v},
            {"alpha", alpha},
            {"mode", mode},
            {"l", l},
            {"eta", eta},
            {"eps1", eps1},
            {"gamma", gamma},
            {"seed", seed},
            {"samples", samples},
            {"t_max", t_max},
            {"dt", dt},
            {"times", times},
            {"max_steps", max_steps},
            {"t0_override", t0_override ? json(*t0_override) : json(nullptr)},
            {"override_params", override_params},
            {"instance", instance},
            {"decide_mode", decide_mode},
            {"budget", budget ? json(*budget) : json(nullptr)},
            {"n_prime", n_prime ? json(*n_prime) : json(nullptr)},
            {"beta", beta},
            {"surrogate", surrogate},
            {"format", format},
            {"output", output},
            {"threads", threads}};
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::InvalidInput, "config must be a JSON object");
  ExperimentConfig c;
  try {
    get_opt(j, "verb", c.verb);
    get_opt(j, "machine", c.machine);
    get_opt(j, "variant", c.variant);
    get_opt(j, "boundary", c.boundary);
    get_opt(j, "tape", c.tape);
    get_opt(j, "L", c.L);
    get_opt(j, "v", c.v);
    get_opt(j, "alpha", c.alpha);
    get_opt(j, "mode", c.mode);
    get_opt(j, "l", c.l);
    get_opt(j, "eta", c.eta);
    get_opt(j, "eps1", c.eps1);
    get_opt(j, "gamma", c.gamma);
    get_opt(j, "seed", c.seed);
    get_opt(j, "samples", c.samples);
    get_opt(j, "t_max", c.t_max);
    get_opt(j, "dt", c.dt);
    get_opt(j, "times", c.times);
    get_opt(j, "max_steps", c.max_steps);
    if (j.contains("t0_override") && !j["t0_override"].is_null()) c.t0_override = j["t0_override"].get<double>();
    get_opt(j, "override_params", c.override_params);
    get_opt(j, "instance", c.instance);
    get_opt(j, "decide_mode", c.decide_mode);
    if (j.contains("budget") && !j["budget"].is_null()) c.budget = j["budget"].get<std::uint64_t>();
    if (j.contains("n_prime") && !j["n_prime"].is_null()) c.n_prime = j["n_prime"].get<std::uint32_t>();
    get_opt(j, "beta", c.beta);
    get_opt(j, "surrogate", c.surrogate);
    get_opt(j, "format", c.format);
    get_opt(j, "output", c.output);
    get_opt(j, "threads", c.threads);
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidInput, std::string("config: ") + e.what());
  }
  return c;
}

void ExperimentConfig::validate() const {
  const auto& vs = verbs();
  if (std::find(vs.begin(), vs.end(), verb) == vs.end()) fail(ErrorCode::InvalidInput, "unknown verb '" + verb + "'");
  if (format != "csv" && format != "json") fail(ErrorCode::InvalidInput, "format must be csv or json");
  if (mode != "anchored" && mode != "iid") fail(ErrorCode::InvalidInput, "mode must be anchored or iid");
  rtm::parse_variant(variant);
  rtm::parse_boundary(boundary);
  if (!(dt > 0.0) || !(t_max >= 0.0)) fail(ErrorCode::InvalidInput, "need dt > 0 and t_max >= 0");
  for (double t : times)
    if (!std::isfinite(t)) fail(ErrorCode::InvalidInput, "times must be finite");
  if (t0_override && !(*t0_override > 0.0)) fail(ErrorCode::InvalidInput, "t0 override must be positive");
  if (threads == 0) fail(ErrorCode::InvalidInput, "threads must be at least 1");
  if (max_steps == 0) fail(ErrorCode::InvalidInput, "max_steps must be positive");
  if (!v.empty() && v.find_first_not_of("01") != std::string::npos)
    fail(ErrorCode::InvalidInput, "v must be a binary string");
  if (verb == "decide" || !v.empty() || verb == "phase-decode") return;
  if (verb == "build-machine" || verb == "sample-good") return;
  if (tape.empty() && L == 0) fail(ErrorCode::InvalidInput, "need --tape, --L or --v");
}

const std::vector<std::string>& verbs() {
  static const std::vector<std::string> v = {"orbit", "evolve", "timeavg", "decide",
                                             "sample-good", "gap", "phase-decode", "build-machine"};
  return v;
}

Artifacts run(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.verb == "orbit") return cmd_orbit(cfg);
  if (cfg.verb == "evolve") return cmd_evolve(cfg);
  if (cfg.verb == "timeavg") return cmd_timeavg(cfg);
  if (cfg.verb == "decide") return cmd_decide(cfg);
  if (cfg.verb == "sample-good") return cmd_sample_good(cfg);
  if (cfg.verb == "gap") return cmd_gap(cfg);
  if (cfg.verb == "phase-decode") return cmd_phase_decode(cfg);
  return cmd_build_machine(cfg);
}

}  // namespace hca::exp
