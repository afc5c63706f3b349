#include "hca/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace hca::io {

namespace {

const char* shift_name(int d) { return d > 0 ? "+" : d < 0 ? "-" : "0"; }

json names(const rtm::MachineSpec& spec, const std::vector<std::uint32_t>& qs) {
  json a = json::array();
  for (auto q : qs) a.push_back(spec.state_names.at(q));
  return a;
}

}  // namespace

json machine_to_json(const rtm::MachineSpec& spec) {
  json j;
  j["format"] = "hca-machine/1";
  j["variant"] = rtm::variant_name(spec.variant);
  j["inner"] = spec.inner_name;
  j["a_track2"] = spec.symbols.a_track2;
  j["m_track2"] = spec.symbols.m_track2;
  json states = json::array();
  for (std::uint32_t q = 0; q < spec.num_states(); ++q) {
    json s;
    s["name"] = spec.state_names[q];
    s["stage"] = spec.state_stage[q];
    s["shift_enabled"] = spec.shift_enabled[q] != 0;
    int d = spec.dir(q);
    if (d >= -1 && d <= 1) s["shift"] = shift_name(d);
    states.push_back(s);
  }
  j["states"] = states;
  j["q_plus"] = names(spec, spec.q_plus);
  j["q_minus"] = names(spec, spec.q_minus);
  j["q_zero"] = names(spec, spec.q_zero);
  json rules = json::array();
  for (const auto& r : spec.rules)
    rules.push_back({spec.state_names[r.q], spec.symbols.tag(r.s), spec.state_names[r.q2],
                     spec.symbols.tag(r.s2)});
  j["rules"] = rules;
  json d = json::object();
  for (const auto& [k, q] : spec.distinguished) d[k] = spec.state_names[q];
  j["distinguished"] = d;
  return j;
}

rtm::MachineSpec machine_from_json(const json& j) {
  try {
    rtm::MachineSpec sp;
    if (j.value("format", "") != "hca-machine/1")
      fail(ErrorCode::InvalidInput, "unsupported machine format");
    sp.variant = rtm::parse_variant(j.at("variant").get<std::string>());
    sp.inner_name = j.value("inner", "");
    sp.symbols.a_track2 = j.at("a_track2").get<std::vector<std::string>>();
    sp.symbols.m_track2 = j.at("m_track2").get<std::vector<std::string>>();
    std::map<std::string, std::uint32_t> idx;
    for (const auto& s : j.at("states")) {
      auto name = s.at("name").get<std::string>();
      if (idx.count(name)) fail(ErrorCode::InvalidInput, "duplicate state " + name);
      idx[name] = static_cast<std::uint32_t>(sp.state_names.size());
      sp.state_names.push_back(name);
      sp.state_stage.push_back(s.value("stage", ""));
      sp.shift_enabled.push_back(s.value("shift_enabled", false) ? 1 : 0);
    }
    auto lookup = [&](const std::string& n) {
      auto it = idx.find(n);
      if (it == idx.end()) fail(ErrorCode::InvalidInput, "unknown state " + n);
      return it->second;
    };
    for (const auto& n : j.at("q_plus")) sp.q_plus.push_back(lookup(n.get<std::string>()));
    for (const auto& n : j.at("q_minus")) sp.q_minus.push_back(lookup(n.get<std::string>()));
    for (const auto& n : j.at("q_zero")) sp.q_zero.push_back(lookup(n.get<std::string>()));
    for (const auto& r : j.at("rules")) {
      if (!r.is_array() || r.size() != 4) fail(ErrorCode::InvalidInput, "rule must be a 4-tuple");
      auto s = sp.symbols.parse_tag(r[1].get<std::string>());
      auto s2 = sp.symbols.parse_tag(r[3].get<std::string>());
      if (!s || !s2) fail(ErrorCode::InvalidInput, "unknown tape symbol in rule");
      sp.rules.push_back({lookup(r[0].get<std::string>()), *s, lookup(r[2].get<std::string>()), *s2});
    }
    if (j.contains("distinguished"))
      for (const auto& [k, v] : j.at("distinguished").items()) sp.distinguished[k] = lookup(v.get<std::string>());
    sp.finalize();
    return sp;
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidInput, std::string("machine JSON: ") + e.what());
  }
}

json config_to_json(const rtm::MachineSpec& spec, const rtm::Configuration& c) {
  json cells = json::array();
  for (auto x : c.cells) cells.push_back(spec.site_tag(x));
  return {{"boundary", rtm::boundary_name(c.boundary)}, {"cells", cells}};
}

rtm::Configuration config_from_json(const rtm::MachineSpec& spec, const json& j) {
  try {
    rtm::Configuration c;
    c.boundary = rtm::parse_boundary(j.value("boundary", "periodic"));
    for (const auto& t : j.at("cells")) {
      auto x = spec.parse_site_tag(t.get<std::string>());
      if (!x) fail(ErrorCode::InvalidInput, "unknown site tag " + t.get<std::string>());
      c.cells.push_back(*x);
    }
    return c;
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidInput, std::string("configuration JSON: ") + e.what());
  }
}

std::string orbit_to_jsonl(const rtm::Orbit& orbit) {
  std::ostringstream os;
  const auto& spec = *orbit.machine;
  orbit.for_each([&](std::uint64_t j, const rtm::Configuration& c) {
    json line;
    line["j"] = j;
    line["cells"] = config_to_json(spec, c)["cells"];
    os << line.dump() << "\n";
  });
  return os.str();
}

std::string rational_string(const Rational& r) {
  std::ostringstream os;
  os << numerator(r);
  if (denominator(r) != 1) os << "/" << denominator(r);
  return os.str();
}

rtm::MachineSpec load_machine(const std::string& ref, rtm::Variant variant) {
  for (const char* p : {"HALT_NOW", "PING_PONG", "COUNTER"})
    if (ref.rfind(p, 0) == 0) return rtm::fixture_machine(ref, variant);
  std::ifstream in(ref);
  if (ref.empty() || !std::filesystem::is_regular_file(ref) || !in)
    fail(ErrorCode::NotFound, "machine spec not found: " + ref);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidInput, std::string("machine spec: ") + e.what());
  }
  return machine_from_json(j);
}

}  // namespace hca::io
