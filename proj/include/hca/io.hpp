#pragma once

#include <string>

#include "json.hpp"
#include "hca/rtm.hpp"

namespace hca::io {

using nlohmann::json;

json machine_to_json(const rtm::MachineSpec& spec);
rtm::MachineSpec machine_from_json(const json& j);

json config_to_json(const rtm::MachineSpec& spec, const rtm::Configuration& c);
rtm::Configuration config_from_json(const rtm::MachineSpec& spec, const json& j);

// One JSON object per line: {"j":..,"cells":[..]}.
std::string orbit_to_jsonl(const rtm::Orbit& orbit);

std::string rational_string(const Rational& r);

// Fixture name (HALT_NOW[:k], PING_PONG, COUNTER:k) or path to a machine JSON
// file. A missing file is NotFound with "machine spec not found".
rtm::MachineSpec load_machine(const std::string& ref, rtm::Variant variant);

}  // namespace hca::io
