#include "hca/hca_c.h"

#include <cstdlib>
#include <cstring>
#include <new>

#include "hca/experiment.hpp"
#include "hca/io.hpp"

struct hca_machine {
  hca::rtm::MachineSpec spec;
};

struct hca_artifacts {
  hca::exp::Artifacts a;
};

namespace {

thread_local hca_status g_status = HCA_OK;
thread_local std::string g_message;

hca_status set(hca_status s, std::string msg) {
  g_status = s;
  g_message = std::move(msg);
  return s;
}

template <class F>
hca_status guarded(F&& f) {
  try {
    f();
    return set(HCA_OK, "");
  } catch (const hca::Error& e) {
    return set(static_cast<hca_status>(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return set(HCA_INVALID_INPUT, e.what());
  } catch (const std::bad_alloc&) {
    return set(HCA_DIMENSION_GUARD, "out of memory");
  } catch (const std::exception& e) {
    return set(HCA_INTERNAL, e.what());
  } catch (...) {
    return set(HCA_INTERNAL, "unknown exception");
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

}  // namespace

extern "C" {

const char* hca_version(void) { return hca::kVersion; }

const char* hca_status_name(hca_status s) {
  if (s == HCA_OK) return "Ok";
  if (s < HCA_INVALID_INPUT || s > HCA_INTERNAL) return "Unknown";
  return hca::error_name(static_cast<hca::ErrorCode>(s));
}

int hca_exit_class(hca_status s) {
  switch (s) {
    case HCA_OK:
      return 0;
    case HCA_INVALID_INPUT:
    case HCA_NOT_FOUND:
    case HCA_MALFORMED_CONFIGURATION:
    case HCA_NOT_REVERSIBLE:
    case HCA_INNER_NOT_REVERSIBLE:
    case HCA_PROMISE_VIOLATED:
    case HCA_NO_VALID_CODEWORD:
    case HCA_PARAMS_VIOLATION:
    case HCA_ORACLE_PROMISE_VIOLATED:
    case HCA_INVALID_THRESHOLDS:
    case HCA_TOLERANCE_VIOLATION:
    case HCA_GAP_VIOLATION:
    case HCA_DEGENERATE_OBSERVABLE:
    case HCA_OVERLAP_VIOLATION:
      return 2;
    case HCA_SYMBOL_BUDGET_EXCEEDED:
    case HCA_TRUNCATED_ORBIT:
    case HCA_DIMENSION_GUARD:
    case HCA_PRECISION_VIOLATION:
      return 3;
    default:
      return 4;
  }
}

hca_status hca_last_status(void) { return g_status; }
const char* hca_last_message(void) { return g_message.c_str(); }

hca_status hca_machine_load(const char* ref, const char* variant, hca_machine** out) {
  if (!ref || !out) return set(HCA_INVALID_INPUT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto v = hca::rtm::parse_variant(variant ? variant : "one-way");
    *out = new hca_machine{hca::io::load_machine(ref, v)};
  });
}

void hca_machine_free(hca_machine* m) { delete m; }

hca_status hca_machine_json(const hca_machine* m, char** out) {
  if (!m || !out) return set(HCA_INVALID_INPUT, "null argument");
  return guarded([&] { *out = dup(hca::io::machine_to_json(m->spec).dump(2)); });
}

hca_status hca_machine_validate(const hca_machine* m, int* reversible, char** report) {
  if (!m || !reversible) return set(HCA_INVALID_INPUT, "null argument");
  return guarded([&] {
    const auto r = hca::rtm::validate_reversible(m->spec);
    *reversible = r.empty() ? 1 : 0;
    if (report) *report = dup(r.summary(m->spec));
  });
}

hca_status hca_run(const char* config_json, hca_artifacts** out) {
  if (!config_json || !out) return set(HCA_INVALID_INPUT, "null argument");
  *out = nullptr;
  return guarded([&] {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(config_json);
    } catch (const nlohmann::json::exception& e) {
      hca::fail(hca::ErrorCode::InvalidInput, std::string("config: ") + e.what());
    }
    auto res = hca::exp::run(hca::exp::ExperimentConfig::from_json(j));
    *out = new hca_artifacts{std::move(res)};
  });
}

size_t hca_artifacts_count(const hca_artifacts* a) { return a ? a->a.items.size() : 0; }

const char* hca_artifacts_suffix(const hca_artifacts* a, size_t i) {
  if (!a || i >= a->a.items.size()) return nullptr;
  return a->a.items[i].first.c_str();
}

const char* hca_artifacts_text(const hca_artifacts* a, size_t i, size_t* len) {
  if (!a || i >= a->a.items.size()) return nullptr;
  if (len) *len = a->a.items[i].second.size();
  return a->a.items[i].second.c_str();
}

void hca_artifacts_free(hca_artifacts* a) { delete a; }

const char* hca_verbs(void) {
  static const std::string s = [] {
    std::string r;
    for (const auto& v : hca::exp::verbs()) r += v + "\n";
    return r;
  }();
  return s.c_str();
}

void hca_string_free(char* s) { std::free(s); }

}  // extern "C"
