#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hca/common.hpp"

namespace hca::rtm {

enum class Boundary { Periodic, Open };
enum class Variant { OneWay, TwoWay, IidRepeat, Plain };
enum class CellKind : std::uint8_t { A, M };

const char* variant_name(Variant v);
Variant parse_variant(const std::string& s);
const char* boundary_name(Boundary b);
Boundary parse_boundary(const std::string& s);

// Left-end marker and the two-way variants of it.
inline const std::string kBox = "box";
inline const std::string kBox2 = "box2";
inline const std::string kBox3 = "box3";

struct TapeSymbol {
  CellKind kind;
  std::uint8_t b;  // track-1 pair bits 2*b1+b2, M-cells only
  std::string track2;
};

// Tape alphabet. A-cells come first, then M-cells in (b, track2) order.
struct SymbolSet {
  std::vector<std::string> a_track2;
  std::vector<std::string> m_track2;

  std::uint32_t size() const {
    return static_cast<std::uint32_t>(a_track2.size() + 4 * m_track2.size());
  }
  TapeSymbol at(std::uint32_t s) const;
  std::optional<std::uint32_t> a(const std::string& t2) const;
  std::optional<std::uint32_t> m(std::uint8_t b, const std::string& t2) const;
  std::uint32_t a_or_throw(const std::string& t2) const;
  std::uint32_t m_or_throw(std::uint8_t b, const std::string& t2) const;
  std::string tag(std::uint32_t s) const;  // "A:a1", "M10:s0"
  std::optional<std::uint32_t> parse_tag(const std::string& tag) const;
  bool is_box(std::uint32_t s) const;  // track-2 is exactly the left-end marker
  std::vector<std::string> check() const;
};

struct Rule {
  std::uint32_t q, s, q2, s2;
  bool operator==(const Rule&) const = default;
  auto operator<=>(const Rule&) const = default;
};

// Two-mode quadruple-form machine. Site values: [0, nt) tape symbols,
// nt + 2q + mode for control states.
class MachineSpec {
 public:
  Variant variant = Variant::Plain;
  std::string inner_name;
  SymbolSet symbols;
  std::vector<std::string> state_names;
  std::vector<std::string> state_stage;
  std::vector<std::uint32_t> q_plus, q_minus, q_zero;
  // States that may execute a shift move. Defaults to targets of rw rules.
  std::vector<std::uint8_t> shift_enabled;
  std::vector<Rule> rules;
  std::map<std::string, std::uint32_t> distinguished;

  // Builds lookup tables. Must be called once the public fields are set.
  void finalize();
  bool finalized() const { return nt_ != 0 || !rules_by_src_.empty(); }

  std::uint32_t num_states() const { return static_cast<std::uint32_t>(state_names.size()); }
  std::uint32_t num_tape() const { return nt_; }
  std::uint32_t site_dim() const { return nt_ + 2 * num_states(); }

  bool is_control(std::uint32_t x) const { return x >= nt_; }
  std::uint32_t control(std::uint32_t q, int mode) const { return nt_ + 2 * q + mode; }
  std::uint32_t ustate(std::uint32_t x) const { return (x - nt_) / 2; }
  int mode(std::uint32_t x) const { return static_cast<int>((x - nt_) % 2); }
  int dir(std::uint32_t q) const { return dir_[q]; }  // +1, -1, 0; 2 when undefined
  bool can_shift(std::uint32_t q) const { return shift_enabled[q] != 0; }

  // Rule index for (q, s) or -1.
  std::int32_t rule_for(std::uint32_t q, std::uint32_t s) const {
    return rules_by_src_[static_cast<std::size_t>(q) * nt_ + s];
  }
  std::int32_t rule_into(std::uint32_t q2, std::uint32_t s2) const {
    return rules_by_dst_[static_cast<std::size_t>(q2) * nt_ + s2];
  }

  std::uint32_t state(const std::string& name) const;
  std::optional<std::uint32_t> find_state(const std::string& name) const;
  std::string site_tag(std::uint32_t x) const;
  std::optional<std::uint32_t> parse_site_tag(const std::string& tag) const;

  bool operator==(const MachineSpec& o) const;

 private:
  std::uint32_t nt_ = 0;
  std::vector<std::int32_t> rules_by_src_, rules_by_dst_;
  std::vector<int> dir_;
  std::map<std::string, std::uint32_t> state_index_;
};

using SpecPtr = std::shared_ptr<const MachineSpec>;

struct Configuration {
  std::vector<std::uint32_t> cells;
  Boundary boundary = Boundary::Periodic;

  std::size_t size() const { return cells.size(); }
  std::uint32_t L() const { return static_cast<std::uint32_t>(cells.size() - 1); }
  bool operator==(const Configuration&) const = default;
};

struct ConfigHash {
  std::size_t operator()(const Configuration& c) const noexcept;
};

std::vector<std::size_t> control_sites(const MachineSpec& spec, const Configuration& c);

struct ValidationReport {
  struct Collision {
    Rule a, b;
  };
  std::vector<Collision> collisions;          // two rules with the same target
  std::vector<Collision> nondeterminism;      // two rules with the same source
  std::vector<std::uint32_t> direction_violations;  // state in more than one class
  std::vector<std::uint32_t> missing_direction;     // state in no class
  std::vector<std::string> structural;
  std::vector<std::string> track1_rewrites;
  bool empty() const {
    return collisions.empty() && nondeterminism.empty() && direction_violations.empty() &&
           missing_direction.empty() && structural.empty() && track1_rewrites.empty();
  }
  std::string summary(const MachineSpec& spec) const;
};

ValidationReport validate_reversible(const MachineSpec& spec);

// Inverse machine. Its configurations are those of spec with modes swapped;
// use to_inverse_frame to move between the two.
MachineSpec invert(const MachineSpec& spec);
Configuration to_inverse_frame(const MachineSpec& spec, const Configuration& c);

// Sites touched by one step: i goes oi -> xi, k goes ok -> xk (k == i when
// only one site changed).
struct Delta {
  std::uint32_t i, oi, xi, k, ok, xk;
};

enum class StepStatus { Ok, NoSuccessor };

// In-place step of the single control at position pos. Updates pos.
StepStatus step_at(const MachineSpec& spec, std::vector<std::uint32_t>& cells, Boundary bd,
                   std::size_t& pos, Delta* delta = nullptr);

std::optional<Configuration> step(const MachineSpec& spec, const Configuration& c);

enum class Terminal { DeadEnd, Cycle, Truncated };
const char* terminal_name(Terminal t);

class Orbit {
 public:
  SpecPtr machine;
  Configuration initial;
  std::vector<Delta> deltas;  // deltas[j-1] takes x(j) to x(j+1)
  Terminal terminal = Terminal::Truncated;

  // Number of distinct configurations J (the period for a cycle).
  std::uint64_t length() const { return deltas.size() + (terminal == Terminal::Cycle ? 0 : 1); }
  std::vector<Configuration> states() const;
  Configuration at(std::uint64_t j) const;  // 1-based
  // Visits x(1) .. x(J) in order.
  void for_each(const std::function<void(std::uint64_t, const Configuration&)>& f) const;
};

Orbit run_orbit(SpecPtr spec, const Configuration& c, std::uint64_t max_steps);

// Streaming variant: calls f after each step with the delta and the new
// configuration. Returns the terminal kind and number of configurations.
struct WalkResult {
  Terminal terminal;
  std::uint64_t length;
};
WalkResult walk_orbit(const MachineSpec& spec, const Configuration& c, std::uint64_t max_steps,
                      const std::function<void(std::uint64_t, const Delta&,
                                               const std::vector<std::uint32_t>&)>& f);

// Runs the inverse machine (from invert) backwards from c for up to steps steps.
Configuration run_backward(const MachineSpec& inverse, const MachineSpec& spec,
                           const Configuration& c, std::uint64_t steps);

struct AmplificationStats {
  std::vector<std::uint64_t> counts;  // N_kappa(j), j = 1..J
  Rational average;                   // (1/J) sum_j N(j)/(L+1)
  double average_f = 0.0;
  std::uint64_t sum = 0;
};

AmplificationStats amplification_stats(const Orbit& orbit, const std::string& a_symbol);
// Same statistics without materializing the orbit; counts are omitted.
AmplificationStats amplification_stats_stream(const MachineSpec& spec, const Configuration& c,
                                              const std::string& a_symbol,
                                              std::uint64_t max_steps, Terminal* terminal);

// ---- fixtures and the staged machine ----

struct InnerRule {
  std::string q, sym, q2, sym2;
};

// Machine simulated in stage 3, on track 2 of M-cells. "box" is the left end.
struct InnerMachine {
  std::string name;
  std::vector<std::string> states;
  std::map<std::string, int> shift;  // +1, -1, 0
  std::string start;
  std::string halt;  // empty for a machine that never halts
  std::vector<std::string> symbols;  // track-2 symbols beyond s0, d0, d1
  std::vector<InnerRule> rules;
};

InnerMachine halt_now(int k = 1);
InnerMachine ping_pong_inner();
InnerMachine counter(int k);
InnerMachine inner_fixture(const std::string& name);  // "HALT_NOW[:k]", "PING_PONG", "COUNTER:k"

struct BuildOptions {
  std::uint32_t max_states = 1u << 16;
  std::uint32_t max_m_symbols = 64;
  std::uint32_t pad = 0;  // non-moving delay states between decode and stage 3
};

MachineSpec build_machine_MA(const InnerMachine& inner, Variant variant,
                             const BuildOptions& opt = {});

// Standalone bouncer on A-cells (a1) between M-cell walls (00,s0).
MachineSpec ping_pong_standalone();

// "PING_PONG" gives the standalone bouncer; other names build M_A(one-way).
MachineSpec fixture_machine(const std::string& name, Variant variant = Variant::OneWay);

// ---- configurations ----

// Anchored layout: control (m0,q1_init) followed by the given tape cells.
// Open boundary puts the control in the middle, preceded by `left` cells.
Configuration anchored(const MachineSpec& spec, const std::vector<std::uint32_t>& tape,
                       Boundary b = Boundary::Periodic,
                       const std::vector<std::uint32_t>& left = {});

struct Block {
  std::size_t offset;  // lattice index of the block's first site
  Configuration config;  // open-boundary equivalent
  bool has_control;
};

// Splits at control sites; each block runs from a control to the site before
// the next one (cyclically when periodic).
std::vector<Block> split_blocks(const MachineSpec& spec, const Configuration& c);

}  // namespace hca::rtm
