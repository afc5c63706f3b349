#include "hca/rtm.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace hca {

const char* error_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::MalformedConfiguration: return "MalformedConfiguration";
    case ErrorCode::NotReversible: return "NotReversible";
    case ErrorCode::InnerNotReversible: return "InnerNotReversible";
    case ErrorCode::SymbolBudgetExceeded: return "SymbolBudgetExceeded";
    case ErrorCode::TruncatedOrbit: return "TruncatedOrbit";
    case ErrorCode::DimensionGuard: return "DimensionGuard";
    case ErrorCode::PromiseViolated: return "PromiseViolated";
    case ErrorCode::NoValidCodeword: return "NoValidCodeword";
    case ErrorCode::ParamsViolation: return "ParamsViolation";
    case ErrorCode::OraclePromiseViolated: return "OraclePromiseViolated";
    case ErrorCode::InvalidThresholds: return "InvalidThresholds";
    case ErrorCode::PrecisionViolation: return "PrecisionViolation";
    case ErrorCode::ToleranceViolation: return "ToleranceViolation";
    case ErrorCode::GapViolation: return "GapViolation";
    case ErrorCode::DegenerateObservable: return "DegenerateObservable";
    case ErrorCode::OverlapViolation: return "OverlapViolation";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace hca

namespace hca::rtm {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::OneWay: return "one-way";
    case Variant::TwoWay: return "two-way";
    case Variant::IidRepeat: return "iid-repeat";
    case Variant::Plain: return "plain";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "one-way" || s == "one_way" || s == "oneway") return Variant::OneWay;
  if (s == "two-way" || s == "two_way" || s == "twoway") return Variant::TwoWay;
  if (s == "iid-repeat" || s == "iid" || s == "iid_repeat") return Variant::IidRepeat;
  if (s == "plain") return Variant::Plain;
  fail(ErrorCode::InvalidInput, "unknown variant '" + s + "'");
}

const char* boundary_name(Boundary b) { return b == Boundary::Periodic ? "periodic" : "open"; }

Boundary parse_boundary(const std::string& s) {
  if (s == "periodic") return Boundary::Periodic;
  if (s == "open") return Boundary::Open;
  fail(ErrorCode::InvalidInput, "unknown boundary '" + s + "'");
}

const char* terminal_name(Terminal t) {
  switch (t) {
    case Terminal::DeadEnd: return "dead_end";
    case Terminal::Cycle: return "cycle";
    case Terminal::Truncated: return "truncated";
  }
  return "?";
}

// ---------------- SymbolSet ----------------

TapeSymbol SymbolSet::at(std::uint32_t s) const {
  const auto na = static_cast<std::uint32_t>(a_track2.size());
  if (s < na) return {CellKind::A, 0, a_track2[s]};
  const std::uint32_t r = s - na;
  const auto nm = static_cast<std::uint32_t>(m_track2.size());
  return {CellKind::M, static_cast<std::uint8_t>(r / nm), m_track2[r % nm]};
}

std::optional<std::uint32_t> SymbolSet::a(const std::string& t2) const {
  auto it = std::find(a_track2.begin(), a_track2.end(), t2);
  if (it == a_track2.end()) return std::nullopt;
  return static_cast<std::uint32_t>(it - a_track2.begin());
}

std::optional<std::uint32_t> SymbolSet::m(std::uint8_t b, const std::string& t2) const {
  if (b > 3) return std::nullopt;
  auto it = std::find(m_track2.begin(), m_track2.end(), t2);
  if (it == m_track2.end()) return std::nullopt;
  return static_cast<std::uint32_t>(a_track2.size() + b * m_track2.size() +
                                    static_cast<std::size_t>(it - m_track2.begin()));
}

std::uint32_t SymbolSet::a_or_throw(const std::string& t2) const {
  auto r = a(t2);
  if (!r) fail(ErrorCode::InvalidInput, "no A-cell symbol '" + t2 + "'");
  return *r;
}

std::uint32_t SymbolSet::m_or_throw(std::uint8_t b, const std::string& t2) const {
  auto r = m(b, t2);
  if (!r) fail(ErrorCode::InvalidInput, "no M-cell symbol '" + t2 + "'");
  return *r;
}

std::string SymbolSet::tag(std::uint32_t s) const {
  TapeSymbol t = at(s);
  if (t.kind == CellKind::A) return "A:" + t.track2;
  std::string bits = {static_cast<char>('0' + ((t.b >> 1) & 1)), static_cast<char>('0' + (t.b & 1))};
  return "M" + bits + ":" + t.track2;
}

std::optional<std::uint32_t> SymbolSet::parse_tag(const std::string& tag) const {
  auto colon = tag.find(':');
  if (colon == std::string::npos) return std::nullopt;
  std::string head = tag.substr(0, colon), t2 = tag.substr(colon + 1);
  if (head == "A") return a(t2);
  if (head.size() == 3 && head[0] == 'M' && (head[1] == '0' || head[1] == '1') &&
      (head[2] == '0' || head[2] == '1'))
    return m(static_cast<std::uint8_t>((head[1] - '0') * 2 + (head[2] - '0')), t2);
  return std::nullopt;
}

bool SymbolSet::is_box(std::uint32_t s) const { return at(s).track2 == kBox; }

std::vector<std::string> SymbolSet::check() const {
  std::vector<std::string> out;
  if (std::find(a_track2.begin(), a_track2.end(), kBox) == a_track2.end())
    out.push_back("A track 2 lacks the left-end marker");
  if (std::find(m_track2.begin(), m_track2.end(), kBox) == m_track2.end())
    out.push_back("M track 2 lacks the left-end marker");
  if (std::find(m_track2.begin(), m_track2.end(), "s0") == m_track2.end())
    out.push_back("M track 2 lacks s0");
  std::set<std::string> sa(a_track2.begin(), a_track2.end()), sm(m_track2.begin(), m_track2.end());
  if (sa.size() != a_track2.size()) out.push_back("duplicate A track-2 symbol");
  if (sm.size() != m_track2.size()) out.push_back("duplicate M track-2 symbol");
  return out;
}

// ---------------- MachineSpec ----------------

void MachineSpec::finalize() {
  nt_ = symbols.size();
  const std::uint32_t nq = num_states();
  if (state_stage.size() < nq) state_stage.resize(nq);
  state_index_.clear();
  for (std::uint32_t q = 0; q < nq; ++q) state_index_[state_names[q]] = q;
  dir_.assign(nq, 3);
  auto mark = [&](const std::vector<std::uint32_t>& v, int d) {
    for (auto q : v) {
      if (q >= nq) continue;
      dir_[q] = dir_[q] == 3 ? d : 2;
    }
  };
  mark(q_plus, 1);
  mark(q_minus, -1);
  mark(q_zero, 0);
  for (auto& d : dir_)
    if (d == 3) d = 2;
  rules_by_src_.assign(static_cast<std::size_t>(nq) * nt_, -1);
  rules_by_dst_.assign(static_cast<std::size_t>(nq) * nt_, -1);
  bool default_shift = shift_enabled.size() != nq;
  if (default_shift) shift_enabled.assign(nq, 0);
  for (std::size_t r = 0; r < rules.size(); ++r) {
    const Rule& x = rules[r];
    if (x.q >= nq || x.q2 >= nq || x.s >= nt_ || x.s2 >= nt_) continue;
    auto& src = rules_by_src_[static_cast<std::size_t>(x.q) * nt_ + x.s];
    if (src < 0) src = static_cast<std::int32_t>(r);
    auto& dst = rules_by_dst_[static_cast<std::size_t>(x.q2) * nt_ + x.s2];
    if (dst < 0) dst = static_cast<std::int32_t>(r);
    if (default_shift) shift_enabled[x.q2] = 1;
  }
  if (nt_ == 0) fail(ErrorCode::InvalidInput, "empty tape alphabet");
}

std::optional<std::uint32_t> MachineSpec::find_state(const std::string& name) const {
  auto it = state_index_.find(name);
  if (it == state_index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t MachineSpec::state(const std::string& name) const {
  auto q = find_state(name);
  if (!q) fail(ErrorCode::InvalidInput, "unknown state '" + name + "'");
  return *q;
}

std::string MachineSpec::site_tag(std::uint32_t x) const {
  if (!is_control(x)) return symbols.tag(x);
  return (mode(x) == 0 ? "m0:" : "m1:") + state_names[ustate(x)];
}

std::optional<std::uint32_t> MachineSpec::parse_site_tag(const std::string& tag) const {
  if (tag.rfind("m0:", 0) == 0 || tag.rfind("m1:", 0) == 0) {
    auto q = find_state(tag.substr(3));
    if (!q) return std::nullopt;
    return control(*q, tag[1] - '0');
  }
  return symbols.parse_tag(tag);
}

bool MachineSpec::operator==(const MachineSpec& o) const {
  auto sorted = [](std::vector<std::uint32_t> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  auto srules = [](std::vector<Rule> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  return variant == o.variant && inner_name == o.inner_name &&
         symbols.a_track2 == o.symbols.a_track2 && symbols.m_track2 == o.symbols.m_track2 &&
         state_names == o.state_names && state_stage == o.state_stage &&
         sorted(q_plus) == sorted(o.q_plus) && sorted(q_minus) == sorted(o.q_minus) &&
         sorted(q_zero) == sorted(o.q_zero) && shift_enabled == o.shift_enabled &&
         srules(rules) == srules(o.rules) && distinguished == o.distinguished;
}

std::size_t ConfigHash::operator()(const Configuration& c) const noexcept {
  std::size_t h = 1469598103934665603ull ^ static_cast<std::size_t>(c.boundary);
  for (auto x : c.cells) {
    h ^= x + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return h;
}

std::vector<std::size_t> control_sites(const MachineSpec& spec, const Configuration& c) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < c.cells.size(); ++i)
    if (spec.is_control(c.cells[i])) out.push_back(i);
  return out;
}

// ---------------- validation / inversion ----------------

std::string ValidationReport::summary(const MachineSpec& spec) const {
  std::ostringstream os;
  auto rs = [&](const Rule& r) {
    return "(" + spec.state_names[r.q] + "," + spec.symbols.tag(r.s) + ")->(" +
           spec.state_names[r.q2] + "," + spec.symbols.tag(r.s2) + ")";
  };
  for (auto& c : collisions) os << "collision: " << rs(c.a) << " vs " << rs(c.b) << "\n";
  for (auto& c : nondeterminism) os << "nondeterministic: " << rs(c.a) << " vs " << rs(c.b) << "\n";
  for (auto q : direction_violations) os << "state in several shift classes: " << spec.state_names[q] << "\n";
  for (auto q : missing_direction) os << "state without shift class: " << spec.state_names[q] << "\n";
  for (auto& s : structural) os << "structural: " << s << "\n";
  for (auto& s : track1_rewrites) os << "track-1 rewrite: " << s << "\n";
  return os.str();
}

ValidationReport validate_reversible(const MachineSpec& spec) {
  ValidationReport rep;
  rep.structural = spec.symbols.check();
  const std::uint32_t nq = spec.num_states(), nt = spec.symbols.size();
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> by_src, by_dst;
  for (std::size_t r = 0; r < spec.rules.size(); ++r) {
    const Rule& x = spec.rules[r];
    if (x.q >= nq || x.q2 >= nq || x.s >= nt || x.s2 >= nt) {
      rep.structural.push_back("rule " + std::to_string(r) + " out of range");
      continue;
    }
    auto [is, okS] = by_src.emplace(std::make_pair(x.q, x.s), r);
    if (!okS) rep.nondeterminism.push_back({spec.rules[is->second], x});
    auto [id, okD] = by_dst.emplace(std::make_pair(x.q2, x.s2), r);
    if (!okD) rep.collisions.push_back({spec.rules[id->second], x});
    TapeSymbol a = spec.symbols.at(x.s), b = spec.symbols.at(x.s2);
    if (a.kind != b.kind || (a.kind == CellKind::M && a.b != b.b))
      rep.track1_rewrites.push_back(spec.symbols.tag(x.s) + " -> " + spec.symbols.tag(x.s2));
  }
  std::vector<int> count(nq, 0);
  for (const auto* v : {&spec.q_plus, &spec.q_minus, &spec.q_zero})
    for (auto q : *v) {
      if (q >= nq) {
        rep.structural.push_back("shift class names unknown state");
        continue;
      }
      ++count[q];
    }
  for (std::uint32_t q = 0; q < nq; ++q) {
    if (count[q] > 1) rep.direction_violations.push_back(q);
    if (count[q] == 0) rep.missing_direction.push_back(q);
  }
  return rep;
}

MachineSpec invert(const MachineSpec& spec) {
  auto rep = validate_reversible(spec);
  if (!rep.empty()) fail(ErrorCode::NotReversible, "machine is not reversible:\n" + rep.summary(spec));
  MachineSpec inv = spec;
  inv.rules.clear();
  for (const Rule& r : spec.rules) inv.rules.push_back({r.q2, r.s2, r.q, r.s});
  std::swap(inv.q_plus, inv.q_minus);
  inv.finalize();
  return inv;
}

Configuration to_inverse_frame(const MachineSpec& spec, const Configuration& c) {
  Configuration out = c;
  for (auto& x : out.cells)
    if (spec.is_control(x)) x = spec.control(spec.ustate(x), 1 - spec.mode(x));
  return out;
}

// ---------------- stepping ----------------

StepStatus step_at(const MachineSpec& spec, std::vector<std::uint32_t>& cells, Boundary bd,
                   std::size_t& pos, Delta* delta) {
  const std::size_t n = cells.size();
  const std::uint32_t x = cells[pos];
  const std::uint32_t q = spec.ustate(x);
  auto right = [&](std::size_t p) -> std::optional<std::size_t> {
    if (p + 1 < n) return p + 1;
    if (bd == Boundary::Periodic) return 0;
    return std::nullopt;
  };
  auto left = [&](std::size_t p) -> std::optional<std::size_t> {
    if (p > 0) return p - 1;
    if (bd == Boundary::Periodic) return n - 1;
    return std::nullopt;
  };
  if (spec.mode(x) == 0) {
    auto j = right(pos);
    if (!j || *j == pos) return StepStatus::NoSuccessor;
    const std::uint32_t s = cells[*j];
    if (spec.is_control(s)) return StepStatus::NoSuccessor;
    if (spec.dir(q) == 1 && spec.symbols.is_box(s)) return StepStatus::NoSuccessor;
    const std::int32_t r = spec.rule_for(q, s);
    if (r < 0) return StepStatus::NoSuccessor;
    const Rule& rule = spec.rules[static_cast<std::size_t>(r)];
    const std::uint32_t nx = spec.control(rule.q2, 1);
    if (delta) *delta = {static_cast<std::uint32_t>(pos), x, nx, static_cast<std::uint32_t>(*j), s, rule.s2};
    cells[pos] = nx;
    cells[*j] = rule.s2;
    return StepStatus::Ok;
  }
  if (!spec.can_shift(q)) return StepStatus::NoSuccessor;
  const int d = spec.dir(q);
  const std::uint32_t nx = spec.control(q, 0);
  if (d == 0) {
    if (delta) *delta = {static_cast<std::uint32_t>(pos), x, nx, static_cast<std::uint32_t>(pos), x, nx};
    cells[pos] = nx;
    return StepStatus::Ok;
  }
  if (d != 1 && d != -1) return StepStatus::NoSuccessor;
  auto j = d == 1 ? right(pos) : left(pos);
  if (!j || *j == pos) return StepStatus::NoSuccessor;
  const std::uint32_t s = cells[*j];
  if (spec.is_control(s)) return StepStatus::NoSuccessor;
  if (delta) *delta = {static_cast<std::uint32_t>(pos), x, s, static_cast<std::uint32_t>(*j), s, nx};
  cells[pos] = s;
  cells[*j] = nx;
  pos = *j;
  return StepStatus::Ok;
}

namespace {

std::size_t single_control(const MachineSpec& spec, const Configuration& c) {
  if (c.cells.size() < 2) fail(ErrorCode::MalformedConfiguration, "lattice needs at least two sites");
  std::size_t pos = c.cells.size(), count = 0;
  for (std::size_t i = 0; i < c.cells.size(); ++i) {
    if (c.cells[i] >= spec.site_dim())
      fail(ErrorCode::MalformedConfiguration, "site value out of range at " + std::to_string(i));
    if (spec.is_control(c.cells[i])) {
      pos = i;
      ++count;
    }
  }
  if (count == 0) fail(ErrorCode::MalformedConfiguration, "no control site");
  if (count > 1) fail(ErrorCode::MalformedConfiguration, "more than one control site");
  return pos;
}

}  // namespace

std::optional<Configuration> step(const MachineSpec& spec, const Configuration& c) {
  std::size_t pos = single_control(spec, c);
  Configuration out = c;
  if (step_at(spec, out.cells, out.boundary, pos) == StepStatus::NoSuccessor) return std::nullopt;
  return out;
}

WalkResult walk_orbit(const MachineSpec& spec, const Configuration& c, std::uint64_t max_steps,
                      const std::function<void(std::uint64_t, const Delta&,
                                               const std::vector<std::uint32_t>&)>& f) {
  std::size_t pos = single_control(spec, c);
  std::vector<std::uint32_t> cells = c.cells;
  // Incremental Hamming distance to x(1): in a reversible machine the first
  // repeated configuration is x(1) itself.
  std::uint64_t diff = 0;
  Delta d{};
  for (std::uint64_t s = 0; s < max_steps; ++s) {
    if (step_at(spec, cells, c.boundary, pos, &d) == StepStatus::NoSuccessor)
      return {Terminal::DeadEnd, s + 1};
    auto upd = [&](std::uint32_t site, std::uint32_t oldv, std::uint32_t newv) {
      const std::uint32_t init = c.cells[site];
      diff -= (oldv != init);
      diff += (newv != init);
    };
    upd(d.i, d.oi, d.xi);
    if (d.k != d.i) upd(d.k, d.ok, d.xk);
    if (f) f(s + 1, d, cells);
    if (diff == 0) return {Terminal::Cycle, s + 1};
  }
  return {Terminal::Truncated, max_steps + 1};
}

Orbit run_orbit(SpecPtr spec, const Configuration& c, std::uint64_t max_steps) {
  Orbit o;
  o.machine = spec;
  o.initial = c;
  auto res = walk_orbit(*spec, c, max_steps,
                        [&](std::uint64_t, const Delta& d, const std::vector<std::uint32_t>&) {
                          o.deltas.push_back(d);
                        });
  o.terminal = res.terminal;
  return o;
}

void Orbit::for_each(const std::function<void(std::uint64_t, const Configuration&)>& f) const {
  Configuration cur = initial;
  const std::uint64_t J = length();
  f(1, cur);
  for (std::uint64_t j = 1; j < J; ++j) {
    const Delta& d = deltas[j - 1];
    cur.cells[d.i] = d.xi;
    cur.cells[d.k] = d.xk;
    f(j + 1, cur);
  }
}

std::vector<Configuration> Orbit::states() const {
  std::vector<Configuration> out;
  out.reserve(length());
  for_each([&](std::uint64_t, const Configuration& c) { out.push_back(c); });
  return out;
}

Configuration Orbit::at(std::uint64_t j) const {
  if (j < 1 || j > length()) fail(ErrorCode::InvalidInput, "orbit index out of range");
  Configuration cur = initial;
  for (std::uint64_t t = 1; t < j; ++t) {
    const Delta& d = deltas[t - 1];
    cur.cells[d.i] = d.xi;
    cur.cells[d.k] = d.xk;
  }
  return cur;
}

Configuration run_backward(const MachineSpec& inverse, const MachineSpec& spec,
                           const Configuration& c, std::uint64_t steps) {
  Configuration cur = to_inverse_frame(spec, c);
  std::size_t pos = single_control(inverse, cur);
  for (std::uint64_t s = 0; s < steps; ++s)
    if (step_at(inverse, cur.cells, cur.boundary, pos) == StepStatus::NoSuccessor) break;
  return to_inverse_frame(inverse, cur);
}

// ---------------- amplification statistics ----------------

namespace {

struct Counter {
  const MachineSpec& spec;
  std::uint32_t sym;
  std::int64_t n = 0;
  void add(std::uint32_t x, int sign) {
    if (x == sym) n += sign;
  }
};

AmplificationStats finish(std::uint64_t sum, std::uint64_t J, std::uint32_t L) {
  AmplificationStats st;
  st.sum = sum;
  st.average = Rational(BigInt(sum), BigInt(J) * BigInt(L + 1));
  st.average_f = to_double(st.average);
  return st;
}

}  // namespace

AmplificationStats amplification_stats(const Orbit& orbit, const std::string& a_symbol) {
  if (orbit.terminal == Terminal::Truncated)
    fail(ErrorCode::TruncatedOrbit, "amplification statistics need a complete orbit");
  const MachineSpec& spec = *orbit.machine;
  auto sym = spec.symbols.a(a_symbol);
  std::vector<std::uint64_t> counts;
  std::uint64_t sum = 0;
  if (!sym) {
    counts.assign(orbit.length(), 0);
  } else {
    Counter ctr{spec, *sym};
    for (auto x : orbit.initial.cells) ctr.add(x, 1);
    const std::uint64_t J = orbit.length();
    counts.reserve(J);
    counts.push_back(static_cast<std::uint64_t>(ctr.n));
    for (std::uint64_t j = 1; j < J; ++j) {
      const Delta& d = orbit.deltas[j - 1];
      ctr.add(d.oi, -1);
      ctr.add(d.xi, 1);
      if (d.k != d.i) {
        ctr.add(d.ok, -1);
        ctr.add(d.xk, 1);
      }
      counts.push_back(static_cast<std::uint64_t>(ctr.n));
    }
    for (auto v : counts) sum += v;
  }
  AmplificationStats st = finish(sum, orbit.length(), orbit.initial.L());
  st.counts = std::move(counts);
  return st;
}

AmplificationStats amplification_stats_stream(const MachineSpec& spec, const Configuration& c,
                                              const std::string& a_symbol,
                                              std::uint64_t max_steps, Terminal* terminal) {
  auto sym = spec.symbols.a(a_symbol);
  Counter ctr{spec, sym ? *sym : spec.site_dim()};
  for (auto x : c.cells) ctr.add(x, 1);
  std::uint64_t sum = static_cast<std::uint64_t>(ctr.n);
  std::int64_t last = ctr.n;
  auto res = walk_orbit(spec, c, max_steps,
                        [&](std::uint64_t, const Delta& d, const std::vector<std::uint32_t>&) {
                          ctr.add(d.oi, -1);
                          ctr.add(d.xi, 1);
                          if (d.k != d.i) {
                            ctr.add(d.ok, -1);
                            ctr.add(d.xk, 1);
                          }
                          last = ctr.n;
                          sum += static_cast<std::uint64_t>(ctr.n);
                        });
  if (terminal) *terminal = res.terminal;
  if (res.terminal == Terminal::Truncated)
    fail(ErrorCode::TruncatedOrbit, "orbit exceeded the step budget");
  // The closing step of a cycle returns to x(1), already counted.
  if (res.terminal == Terminal::Cycle) sum -= static_cast<std::uint64_t>(last);
  return finish(sum, res.length, c.L());
}

// ---------------- configurations ----------------

Configuration anchored(const MachineSpec& spec, const std::vector<std::uint32_t>& tape, Boundary b,
                       const std::vector<std::uint32_t>& left) {
  Configuration c;
  c.boundary = b;
  c.cells = left;
  c.cells.push_back(spec.control(spec.state("q1_init"), 0));
  c.cells.insert(c.cells.end(), tape.begin(), tape.end());
  return c;
}

std::vector<Block> split_blocks(const MachineSpec& spec, const Configuration& c) {
  std::vector<Block> out;
  auto ctl = control_sites(spec, c);
  const std::size_t n = c.cells.size();
  auto slice = [&](std::size_t from, std::size_t len, Boundary b, bool has) {
    Block blk{from, {{}, b}, has};
    blk.config.cells.reserve(len);
    for (std::size_t t = 0; t < len; ++t) blk.config.cells.push_back(c.cells[(from + t) % n]);
    out.push_back(std::move(blk));
  };
  if (ctl.empty()) {
    slice(0, n, c.boundary, false);
    return out;
  }
  if (c.boundary == Boundary::Periodic) {
    if (ctl.size() == 1) {
      slice(ctl[0], n, Boundary::Periodic, true);
      return out;
    }
    for (std::size_t r = 0; r < ctl.size(); ++r) {
      std::size_t next = r + 1 < ctl.size() ? ctl[r + 1] : ctl[0] + n;
      slice(ctl[r], next - ctl[r], Boundary::Open, true);
    }
    return out;
  }
  if (ctl[0] > 0) slice(0, ctl[0], Boundary::Open, false);
  for (std::size_t r = 0; r < ctl.size(); ++r) {
    std::size_t next = r + 1 < ctl.size() ? ctl[r + 1] : n;
    slice(ctl[r], next - ctl[r], Boundary::Open, true);
  }
  return out;
}

}  // namespace hca::rtm
