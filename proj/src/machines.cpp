#include <algorithm>
#include <set>

#include "hca/rtm.hpp"

namespace hca::rtm {

// ---------------- inner fixtures ----------------

namespace {
const std::vector<std::string> kDecodeSyms = {"s0", "d0", "d1"};
}

InnerMachine halt_now(int k) {
  if (k < 0) fail(ErrorCode::InvalidInput, "HALT_NOW sweep length must be >= 0");
  InnerMachine m;
  m.name = "HALT_NOW:" + std::to_string(k);
  if (k == 0) {
    m.states = {"s", "h"};
    m.shift = {{"s", 0}, {"h", 0}};
    m.start = "s";
    m.halt = "h";
    m.rules.push_back({"s", kBox, "h", kBox});
    return m;
  }
  for (int i = 0; i < k; ++i) {
    m.states.push_back("s" + std::to_string(i));
    m.shift["s" + std::to_string(i)] = 1;
  }
  m.states.push_back("h");
  m.shift["h"] = -1;
  m.start = "s0";
  m.halt = "h";
  for (const auto& s : kDecodeSyms) m.symbols.push_back("h_" + s);
  for (int i = 0; i < k; ++i) {
    const std::string q = "s" + std::to_string(i);
    for (const auto& s : kDecodeSyms) {
      if (i + 1 < k)
        m.rules.push_back({q, s, "s" + std::to_string(i + 1), s});
      else
        m.rules.push_back({q, s, "h", "h_" + s});
    }
  }
  return m;
}

InnerMachine ping_pong_inner() {
  InnerMachine m;
  m.name = "PING_PONG";
  m.states = {"R2", "Lb", "R"};
  m.shift = {{"R2", 1}, {"Lb", -1}, {"R", 1}};
  m.start = "R2";
  for (const auto& s : kDecodeSyms) m.symbols.push_back("p_" + s);
  for (const auto& s : kDecodeSyms) m.symbols.push_back("pp_" + s);
  for (const auto& s : kDecodeSyms) {
    m.rules.push_back({"R2", s, "Lb", "pp_" + s});
    m.rules.push_back({"Lb", "p_" + s, "Lb", "p_" + s});
    m.rules.push_back({"R", "p_" + s, "R", "p_" + s});
    m.rules.push_back({"R", "pp_" + s, "R2", "p_" + s});
  }
  m.rules.push_back({"Lb", kBox, "R", kBox});
  return m;
}

InnerMachine counter(int k) {
  if (k < 0 || k > 24) fail(ErrorCode::InvalidInput, "COUNTER exponent must be in [0, 24]");
  InnerMachine m;
  m.name = "COUNTER:" + std::to_string(k);
  const std::uint32_t n = 1u << k;
  for (std::uint32_t i = 0; i < n; ++i) {
    m.states.push_back("c" + std::to_string(i));
    m.shift["c" + std::to_string(i)] = 0;
  }
  m.states.push_back("h");
  m.shift["h"] = 0;
  m.start = "c0";
  m.halt = "h";
  for (std::uint32_t i = 0; i < n; ++i)
    m.rules.push_back({"c" + std::to_string(i), kBox, i + 1 < n ? "c" + std::to_string(i + 1) : "h", kBox});
  return m;
}

InnerMachine inner_fixture(const std::string& name) {
  auto colon = name.find(':');
  std::string head = name.substr(0, colon);
  int arg = -1;
  if (colon != std::string::npos) {
    try {
      arg = std::stoi(name.substr(colon + 1));
    } catch (...) {
      fail(ErrorCode::InvalidInput, "bad fixture argument in '" + name + "'");
    }
  }
  if (head == "HALT_NOW") return halt_now(arg < 0 ? 1 : arg);
  if (head == "PING_PONG") return ping_pong_inner();
  if (head == "COUNTER") return counter(arg < 0 ? 4 : arg);
  fail(ErrorCode::NotFound, "unknown fixture '" + name + "'");
}

// ---------------- builder ----------------

namespace {

void check_inner(const InnerMachine& in) {
  std::set<std::string> states(in.states.begin(), in.states.end());
  if (states.size() != in.states.size()) fail(ErrorCode::InnerNotReversible, "duplicate inner state");
  std::set<std::string> syms(in.symbols.begin(), in.symbols.end());
  syms.insert(kDecodeSyms.begin(), kDecodeSyms.end());
  syms.insert(kBox);
  if (!states.count(in.start)) fail(ErrorCode::InnerNotReversible, "unknown start state");
  if (!in.halt.empty() && !states.count(in.halt))
    fail(ErrorCode::InnerNotReversible, "unknown halt state");
  for (const auto& q : in.states) {
    auto it = in.shift.find(q);
    if (it == in.shift.end() || it->second < -1 || it->second > 1)
      fail(ErrorCode::InnerNotReversible, "state " + q + " lacks a shift class");
  }
  if (!in.halt.empty() && in.shift.at(in.halt) == 1)
    fail(ErrorCode::InnerNotReversible, "halt state must not move right");
  std::set<std::pair<std::string, std::string>> src, dst;
  for (const auto& r : in.rules) {
    if (!states.count(r.q) || !states.count(r.q2))
      fail(ErrorCode::InnerNotReversible, "rule names an unknown state");
    if (!syms.count(r.sym) || !syms.count(r.sym2))
      fail(ErrorCode::InnerNotReversible, "rule names an unknown symbol");
    if ((r.sym == kBox) != (r.sym2 == kBox))
      fail(ErrorCode::InnerNotReversible, "the left-end marker must be preserved");
    if (r.q == in.halt) fail(ErrorCode::InnerNotReversible, "halt state has outgoing rules");
    if (!src.insert({r.q, r.sym}).second)
      fail(ErrorCode::InnerNotReversible, "inner machine is nondeterministic at " + r.q + "," + r.sym);
    if (!dst.insert({r.q2, r.sym2}).second)
      fail(ErrorCode::InnerNotReversible, "inner machine is not injective at " + r.q2 + "," + r.sym2);
    if (r.sym == kBox && r.q2 == in.start)
      fail(ErrorCode::InnerNotReversible, "rule re-enters the start state on the left end");
  }
}

struct Builder {
  MachineSpec spec;
  BuildOptions opt;
  std::map<std::string, std::uint32_t> index;
  std::vector<int> dirs;

  std::uint32_t add(const std::string& name, const std::string& stage, int dir) {
    if (index.count(name)) fail(ErrorCode::Internal, "duplicate state " + name);
    auto q = static_cast<std::uint32_t>(spec.state_names.size());
    if (q + 1 > opt.max_states)
      fail(ErrorCode::SymbolBudgetExceeded,
           "state budget exceeded (" + std::to_string(opt.max_states) + ")");
    index[name] = q;
    spec.state_names.push_back(name);
    spec.state_stage.push_back(stage);
    (dir > 0 ? spec.q_plus : dir < 0 ? spec.q_minus : spec.q_zero).push_back(q);
    dirs.push_back(dir);
    return q;
  }
  void rule(std::uint32_t q, std::uint32_t s, std::uint32_t q2, std::uint32_t s2) {
    spec.rules.push_back({q, s, q2, s2});
  }
  std::uint32_t A(const std::string& t) const { return spec.symbols.a_or_throw(t); }
  std::uint32_t M(std::uint8_t b, const std::string& t) const { return spec.symbols.m_or_throw(b, t); }
  // The left-end marker on the A-cell and on each M-cell pair value.
  std::vector<std::uint32_t> boxes(const std::string& t = kBox) const {
    std::vector<std::uint32_t> v{A(t)};
    for (std::uint8_t b = 0; b < 4; ++b) v.push_back(M(b, t));
    return v;
  }
  std::vector<std::uint32_t> a_work() const {
    std::vector<std::uint32_t> v;
    for (const auto& t : spec.symbols.a_track2)
      if (t.rfind("box", 0) != 0) v.push_back(A(t));
    return v;
  }
  std::vector<std::uint32_t> m_work() const {
    std::vector<std::uint32_t> v;
    for (std::uint8_t b = 0; b < 4; ++b)
      for (const auto& t : spec.symbols.m_track2)
        if (t.rfind("box", 0) != 0) v.push_back(M(b, t));
    return v;
  }
};

struct Forward {
  std::uint32_t q2init = 0, q2back = 0, start = 0;
  std::optional<std::uint32_t> halt;
  std::vector<std::uint32_t> states;  // every state of stages 2 and 3
  std::size_t rule_begin = 0, rule_end = 0;
};

// Stages 2 and 3: unary marker decode, optional delay chain, inner machine.
Forward add_forward(Builder& B, const InnerMachine& in, const std::string& sfx, bool halt_sweep) {
  Forward F;
  F.q2init = B.add("q2_init" + sfx, "2" + sfx, 1);
  F.q2back = B.add("q2_back" + sfx, "2" + sfx, -1);
  F.states = {F.q2init, F.q2back};
  std::vector<std::uint32_t> pads;
  for (std::uint32_t i = 0; i < B.opt.pad; ++i)
    pads.push_back(B.add("pad" + sfx + "_" + std::to_string(i), "3" + sfx, 0));
  F.states.insert(F.states.end(), pads.begin(), pads.end());
  std::map<std::string, std::uint32_t> iq;
  for (const auto& q : in.states) {
    iq[q] = B.add("M" + sfx + ":" + q, "3" + sfx, in.shift.at(q));
    F.states.push_back(iq[q]);
  }
  F.start = iq.at(in.start);
  if (!in.halt.empty()) F.halt = iq.at(in.halt);

  F.rule_begin = B.spec.rules.size();
  const auto aw = B.a_work();
  for (auto a : aw) {
    B.rule(F.q2init, a, F.q2init, a);
    B.rule(F.q2back, a, F.q2back, a);
  }
  for (std::uint8_t b = 0; b < 4; ++b) {
    if ((b & 1) == 0)
      B.rule(F.q2init, B.M(b, "s0"), F.q2init, B.M(b, "d0"));
    else
      B.rule(F.q2init, B.M(b, "s0"), F.q2back, B.M(b, "d1"));
    B.rule(F.q2back, B.M(b, "d0"), F.q2back, B.M(b, "d0"));
  }
  const auto boxes = B.boxes();
  std::vector<std::uint32_t> chain = {F.q2back};
  chain.insert(chain.end(), pads.begin(), pads.end());
  chain.push_back(F.start);
  for (std::size_t i = 0; i + 1 < chain.size(); ++i)
    for (auto x : boxes) B.rule(chain[i], x, chain[i + 1], x);

  for (const auto& r : in.rules) {
    if (r.sym == kBox) {
      for (auto x : boxes) B.rule(iq.at(r.q), x, iq.at(r.q2), x);
    } else {
      for (std::uint8_t b = 0; b < 4; ++b) B.rule(iq.at(r.q), B.M(b, r.sym), iq.at(r.q2), B.M(b, r.sym2));
    }
  }
  for (const auto& q : in.states) {
    if (q == in.halt || in.shift.at(q) == 0) continue;
    for (auto a : aw) B.rule(iq.at(q), a, iq.at(q), a);
  }
  if (halt_sweep && F.halt && in.shift.at(in.halt) == -1) {
    std::set<std::uint32_t> written;
    for (std::size_t r = F.rule_begin; r < B.spec.rules.size(); ++r)
      if (B.spec.rules[r].q2 == *F.halt) written.insert(B.spec.rules[r].s2);
    auto sweep = aw;
    auto mw = B.m_work();
    sweep.insert(sweep.end(), mw.begin(), mw.end());
    for (auto s : sweep)
      if (!written.count(s)) B.rule(*F.halt, s, *F.halt, s);
  }
  F.rule_end = B.spec.rules.size();
  return F;
}

// Bennett turnaround: reverse copies of the forward states retrace stages 2
// and 3, restoring the tape. Returns the reverse copy of q2_init.
std::uint32_t add_reverse(Builder& B, const Forward& F, const std::string& sfx) {
  std::map<std::uint32_t, std::uint32_t> rho;
  for (auto q : F.states)
    rho[q] = B.add("R" + sfx + ":" + B.spec.state_names[q], "3r" + sfx, -B.dirs[q]);
  const auto nt = B.spec.symbols.size();
  for (std::uint32_t s = 0; s < nt; ++s) B.rule(*F.halt, s, rho.at(*F.halt), s);
  for (std::size_t r = F.rule_begin; r < F.rule_end; ++r) {
    const Rule x = B.spec.rules[r];
    B.rule(rho.at(x.q2), x.s2, rho.at(x.q), x.s);
  }
  return rho.at(F.q2init);
}

}  // namespace

MachineSpec build_machine_MA(const InnerMachine& inner, Variant variant, const BuildOptions& opt) {
  if (variant == Variant::Plain) fail(ErrorCode::InvalidInput, "M_A needs an amplification variant");
  check_inner(inner);
  Builder B;
  B.opt = opt;
  MachineSpec& sp = B.spec;
  sp.variant = variant;
  sp.inner_name = inner.name;
  switch (variant) {
    case Variant::OneWay: sp.symbols.a_track2 = {"a1", "a2", kBox}; break;
    case Variant::TwoWay: sp.symbols.a_track2 = {"a1", "a2", "a3", kBox, kBox2, kBox3}; break;
    default: sp.symbols.a_track2 = {"a1", "a2", "a3", kBox}; break;
  }
  sp.symbols.m_track2 = {kBox, "s0", "d0", "d1"};
  for (const auto& s : inner.symbols) sp.symbols.m_track2.push_back(s);
  if (variant == Variant::TwoWay) {
    sp.symbols.m_track2.push_back(kBox2);
    sp.symbols.m_track2.push_back(kBox3);
  }
  if (sp.symbols.m_track2.size() > opt.max_m_symbols)
    fail(ErrorCode::SymbolBudgetExceeded, "M-cell track-2 alphabet exceeds the budget");

  const std::uint32_t q1 = B.add("q1_init", "1", 0);
  const bool anchored_variant = variant != Variant::IidRepeat;
  Forward F = add_forward(B, inner, "", anchored_variant);
  B.rule(q1, B.A("a1"), F.q2init, B.A(kBox));
  for (std::uint8_t b = 0; b < 4; ++b) B.rule(q1, B.M(b, "s0"), F.q2init, B.M(b, kBox));

  sp.distinguished["q1_init"] = q1;
  sp.distinguished["q2_init"] = F.q2init;
  sp.distinguished["q2_back"] = F.q2back;
  sp.distinguished["q3_init"] = F.start;
  if (F.halt) sp.distinguished["q3_halt"] = *F.halt;

  const auto boxes = B.boxes();
  const auto mw = B.m_work();
  if (F.halt && variant == Variant::OneWay) {
    const std::uint32_t q4 = B.add("q4", "4", 1);
    sp.distinguished["q4"] = q4;
    for (auto x : boxes) B.rule(*F.halt, x, q4, x);
    B.rule(q4, B.A("a1"), q4, B.A("a2"));
    for (auto m : mw) B.rule(q4, m, q4, m);
  } else if (F.halt && variant == Variant::TwoWay) {
    const std::uint32_t q40 = B.add("q4_0", "4", 1), q41 = B.add("q4_1", "4", 1),
                        q42 = B.add("q4_2", "4", -1), q43 = B.add("q4_3", "4", -1);
    sp.distinguished["q4_0"] = q40;
    sp.distinguished["q4_1"] = q41;
    sp.distinguished["q4_2"] = q42;
    sp.distinguished["q4_3"] = q43;
    const auto box2 = B.boxes(kBox2), box3 = B.boxes(kBox3);
    for (std::size_t i = 0; i < boxes.size(); ++i) B.rule(*F.halt, boxes[i], q41, box3[i]);
    const auto a1 = B.A("a1"), a2 = B.A("a2"), a3 = B.A("a3");
    B.rule(q40, a1, q40, a1);
    B.rule(q40, a2, q40, a2);
    B.rule(q40, a3, q41, a2);
    B.rule(q41, a1, q42, a3);
    B.rule(q42, a1, q42, a1);
    B.rule(q42, a2, q42, a2);
    B.rule(q42, a3, q43, a2);
    B.rule(q43, a1, q40, a3);
    for (std::size_t i = 0; i < box2.size(); ++i) {
      B.rule(q40, box2[i], q40, box2[i]);
      B.rule(q42, box2[i], q42, box2[i]);
      B.rule(q42, box3[i], q43, box2[i]);
    }
    for (auto q : {q40, q41, q42, q43})
      for (auto m : mw) B.rule(q, m, q, m);
  } else if (F.halt && variant == Variant::IidRepeat) {
    const std::uint32_t acc = add_reverse(B, F, "");
    const std::uint32_t q40 = B.add("q4_0", "4", 1), q41 = B.add("q4_1", "4", 1),
                        q42 = B.add("q4_2", "4", -1);
    Forward Fp = add_forward(B, inner, "'", false);
    const std::uint32_t accp = add_reverse(B, Fp, "'");
    sp.distinguished["q3_acc"] = acc;
    sp.distinguished["q3_acc'"] = accp;
    sp.distinguished["q2_init'"] = Fp.q2init;
    sp.distinguished["q4_0"] = q40;
    sp.distinguished["q4_1"] = q41;
    sp.distinguished["q4_2"] = q42;
    for (auto x : boxes) {
      B.rule(acc, x, q41, x);
      B.rule(accp, x, q40, x);
      B.rule(q42, x, Fp.q2init, x);
    }
    const auto a1 = B.A("a1"), a2 = B.A("a2"), a3 = B.A("a3");
    B.rule(q40, a2, q40, a2);
    B.rule(q40, a3, q41, a2);
    B.rule(q41, a1, q42, a3);
    B.rule(q42, a2, q42, a2);
    for (auto q : {q40, q41, q42})
      for (auto m : mw) B.rule(q, m, q, m);
  }
  sp.finalize();
  auto rep = validate_reversible(sp);
  if (!rep.empty())
    fail(ErrorCode::InnerNotReversible, "staged machine is not reversible:\n" + rep.summary(sp));
  return sp;
}

MachineSpec ping_pong_standalone() {
  MachineSpec sp;
  sp.variant = Variant::Plain;
  sp.inner_name = "PING_PONG";
  sp.symbols.a_track2 = {"a1", kBox};
  sp.symbols.m_track2 = {kBox, "s0"};
  sp.state_names = {"R", "Lf"};
  sp.state_stage = {"0", "0"};
  sp.q_plus = {0};
  sp.q_minus = {1};
  const auto a1 = *sp.symbols.a("a1"), w = *sp.symbols.m(0, "s0");
  sp.rules = {{0, a1, 0, a1}, {0, w, 1, w}, {1, a1, 1, a1}, {1, w, 0, w}};
  sp.distinguished = {{"R", 0}, {"Lf", 1}};
  sp.finalize();
  return sp;
}

MachineSpec fixture_machine(const std::string& name, Variant variant) {
  if (name == "PING_PONG" && variant == Variant::Plain) return ping_pong_standalone();
  if (name == "PING_PONG_STANDALONE") return ping_pong_standalone();
  return build_machine_MA(inner_fixture(name), variant);
}

}  // namespace hca::rtm
