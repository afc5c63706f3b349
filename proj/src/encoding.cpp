#include "hca/encoding.hpp"

#include <cmath>
#include <numbers>
#include <thread>

#include <fmt/format.h>

#include "hca/io.hpp"

namespace hca::enc {

namespace {

using nlohmann::json;

BigInt pow_big(std::uint64_t b, unsigned e) {
  BigInt r = 1;
  for (unsigned i = 0; i < e; ++i) r *= b;
  return r;
}

BigInt floor_nonneg(const Rational& r) {
  return boost::multiprecision::numerator(r) / boost::multiprecision::denominator(r);
}

Rational parse_rational(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (auto dot = s.find('.'); dot != std::string::npos) {
      // Decimal literal, read exactly.
      const bool neg = !s.empty() && s[0] == '-';
      std::string digits = s.substr(neg ? 1 : 0);
      dot = digits.find('.');
      std::string frac = digits.substr(dot + 1);
      // cpp_int reads a leading 0 as octal.
      auto dec = [](std::string t) {
        t.erase(0, std::min(t.find_first_not_of('0'), t.size()));
        return t.empty() ? BigInt(0) : BigInt(t);
      };
      BigInt den = pow_big(10, static_cast<unsigned>(frac.size()));
      BigInt num = dec(digits.substr(0, dot)) * den + dec(frac);
      Rational r(num, den);
      return neg ? Rational(-r) : r;
    }
    return Rational(s);
  }
  if (j.is_number_integer()) return Rational(j.get<std::int64_t>());
  if (j.is_number()) return Rational(j.get<double>());
  fail(ErrorCode::InvalidInput, "expected a rational number");
}

void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t, std::size_t, unsigned)>& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    fn(0, n, 0);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        fn(n * t / threads, n * (t + 1) / threads, t);
      } catch (...) {
        errs[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                   static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(ss);
}

// |M/cells - alpha| < cells^{-1/3}, decided exactly.
bool rate_ok(std::uint64_t m, std::uint64_t cells, const Rational& alpha) {
  if (cells == 0) return false;
  Rational dev = Rational(m) - alpha * cells;
  if (dev < 0) dev = -dev;
  return dev * dev * dev < Rational(cells) * cells;
}

std::uint32_t e0_of(const rtm::MachineSpec& spec) {
  auto q = spec.find_state("q1_init");
  if (!q) fail(ErrorCode::NotFound, "machine lacks q1_init");
  return spec.control(*q, 0);
}

}  // namespace

// ---------------- input ----------------

std::array<double, 2> InputEncoding::amp_b1() const {
  const double b = to_double(beta);
  return {std::sqrt(1.0 - b), std::sqrt(b)};
}

std::array<double, 2> InputEncoding::amp_b2() const {
  const double m = to_double(marker);
  return {std::sqrt(1.0 - m), std::sqrt(m)};
}

Rational beta_of(const std::string& v) {
  Rational b = 0, w(1, 2);
  for (char ch : v) {
    if (ch != '0' && ch != '1') fail(ErrorCode::InvalidInput, fmt::format("'{}' is not a bit string", v));
    if (ch == '1') b += w;
    w /= 2;
  }
  return b;
}

InputEncoding encode_input(const std::string& v) {
  if (v.empty()) fail(ErrorCode::InvalidInput, "empty input string");
  InputEncoding e;
  e.beta = beta_of(v);
  if (v.back() != '1') fail(ErrorCode::PromiseViolated, fmt::format("input '{}' does not end in 1", v));
  e.v = v;
  e.n = static_cast<std::uint32_t>(v.size());
  e.marker = Rational(1, BigInt(e.n) * e.n);
  return e;
}

Rational alpha_from_eps(const Rational& eps1) {
  Rational q = eps1 / 4;
  return q * q;
}

const char* mode_name(Mode m) { return m == Mode::Anchored ? "anchored" : "iid"; }

Mode parse_mode(const std::string& s) {
  if (s == "anchored") return Mode::Anchored;
  if (s == "iid") return Mode::Iid;
  fail(ErrorCode::InvalidInput, fmt::format("unknown ensemble mode '{}'", s));
}

std::vector<std::string> EnsembleParams::violations(const InputEncoding& in) const {
  std::vector<std::string> out;
  const BigInt n = in.n;
  if (alpha <= 0 || alpha > 1) {
    out.push_back(fmt::format("alpha = {} outside (0, 1]", io::rational_string(alpha)));
  } else {
    Rational n0 = 4 / alpha;
    if (Rational(n) < n0)
      out.push_back(fmt::format("n = {} < n0 = 4/alpha = {}", in.n, io::rational_string(n0)));
  }
  if (mode == Mode::Anchored) {
    BigInt L0 = 2 * n * n * n;
    if (BigInt(L) < L0) out.push_back(fmt::format("L = {} < L0 = 2n^3 = {}", L, L0.str()));
  } else {
    if (l == 0) {
      out.push_back("block scale l must be positive");
    } else {
      BigInt l11 = pow_big(l, 11);
      if (BigInt(L) + 1 < l11) out.push_back(fmt::format("L+1 = {} < l^11 = {}", L + 1, l11.str()));
      BigInt n6 = pow_big(in.n, 6);
      if (BigInt(l) < n6) out.push_back(fmt::format("l = {} < n^6 = {}", l, n6.str()));
    }
  }
  return out;
}

json EnsembleParams::to_json() const {
  json j = {{"mode", mode_name(mode)},
            {"L", L},
            {"alpha", io::rational_string(alpha)},
            {"override", override_checks}};
  if (mode == Mode::Iid) j["l"] = l;
  return j;
}

EnsembleParams EnsembleParams::from_json(const json& j) {
  EnsembleParams p;
  p.mode = parse_mode(j.value("mode", std::string("anchored")));
  p.L = j.at("L").get<std::uint64_t>();
  p.l = j.value("l", std::uint64_t{0});
  p.alpha = parse_rational(j.at("alpha"));
  p.override_checks = j.value("override", false);
  return p;
}

// ---------------- ensembles ----------------

SiteLaw site_law(const rtm::MachineSpec& spec, const EnsembleParams& p, const InputEncoding& in) {
  if (p.alpha < 0 || p.alpha > 1) fail(ErrorCode::InvalidInput, "alpha outside [0, 1]");
  SiteLaw law;
  Rational scale = 1;
  if (p.mode == Mode::Iid) {
    if (p.l == 0) fail(ErrorCode::InvalidInput, "iid ensemble needs l >= 1");
    Rational pe(1, BigInt(p.l) * p.l);
    law.values.push_back(e0_of(spec));
    law.probs.push_back(pe);
    scale = 1 - pe;
  }
  auto push = [&](std::uint32_t v, const Rational& w) {
    if (w == 0) return;
    law.values.push_back(v);
    law.probs.push_back(w);
  };
  push(spec.symbols.a_or_throw("a1"), scale * (1 - p.alpha));
  for (std::uint8_t b1 = 0; b1 < 2; ++b1) {
    for (std::uint8_t b2 = 0; b2 < 2; ++b2) {
      Rational w = scale * p.alpha * (b1 ? in.beta : 1 - in.beta) * (b2 ? in.marker : 1 - in.marker);
      if (w != 0) push(spec.symbols.m_or_throw(static_cast<std::uint8_t>(2 * b1 + b2), "s0"), w);
    }
  }
  if (law.values.empty()) fail(ErrorCode::InvalidInput, "site law has empty support");
  return law;
}

dyn::InitialEnsemble build_initial_ensemble(const rtm::MachineSpec& spec, const EnsembleParams& p,
                                            const InputEncoding& in, std::uint64_t max_support) {
  auto viol = p.violations(in);
  if (!viol.empty() && !p.override_checks)
    fail(ErrorCode::ParamsViolation, fmt::format("ensemble parameters: {}", fmt::join(viol, "; ")));
  const SiteLaw law = site_law(spec, p, in);
  const std::size_t random_sites = p.mode == Mode::Anchored ? p.L : p.L + 1;

  dyn::InitialEnsemble ens;
  ens.provenance = mode_name(p.mode);
  ens.metadata["params"] = p.to_json();
  ens.metadata["input"] = {{"v", in.v}, {"beta", io::rational_string(in.beta)}};
  ens.metadata["violations"] = viol;

  BigInt support = pow_big(law.values.size(), static_cast<unsigned>(random_sites));
  ens.metadata["support"] = support.str();
  if (support > max_support) {
    ens.metadata["exhaustive"] = false;
    ens.metadata["sampler"] = {{"generator", "mt19937_64"}, {"seeding", "seed_seq{seed, index}"}};
    return ens;
  }
  ens.metadata["exhaustive"] = true;

  const std::uint32_t e0 = e0_of(spec);
  const std::size_t off = p.mode == Mode::Anchored ? 1 : 0;
  const std::size_t k = law.values.size();
  std::vector<std::size_t> digit(random_sites, 0);
  // prefix[i] = product of the first i site weights.
  std::vector<Rational> prefix(random_sites + 1, Rational(1));
  for (std::size_t i = 0; i < random_sites; ++i) prefix[i + 1] = prefix[i] * law.probs[0];
  const auto total = support.convert_to<std::size_t>();
  ens.configs.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    Configuration c;
    c.cells.resize(p.L + 1);
    if (off) c.cells[0] = e0;
    for (std::size_t i = 0; i < random_sites; ++i) c.cells[off + i] = law.values[digit[i]];
    ens.configs.push_back(std::move(c));
    ens.exact.push_back(prefix[random_sites]);
    ens.probs.push_back(to_double(prefix[random_sites]));
    // Odometer: increment the last digit, carrying leftwards.
    std::size_t pos = random_sites;
    while (pos > 0) {
      --pos;
      if (++digit[pos] < k) break;
      digit[pos] = 0;
    }
    for (std::size_t i = pos; i < random_sites; ++i) prefix[i + 1] = prefix[i] * law.probs[digit[i]];
  }
  return ens;
}

std::vector<Configuration> sample_configs(const rtm::MachineSpec& spec, const EnsembleParams& p,
                                          const InputEncoding& in, std::size_t count,
                                          std::uint64_t seed, unsigned threads) {
  if (count == 0) fail(ErrorCode::InvalidInput, "sample count must be at least 1");
  const SiteLaw law = site_law(spec, p, in);
  std::vector<double> w;
  for (const auto& r : law.probs) w.push_back(to_double(r));
  const std::uint32_t e0 = e0_of(spec);
  std::vector<Configuration> out(count);
  parallel_for(count, threads, [&](std::size_t b, std::size_t e, unsigned) {
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    for (std::size_t i = b; i < e; ++i) {
      auto rng = stream(seed, i);
      Configuration& c = out[i];
      c.cells.resize(p.L + 1);
      std::size_t start = 0;
      if (p.mode == Mode::Anchored) {
        c.cells[0] = e0;
        start = 1;
      }
      for (std::size_t s = start; s <= p.L; ++s) c.cells[s] = law.values[pick(rng)];
    }
  });
  return out;
}

// ---------------- decoding ----------------

std::string recover_beta(const Rational& beta_prime, std::uint32_t n_prime) {
  if (beta_prime < 0 || beta_prime > 1)
    fail(ErrorCode::NoValidCodeword, "frequency estimate outside [0, 1]");
  const BigInt scale = pow_big(2, n_prime);
  const Rational x = beta_prime * scale;
  BigInt m = floor_nonneg(x);
  const Rational frac = x - m;
  if (frac == Rational(1, 2))
    fail(ErrorCode::NoValidCodeword, "estimate lies halfway between two codewords");
  if (frac > Rational(1, 2)) m += 1;
  if (m <= 0 || m >= scale)
    fail(ErrorCode::NoValidCodeword,
         fmt::format("no codeword of at most {} bits within 2^-{}", n_prime, n_prime + 1));
  std::string bits(n_prime, '0');
  for (std::uint32_t i = 0; i < n_prime; ++i)
    if (boost::multiprecision::bit_test(m, n_prime - 1 - i)) bits[i] = '1';
  while (!bits.empty() && bits.back() == '0') bits.pop_back();
  return bits;
}

DecodeSummary summarize(const rtm::MachineSpec& spec, const std::vector<std::uint32_t>& tape) {
  DecodeSummary s;
  s.cells = tape.size();
  std::vector<std::uint8_t> b1;
  for (auto x : tape) {
    if (spec.is_control(x)) continue;
    const auto sym = spec.symbols.at(x);
    if (sym.kind != rtm::CellKind::M) continue;
    const std::uint8_t bit1 = sym.b >> 1, bit2 = sym.b & 1;
    if (bit2 && !s.n_prime) s.n_prime = s.m_cells;
    b1.push_back(bit1);
    ++s.m_cells;
  }
  if (s.n_prime) {
    const std::uint64_t want = *s.n_prime >= 16 ? s.m_cells : (std::uint64_t{1} << (4 * *s.n_prime));
    s.used = std::min(want, s.m_cells);
    for (std::uint64_t i = 0; i < s.used; ++i) s.b1_ones += b1[i];
  }
  return s;
}

void GoodnessVerdict::fail_with(const std::string& r) {
  good = false;
  if (std::find(reasons.begin(), reasons.end(), r) == reasons.end()) reasons.push_back(r);
}

json GoodnessVerdict::to_json() const {
  json j = {{"good", good}, {"reasons", reasons}};
  if (blocks) {
    j["blocks"] = blocks;
    j["bad_blocks"] = bad_blocks;
    j["bad_sites"] = bad_sites;
  }
  return j;
}

GoodnessVerdict classify_segment(const DecodeSummary& s, const Rational& alpha,
                                 const InputEncoding& in) {
  GoodnessVerdict v;
  if (!rate_ok(s.m_cells, s.cells, alpha)) v.fail_with("G-a");
  const std::uint64_t n = in.n;
  bool ok = s.n_prime.has_value() && *s.n_prime >= n && *s.n_prime <= n * n * n;
  if (ok) {
    if (s.frequency_ok) {
      ok = *s.frequency_ok;
    } else if (s.used == 0) {
      ok = false;
    } else {
      try {
        ok = recover_beta(Rational(s.b1_ones, s.used), static_cast<std::uint32_t>(*s.n_prime)) == in.v;
      } catch (const Error&) {
        ok = false;
      }
    }
  }
  if (!ok) v.fail_with("G-b");
  return v;
}

GoodnessVerdict classify_block(const rtm::MachineSpec& spec, const std::vector<std::uint32_t>& tape,
                               std::uint64_t length, const EnsembleParams& p,
                               const InputEncoding& in) {
  GoodnessVerdict v;
  const BigInt l4 = pow_big(p.l, 4);
  if (length < p.l || BigInt(length) > l4) v.fail_with("GB-1");
  auto inner = classify_segment(summarize(spec, tape), p.alpha, in);
  if (!inner.good) {
    v.fail_with("GB-2");
    for (const auto& r : inner.reasons) v.reasons.push_back(r);
  }
  return v;
}

std::vector<std::uint64_t> iid_block_lengths(const rtm::MachineSpec& spec, const Configuration& c) {
  std::vector<std::uint64_t> out;
  std::uint64_t run = 0;
  for (auto x : c.cells) {
    ++run;
    if (spec.is_control(x)) {
      out.push_back(run);
      run = 0;
    }
  }
  if (run) out.push_back(run);
  return out;
}

std::uint64_t k_star(const EnsembleParams& p) {
  if (p.l == 0) return 0;
  const BigInt l2 = BigInt(p.l) * p.l;
  return ((l2 - 1) * (BigInt(p.L) + 1) / (l2 * l2)).convert_to<std::uint64_t>();
}

GoodnessVerdict classify_good(const rtm::MachineSpec& spec, const Configuration& c,
                              const EnsembleParams& p, const InputEncoding& in) {
  if (c.cells.size() != p.L + 1)
    fail(ErrorCode::MalformedConfiguration,
         fmt::format("configuration has {} sites, expected {}", c.cells.size(), p.L + 1));
  if (p.mode == Mode::Anchored) {
    const auto ctl = rtm::control_sites(spec, c);
    if (ctl.size() != 1 || ctl[0] != 0 || c.cells[0] != e0_of(spec))
      fail(ErrorCode::MalformedConfiguration, "anchored configuration needs the initial control at site 0 only");
    std::vector<std::uint32_t> tape(c.cells.begin() + 1, c.cells.end());
    return classify_segment(summarize(spec, tape), p.alpha, in);
  }

  GoodnessVerdict v;
  const auto lens = iid_block_lengths(spec, c);
  const std::uint64_t K = k_star(p);
  const bool trailing_open = !spec.is_control(c.cells.back());
  const std::uint64_t complete = lens.size() - (trailing_open ? 1 : 0);
  // The K*-th block must close within the lattice.
  const BigInt l2 = BigInt(p.l) * p.l;
  BigInt covered = 0;
  std::size_t pos = 0;
  for (std::uint64_t k = 0; k < std::min<std::uint64_t>(K, lens.size()); ++k) {
    const std::uint64_t len = lens[k];
    std::vector<std::uint32_t> tape(c.cells.begin() + pos, c.cells.begin() + pos + len);
    if (k < complete) tape.pop_back();
    pos += len;
    covered += len;
    ++v.blocks;
    if (!classify_block(spec, tape, len, p, in).good) {
      ++v.bad_blocks;
      v.bad_sites += len;
    }
  }
  if (complete < K || covered * l2 < (l2 - 2) * (BigInt(p.L) + 1) || covered > BigInt(p.L) + 1)
    v.fail_with("G-c");
  if (BigInt(v.bad_sites) * in.n > (2 * l2 + 3 * BigInt(in.n)) * K) v.fail_with("G-d");
  return v;
}

GoodRateBounds good_rate_bounds(const EnsembleParams& p, const InputEncoding& in) {
  auto viol = p.violations(in);
  if (!viol.empty() && !p.override_checks)
    fail(ErrorCode::ParamsViolation, fmt::format("ensemble parameters: {}", fmt::join(viol, "; ")));
  GoodRateBounds b;
  b.anchored = Rational(2, in.n);
  if (p.mode == Mode::Iid) {
    if (p.L == 0) fail(ErrorCode::ParamsViolation, "L must be positive");
    b.iid = Rational(5 * pow_big(p.l, 10), BigInt(p.L));
  }
  return b;
}

GoodnessVerdict AnchoredStatSampler::draw(std::mt19937_64& rng) const {
  DecodeSummary s;
  s.cells = p.L;
  s.m_cells = std::binomial_distribution<std::uint64_t>(p.L, to_double(p.alpha))(rng);
  const double marker = to_double(in.marker);
  const std::uint64_t before =
      marker >= 1.0 ? 0 : std::geometric_distribution<std::uint64_t>(marker)(rng);
  if (before < s.m_cells) s.n_prime = before;
  if (s.n_prime) {
    const double b = to_double(in.beta);
    const double z = std::normal_distribution<double>(0.0, 1.0)(rng);
    const double limit = std::ldexp(1.0, static_cast<int>(std::min<std::uint64_t>(*s.n_prime, 4000)) - 1) /
                         std::sqrt(b * (1.0 - b));
    s.frequency_ok = std::abs(z) < limit;
  }
  return classify_segment(s, p.alpha, in);
}

GoodnessVerdict IidStatSampler::draw(std::mt19937_64& rng) const {
  GoodnessVerdict v;
  const std::uint64_t K = k_star(p);
  const BigInt l4 = pow_big(p.l, 4);
  if (l4 > 1000000) fail(ErrorCode::InvalidInput, "iid surrogate supports l^4 <= 10^6");
  const std::uint64_t top = l4.convert_to<std::uint64_t>();
  const double pe = 1.0 / (static_cast<double>(p.l) * static_cast<double>(p.l));
  const double q = std::min(1.0, 2.0 / in.n);
  // Block k has length m with probability (1-pe)^{m-1} pe; given it exceeds
  // m-1, it equals m with probability pe.
  std::uint64_t remaining = K;
  BigInt covered = 0, bad_sites = 0;
  std::uint64_t bad_blocks = 0;
  for (std::uint64_t m = 1; m <= top && remaining > 0; ++m) {
    const std::uint64_t cnt = pe >= 1.0 ? remaining : std::binomial_distribution<std::uint64_t>(remaining, pe)(rng);
    remaining -= cnt;
    covered += BigInt(cnt) * m;
    std::uint64_t bad = m < p.l ? cnt : (cnt ? std::binomial_distribution<std::uint64_t>(cnt, q)(rng) : 0);
    bad_blocks += bad;
    bad_sites += BigInt(bad) * m;
  }
  if (remaining > 0) {
    // Each longer block is top + Geometric(pe) on {1, 2, ...}.
    const std::uint64_t extra = std::negative_binomial_distribution<std::uint64_t>(remaining, pe)(rng);
    const BigInt tail = BigInt(remaining) * (top + 1) + extra;
    covered += tail;
    bad_sites += tail;
    bad_blocks += remaining;
  }
  v.blocks = K;
  v.bad_blocks = bad_blocks;
  v.bad_sites = bad_sites > BigInt(UINT64_MAX) ? UINT64_MAX : bad_sites.convert_to<std::uint64_t>();
  const BigInt l2 = BigInt(p.l) * p.l;
  if (covered * l2 < (l2 - 2) * (BigInt(p.L) + 1) || covered > BigInt(p.L) + 1) v.fail_with("G-c");
  if (bad_sites * in.n > (2 * l2 + 3 * BigInt(in.n)) * K) v.fail_with("G-d");
  return v;
}

double bad_rate(const std::function<GoodnessVerdict(std::mt19937_64&)>& draw, std::size_t samples,
                std::uint64_t seed, unsigned threads) {
  if (samples == 0) fail(ErrorCode::InvalidInput, "sample count must be at least 1");
  std::vector<std::uint64_t> bad(std::max(1u, threads), 0);
  parallel_for(samples, threads, [&](std::size_t b, std::size_t e, unsigned t) {
    for (std::size_t i = b; i < e; ++i) {
      auto rng = stream(seed, i);
      if (!draw(rng).good) ++bad[t];
    }
  });
  std::uint64_t total = 0;
  for (auto x : bad) total += x;
  return static_cast<double>(total) / static_cast<double>(samples);
}

// ---------------- phase decoding ----------------

PhaseDecodeResult phase_decode(const Rational& beta, std::uint32_t n_prime) {
  if (beta <= 0 || beta >= 1) fail(ErrorCode::OraclePromiseViolated, "rotation angle outside (0, pi)");
  const BigInt den = boost::multiprecision::denominator(beta);
  const auto D = static_cast<std::uint32_t>(boost::multiprecision::msb(den));
  if (den != pow_big(2, D) || D > 60)
    fail(ErrorCode::OraclePromiseViolated, "rotation angle is not a short dyadic multiple of pi");

  // Angles in units of pi/2^D, reduced mod 2 pi; the state is determined up to sign.
  const std::uint64_t period = std::uint64_t{2} << D;
  const std::uint64_t unit_beta = boost::multiprecision::numerator(beta).convert_to<std::uint64_t>();
  std::uint64_t phi = 0;
  // `times` successive applications of the rotation by a compose exactly.
  auto rotate = [&](std::uint64_t a, std::uint64_t times) {
    const auto t = static_cast<unsigned __int128>(a % period) * (times % period);
    phi = static_cast<std::uint64_t>((phi + t % period) % period);
  };

  PhaseDecodeResult r;
  // Distance of the qubit from the nearest basis state (either sign).
  auto read = [&]() -> int {
    const double half = std::numbers::pi * static_cast<double>(phi) / static_cast<double>(period);
    const double c = std::abs(std::cos(half)), s = std::abs(std::sin(half));
    const double dev = std::min(std::hypot(c - 1.0, s), std::hypot(c, s - 1.0));
    r.worst_basis_deviation = std::max(r.worst_basis_deviation, dev);
    ++r.copy_points;
    if (dev > 1e-9) fail(ErrorCode::OraclePromiseViolated, "qubit left the computational basis");
    return s > c ? 1 : 0;
  };

  std::vector<int> bits(n_prime + 2, 0);
  bool found = false;
  std::uint32_t len = 0;
  for (std::uint32_t k1 = n_prime; k1 >= 1; --k1) {
    const std::uint64_t reps = std::uint64_t{1} << std::min<std::uint32_t>(k1, 62);
    if (!found) {
      rotate(unit_beta, reps);
      r.rotations += reps;
      if (read() == 1) {
        found = true;
        len = k1;
        bits[k1] = 1;
        phi = 0;
      }
    } else {
      // R_{-pi 2^{-|v|}} repeated c times strips the already decoded lower bits.
      std::uint64_t c = 0;
      for (std::uint32_t kp = k1 + 1; kp <= len; ++kp) c += static_cast<std::uint64_t>(bits[kp]) << (len - kp);
      const std::uint64_t corr = (period - ((std::uint64_t{1} << (D - len)) % period)) % period;
      for (std::uint64_t k2 = 0; k2 < reps; ++k2) {
        rotate(unit_beta, 1);
        rotate(corr, c);
      }
      r.rotations += reps * (1 + c);
      bits[k1] = read();
      phi = 0;
    }
  }
  if (!found) fail(ErrorCode::OraclePromiseViolated, fmt::format("no length detected within n' = {}", n_prime));
  if (len > D) fail(ErrorCode::OraclePromiseViolated, "detected length exceeds the angle's precision");
  r.length = len;
  for (std::uint32_t k = 1; k <= len; ++k) r.v.push_back(bits[k] ? '1' : '0');
  return r;
}

json ensemble_to_json(const rtm::MachineSpec& spec, const dyn::InitialEnsemble& e) {
  json members = json::array();
  for (std::size_t i = 0; i < e.configs.size(); ++i) {
    json m = {{"config", io::config_to_json(spec, e.configs[i])}, {"weight", e.probs[i]}};
    if (!e.exact.empty()) m["exact"] = io::rational_string(e.exact[i]);
    members.push_back(std::move(m));
  }
  return {{"format", "hca-ensemble/1"},
          {"provenance", e.provenance},
          {"metadata", e.metadata},
          {"members", members}};
}

}  // namespace hca::enc
