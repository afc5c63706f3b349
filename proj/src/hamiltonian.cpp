#include "hca/hamiltonian.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace hca::ham {

using rtm::Boundary;
using rtm::Configuration;

namespace {

void insert_checked(LocalHamiltonian::PairMap& fwd, LocalHamiltonian::PairMap& inv,
                    std::uint64_t src, std::uint64_t dst) {
  if (!fwd.emplace(src, dst).second || !inv.emplace(dst, src).second)
    fail(ErrorCode::NotReversible, "local term is not injective");
}

void check_values(const LocalHamiltonian& h, const Configuration& c) {
  if (c.cells.size() < 2) fail(ErrorCode::MalformedConfiguration, "lattice needs at least two sites");
  for (auto x : c.cells)
    if (x >= h.d) fail(ErrorCode::MalformedConfiguration, "site value out of range");
}

// Applies every 1- and 2-body term of the given maps to c.
std::vector<Configuration> scan(const LocalHamiltonian& h, const Configuration& c,
                                const LocalHamiltonian::PairMap& a, const LocalHamiltonian::PairMap& b,
                                const LocalHamiltonian::PairMap& m, const LocalHamiltonian::SiteMap& s) {
  check_values(h, c);
  std::vector<Configuration> out;
  const std::size_t n = c.cells.size();
  const bool periodic = c.boundary == Boundary::Periodic;
  for (std::size_t i = 0; i < n; ++i) {
    if (auto it = s.find(c.cells[i]); it != s.end()) {
      Configuration y = c;
      y.cells[i] = it->second;
      out.push_back(std::move(y));
    }
    if (i + 1 == n && !periodic) continue;
    const std::size_t j = (i + 1) % n;
    if (j == i) continue;
    const std::uint64_t k = LocalHamiltonian::key(c.cells[i], c.cells[j]);
    for (const auto* map : {&a, &b, &m}) {
      auto it = map->find(k);
      if (it == map->end()) continue;
      Configuration y = c;
      y.cells[i] = LocalHamiltonian::first(it->second);
      y.cells[j] = LocalHamiltonian::second(it->second);
      out.push_back(std::move(y));
    }
  }
  return out;
}

std::optional<Configuration> single(const LocalHamiltonian& h, const Configuration& c,
                                    std::vector<Configuration> all) {
  std::size_t controls = 0;
  for (auto x : c.cells)
    if (x < h.d && h.spec->is_control(x)) ++controls;
  if (controls != 1)
    fail(ErrorCode::MalformedConfiguration, "expected exactly one control site");
  if (all.empty()) return std::nullopt;
  if (all.size() > 1) fail(ErrorCode::Internal, "several terms act on one control");
  return std::move(all.front());
}

}  // namespace

LocalHamiltonian compile(rtm::SpecPtr spec, Boundary boundary) {
  if (!spec) fail(ErrorCode::InvalidInput, "null machine");
  auto report = rtm::validate_reversible(*spec);
  if (!report.empty()) fail(ErrorCode::NotReversible, report.summary(*spec));
  LocalHamiltonian h;
  h.spec = spec;
  h.boundary = boundary;
  h.d = spec->site_dim();
  const auto& S = *spec;
  const std::uint32_t nt = S.num_tape();
  for (const auto& r : S.rules) {
    // A right-moving head never reads the left-end marker.
    if (S.dir(r.q) == 1 && S.symbols.is_box(r.s)) continue;
    insert_checked(h.u0, h.u0_inv, LocalHamiltonian::key(S.control(r.q, 0), r.s),
                   LocalHamiltonian::key(S.control(r.q2, 1), r.s2));
  }
  for (std::uint32_t q = 0; q < S.num_states(); ++q) {
    if (!S.can_shift(q)) continue;
    const std::uint32_t m1 = S.control(q, 1), m0 = S.control(q, 0);
    switch (S.dir(q)) {
      case 1:
        for (std::uint32_t s = 0; s < nt; ++s)
          insert_checked(h.u1p, h.u1p_inv, LocalHamiltonian::key(m1, s), LocalHamiltonian::key(s, m0));
        break;
      case -1:
        for (std::uint32_t s = 0; s < nt; ++s)
          insert_checked(h.u1m, h.u1m_inv, LocalHamiltonian::key(s, m1), LocalHamiltonian::key(m0, s));
        break;
      case 0:
        h.u10.emplace(m1, m0);
        h.u10_inv.emplace(m0, m1);
        break;
      default:
        break;
    }
  }
  return h;
}

std::vector<Configuration> apply_U_all(const LocalHamiltonian& h, const Configuration& c) {
  return scan(h, c, h.u0, h.u1p, h.u1m, h.u10);
}

std::vector<Configuration> apply_U_dagger_all(const LocalHamiltonian& h, const Configuration& c) {
  return scan(h, c, h.u0_inv, h.u1p_inv, h.u1m_inv, h.u10_inv);
}

std::optional<Configuration> apply_U(const LocalHamiltonian& h, const Configuration& c) {
  return single(h, c, apply_U_all(h, c));
}

std::optional<Configuration> apply_U_dagger(const LocalHamiltonian& h, const Configuration& c) {
  return single(h, c, apply_U_dagger_all(h, c));
}

// ---------------- orbit spectra ----------------

std::complex<double> OrbitSpectrum::component(std::uint64_t j, std::size_t k) const {
  const double Jd = static_cast<double>(J);
  if (terminal == rtm::Terminal::Cycle) {
    const double ang = 2.0 * std::numbers::pi * static_cast<double>(k) *
                       static_cast<double>(j - 1) / Jd;
    return std::polar(1.0 / std::sqrt(Jd), ang);
  }
  const double kk = static_cast<double>(k + 1);
  return std::sqrt(2.0 / (Jd + 1.0)) *
         std::sin(static_cast<double>(j) * kk * std::numbers::pi / (Jd + 1.0));
}

Eigen::MatrixXcd OrbitSpectrum::vectors() const {
  if (J > 8192) fail(ErrorCode::DimensionGuard, "orbit too long for an explicit eigenbasis");
  const auto n = static_cast<Eigen::Index>(J);
  Eigen::MatrixXcd v(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < n; ++k)
      v(j, k) = component(static_cast<std::uint64_t>(j + 1), static_cast<std::size_t>(k));
  return v;
}

double OrbitSpectrum::min_gap(double merge_tol) const {
  std::vector<double> e = eigenvalues;
  std::sort(e.begin(), e.end());
  double g = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < e.size(); ++i) {
    const double d = e[i] - e[i - 1];
    if (d > merge_tol) g = std::min(g, d);
  }
  return g;
}

OrbitSpectrum path_spectrum(std::uint64_t J) {
  if (J == 0) fail(ErrorCode::InvalidInput, "empty orbit");
  OrbitSpectrum s{rtm::Terminal::DeadEnd, J, {}};
  s.eigenvalues.reserve(J);
  for (std::uint64_t k = 1; k <= J; ++k)
    s.eigenvalues.push_back(2.0 * std::cos(static_cast<double>(k) * std::numbers::pi /
                                           static_cast<double>(J + 1)));
  return s;
}

OrbitSpectrum cycle_spectrum(std::uint64_t J) {
  if (J == 0) fail(ErrorCode::InvalidInput, "empty orbit");
  OrbitSpectrum s{rtm::Terminal::Cycle, J, {}};
  s.eigenvalues.reserve(J);
  for (std::uint64_t k = 0; k < J; ++k)
    s.eigenvalues.push_back(2.0 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) /
                                           static_cast<double>(J)));
  return s;
}

OrbitSpectrum orbit_spectrum(const rtm::Orbit& orbit) {
  switch (orbit.terminal) {
    case rtm::Terminal::DeadEnd:
      return path_spectrum(orbit.length());
    case rtm::Terminal::Cycle:
      return cycle_spectrum(orbit.length());
    default:
      fail(ErrorCode::TruncatedOrbit, "orbit was truncated by the step budget");
  }
}

Rational energy_gap_bound(std::uint64_t J) {
  const BigInt den = BigInt(J + 1) * BigInt(J + 1);
  return Rational(BigInt(8), den);
}

Rational energy_gap_bound(const rtm::Orbit& orbit) {
  if (orbit.terminal == rtm::Terminal::Truncated)
    fail(ErrorCode::TruncatedOrbit, "orbit was truncated by the step budget");
  return energy_gap_bound(orbit.length());
}

nlohmann::json to_json(const LocalHamiltonian& h) {
  using nlohmann::json;
  const auto& S = *h.spec;
  auto pairs = [&](const LocalHamiltonian::PairMap& m) {
    std::vector<std::array<std::string, 4>> rows;
    for (const auto& [k, v] : m)
      rows.push_back({S.site_tag(LocalHamiltonian::first(k)), S.site_tag(LocalHamiltonian::second(k)),
                      S.site_tag(LocalHamiltonian::first(v)), S.site_tag(LocalHamiltonian::second(v))});
    std::sort(rows.begin(), rows.end());
    json a = json::array();
    for (auto& r : rows) a.push_back({r[0], r[1], r[2], r[3]});
    return a;
  };
  std::vector<std::array<std::string, 2>> ones;
  for (const auto& [k, v] : h.u10) ones.push_back({S.site_tag(k), S.site_tag(v)});
  std::sort(ones.begin(), ones.end());
  json u10 = json::array();
  for (auto& r : ones) u10.push_back({r[0], r[1]});
  return json{{"format", "hca-local-hamiltonian/1"},
              {"site_dim", h.d},
              {"boundary", rtm::boundary_name(h.boundary)},
              {"u0", pairs(h.u0)},
              {"u1_plus", pairs(h.u1p)},
              {"u1_minus", pairs(h.u1m)},
              {"u10", u10}};
}

}  // namespace hca::ham
