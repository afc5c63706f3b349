#include "hca/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

namespace hca::dyn {

using rtm::Terminal;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t zobrist(std::size_t site, std::uint32_t v) {
  return splitmix((static_cast<std::uint64_t>(site) << 32) ^ v);
}

// Double-precision version of longterm_element.
double longterm_double(Terminal term, std::uint64_t J, std::uint64_t j, std::uint64_t jp) {
  const double Jd = static_cast<double>(J);
  if (term == Terminal::Cycle) {
    const std::uint64_t a = j - 1, b = jp - 1;
    double v = Jd * (static_cast<double>(a == b) + static_cast<double>((a + b) % J == 0)) - 1.0;
    if (J % 2 == 0) v -= ((a + b) % 2 == 0) ? 1.0 : -1.0;
    return v / (Jd * Jd);
  }
  if (J == 1) return 1.0;
  if (j == jp) return (j == 1 || j == J) ? 1.5 / (Jd + 1.0) : 1.0 / (Jd + 1.0);
  if (j + 2 == jp || jp + 2 == j) return -0.5 / (Jd + 1.0);
  return 0.0;
}

}  // namespace

// ---------------- orbit formulas ----------------

Eigen::VectorXcd evolve_spectral(const ham::OrbitSpectrum& sp, double t) {
  const auto J = static_cast<Eigen::Index>(sp.J);
  Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(J);
  // <j|psi(t)> = sum_k e^{-i lambda_k t} <j|phi_k> conj(<1|phi_k>)
  for (std::size_t k = 0; k < sp.eigenvalues.size(); ++k) {
    const Complex w = std::polar(1.0, -sp.eigenvalues[k] * t) * std::conj(sp.component(1, k));
    for (Eigen::Index j = 0; j < J; ++j)
      amps[j] += w * sp.component(static_cast<std::uint64_t>(j + 1), k);
  }
  return amps;
}

OrbitAmplitudes evolve_spectral(const rtm::Orbit& orbit, double t) {
  auto sp = ham::orbit_spectrum(orbit);
  return {sp.J, t, evolve_spectral(sp, t)};
}

std::vector<Rational> time_avg_probs(Terminal terminal, std::uint64_t J) {
  if (terminal == Terminal::Truncated) fail(ErrorCode::TruncatedOrbit, "orbit was truncated");
  if (J == 0) fail(ErrorCode::InvalidInput, "empty orbit");
  std::vector<Rational> p(J);
  if (terminal == Terminal::Cycle) {
    const BigInt JJ = BigInt(J) * BigInt(J);
    for (std::uint64_t a = 0; a < J; ++a) {
      BigInt num = BigInt(J) * (1 + ((2 * a) % J == 0 ? 1 : 0)) - 1 - (J % 2 == 0 ? 1 : 0);
      p[a] = Rational(num, JJ);
    }
    return p;
  }
  if (J == 1) {
    p[0] = 1;
    return p;
  }
  for (std::uint64_t j = 1; j <= J; ++j)
    p[j - 1] = (j == 1 || j == J) ? Rational(3, 2 * (BigInt(J) + 1)) : Rational(BigInt(1), BigInt(J) + 1);
  return p;
}

std::vector<Rational> time_avg_probs(const rtm::Orbit& orbit) {
  return time_avg_probs(orbit.terminal, orbit.length());
}

Rational trig_kernel(std::uint64_t J, std::uint64_t j, std::uint64_t jp) {
  if (j < 1 || jp < 1 || j > J || jp > J) fail(ErrorCode::InvalidInput, "index out of range");
  const BigInt N = BigInt(J) + 1;
  if (J == 1) return Rational(1);
  if (j == jp) return (j == 1 || j == J) ? Rational(3 * N, 8) : Rational(N, 4);
  if (j + 2 == jp || jp + 2 == j) return Rational(-N, 8);
  return Rational(0);
}

Rational longterm_element(Terminal terminal, std::uint64_t J, std::uint64_t j, std::uint64_t jp) {
  if (terminal == Terminal::Truncated) fail(ErrorCode::TruncatedOrbit, "orbit was truncated");
  if (j < 1 || jp < 1 || j > J || jp > J) fail(ErrorCode::InvalidInput, "index out of range");
  if (terminal == Terminal::Cycle) {
    const std::uint64_t a = j - 1, b = jp - 1;
    BigInt num = BigInt(J) * ((a == b ? 1 : 0) + ((a + b) % J == 0 ? 1 : 0)) - 1;
    if (J % 2 == 0) num -= ((a + b) % 2 == 0) ? 1 : -1;
    return Rational(num, BigInt(J) * BigInt(J));
  }
  const BigInt N = BigInt(J) + 1;
  return Rational(BigInt(4), N * N) * trig_kernel(J, j, jp);
}

// ---------------- site averages ----------------

SiteAverager::SiteAverager(std::uint32_t d, std::vector<std::vector<std::uint32_t>> configs)
    : d_(d), n_(configs.empty() ? 0 : configs.front().size()), configs_(std::move(configs)) {
  for (const auto& c : configs_)
    if (c.size() != n_) fail(ErrorCode::InvalidInput, "configurations of different length");
  std::vector<std::uint64_t> full(configs_.size(), 0);
  for (std::size_t y = 0; y < configs_.size(); ++y)
    for (std::size_t i = 0; i < n_; ++i) full[y] ^= zobrist(i, configs_[y][i]);
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> groups;
  for (std::size_t i = 0; i < n_; ++i) {
    groups.clear();
    for (std::size_t y = 0; y < configs_.size(); ++y)
      groups[full[y] ^ zobrist(i, configs_[y][i])].push_back(static_cast<std::uint32_t>(y));
    for (const auto& [key, g] : groups) {
      if (g.size() < 2) continue;
      for (std::size_t u = 0; u < g.size(); ++u)
        for (std::size_t w = u + 1; w < g.size(); ++w) {
          const auto& A = configs_[g[u]];
          const auto& B = configs_[g[w]];
          bool same_off_i = true;
          for (std::size_t s = 0; s < n_ && same_off_i; ++s)
            if (s != i && A[s] != B[s]) same_off_i = false;
          if (!same_off_i || A[i] == B[i]) continue;
          const auto lo = std::min(g[u], g[w]), hi = std::max(g[u], g[w]);
          const bool swap = lo != g[u];
          pairs_.push_back({lo, hi, swap ? B[i] : A[i], swap ? A[i] : B[i]});
        }
    }
  }
  std::sort(pairs_.begin(), pairs_.end(), [](const Pair& a, const Pair& b) {
    return std::tie(a.y, a.yp) < std::tie(b.y, b.yp);
  });
}

Eigen::MatrixXcd SiteAverager::operator()(const Eigen::VectorXcd& psi,
                                          const Eigen::VectorXcd& phi) const {
  if (static_cast<std::size_t>(psi.size()) != configs_.size() ||
      static_cast<std::size_t>(phi.size()) != configs_.size())
    fail(ErrorCode::InvalidInput, "state vector does not match the basis");
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(d_, d_);
  for (std::size_t y = 0; y < configs_.size(); ++y) {
    const Complex w = psi[static_cast<Eigen::Index>(y)] * std::conj(phi[static_cast<Eigen::Index>(y)]);
    if (w == Complex(0.0)) continue;
    for (auto v : configs_[y]) M(v, v) += w;
  }
  for (const auto& p : pairs_) {
    M(p.a, p.b) += psi[p.y] * std::conj(phi[p.yp]);
    M(p.b, p.a) += psi[p.yp] * std::conj(phi[p.y]);
  }
  return M / static_cast<double>(n_);
}

Eigen::MatrixXcd SiteAverager::average(
    const std::function<Complex(std::size_t, std::size_t)>& rho) const {
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(d_, d_);
  for (std::size_t y = 0; y < configs_.size(); ++y) {
    const Complex w = rho(y, y);
    if (w == Complex(0.0)) continue;
    for (auto v : configs_[y]) M(v, v) += w;
  }
  for (const auto& p : pairs_) {
    M(p.a, p.b) += rho(p.y, p.yp);
    M(p.b, p.a) += rho(p.yp, p.y);
  }
  return M / static_cast<double>(n_);
}

ReferenceSites reference_sites(const rtm::MachineSpec& spec) {
  auto q = spec.find_state("q1_init");
  auto a1 = spec.symbols.a("a1"), a2 = spec.symbols.a("a2");
  if (!q || !a1 || !a2) fail(ErrorCode::NotFound, "machine lacks q1_init, a1 or a2");
  return {spec.control(*q, 0), *a1, *a2};
}

SingleSiteState projector(std::uint32_t d, std::uint32_t v) {
  SingleSiteState P = SingleSiteState::Zero(d, d);
  P(v, v) = 1.0;
  return P;
}

SingleSiteState site_average_config(std::uint32_t d, const Configuration& c) {
  SingleSiteState M = SingleSiteState::Zero(d, d);
  for (auto v : c.cells) {
    if (v >= d) fail(ErrorCode::MalformedConfiguration, "site value out of range");
    M(v, v) += 1.0;
  }
  return M / static_cast<double>(c.size());
}

double trace_distance(const SingleSiteState& a, const SingleSiteState& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    fail(ErrorCode::InvalidInput, "state dimensions differ");
  Eigen::MatrixXcd D = a - b;
  D = 0.5 * (D + D.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(D, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum();
}

std::vector<std::string> check_state(const SingleSiteState& rho, double tol) {
  std::vector<std::string> out;
  const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  if (herm > tol) out.push_back(fmt::format("not Hermitian ({:.3g})", herm));
  const Complex tr = rho.trace();
  if (std::abs(tr - Complex(1.0)) > tol) out.push_back(fmt::format("trace {:.12g}", tr.real()));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -tol)
    out.push_back(fmt::format("negative eigenvalue {:.3g}", es.eigenvalues().minCoeff()));
  return out;
}

// ---------------- ensembles ----------------

InitialEnsemble InitialEnsemble::single(const Configuration& c) {
  InitialEnsemble e;
  e.configs = {c};
  e.probs = {1.0};
  e.exact = {Rational(1)};
  return e;
}

void InitialEnsemble::check() const {
  if (configs.empty() || configs.size() != probs.size())
    fail(ErrorCode::InvalidInput, "ensemble weights do not match its members");
  double s = 0;
  for (double p : probs) {
    if (p < 0) fail(ErrorCode::InvalidInput, "negative probability");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-12) fail(ErrorCode::InvalidInput, fmt::format("probabilities sum to {}", s));
  if (!exact.empty()) {
    Rational t = 0;
    for (const auto& r : exact) t += r;
    if (t != 1) fail(ErrorCode::InvalidInput, "exact weights do not sum to 1");
  }
}

SingleSiteState OrbitData::at(double t) const {
  return (*averager)(evolve_spectral(spectrum, t));
}

SingleSiteState OrbitData::longterm() const {
  const auto term = orbit.terminal;
  const std::uint64_t J = orbit.length();
  return averager->average([&](std::size_t y, std::size_t yp) {
    return Complex(longterm_double(term, J, y + 1, yp + 1), 0.0);
  });
}

EnsembleDynamics::EnsembleDynamics(rtm::SpecPtr spec, const InitialEnsemble& ens,
                                   std::uint64_t max_steps)
    : d_(spec->site_dim()), spec_(spec), static_part_(SingleSiteState::Zero(d_, d_)) {
  ens.check();
  std::unordered_map<Configuration, std::size_t, rtm::ConfigHash> cache;
  std::vector<double> weight;
  for (std::size_t m = 0; m < ens.size(); ++m) {
    const auto& c = ens.configs[m];
    const double p = ens.probs[m];
    if (p == 0.0) continue;
    const double n = static_cast<double>(c.size());
    for (auto& blk : rtm::split_blocks(*spec, c)) {
      const double share = p * static_cast<double>(blk.config.size()) / n;
      if (!blk.has_control) {
        static_part_ += share * site_average_config(d_, blk.config);
        continue;
      }
      auto it = cache.find(blk.config);
      if (it == cache.end()) {
        auto od = std::make_unique<OrbitData>();
        od->orbit = rtm::run_orbit(spec, blk.config, max_steps);
        if (od->orbit.terminal == Terminal::Truncated)
          fail(ErrorCode::TruncatedOrbit, "orbit exceeded the step budget");
        od->spectrum = ham::orbit_spectrum(od->orbit);
        std::vector<std::vector<std::uint32_t>> states;
        od->orbit.for_each([&](std::uint64_t, const Configuration& x) { states.push_back(x.cells); });
        od->averager = std::make_unique<SiteAverager>(d_, std::move(states));
        it = cache.emplace(blk.config, orbits_.size()).first;
        orbits_.push_back(std::move(od));
        weight.push_back(0.0);
      }
      weight[it->second] += share;
    }
  }
  for (std::size_t k = 0; k < orbits_.size(); ++k) parts_.push_back({k, weight[k]});
}

SingleSiteState EnsembleDynamics::at(double t) const {
  SingleSiteState M = static_part_;
  for (const auto& p : parts_) M += p.weight * orbits_[p.orbit]->at(t);
  return M;
}

SingleSiteState EnsembleDynamics::longterm() const {
  SingleSiteState M = static_part_;
  for (const auto& p : parts_) M += p.weight * orbits_[p.orbit]->longterm();
  return M;
}

std::uint64_t EnsembleDynamics::max_orbit_length() const {
  std::uint64_t m = 0;
  for (const auto& o : orbits_) m = std::max(m, o->orbit.length());
  return m;
}

std::uint64_t EnsembleDynamics::min_orbit_length() const {
  std::uint64_t m = orbits_.empty() ? 0 : UINT64_MAX;
  for (const auto& o : orbits_) m = std::min(m, o->orbit.length());
  return m;
}

double EnsembleDynamics::min_gap() const {
  double g = std::numeric_limits<double>::infinity();
  for (const auto& o : orbits_) g = std::min(g, o->spectrum.min_gap());
  return g;
}

// ---------------- streaming long-term average ----------------

namespace {

struct StreamAccum {
  std::uint32_t d;
  Eigen::MatrixXd exact, uniform;
};

// Adds the weighted long-term average of one dead-end orbit of length J.
void accumulate_dead_end(const rtm::MachineSpec& spec, const Configuration& c, std::uint64_t J,
                         double w, StreamAccum& acc) {
  const std::uint32_t d = acc.d;
  const double n = static_cast<double>(c.size());
  std::vector<std::int64_t> count(d, 0), first(d, 0), S(d, 0);
  std::vector<std::uint64_t> since(d, 1);
  for (auto v : c.cells) ++count[v];
  first = count;
  auto change = [&](std::uint32_t v, int delta, std::uint64_t j) {
    S[v] += count[v] * static_cast<std::int64_t>(j - since[v]);
    since[v] = j;
    count[v] += delta;
  };
  const double cross = -0.5 / (static_cast<double>(J) + 1.0) / n * w;
  bool have_prev = false;
  rtm::Delta prev{};
  rtm::walk_orbit(spec, c, J, [&](std::uint64_t j, const rtm::Delta& dl, const std::vector<std::uint32_t>&) {
    // The configuration after this delta is x(j+1).
    change(dl.oi, -1, j + 1);
    change(dl.xi, +1, j + 1);
    if (dl.k != dl.i) {
      change(dl.ok, -1, j + 1);
      change(dl.xk, +1, j + 1);
    }
    if (have_prev) {
      // Compare x(j-1) and x(j+1) on the sites touched by the two deltas.
      const std::uint32_t sites[4] = {prev.i, prev.k, dl.i, dl.k};
      int ndiff = 0;
      std::uint32_t va = 0, vb = 0;
      for (int u = 0; u < 4; ++u) {
        const std::uint32_t s = sites[u];
        bool dup = false;
        for (int w2 = 0; w2 < u; ++w2) dup |= sites[w2] == s;
        if (dup) continue;
        std::uint32_t before, after;
        const bool in_prev = s == prev.i || s == prev.k;
        const bool in_cur = s == dl.i || s == dl.k;
        before = in_prev ? (s == prev.i ? prev.oi : prev.ok) : (s == dl.i ? dl.oi : dl.ok);
        after = in_cur ? (s == dl.i ? dl.xi : dl.xk) : (s == prev.i ? prev.xi : prev.xk);
        if (before != after) {
          ++ndiff;
          va = before;
          vb = after;
        }
      }
      if (ndiff == 1) {
        acc.exact(va, vb) += cross;
        acc.exact(vb, va) += cross;
      }
    }
    prev = dl;
    have_prev = true;
  });
  const double Jd = static_cast<double>(J);
  for (std::uint32_t v = 0; v < d; ++v) {
    S[v] += count[v] * static_cast<std::int64_t>(J + 1 - since[v]);
    if (S[v] == 0 && first[v] == 0 && count[v] == 0) continue;
    const double sum = static_cast<double>(S[v]);
    double ex = sum;
    if (J > 1) ex += 0.5 * static_cast<double>(first[v] + count[v]);
    acc.exact(v, v) += w * ex / ((J > 1 ? Jd + 1.0 : 1.0) * n);
    acc.uniform(v, v) += w * sum / (Jd * n);
  }
}

}  // namespace

LongTerm longterm_site_average(const rtm::MachineSpec& spec, const InitialEnsemble& ens,
                               std::uint64_t max_steps) {
  ens.check();
  const std::uint32_t d = spec.site_dim();
  StreamAccum acc{d, Eigen::MatrixXd::Zero(d, d), Eigen::MatrixXd::Zero(d, d)};
  LongTerm out;
  out.J_min = UINT64_MAX;
  std::uint32_t L = 0;
  auto shared = std::make_shared<const rtm::MachineSpec>(spec);
  for (std::size_t m = 0; m < ens.size(); ++m) {
    const auto& c = ens.configs[m];
    const double w = ens.probs[m];
    L = std::max(L, c.L());
    auto res = rtm::walk_orbit(spec, c, max_steps, {});
    if (res.terminal == Terminal::Truncated)
      fail(ErrorCode::TruncatedOrbit, "orbit exceeded the step budget");
    out.J_min = std::min(out.J_min, res.length);
    out.J_max = std::max(out.J_max, res.length);
    if (w == 0.0) continue;
    if (res.terminal == Terminal::DeadEnd) {
      accumulate_dead_end(spec, c, res.length, w, acc);
      continue;
    }
    if (res.length * c.size() > (1u << 26))
      fail(ErrorCode::DimensionGuard, "cycle too long for the exact long-term average");
    InitialEnsemble one = InitialEnsemble::single(c);
    EnsembleDynamics dyn(shared, one, max_steps);
    acc.exact += w * dyn.longterm().real();
    // Uniform part: diagonal average over the cycle.
    SingleSiteState u = SingleSiteState::Zero(d, d);
    dyn.orbits().front()->orbit.for_each(
        [&](std::uint64_t, const Configuration& x) { u += site_average_config(d, x); });
    acc.uniform += w * u.real() / static_cast<double>(res.length);
  }
  out.exact = acc.exact.cast<Complex>();
  out.uniform = acc.uniform.cast<Complex>();
  out.radius = 2.0 / static_cast<double>(std::max<std::uint32_t>(L, 1)) +
               2.0 / static_cast<double>(out.J_min);
  return out;
}

// ---------------- dense oracle ----------------

DenseSystem::DenseSystem(const ham::LocalHamiltonian& h, const std::vector<Configuration>& seeds,
                         DenseLimits lim) {
  std::deque<std::size_t> queue;
  auto add = [&](const Configuration& c) {
    auto [it, fresh] = index_.emplace(c, basis_.size());
    if (fresh) {
      if (basis_.size() >= lim.max_dim)
        fail(ErrorCode::DimensionGuard, "reachable subspace exceeds the dimension guard");
      basis_.push_back(c);
      queue.push_back(it->second);
    }
    return it->second;
  };
  for (const auto& s : seeds) add(s);
  std::vector<std::vector<std::size_t>> fwd;  // U edges x -> y
  while (!queue.empty()) {
    const std::size_t x = queue.front();
    queue.pop_front();
    const Configuration cx = basis_[x];
    if (fwd.size() < basis_.size()) fwd.resize(basis_.size());
    for (auto& y : ham::apply_U_all(h, cx)) {
      const std::size_t iy = add(y);
      if (fwd.size() < basis_.size()) fwd.resize(basis_.size());
      fwd[x].push_back(iy);
    }
    for (auto& y : ham::apply_U_dagger_all(h, cx)) add(y);
  }
  fwd.resize(basis_.size());
  // Connected components of the undirected graph.
  std::vector<std::vector<std::size_t>> adj(basis_.size());
  for (std::size_t x = 0; x < basis_.size(); ++x)
    for (auto y : fwd[x]) {
      adj[x].push_back(y);
      adj[y].push_back(x);
    }
  comp_of_.assign(basis_.size(), SIZE_MAX);
  for (std::size_t s = 0; s < basis_.size(); ++s) {
    if (comp_of_[s] != SIZE_MAX) continue;
    Component comp;
    std::vector<std::size_t> stack{s};
    comp_of_[s] = comps_.size();
    while (!stack.empty()) {
      auto x = stack.back();
      stack.pop_back();
      comp.members.push_back(x);
      for (auto y : adj[x])
        if (comp_of_[y] == SIZE_MAX) {
          comp_of_[y] = comps_.size();
          stack.push_back(y);
        }
    }
    std::sort(comp.members.begin(), comp.members.end());
    if (comp.members.size() > lim.max_component)
      fail(ErrorCode::DimensionGuard, "connected component too large for the dense eigensolver");
    comps_.push_back(std::move(comp));
  }
  std::vector<std::size_t> local(basis_.size());
  for (auto& comp : comps_) {
    const auto m = static_cast<Eigen::Index>(comp.members.size());
    for (Eigen::Index u = 0; u < m; ++u) local[comp.members[static_cast<std::size_t>(u)]] = static_cast<std::size_t>(u);
    comp.H = Eigen::MatrixXd::Zero(m, m);
    for (auto x : comp.members)
      for (auto y : fwd[x]) {
        comp.H(static_cast<Eigen::Index>(local[y]), static_cast<Eigen::Index>(local[x])) += 1.0;
        comp.H(static_cast<Eigen::Index>(local[x]), static_cast<Eigen::Index>(local[y])) += 1.0;
      }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(comp.H);
    comp.evals = es.eigenvalues();
    comp.evecs = es.eigenvectors();
  }
  std::vector<std::vector<std::uint32_t>> cells;
  cells.reserve(basis_.size());
  for (const auto& c : basis_) cells.push_back(c.cells);
  avg_ = std::make_unique<SiteAverager>(h.d, std::move(cells));
}

std::optional<std::size_t> DenseSystem::index(const Configuration& c) const {
  auto it = index_.find(c);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Eigen::VectorXcd DenseSystem::basis_vector(const Configuration& c) const {
  auto i = index(c);
  if (!i) fail(ErrorCode::InvalidInput, "configuration outside the reachable subspace");
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dim()));
  v[static_cast<Eigen::Index>(*i)] = 1.0;
  return v;
}

Eigen::VectorXcd DenseSystem::evolve(const Eigen::VectorXcd& psi0, double t) const {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(psi0.size());
  for (const auto& comp : comps_) {
    const auto m = static_cast<Eigen::Index>(comp.members.size());
    Eigen::VectorXcd c(m);
    bool any = false;
    for (Eigen::Index u = 0; u < m; ++u) {
      c[u] = psi0[static_cast<Eigen::Index>(comp.members[static_cast<std::size_t>(u)])];
      any |= c[u] != Complex(0.0);
    }
    if (!any) continue;
    Eigen::VectorXcd coef = comp.evecs.transpose().cast<Complex>() * c;
    for (Eigen::Index k = 0; k < m; ++k) coef[k] *= std::polar(1.0, -comp.evals[k] * t);
    Eigen::VectorXcd r = comp.evecs.cast<Complex>() * coef;
    for (Eigen::Index u = 0; u < m; ++u)
      out[static_cast<Eigen::Index>(comp.members[static_cast<std::size_t>(u)])] = r[u];
  }
  return out;
}

std::vector<double> DenseSystem::eigenvalues() const {
  std::vector<double> e;
  for (const auto& c : comps_)
    for (Eigen::Index k = 0; k < c.evals.size(); ++k) e.push_back(c.evals[k]);
  std::sort(e.begin(), e.end());
  return e;
}

SingleSiteState DenseSystem::longterm_site_average(const Eigen::VectorXcd& psi0,
                                                   double merge_tol) const {
  struct Mode {
    double lambda;
    std::size_t comp;
    Eigen::Index k;
    Complex overlap;
  };
  std::vector<Mode> modes;
  for (std::size_t ci = 0; ci < comps_.size(); ++ci) {
    const auto& comp = comps_[ci];
    const auto m = static_cast<Eigen::Index>(comp.members.size());
    for (Eigen::Index k = 0; k < m; ++k) {
      Complex ov = 0;
      for (Eigen::Index u = 0; u < m; ++u)
        ov += comp.evecs(u, k) * psi0[static_cast<Eigen::Index>(comp.members[static_cast<std::size_t>(u)])];
      if (ov != Complex(0.0)) modes.push_back({comp.evals[k], ci, k, ov});
    }
  }
  std::sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) { return a.lambda < b.lambda; });
  SingleSiteState out = SingleSiteState::Zero(avg_->dim(), avg_->dim());
  std::size_t s = 0;
  while (s < modes.size()) {
    std::size_t e = s + 1;
    while (e < modes.size() && modes[e].lambda - modes[e - 1].lambda <= merge_tol) ++e;
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(psi0.size());
    for (std::size_t u = s; u < e; ++u) {
      const auto& comp = comps_[modes[u].comp];
      for (std::size_t r = 0; r < comp.members.size(); ++r)
        v[static_cast<Eigen::Index>(comp.members[r])] +=
            comp.evecs(static_cast<Eigen::Index>(r), modes[u].k) * modes[u].overlap;
    }
    out += (*avg_)(v);
    s = e;
  }
  return out;
}

SingleSiteState DenseSystem::ensemble_at(const InitialEnsemble& ens, double t) const {
  SingleSiteState out;
  for (std::size_t m = 0; m < ens.size(); ++m) {
    SingleSiteState r = ens.probs[m] * site_average(evolve(basis_vector(ens.configs[m]), t));
    if (m == 0) out = r;
    else out += r;
  }
  return out;
}

SingleSiteState DenseSystem::ensemble_longterm(const InitialEnsemble& ens) const {
  SingleSiteState out;
  for (std::size_t m = 0; m < ens.size(); ++m) {
    SingleSiteState r = ens.probs[m] * longterm_site_average(basis_vector(ens.configs[m]));
    if (m == 0) out = r;
    else out += r;
  }
  return out;
}

double dephasing_check(const ham::LocalHamiltonian& h, const Configuration& x,
                       const Configuration& xp, const Eigen::MatrixXcd& B,
                       const std::vector<double>& times, DenseLimits lim) {
  DenseSystem sys(h, {x, xp}, lim);
  const auto ex = sys.basis_vector(x), exp_ = sys.basis_vector(xp);
  double worst = 0.0;
  for (double t : times) {
    const auto psi = sys.evolve(ex, t), phi = sys.evolve(exp_, t);
    // <phi| B^{(L)} |psi> = tr(B M) with M the site average of |psi><phi|.
    const Eigen::MatrixXcd M = sys.site_average(psi, phi);
    worst = std::max(worst, std::abs((B * M).trace()));
  }
  return worst;
}

// ---------------- output ----------------

nlohmann::json state_to_json(const SingleSiteState& rho) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < rho.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < rho.cols(); ++c) row.push_back({rho(r, c).real(), rho(r, c).imag()});
    rows.push_back(row);
  }
  return rows;
}

std::string csv_header(std::uint32_t d) {
  std::string h = "t";
  for (std::uint32_t r = 0; r < d; ++r)
    for (std::uint32_t c = 0; c < d; ++c) h += fmt::format(",re_{}_{},im_{}_{}", r, c, r, c);
  return h;
}

std::string csv_row(double t, const SingleSiteState& rho, const std::vector<double>& extra) {
  std::string s = fmt::format("{:.17g}", t);
  for (Eigen::Index r = 0; r < rho.rows(); ++r)
    for (Eigen::Index c = 0; c < rho.cols(); ++c)
      s += fmt::format(",{:.17g},{:.17g}", rho(r, c).real(), rho(r, c).imag());
  for (double x : extra) s += fmt::format(",{:.17g}", x);
  return s;
}

}  // namespace hca::dyn
