#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "doctest.h"
#include "helpers.hpp"
#include "hca/dynamics.hpp"

using namespace hca;
using namespace hca::rtm;
using namespace hca::dyn;

namespace {

SpecPtr make(const std::string& fixture, Variant v = Variant::OneWay) {
  return std::make_shared<const MachineSpec>(fixture_machine(fixture, v));
}

// exp(-iHt) e_1 for the J-site path (or cycle) by dense diagonalization.
Eigen::VectorXcd dense_orbit_evolution(int J, bool cyclic, double t) {
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(J, J);
  for (int j = 0; j + 1 < J; ++j) H(j, j + 1) = H(j + 1, j) = 1.0;
  if (cyclic) {
    if (J == 1) H(0, 0) = 2.0;
    else {
      H(0, J - 1) += 1.0;
      H(J - 1, 0) += 1.0;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  Eigen::VectorXcd ph(J);
  for (int k = 0; k < J; ++k) ph[k] = std::polar(1.0, -es.eigenvalues()[k] * t) * es.eigenvectors()(0, k);
  return es.eigenvectors().cast<Complex>() * ph;
}

// Exact value of sum_{k=1}^{J} cos(m k pi/(J+1)).
BigInt cos_sum(std::int64_t m, std::uint64_t J) {
  const std::int64_t N = static_cast<std::int64_t>(J) + 1;
  m = std::abs(m);
  if (m % 2 != 0) return 0;
  if ((m / 2) % N == 0) return BigInt(J);
  return -1;
}

// Direct reduction of the trigonometric kernel to cosine sums.
Rational kernel_by_cos_sums(std::uint64_t J, std::uint64_t j, std::uint64_t jp) {
  const auto m1 = static_cast<std::int64_t>(j) - static_cast<std::int64_t>(jp);
  const auto m2 = static_cast<std::int64_t>(j + jp);
  Rational s = Rational(cos_sum(m1, J)) - Rational(cos_sum(m2, J));
  s -= Rational(cos_sum(m1 + 2, J) + cos_sum(m1 - 2, J), 2);
  s += Rational(cos_sum(m2 + 2, J) + cos_sum(m2 - 2, J), 2);
  return s / 4;
}

double kernel_numeric(std::uint64_t J, std::uint64_t j, std::uint64_t jp) {
  using F = boost::multiprecision::cpp_bin_float_50;
  const F pi = boost::math::constants::pi<F>();
  F s = 0;
  for (std::uint64_t k = 1; k <= J; ++k) {
    const F th = pi * F(k) / F(J + 1);
    const F a = sin(th);
    s += a * a * sin(F(j) * th) * sin(F(jp) * th);
  }
  return s.convert_to<double>();
}

std::vector<std::uint32_t> tape_of(const MachineSpec& s, const std::string& pattern) {
  std::vector<std::uint32_t> t;
  for (char ch : pattern) {
    if (ch == 'a') t.push_back(s.symbols.a_or_throw("a1"));
    else t.push_back(s.symbols.m_or_throw(static_cast<std::uint8_t>(ch - '0'), "s0"));
  }
  return t;
}

// All tapes over {a1, M(1), M(3)} with weights (1-al), al/2, al/2.
InitialEnsemble small_ensemble(const MachineSpec& s, int L, double al) {
  InitialEnsemble e;
  const char sym[3] = {'a', '1', '3'};
  const double w[3] = {1 - al, al / 2, al / 2};
  int total = 1;
  for (int i = 0; i < L; ++i) total *= 3;
  for (int code = 0; code < total; ++code) {
    std::string pat;
    double p = 1;
    for (int i = 0, c = code; i < L; ++i, c /= 3) {
      pat += sym[c % 3];
      p *= w[c % 3];
    }
    e.configs.push_back(anchored(s, tape_of(s, pat)));
    e.probs.push_back(p);
  }
  double tot = 0;
  for (double p : e.probs) tot += p;
  for (double& p : e.probs) p /= tot;
  return e;
}

double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("evolve_spectral: identity at t = 0 and unitarity") {
  for (std::uint64_t J : {1, 2, 5, 17}) {
    auto a = evolve_spectral(ham::path_spectrum(J), 0.0);
    CHECK(std::abs(a[0] - Complex(1.0)) < 1e-12);
    for (Eigen::Index j = 1; j < a.size(); ++j) CHECK(std::abs(a[j]) < 1e-12);
    for (double t : {0.3, 7.0, 49.5}) {
      CHECK(std::abs(evolve_spectral(ham::path_spectrum(J), t).norm() - 1.0) < 1e-10);
      CHECK(std::abs(evolve_spectral(ham::cycle_spectrum(J), t).norm() - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("evolve_spectral matches dense diagonalization of the orbit matrix") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> T(0.0, 50.0);
  for (int J = 1; J <= 12; ++J)
    for (int n = 0; n < 20; ++n) {
      const double t = T(rng);
      CHECK((evolve_spectral(ham::path_spectrum(J), t) - dense_orbit_evolution(J, false, t)).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((evolve_spectral(ham::cycle_spectrum(J), t) - dense_orbit_evolution(J, true, t)).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("dense system: identity, norm, agreement with the spectral formula") {
  std::mt19937_64 rng(2);
  auto s = make("HALT_NOW:0");
  auto h = ham::compile(s, Boundary::Periodic);
  for (int n = 0; n < 5; ++n) {
    auto c = testutil::random_anchored(*s, 4, 0.4, rng);
    DenseSystem sys(h, {c});
    auto orbit = run_orbit(s, c, 10000);
    REQUIRE(orbit.terminal == Terminal::DeadEnd);
    CHECK(sys.dim() == orbit.length());
    auto e = sys.basis_vector(c);
    CHECK((sys.evolve(e, 0.0) - e).norm() < 1e-12);
    for (double t : {0.7, 5.0, 31.0}) {
      auto psi = sys.evolve(e, t);
      CHECK(std::abs(psi.norm() - 1.0) < 1e-10);
      auto amps = evolve_spectral(orbit, t).amps;
      auto states = orbit.states();
      double err = 0, outside = 1.0;
      for (std::size_t j = 0; j < states.size(); ++j) {
        const Complex a = psi[static_cast<Eigen::Index>(*sys.index(states[j]))];
        err = std::max(err, std::abs(a - amps[static_cast<Eigen::Index>(j)]));
        outside -= std::norm(a);
      }
      CHECK(err < 1e-9);
      CHECK(std::abs(outside) < 1e-12);
    }
  }
}

TEST_CASE("dense system: dimension guard") {
  auto s = make("HALT_NOW:0");
  auto h = ham::compile(s, Boundary::Periodic);
  std::mt19937_64 rng(3);
  auto c = testutil::random_anchored(*s, 6, 0.0, rng);
  try {
    DenseSystem sys(h, {c}, DenseLimits{5, 4096});
    FAIL("expected DimensionGuard");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionGuard);
  }
}

TEST_CASE("time_avg_probs examples") {
  auto p5 = time_avg_probs(Terminal::DeadEnd, 5);
  std::vector<Rational> want5{Rational(1, 4), Rational(1, 6), Rational(1, 6), Rational(1, 6), Rational(1, 4)};
  CHECK(p5 == want5);
  auto p2 = time_avg_probs(Terminal::DeadEnd, 2);
  CHECK(p2 == std::vector<Rational>{Rational(1, 2), Rational(1, 2)});
  CHECK(time_avg_probs(Terminal::DeadEnd, 1) == std::vector<Rational>{Rational(1)});
  try {
    (void)time_avg_probs(Terminal::Truncated, 3);
    FAIL("expected TruncatedOrbit");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TruncatedOrbit);
  }
}

TEST_CASE("property: p_j sums to one and equals the eigenvector-overlap sum") {
  for (std::uint64_t J = 1; J <= 120; ++J) {
    auto p = time_avg_probs(Terminal::DeadEnd, J);
    Rational sum = 0;
    for (auto& x : p) sum += x;
    CHECK(sum == 1);
    // sum_k |phi_k(1)|^2 |phi_k(j)|^2 = 4/(J+1)^2 * kernel(J, j, j)
    const Rational pre(BigInt(4), BigInt(J + 1) * BigInt(J + 1));
    for (std::uint64_t j = 1; j <= J; ++j) CHECK(p[j - 1] == pre * kernel_by_cos_sums(J, j, j));
    auto pc = time_avg_probs(Terminal::Cycle, J);
    Rational sc = 0;
    for (auto& x : pc) sc += x;
    CHECK(sc == 1);
  }
}

TEST_CASE("time average: long numerical integration at J = 8") {
  const int J = 8;
  const auto sp = ham::path_spectrum(J);
  const double T = 1e4 * J, dt = std::numbers::pi / (8.0 * 2.0);
  const auto steps = static_cast<std::int64_t>(T / dt);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(J);
  for (std::int64_t s = 0; s <= steps; ++s) {
    const double w = (s == 0 || s == steps) ? 0.5 : 1.0;
    auto a = evolve_spectral(sp, static_cast<double>(s) * dt);
    for (int j = 0; j < J; ++j) acc[j] += w * std::norm(a[j]);
  }
  acc /= static_cast<double>(steps);
  auto p = time_avg_probs(Terminal::DeadEnd, J);
  for (int j = 0; j < J; ++j) CHECK(std::abs(acc[j] - to_double(p[j])) < 5e-3);
}

TEST_CASE("trig_kernel examples and cases") {
  CHECK(trig_kernel(4, 2, 2) == Rational(5, 4));
  CHECK(trig_kernel(4, 1, 1) == Rational(15, 8));
  CHECK(trig_kernel(9, 2, 4) == Rational(-10, 8));
  CHECK(std::abs(kernel_numeric(9, 2, 4) + 1.25) < 1e-30 + 1e-15);
  for (std::uint64_t J = 1; J <= 60; ++J)
    for (std::uint64_t j = 1; j <= J; ++j)
      for (std::uint64_t jp = 1; jp <= J; ++jp) {
        const Rational k = trig_kernel(J, j, jp);
        REQUIRE(k == kernel_by_cos_sums(J, j, jp));
        if (J <= 20) CHECK(std::abs(kernel_numeric(J, j, jp) - to_double(k)) < 1e-12);
      }
}

TEST_CASE("longterm_element agrees with dense spectral projections") {
  for (std::uint64_t J = 1; J <= 16; ++J)
    for (bool cyc : {false, true}) {
      Eigen::MatrixXd H = Eigen::MatrixXd::Zero(J, J);
      for (std::uint64_t j = 0; j + 1 < J; ++j) H(j, j + 1) = H(j + 1, j) = 1.0;
      if (cyc) {
        if (J == 1) H(0, 0) = 2;
        else {
          H(0, J - 1) += 1;
          H(J - 1, 0) += 1;
        }
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
      Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(J, J);
      std::size_t s = 0;
      while (s < J) {
        std::size_t e = s + 1;
        while (e < J && es.eigenvalues()[e] - es.eigenvalues()[e - 1] < 1e-9) ++e;
        Eigen::VectorXd v = Eigen::VectorXd::Zero(J);
        for (std::size_t k = s; k < e; ++k) v += es.eigenvectors().col(k) * es.eigenvectors()(0, k);
        rho += v * v.transpose();
        s = e;
      }
      const Terminal term = cyc ? Terminal::Cycle : Terminal::DeadEnd;
      auto p = time_avg_probs(term, J);
      for (std::uint64_t a = 1; a <= J; ++a) {
        CHECK(std::abs(rho(a - 1, a - 1) - to_double(p[a - 1])) < 1e-12);
        for (std::uint64_t b = 1; b <= J; ++b)
          CHECK(std::abs(rho(a - 1, b - 1) - to_double(longterm_element(term, J, a, b))) < 1e-12);
      }
    }
}

TEST_CASE("SiteAverager matches an explicit partial trace") {
  // Three sites, d = 3: random vector over a handful of basis states.
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  const std::uint32_t d = 3;
  std::vector<std::vector<std::uint32_t>> basis;
  for (std::uint32_t x = 0; x < 27; ++x)
    if (x % 4 != 1) basis.push_back({x % 3, (x / 3) % 3, x / 9});
  SiteAverager avg(d, basis);
  Eigen::VectorXcd psi(basis.size()), phi(basis.size());
  for (Eigen::Index i = 0; i < psi.size(); ++i) {
    psi[i] = Complex(g(rng), g(rng));
    phi[i] = Complex(g(rng), g(rng));
  }
  // Embed into the full 27-dim space and trace out by brute force.
  Eigen::VectorXcd full_psi = Eigen::VectorXcd::Zero(27), full_phi = Eigen::VectorXcd::Zero(27);
  for (std::size_t y = 0; y < basis.size(); ++y) {
    const auto idx = basis[y][0] + 3 * basis[y][1] + 9 * basis[y][2];
    full_psi[idx] = psi[static_cast<Eigen::Index>(y)];
    full_phi[idx] = phi[static_cast<Eigen::Index>(y)];
  }
  Eigen::MatrixXcd expect = Eigen::MatrixXcd::Zero(d, d);
  for (int site = 0; site < 3; ++site)
    for (std::uint32_t u = 0; u < 27; ++u)
      for (std::uint32_t w = 0; w < 27; ++w) {
        std::uint32_t du[3] = {u % 3, (u / 3) % 3, u / 9}, dw[3] = {w % 3, (w / 3) % 3, w / 9};
        bool same = true;
        for (int s = 0; s < 3; ++s)
          if (s != site && du[s] != dw[s]) same = false;
        if (same) expect(du[site], dw[site]) += full_psi[u] * std::conj(full_phi[w]);
      }
  expect /= 3.0;
  CHECK(max_abs(avg(psi, phi) - expect) < 1e-12);
}

TEST_CASE("site_average_state examples") {
  auto s = make("HALT_NOW");
  const auto ref = reference_sites(*s);
  const std::uint32_t d = s->site_dim();
  Configuration all_e1{std::vector<std::uint32_t>(5, ref.e1), Boundary::Periodic};
  CHECK(max_abs(site_average_config(d, all_e1) - projector(d, ref.e1)) < 1e-15);
  for (std::uint32_t L : {3u, 7u, 20u}) {
    std::mt19937_64 rng(L);
    auto c = testutil::random_anchored(*s, L, 0.3, rng);
    EnsembleDynamics dyn(s, InitialEnsemble::single(c));
    auto rho = dyn.at(0.0);
    CHECK(std::abs(rho(ref.e0, ref.e0) - Complex(1.0 / (L + 1))) < 1e-12);
    CHECK(check_state(rho).empty());
  }
}

TEST_CASE("ensemble path equals the dense path") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> T(0.0, 40.0);
  for (std::string f : {"HALT_NOW:0", "PING_PONG"})
    for (auto v : {Variant::OneWay, Variant::TwoWay}) {
      auto s = make(f, v);
      auto h = ham::compile(s, Boundary::Periodic);
      for (int L : {3, 4}) {
        auto ens = small_ensemble(*s, L, 0.3);
        EnsembleDynamics dyn(s, ens);
        DenseSystem sys(h, ens.configs);
        for (int n = 0; n < 10; ++n) {
          const double t = T(rng);
          auto a = dyn.at(t), b = sys.ensemble_at(ens, t);
          CHECK(max_abs(a - b) < 1e-9);
          CHECK(check_state(a).empty());
        }
        CHECK(max_abs(dyn.longterm() - sys.ensemble_longterm(ens)) < 1e-9);
      }
    }
}

TEST_CASE("coherent product state: A-cell block of the space average dephases") {
  // |e0> (x) |psi>^L evolved as one superposition vs the classical mixture.
  auto s = make("HALT_NOW:0");
  auto h = ham::compile(s, Boundary::Periodic);
  const int L = 4;
  auto ens = small_ensemble(*s, L, 0.3);
  DenseSystem sys(h, ens.configs);
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(sys.dim()));
  for (std::size_t m = 0; m < ens.size(); ++m) psi[static_cast<Eigen::Index>(*sys.index(ens.configs[m]))] = std::sqrt(ens.probs[m]);
  std::vector<std::uint32_t> a_sites;
  for (std::uint32_t x = 0; x < s->num_tape(); ++x)
    if (s->symbols.at(x).kind == CellKind::A) a_sites.push_back(x);
  for (double t : {0.0, 3.3, 17.0}) {
    auto coh = sys.site_average(sys.evolve(psi, t));
    auto mix = sys.ensemble_at(ens, t);
    for (auto a : a_sites)
      for (auto b : a_sites) CHECK(std::abs(coh(a, b) - mix(a, b)) < 1e-12);
  }
}

TEST_CASE("longterm: single configuration equals dense spectral projection") {
  std::mt19937_64 rng(6);
  for (std::string f : {"HALT_NOW:0", "HALT_NOW", "PING_PONG"})
    for (auto v : {Variant::OneWay, Variant::TwoWay, Variant::IidRepeat}) {
      auto s = make(f, v);
      auto h = ham::compile(s, Boundary::Periodic);
      for (int n = 0; n < 4; ++n) {
        auto c = testutil::random_anchored(*s, 5, 0.4, rng);
        auto ens = InitialEnsemble::single(c);
        DenseSystem sys(h, {c});
        auto dense = sys.longterm_site_average(sys.basis_vector(c));
        EnsembleDynamics dyn(s, ens);
        CHECK(max_abs(dyn.longterm() - dense) < 1e-9);
        auto lt = longterm_site_average(*s, ens, 1u << 20);
        CHECK(max_abs(lt.exact - dense) < 1e-9);
        CHECK(check_state(lt.exact).empty());
        CHECK(check_state(lt.uniform).empty());
        CHECK(trace_distance(lt.exact, lt.uniform) <= lt.radius * 2 + 1e-12);
      }
    }
  // Cycle orbits of the standalone bouncer.
  auto s = make("PING_PONG", Variant::Plain);
  auto h = ham::compile(s, Boundary::Periodic);
  const auto wall = s->symbols.m_or_throw(0, "s0"), a1 = s->symbols.a_or_throw("a1");
  Configuration c{{s->control(s->state("R"), 0), a1, a1, wall, a1}, Boundary::Periodic};
  DenseSystem sys(h, {c});
  auto lt = longterm_site_average(*s, InitialEnsemble::single(c), 1000);
  CHECK(max_abs(lt.exact - sys.longterm_site_average(sys.basis_vector(c))) < 1e-9);
}

TEST_CASE("longterm: non-halting fixture stays near e1") {
  std::mt19937_64 rng(8);
  auto s = make("PING_PONG");
  const auto ref = reference_sites(*s);
  for (std::uint32_t L : {100u, 200u}) {
    const double alpha = 1.0 / 64;
    InitialEnsemble ens;
    for (int n = 0; n < 4; ++n) {
      ens.configs.push_back(testutil::random_anchored(*s, L, alpha, rng));
      ens.probs.push_back(0.25);
    }
    auto lt = longterm_site_average(*s, ens, 1ull << 32);
    const double dev = 1.0 - lt.exact(ref.e1, ref.e1).real();
    CHECK(dev <= alpha + 2.0 / L + std::pow(L, -1.0 / 3));
  }
}

TEST_CASE("trace_distance examples and metric property") {
  const std::uint32_t d = 4;
  auto e1 = projector(d, 1), e2 = projector(d, 2);
  CHECK(trace_distance(e1, e1) == doctest::Approx(0.0));
  CHECK(trace_distance(e1, e2) == doctest::Approx(2.0));
  CHECK(trace_distance(e1, 0.5 * (e1 + e2)) == doctest::Approx(1.0));
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  auto random_state = [&]() {
    Eigen::MatrixXcd A(d, d);
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = Complex(g(rng), g(rng));
    Eigen::MatrixXcd r = A * A.adjoint();
    return Eigen::MatrixXcd(r / r.trace());
  };
  for (int n = 0; n < 200; ++n) {
    auto a = random_state(), b = random_state(), c = random_state();
    CHECK(check_state(a).empty());
    CHECK(std::abs(trace_distance(a, b) - trace_distance(b, a)) < 1e-12);
    CHECK(trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-12);
  }
}

TEST_CASE("dephasing between distinct initial configurations") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> T(0.0, 30.0);
  auto s = make("HALT_NOW:0");
  auto h = ham::compile(s, Boundary::Periodic);
  const auto ref = reference_sites(*s);
  const std::uint32_t d = s->site_dim();
  Eigen::MatrixXcd B21 = Eigen::MatrixXcd::Zero(d, d);
  B21(ref.e2, ref.e1) = 1.0;
  std::vector<double> times;
  for (int n = 0; n < 20; ++n) times.push_back(T(rng));
  for (int n = 0; n < 5; ++n) {
    auto x = testutil::random_anchored(*s, 5, 0.4, rng);
    auto xp = testutil::random_anchored(*s, 5, 0.4, rng);
    if (x == xp) continue;
    CHECK(dephasing_check(h, x, xp, B21, times) <= 1e-12);
    CHECK(dephasing_check(h, x, xp, projector(d, ref.e1), times) <= 1e-12);
  }
  // Diagonal term is generally nonzero.
  auto x = testutil::random_anchored(*s, 5, 0.0, rng);
  CHECK(dephasing_check(h, x, x, projector(d, ref.e1), times) > 0.1);
}

TEST_CASE("two-block configuration evolves as a product of block evolutions") {
  auto s = make("HALT_NOW:0", Variant::IidRepeat);
  auto h = ham::compile(s, Boundary::Periodic);
  std::mt19937_64 rng(12);
  for (int n = 0; n < 3; ++n) {
    auto b1 = anchored(*s, testutil::random_tape(*s, 2, 0.5, 0.5, 1.0, rng), Boundary::Open);
    auto b2 = anchored(*s, testutil::random_tape(*s, 3, 0.5, 0.5, 1.0, rng), Boundary::Open);
    Configuration whole{b1.cells, Boundary::Periodic};
    whole.cells.insert(whole.cells.end(), b2.cells.begin(), b2.cells.end());
    DenseSystem all(h, {whole}), s1(h, {b1}), s2(h, {b2});
    for (double t : {0.5, 4.0, 11.0}) {
      auto psi = all.evolve(all.basis_vector(whole), t);
      auto p1 = s1.evolve(s1.basis_vector(b1), t), p2 = s2.evolve(s2.basis_vector(b2), t);
      CHECK(all.dim() == s1.dim() * s2.dim());
      double err = 0;
      for (std::size_t u = 0; u < s1.dim(); ++u)
        for (std::size_t w = 0; w < s2.dim(); ++w) {
          Configuration y{s1.basis(u).cells, Boundary::Periodic};
          y.cells.insert(y.cells.end(), s2.basis(w).cells.begin(), s2.basis(w).cells.end());
          auto iy = all.index(y);
          REQUIRE(iy.has_value());
          err = std::max(err, std::abs(psi[static_cast<Eigen::Index>(*iy)] -
                                       p1[static_cast<Eigen::Index>(u)] * p2[static_cast<Eigen::Index>(w)]));
        }
      CHECK(err < 1e-10);
    }
    // Orbit path for the two-block configuration matches the dense path.
    EnsembleDynamics dyn(s, InitialEnsemble::single(whole));
    for (double t : {1.0, 6.0})
      CHECK(max_abs(dyn.at(t) - all.ensemble_at(InitialEnsemble::single(whole), t)) < 1e-9);
  }
}

TEST_CASE("property: long-time average of an observable is within (2/L)||B|| of the p_j sum") {
  std::mt19937_64 rng(13);
  auto s = make("HALT_NOW:0");
  const auto ref = reference_sites(*s);
  for (int L : {3, 4, 5, 6}) {
    auto c = testutil::random_anchored(*s, static_cast<std::size_t>(L), 0.3, rng);
    EnsembleDynamics dyn(s, InitialEnsemble::single(c));
    const auto& od = *dyn.orbits().front();
    const std::uint64_t J = od.orbit.length();
    auto p = time_avg_probs(od.orbit);
    double pj_sum = 0;
    std::uint64_t idx = 0;
    od.orbit.for_each([&](std::uint64_t, const Configuration& x) {
      pj_sum += to_double(p[idx++]) * site_average_config(s->site_dim(), x)(ref.e1, ref.e1).real();
    });
    const double T = 1e3 * static_cast<double>(J), dt = std::numbers::pi / 16.0;
    const auto steps = static_cast<std::int64_t>(T / dt);
    double acc = 0;
    for (std::int64_t k = 0; k <= steps; ++k) {
      const double w = (k == 0 || k == steps) ? 0.5 : 1.0;
      acc += w * od.at(static_cast<double>(k) * dt)(ref.e1, ref.e1).real();
    }
    acc /= static_cast<double>(steps);
    CHECK(std::abs(acc - pj_sum) <= 2.0 / L);
  }
}

TEST_CASE("property: site average of a mixture is the mixture of site averages") {
  auto s = make("HALT_NOW");
  auto ens = small_ensemble(*s, 3, 0.5);
  EnsembleDynamics whole(s, ens);
  for (double t : {0.0, 2.5, 9.0}) {
    Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(s->site_dim(), s->site_dim());
    for (std::size_t m = 0; m < ens.size(); ++m)
      sum += ens.probs[m] * EnsembleDynamics(s, InitialEnsemble::single(ens.configs[m])).at(t);
    CHECK(max_abs(sum - whole.at(t)) < 1e-12);
  }
}

TEST_CASE("state output") {
  auto rho = projector(2, 1);
  auto j = state_to_json(rho);
  CHECK(j[1][1][0] == 1.0);
  CHECK(csv_header(2).rfind("t,re_0_0,im_0_0", 0) == 0);
  CHECK(csv_row(0.5, rho, {1.0}) == "0.5,0,0,0,0,0,0,1,0,1");
}
