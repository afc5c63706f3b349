#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include <Eigen/Dense>

#include "doctest.h"
#include "helpers.hpp"
#include "hca/hamiltonian.hpp"

using namespace hca;
using namespace hca::rtm;
using hca::ham::LocalHamiltonian;

namespace {

SpecPtr make(const std::string& fixture, Variant v = Variant::OneWay) {
  return std::make_shared<const MachineSpec>(fixture_machine(fixture, v));
}

// Eigenvalues of the J-site path adjacency matrix, computed numerically.
std::vector<double> path_eigs(int J, bool cyclic = false) {
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(J, J);
  for (int j = 0; j + 1 < J; ++j) H(j, j + 1) = H(j + 1, j) = 1.0;
  if (cyclic && J > 1) {
    H(0, J - 1) += 1.0;
    H(J - 1, 0) += 1.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  std::vector<double> e(es.eigenvalues().data(), es.eigenvalues().data() + J);
  return e;
}

std::vector<double> sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_CASE("compile: pair maps are injective and skip the forbidden box read") {
  for (auto v : {Variant::OneWay, Variant::TwoWay, Variant::IidRepeat})
    for (std::string f : {"HALT_NOW", "PING_PONG", "COUNTER:2"}) {
      auto s = make(f, v);
      auto h = ham::compile(s, Boundary::Periodic);
      CHECK(h.d == s->site_dim());
      for (const auto* m : {&h.u0, &h.u1p, &h.u1m}) {
        std::set<std::uint64_t> targets;
        for (auto& [k, t] : *m) CHECK(targets.insert(t).second);
      }
      for (auto& [k, t] : h.u0) {
        const auto a = LocalHamiltonian::first(k), b = LocalHamiltonian::second(k);
        REQUIRE(s->is_control(a));
        CHECK(s->mode(a) == 0);
        CHECK_FALSE(s->is_control(b));
        CHECK_FALSE((s->dir(s->ustate(a)) == 1 && s->symbols.is_box(b)));
      }
      // No term touches two control sites.
      for (const auto* m : {&h.u0, &h.u1p, &h.u1m})
        for (auto& [k, t] : *m)
          CHECK((s->is_control(LocalHamiltonian::first(k)) + s->is_control(LocalHamiltonian::second(k))) == 1);
    }
}

TEST_CASE("compile rejects a non-reversible machine") {
  MachineSpec s = ping_pong_standalone();
  s.rules.push_back(s.rules.front());
  s.rules.back().s = s.symbols.a_or_throw("a1") == s.rules.front().s ? s.symbols.m_or_throw(0, "s0")
                                                                      : s.symbols.a_or_throw("a1");
  s.finalize();
  try {
    ham::compile(std::make_shared<const MachineSpec>(s), Boundary::Periodic);
    FAIL("expected NotReversible");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotReversible);
  }
}

TEST_CASE("apply_U agrees with step on random configurations") {
  std::mt19937_64 rng(7);
  for (auto v : {Variant::OneWay, Variant::TwoWay, Variant::IidRepeat}) {
    auto s = make("HALT_NOW", v);
    for (auto bd : {Boundary::Periodic, Boundary::Open}) {
      auto h = ham::compile(s, bd);
      int acted = 0;
      for (int n = 0; n < 100; ++n) {
        std::uniform_int_distribution<int> Ld(1, 8);
        auto c = testutil::random_anchored(*s, static_cast<std::size_t>(Ld(rng)), 0.4, rng);
        c.boundary = bd;
        // A random point of the orbit, so that all stages are exercised.
        auto o = run_orbit(s, c, 100000);
        std::uniform_int_distribution<std::uint64_t> jd(1, o.length());
        c = o.at(jd(rng));
        auto a = ham::apply_U(h, c);
        auto b = step(*s, c);
        REQUIRE(a.has_value() == b.has_value());
        if (a) {
          CHECK(*a == *b);
          ++acted;
        }
      }
      CHECK(acted > 80);
    }
  }
  // Arbitrary single-control configurations, most of them illegal.
  auto s = make("PING_PONG", Variant::TwoWay);
  auto h = ham::compile(s, Boundary::Periodic);
  for (int n = 0; n < 500; ++n) {
    auto c = testutil::random_any(*s, 4, rng);
    auto a = ham::apply_U(h, c);
    auto b = step(*s, c);
    REQUIRE(a.has_value() == b.has_value());
    if (a) CHECK(*a == *b);
  }
}

TEST_CASE("apply_U: (m0, q in Q+) next to a box cell gives zero") {
  auto s = make("HALT_NOW");
  auto h = ham::compile(s, Boundary::Periodic);
  const auto box = s->symbols.a_or_throw(kBox);
  const auto a1 = s->symbols.a_or_throw("a1");
  int checked = 0;
  for (std::uint32_t q = 0; q < s->num_states(); ++q) {
    if (s->dir(q) != 1) continue;
    Configuration c{{s->control(q, 0), box, a1, a1}, Boundary::Periodic};
    CHECK_FALSE(ham::apply_U(h, c).has_value());
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("apply_U_dagger inverts apply_U; initial configurations have no predecessor") {
  std::mt19937_64 rng(11);
  for (auto v : {Variant::OneWay, Variant::TwoWay, Variant::IidRepeat})
    for (std::string f : {"HALT_NOW", "HALT_NOW:0", "PING_PONG", "COUNTER:2"}) {
      auto s = make(f, v);
      auto h = ham::compile(s, Boundary::Periodic);
      for (int n = 0; n < 20; ++n) {
        auto c = testutil::random_anchored(*s, 5, 0.5, rng);
        CHECK_FALSE(ham::apply_U_dagger(h, c).has_value());
        auto orbit = run_orbit(s, c, 5000);
        REQUIRE(orbit.terminal != Terminal::Truncated);
        auto states = orbit.states();
        for (std::size_t j = 0; j + 1 < states.size(); ++j) {
          auto nx = ham::apply_U(h, states[j]);
          REQUIRE(nx.has_value());
          CHECK(*nx == states[j + 1]);
          auto back = ham::apply_U_dagger(h, *nx);
          REQUIRE(back.has_value());
          CHECK(*back == states[j]);
        }
        if (orbit.terminal == Terminal::DeadEnd) CHECK_FALSE(ham::apply_U(h, states.back()).has_value());
      }
    }
  // The standalone bouncer has no distinguished initial state; its orbits are cycles.
  auto s = make("PING_PONG", Variant::Plain);
  auto h = ham::compile(s, Boundary::Periodic);
  const auto wall = s->symbols.m_or_throw(0, "s0"), a1 = s->symbols.a_or_throw("a1");
  Configuration c{{s->control(s->state("R"), 0), a1, a1, a1, wall}, Boundary::Periodic};
  auto o = run_orbit(s, c, 1000);
  CHECK(o.terminal == Terminal::Cycle);
  auto last = o.at(o.length());
  CHECK(*ham::apply_U(h, last) == c);
}

TEST_CASE("apply_U rejects malformed input") {
  auto s = make("HALT_NOW");
  auto h = ham::compile(s, Boundary::Periodic);
  const auto a1 = s->symbols.a_or_throw("a1");
  Configuration none{{a1, a1, a1}, Boundary::Periodic};
  Configuration bad{{a1, s->site_dim()}, Boundary::Periodic};
  for (const auto& c : {none, bad}) {
    try {
      (void)ham::apply_U(h, c);
      FAIL("expected MalformedConfiguration");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedConfiguration);
    }
  }
}

TEST_CASE("property: locality of the action at the control site") {
  std::mt19937_64 rng(3);
  auto s = make("PING_PONG", Variant::TwoWay);
  auto h = ham::compile(s, Boundary::Periodic);
  std::uniform_int_distribution<std::uint32_t> sym(0, s->num_tape() - 1);
  int n_checked = 0;
  for (int n = 0; n < 300; ++n) {
    auto c = testutil::random_anchored(*s, 8, 0.4, rng);
    std::uniform_int_distribution<int> steps(0, 80);
    for (int k = steps(rng); k > 0; --k) {
      auto nx = step(*s, c);
      if (!nx) break;
      c = *nx;
    }
    const std::size_t n_sites = c.size();
    const std::size_t p = control_sites(*s, c).front();
    std::uniform_int_distribution<std::size_t> off(2, n_sites - 2);
    const std::size_t far = (p + off(rng)) % n_sites;
    Configuration flipped = c;
    flipped.cells[far] = sym(rng);
    auto a = ham::apply_U(h, c), b = ham::apply_U(h, flipped);
    REQUIRE(a.has_value() == b.has_value());
    if (a) {
      for (std::size_t i = 0; i < n_sites; ++i)
        if (i != far) CHECK(a->cells[i] == b->cells[i]);
      ++n_checked;
    }
  }
  CHECK(n_checked > 100);
}

TEST_CASE("property: block isolation for several controls") {
  std::mt19937_64 rng(5);
  for (std::string f : {"HALT_NOW", "PING_PONG", "COUNTER:2"}) {
    auto s = make(f, Variant::IidRepeat);
    auto h = ham::compile(s, Boundary::Periodic);
    for (int n = 0; n < 30; ++n) {
      // Two blocks, each advanced independently along its own orbit.
      std::uniform_int_distribution<int> len(2, 5), steps(0, 60);
      std::vector<Configuration> parts;
      for (int b = 0; b < 2; ++b) {
        auto c = testutil::random_anchored(*s, static_cast<std::size_t>(len(rng)), 0.5, rng);
        c.boundary = Boundary::Open;
        for (int k = steps(rng); k > 0; --k) {
          auto nx = step(*s, c);
          if (!nx) break;
          c = *nx;
        }
        parts.push_back(c);
      }
      Configuration whole{parts[0].cells, Boundary::Periodic};
      whole.cells.insert(whole.cells.end(), parts[1].cells.begin(), parts[1].cells.end());
      const std::size_t offsets[2] = {0, parts[0].size()};
      // Whole-lattice successors = per-block successors embedded in place.
      std::set<std::vector<std::uint32_t>> expect, got;
      for (std::size_t b = 0; b < 2; ++b) {
        auto nx = step(*s, parts[b]);
        if (!nx) continue;
        auto cells = whole.cells;
        std::copy(nx->cells.begin(), nx->cells.end(), cells.begin() + static_cast<long>(offsets[b]));
        expect.insert(cells);
      }
      for (auto& y : ham::apply_U_all(h, whole)) got.insert(y.cells);
      CHECK(expect == got);
      std::set<std::vector<std::uint32_t>> expect_b, got_b;
      auto inv = invert(*s);
      for (std::size_t b = 0; b < 2; ++b) {
        auto back = to_inverse_frame(*s, parts[b]);
        auto nx = step(inv, back);
        if (!nx) continue;
        auto y = to_inverse_frame(inv, *nx);
        auto cells = whole.cells;
        std::copy(y.cells.begin(), y.cells.end(), cells.begin() + static_cast<long>(offsets[b]));
        expect_b.insert(cells);
      }
      for (auto& y : ham::apply_U_dagger_all(h, whole)) got_b.insert(y.cells);
      CHECK(expect_b == got_b);
    }
  }
}

TEST_CASE("orbit_spectrum examples") {
  auto s2 = ham::path_spectrum(2);
  auto e2 = sorted(s2.eigenvalues);
  CHECK(e2[0] == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(e2[1] == doctest::Approx(1.0).epsilon(1e-14));
  auto ref2 = path_eigs(2);
  CHECK(std::abs(e2[0] - ref2[0]) < 1e-12);

  auto s7 = ham::path_spectrum(7);
  CHECK(ham::energy_gap_bound(7) == Rational(1, 8));
  CHECK(s7.min_gap() >= 0.125);
  CHECK(s7.min_gap() == doctest::Approx(0.4336).epsilon(1e-3));

  auto c4 = ham::cycle_spectrum(4);
  std::vector<double> want{2, 0, -2, 0};
  for (int k = 0; k < 4; ++k) CHECK(std::abs(c4.eigenvalues[k] - want[k]) < 1e-14);
  auto ref = path_eigs(4, true);
  auto got = sorted(c4.eigenvalues);
  for (int k = 0; k < 4; ++k) CHECK(std::abs(got[k] - ref[k]) < 1e-12);

  CHECK(ham::energy_gap_bound(1) == Rational(2));
  CHECK(std::isinf(ham::path_spectrum(1).min_gap()));
  auto s100 = ham::path_spectrum(100);
  CHECK(to_double(ham::energy_gap_bound(100)) == doctest::Approx(8.0 / (101.0 * 101.0)));
  CHECK(s100.min_gap() >= to_double(ham::energy_gap_bound(100)));

  Orbit truncated;
  try {
    (void)ham::orbit_spectrum(truncated);
    FAIL("expected TruncatedOrbit");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TruncatedOrbit);
  }
}

TEST_CASE("property: spectra match numerical diagonalization; eigenvectors are orthonormal") {
  for (int J = 1; J <= 40; ++J)
    for (bool cyc : {false, true}) {
      auto sp = cyc ? ham::cycle_spectrum(J) : ham::path_spectrum(J);
      auto ref = path_eigs(J, cyc && J > 2);
      if (cyc && J == 2) ref = {-2.0, 2.0};
      if (cyc && J == 1) ref = {2.0};
      auto got = sorted(sp.eigenvalues);
      for (int k = 0; k < J; ++k) CHECK(std::abs(got[k] - ref[k]) < 1e-11);
      Eigen::MatrixXcd V = sp.vectors();
      CHECK((V.adjoint() * V - Eigen::MatrixXcd::Identity(J, J)).norm() < 1e-11);
      double row = 0;
      for (int k = 0; k < J; ++k) row += std::norm(sp.component(1, k));
      CHECK(std::abs(row - 1.0) < 1e-12);
      // H v_k = lambda_k v_k with the orbit adjacency matrix.
      Eigen::MatrixXd H = Eigen::MatrixXd::Zero(J, J);
      for (int j = 0; j + 1 < J; ++j) H(j, j + 1) = H(j + 1, j) = 1.0;
      if (cyc) {
        H(0, J - 1) += 1.0;
        H(J - 1, 0) += 1.0;
      }
      for (int k = 0; k < J; ++k)
        CHECK((H * V.col(k) - sp.eigenvalues[k] * V.col(k)).norm() < 1e-10);
      if (!cyc) CHECK(sp.min_gap() + 1e-12 >= to_double(ham::energy_gap_bound(J)));
    }
}

TEST_CASE("local Hamiltonian JSON") {
  auto s = make("HALT_NOW");
  auto h = ham::compile(s, Boundary::Periodic);
  auto j = ham::to_json(h);
  CHECK(j["site_dim"] == s->site_dim());
  CHECK(j["u0"].size() == h.u0.size());
  CHECK(j["u1_plus"].size() == h.u1p.size());
  CHECK(j["u10"].size() == h.u10.size());
  CHECK(ham::to_json(ham::compile(s, Boundary::Periodic)).dump() == j.dump());
}
