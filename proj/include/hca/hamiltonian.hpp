#pragma once

#include <optional>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "hca/rtm.hpp"

namespace hca::ham {

// U as a sum of 1- and 2-local partial injections on basis states. Two-body
// keys pack (left site value, right site value) into one word.
class LocalHamiltonian {
 public:
  rtm::SpecPtr spec;
  rtm::Boundary boundary = rtm::Boundary::Periodic;
  std::uint32_t d = 0;

  using PairMap = std::unordered_map<std::uint64_t, std::uint64_t>;
  using SiteMap = std::unordered_map<std::uint32_t, std::uint32_t>;
  PairMap u0;   // (m0 q, s) -> (m1 q', s')
  PairMap u1p;  // (m1 q, s) -> (s, m0 q), q in Q+
  PairMap u1m;  // (s, m1 q) -> (m0 q, s), q in Q-
  SiteMap u10;  // m1 q -> m0 q, q in Q0

  static std::uint64_t key(std::uint32_t a, std::uint32_t b) {
    return (static_cast<std::uint64_t>(a) << 32) | b;
  }
  static std::uint32_t first(std::uint64_t k) { return static_cast<std::uint32_t>(k >> 32); }
  static std::uint32_t second(std::uint64_t k) { return static_cast<std::uint32_t>(k); }

  // Inverse maps, filled by compile.
  PairMap u0_inv, u1p_inv, u1m_inv;
  SiteMap u10_inv;

  std::size_t num_entries() const { return u0.size() + u1p.size() + u1m.size() + u10.size(); }
};

LocalHamiltonian compile(rtm::SpecPtr spec, rtm::Boundary boundary);

// All basis states reached by one local term (U|x> as a sum of basis states).
std::vector<rtm::Configuration> apply_U_all(const LocalHamiltonian& h, const rtm::Configuration& c);
std::vector<rtm::Configuration> apply_U_dagger_all(const LocalHamiltonian& h,
                                                   const rtm::Configuration& c);

// Single-control configurations. nullopt is the zero vector.
std::optional<rtm::Configuration> apply_U(const LocalHamiltonian& h, const rtm::Configuration& c);
std::optional<rtm::Configuration> apply_U_dagger(const LocalHamiltonian& h,
                                                 const rtm::Configuration& c);

struct OrbitSpectrum {
  rtm::Terminal terminal;
  std::uint64_t J;
  std::vector<double> eigenvalues;  // k = 1..J (dead end) or k = 0..J-1 (cycle)

  // <j|phi_k>, j 1-based; k indexes eigenvalues.
  std::complex<double> component(std::uint64_t j, std::size_t k) const;
  // J x J matrix with eigenvectors as columns.
  Eigen::MatrixXcd vectors() const;
  // Smallest gap between distinct eigenvalues (infinity when there is only one).
  double min_gap(double merge_tol = 1e-12) const;
};

OrbitSpectrum orbit_spectrum(const rtm::Orbit& orbit);
OrbitSpectrum path_spectrum(std::uint64_t J);
OrbitSpectrum cycle_spectrum(std::uint64_t J);

Rational energy_gap_bound(const rtm::Orbit& orbit);
Rational energy_gap_bound(std::uint64_t J);

nlohmann::json to_json(const LocalHamiltonian& h);

}  // namespace hca::ham
