#pragma once

#include <random>
#include <vector>

#include "hca/rtm.hpp"

namespace testutil {

using hca::rtm::Configuration;
using hca::rtm::MachineSpec;

// Fresh tape: A-cells (a1) with probability 1-alpha, else M-cells (b, s0)
// where b1 ~ Bernoulli(p1), b2 ~ Bernoulli(p2).
inline std::vector<std::uint32_t> random_tape(const MachineSpec& spec, std::size_t L, double alpha,
                                              double p1, double p2, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint32_t> t;
  const auto a1 = spec.symbols.a_or_throw("a1");
  for (std::size_t i = 0; i < L; ++i) {
    if (u(rng) >= alpha) {
      t.push_back(a1);
    } else {
      std::uint8_t b = static_cast<std::uint8_t>(2 * (u(rng) < p1) + (u(rng) < p2));
      t.push_back(spec.symbols.m_or_throw(b, "s0"));
    }
  }
  return t;
}

inline Configuration random_anchored(const MachineSpec& spec, std::size_t L, double alpha,
                                     std::mt19937_64& rng, double p1 = 0.5, double p2 = 0.5) {
  return hca::rtm::anchored(spec, random_tape(spec, L, alpha, p1, p2, rng));
}

// Uniformly random single-control configuration over the whole site alphabet.
inline Configuration random_any(const MachineSpec& spec, std::size_t L, std::mt19937_64& rng,
                                hca::rtm::Boundary b = hca::rtm::Boundary::Periodic) {
  Configuration c;
  c.boundary = b;
  std::uniform_int_distribution<std::uint32_t> sym(0, spec.num_tape() - 1);
  std::uniform_int_distribution<std::uint32_t> ctl(spec.num_tape(), spec.site_dim() - 1);
  std::uniform_int_distribution<std::size_t> pos(0, L);
  for (std::size_t i = 0; i <= L; ++i) c.cells.push_back(sym(rng));
  c.cells[pos(rng)] = ctl(rng);
  return c;
}

}  // namespace testutil
