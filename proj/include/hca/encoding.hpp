#pragma once

#include <array>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hca/dynamics.hpp"

namespace hca::enc {

using rtm::Configuration;

struct InputEncoding {
  std::string v;
  std::uint32_t n = 0;
  Rational beta;    // 0.v1...vn in binary
  Rational marker;  // n^-2, probability of b2 = 1
  // Single-site amplitudes of the two M-cell input bits.
  std::array<double, 2> amp_b1() const;
  std::array<double, 2> amp_b2() const;
};

InputEncoding encode_input(const std::string& v);
Rational alpha_from_eps(const Rational& eps1);  // (eps1/4)^2
Rational beta_of(const std::string& v);

enum class Mode { Anchored, Iid };
const char* mode_name(Mode m);
Mode parse_mode(const std::string& s);

struct EnsembleParams {
  Mode mode = Mode::Anchored;
  std::uint64_t L = 0;
  std::uint64_t l = 0;  // block scale, iid only
  Rational alpha;
  bool override_checks = false;  // small-scale runs: record violations, do not refuse

  // Violated size conditions, as readable strings.
  std::vector<std::string> violations(const InputEncoding& in) const;
  nlohmann::json to_json() const;
  static EnsembleParams from_json(const nlohmann::json& j);
};

// Per-site distribution over tape/control values.
struct SiteLaw {
  std::vector<std::uint32_t> values;
  std::vector<Rational> probs;
};
SiteLaw site_law(const rtm::MachineSpec& spec, const EnsembleParams& p, const InputEncoding& in);

// Exhaustive when the support has at most max_support members; otherwise the
// ensemble is left empty and metadata records the sampler parameters.
dyn::InitialEnsemble build_initial_ensemble(const rtm::MachineSpec& spec, const EnsembleParams& p,
                                            const InputEncoding& in,
                                            std::uint64_t max_support = 1000000);

// i.i.d. draws; draw k uses its own generator seeded from (seed, k).
std::vector<Configuration> sample_configs(const rtm::MachineSpec& spec, const EnsembleParams& p,
                                          const InputEncoding& in, std::size_t count,
                                          std::uint64_t seed, unsigned threads = 1);

// ---------------- decoding ----------------

std::string recover_beta(const Rational& beta_prime, std::uint32_t n_prime);

// Statistics the decoder reads from a tape segment.
struct DecodeSummary {
  std::uint64_t cells = 0;     // tape cells (excluding the control)
  std::uint64_t m_cells = 0;
  std::optional<std::uint64_t> n_prime;  // M-cells before the first b2 = 1
  std::uint64_t b1_ones = 0;   // among the first `used` M-cells
  std::uint64_t used = 0;      // min(2^{4n'}, available M-cells)
  // Set when the frequency estimate was drawn from its large-sample law
  // rather than counted.
  std::optional<bool> frequency_ok;
};

DecodeSummary summarize(const rtm::MachineSpec& spec, const std::vector<std::uint32_t>& tape);

struct GoodnessVerdict {
  bool good = true;
  std::vector<std::string> reasons;  // G-a, G-b, GB-1, GB-2, G-c, G-d
  std::uint64_t blocks = 0, bad_blocks = 0, bad_sites = 0;  // iid only
  void fail_with(const std::string& r);
  nlohmann::json to_json() const;
};

// G-a and G-b for one tape segment of L cells.
GoodnessVerdict classify_segment(const DecodeSummary& s, const Rational& alpha,
                                 const InputEncoding& in);
// One iid block of `length` sites whose non-control cells are `tape`:
// GB-1 (l <= length <= l^4) and GB-2 (G-a and G-b on the block).
GoodnessVerdict classify_block(const rtm::MachineSpec& spec, const std::vector<std::uint32_t>& tape,
                               std::uint64_t length, const EnsembleParams& p,
                               const InputEncoding& in);
// Anchored: G-a and G-b on the tape. iid: G-c and G-d over the first K* blocks.
GoodnessVerdict classify_good(const rtm::MachineSpec& spec, const Configuration& c,
                              const EnsembleParams& p, const InputEncoding& in);

// Block decomposition used by the iid conditions: blocks end with a control,
// the first starts at site 0; a trailing control-free run is a last block.
std::vector<std::uint64_t> iid_block_lengths(const rtm::MachineSpec& spec, const Configuration& c);

// floor((1 - l^-2) l^-2 (L+1))
std::uint64_t k_star(const EnsembleParams& p);

struct GoodRateBounds {
  std::optional<Rational> anchored;  // 2/n
  std::optional<Rational> iid;       // 5 l^10 / L
};
GoodRateBounds good_rate_bounds(const EnsembleParams& p, const InputEncoding& in);

// Sufficient-statistic samplers for large lattices. Each returns whether the
// draw is bad; distributions match the product measure except where noted.
struct AnchoredStatSampler {
  EnsembleParams p;
  InputEncoding in;
  // Counts and the marker position are drawn exactly; the frequency estimate
  // over 2^{4n'} cells is drawn from its normal limit.
  GoodnessVerdict draw(std::mt19937_64& rng) const;
};

struct IidStatSampler {
  EnsembleParams p;
  InputEncoding in;
  // Block lengths are drawn exactly; a block of admissible length counts as
  // bad with probability min(1, 2/n).
  GoodnessVerdict draw(std::mt19937_64& rng) const;
};

double bad_rate(const std::function<GoodnessVerdict(std::mt19937_64&)>& draw, std::size_t samples,
                std::uint64_t seed, unsigned threads = 1);

// ---------------- phase decoding ----------------

struct PhaseDecodeResult {
  std::uint32_t length = 0;
  std::string v;
  double worst_basis_deviation = 0.0;  // over all copy points
  std::size_t copy_points = 0;
  std::uint64_t rotations = 0;
};

// Rotation R_theta acts on span{zeta0, zeta1} as the spin-1/2 rotation by
// theta, so R_theta zeta0 = cos(theta/2) zeta0 + sin(theta/2) zeta1.
PhaseDecodeResult phase_decode(const Rational& beta, std::uint32_t n_prime);

nlohmann::json ensemble_to_json(const rtm::MachineSpec& spec, const dyn::InitialEnsemble& e);

}  // namespace hca::enc
