#pragma once

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "hca/encoding.hpp"

namespace hca::ver {

using dyn::SingleSiteState;

// Arithmetic form needed by the grid and the check: 0 < eps1 < eta < 1.
void check_thresholds(double eta, double eps1);
// Instance form: 0 < 2 eps1 < eta < 1.
void check_instance_thresholds(double eta, double eps1);

struct TimeGrid {
  double dt = 0.0;
  std::uint64_t K = 0;            // points t_i = i dt, i = 1..K
  std::optional<double> T0;       // cutoff mode
  double discretization = 0.0;    // (eta - eps1)/2, per-interval guarantee
  double t(std::uint64_t i) const { return static_cast<double>(i) * dt; }
};

// Horizon mode: K = ceil(T/dt). Cutoff mode is the same with T = T0.
TimeGrid make_grid(double eta, double eps1, double normH, double T, bool cutoff = false);

// Exponent 2(L+1) + 2 L^gamma + 1 of the finite-lattice cutoff.
double t0_exponent(std::uint64_t L, double gamma);
// 2^exponent; ParamsViolation when it does not fit a double with unit spacing.
double t0_value(std::uint64_t L, double gamma);

struct CheckResult {
  bool fired = false;
  double lhs = 0.0;        // || rounded average - |e1><e1| ||_1
  double threshold = 0.0;  // eps1 + (5/4)(eta - eps1)
};

// Entries are rounded to multiples of `quantum` before the norm is taken.
// Values within 1e-12 of the threshold count as equal and reject.
CheckResult check_condition(const SingleSiteState& grid_average, std::uint32_t e1, double eta,
                            double eps1, double quantum = std::ldexp(1.0, -40));

// ---------------- truncated series ----------------

using SparseReal = Eigen::SparseMatrix<double>;

struct TaylorOptions {
  double T0 = 0.0;
  double eta = 0.0, eps1 = 0.0;
  double declared_error = 0.0;  // ||H - H_ap||
  bool early_stop = true;       // stop once the remaining tail is below 1e-25
  std::optional<std::uint64_t> terms;  // fixed number of terms, overrides the cap
};

struct TaylorResult {
  Eigen::VectorXcd psi;
  std::uint64_t N = 0;          // ceil(T0 ||H_ap||)
  std::uint64_t terms = 0;      // terms summed, k = 0..terms-1
  std::string precision;
  double bound = 0.0;           // (5/2)(2^{-(N^2-N)} + (eta-eps1)/16)
};

double taylor_bound(std::uint64_t N, double eta, double eps1);
double operator_norm_bound(const SparseReal& H);  // max absolute row sum

// sum_k (-i t H)^k / k! psi0 with the precision chosen from e^{t ||H||}.
TaylorResult truncated_evolution(const SparseReal& H_ap, const Eigen::VectorXcd& psi0, double t,
                                 const TaylorOptions& opt);

// || |a><a| - |b><b| ||_1 for unnormalized vectors.
double pure_distance(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b);

// ---------------- instances ----------------

enum class GapFloorKind { Power, Fgap };

struct DecisionInstance {
  std::string machine = "HALT_NOW:0";  // fixture name or path to a machine JSON file
  rtm::Variant variant = rtm::Variant::OneWay;
  std::vector<std::string> tape_prefix;  // site tags, padded with A:a1 up to L
  std::optional<enc::EnsembleParams> ensemble;
  std::string v;
  double eta = 0.9, eps1 = 0.3;
  double gamma = 1.0;
  GapFloorKind gap_floor = GapFloorKind::Power;
  // f_gap(L, n, J_max); default ceil((J_max+1)^2 / 8).
  std::function<BigInt(std::uint64_t, std::uint32_t, std::uint64_t)> f_gap;
  std::optional<double> t0_override;
  std::uint64_t L = 5;
  std::uint64_t L_min = 5, L_max = 8;  // semi-decision range
  std::uint64_t budget = 100000;       // (K, L) pairs
  int quantum_bits = 40;
  bool early_exit = true;
  unsigned threads = 1;

  nlohmann::json to_json() const;
  static DecisionInstance from_json(const nlohmann::json& j);
};

rtm::SpecPtr instance_machine(const DecisionInstance& inst);
dyn::InitialEnsemble instance_ensemble(const rtm::MachineSpec& spec, const DecisionInstance& inst,
                                       std::uint64_t L);
double gap_floor(const DecisionInstance& inst, std::uint64_t L, std::uint64_t J_max);

enum class Verdict { Yes, No, Accepted, BudgetExhausted };
const char* verdict_name(Verdict v);

struct Decision {
  Verdict verdict = Verdict::No;
  std::optional<std::uint64_t> K, L;  // pair at which the check fired
  double max_lhs = 0.0;
  double threshold = 0.0;
  std::uint64_t pairs = 0;            // semi mode
  double max_measured_error = 0.0;    // finite mode, site-averaged
  double taylor_bound = 0.0;
  bool bound_violated = false;
  nlohmann::json ledger = nlohmann::json::object();
  nlohmann::json to_json() const;
};

Decision decide_finite(const DecisionInstance& inst);
Decision semi_decide(const DecisionInstance& inst);

// Long-term oracle: distance of the infinite-time average from |e1><e1|
// compared against the check threshold.
struct OracleResult {
  Verdict verdict;
  double distance;
};
OracleResult dense_oracle(const DecisionInstance& inst, std::uint64_t L);

// ---------------- reductions ----------------

struct ReductionParameters {
  double c1 = 0.0, eps0 = 0.0, eps1 = 0.0;
  double norm_A = 0.0, diff = 0.0;
};

// e1, e2 index the reference basis states of A.
ReductionParameters reduction_parameters(const Eigen::MatrixXcd& A, double eta,
                                         std::uint32_t e1 = 1, std::uint32_t e2 = 2);

// sigma = (1-s) center + s tau with tau a random density matrix and
// ||sigma - center||_1 <= radius.
Eigen::MatrixXcd sample_ball(const Eigen::MatrixXcd& center, double radius, std::mt19937_64& rng);

struct SeparationCheck {
  double dev1 = 0.0;  // |tr sigma1 A - c1|
  double sep = 0.0;   // |tr A (sigma1 - sigma2)|
  bool ok = false;    // dev1 <= eps0 and sep >= eps0
};
SeparationCheck check_separation(const Eigen::MatrixXcd& A, const ReductionParameters& p,
                                 const Eigen::MatrixXcd& sigma1, const Eigen::MatrixXcd& sigma2,
                                 double tol = 1e-12);

// Nearest-neighbour Hamiltonian given by dense-indexed sparse local terms:
// h1 acts on every site, h2 on every bonded pair with index a*d + b.
struct LocalTerms {
  std::uint32_t d = 0;
  rtm::Boundary boundary = rtm::Boundary::Periodic;
  Eigen::SparseMatrix<Complex> h1, h2;
};

LocalTerms local_terms(const ham::LocalHamiltonian& h);  // U + U^dagger
// V^dagger h V on each term.
LocalTerms conjugate(const LocalTerms& t, const Eigen::MatrixXcd& V);

struct Rotation {
  Eigen::MatrixXcd V;  // V e1 = psi' up to phase, identity off span{e1, psi'}
  LocalTerms H;
  double overlap_distance = 0.0;  // || |psi'><psi'| - |e1><e1| ||_1
  double v_distance = 0.0;        // ||V - I||
};

// psi' is rephased so that <e1|psi'> >= 0 before V is built.
Rotation rotate_instance(const LocalTerms& Hp, const Eigen::VectorXcd& psi_prime,
                         std::uint32_t e0, std::uint32_t e1, double eps1);

// Reachable-subspace evolution for generic local terms. Seeds are weighted
// basis configurations forming one initial vector.
class SparseSystem {
 public:
  SparseSystem(const LocalTerms& t, const std::vector<rtm::Configuration>& seeds,
               std::size_t max_dim = 1u << 18);
  std::size_t dim() const { return basis_.size(); }
  Eigen::VectorXcd vector(const std::vector<rtm::Configuration>& configs,
                          const std::vector<Complex>& amps) const;
  // Fixed-step Taylor integration in double precision.
  Eigen::VectorXcd evolve(const Eigen::VectorXcd& psi0, double t, double step = 0.25) const;
  SingleSiteState site_average(const Eigen::VectorXcd& psi) const { return (*avg_)(psi); }
  const Eigen::SparseMatrix<Complex>& matrix() const { return H_; }

 private:
  std::vector<rtm::Configuration> basis_;
  std::unordered_map<rtm::Configuration, std::size_t, rtm::ConfigHash> index_;
  Eigen::SparseMatrix<Complex> H_;
  std::unique_ptr<dyn::SiteAverager> avg_;
};

// Product state |first> (x) psi^{(x) L} expanded over the support of psi.
void product_expansion(std::uint32_t first, const Eigen::VectorXcd& psi, std::uint64_t L,
                       rtm::Boundary b, std::vector<rtm::Configuration>& configs,
                       std::vector<Complex>& amps);

}  // namespace hca::ver
