#pragma once

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "hca/hamiltonian.hpp"

namespace hca::dyn {

using SingleSiteState = Eigen::MatrixXcd;
using rtm::Configuration;

// ---------------- orbit formulas ----------------

struct OrbitAmplitudes {
  std::uint64_t J = 0;
  double t = 0.0;
  Eigen::VectorXcd amps;  // amps[j-1] = <j| e^{-iHt} |1>
};

Eigen::VectorXcd evolve_spectral(const ham::OrbitSpectrum& sp, double t);
OrbitAmplitudes evolve_spectral(const rtm::Orbit& orbit, double t);

// Infinite-time average of |<j|e^{-iHt}|1>|^2. Dead end: the endpoint-corrected
// uniform law. Cycle: the exact diagonal of the spectral projection average.
std::vector<Rational> time_avg_probs(rtm::Terminal terminal, std::uint64_t J);
std::vector<Rational> time_avg_probs(const rtm::Orbit& orbit);

// sum_k sin^2(k pi/(J+1)) sin(j k pi/(J+1)) sin(j' k pi/(J+1)), k = 1..J.
Rational trig_kernel(std::uint64_t J, std::uint64_t j, std::uint64_t jp);

// <j| rho_inf |j'> for the orbit started at |1>, where rho_inf is the
// infinite-time average of the evolved projector.
Rational longterm_element(rtm::Terminal terminal, std::uint64_t J, std::uint64_t j,
                          std::uint64_t jp);

// ---------------- site averages ----------------

// Space average of single-site reduced operators of |psi><phi| over a fixed
// list of basis configurations (all of the same length).
class SiteAverager {
 public:
  SiteAverager(std::uint32_t d, std::vector<std::vector<std::uint32_t>> configs);

  std::size_t size() const { return configs_.size(); }
  std::size_t sites() const { return n_; }
  std::uint32_t dim() const { return d_; }

  Eigen::MatrixXcd operator()(const Eigen::VectorXcd& psi, const Eigen::VectorXcd& phi) const;
  Eigen::MatrixXcd operator()(const Eigen::VectorXcd& psi) const { return (*this)(psi, psi); }

  // Average of an operator given by its entries rho(y, y') in this basis. Only
  // pairs differing at one site contribute, so rho is queried sparsely.
  Eigen::MatrixXcd average(const std::function<Complex(std::size_t, std::size_t)>& rho) const;

  struct Pair {
    std::uint32_t y, yp;  // basis indices, y < yp
    std::uint32_t a, b;   // site values of y and yp at the differing site
  };
  const std::vector<Pair>& pairs() const { return pairs_; }

 private:
  std::uint32_t d_;
  std::size_t n_;
  std::vector<std::vector<std::uint32_t>> configs_;
  std::vector<Pair> pairs_;
};

// Site values of e0 (the initial control), e1 = a1 and e2 = a2.
struct ReferenceSites {
  std::uint32_t e0, e1, e2;
};
ReferenceSites reference_sites(const rtm::MachineSpec& spec);
SingleSiteState projector(std::uint32_t d, std::uint32_t v);

// Diagonal state (1/n) sum_i |x_i><x_i| of one configuration.
SingleSiteState site_average_config(std::uint32_t d, const Configuration& c);

double trace_distance(const SingleSiteState& a, const SingleSiteState& b);
// Hermiticity, trace and positivity defects; empty when all hold within tol.
std::vector<std::string> check_state(const SingleSiteState& rho, double tol = 1e-10);

// ---------------- ensembles ----------------

struct InitialEnsemble {
  std::vector<Configuration> configs;
  std::vector<double> probs;
  std::vector<Rational> exact;  // filled on the exhaustive path
  std::string provenance = "custom";  // anchored | iid | custom
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t size() const { return configs.size(); }
  static InitialEnsemble single(const Configuration& c);
  void check() const;
};

// Orbit of one single-control block with its averaging structure.
struct OrbitData {
  rtm::Orbit orbit;
  ham::OrbitSpectrum spectrum;
  std::unique_ptr<SiteAverager> averager;

  SingleSiteState at(double t) const;
  SingleSiteState longterm() const;
};

// Time evolution of a dephased ensemble through per-block orbits.
class EnsembleDynamics {
 public:
  EnsembleDynamics(rtm::SpecPtr spec, const InitialEnsemble& ens, std::uint64_t max_steps = 1u << 20);

  std::uint32_t site_dim() const { return d_; }
  SingleSiteState at(double t) const;
  SingleSiteState longterm() const;
  std::uint64_t max_orbit_length() const;
  std::uint64_t min_orbit_length() const;
  // Smallest distinct-eigenvalue gap over all member orbits.
  double min_gap() const;
  std::size_t distinct_orbits() const { return orbits_.size(); }
  const std::vector<std::unique_ptr<OrbitData>>& orbits() const { return orbits_; }

 private:
  struct Part {
    std::size_t orbit;  // index into orbits_
    double weight;      // member probability times block share of sites
  };
  std::uint32_t d_;
  rtm::SpecPtr spec_;
  std::vector<std::unique_ptr<OrbitData>> orbits_;
  std::vector<Part> parts_;
  SingleSiteState static_part_;
};

struct LongTerm {
  SingleSiteState exact;    // spectral projection average, j+-2 terms included
  SingleSiteState uniform;  // (1/J) sum_j of the diagonal single-site averages
  double radius = 0.0;      // 2/L + 2/J_min
  std::uint64_t J_min = 0, J_max = 0;
};

// Streaming long-term average over anchored single-control configurations;
// never materializes an orbit. Cycles fall back to materialized orbits.
LongTerm longterm_site_average(const rtm::MachineSpec& spec, const InitialEnsemble& ens,
                               std::uint64_t max_steps);

// ---------------- dense oracle ----------------

struct DenseLimits {
  std::size_t max_dim = 1u << 20;        // reachable basis size
  std::size_t max_component = 4096;      // largest block handed to the eigensolver
};

// H restricted to the span of everything reachable from the seeds, built from
// the local terms and diagonalized per connected component.
class DenseSystem {
 public:
  DenseSystem(const ham::LocalHamiltonian& h, const std::vector<Configuration>& seeds,
              DenseLimits lim = {});

  std::size_t dim() const { return basis_.size(); }
  const Configuration& basis(std::size_t i) const { return basis_[i]; }
  std::optional<std::size_t> index(const Configuration& c) const;
  Eigen::VectorXcd basis_vector(const Configuration& c) const;
  const Eigen::MatrixXd& hamiltonian_block(std::size_t comp) const { return comps_[comp].H; }
  std::size_t components() const { return comps_.size(); }
  std::size_t component_of(std::size_t i) const { return comp_of_[i]; }
  const std::vector<std::size_t>& component_members(std::size_t comp) const {
    return comps_[comp].members;
  }
  const Eigen::VectorXd& component_eigenvalues(std::size_t comp) const { return comps_[comp].evals; }

  Eigen::VectorXcd evolve(const Eigen::VectorXcd& psi0, double t) const;
  SingleSiteState site_average(const Eigen::VectorXcd& psi) const { return (*avg_)(psi); }
  Eigen::MatrixXcd site_average(const Eigen::VectorXcd& psi, const Eigen::VectorXcd& phi) const {
    return (*avg_)(psi, phi);
  }
  // sum over distinct eigenvalues of the site average of P psi psi^* P.
  SingleSiteState longterm_site_average(const Eigen::VectorXcd& psi0, double merge_tol = 1e-9) const;
  // The same average taken over a mixture of basis states.
  SingleSiteState ensemble_at(const InitialEnsemble& ens, double t) const;
  SingleSiteState ensemble_longterm(const InitialEnsemble& ens) const;
  std::vector<double> eigenvalues() const;

 private:
  struct Component {
    std::vector<std::size_t> members;
    Eigen::MatrixXd H;
    Eigen::VectorXd evals;
    Eigen::MatrixXd evecs;
  };
  std::vector<Configuration> basis_;
  std::unordered_map<Configuration, std::size_t, rtm::ConfigHash> index_;
  std::vector<Component> comps_;
  std::vector<std::size_t> comp_of_;
  std::unique_ptr<SiteAverager> avg_;
};

// max_t |<x'| e^{iHt} B^{(L)} e^{-iHt} |x>| with B^{(L)} the site average of B.
double dephasing_check(const ham::LocalHamiltonian& h, const Configuration& x,
                       const Configuration& xp, const Eigen::MatrixXcd& B,
                       const std::vector<double>& times, DenseLimits lim = {});

// ---------------- output ----------------

nlohmann::json state_to_json(const SingleSiteState& rho);
std::string csv_header(std::uint32_t d);
std::string csv_row(double t, const SingleSiteState& rho, const std::vector<double>& extra);

}  // namespace hca::dyn
