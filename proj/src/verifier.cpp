#include "hca/verifier.hpp"

#include <cmath>
#include <deque>
#include <map>
#include <set>
#include <thread>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <fmt/format.h>

#include "hca/io.hpp"

namespace hca::ver {

namespace {

using nlohmann::json;
namespace mp = boost::multiprecision;

constexpr double kTieTol = 1e-12;

// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(threads);
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errs[w] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

std::size_t count_controls(const rtm::MachineSpec& spec, const rtm::Configuration& c) {
  std::size_t k = 0;
  for (auto x : c.cells) k += spec.is_control(x) ? 1 : 0;
  return k;
}

double min_distinct_gap(const Eigen::VectorXd& evals, double merge_tol = 1e-12) {
  std::vector<double> e(evals.data(), evals.data() + evals.size());
  std::sort(e.begin(), e.end());
  double g = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < e.size(); ++i)
    if (e[i] - e[i - 1] > merge_tol) g = std::min(g, e[i] - e[i - 1]);
  return g;
}

template <class T>
void sparse_apply(const SparseReal& H, const std::vector<T>& x, std::vector<T>& y) {
  std::fill(y.begin(), y.end(), T(0));
  for (Eigen::Index k = 0; k < H.outerSize(); ++k) {
    const T& xk = x[static_cast<std::size_t>(k)];
    if (xk == 0) continue;
    for (SparseReal::InnerIterator it(H, k); it; ++it)
      y[static_cast<std::size_t>(it.row())] += T(it.value()) * xk;
  }
}

// Partial sums of sum_k (-i t H)^k / k! psi0 with real and imaginary parts
// carried separately. x = t ||H||.
template <class T>
Eigen::VectorXcd taylor_sum(const SparseReal& H, const Eigen::VectorXcd& psi0, double t, double x,
                            std::uint64_t cap, bool early_stop, std::uint64_t& used) {
  const auto n = static_cast<std::size_t>(psi0.size());
  std::vector<T> vr(n), vi(n), wr(n), wi(n), sr(n, T(0)), si(n, T(0));
  for (std::size_t j = 0; j < n; ++j) {
    vr[j] = T(psi0[static_cast<Eigen::Index>(j)].real());
    vi[j] = T(psi0[static_cast<Eigen::Index>(j)].imag());
  }
  const T tt(t);
  used = 0;
  for (std::uint64_t k = 0; k < cap; ++k) {
    switch (k % 4) {
      case 0:
        for (std::size_t j = 0; j < n; ++j) sr[j] += vr[j], si[j] += vi[j];
        break;
      case 1:
        for (std::size_t j = 0; j < n; ++j) sr[j] += vi[j], si[j] -= vr[j];
        break;
      case 2:
        for (std::size_t j = 0; j < n; ++j) sr[j] -= vr[j], si[j] -= vi[j];
        break;
      default:
        for (std::size_t j = 0; j < n; ++j) sr[j] -= vi[j], si[j] += vr[j];
    }
    used = k + 1;
    if (early_stop && static_cast<double>(k + 2) >= 2.0 * x) {
      // Remaining terms are bounded by |v_k| r / (1 - r), r = x/(k+2) <= 1/2.
      T nv(0);
      for (std::size_t j = 0; j < n; ++j) nv += vr[j] * vr[j] + vi[j] * vi[j];
      const double tail = std::sqrt(static_cast<double>(nv)) * 2.0 * x / static_cast<double>(k + 2);
      if (tail < 1e-25) break;
    }
    if (k + 1 == cap) break;
    sparse_apply(H, vr, wr);
    sparse_apply(H, vi, wi);
    const T f = tt / T(static_cast<double>(k + 1));
    for (std::size_t j = 0; j < n; ++j) vr[j] = wr[j] * f, vi[j] = wi[j] * f;
  }
  Eigen::VectorXcd out(psi0.size());
  for (std::size_t j = 0; j < n; ++j)
    out[static_cast<Eigen::Index>(j)] =
        Complex(static_cast<double>(sr[j]), static_cast<double>(si[j]));
  return out;
}

using Float50 = mp::cpp_bin_float_50;
using Float100 = mp::cpp_bin_float_100;
using Float250 = mp::number<mp::cpp_bin_float<250>>;

double parse_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (auto slash = s.find('/'); slash != std::string::npos)
      return std::stod(s.substr(0, slash)) / std::stod(s.substr(slash + 1));
    return std::stod(s);
  }
  fail(ErrorCode::InvalidInput, "expected a number");
}

}  // namespace

// ---------------- thresholds and grid ----------------

void check_thresholds(double eta, double eps1) {
  if (!(eps1 > 0.0 && eps1 < eta && eta < 1.0))
    fail(ErrorCode::InvalidThresholds, fmt::format("need 0 < eps1 < eta < 1, got eta={}, eps1={}", eta, eps1));
}

void check_instance_thresholds(double eta, double eps1) {
  if (!(eps1 > 0.0 && 2.0 * eps1 < eta && eta < 1.0))
    fail(ErrorCode::InvalidThresholds,
         fmt::format("need 0 < 2 eps1 < eta < 1, got eta={}, eps1={}", eta, eps1));
}

TimeGrid make_grid(double eta, double eps1, double normH, double T, bool cutoff) {
  check_thresholds(eta, eps1);
  if (!(normH > 0.0)) fail(ErrorCode::InvalidInput, "norm bound must be positive");
  if (!(T > 0.0)) fail(ErrorCode::InvalidInput, "time horizon must be positive");
  TimeGrid g;
  g.dt = (eta - eps1) / (4.0 * normH);
  const double ratio = T / g.dt;
  if (ratio > 1e12) fail(ErrorCode::DimensionGuard, "time grid has too many points");
  if (cutoff) {
    g.T0 = T;
    g.K = static_cast<std::uint64_t>(std::floor(ratio + 1e-9));
    while (g.K > 0 && g.t(g.K) > T) --g.K;
  } else {
    g.K = static_cast<std::uint64_t>(std::ceil(ratio - 1e-9));
  }
  g.discretization = 0.5 * (eta - eps1);
  return g;
}

double t0_exponent(std::uint64_t L, double gamma) {
  const double Ld = static_cast<double>(L);
  return 2.0 * (Ld + 1.0) + 2.0 * std::pow(Ld, gamma) + 1.0;
}

double t0_value(std::uint64_t L, double gamma) {
  const double e = t0_exponent(L, gamma);
  if (e > 52.0)
    fail(ErrorCode::ParamsViolation,
         fmt::format("cutoff 2^{} is beyond desk scale; supply a T0 override", e));
  return std::exp2(e);
}

CheckResult check_condition(const SingleSiteState& grid_average, std::uint32_t e1, double eta,
                            double eps1, double quantum) {
  check_thresholds(eta, eps1);
  const auto d = static_cast<double>(grid_average.rows());
  if (!(quantum > 0.0) || d * d * quantum / std::sqrt(2.0) > 0.25 * (eta - eps1))
    fail(ErrorCode::PrecisionViolation, "entry rounding exceeds (eta - eps1)/4");
  SingleSiteState r = grid_average;
  for (Eigen::Index i = 0; i < r.rows(); ++i)
    for (Eigen::Index j = 0; j < r.cols(); ++j)
      r(i, j) = Complex(std::round(r(i, j).real() / quantum) * quantum,
                        std::round(r(i, j).imag() / quantum) * quantum);
  CheckResult c;
  c.threshold = eps1 + 1.25 * (eta - eps1);
  c.lhs = dyn::trace_distance(r, dyn::projector(static_cast<std::uint32_t>(r.rows()), e1));
  c.fired = c.lhs > c.threshold + kTieTol;
  return c;
}

// ---------------- truncated series ----------------

double taylor_bound(std::uint64_t N, double eta, double eps1) {
  const double n = static_cast<double>(N);
  return 2.5 * (std::exp2(-(n * n - n)) + (eta - eps1) / 16.0);
}

double operator_norm_bound(const SparseReal& H) {
  std::vector<double> rows(static_cast<std::size_t>(H.rows()), 0.0);
  for (Eigen::Index k = 0; k < H.outerSize(); ++k)
    for (SparseReal::InnerIterator it(H, k); it; ++it)
      rows[static_cast<std::size_t>(it.row())] += std::abs(it.value());
  return rows.empty() ? 0.0 : *std::max_element(rows.begin(), rows.end());
}

TaylorResult truncated_evolution(const SparseReal& H_ap, const Eigen::VectorXcd& psi0, double t,
                                 const TaylorOptions& opt) {
  check_thresholds(opt.eta, opt.eps1);
  if (t < 0.0 || t > opt.T0 * (1.0 + 1e-12))
    fail(ErrorCode::ToleranceViolation, fmt::format("t = {} outside [0, T0 = {}]", t, opt.T0));
  if (opt.declared_error > (opt.eta - opt.eps1) / (16.0 * opt.T0))
    fail(ErrorCode::ToleranceViolation, "||H - H_ap|| exceeds (eta - eps1)/(16 T0)");
  if (H_ap.rows() != psi0.size() || H_ap.cols() != psi0.size())
    fail(ErrorCode::InvalidInput, "dimension mismatch");
  const double norm = operator_norm_bound(H_ap);
  TaylorResult r;
  r.N = static_cast<std::uint64_t>(std::ceil(opt.T0 * norm - 1e-12));
  r.bound = taylor_bound(r.N, opt.eta, opt.eps1);
  const std::uint64_t cap = opt.terms ? *opt.terms : std::max<std::uint64_t>(1, 2 * r.N * r.N);
  const double x = t * norm;
  const bool early = opt.early_stop && !opt.terms;
  if (x <= 9.0) {
    r.precision = "double";
    r.psi = taylor_sum<double>(H_ap, psi0, t, x, cap, early, r.terms);
  } else if (x <= 16.0) {
    r.precision = "long double";
    r.psi = taylor_sum<long double>(H_ap, psi0, t, x, cap, early, r.terms);
  } else if (x <= 87.0) {
    r.precision = "bin_float_50";
    r.psi = taylor_sum<Float50>(H_ap, psi0, t, x, cap, early, r.terms);
  } else if (x <= 202.0) {
    r.precision = "bin_float_100";
    r.psi = taylor_sum<Float100>(H_ap, psi0, t, x, cap, early, r.terms);
  } else if (x <= 550.0) {
    r.precision = "bin_float_250";
    r.psi = taylor_sum<Float250>(H_ap, psi0, t, x, cap, early, r.terms);
  } else {
    fail(ErrorCode::PrecisionViolation, fmt::format("e^(t||H||) with t||H|| = {} is out of range", x));
  }
  return r;
}

double pure_distance(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  // Eigenvalues of |a><a| - |b><b| on span{a, b}: trace |a|^2 - |b|^2 and
  // determinant -|a|^2 |b_perp|^2, with b_perp the part of b orthogonal to a.
  const double na = a.squaredNorm(), nb = b.squaredNorm();
  if (na == 0.0) return nb;
  const Eigen::VectorXcd perp = b - (a.dot(b) / na) * a;
  const double tr = na - nb;
  return std::sqrt(tr * tr + 4.0 * na * perp.squaredNorm());
}

// ---------------- instances ----------------

json DecisionInstance::to_json() const {
  json j;
  j["machine"] = machine;
  j["variant"] = rtm::variant_name(variant);
  if (!tape_prefix.empty()) j["tape_prefix"] = tape_prefix;
  if (ensemble) j["ensemble"] = ensemble->to_json();
  if (!v.empty()) j["v"] = v;
  j["eta"] = eta;
  j["eps1"] = eps1;
  j["gamma"] = gamma;
  j["gap_floor"] = gap_floor == GapFloorKind::Power ? "power" : "fgap";
  if (t0_override) j["t0_override"] = *t0_override;
  j["L"] = L;
  j["L_min"] = L_min;
  j["L_max"] = L_max;
  j["budget"] = budget;
  j["quantum_bits"] = quantum_bits;
  j["early_exit"] = early_exit;
  return j;
}

DecisionInstance DecisionInstance::from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::InvalidInput, "instance must be a JSON object");
  DecisionInstance d;
  try {
    d.machine = j.value("machine", d.machine);
    if (j.contains("variant")) d.variant = rtm::parse_variant(j.at("variant").get<std::string>());
    if (j.contains("tape_prefix")) d.tape_prefix = j.at("tape_prefix").get<std::vector<std::string>>();
    if (j.contains("ensemble")) d.ensemble = enc::EnsembleParams::from_json(j.at("ensemble"));
    d.v = j.value("v", std::string());
    if (j.contains("eta")) d.eta = parse_number(j.at("eta"));
    if (j.contains("eps1")) d.eps1 = parse_number(j.at("eps1"));
    if (j.contains("gamma")) d.gamma = parse_number(j.at("gamma"));
    if (j.contains("gap_floor")) {
      const auto g = j.at("gap_floor").get<std::string>();
      if (g == "power") d.gap_floor = GapFloorKind::Power;
      else if (g == "fgap") d.gap_floor = GapFloorKind::Fgap;
      else fail(ErrorCode::InvalidInput, "gap_floor must be power or fgap");
    }
    if (j.contains("t0_override") && !j.at("t0_override").is_null())
      d.t0_override = parse_number(j.at("t0_override"));
    d.L = j.value("L", d.L);
    d.L_min = j.value("L_min", d.L_min);
    d.L_max = j.value("L_max", d.L_max);
    d.budget = j.value("budget", d.budget);
    d.quantum_bits = j.value("quantum_bits", d.quantum_bits);
    d.early_exit = j.value("early_exit", d.early_exit);
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidInput, std::string("instance: ") + e.what());
  }
  if (d.ensemble && d.v.empty()) fail(ErrorCode::InvalidInput, "ensemble instances need v");
  if (d.L_min > d.L_max) fail(ErrorCode::InvalidInput, "L_min exceeds L_max");
  if (d.t0_override && !(*d.t0_override > 0.0)) fail(ErrorCode::InvalidInput, "t0_override must be positive");
  return d;
}

rtm::SpecPtr instance_machine(const DecisionInstance& inst) {
  return std::make_shared<const rtm::MachineSpec>(io::load_machine(inst.machine, inst.variant));
}

dyn::InitialEnsemble instance_ensemble(const rtm::MachineSpec& spec, const DecisionInstance& inst,
                                       std::uint64_t L) {
  if (inst.ensemble) {
    enc::EnsembleParams p = *inst.ensemble;
    p.L = L;
    auto ens = enc::build_initial_ensemble(spec, p, enc::encode_input(inst.v));
    if (ens.size() == 0)
      fail(ErrorCode::DimensionGuard, "ensemble support too large for exhaustive evaluation");
    return ens;
  }
  if (inst.tape_prefix.size() > L) fail(ErrorCode::InvalidInput, "tape prefix longer than L");
  const auto refs = dyn::reference_sites(spec);
  std::vector<std::uint32_t> tape(L, refs.e1);
  for (std::size_t i = 0; i < inst.tape_prefix.size(); ++i) {
    auto s = spec.symbols.parse_tag(inst.tape_prefix[i]);
    if (!s) fail(ErrorCode::InvalidInput, "unknown tape symbol " + inst.tape_prefix[i]);
    tape[i] = *s;
  }
  auto ens = dyn::InitialEnsemble::single(rtm::anchored(spec, tape));
  ens.provenance = "anchored";
  return ens;
}

double gap_floor(const DecisionInstance& inst, std::uint64_t L, std::uint64_t J_max) {
  if (inst.gap_floor == GapFloorKind::Power)
    return std::exp2(-std::pow(static_cast<double>(L), inst.gamma));
  const auto n = static_cast<std::uint32_t>(inst.v.size());
  BigInt f;
  if (inst.f_gap) {
    f = inst.f_gap(L, n, J_max);
  } else {
    const BigInt j1 = BigInt(J_max) + 1;
    f = (j1 * j1 + 7) / 8;
  }
  if (f <= 0) fail(ErrorCode::InvalidInput, "f_gap must be positive");
  return 1.0 / f.convert_to<double>();
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Yes: return "yes";
    case Verdict::No: return "no";
    case Verdict::Accepted: return "accepted";
    case Verdict::BudgetExhausted: return "budget_exhausted";
  }
  return "?";
}

json Decision::to_json() const {
  json j;
  j["verdict"] = verdict_name(verdict);
  j["K"] = K ? json(*K) : json(nullptr);
  j["L"] = L ? json(*L) : json(nullptr);
  j["max_lhs"] = max_lhs;
  j["threshold"] = threshold;
  j["ledger"] = ledger;
  return j;
}

Decision decide_finite(const DecisionInstance& inst) {
  check_instance_thresholds(inst.eta, inst.eps1);
  auto spec = instance_machine(inst);
  const auto h = ham::compile(spec, rtm::Boundary::Periodic);
  const auto ens = instance_ensemble(*spec, inst, inst.L);
  const std::uint32_t d = spec->site_dim();
  const auto refs = dyn::reference_sites(*spec);

  dyn::DenseSystem sys(h, ens.configs);

  // Components holding the seeds, with their averaging structure.
  struct Comp {
    SparseReal H;
    std::unique_ptr<dyn::SiteAverager> avg;
    std::vector<std::size_t> members;
  };
  std::map<std::size_t, Comp> comps;
  std::vector<std::pair<std::size_t, std::size_t>> seed_at;  // (component, local index)
  std::size_t max_controls = 1;
  for (const auto& c : ens.configs) {
    max_controls = std::max(max_controls, count_controls(*spec, c));
    const std::size_t gi = *sys.index(c);
    const std::size_t ci = sys.component_of(gi);
    auto it = comps.find(ci);
    if (it == comps.end()) {
      Comp comp;
      comp.members = sys.component_members(ci);
      comp.H = sys.hamiltonian_block(ci).sparseView();
      std::vector<std::vector<std::uint32_t>> cells;
      for (auto m : comp.members) cells.push_back(sys.basis(m).cells);
      comp.avg = std::make_unique<dyn::SiteAverager>(d, std::move(cells));
      it = comps.emplace(ci, std::move(comp)).first;
    }
    const auto& mem = it->second.members;
    seed_at.emplace_back(ci, static_cast<std::size_t>(std::lower_bound(mem.begin(), mem.end(), gi) - mem.begin()));
  }

  // Gap floor on every component the seeds reach.
  std::uint64_t J_max = 0;
  double gap = std::numeric_limits<double>::infinity(), norm_measured = 0.0;
  for (auto& [ci, comp] : comps) {
    J_max = std::max<std::uint64_t>(J_max, comp.members.size());
    const auto& ev = sys.component_eigenvalues(ci);
    gap = std::min(gap, min_distinct_gap(ev));
    norm_measured = std::max(norm_measured, ev.cwiseAbs().maxCoeff());
  }
  const double floor_ = gap_floor(inst, inst.L, J_max);
  if (gap < floor_)
    fail(ErrorCode::GapViolation,
         fmt::format("orbit gap {:.3e} below the floor {:.3e} (J_max = {})", gap, floor_, J_max));

  // Each single-control orbit contributes a path or cycle adjacency.
  const double norm_bound = 2.0 * static_cast<double>(max_controls);
  if (norm_measured > norm_bound + 1e-9) fail(ErrorCode::Internal, "norm bound violated");

  const double T0 = inst.t0_override ? *inst.t0_override : t0_value(inst.L, inst.gamma);
  const auto grid = make_grid(inst.eta, inst.eps1, norm_bound, T0, true);
  if (grid.K > 10'000'000) fail(ErrorCode::DimensionGuard, "too many grid points");
  const double quantum = std::ldexp(1.0, -inst.quantum_bits);

  TaylorOptions topt;
  topt.T0 = T0;
  topt.eta = inst.eta;
  topt.eps1 = inst.eps1;

  Decision out;
  out.threshold = inst.eps1 + 1.25 * (inst.eta - inst.eps1);
  std::set<std::string> precisions;
  std::uint64_t max_terms = 0;
  double max_global = 0.0;
  std::uint64_t Nmax = 0;
  SingleSiteState acc = SingleSiteState::Zero(d, d);
  const std::uint64_t chunk = 32;
  std::uint64_t done = 0;

  struct Point {
    SingleSiteState rho;
    double site_err = 0, global_err = 0, bound = 0;
    std::uint64_t terms = 0, N = 0;
    std::string precision;
  };
  while (done < grid.K && !(out.K && inst.early_exit)) {
    const std::uint64_t n = std::min(chunk, grid.K - done);
    std::vector<Point> pts(n);
    parallel_for(n, inst.threads, [&](std::size_t k) {
      const double t = grid.t(done + k + 1);
      Point& p = pts[k];
      p.rho = SingleSiteState::Zero(d, d);
      SingleSiteState exact = SingleSiteState::Zero(d, d);
      for (std::size_t m = 0; m < ens.size(); ++m) {
        const auto& comp = comps.at(seed_at[m].first);
        Eigen::VectorXcd psi0 = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(comp.members.size()));
        psi0[static_cast<Eigen::Index>(seed_at[m].second)] = 1.0;
        const auto tr = truncated_evolution(comp.H, psi0, t, topt);
        const auto full = sys.evolve(sys.basis_vector(ens.configs[m]), t);
        Eigen::VectorXcd ref(psi0.size());
        for (std::size_t u = 0; u < comp.members.size(); ++u)
          ref[static_cast<Eigen::Index>(u)] = full[static_cast<Eigen::Index>(comp.members[u])];
        p.rho += ens.probs[m] * (*comp.avg)(tr.psi);
        exact += ens.probs[m] * (*comp.avg)(ref);
        p.global_err += ens.probs[m] * pure_distance(tr.psi, ref);
        p.terms = std::max(p.terms, tr.terms);
        p.N = std::max(p.N, tr.N);
        p.bound = std::max(p.bound, tr.bound);
        p.precision = tr.precision;
      }
      p.site_err = dyn::trace_distance(p.rho, exact);
    });
    for (std::uint64_t k = 0; k < n; ++k) {
      const auto& p = pts[k];
      acc += p.rho;
      const std::uint64_t K = done + k + 1;
      const auto res = check_condition(acc / static_cast<double>(K), refs.e1, inst.eta, inst.eps1, quantum);
      out.max_lhs = std::max(out.max_lhs, res.lhs);
      out.max_measured_error = std::max(out.max_measured_error, p.site_err);
      max_global = std::max(max_global, p.global_err);
      out.taylor_bound = std::max(out.taylor_bound, p.bound);
      if (p.site_err > p.bound || p.global_err > p.bound) out.bound_violated = true;
      max_terms = std::max(max_terms, p.terms);
      Nmax = std::max(Nmax, p.N);
      precisions.insert(p.precision);
      if (res.fired && !out.K) {
        out.K = K;
        out.L = inst.L;
        if (inst.early_exit) {
          done = K;
          break;
        }
      }
    }
    if (!(out.K && inst.early_exit)) done += n;
  }
  out.verdict = out.K ? Verdict::Yes : Verdict::No;

  auto& lg = out.ledger;
  lg["check_threshold"] = out.threshold;
  lg["discretization_error"] = grid.discretization;
  lg["taylor_truncation_bound"] = out.taylor_bound;
  lg["taylor_N"] = Nmax;
  lg["taylor_terms_max"] = max_terms;
  lg["taylor_precisions"] = precisions;
  lg["time_cutoff_error"] = std::exp2(-std::pow(static_cast<double>(inst.L), inst.gamma));
  lg["rounding_quantum"] = quantum;
  lg["rounding_error_bound"] = static_cast<double>(d) * d * quantum / std::sqrt(2.0);
  lg["norm_bound"] = norm_bound;
  lg["norm_measured"] = norm_measured;
  lg["dt"] = grid.dt;
  lg["grid_points"] = grid.K;
  lg["grid_points_evaluated"] = done;
  lg["T0"] = T0;
  lg["T0_overridden"] = inst.t0_override.has_value();
  lg["T0_exponent_printed"] = t0_exponent(inst.L, inst.gamma);
  lg["gap_min"] = std::isfinite(gap) ? json(gap) : json(nullptr);
  lg["gap_floor"] = floor_;
  lg["J_max"] = J_max;
  lg["measured_site_error_max"] = out.max_measured_error;
  lg["measured_global_error_max"] = max_global;
  lg["taylor_bound_violated"] = out.bound_violated;
  lg["L"] = inst.L;
  lg["seeds"] = ens.size();
  return out;
}

Decision semi_decide(const DecisionInstance& inst) {
  check_instance_thresholds(inst.eta, inst.eps1);
  Decision out;
  out.threshold = inst.eps1 + 1.25 * (inst.eta - inst.eps1);
  out.ledger["order"] = "K+L ascending, K ascending within";
  out.ledger["L_min"] = inst.L_min;
  out.ledger["L_max"] = inst.L_max;
  out.ledger["budget"] = inst.budget;
  out.ledger["check_threshold"] = out.threshold;
  out.ledger["discretization_error"] = 0.5 * (inst.eta - inst.eps1);
  if (inst.budget == 0) {
    out.verdict = Verdict::BudgetExhausted;
    out.ledger["pairs"] = 0;
    return out;
  }
  auto spec = instance_machine(inst);
  const auto refs = dyn::reference_sites(*spec);
  const std::uint32_t d = spec->site_dim();
  const double quantum = std::ldexp(1.0, -inst.quantum_bits);

  struct Lattice {
    std::unique_ptr<dyn::EnsembleDynamics> dyn;
    double dt = 0.0;
    std::uint64_t k = 0;
    SingleSiteState acc;
  };
  std::map<std::uint64_t, Lattice> lat;
  auto lattice = [&](std::uint64_t L) -> Lattice& {
    auto it = lat.find(L);
    if (it != lat.end()) return it->second;
    Lattice x;
    const auto ens = instance_ensemble(*spec, inst, L);
    std::size_t ctl = 1;
    for (const auto& c : ens.configs) ctl = std::max(ctl, count_controls(*spec, c));
    x.dyn = std::make_unique<dyn::EnsembleDynamics>(spec, ens);
    x.dt = make_grid(inst.eta, inst.eps1, 2.0 * static_cast<double>(ctl), 1.0).dt;
    x.acc = SingleSiteState::Zero(d, d);
    return lat.emplace(L, std::move(x)).first->second;
  };

  for (std::uint64_t s = inst.L_min + 1;; ++s) {
    const std::uint64_t Klo = s > inst.L_max ? s - inst.L_max : 1;
    const std::uint64_t Khi = s - inst.L_min;
    for (std::uint64_t K = Klo; K <= Khi; ++K) {
      const std::uint64_t L = s - K;
      Lattice& x = lattice(L);
      while (x.k < K) {
        ++x.k;
        x.acc += x.dyn->at(static_cast<double>(x.k) * x.dt);
      }
      const auto res = check_condition(x.acc / static_cast<double>(K), refs.e1, inst.eta, inst.eps1, quantum);
      ++out.pairs;
      out.max_lhs = std::max(out.max_lhs, res.lhs);
      if (res.fired) {
        out.verdict = Verdict::Accepted;
        out.K = K;
        out.L = L;
        out.ledger["pairs"] = out.pairs;
        return out;
      }
      if (out.pairs >= inst.budget) {
        out.verdict = Verdict::BudgetExhausted;
        out.ledger["pairs"] = out.pairs;
        return out;
      }
    }
  }
}

OracleResult dense_oracle(const DecisionInstance& inst, std::uint64_t L) {
  auto spec = instance_machine(inst);
  const auto h = ham::compile(spec, rtm::Boundary::Periodic);
  const auto ens = instance_ensemble(*spec, inst, L);
  dyn::DenseSystem sys(h, ens.configs);
  const auto refs = dyn::reference_sites(*spec);
  const double dist =
      dyn::trace_distance(sys.ensemble_longterm(ens), dyn::projector(spec->site_dim(), refs.e1));
  const double thr = inst.eps1 + 1.25 * (inst.eta - inst.eps1);
  return {dist > thr ? Verdict::Yes : Verdict::No, dist};
}

// ---------------- reductions ----------------

ReductionParameters reduction_parameters(const Eigen::MatrixXcd& A, double eta, std::uint32_t e1,
                                         std::uint32_t e2) {
  if (A.rows() != A.cols() || A.rows() <= std::max(e1, e2))
    fail(ErrorCode::InvalidInput, "observable must be square and contain e1, e2");
  if ((A - A.adjoint()).norm() > 1e-12) fail(ErrorCode::InvalidInput, "observable must be Hermitian");
  if (!(eta > 0.0 && eta < 1.0)) fail(ErrorCode::InvalidThresholds, "need 0 < eta < 1");
  ReductionParameters p;
  p.c1 = A(e1, e1).real();
  p.diff = std::abs(A(e1, e1).real() - A(e2, e2).real());
  if (p.diff <= 1e-14)
    fail(ErrorCode::DegenerateObservable, "<e1|A|e1> equals <e2|A|e2>");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(A, Eigen::EigenvaluesOnly);
  p.norm_A = es.eigenvalues().cwiseAbs().maxCoeff();
  p.eps1 = eta * p.diff / (3.0 * p.norm_A);
  p.eps0 = p.eps1 * p.norm_A;
  return p;
}

Eigen::MatrixXcd sample_ball(const Eigen::MatrixXcd& center, double radius, std::mt19937_64& rng) {
  const auto d = center.rows();
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXcd G(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) G(i, j) = Complex(g(rng), g(rng));
  Eigen::MatrixXcd tau = G * G.adjoint();
  tau /= tau.trace().real();
  const double dist = dyn::trace_distance(tau, center);
  const double s = dist > 0.0 ? std::min(1.0, u(rng) * radius / dist) : 0.0;
  return (1.0 - s) * center + s * tau;
}

SeparationCheck check_separation(const Eigen::MatrixXcd& A, const ReductionParameters& p,
                                 const Eigen::MatrixXcd& sigma1, const Eigen::MatrixXcd& sigma2,
                                 double tol) {
  SeparationCheck c;
  c.dev1 = std::abs((sigma1 * A).trace().real() - p.c1);
  c.sep = std::abs((A * (sigma1 - sigma2)).trace().real());
  c.ok = c.dev1 <= p.eps0 + tol && c.sep >= p.eps0 - tol;
  return c;
}

LocalTerms local_terms(const ham::LocalHamiltonian& h) {
  using T = Eigen::Triplet<Complex>;
  LocalTerms t;
  t.d = h.d;
  t.boundary = h.boundary;
  const auto d = static_cast<std::uint64_t>(h.d);
  std::vector<T> one, two;
  for (const auto* map : {&h.u0, &h.u1p, &h.u1m})
    for (const auto& [x, y] : *map) {
      const auto ix = static_cast<Eigen::Index>(ham::LocalHamiltonian::first(x) * d + ham::LocalHamiltonian::second(x));
      const auto iy = static_cast<Eigen::Index>(ham::LocalHamiltonian::first(y) * d + ham::LocalHamiltonian::second(y));
      two.emplace_back(iy, ix, 1.0);
      two.emplace_back(ix, iy, 1.0);
    }
  for (const auto& [x, y] : h.u10) {
    one.emplace_back(y, x, 1.0);
    one.emplace_back(x, y, 1.0);
  }
  t.h1.resize(h.d, h.d);
  t.h1.setFromTriplets(one.begin(), one.end());
  t.h2.resize(static_cast<Eigen::Index>(d * d), static_cast<Eigen::Index>(d * d));
  t.h2.setFromTriplets(two.begin(), two.end());
  return t;
}

LocalTerms conjugate(const LocalTerms& t, const Eigen::MatrixXcd& V) {
  using T = Eigen::Triplet<Complex>;
  const Eigen::Index d = t.d;
  if (V.rows() != d || V.cols() != d) fail(ErrorCode::InvalidInput, "V has the wrong dimension");
  Eigen::SparseMatrix<Complex> Vs = V.sparseView(1.0, 1e-15);
  std::vector<T> kt;
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::SparseMatrix<Complex>::InnerIterator ia(Vs, a); ia; ++ia)
      for (Eigen::Index b = 0; b < d; ++b)
        for (Eigen::SparseMatrix<Complex>::InnerIterator ib(Vs, b); ib; ++ib)
          kt.emplace_back(ia.row() * d + ib.row(), a * d + b, ia.value() * ib.value());
  Eigen::SparseMatrix<Complex> VV(d * d, d * d);
  VV.setFromTriplets(kt.begin(), kt.end());
  LocalTerms r;
  r.d = t.d;
  r.boundary = t.boundary;
  r.h1 = Eigen::SparseMatrix<Complex>(Vs.adjoint()) * t.h1 * Vs;
  r.h2 = Eigen::SparseMatrix<Complex>(VV.adjoint()) * t.h2 * VV;
  r.h1.prune(Complex(0.0), 1e-14);
  r.h2.prune(Complex(0.0), 1e-14);
  return r;
}

Rotation rotate_instance(const LocalTerms& Hp, const Eigen::VectorXcd& psi_prime, std::uint32_t e0,
                         std::uint32_t e1, double eps1) {
  const Eigen::Index d = Hp.d;
  if (psi_prime.size() != d) fail(ErrorCode::InvalidInput, "psi' has the wrong dimension");
  if (std::abs(psi_prime.norm() - 1.0) > 1e-12) fail(ErrorCode::InvalidInput, "psi' must be normalized");
  if (std::abs(psi_prime[e0]) > 1e-12) fail(ErrorCode::OverlapViolation, "<e0|psi'> is not zero");
  Rotation r;
  // Only the ray of psi' matters; fix the phase so that <e1|psi'> >= 0.
  const Complex a0 = psi_prime[e1];
  const Complex ph = std::abs(a0) > 0.0 ? a0 / std::abs(a0) : Complex(1.0);
  const Eigen::VectorXcd psi = psi_prime * std::conj(ph);
  const Complex a = psi[e1];
  r.overlap_distance = 2.0 * std::sqrt(std::max(0.0, 1.0 - std::norm(a)));
  if (r.overlap_distance > eps1 + 1e-12)
    fail(ErrorCode::OverlapViolation,
         fmt::format("|| |psi'><psi'| - |e1><e1| ||_1 = {} exceeds eps1 = {}", r.overlap_distance, eps1));
  r.V = Eigen::MatrixXcd::Identity(d, d);
  Eigen::VectorXcd f = psi;
  f[e1] = 0.0;
  const double b = f.norm();
  if (b >= 1e-15) {
    f /= b;
    Eigen::VectorXcd u = Eigen::VectorXcd::Zero(d);
    u[e1] = 1.0;
    r.V += (a - 1.0) * u * u.adjoint() + b * f * u.adjoint() - b * u * f.adjoint() +
           (std::conj(a) - 1.0) * f * f.adjoint();
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(r.V - Eigen::MatrixXcd::Identity(d, d));
  r.v_distance = svd.singularValues()(0);
  r.H = conjugate(Hp, r.V);
  return r;
}

SparseSystem::SparseSystem(const LocalTerms& t, const std::vector<rtm::Configuration>& seeds,
                           std::size_t max_dim) {
  using T = Eigen::Triplet<Complex>;
  std::vector<T> trip;
  std::deque<std::size_t> queue;
  auto add = [&](const rtm::Configuration& c) {
    auto [it, fresh] = index_.emplace(c, basis_.size());
    if (fresh) {
      if (basis_.size() >= max_dim) fail(ErrorCode::DimensionGuard, "reachable subspace exceeds the guard");
      basis_.push_back(c);
      queue.push_back(it->second);
    }
    return it->second;
  };
  for (const auto& s : seeds) add(s);
  const std::uint64_t d = t.d;
  while (!queue.empty()) {
    const std::size_t x = queue.front();
    queue.pop_front();
    const rtm::Configuration cx = basis_[x];
    const std::size_t n = cx.cells.size();
    const bool periodic = cx.boundary == rtm::Boundary::Periodic;
    for (std::size_t i = 0; i < n; ++i) {
      for (Eigen::SparseMatrix<Complex>::InnerIterator it(t.h1, cx.cells[i]); it; ++it) {
        rtm::Configuration y = cx;
        y.cells[i] = static_cast<std::uint32_t>(it.row());
        trip.emplace_back(static_cast<Eigen::Index>(add(y)), static_cast<Eigen::Index>(x), it.value());
      }
      if (i + 1 == n && !periodic) continue;
      const std::size_t j = (i + 1) % n;
      if (j == i) continue;
      const auto col = static_cast<Eigen::Index>(cx.cells[i] * d + cx.cells[j]);
      for (Eigen::SparseMatrix<Complex>::InnerIterator it(t.h2, col); it; ++it) {
        rtm::Configuration y = cx;
        y.cells[i] = static_cast<std::uint32_t>(static_cast<std::uint64_t>(it.row()) / d);
        y.cells[j] = static_cast<std::uint32_t>(static_cast<std::uint64_t>(it.row()) % d);
        trip.emplace_back(static_cast<Eigen::Index>(add(y)), static_cast<Eigen::Index>(x), it.value());
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(basis_.size());
  H_.resize(n, n);
  H_.setFromTriplets(trip.begin(), trip.end());
  std::vector<std::vector<std::uint32_t>> cells;
  for (const auto& c : basis_) cells.push_back(c.cells);
  avg_ = std::make_unique<dyn::SiteAverager>(t.d, std::move(cells));
}

Eigen::VectorXcd SparseSystem::vector(const std::vector<rtm::Configuration>& configs,
                                      const std::vector<Complex>& amps) const {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dim()));
  for (std::size_t i = 0; i < configs.size(); ++i) {
    auto it = index_.find(configs[i]);
    if (it == index_.end()) fail(ErrorCode::InvalidInput, "configuration outside the basis");
    v[static_cast<Eigen::Index>(it->second)] += amps[i];
  }
  return v;
}

Eigen::VectorXcd SparseSystem::evolve(const Eigen::VectorXcd& psi0, double t, double step) const {
  if (t == 0.0) return psi0;
  const auto steps = static_cast<std::uint64_t>(std::ceil(std::abs(t) / step));
  const double h = t / static_cast<double>(steps);
  Eigen::VectorXcd psi = psi0;
  const Complex mi(0.0, -h);
  for (std::uint64_t s = 0; s < steps; ++s) {
    Eigen::VectorXcd term = psi, sum = psi;
    for (int k = 1; k <= 40; ++k) {
      term = (mi / static_cast<double>(k)) * (H_ * term);
      sum += term;
      if (term.norm() < 1e-18) break;
    }
    psi = sum;
  }
  return psi;
}

void product_expansion(std::uint32_t first, const Eigen::VectorXcd& psi, std::uint64_t L,
                       rtm::Boundary b, std::vector<rtm::Configuration>& configs,
                       std::vector<Complex>& amps) {
  std::vector<std::uint32_t> support;
  for (Eigen::Index i = 0; i < psi.size(); ++i)
    if (std::abs(psi[i]) > 0.0) support.push_back(static_cast<std::uint32_t>(i));
  configs.clear();
  amps.clear();
  std::vector<std::size_t> digit(L, 0);
  while (true) {
    rtm::Configuration c;
    c.boundary = b;
    c.cells.push_back(first);
    Complex a = 1.0;
    for (std::uint64_t i = 0; i < L; ++i) {
      c.cells.push_back(support[digit[i]]);
      a *= psi[support[digit[i]]];
    }
    configs.push_back(std::move(c));
    amps.push_back(a);
    std::uint64_t i = 0;
    while (i < L && ++digit[i] == support.size()) digit[i++] = 0;
    if (i == L) break;
  }
}

}  // namespace hca::ver
