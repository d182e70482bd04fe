// Acceptance gate. One PASS/FAIL line per criterion; nonzero exit if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include "tneg/estimators.h"
#include "tneg/experiment.h"
#include "tneg/lattice.h"
#include "tneg/locc.h"
#include "tneg/oracle.h"
#include "tneg/parallel.h"

using namespace tneg;

namespace {

int g_failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::printf("%s  %-50s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

int workers() {
  const int env = default_workers();
  if (env > 1) return env;
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

std::vector<double> grid(double lo, double hi, double step) {
  std::vector<double> out;
  for (int k = 0; lo + k * step <= hi + 1e-9; ++k) out.push_back(lo + k * step);
  return out;
}

Bipartition left_half(const Lattice& lat) {
  std::vector<int> sites;
  for (int i = 0; i < lat.num_sites() / 2; ++i) sites.push_back(i);
  return from_site_list(lat, sites);
}

struct Fixture {
  std::string name;
  Lattice lattice;
  Bipartition part;
};

std::vector<Fixture> oracle_fixtures() {
  std::vector<Fixture> out;
  auto add_1d = [&](int n, Boundary b) {
    Lattice lat(LatticeSpec{{n}, b});
    auto part = left_half(lat);
    out.push_back({fmt("1d-%s-%d", to_string(b).c_str(), n), lat, part});
  };
  add_1d(2, Boundary::Open);
  add_1d(3, Boundary::Open);
  add_1d(6, Boundary::Open);
  add_1d(4, Boundary::Periodic);
  add_1d(8, Boundary::Periodic);
  add_1d(10, Boundary::Periodic);
  for (auto spec : {LatticeSpec{{3, 3}, Boundary::Periodic}, LatticeSpec{{2, 3}, Boundary::Open},
                    LatticeSpec{{2, 4}, Boundary::Open}, LatticeSpec{{4, 4}, Boundary::Periodic}}) {
    Lattice lat(spec);
    const auto name = fmt("%dx%d-%s", spec.linear_sizes[0], spec.linear_sizes[1], to_string(spec.boundary).c_str());
    out.push_back({name + "/half", lat, half_cylinder(lat)});
    out.push_back({name + "/site", lat, single_site(lat)});
  }
  return out;
}

const std::vector<double> kOracleBetas = {0.0, 0.1, 0.44, 1.0, 3.0};

// ---------------------------------------------------------------------------

void oracle_identities() {
  Timer timer;
  const auto fixtures = oracle_fixtures();

  double worst = 0.0;
  for (const auto& f : fixtures) worst = std::max(worst, std::abs(oracle::exact_negativity(f.lattice, f.part, 0.0)));
  report(worst <= 1e-12, "oracle: negativity at beta=0", fmt("max |N| = %.2e over %zu fixtures", worst, fixtures.size()));

  {
    const Lattice lat(LatticeSpec{{2}, Boundary::Open});
    const auto part = left_half(lat);
    double err_n = 0.0, err_f = 0.0;
    for (double bj : {0.1, 1.0, 3.0}) {
      const double t = std::tanh(bj);
      err_n = std::max(err_n, std::abs(oracle::exact_negativity(lat, part, bj) - 0.5 * t));
      err_f = std::max(err_f, std::abs(oracle::exact_fidelity(lat, part, bj) - 0.5 * (1.0 + t * t)));
    }
    report(err_n <= 1e-12 && err_f <= 1e-12, "oracle: two-site closed forms",
           fmt("max err negativity %.2e, fidelity %.2e", err_n, err_f));
  }

  {
    double err_sum = 0.0, err_neg = 0.0, err_dense = 0.0;
    int n_spectra = 0, n_dense = 0;
    for (const auto& f : fixtures) {
      if (f.lattice.num_sites() > oracle::kMaxDenseSites) continue;
      for (double beta : kOracleBetas) {
        const auto spec = oracle::negativity_spectrum(f.lattice, f.part, beta);
        err_sum = std::max(err_sum, std::abs(spec.sum() - 1.0));
        err_neg = std::max(err_neg, std::abs(spec.negativity() - oracle::exact_negativity(f.lattice, f.part, beta)));
        ++n_spectra;
        if (f.lattice.num_sites() > 8) continue;
        const auto rho = oracle::DensityMatrixSparse::thermal_ghz(f.lattice, beta).to_dense();
        auto dense = oracle::symmetric_eigenvalues(oracle::partial_transpose(rho, f.part.a_mask()));
        auto analytic = spec.all();
        std::sort(dense.begin(), dense.end());
        std::sort(analytic.begin(), analytic.end());
        for (size_t i = 0; i < dense.size(); ++i) err_dense = std::max(err_dense, std::abs(dense[i] - analytic[i]));
        ++n_dense;
      }
    }
    report(err_sum <= 1e-12 && err_neg <= 1e-12, "oracle: spectrum sum and negativity",
           fmt("%d spectra, max |sum-1| %.2e, max |N-N_exact| %.2e", n_spectra, err_sum, err_neg));
    report(err_dense <= 1e-12, "oracle: dense partial transpose (N<=8)",
           fmt("%d cases, max eigenvalue diff %.2e", n_dense, err_dense));
  }

  {
    const Lattice torus(LatticeSpec{{4, 4}, Boundary::Periodic});
    const Lattice ring(LatticeSpec{{6}, Boundary::Periodic});
    double err_q = 0.0, err_c = 0.0;
    for (const Lattice* lat : {&torus, &ring}) {
      const auto tri = ring_tripartition(*lat, 1);
      for (double beta : {0.2, 0.6, 1.5}) {
        const auto r = oracle::cmi_exact(*lat, tri, beta);
        err_q = std::max(err_q, std::abs(r.cmi - std::log(2.0)));
        err_c = std::max(err_c, std::abs(r.cmi_classical));
      }
    }
    report(err_q <= 1e-10 && err_c <= 1e-10, "oracle: CMI = log 2, classical CMI = 0",
           fmt("max |I-log2| %.2e, max |I_cl| %.2e", err_q, err_c));
  }

  {
    const Lattice chain(LatticeSpec{{4}, Boundary::Periodic});
    const Lattice square(LatticeSpec{{3, 3}, Boundary::Periodic});
    double fdlc = 0.0, parent = 0.0;
    for (const Lattice* lat : {&chain, &square}) {
      for (double beta : {0.1, 0.44, 1.0}) {
        fdlc = std::max(fdlc, oracle::verify_fdlc(*lat, beta));
        parent = std::max(parent, oracle::verify_parent_hamiltonian(*lat, beta));
      }
    }
    report(fdlc <= 1e-12 && parent <= 1e-12, "oracle: FDLC and parent Hamiltonian",
           fmt("max fdlc %.2e, max parent %.2e", fdlc, parent));
  }

  const double t = timer.seconds();
  report(t < 120.0, "oracle: suite runtime < 2 min", fmt("%.1f s", t));
}

// ---------------------------------------------------------------------------

void mc_vs_oracle() {
  Timer timer;
  const Lattice lat(LatticeSpec{{3, 3}, Boundary::Periodic});
  ChainConfig cfg = ChainConfig::defaults(UpdateRule::MetropolisSingleSpin);
  cfg.n_thermalization_sweeps = 2000;
  cfg.n_measurement_sweeps = 1'000'000;
  cfg.measure_every = 1;

  for (const auto& part : {half_cylinder(lat), single_site(lat)}) {
    for (double beta : {0.2, 0.44, 0.8}) {
      cfg.seed = sweep_point_seed(2024, "acceptance-mc", lat, part.id(), beta);
      const auto est = estimate_boundary_observables(lat, part, beta, cfg, {});
      const double n_exact = oracle::exact_negativity(lat, part, beta);
      const double f_exact = oracle::exact_fidelity(lat, part, beta);
      const auto& n = est.negativity;
      const auto& f = est.fidelity;
      const double zn = std::abs(n.value - n_exact) / n.std_error;
      const double zf = std::abs(f.value - f_exact) / f.std_error;
      const double n_eff = std::min(n.n_effective, f.n_effective);
      report(zn <= 3.0 && zf <= 3.0 && n_eff >= 1e5, fmt("mc: 3x3 %s beta=%.2f", part.id().c_str(), beta),
             fmt("N %.6f vs %.6f (%.2f sigma), F %.6f vs %.6f (%.2f sigma), n_eff %.3g", n.value, n_exact, zn,
                 f.value, f_exact, zf, n_eff));
    }
  }
  const double t = timer.seconds();
  report(t < 300.0, "mc: runtime < 5 min", fmt("%.1f s", t));
}

// ---------------------------------------------------------------------------

void negativity_vs_temperature() {
  Timer timer;
  const auto temps = grid(1.0, 5.0, 0.5);
  const std::vector<int> sizes = {8, 16, 32};
  ChainConfig cfg = ChainConfig::defaults(UpdateRule::MetropolisSingleSpin);
  cfg.n_thermalization_sweeps = 5000;
  cfg.n_measurement_sweeps = 200'000;
  cfg.measure_every = 2;
  cfg.seed = 7;

  std::vector<std::vector<NegativityEstimate>> rows;
  for (int l : sizes) {
    const Lattice lat(LatticeSpec{{l, l}, Boundary::Periodic});
    rows.push_back(negativity_temperature_sweep(lat, half_cylinder(lat), temps, cfg, {}, workers()));
  }

  double worst_z = -1e300;
  for (const auto& r : rows)
    for (const auto& e : r)
      worst_z = std::max(worst_z, e.std_error > 0 ? (e.value - 0.5) / e.std_error : (e.value > 0.5 ? 1e300 : -1e300));
  report(worst_z <= 3.0, "temperature sweep: N <= 1/2 + 3 sigma", fmt("max (N-1/2)/sigma = %.3g", worst_z));

  const size_t i15 = 1, i5 = temps.size() - 1;
  bool ok = true;
  std::string detail;
  for (size_t k = 0; k < sizes.size(); ++k) {
    const auto& e = rows[k][i15];
    const double diff = 0.5 - e.value;
    ok = ok && diff <= 3.0 * e.std_error;
    detail += fmt("L=%d: 1/2-N %.2e sigma %.2e; ", sizes[k], diff, e.std_error);
  }
  report(ok, "temperature sweep: N(T=1.5) = 1/2", detail);

  std::vector<double> deficit;
  detail.clear();
  for (size_t k = 0; k < sizes.size(); ++k) {
    deficit.push_back(0.5 - rows[k][i5].value);
    detail += fmt("L=%d: %.5f+-%.5f; ", sizes[k], deficit.back(), rows[k][i5].std_error);
  }
  report(deficit[0] > deficit[1] && deficit[1] > deficit[2], "temperature sweep: T=5 deficit decreases with L",
         detail);

  // Least squares of log(deficit) against L.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t k = 0; k < sizes.size(); ++k) {
    const double x = sizes[k], y = std::log(deficit[k]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  const double n = static_cast<double>(sizes.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  report(slope < 0 && std::abs(slope) * 32 > 3.0, "temperature sweep: log-deficit slope * 32 > 3",
         fmt("slope %.4f, |slope|*32 = %.3f", slope, std::abs(slope) * 32));

  const double t = timer.seconds();
  report(t <= 3600, "temperature sweep: runtime <= 1 h", fmt("%.1f s", t));
}

// ---------------------------------------------------------------------------

void derivative_peak() {
  Timer timer;
  const Lattice lat(LatticeSpec{{32, 32}, Boundary::Periodic});
  const auto temps = grid(2.0, 2.6, 0.05);
  ChainConfig cfg = ChainConfig::defaults(UpdateRule::WolffCluster);
  cfg.n_thermalization_sweeps = 2000;
  cfg.n_measurement_sweeps = 40'000;
  cfg.seed = 11;
  DerivativeOptions opts;
  opts.h = 0.02;
  opts.workers = workers();
  const auto pts = dN_dT_single_site(lat, temps, cfg, opts);

  size_t best = 0;
  for (size_t i = 1; i < pts.size(); ++i)
    if (std::abs(pts[i].derivative) > std::abs(pts[best].derivative)) best = i;
  const double tc = 2.0 / std::log(1.0 + std::sqrt(2.0));
  const double t_peak = pts[best].temperature;
  report(std::abs(t_peak - tc) <= 0.1, "derivative: peak of |dN/dT| near T_c",
         fmt("argmax T = %.2f (|dN/dT| = %.4f +- %.4f), T_c = %.4f", t_peak, std::abs(pts[best].derivative),
             pts[best].std_error, tc));
  const double t = timer.seconds();
  report(t <= 7200, "derivative: runtime <= 2 h", fmt("%.1f s", t));
}

// ---------------------------------------------------------------------------

void locc_protocol() {
  const Lattice lat(LatticeSpec{{8, 8}, Boundary::Periodic});
  const auto part = half_cylinder(lat);
  ChainConfig cfg = ChainConfig::defaults(UpdateRule::MetropolisSingleSpin);
  cfg.n_thermalization_sweeps = 2000;
  cfg.measure_every = 2;
  cfg.n_measurement_sweeps = 2 * 200'000;

  for (double beta : {0.3, 0.6}) {
    cfg.seed = sweep_point_seed(31, "acceptance-locc", lat, part.id(), beta);
    const auto trials = run_protocol_trials(lat, part, beta, cfg);
    ChainConfig other = cfg;
    other.seed = sweep_point_seed(32, "acceptance-fidelity", lat, part.id(), beta);
    const auto fid = estimate_fidelity(lat, part, beta, other);
    const double sigma = std::hypot(trials.std_error, fid.std_error);
    const double z = std::abs(trials.success_rate - fid.value) / sigma;
    report(z <= 3.0, fmt("locc: 8x8 beta=%.1f success = fidelity", beta),
           fmt("success %.5f+-%.5f, fidelity %.5f+-%.5f (%.2f sigma)", trials.success_rate, trials.std_error,
               fid.value, fid.std_error, z));
  }

  cfg.seed = 33;
  const auto hot = run_protocol_trials(lat, part, 0.0, cfg);
  const double z = std::abs(hot.success_rate - 0.5) / hot.std_error;
  report(z <= 3.0, "locc: beta=0 success = 1/2",
         fmt("success %.5f+-%.5f (%.2f sigma)", hot.success_rate, hot.std_error, z));
}

// ---------------------------------------------------------------------------

void repetition_code() {
  const std::vector<int> ns = {3, 9, 25};
  const std::vector<double> ps = {0.0, 0.1, 0.3, 0.5};
  const long n_trials = 100'000;
  for (auto dec : {RepetitionDecoder::Majority, RepetitionDecoder::MaximumLikelihood}) {
    const auto rows = threshold_scan(ns, ps, n_trials, dec, 41, workers());
    double worst_z = 0.0, worst_bound = -1e300;
    for (const auto& r : rows) {
      // Under the null the rate is binomial with mean `exact`.
      const double null_sigma = std::sqrt(r.exact_success * (1.0 - r.exact_success) / r.n_trials);
      const double sigma = std::max(r.std_error, null_sigma);
      const double diff = std::abs(r.success_rate - r.exact_success);
      worst_z = std::max(worst_z, sigma > 0 ? diff / sigma : (diff > 1e-12 ? 1e300 : 0.0));
      worst_bound = std::max(worst_bound, r.lower_bound - (r.success_rate + 3.0 * sigma));
    }
    report(worst_z <= 3.0, "repetition: " + to_string(dec) + " matches exact",
           fmt("%zu points, max |rate-exact|/sigma = %.2f", rows.size(), worst_z));
    report(worst_bound <= 1e-12, "repetition: " + to_string(dec) + " lower bound",
           fmt("max (bound - rate - 3 sigma) = %.3g", worst_bound));
  }
}

// ---------------------------------------------------------------------------

void domain_walls() {
  const std::vector<int> sizes = {8, 16, 32};
  ChainConfig cfg = ChainConfig::defaults(UpdateRule::MetropolisSingleSpin);
  cfg.n_thermalization_sweeps = 5000;
  cfg.n_measurement_sweeps = 200'000;
  cfg.measure_every = 2;

  auto run = [&](double beta) {
    std::vector<DomainWallStats> out(sizes.size());
    parallel_for(sizes.size(), workers(), [&](size_t k) {
      const Lattice lat(LatticeSpec{{sizes[k], sizes[k]}, Boundary::Periodic});
      ChainConfig c = cfg;
      c.seed = sweep_point_seed(51, "acceptance-walls", lat, "half-cylinder", beta);
      out[k] = domain_wall_density(lat, half_cylinder(lat), beta, c);
    });
    return out;
  };

  const auto cold = run(0.6);
  bool below = true, nonincreasing = true;
  std::string d_mean, d_tail;
  for (size_t k = 0; k < sizes.size(); ++k) {
    const auto& m = cold[k].density;
    below = below && m.mean < 0.5 - 3.0 * m.std_error;
    d_mean += fmt("L=%d: %.4f+-%.4f; ", sizes[k], m.mean, m.std_error);
    d_tail += fmt("L=%d: %.3g; ", sizes[k], cold[k].at_least_half.mean);
    if (k > 0) {
      const auto& a = cold[k - 1].at_least_half;
      const auto& b = cold[k].at_least_half;
      nonincreasing = nonincreasing && b.mean <= a.mean + 3.0 * std::hypot(a.std_error, b.std_error);
    }
  }
  report(below, "domain walls: beta=0.6 density < 1/2 - 3 sigma", d_mean);
  report(nonincreasing, "domain walls: beta=0.6 P(k>=|dA|/2) non-increasing", d_tail);

  // Deep in the ordered phase the tail is identically zero at every size, so
  // the size dependence is also checked where it is resolvable.
  const auto hot = run(0.3);
  bool decreasing = true;
  std::string d_hot;
  for (size_t k = 0; k < sizes.size(); ++k) {
    d_hot += fmt("L=%d: %.3g+-%.2g; ", sizes[k], hot[k].at_least_half.mean, hot[k].at_least_half.std_error);
    if (k > 0) {
      const auto& a = hot[k - 1].at_least_half;
      const auto& b = hot[k].at_least_half;
      decreasing = decreasing && a.mean - b.mean > 3.0 * std::hypot(a.std_error, b.std_error);
    }
  }
  report(decreasing, "domain walls: beta=0.3 P(k>=|dA|/2) decreasing", d_hot);
}

// ---------------------------------------------------------------------------

void determinism() {
  const std::vector<std::string> configs = {
      R"({"kind": "NegativitySweep", "lattice": {"d": 2, "L": [4, 6]}, "temperatures": [1.5, 2.5, 4.0],
          "chain": {"thermalization": 200, "measurement": 4000}, "seed": 3})",
      R"({"kind": "FidelitySweep", "lattice": {"d": 2, "L": 6}, "betas": [0.2, 0.5],
          "chain": {"update_rule": "wolff", "thermalization": 200, "measurement": 2000}, "seed": 4})",
      R"({"kind": "DNdTScan", "lattice": {"d": 2, "L": 6}, "temperatures": [2.0, 2.3, 2.6], "h": 0.05,
          "richardson": true, "chain": {"thermalization": 200, "measurement": 2000}, "seed": 5})",
      R"({"kind": "LoccTrials", "lattice": {"d": 2, "L": 6}, "betas": [0.0, 0.4, 0.8], "n_trials": 2000,
          "chain": {"thermalization": 200, "measure_every": 2}, "seed": 6})",
      R"({"kind": "RepetitionThreshold", "n_bits": [3, 9], "p": [0.1, 0.3], "n_trials": 5000,
          "decoder": "ml", "seed": 7})",
  };
  for (const auto& text : configs) {
    auto cfg = parse_config(nlohmann::json::parse(text));
    cfg.workers = 1;
    const auto a = run_experiment_in_memory(cfg).csv;
    const auto b = run_experiment_in_memory(cfg).csv;
    cfg.workers = 3;
    const auto c = run_experiment_in_memory(cfg).csv;
    report(!a.empty() && a == b && a == c, "determinism: " + to_string(cfg.kind),
           fmt("%zu bytes; repeat %s, 1 vs 3 workers %s", a.size(), a == b ? "identical" : "DIFFERENT",
               a == c ? "identical" : "DIFFERENT"));
  }
}

}  // namespace

int main() {
  Timer total;
  std::printf("tneg acceptance, version %s, %d worker(s)\n", version_string().c_str(), workers());
  oracle_identities();
  mc_vs_oracle();
  negativity_vs_temperature();
  derivative_peak();
  locc_protocol();
  repetition_code();
  domain_walls();
  determinism();
  std::printf("%d failure(s), %.1f s total\n", g_failures, total.seconds());
  return g_failures == 0 ? 0 : 1;
}
