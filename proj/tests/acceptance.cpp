// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Budgets are wall-clock and enforced.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "hexsense/hexsense.hpp"
#include "hexsense/io.hpp"

using namespace hexsense;

namespace {

int g_failures = 0;
std::vector<std::string> g_notes;

class Criterion {
 public:
  Criterion(int number, std::string title, double budget_seconds)
      : number_(number), title_(std::move(title)), budget_(budget_seconds),
        start_(std::chrono::steady_clock::now()) {}

  void require(bool ok, const std::string& what) {
    if (!ok) {
      failed_ = true;
      details_ += (details_.empty() ? "" : "; ") + what;
    }
  }

  void note(const std::string& text) { g_notes.push_back(text); }

  ~Criterion() {
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    if (budget_ > 0.0 && elapsed > budget_) {
      failed_ = true;
      details_ += (details_.empty() ? "" : "; ") + std::string("exceeded ") +
                  std::to_string(budget_) + "s budget";
    }
    std::printf("[%s] %02d %s [%.2fs]%s%s\n", failed_ ? "FAIL" : "PASS", number_,
                title_.c_str(), elapsed, details_.empty() ? "" : " -- ", details_.c_str());
    std::fflush(stdout);
    if (failed_) ++g_failures;
  }

 private:
  int number_;
  std::string title_;
  double budget_;
  std::chrono::steady_clock::time_point start_;
  bool failed_ = false;
  std::string details_;
};

double rel_dev(double a, double b) {
  if (std::isinf(a) && std::isinf(b)) return 0.0;
  return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void criterion_1_round_trip() {
  Criterion crit(1, "round-trip inversion over the parameter sweep (rel <= 1e-9)", 1.0);
  std::size_t cases = 0;
  double worst = 0.0;
  for (double c1 : {0.5, 1.0, 2.0}) {
    for (double c2 : {0.5, 1.0, 2.0}) {
      for (double l : {0.5, 1.0, 2.0}) {
        for (int i = 0; i < 10; ++i) {
          for (int j = 0; j < 10; ++j) {
            const double m1 = -2.0 + 4.0 * i / 9.0;
            const double m2 = -2.0 + 4.0 * j / 9.0;
            const GaussianParams p{c1, c2, m1, m2};
            const auto out = try_invert(forward_phi(p, l));
            if (!out.ok()) {
              crit.require(false, "noiseless inversion rejected");
              continue;
            }
            worst = std::max({worst, std::abs(out.params->c1 - c1) / c1,
                              std::abs(out.params->c2 - c2) / c2,
                              std::abs(out.params->m1 - m1) / std::max(std::abs(m1), 1.0),
                              std::abs(out.params->m2 - m2) / std::max(std::abs(m2), 1.0)});
            ++cases;
          }
        }
      }
    }
  }
  crit.require(cases == 2700, "expected 2700 grid cases");
  crit.require(worst <= 1e-9, "worst relative error " + std::to_string(worst));
}

void criterion_2_precondition() {
  Criterion crit(2, "invertibility precondition under 1e5 random positive quads", 10.0);
  std::mt19937_64 eng(424242);
  std::uniform_real_distribution<double> u(-6.0, 2.0);
  for (int i = 0; i < 100000; ++i) {
    std::array<double, 4> mu;
    for (auto& m : mu) m = std::exp(u(eng));
    const auto out = try_invert(MeasurementQuad(mu, 1.0));
    const double width_log =
        3.0 * std::log(mu[0]) - std::log(mu[1]) - std::log(mu[2]) - std::log(mu[3]);
    if (width_log < 1e-12) {
      crit.require(out.failure == InversionFailure::WidthDegenerate,
                   "degenerate quad not flagged");
    }
    if (out.ok()) {
      crit.require(out.params->c2 > 0.0, "valid estimate with nonpositive c2");
      crit.require(out.params->c1 > 0.0, "valid estimate with nonpositive c1");
    }
  }
}

void criterion_3_variance_oracle() {
  Criterion crit(3, "closed-form variances agree with the (DPhi)^-1 oracle (rel <= 1e-6)",
                 10.0);
  double worst_corrected = 0.0;
  std::array<double, 4> worst_printed{};  // per channel
  for (double l : {0.5, 1.0}) {
    for (double c2 : {0.5, 1.0}) {
      for (int i = 0; i < 10; ++i) {
        for (int j = 0; j < 10; ++j) {
          const double m1 = -1.5 + 3.0 * i / 9.0;
          const double m2 = -1.5 + 3.0 * j / 9.0;
          if (std::hypot(m1, m2) < 0.05) continue;
          const GaussianParams p{1.0, c2, m1, m2};
          const auto nu = numeric_oracle_variances(l, p, 1e-4);
          const auto cf = closed_form_variances(l, p, 1e-4);
          const auto pr = closed_form_variances(l, p, 1e-4, ClosedFormVariant::AsPrinted);
          worst_corrected = std::max(
              {worst_corrected, rel_dev(cf.var_c1, nu.var_c1), rel_dev(cf.var_c2, nu.var_c2),
               rel_dev(cf.var_mod_m, nu.var_mod_m), rel_dev(cf.var_angle, nu.var_angle)});
          worst_printed[0] = std::max(worst_printed[0], rel_dev(pr.var_c1, nu.var_c1));
          worst_printed[1] = std::max(worst_printed[1], rel_dev(pr.var_c2, nu.var_c2));
          worst_printed[2] = std::max(worst_printed[2], rel_dev(pr.var_mod_m, nu.var_mod_m));
          worst_printed[3] = std::max(worst_printed[3], rel_dev(pr.var_angle, nu.var_angle));
        }
      }
    }
  }
  crit.require(worst_corrected <= 1e-6,
               "corrected forms deviate by " + std::to_string(worst_corrected));
  // the per-channel transcription check: S(l;C2) prefactor and S(l;C1) scale
  // are misprinted; the |m| and angle channels are correct as printed
  crit.require(worst_printed[1] > 1e-3, "expected the printed S(l;C2) to deviate");
  crit.require(worst_printed[0] > 1e-3, "expected the printed S(l;C1) to deviate");
  crit.require(worst_printed[2] <= 1e-6, "printed S(l;|m|) should match the oracle");
  crit.require(worst_printed[3] <= 1e-6, "printed S(l;angle) should match the oracle");
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "as-printed max rel deviation from oracle: c1=%.3g c2=%.3g modm=%.3g "
                "angle=%.3g; oracle-corrected max %.3g",
                worst_printed[0], worst_printed[1], worst_printed[2], worst_printed[3],
                worst_corrected);
  crit.note(std::string("criterion 3 discrepancy report: ") + buf +
            " (printed c1 global factor reads 9/l^4 for 1/(9 l^4), printed c2 prefactor "
            "reads exp(2|m|/c2) for exp(2|m|^2/c2))");
}

void criterion_4_monte_carlo() {
  Criterion crit(4, "monte carlo variances within 10% of the oracle (1e5 trials)", 30.0);
  const GaussianParams p{1.0, 1.0, 0.4, 0.2};
  const double sigma = 1e-4;
  const auto mc = monte_carlo_variances(1.0, p, sigma, 100000, 20240601);
  const auto nu = numeric_oracle_variances(1.0, p, sigma * sigma);
  crit.require(rel_dev(mc.var_c1, nu.var_c1) <= 0.10, "c1 variance off");
  crit.require(rel_dev(mc.var_c2, nu.var_c2) <= 0.10, "c2 variance off");
  crit.require(rel_dev(mc.var_mod_m, nu.var_mod_m) <= 0.10, "|m| variance off");
  crit.require(rel_dev(mc.var_angle, nu.var_angle) <= 0.10, "angle variance off");
  crit.require(mc.discard_rate == 0.0, "unexpected discards at tiny noise");
}

void criterion_5_canonical_root() {
  Criterion crit(5, "canonical spacing root 1.11691 and minimizer agreement", 10.0);
  const double root = canonical_root(1.0);
  crit.require(std::abs(root - 1.11691) <= 1e-5, "root " + std::to_string(root));
  const auto res = minimize_spacing(VarianceChannel::C2, {1.0, 1.0, 0.0, 0.0}, 1e-4);
  crit.require(std::abs(res.l_opt - root) <= 1e-3, "minimizer " + std::to_string(res.l_opt));
}

void criterion_6_bounds() {
  Criterion crit(6, "spacing bounds sqrt(c2)-|m| < l_opt < sqrt(2 c2)+|m| on the grid", 60.0);
  for (double c2 : {0.25, 1.0, 4.0}) {
    const double s = std::sqrt(c2);
    for (int ri = 0; ri <= 8; ++ri) {
      const double mm = 2.0 * s * ri / 8.0;
      for (double ang : {0.0, 0.9, 2.2, 4.4}) {
        const GaussianParams p{1.0, c2, mm * std::cos(ang), mm * std::sin(ang)};
        const auto res = minimize_spacing(VarianceChannel::C2, p, 1.0);
        const auto [lo, hi] = prop2_bounds(c2, mm);
        crit.require(res.l_opt > lo && res.l_opt < hi,
                     "bound violated at c2=" + std::to_string(c2) +
                         " |m|=" + std::to_string(mm));
        if (mm == 0.0) break;  // angle is moot at the center
      }
    }
  }
}

void criterion_7_remark3() {
  Criterion crit(7, "argmin invariant in c1 and covariant under the scaling map", 30.0);
  const auto base = minimize_spacing(VarianceChannel::C2, {1.0, 1.0, 0.8, 0.3}, 1.0);
  for (double c1 : {0.1, 1.0, 10.0}) {
    const auto res = minimize_spacing(VarianceChannel::C2, {c1, 1.0, 0.8, 0.3}, 1.0);
    crit.require(rel_dev(res.l_opt, base.l_opt) <= 1e-6,
                 "c1=" + std::to_string(c1) + " moved the argmin");
  }
  for (double lam : {0.5, 2.0}) {
    const auto res = minimize_spacing(VarianceChannel::C2,
                                      {1.0, lam * lam, lam * 0.8, lam * 0.3}, 1.0);
    crit.require(rel_dev(res.l_opt, lam * base.l_opt) <= 1e-3,
                 "lambda=" + std::to_string(lam) + " breaks covariance");
  }
}

void criterion_8_coverage() {
  Criterion crit(8, "coverage-area formulas exact to 1e-12", 1.0);
  const double s3 = std::sqrt(3.0);
  for (double l : {0.5, 1.0, 2.0}) {
    for (std::size_t n : {1u, 4u, 9u}) {
      crit.require(std::abs(coverage_area(TessellationKind::Hexagonal, l, n) -
                            3.0 * s3 / 4.0 * l * l * n) <= 1e-12,
                   "hexagonal");
      crit.require(std::abs(coverage_area(TessellationKind::Triangular, l, n) -
                            s3 / 2.0 * l * l * n) <= 1e-12,
                   "triangular");
      crit.require(std::abs(coverage_area(TessellationKind::Square, l, n) - l * l * n) <=
                       1e-12,
                   "square");
    }
  }
}

void criterion_9_consensus_invariants() {
  Criterion crit(9, "consensus invariants on 1e3 random connected graphs", 120.0);
  std::mt19937_64 eng(90210);
  std::uniform_real_distribution<double> ux(-1.0, 1.0);
  std::uniform_real_distribution<double> us(std::log(1e-3), std::log(1e3));
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 1 + eng() % 20;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 1; i < n; ++i) edges.push_back({i, eng() % i});
    const std::size_t extra = eng() % (n + 1);
    for (std::size_t k = 0; k < extra; ++k) {
      const std::size_t a = eng() % n, b = eng() % n;
      if (a != b) edges.push_back({a, b});
    }
    const auto g = graph_from_edges(n, edges);
    std::vector<double> x0(n), s0(n);
    for (auto& v : x0) v = ux(eng);
    for (auto& v : s0) v = std::exp(us(eng));
    const double s_lo = *std::min_element(s0.begin(), s0.end());
    const double s_hi = *std::max_element(s0.begin(), s0.end());

    ConsensusState state{x0, s0, 0};
    double max_x = *std::max_element(x0.begin(), x0.end());
    double min_x = *std::min_element(x0.begin(), x0.end());
    bool reached = spread(state.x) <= 1e-9;
    for (std::size_t step = 0; step < 10000 && !reached; ++step) {
      if (step < 3) {  // matrix-level row checks on the early, most skewed states
        const auto p = wise_p_matrix(g, state.s);
        const auto m = wise_m_matrix(g, state.s);
        for (std::size_t i = 0; i < n; ++i) {
          double prow = 0.0, mrow = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            prow += p[i][j];
            mrow += m[i][j];
          }
          crit.require(std::abs(prow - 1.0) <= 1e-12, "P row sum");
          crit.require(std::abs(mrow - 1.0) <= 1e-12, "M row sum");
        }
      }
      state = wise_step(state, g);
      const double cur_max = *std::max_element(state.x.begin(), state.x.end());
      const double cur_min = *std::min_element(state.x.begin(), state.x.end());
      crit.require(cur_max <= max_x + 1e-12 && cur_min >= min_x - 1e-12,
                   "x envelope not monotone");
      max_x = cur_max;
      min_x = cur_min;
      for (double s : state.s)
        crit.require(s >= s_lo * (1.0 - 1e-12) && s <= s_hi * (1.0 + 1e-12),
                     "s left the initial range");
      reached = spread(state.x) <= 1e-9;
    }
    crit.require(reached, "no convergence within 1e4 iterations (n=" + std::to_string(n) + ")");
  }
}

void criterion_10_hand_example() {
  Criterion crit(10, "two-node hand example: x* = 0.25, s* = 1.2 after one step", 1.0);
  std::vector<std::pair<std::size_t, std::size_t>> edges{{0, 1}};
  const auto g = graph_from_edges(2, edges);
  const auto rep = run_wise(g, {0.0, 1.0}, {1.0, 3.0});
  crit.require(rep.converged, "did not converge");
  crit.require(rep.iterations == 1, "expected a single step");
  crit.require(std::abs(rep.x_star - 0.25) <= 1e-12, "x* = " + std::to_string(rep.x_star));
  crit.require(std::abs(rep.s_star - 1.2) <= 1e-12, "s* = " + std::to_string(rep.s_star));
}

void criterion_11_reductions() {
  Criterion crit(11, "uniform-quality and two-channel reductions", 10.0);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < 6; ++i) edges.push_back({i, (i + 1) % 6});
  const auto g = graph_from_edges(6, edges);
  const std::vector<double> x0{2.0, -1.0, 0.5, 3.5, 1.25, -0.75};

  ConsensusOptions opts{1e-10, 1e-6, 10000, true};
  const auto wise = run_wise(g, x0, std::vector<double>(6, 0.4), opts);
  const auto avg = average_consensus(g, x0, uniform_neighborhood_matrix(g), opts);
  crit.require(wise.trace.size() == avg.trace.size(), "trace lengths differ");
  const std::size_t steps = std::min(wise.trace.size(), avg.trace.size());
  double worst = 0.0;
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t i = 0; i < 6; ++i)
      worst = std::max(worst, std::abs(wise.trace[t].x[i] - avg.trace[t].x[i]));
  crit.require(worst <= 1e-12, "trace deviation " + std::to_string(worst));

  const std::vector<double> vars{1.0, 0.2, 5.0, 0.8, 2.5, 0.1};
  const auto two = two_channel_fusion(g, x0, vars, {1e-13, 1e-6, 100000});
  crit.require(std::abs(two.x_star - optimal_fusion(x0, vars)) <= 1e-8,
               "two-channel limit off the closed form");
}

void criterion_12_statistical() {
  Criterion crit(12, "wise consensus beats averaging at the eccentric centers", 120.0);
  const std::array<std::pair<double, double>, 4> centers{
      {{0.0, 0.0}, {0.5, 0.5}, {1.0, 1.0}, {1.5, 1.5}}};
  for (std::size_t ci = 0; ci < centers.size(); ++ci) {
    ExperimentConfig config;
    config.network = {"paper12", 0, 1.0};
    config.truth = GaussianParams(1.0, 1.0, centers[ci].first, centers[ci].second);
    config.noise.variance_frac = 0.01;  // default reading: sigma^2 = 0.01 * c1
    config.noise.reading = NoiseReading::PeakValue;
    config.methods = {MethodSpec{FusionMethod::Average}, MethodSpec{FusionMethod::Wise}};
    config.trials = 500;
    config.seed = 1000 + ci;
    const auto result = run_experiment(config);

    // paired per-trial center errors (same noise feeds both methods)
    std::vector<double> avg_err, wise_err;
    for (const auto& trial : result.trials) {
      if (!trial.methods[0].ok || !trial.methods[1].ok) continue;
      avg_err.push_back(trial.methods[0].abs_err[4]);
      wise_err.push_back(trial.methods[1].abs_err[4]);
    }
    crit.require(avg_err.size() >= 100, "too few comparable trials");
    if (ci == 0) continue;  // the centered case is symmetric; no claim there

    crit.require(median_of(wise_err) <= median_of(avg_err),
                 "wise median above average median at center " + std::to_string(ci));
    // paired bootstrap: the ordering must hold in at least 90% of resamples
    std::mt19937_64 eng(777);
    const std::size_t n = avg_err.size();
    std::size_t hold = 0;
    std::vector<double> ra(n), rw(n);
    for (int b = 0; b < 1000; ++b) {
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t idx = eng() % n;
        ra[k] = avg_err[idx];
        rw[k] = wise_err[idx];
      }
      if (median_of(rw) <= median_of(ra)) ++hold;
    }
    crit.require(hold >= 900, "bootstrap support " + std::to_string(hold) + "/1000 at center " +
                                  std::to_string(ci));
  }
}

void criterion_13_determinism() {
  Criterion crit(13, "identical config and seed produce byte-identical result files", 60.0);
  ExperimentConfig config;
  config.network = {"paper12", 0, 1.0};
  config.truth = GaussianParams(1.0, 1.0, 0.5, 0.5);
  config.methods = {MethodSpec{FusionMethod::Raw}, MethodSpec{FusionMethod::Average},
                    MethodSpec{FusionMethod::TwoChannel}, MethodSpec{FusionMethod::Wise},
                    MethodSpec{FusionMethod::Recompute}, MethodSpec{FusionMethod::Hybrid, 5}};
  config.trials = 30;
  config.seed = 99;
  const std::string a = result_to_json(run_experiment(config)).dump(2);
  const std::string b = result_to_json(run_experiment(config)).dump(2);
  const auto dir = std::filesystem::temp_directory_path();
  const std::string fa = (dir / "hexsense_acceptance_a.json").string();
  const std::string fb = (dir / "hexsense_acceptance_b.json").string();
  spit(fa, a);
  spit(fb, b);
  crit.require(slurp(fa) == slurp(fb), "result files differ");
}

}  // namespace

int main() {
  criterion_1_round_trip();
  criterion_2_precondition();
  criterion_3_variance_oracle();
  criterion_4_monte_carlo();
  criterion_5_canonical_root();
  criterion_6_bounds();
  criterion_7_remark3();
  criterion_8_coverage();
  criterion_9_consensus_invariants();
  criterion_10_hand_example();
  criterion_11_reductions();
  criterion_12_statistical();
  criterion_13_determinism();

  for (const auto& note : g_notes) std::printf("[INFO] %s\n", note.c_str());
  if (g_failures == 0) {
    std::printf("all 13 acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d criteria FAILED\n", g_failures);
  return 1;
}
