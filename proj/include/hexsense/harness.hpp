#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hexsense/consensus.hpp"
#include "hexsense/estimator.hpp"
#include "hexsense/lattice.hpp"
#include "hexsense/rng.hpp"
#include "hexsense/sensitivity.hpp"

namespace hexsense {

enum class FusionMethod { Raw, Average, TwoChannel, Wise, Recompute, Hybrid };

struct MethodSpec {
  FusionMethod method = FusionMethod::Wise;
  std::size_t k_bar = 0;  // Hybrid only

  std::string name() const {
    switch (method) {
      case FusionMethod::Raw: return "raw";
      case FusionMethod::Average: return "average";
      case FusionMethod::TwoChannel: return "two-channel";
      case FusionMethod::Wise: return "wise";
      case FusionMethod::Recompute: return "recompute";
      case FusionMethod::Hybrid: return "hybrid:" + std::to_string(k_bar);
    }
    return "unknown";
  }

  static MethodSpec parse(const std::string& text) {
    if (text == "raw") return {FusionMethod::Raw};
    if (text == "average") return {FusionMethod::Average};
    if (text == "two-channel") return {FusionMethod::TwoChannel};
    if (text == "wise") return {FusionMethod::Wise};
    if (text == "recompute" || text == "variant-recompute") return {FusionMethod::Recompute};
    if (text.rfind("hybrid:", 0) == 0 || text.rfind("variant-hybrid:", 0) == 0) {
      const auto pos = text.find(':');
      try {
        return {FusionMethod::Hybrid, static_cast<std::size_t>(std::stoul(text.substr(pos + 1)))};
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidConfig, "bad hybrid step count in '" + text + "'");
      }
    }
    throw Error(ErrorCode::InvalidConfig, "unknown fusion method '" + text + "'");
  }
};

/// How "noise variance is a fraction of the peak" is read: as a fraction of
/// the peak value c1 (default) or of the squared peak c1^2. Both readings are
/// runnable; see the config documentation.
enum class NoiseReading { PeakValue, PeakSquared };

struct NetworkSpec {
  std::string preset;      // "paper12", or empty to use rings
  std::size_t rings = 1;
  double edge = 1.0;

  HexNetwork build() const {
    if (preset.empty()) return generate_honeycomb(rings, edge);
    if (preset == "paper12") return preset_paper_network(edge);
    throw Error(ErrorCode::InvalidConfig, "unknown network preset '" + preset + "'");
  }
};

struct NoiseSpec {
  std::optional<double> sigma;  // direct standard deviation; overrides the fraction
  double variance_frac = 0.01;
  NoiseReading reading = NoiseReading::PeakValue;

  double resolved_sigma(double c1) const {
    if (sigma) return *sigma;
    const double var =
        reading == NoiseReading::PeakValue ? variance_frac * c1 : variance_frac * c1 * c1;
    return std::sqrt(var);
  }
};

struct ExperimentConfig {
  NetworkSpec network{};
  GaussianParams truth{1.0, 1.0, 0.0, 0.0};
  NoiseSpec noise{};
  std::vector<MethodSpec> methods{{FusionMethod::Average}, {FusionMethod::Wise}};
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  double tol = 1e-9;
  std::size_t max_iter = 10000;

  void validate() const {
    if (trials < 1) throw Error(ErrorCode::InvalidConfig, "trials must be >= 1");
    if (methods.empty()) throw Error(ErrorCode::InvalidConfig, "at least one fusion method");
    if (!(tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "tol must be positive");
    if (!network.preset.empty() && network.preset != "paper12")
      throw Error(ErrorCode::InvalidConfig, "unknown network preset '" + network.preset + "'");
    if (!(network.edge > 0.0))
      throw Error(ErrorCode::InvalidConfig, "edge length must be positive");
  }
};

inline constexpr std::array<const char*, 5> kErrorChannels{"c1", "c2", "m1", "m2", "center"};

/// One inner node's estimate plus the presumed variances used as fusion
/// qualities: S(l;c1), S(l;c2) and the isotropic center quality
/// S(l;|m|) + |m|^2 S(l;angle), all substituted at the node's own estimate.
struct NodeRecord {
  LocalEstimate estimate;
  double var_c1 = std::numeric_limits<double>::infinity();
  double var_c2 = std::numeric_limits<double>::infinity();
  double var_center = std::numeric_limits<double>::infinity();
};

/// Runs the estimation phase at every inner node for one vector of per-node
/// measurements and attaches the presumed variances.
inline std::vector<NodeRecord> estimate_all(const HexNetwork& net,
                                            std::span<const double> values, double sigma2) {
  std::vector<NodeRecord> out;
  out.reserve(net.inner.size());
  for (std::size_t node : net.inner) {
    NodeRecord rec;
    rec.estimate = estimate_at_node(net, node, values);
    if (rec.estimate.valid()) {
      const auto& local = *rec.estimate.params_local;
      const VarianceSet vs = closed_form_variances(net.edge, local, sigma2);
      const double mm = local.mod_m();
      rec.var_c1 = vs.var_c1;
      rec.var_c2 = vs.var_c2;
      rec.var_center = vs.var_mod_m + mm * mm * vs.var_angle;
      if (std::isnan(rec.var_c1)) rec.var_c1 = std::numeric_limits<double>::infinity();
      if (std::isnan(rec.var_c2)) rec.var_c2 = std::numeric_limits<double>::infinity();
      if (std::isnan(rec.var_center)) rec.var_center = std::numeric_limits<double>::infinity();
    }
    out.push_back(rec);
  }
  return out;
}

struct MethodOutcome {
  bool ok = false;
  std::optional<GaussianParams> fused;  // absent for raw and for failed trials
  std::array<double, 5> abs_err{std::numeric_limits<double>::quiet_NaN(),
                                std::numeric_limits<double>::quiet_NaN(),
                                std::numeric_limits<double>::quiet_NaN(),
                                std::numeric_limits<double>::quiet_NaN(),
                                std::numeric_limits<double>::quiet_NaN()};
  std::size_t iterations = 0;
  bool converged = true;
};

/// Per-method fusion of one trial's estimates. Channels (c1, c2, m1, m2) run
/// as independent scalar consensus problems; invalid estimates stay in the
/// graph with x = 0 and infinite quality (near-zero weight after clamping).
/// Reports per-channel FusionReports for the iterative methods.
struct TrialFusion {
  MethodOutcome outcome;
  std::array<FusionReport, 4> reports;
};

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (double e : v) acc += e;
  return acc / static_cast<double>(v.size());
}

// Center quality of an arbitrary center estimate in a node's frame.
inline double center_quality(const GaussianParams& local, double edge, double sigma2) {
  const VarianceSet vs = closed_form_variances(edge, local, sigma2);
  const double mm = local.mod_m();
  const double q = vs.var_mod_m + mm * mm * vs.var_angle;
  return std::isnan(q) ? std::numeric_limits<double>::infinity() : q;
}

}  // namespace detail

inline TrialFusion fuse_trial(const HexNetwork& net, const FusionGraph& graph,
                              std::span<const NodeRecord> nodes, double sigma2,
                              const MethodSpec& method,
                              const std::optional<GaussianParams>& truth,
                              const ConsensusOptions& opts = {}) {
  const std::size_t n = nodes.size();
  if (n != graph.size()) throw Error(ErrorCode::InvalidParams, "node/graph size mismatch");

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> c1s(n, 0.0), c2s(n, 0.0), mxs(n, 0.0), mys(n, 0.0);
  std::vector<double> s_c1(n, kInf), s_c2(n, kInf), s_ctr(n, kInf);
  std::size_t n_valid = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!nodes[k].estimate.valid()) continue;
    ++n_valid;
    const auto& g = *nodes[k].estimate.params_global;
    c1s[k] = g.c1;
    c2s[k] = g.c2;
    mxs[k] = g.m1;
    mys[k] = g.m2;
    s_c1[k] = nodes[k].var_c1;
    s_c2[k] = nodes[k].var_c2;
    s_ctr[k] = nodes[k].var_center;
  }

  TrialFusion result;
  auto& out = result.outcome;
  if (n_valid == 0) return result;  // ok stays false: nothing to fuse

  auto finish = [&](double c1f, double c2f, double mxf, double myf) {
    if (!(c1f > 0.0) || !(c2f > 0.0) || !std::isfinite(mxf) || !std::isfinite(myf)) return;
    out.fused = GaussianParams(c1f, c2f, mxf, myf);
    out.ok = true;
    if (truth) {
      out.abs_err[0] = std::abs(c1f - truth->c1);
      out.abs_err[1] = std::abs(c2f - truth->c2);
      out.abs_err[2] = std::abs(mxf - truth->m1);
      out.abs_err[3] = std::abs(myf - truth->m2);
      out.abs_err[4] = std::hypot(mxf - truth->m1, myf - truth->m2);
    }
  };

  switch (method.method) {
    case FusionMethod::Raw: {
      // No fusion: per-channel median of the per-node absolute errors.
      if (!truth) {
        out.ok = true;
        return result;
      }
      std::vector<double> e0, e1, e2, e3, e4;
      for (std::size_t k = 0; k < n; ++k) {
        if (!nodes[k].estimate.valid()) continue;
        e0.push_back(std::abs(c1s[k] - truth->c1));
        e1.push_back(std::abs(c2s[k] - truth->c2));
        e2.push_back(std::abs(mxs[k] - truth->m1));
        e3.push_back(std::abs(mys[k] - truth->m2));
        e4.push_back(std::hypot(mxs[k] - truth->m1, mys[k] - truth->m2));
      }
      out.abs_err = {detail::median_of(e0), detail::median_of(e1), detail::median_of(e2),
                     detail::median_of(e3), detail::median_of(e4)};
      out.ok = true;
      return result;
    }

    case FusionMethod::Average: {
      // Arithmetic average over valid estimates: the limit a doubly stochastic
      // fixed-matrix consensus reaches.
      double c1f = 0, c2f = 0, mxf = 0, myf = 0;
      for (std::size_t k = 0; k < n; ++k) {
        if (!nodes[k].estimate.valid()) continue;
        c1f += c1s[k];
        c2f += c2s[k];
        mxf += mxs[k];
        myf += mys[k];
      }
      const auto nv = static_cast<double>(n_valid);
      finish(c1f / nv, c2f / nv, mxf / nv, myf / nv);
      return result;
    }

    case FusionMethod::TwoChannel: {
      // A-priori variances: from the truth when it is known (the known-variance
      // setting), otherwise the recorded presumed variances.
      std::vector<double> v_c1(n, kInf), v_c2(n, kInf), v_ctr(n, kInf);
      if (truth) {
        for (std::size_t k = 0; k < n; ++k) {
          if (!nodes[k].estimate.valid()) continue;  // no estimate: zero weight
          const LocalFrame frame = local_frame(net, net.inner[k]);
          const Vec2 m_local = frame.apply(truth->center());
          const GaussianParams local(truth->c1, truth->c2, m_local.x, m_local.y);
          const VarianceSet vs = closed_form_variances(net.edge, local, sigma2);
          v_c1[k] = vs.var_c1;
          v_c2[k] = vs.var_c2;
          v_ctr[k] = detail::center_quality(local, net.edge, sigma2);
        }
      } else {
        v_c1 = s_c1;
        v_c2 = s_c2;
        v_ctr = s_ctr;
      }
      // zero variance means a perfect channel (noiseless runs); floor it so
      // the inverse-variance weights stay finite and uniform
      for (auto* v : {&v_c1, &v_c2, &v_ctr})
        for (double& e : *v) {
          if (std::isnan(e) || e < 0.0) e = kInf;
          else if (e < 1e-12) e = 1e-12;
        }
      try {
        result.reports[0] = two_channel_fusion(graph, c1s, v_c1, opts);
        result.reports[1] = two_channel_fusion(graph, c2s, v_c2, opts);
        result.reports[2] = two_channel_fusion(graph, mxs, v_ctr, opts);
        result.reports[3] = two_channel_fusion(graph, mys, v_ctr, opts);
      } catch (const Error&) {
        return result;  // e.g. AllWeightsZero
      }
      break;
    }

    case FusionMethod::Wise: {
      result.reports[0] = run_wise(graph, c1s, s_c1, opts);
      result.reports[1] = run_wise(graph, c2s, s_c2, opts);
      result.reports[2] = run_wise(graph, mxs, s_ctr, opts);
      result.reports[3] = run_wise(graph, mys, s_ctr, opts);
      break;
    }

    case FusionMethod::Recompute: {
      // Quality recomputed from the current estimate each step; the other
      // parameters stay frozen at the node's initial estimate.
      std::vector<LocalFrame> frames;
      frames.reserve(n);
      for (std::size_t k = 0; k < n; ++k) frames.push_back(local_frame(net, net.inner[k]));
      const double edge = net.edge;
      auto fn_for = [&](int channel) {
        return std::function<double(std::size_t, double)>(
            [&, channel](std::size_t k, double x) -> double {
              if (!nodes[k].estimate.valid()) return kInf;
              const auto& loc = *nodes[k].estimate.params_local;
              const auto& glob = *nodes[k].estimate.params_global;
              constexpr double kTiny = 1e-12;
              switch (channel) {
                case 0: {
                  const GaussianParams p(std::max(x, kTiny), loc.c2, loc.m1, loc.m2);
                  return closed_form_variances(edge, p, sigma2).var_c1;
                }
                case 1: {
                  const GaussianParams p(loc.c1, std::max(x, kTiny), loc.m1, loc.m2);
                  return closed_form_variances(edge, p, sigma2).var_c2;
                }
                case 2: {
                  const Vec2 m_local = frames[k].apply({x, glob.m2});
                  return detail::center_quality(
                      GaussianParams(loc.c1, loc.c2, m_local.x, m_local.y), edge, sigma2);
                }
                default: {
                  const Vec2 m_local = frames[k].apply({glob.m1, x});
                  return detail::center_quality(
                      GaussianParams(loc.c1, loc.c2, m_local.x, m_local.y), edge, sigma2);
                }
              }
            });
      };
      result.reports[0] = variant_recompute(graph, c1s, fn_for(0), opts);
      result.reports[1] = variant_recompute(graph, c2s, fn_for(1), opts);
      result.reports[2] = variant_recompute(graph, mxs, fn_for(2), opts);
      result.reports[3] = variant_recompute(graph, mys, fn_for(3), opts);
      break;
    }

    case FusionMethod::Hybrid: {
      result.reports[0] = variant_hybrid(graph, c1s, s_c1, method.k_bar, opts);
      result.reports[1] = variant_hybrid(graph, c2s, s_c2, method.k_bar, opts);
      result.reports[2] = variant_hybrid(graph, mxs, s_ctr, method.k_bar, opts);
      result.reports[3] = variant_hybrid(graph, mys, s_ctr, method.k_bar, opts);
      break;
    }
  }

  out.iterations = 0;
  out.converged = true;
  for (const auto& rep : result.reports) {
    out.iterations = std::max(out.iterations, rep.iterations);
    out.converged = out.converged && rep.converged;
  }
  finish(result.reports[0].x_star, result.reports[1].x_star, result.reports[2].x_star,
         result.reports[3].x_star);
  return result;
}

struct ChannelStats {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double median = std::numeric_limits<double>::quiet_NaN();
};

struct MethodAggregate {
  std::size_t n_ok = 0;
  std::array<ChannelStats, 5> channels{};
};

struct TrialRecord {
  std::size_t trial = 0;
  std::vector<NodeRecord> nodes;
  std::size_t n_valid = 0;
  std::vector<MethodOutcome> methods;  // parallel to config.methods
};

struct ExperimentResult {
  ExperimentConfig config;
  HexNetwork network;
  double sigma = 0.0;  // resolved noise standard deviation
  std::vector<TrialRecord> trials;
  std::vector<MethodAggregate> aggregates;  // parallel to config.methods
  std::size_t trials_all_invalid = 0;
  double invalid_estimate_rate = 0.0;
};

/// Recomputes the per-method aggregates from the per-trial records; used after
/// deserialization as well, so exported results round-trip exactly.
inline void aggregate_result(ExperimentResult& result) {
  const std::size_t n_methods = result.config.methods.size();
  result.aggregates.assign(n_methods, {});
  for (std::size_t m = 0; m < n_methods; ++m) {
    std::array<std::vector<double>, 5> errs;
    for (const auto& trial : result.trials) {
      const auto& outcome = trial.methods[m];
      if (!outcome.ok) continue;
      ++result.aggregates[m].n_ok;
      for (std::size_t c = 0; c < 5; ++c)
        if (!std::isnan(outcome.abs_err[c])) errs[c].push_back(outcome.abs_err[c]);
    }
    for (std::size_t c = 0; c < 5; ++c) {
      result.aggregates[m].channels[c].mean = detail::mean_of(errs[c]);
      result.aggregates[m].channels[c].median = detail::median_of(errs[c]);
    }
  }
}

/// Full experiment: per trial, sample noise in node-index order, estimate at
/// every inner node, fuse with every configured method, and book the absolute
/// errors against the truth. Deterministic under (config, seed); trial t uses
/// the derived seed splitmix64(seed + (t+1) * golden_gamma).
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  result.config = config;
  result.network = config.network.build();
  const HexNetwork& net = result.network;
  if (net.inner.empty())
    throw Error(ErrorCode::InvalidConfig, "network has no inner nodes to estimate at");
  const FusionGraph graph = make_inner_graph(net);
  result.sigma = config.noise.resolved_sigma(config.truth.c1);
  const double sigma2 = result.sigma * result.sigma;
  const ConsensusOptions opts{config.tol, 1e-6, config.max_iter, false};

  std::size_t invalid_estimates = 0;
  for (std::size_t t = 0; t < config.trials; ++t) {
    NoiseStream stream(NoiseModel{result.sigma, derive_seed(config.seed, t)});
    std::vector<double> values(net.nodes.size());
    for (std::size_t i = 0; i < net.nodes.size(); ++i)
      values[i] = eval(config.truth, net.nodes[i]) + stream.draw();

    TrialRecord record;
    record.trial = t;
    record.nodes = estimate_all(net, values, sigma2);
    for (const auto& rec : record.nodes) {
      if (rec.estimate.valid())
        ++record.n_valid;
      else
        ++invalid_estimates;
    }
    if (record.n_valid == 0) ++result.trials_all_invalid;

    for (const auto& method : config.methods)
      record.methods.push_back(
          fuse_trial(net, graph, record.nodes, sigma2, method, config.truth, opts).outcome);
    result.trials.push_back(std::move(record));
  }

  result.invalid_estimate_rate =
      static_cast<double>(invalid_estimates) /
      static_cast<double>(config.trials * net.inner.size());
  aggregate_result(result);
  return result;
}

struct RankEntry {
  std::string method;
  double median = 0.0;
  double ci_lo = 0.0;  // bootstrap 90% confidence interval of the median
  double ci_hi = 0.0;
  std::size_t n = 0;
};

struct ChannelRanking {
  std::string channel;
  std::vector<RankEntry> ranking;  // ascending median
};

/// Ranks methods per channel by median absolute error with bootstrap
/// confidence intervals (seeded, hence deterministic).
inline std::vector<ChannelRanking> compare_methods(const ExperimentResult& result,
                                                   std::size_t resamples = 1000) {
  if (result.config.methods.size() < 2)
    throw Error(ErrorCode::NeedTwoMethods, "ranking requires at least two methods");

  std::vector<ChannelRanking> out;
  for (std::size_t c = 0; c < 5; ++c) {
    ChannelRanking ranking;
    ranking.channel = kErrorChannels[c];
    for (std::size_t m = 0; m < result.config.methods.size(); ++m) {
      std::vector<double> errs;
      for (const auto& trial : result.trials)
        if (trial.methods[m].ok && !std::isnan(trial.methods[m].abs_err[c]))
          errs.push_back(trial.methods[m].abs_err[c]);
      RankEntry entry;
      entry.method = result.config.methods[m].name();
      entry.n = errs.size();
      entry.median = detail::median_of(errs);
      if (!errs.empty()) {
        std::mt19937_64 eng(derive_seed(result.config.seed, 0x626f6f74ull + m * 8 + c));
        std::vector<double> medians(resamples);
        std::vector<double> sample(errs.size());
        for (std::size_t b = 0; b < resamples; ++b) {
          for (auto& s : sample) s = errs[eng() % errs.size()];
          medians[b] = detail::median_of(sample);
        }
        std::sort(medians.begin(), medians.end());
        entry.ci_lo = medians[static_cast<std::size_t>(0.05 * (resamples - 1))];
        entry.ci_hi = medians[static_cast<std::size_t>(0.95 * (resamples - 1))];
      }
      ranking.ranking.push_back(entry);
    }
    std::sort(ranking.ranking.begin(), ranking.ranking.end(),
              [](const RankEntry& a, const RankEntry& b) {
                // methods without any successful trial (NaN median) sort last
                if (std::isnan(a.median)) return false;
                if (std::isnan(b.median)) return true;
                return a.median < b.median;
              });
    out.push_back(std::move(ranking));
  }
  return out;
}

}  // namespace hexsense
