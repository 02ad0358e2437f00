// Command-line harness: tessellation, estimation, sensitivity, spacing
// optimization, fusion, and end-to-end experiments. All file formats are
// documented in the README. Errors exit nonzero with one machine-readable
// JSON line on stderr.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hexsense/hexsense.hpp"

namespace {

using hexsense::Error;
using hexsense::ErrorCode;

hexsense::GaussianParams parse_params(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
  if (vals.size() != 4)
    throw Error(ErrorCode::InvalidConfig, "expected C1,C2,m1,m2 but got '" + text + "'");
  return {vals[0], vals[1], vals[2], vals[3]};
}

hexsense::VarianceChannel parse_channel(const std::string& text) {
  if (text == "c1") return hexsense::VarianceChannel::C1;
  if (text == "c2") return hexsense::VarianceChannel::C2;
  if (text == "modm") return hexsense::VarianceChannel::ModM;
  if (text == "angle") return hexsense::VarianceChannel::Angle;
  throw Error(ErrorCode::InvalidConfig, "channel must be one of c1, c2, modm, angle");
}

// "lo:hi:n,lo:hi:n"
std::pair<hexsense::GridSpec, hexsense::GridSpec> parse_sweep(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos)
    throw Error(ErrorCode::InvalidConfig, "sweep spec must be m1lo:m1hi:n,m2lo:m2hi:n");
  auto parse_axis = [](const std::string& part) {
    hexsense::GridSpec g;
    std::stringstream ss(part);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ':')) cells.push_back(cell);
    if (cells.size() != 3)
      throw Error(ErrorCode::InvalidConfig, "sweep axis must be lo:hi:n");
    g.lo = std::stod(cells[0]);
    g.hi = std::stod(cells[1]);
    g.count = std::stoul(cells[2]);
    return g;
  };
  return {parse_axis(text.substr(0, comma)), parse_axis(text.substr(comma + 1))};
}

void write_file(const std::string& path, const std::string& content) {
  hexsense::spit(path, content);
}

int run(int argc, char** argv) {
  CLI::App app{"Distributed Gaussian-field estimation on honeycomb sensor networks"};
  app.require_subcommand(1);

  // --- tessellate ---
  auto* tessellate = app.add_subcommand("tessellate", "Generate a network and write it as JSON");
  std::size_t rings = 1;
  double edge = 1.0;
  std::string preset;
  std::string out_path;
  std::vector<double> origin{0.0, 0.0};
  tessellate->add_option("--rings", rings, "Rings of hexagonal cells around the center");
  tessellate->add_option("--edge", edge, "Edge length l")->required();
  tessellate->add_option("--preset", preset, "Named preset (paper12)");
  tessellate->add_option("--origin", origin, "Center of the patch (x y)")->expected(2);
  tessellate->add_option("--out", out_path, "Output JSON path")->required();
  tessellate->callback([&] {
    hexsense::HexNetwork net;
    if (!preset.empty()) {
      if (preset != "paper12")
        throw Error(ErrorCode::InvalidConfig, "unknown preset '" + preset + "'");
      net = hexsense::preset_paper_network(edge);
    } else {
      net = hexsense::generate_honeycomb(rings, edge, {origin[0], origin[1]});
    }
    write_file(out_path, hexsense::network_to_json(net).dump(2) + "\n");
    std::cout << "nodes=" << net.nodes.size() << " edges=" << net.edges.size()
              << " inner=" << net.inner.size() << "\n";
  });

  // --- estimate ---
  auto* estimate = app.add_subcommand(
      "estimate", "One noisy realization: per-inner-node estimates to CSV");
  std::string net_path, truth_text, est_out;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  estimate->add_option("--net", net_path, "Network JSON")->required();
  estimate->add_option("--truth", truth_text, "True parameters C1,C2,m1,m2")->required();
  estimate->add_option("--sigma", sigma, "Noise standard deviation")->required();
  estimate->add_option("--seed", seed, "RNG seed");
  estimate->add_option("--out", est_out, "Output CSV path")->required();
  estimate->callback([&] {
    const auto net = hexsense::network_from_json(hexsense::load_json(net_path));
    const auto truth = parse_params(truth_text);
    hexsense::NoiseStream stream(hexsense::NoiseModel{sigma, seed});
    std::vector<double> values(net.nodes.size());
    for (std::size_t i = 0; i < net.nodes.size(); ++i)
      values[i] = hexsense::eval(truth, net.nodes[i]) + stream.draw();
    const auto records = hexsense::estimate_all(net, values, sigma * sigma);
    const auto rows = hexsense::estimate_rows(net, records, sigma);
    std::ostringstream os;
    hexsense::write_estimates_csv(os, rows);
    write_file(est_out, os.str());
    std::size_t n_valid = 0;
    for (const auto& r : records) n_valid += r.estimate.valid() ? 1 : 0;
    std::cout << "inner=" << records.size() << " valid=" << n_valid << "\n";
  });

  // --- sensitivity ---
  auto* sensitivity = app.add_subcommand(
      "sensitivity", "Error variances of the four estimated quantities");
  std::string params_text;
  double sens_edge = 1.0, sigma2 = 1e-4;
  bool use_oracle = false, use_closed = false, printed = false;
  std::size_t mc_trials = 0;
  std::uint64_t sens_seed = 0;
  sensitivity->add_option("--params", params_text, "Parameters C1,C2,m1,m2")->required();
  sensitivity->add_option("--edge", sens_edge, "Edge length l")->required();
  sensitivity->add_option("--sigma2", sigma2, "Measurement noise variance")->required();
  sensitivity->add_flag("--oracle", use_oracle, "Numeric (DPhi)^-1 oracle");
  sensitivity->add_flag("--closed-form", use_closed, "Closed-form expressions (default)");
  sensitivity->add_option("--monte-carlo", mc_trials, "Monte Carlo with this many trials");
  sensitivity->add_flag("--printed", printed,
                        "Evaluate the closed forms exactly as printed (see README)");
  sensitivity->add_option("--seed", sens_seed, "Monte Carlo seed");
  sensitivity->callback([&] {
    const auto p = parse_params(params_text);
    hexsense::VarianceSet vs;
    if (use_oracle) {
      vs = hexsense::numeric_oracle_variances(sens_edge, p, sigma2);
    } else if (mc_trials > 0) {
      vs = hexsense::monte_carlo_variances(sens_edge, p, std::sqrt(sigma2), mc_trials, sens_seed);
    } else {
      vs = hexsense::closed_form_variances(
          sens_edge, p, sigma2,
          printed ? hexsense::ClosedFormVariant::AsPrinted
                  : hexsense::ClosedFormVariant::OracleCorrected);
    }
    hexsense::json j;
    j["var_c1"] = hexsense::detail::jnum(vs.var_c1);
    j["var_c2"] = hexsense::detail::jnum(vs.var_c2);
    j["var_modm"] = hexsense::detail::jnum(vs.var_mod_m);
    j["var_angle"] = hexsense::detail::jnum(vs.var_angle);
    j["source"] = use_oracle ? "oracle" : (mc_trials > 0 ? "monte-carlo" : "closed-form");
    if (mc_trials > 0) j["discard_rate"] = vs.discard_rate;
    std::cout << j.dump() << "\n";
  });

  // --- optimize-spacing ---
  auto* optimize = app.add_subcommand("optimize-spacing",
                                      "Edge length minimizing one error variance");
  std::string channel_text = "c2", sweep_text, lopt_out;
  std::string opt_params_text = "1,1,0,0";
  double opt_sigma2 = 1.0;
  optimize->add_option("--channel", channel_text, "c1, c2, modm or angle")->required();
  optimize->add_option("--params", opt_params_text, "Parameters C1,C2,m1,m2");
  optimize->add_option("--sigma2", opt_sigma2, "Noise variance (scales reported S only)");
  optimize->add_option("--sweep", sweep_text, "Center grid m1lo:m1hi:n,m2lo:m2hi:n");
  optimize->add_option("--out", lopt_out, "CSV output for sweeps");
  optimize->callback([&] {
    const auto channel = parse_channel(channel_text);
    const auto p = parse_params(opt_params_text);
    if (!sweep_text.empty()) {
      if (lopt_out.empty())
        throw Error(ErrorCode::InvalidConfig, "--sweep requires --out");
      const auto [gx, gy] = parse_sweep(sweep_text);
      const auto points = hexsense::sweep_lopt_map(channel, gx, gy, p.c2, opt_sigma2);
      std::ostringstream os;
      hexsense::write_sweep_csv(os, points, channel);
      write_file(lopt_out, os.str());
      std::cout << "points=" << points.size() << "\n";
      return;
    }
    const auto res = hexsense::minimize_spacing(channel, p, opt_sigma2);
    hexsense::json j;
    j["channel"] = hexsense::variance_channel_name(channel);
    j["l_opt"] = res.l_opt;
    j["s_at_opt"] = hexsense::detail::jnum(res.s_at_opt);
    j["bracket"] = {res.bracket.first, res.bracket.second};
    j["local_minima"] = hexsense::json::array();
    for (auto [l, s] : res.local_minima)
      j["local_minima"].push_back({{"l", l}, {"s", hexsense::detail::jnum(s)}});
    std::cout << j.dump() << "\n";
  });

  // --- fuse ---
  auto* fuse = app.add_subcommand("fuse", "Fuse an estimates table into one global estimate");
  std::string method_text = "wise", fuse_est_path, fuse_net_path, trace_path;
  double tol = 1e-9;
  std::size_t max_iter = 10000;
  fuse->add_option("--method", method_text,
                   "average, two-channel, wise, recompute, or hybrid:K")->required();
  fuse->add_option("--estimates", fuse_est_path, "Estimates CSV")->required();
  fuse->add_option("--net", fuse_net_path, "Network JSON")->required();
  fuse->add_option("--tol", tol, "Spread tolerance on the fused values");
  fuse->add_option("--max-iter", max_iter, "Iteration cap");
  fuse->add_option("--trace", trace_path, "Write per-step trace CSV here");
  fuse->callback([&] {
    const auto net =
        hexsense::network_from_json(hexsense::load_json(fuse_net_path));
    std::ifstream in(fuse_est_path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + fuse_est_path);
    const auto rows = hexsense::read_estimates_csv(in);
    const auto records = hexsense::records_from_rows(net, rows);
    const double sigma = rows.empty() ? 0.0 : rows.front().sigma;
    const auto graph = hexsense::make_inner_graph(net);
    const auto spec = hexsense::MethodSpec::parse(method_text);
    if (spec.method == hexsense::FusionMethod::Raw)
      throw Error(ErrorCode::InvalidConfig, "raw is not a fusion method");
    hexsense::ConsensusOptions opts{tol, 1e-6, max_iter, !trace_path.empty()};
    const auto fusion = hexsense::fuse_trial(net, graph, records, sigma * sigma, spec,
                                             std::nullopt, opts);
    if (!fusion.outcome.ok)
      throw Error(ErrorCode::AllWeightsZero, "no valid estimate to fuse");
    hexsense::json j;
    j["method"] = spec.name();
    j["c1"] = fusion.outcome.fused->c1;
    j["c2"] = fusion.outcome.fused->c2;
    j["m1"] = fusion.outcome.fused->m1;
    j["m2"] = fusion.outcome.fused->m2;
    j["iterations"] = fusion.outcome.iterations;
    j["converged"] = fusion.outcome.converged;
    std::cout << j.dump() << "\n";
    if (!trace_path.empty()) {
      std::ostringstream os;
      const std::array<const char*, 4> channels{"c1", "c2", "m1", "m2"};
      hexsense::write_trace_csv(os, fusion.reports, channels, net.inner);
      write_file(trace_path, os.str());
    }
  });

  // --- experiment ---
  auto* experiment = app.add_subcommand("experiment", "Run a configured experiment");
  std::string config_path, result_path;
  std::optional<double> noise_frac_override;
  experiment->add_option("--config", config_path, "Experiment config JSON")->required();
  experiment->add_option("--out", result_path, "Result JSON path")->required();
  double frac_holder = -1.0;
  experiment->add_option("--noise-variance-frac", frac_holder,
                         "Override the noise variance fraction from the config");
  experiment->callback([&] {
    auto config =
        hexsense::config_from_json(hexsense::load_json(config_path));
    if (frac_holder >= 0.0) {
      config.noise.sigma.reset();
      config.noise.variance_frac = frac_holder;
    }
    const auto result = hexsense::run_experiment(config);
    write_file(result_path, hexsense::result_to_json(result).dump(2) + "\n");
    if (config.methods.size() >= 2) {
      for (const auto& ranking : hexsense::compare_methods(result)) {
        std::cout << ranking.channel << ":";
        for (const auto& e : ranking.ranking)
          std::cout << " " << e.method << "=" << e.median;
        std::cout << "\n";
      }
    }
    std::cout << "trials=" << result.trials.size()
              << " all_invalid=" << result.trials_all_invalid << "\n";
  });

  CLI11_PARSE(app, argc, argv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    hexsense::json j;
    j["error"] = {{"code", hexsense::error_code_name(e.code())}, {"message", e.what()}};
    std::cerr << j.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    hexsense::json j;
    j["error"] = {{"code", "Unhandled"}, {"message", e.what()}};
    std::cerr << j.dump() << "\n";
    return 1;
  }
}
