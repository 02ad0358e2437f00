#pragma once

#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hexsense/harness.hpp"
#include "hexsense/lattice.hpp"
#include "hexsense/spacing.hpp"

namespace hexsense {

using json = nlohmann::json;

namespace detail {

// JSON has no infinities; nonfinite doubles travel as strings.
inline json jnum(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline double jget(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw Error(ErrorCode::IoError, "expected a number, got " + j.dump());
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// ---- network ----

inline json network_to_json(const HexNetwork& net) {
  json j;
  j["l"] = net.edge;
  j["nodes"] = json::array();
  for (const auto& p : net.nodes) j["nodes"].push_back({p.x, p.y});
  j["edges"] = json::array();
  for (auto [a, b] : net.edges) j["edges"].push_back({a, b});
  j["inner"] = net.inner;
  return j;
}

inline HexNetwork network_from_json(const json& j) {
  HexNetwork net;
  try {
    net.edge = j.at("l").get<double>();
    for (const auto& p : j.at("nodes")) net.nodes.push_back({p.at(0), p.at(1)});
    for (const auto& e : j.at("edges"))
      net.edges.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("bad network json: ") + e.what());
  }
  net.rebuild_topology();
  if (j.contains("inner") && j["inner"].get<std::vector<std::size_t>>() != net.inner)
    throw Error(ErrorCode::IoError, "inner set inconsistent with edges");
  return net;
}

// ---- experiment config ----

inline json config_to_json(const ExperimentConfig& c) {
  json j;
  json net;
  if (!c.network.preset.empty())
    net["preset"] = c.network.preset;
  else
    net["rings"] = c.network.rings;
  net["edge"] = c.network.edge;
  j["network"] = net;
  j["truth"] = {{"c1", c.truth.c1}, {"c2", c.truth.c2}, {"m1", c.truth.m1}, {"m2", c.truth.m2}};
  json noise;
  if (c.noise.sigma)
    noise["sigma"] = *c.noise.sigma;
  else {
    noise["variance_frac"] = c.noise.variance_frac;
    noise["reading"] = c.noise.reading == NoiseReading::PeakValue ? "peak" : "peak-squared";
  }
  j["noise"] = noise;
  j["methods"] = json::array();
  for (const auto& m : c.methods) j["methods"].push_back(m.name());
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["tol"] = c.tol;
  j["max_iter"] = c.max_iter;
  return j;
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    const auto& net = j.at("network");
    if (net.contains("preset")) c.network.preset = net["preset"].get<std::string>();
    if (net.contains("rings")) c.network.rings = net["rings"].get<std::size_t>();
    c.network.edge = net.value("edge", 1.0);
    const auto& t = j.at("truth");
    c.truth = GaussianParams(t.at("c1"), t.at("c2"), t.at("m1"), t.at("m2"));
    if (j.contains("noise")) {
      const auto& n = j["noise"];
      if (n.contains("sigma")) c.noise.sigma = n["sigma"].get<double>();
      if (n.contains("variance_frac")) c.noise.variance_frac = n["variance_frac"].get<double>();
      if (n.contains("reading")) {
        const auto r = n["reading"].get<std::string>();
        if (r == "peak")
          c.noise.reading = NoiseReading::PeakValue;
        else if (r == "peak-squared")
          c.noise.reading = NoiseReading::PeakSquared;
        else
          throw Error(ErrorCode::InvalidConfig, "noise reading must be peak or peak-squared");
      }
    }
    c.methods.clear();
    for (const auto& m : j.at("methods")) c.methods.push_back(MethodSpec::parse(m));
    c.trials = j.value("trials", std::size_t{100});
    c.seed = j.value("seed", std::uint64_t{0});
    c.tol = j.value("tol", 1e-9);
    c.max_iter = j.value("max_iter", std::size_t{10000});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad config json: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- experiment result ----

inline json result_to_json(const ExperimentResult& r) {
  json j;
  j["config"] = config_to_json(r.config);
  j["network"] = network_to_json(r.network);
  j["sigma"] = r.sigma;
  j["trials"] = json::array();
  for (const auto& trial : r.trials) {
    json jt;
    jt["trial"] = trial.trial;
    jt["n_valid"] = trial.n_valid;
    jt["estimates"] = json::array();
    for (std::size_t k = 0; k < trial.nodes.size(); ++k) {
      const auto& rec = trial.nodes[k];
      json je;
      je["node"] = r.network.inner[k];
      je["valid"] = rec.estimate.valid();
      je["failure"] = inversion_failure_name(rec.estimate.failure);
      if (rec.estimate.valid()) {
        const auto& g = *rec.estimate.params_global;
        const auto& l = *rec.estimate.params_local;
        je["c1"] = detail::jnum(g.c1);
        je["c2"] = detail::jnum(g.c2);
        je["m1"] = detail::jnum(g.m1);
        je["m2"] = detail::jnum(g.m2);
        je["m1_local"] = detail::jnum(l.m1);
        je["m2_local"] = detail::jnum(l.m2);
        je["var_c1"] = detail::jnum(rec.var_c1);
        je["var_c2"] = detail::jnum(rec.var_c2);
        je["var_center"] = detail::jnum(rec.var_center);
      }
      jt["estimates"].push_back(je);
    }
    jt["methods"] = json::object();
    for (std::size_t m = 0; m < r.config.methods.size(); ++m) {
      const auto& o = trial.methods[m];
      json jm;
      jm["ok"] = o.ok;
      if (o.fused) {
        jm["c1"] = detail::jnum(o.fused->c1);
        jm["c2"] = detail::jnum(o.fused->c2);
        jm["m1"] = detail::jnum(o.fused->m1);
        jm["m2"] = detail::jnum(o.fused->m2);
      }
      if (o.ok) {
        json errs = json::object();
        for (std::size_t c = 0; c < 5; ++c) errs[kErrorChannels[c]] = detail::jnum(o.abs_err[c]);
        jm["abs_err"] = errs;
        jm["iterations"] = o.iterations;
        jm["converged"] = o.converged;
      }
      jt["methods"][r.config.methods[m].name()] = jm;
    }
    j["trials"].push_back(jt);
  }
  j["aggregates"] = json::object();
  for (std::size_t m = 0; m < r.config.methods.size(); ++m) {
    json ja;
    ja["n_ok"] = r.aggregates[m].n_ok;
    for (std::size_t c = 0; c < 5; ++c) {
      ja[kErrorChannels[c]] = {{"mean", detail::jnum(r.aggregates[m].channels[c].mean)},
                               {"median", detail::jnum(r.aggregates[m].channels[c].median)}};
    }
    j["aggregates"][r.config.methods[m].name()] = ja;
  }
  j["discards"] = {{"trials_all_invalid", r.trials_all_invalid},
                   {"invalid_estimate_rate", r.invalid_estimate_rate}};
  return j;
}

inline ExperimentResult result_from_json(const json& j) {
  ExperimentResult r;
  try {
    r.config = config_from_json(j.at("config"));
    r.network = network_from_json(j.at("network"));
    r.sigma = j.at("sigma").get<double>();
    for (const auto& jt : j.at("trials")) {
      TrialRecord trial;
      trial.trial = jt.at("trial").get<std::size_t>();
      trial.n_valid = jt.at("n_valid").get<std::size_t>();
      for (const auto& je : jt.at("estimates")) {
        NodeRecord rec;
        rec.estimate.node = je.at("node").get<std::size_t>();
        const auto failure = je.at("failure").get<std::string>();
        if (failure == "nonpositive_measurement")
          rec.estimate.failure = InversionFailure::NonPositiveMeasurement;
        else if (failure == "width_degenerate")
          rec.estimate.failure = InversionFailure::WidthDegenerate;
        if (je.at("valid").get<bool>()) {
          rec.estimate.params_global = GaussianParams(
              detail::jget(je.at("c1")), detail::jget(je.at("c2")),
              detail::jget(je.at("m1")), detail::jget(je.at("m2")));
          rec.estimate.params_local = GaussianParams(
              detail::jget(je.at("c1")), detail::jget(je.at("c2")),
              detail::jget(je.at("m1_local")), detail::jget(je.at("m2_local")));
          rec.var_c1 = detail::jget(je.at("var_c1"));
          rec.var_c2 = detail::jget(je.at("var_c2"));
          rec.var_center = detail::jget(je.at("var_center"));
        }
        trial.nodes.push_back(rec);
      }
      for (const auto& spec : r.config.methods) {
        const auto& jm = jt.at("methods").at(spec.name());
        MethodOutcome o;
        o.ok = jm.at("ok").get<bool>();
        if (jm.contains("c1"))
          o.fused = GaussianParams(detail::jget(jm.at("c1")), detail::jget(jm.at("c2")),
                                   detail::jget(jm.at("m1")), detail::jget(jm.at("m2")));
        if (o.ok && jm.contains("abs_err")) {
          for (std::size_t c = 0; c < 5; ++c)
            o.abs_err[c] = detail::jget(jm.at("abs_err").at(kErrorChannels[c]));
          o.iterations = jm.value("iterations", std::size_t{0});
          o.converged = jm.value("converged", true);
        }
        trial.methods.push_back(o);
      }
      r.trials.push_back(std::move(trial));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("bad result json: ") + e.what());
  }
  aggregate_result(r);
  return r;
}

// ---- CSV ----

/// One row of an estimates table; the schema feeding the fuse stage.
struct EstimateRow {
  std::size_t node = 0;
  Vec2 pos;
  bool valid = false;
  std::string failure = "none";
  double c1 = std::numeric_limits<double>::quiet_NaN();
  double c2 = std::numeric_limits<double>::quiet_NaN();
  double m1 = std::numeric_limits<double>::quiet_NaN();
  double m2 = std::numeric_limits<double>::quiet_NaN();
  double m1_local = std::numeric_limits<double>::quiet_NaN();
  double m2_local = std::numeric_limits<double>::quiet_NaN();
  double var_c1 = std::numeric_limits<double>::infinity();
  double var_c2 = std::numeric_limits<double>::infinity();
  double var_center = std::numeric_limits<double>::infinity();
  double sigma = 0.0;
};

inline constexpr const char* kEstimatesHeader =
    "node,pos_x,pos_y,valid,failure,c1,c2,m1,m2,m1_local,m2_local,var_c1,var_c2,var_center,"
    "sigma";

inline std::vector<EstimateRow> estimate_rows(const HexNetwork& net,
                                              std::span<const NodeRecord> records,
                                              double sigma) {
  std::vector<EstimateRow> rows;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& rec = records[k];
    EstimateRow row;
    row.node = net.inner[k];
    row.pos = net.nodes[row.node];
    row.valid = rec.estimate.valid();
    row.failure = inversion_failure_name(rec.estimate.failure);
    if (row.valid) {
      row.c1 = rec.estimate.params_global->c1;
      row.c2 = rec.estimate.params_global->c2;
      row.m1 = rec.estimate.params_global->m1;
      row.m2 = rec.estimate.params_global->m2;
      row.m1_local = rec.estimate.params_local->m1;
      row.m2_local = rec.estimate.params_local->m2;
      row.var_c1 = rec.var_c1;
      row.var_c2 = rec.var_c2;
      row.var_center = rec.var_center;
    }
    row.sigma = sigma;
    rows.push_back(row);
  }
  return rows;
}

inline void write_estimates_csv(std::ostream& os, std::span<const EstimateRow> rows) {
  os << kEstimatesHeader << "\n";
  for (const auto& r : rows) {
    os << r.node << ',' << detail::fmt(r.pos.x) << ',' << detail::fmt(r.pos.y) << ','
       << (r.valid ? 1 : 0) << ',' << r.failure << ',' << detail::fmt(r.c1) << ','
       << detail::fmt(r.c2) << ',' << detail::fmt(r.m1) << ',' << detail::fmt(r.m2) << ','
       << detail::fmt(r.m1_local) << ',' << detail::fmt(r.m2_local) << ','
       << detail::fmt(r.var_c1) << ',' << detail::fmt(r.var_c2) << ','
       << detail::fmt(r.var_center) << ',' << detail::fmt(r.sigma) << "\n";
  }
}

inline std::vector<EstimateRow> read_estimates_csv(std::istream& is) {
  std::vector<EstimateRow> rows;
  std::string line;
  if (!std::getline(is, line) || line != kEstimatesHeader)
    throw Error(ErrorCode::IoError, "estimates csv: unexpected header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 15) throw Error(ErrorCode::IoError, "estimates csv: bad row");
    EstimateRow r;
    r.node = std::stoul(cells[0]);
    r.pos = {std::stod(cells[1]), std::stod(cells[2])};
    r.valid = cells[3] == "1";
    r.failure = cells[4];
    r.c1 = std::stod(cells[5]);
    r.c2 = std::stod(cells[6]);
    r.m1 = std::stod(cells[7]);
    r.m2 = std::stod(cells[8]);
    r.m1_local = std::stod(cells[9]);
    r.m2_local = std::stod(cells[10]);
    r.var_c1 = std::stod(cells[11]);
    r.var_c2 = std::stod(cells[12]);
    r.var_center = std::stod(cells[13]);
    r.sigma = std::stod(cells[14]);
    rows.push_back(r);
  }
  return rows;
}

/// Rebuilds harness NodeRecords from an estimates table, validating that the
/// rows match the network's inner set.
inline std::vector<NodeRecord> records_from_rows(const HexNetwork& net,
                                                 std::span<const EstimateRow> rows) {
  if (rows.size() != net.inner.size())
    throw Error(ErrorCode::IoError, "estimates rows do not match the network inner set");
  std::vector<NodeRecord> records;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& row = rows[k];
    if (row.node != net.inner[k])
      throw Error(ErrorCode::IoError, "estimates rows do not match the network inner set");
    NodeRecord rec;
    rec.estimate.node = row.node;
    if (row.valid) {
      rec.estimate.failure = InversionFailure::None;
      rec.estimate.params_global = GaussianParams(row.c1, row.c2, row.m1, row.m2);
      rec.estimate.params_local = GaussianParams(row.c1, row.c2, row.m1_local, row.m2_local);
      rec.var_c1 = row.var_c1;
      rec.var_c2 = row.var_c2;
      rec.var_center = row.var_center;
    } else {
      rec.estimate.failure = row.failure == "nonpositive_measurement"
                                 ? InversionFailure::NonPositiveMeasurement
                                 : InversionFailure::WidthDegenerate;
    }
    records.push_back(rec);
  }
  return records;
}

/// Trace export: one row per (step, node) per channel.
inline void write_trace_csv(std::ostream& os,
                            std::span<const FusionReport> reports,  // one per channel
                            std::span<const char* const> channel_names,
                            std::span<const std::size_t> node_ids) {
  os << "t,node,channel,x,s\n";
  for (std::size_t c = 0; c < reports.size(); ++c) {
    for (const auto& state : reports[c].trace) {
      for (std::size_t i = 0; i < state.x.size(); ++i) {
        os << state.t << ',' << node_ids[i] << ',' << channel_names[c] << ','
           << detail::fmt(state.x[i]) << ',' << detail::fmt(state.s[i]) << "\n";
      }
    }
  }
}

inline void write_sweep_csv(std::ostream& os, std::span<const SweepPoint> points,
                            VarianceChannel channel) {
  os << "m1,m2,channel,l_opt,s_at_opt\n";
  for (const auto& p : points) {
    os << detail::fmt(p.m1) << ',' << detail::fmt(p.m2) << ','
       << variance_channel_name(channel) << ',' << detail::fmt(p.l_opt) << ','
       << detail::fmt(p.s_at_opt) << "\n";
  }
}

// ---- file helpers ----

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json load_json(const std::string& path) {
  try {
    return json::parse(slurp(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, path + ": " + e.what());
  }
}

inline void spit(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << content;
}

}  // namespace hexsense
