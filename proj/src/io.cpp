#include "biassurv/io.hpp"
#include "biassurv/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace biassurv {

using nlohmann::json;

// --- datasets --------------------------------------------------------------

const DatasetGroup& Dataset::group(const std::string& label) const
{
  for (const auto& g : groups)
    if (g.label == label)
      return g;
  throw DatasetError("no group named '" + label + "'", {});
}

namespace {

std::string trim(const std::string& s)
{
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r\"");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char delim)
{
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, delim))
    out.push_back(trim(field));
  if (!line.empty() && line.back() == delim)
    out.emplace_back();
  return out;
}

std::string lower(std::string s)
{
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

bool parse_number(const std::string& s, double& out)
{
  if (s.empty())
    return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

} // namespace

Dataset read_dataset(std::istream& in)
{
  std::string header;
  if (!std::getline(in, header))
    throw DatasetError("dataset is empty", {});
  char delim = ',';
  for (char cand : { ',', '\t', ';' })
    if (header.find(cand) != std::string::npos) {
      delim = cand;
      break;
    }
  const auto cols = split(header, delim);
  int time_col = -1, status_col = -1, group_col = -1;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const auto name = lower(cols[i]);
    if (name == "time")
      time_col = static_cast<int>(i);
    else if (name == "status")
      status_col = static_cast<int>(i);
    else if (name == "group")
      group_col = static_cast<int>(i);
  }
  if (time_col < 0 || status_col < 0)
    throw DatasetError("dataset header must name 'time' and 'status' columns", {});

  Dataset ds;
  ds.has_group_column = group_col >= 0;
  std::vector<std::vector<Record>> records;
  std::vector<std::size_t> bad_rows;
  std::ostringstream problems;

  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty())
      continue;
    const auto fields = split(line, delim);
    auto fail = [&](const std::string& why) {
      bad_rows.push_back(row);
      problems << "row " << row << ": " << why << "\n";
    };
    const auto need = static_cast<std::size_t>(std::max({ time_col, status_col, group_col })) + 1;
    if (fields.size() < need) {
      fail("expected at least " + std::to_string(need) + " fields");
      continue;
    }
    double t = 0.0, status = 0.0;
    if (!parse_number(fields[static_cast<std::size_t>(time_col)], t) || !(t > 0.0)) {
      fail("time must be a positive number");
      continue;
    }
    if (!parse_number(fields[static_cast<std::size_t>(status_col)], status) ||
        (status != 0.0 && status != 1.0)) {
      fail("status must be 0 or 1");
      continue;
    }
    const std::string label = group_col >= 0 ? fields[static_cast<std::size_t>(group_col)] : "all";
    auto it = std::find_if(ds.groups.begin(), ds.groups.end(),
                           [&](const auto& g) { return g.label == label; });
    std::size_t gi = static_cast<std::size_t>(it - ds.groups.begin());
    if (it == ds.groups.end()) {
      ds.groups.push_back({ label, {} });
      records.emplace_back();
    }
    records[gi].push_back({ t, status == 1.0 });
  }
  if (!bad_rows.empty())
    throw DatasetError("unparseable dataset rows:\n" + problems.str(), std::move(bad_rows));
  if (ds.groups.empty())
    throw DatasetError("dataset has no data rows", {});
  for (std::size_t g = 0; g < ds.groups.size(); ++g) {
    ds.groups[g].sample = SurvivalSample(std::move(records[g]));
    if (ds.groups[g].sample.uncensored_count() == 0)
      throw DatasetError("group '" + ds.groups[g].label + "' has no uncensored record", {});
  }
  return ds;
}

Dataset read_dataset_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw DatasetError("cannot open dataset '" + path + "'", {});
  return read_dataset(in);
}

// --- grids and profiles ----------------------------------------------------

std::string format_double(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_grid_csv(std::ostream& out, const DensityEstimate& est)
{
  out << "t,f_hat,F_hat,S_hat\n";
  for (std::size_t i = 0; i < est.grid.size(); ++i)
    out << format_double(est.grid[i]) << ',' << format_double(est.f_hat[i]) << ','
        << format_double(est.F_hat[i]) << ',' << format_double(1.0 - est.F_hat[i]) << '\n';
}

void write_step_csv(std::ostream& out, const StepCdf& km)
{
  out << "t,f_hat,F_hat,S_hat\n";
  double F = 0.0;
  for (std::size_t i = 0; i < km.knots.size(); ++i) {
    F += km.jumps[i];
    const double Fc = std::clamp(F, 0.0, 1.0);
    out << format_double(km.knots[i]) << ',' << format_double(km.jumps[i]) << ','
        << format_double(Fc) << ',' << format_double(1.0 - Fc) << '\n';
  }
}

void write_profile_csv(std::ostream& out, const ThetaFit& fit)
{
  out << "theta,objective\n";
  for (const auto& [theta, value] : fit.profile)
    out << format_double(theta) << ',' << format_double(value) << '\n';
}

json grid_to_json(const DensityEstimate& est)
{
  json j;
  j["t"] = est.grid.points();
  j["f_hat"] = est.f_hat;
  j["F_hat"] = est.F_hat;
  j["S_hat"] = est.survival();
  return j;
}

json step_to_json(const StepCdf& km)
{
  std::vector<double> F(km.knots.size()), S(km.knots.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < km.knots.size(); ++i) {
    acc += km.jumps[i];
    F[i] = std::clamp(acc, 0.0, 1.0);
    S[i] = 1.0 - F[i];
  }
  return { { "t", km.knots }, { "f_hat", km.jumps }, { "F_hat", F }, { "S_hat", S } };
}

json profile_to_json(const ThetaFit& fit)
{
  json rows = json::array();
  for (const auto& [theta, value] : fit.profile)
    rows.push_back({ { "theta", theta }, { "objective", value } });
  return { { "kind", fit.kind() },     { "theta_hat", fit.theta_hat },
           { "objective_at_hat", fit.objective_at_hat },
           { "c", fit.c },             { "alpha", fit.alpha },
           { "at_boundary", fit.at_boundary }, { "profile", rows } };
}

GridTable read_grid_csv(std::istream& in)
{
  GridTable g;
  std::string line;
  if (!std::getline(in, line) || trim(line) != "t,f_hat,F_hat,S_hat")
    throw DatasetError("grid file must start with the header t,f_hat,F_hat,S_hat", {});
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty())
      continue;
    const auto f = split(line, ',');
    double v[4];
    if (f.size() != 4 || !parse_number(f[0], v[0]) || !parse_number(f[1], v[1]) ||
        !parse_number(f[2], v[2]) || !parse_number(f[3], v[3]))
      throw DatasetError("malformed grid row " + std::to_string(row), { row });
    g.t.push_back(v[0]);
    g.f_hat.push_back(v[1]);
    g.F_hat.push_back(v[2]);
    g.S_hat.push_back(v[3]);
  }
  return g;
}

// --- experiment configuration ----------------------------------------------

namespace {

[[noreturn]] void config_fail(const std::string& path, const std::string& why)
{
  throw ConfigError(path + ": " + why);
}

void reject_unknown(const json& obj, const std::string& path, std::set<std::string> allowed)
{
  if (!obj.is_object())
    config_fail(path.empty() ? "/" : path, "expected an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      config_fail(path + "/" + key, "unknown field");
}

double get_number(const json& obj, const std::string& key, const std::string& path, double def)
{
  if (!obj.contains(key))
    return def;
  const auto& v = obj.at(key);
  if (!v.is_number())
    config_fail(path + "/" + key, "expected a number");
  return v.get<double>();
}

std::size_t get_count(const json& obj, const std::string& key, const std::string& path, std::size_t def)
{
  if (!obj.contains(key))
    return def;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    config_fail(path + "/" + key, "expected a nonnegative integer");
  return v.get<std::size_t>();
}

std::string get_string(const json& obj, const std::string& key, const std::string& path, const std::string& def)
{
  if (!obj.contains(key))
    return def;
  const auto& v = obj.at(key);
  if (!v.is_string())
    config_fail(path + "/" + key, "expected a string");
  return v.get<std::string>();
}

std::pair<double, double> get_pair(const json& obj, const std::string& key, const std::string& path,
                                   std::pair<double, double> def)
{
  if (!obj.contains(key))
    return def;
  const auto& v = obj.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    config_fail(path + "/" + key, "expected a two-element numeric array");
  return { v[0].get<double>(), v[1].get<double>() };
}

template<class Fn>
auto wrap(const std::string& path, Fn&& fn)
{
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    config_fail(path, e.what());
  }
}

} // namespace

BandwidthRule parse_bandwidth_rule(const std::string& s)
{
  if (s == "dpi")
    return BandwidthRule::dpi();
  if (s == "nrd")
    return BandwidthRule::nrd();
  if (s.rfind("fixed=", 0) == 0) {
    double h = 0.0;
    if (parse_number(s.substr(6), h) && h > 0.0)
      return BandwidthRule::fixed(h);
  }
  throw DomainError("bandwidth must be dpi, nrd or fixed=<h> with h > 0, got '" + s + "'");
}

ExperimentConfig parse_experiment_config(const json& doc)
{
  reject_unknown(doc, "", { "experiment", "truth", "theta_true", "selection", "censoring",
                            "population_sizes", "replications", "methods", "seed", "threads",
                            "estimation", "bands" });
  ExperimentConfig cfg;

  const auto kind = get_string(doc, "experiment", "", "convergence");
  if (kind == "convergence")
    cfg.kind = ExperimentKind::convergence;
  else if (kind == "bands")
    cfg.kind = ExperimentKind::bands;
  else
    config_fail("/experiment", "expected \"convergence\" or \"bands\"");

  if (doc.contains("truth")) {
    const auto& t = doc["truth"];
    reject_unknown(t, "/truth", { "shape", "rate" });
    cfg.truth = wrap("/truth", [&] {
      return TruthModel(get_number(t, "shape", "/truth", 2.0), get_number(t, "rate", "/truth", 1.0));
    });
  }
  cfg.theta_true = get_number(doc, "theta_true", "", cfg.theta_true);

  if (doc.contains("selection")) {
    const auto& s = doc["selection"];
    reject_unknown(s, "/selection", { "cap", "floor", "theta_min", "theta_max" });
    cfg.family = wrap("/selection", [&] {
      return SelectionFamily({ get_number(s, "theta_min", "/selection", 0.0),
                               get_number(s, "theta_max", "/selection", 3.0) },
                             get_number(s, "cap", "/selection", 3.0),
                             get_number(s, "floor", "/selection", 1e-6));
    });
  }
  cfg.fit.family = cfg.family;

  if (doc.contains("censoring")) {
    const auto& c = doc["censoring"];
    reject_unknown(c, "/censoring", { "fraction", "mechanism" });
    cfg.censor_fraction = get_number(c, "fraction", "/censoring", cfg.censor_fraction);
    cfg.censoring = wrap("/censoring/mechanism", [&] {
      return censoring_from_string(get_string(c, "mechanism", "/censoring", "calibrated_independent"));
    });
  }

  if (doc.contains("population_sizes")) {
    const auto& v = doc["population_sizes"];
    if (!v.is_array() || v.empty())
      config_fail("/population_sizes", "expected a nonempty array of positive integers");
    cfg.population_sizes.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer() || v[i].get<long long>() <= 0)
        config_fail("/population_sizes/" + std::to_string(i), "expected a positive integer");
      cfg.population_sizes.push_back(v[i].get<std::size_t>());
    }
  }
  cfg.replications = get_count(doc, "replications", "", cfg.replications);

  if (doc.contains("methods")) {
    const auto& v = doc["methods"];
    if (!v.is_array() || v.empty())
      config_fail("/methods", "expected a nonempty array of method names");
    cfg.methods.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string p = "/methods/" + std::to_string(i);
      if (!v[i].is_string())
        config_fail(p, "expected a string");
      cfg.methods.push_back(wrap(p, [&] { return sim_method_from_string(v[i].get<std::string>()); }));
    }
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned())
      config_fail("/seed", "expected a nonnegative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  cfg.threads = get_count(doc, "threads", "", cfg.threads);

  if (doc.contains("estimation")) {
    const auto& e = doc["estimation"];
    const std::string p = "/estimation";
    reject_unknown(e, p, { "objective", "c", "cv", "c_range", "c_candidates", "theta_search",
                           "scan_points", "bandwidth", "grid_points" });
    const auto obj = get_string(e, "objective", p, "pseudo");
    if (obj == "pseudo")
      cfg.objective = Objective::pseudo;
    else if (obj == "penalized")
      cfg.objective = Objective::penalized;
    else
      config_fail(p + "/objective", "expected \"pseudo\" or \"penalized\"");
    cfg.c = get_number(e, "c", p, 0.0);
    const auto cv = get_string(e, "cv", p, "none");
    if (cv != "none")
      cfg.c_criterion = wrap(p + "/cv", [&] { return criterion_from_string(cv); });
    std::tie(cfg.c_lo, cfg.c_hi) = get_pair(e, "c_range", p, { cfg.c_lo, cfg.c_hi });
    if (!(cfg.c_lo > 0.0 && cfg.c_lo <= cfg.c_hi))
      config_fail(p + "/c_range", "expected 0 < lo <= hi");
    cfg.c_candidates = get_count(e, "c_candidates", p, cfg.c_candidates);
    const auto [lo, hi] = get_pair(e, "theta_search", p, { cfg.fit.search.lo, cfg.fit.search.hi });
    cfg.fit.search = { lo, hi };
    cfg.fit.scan_points = get_count(e, "scan_points", p, cfg.fit.scan_points);
    cfg.fit.rule = wrap(p + "/bandwidth", [&] {
      return parse_bandwidth_rule(get_string(e, "bandwidth", p, "dpi"));
    });
    cfg.fit.grid_points = get_count(e, "grid_points", p, cfg.fit.grid_points);
    if (cfg.fit.grid_points < 2)
      config_fail(p + "/grid_points", "expected at least 2");
  }
  if (!cfg.family.range().contains(cfg.fit.search.lo) ||
      !cfg.family.range().contains(cfg.fit.search.hi) || cfg.fit.search.lo > cfg.fit.search.hi)
    config_fail("/estimation/theta_search", "must be a subinterval of the selection theta range");

  if (doc.contains("bands")) {
    const auto& b = doc["bands"];
    reject_unknown(b, "/bands", { "grid_points", "upper_quantile", "keep_curves" });
    cfg.band_points = get_count(b, "grid_points", "/bands", cfg.band_points);
    cfg.band_upper_quantile = get_number(b, "upper_quantile", "/bands", cfg.band_upper_quantile);
    if (!(cfg.band_upper_quantile > 0.0 && cfg.band_upper_quantile < 1.0))
      config_fail("/bands/upper_quantile", "expected a value in (0, 1)");
    if (b.contains("keep_curves")) {
      if (!b["keep_curves"].is_boolean())
        config_fail("/bands/keep_curves", "expected a boolean");
      cfg.keep_curves = b["keep_curves"].get<bool>();
    }
  }

  if (cfg.replications < 1)
    config_fail("/replications", "must be at least 1");
  for (std::size_t i = 0; i < cfg.population_sizes.size(); ++i)
    if (cfg.population_sizes[i] == 0)
      config_fail("/population_sizes/" + std::to_string(i), "must be positive");
  if (!(cfg.censor_fraction >= 0.0 && cfg.censor_fraction < 1.0))
    config_fail("/censoring/fraction", "must lie in [0, 1)");
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    config_fail("/", e.what());
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("/: invalid JSON: ") + e.what());
  }
  return parse_experiment_config(doc);
}

json config_to_json(const ExperimentConfig& c)
{
  json methods = json::array();
  for (auto m : c.methods)
    methods.push_back(to_string(m));
  json est = {
    { "objective", to_string(c.objective) },
    { "c", c.c },
    { "cv", c.c_criterion ? to_string(*c.c_criterion) : "none" },
    { "c_range", { c.c_lo, c.c_hi } },
    { "c_candidates", c.c_candidates },
    { "theta_search", { c.fit.search.lo, c.fit.search.hi } },
    { "scan_points", c.fit.scan_points },
    { "bandwidth", c.fit.rule.str() },
    { "grid_points", c.fit.grid_points },
  };
  return {
    { "experiment", c.kind == ExperimentKind::bands ? "bands" : "convergence" },
    { "truth", { { "shape", c.truth.shape() }, { "rate", c.truth.rate() } } },
    { "theta_true", c.theta_true },
    { "selection",
      { { "cap", c.family.cap() },
        { "floor", c.family.floor() },
        { "theta_min", c.family.range().lo },
        { "theta_max", c.family.range().hi } } },
    { "censoring", { { "fraction", c.censor_fraction }, { "mechanism", to_string(c.censoring) } } },
    { "population_sizes", c.population_sizes },
    { "replications", c.replications },
    { "methods", methods },
    { "seed", c.seed },
    { "estimation", est },
    { "bands",
      { { "grid_points", c.band_points },
        { "upper_quantile", c.band_upper_quantile },
        { "keep_curves", c.keep_curves } } },
  };
}

// --- experiment reports ----------------------------------------------------

void write_report_csv(std::ostream& out, const ExperimentReport& report)
{
  out << "N,method,metric,mean,sd\n";
  for (const auto& r : report.rows) {
    const std::pair<const char*, const MetricSummary*> metrics[] = {
      { "L1", &r.l1 }, { "L2", &r.l2 }, { "MSE", &r.mse }
    };
    for (const auto& [name, m] : metrics)
      out << r.N << ',' << to_string(r.method) << ',' << name << ',' << format_double(m->mean)
          << ',' << format_double(m->sd) << '\n';
  }
}

void write_bands_csv(std::ostream& out, const ExperimentReport& report)
{
  out << "N,t,F_true";
  for (auto m : report.config.methods)
    out << ',' << to_string(m) << "_lower," << to_string(m) << "_upper";
  out << '\n';
  for (const auto& set : report.bands) {
    for (std::size_t g = 0; g < set.grid.size(); ++g) {
      out << set.N << ',' << format_double(set.grid[g]) << ',' << format_double(set.truth[g]);
      for (auto m : report.config.methods) {
        const auto it = std::find_if(set.bands.begin(), set.bands.end(),
                                     [&](const Band& b) { return b.method == m; });
        if (it == set.bands.end())
          out << ",,";
        else
          out << ',' << format_double(it->lower[g]) << ',' << format_double(it->upper[g]);
      }
      out << '\n';
    }
  }
}

json report_to_json(const ExperimentReport& report, const json& meta)
{
  json rows = json::array();
  for (const auto& r : report.rows) {
    auto summary = [](const MetricSummary& m) { return json{ { "mean", m.mean }, { "sd", m.sd } }; };
    json row = { { "N", r.N },
                 { "method", to_string(r.method) },
                 { "successes", r.successes },
                 { "failures", r.failures },
                 { "L1", summary(r.l1) },
                 { "L2", summary(r.l2) },
                 { "MSE", summary(r.mse) } };
    if (r.method == SimMethod::wke || r.method == SimMethod::tbe)
      row["theta_hat"] = summary(r.theta);
    rows.push_back(row);
  }
  json bands = json::array();
  for (const auto& set : report.bands) {
    json per = json::object();
    for (const auto& b : set.bands)
      per[to_string(b.method)] = { { "lower", b.lower }, { "upper", b.upper } };
    bands.push_back({ { "N", set.N }, { "t", set.grid }, { "F_true", set.truth }, { "bands", per } });
  }
  json m = meta;
  m["config"] = config_to_json(report.config);
  return { { "meta", m }, { "rows", rows }, { "bands", bands } };
}

void print_summary(std::ostream& out, const ExperimentReport& report)
{
  out << std::left << std::setw(8) << "N" << std::setw(8) << "method" << std::right
      << std::setw(10) << "L1 mean" << std::setw(9) << "sd" << std::setw(10) << "L2 mean"
      << std::setw(9) << "sd" << std::setw(10) << "MSE mean" << std::setw(9) << "sd"
      << std::setw(8) << "fail" << '\n';
  out << std::fixed << std::setprecision(3);
  for (const auto& r : report.rows)
    out << std::left << std::setw(8) << r.N << std::setw(8) << to_string(r.method) << std::right
        << std::setw(10) << r.l1.mean << std::setw(9) << r.l1.sd << std::setw(10) << r.l2.mean
        << std::setw(9) << r.l2.sd << std::setw(10) << r.mse.mean << std::setw(9) << r.mse.sd
        << std::setw(8) << r.failures << '\n';
  out.unsetf(std::ios::floatfield);
}

} // namespace biassurv
