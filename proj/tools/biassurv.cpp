#include "biassurv/errors.hpp"
#include "biassurv/estimators.hpp"
#include "biassurv/io.hpp"
#include "biassurv/km.hpp"
#include "biassurv/simulation.hpp"
#include "biassurv/theta.hpp"
#include "biassurv/tuning.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifndef BIASSURV_VERSION
#define BIASSURV_VERSION "0.0.0"
#endif

using nlohmann::json;
using namespace biassurv;

namespace {

enum ExitCode
{
  exit_ok = 0,
  exit_input = 2,
  exit_estimation = 3
};

struct EstimateOptions
{
  std::string dataset;
  std::string method{ "wke" };
  std::string theta{ "auto" };
  std::string objective{ "auto" };
  std::string cv{ "none" };
  std::string c{ "auto" };
  std::string bandwidth{ "dpi" };
  std::size_t grid{ 512 };
  std::string group{ "all" };
  std::string out{ "estimate" };
  std::string format{ "csv" };
  std::uint64_t seed{ 0 };
  std::string cap{ "auto" };
  double theta_min{ 0.0 };
  double theta_max{ 2.0 };
  std::size_t scan_points{ 61 };
  double c_lo{ 1.0 };
  double c_hi{ 20.0 };
  std::size_t c_count{ 20 };
  std::size_t threads{ 1 };
  bool full_cv{ false };
};

struct ProfileOptions
{
  std::string dataset;
  std::string method{ "wke" };
  std::string objective{ "pseudo" };
  double c{ 0.0 };
  std::string bandwidth{ "dpi" };
  std::size_t grid{ 512 };
  std::string group{ "all" };
  std::string out{ "profile" };
  std::string format{ "csv" };
  std::string cap{ "auto" };
  double theta_min{ 0.0 };
  double theta_max{ 2.0 };
  std::size_t points{ 61 };
};

struct SimulateOptions
{
  std::string config;
  std::string out{ "report" };
  std::string format{ "csv" };
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> seed;
  bool quiet{ false };
};

struct SynthOptions
{
  std::string out{ "synthetic_marrow.csv" };
  std::uint64_t seed{ 1 };
};

std::ofstream open_output(const std::string& path)
{
  std::ofstream f(path, std::ios::binary);
  if (!f)
    throw ConfigError("cannot open '" + path + "' for writing");
  return f;
}

std::string file_label(const std::string& label)
{
  std::string s;
  for (char ch : label)
    s += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_') ? ch : '_';
  return s;
}

std::vector<const DatasetGroup*> pick_groups(const Dataset& data, const std::string& label)
{
  std::vector<const DatasetGroup*> out;
  if (label == "all" && !(data.groups.size() == 1 && data.groups[0].label == "all")) {
    for (const auto& g : data.groups)
      out.push_back(&g);
    return out;
  }
  out.push_back(&data.group(label));
  return out;
}

double parse_number(const std::string& flag, const std::string& s)
{
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || !std::isfinite(v))
    throw ConfigError(flag + ": expected a number, got '" + s + "'");
  return v;
}

SelectionFamily family_for(const std::string& cap, const SurvivalSample& sample, double theta_max)
{
  double a = 0.0;
  if (cap == "auto") {
    for (const auto& r : sample.records())
      a = std::max(a, r.time);
  } else {
    a = parse_number("--cap", cap);
    if (!(a > 0.0))
      throw ConfigError("--cap must be positive");
  }
  return SelectionFamily(ThetaRange{ 0.0, std::max(3.0, theta_max) }, a);
}

bool uses_theta(Method m)
{
  return m == Method::wke || m == Method::tbe;
}

json flags_json(const EstimateOptions& o)
{
  return { { "method", o.method },         { "theta", o.theta },       { "objective", o.objective },
           { "cv", o.cv },                 { "c", o.c },               { "bandwidth", o.bandwidth },
           { "grid", o.grid },             { "group", o.group },       { "format", o.format },
           { "cap", o.cap },               { "theta_min", o.theta_min }, { "theta_max", o.theta_max },
           { "scan_points", o.scan_points }, { "c_range", { o.c_lo, o.c_hi } },
           { "c_count", o.c_count },       { "full_cv", o.full_cv } };
}

json meta_json(std::uint64_t seed, const json& flags)
{
  return { { "version", BIASSURV_VERSION }, { "seed", seed }, { "flags", flags } };
}

struct GroupResult
{
  std::string label;
  std::string method;
  std::size_t n{ 0 };
  std::size_t uncensored{ 0 };
  double cap{ 0.0 };
  std::optional<double> theta;
  std::string theta_source{ "none" };
  double kappa_hat{ 1.0 };
  double h{ 0.0 };
  std::optional<double> c;
  std::string objective{ "none" };
  bool at_boundary{ false };
  std::optional<CvReport> cv;
  std::optional<DensityEstimate> est;
  std::optional<StepCdf> km;
};

GroupResult estimate_group(const DatasetGroup& group, const EstimateOptions& o)
{
  GroupResult r;
  r.label = group.label;
  r.method = o.method;
  r.n = group.sample.size();
  r.uncensored = group.sample.uncensored_count();

  if (o.method == "km") {
    r.km = km_cdf(group.sample);
    return r;
  }

  const Method method = method_from_string(o.method);
  FitConfig fit;
  fit.family = family_for(o.cap, group.sample, o.theta_max);
  r.cap = fit.family.cap();
  fit.rule = parse_bandwidth_rule(o.bandwidth);
  fit.grid_points = o.grid;
  fit.search = ThetaRange{ o.theta_min, o.theta_max };
  fit.scan_points = o.scan_points;
  fit.grid = fit.grid_for(group.sample);

  double theta = 0.0;
  if (method == Method::jones) {
    theta = 1.0;
    r.theta = 1.0;
    r.theta_source = "fixed";
  } else if (uses_theta(method)) {
    if (o.theta.rfind("fixed=", 0) == 0) {
      theta = parse_number("--theta", o.theta.substr(6));
      r.theta = theta;
      r.theta_source = "fixed";
    } else {
      Objective objective = Objective::pseudo;
      double c = 0.0;
      if (o.objective == "penalized" || o.cv != "none" || o.c != "auto")
        objective = Objective::penalized;
      if (o.objective == "pseudo" && objective == Objective::penalized)
        throw ConfigError("--objective pseudo cannot be combined with --cv or a numeric --c");

      if (objective == Objective::penalized) {
        if (o.c != "auto") {
          c = parse_number("--c", o.c);
          if (!(c > 0.0))
            throw ConfigError("--c must be positive");
        } else {
          CvConfig cvc;
          cvc.method = method;
          cvc.fit = fit;
          cvc.fast = !o.full_cv;
          cvc.threads = o.threads;
          r.cv = select_c(group.sample, criterion_from_string(o.cv == "none" ? "cv3" : o.cv), cvc,
                          o.c_lo, o.c_hi, o.c_count);
          c = r.cv->chosen_c;
        }
        r.c = c;
      }
      const ThetaFit tf = estimate_theta(group.sample, method, objective, c, fit);
      theta = tf.theta_hat;
      r.theta = theta;
      r.theta_source = "auto";
      r.objective = to_string(objective);
      r.at_boundary = tf.at_boundary;
    }
  }

  r.est = estimate(method, group.sample, theta, fit.family, fit.rule, *fit.grid);
  r.kappa_hat = r.est->kappa_hat;
  r.h = r.est->h;
  return r;
}

json group_json(const GroupResult& r)
{
  json j = { { "label", r.label },
             { "method", r.method },
             { "n", r.n },
             { "uncensored", r.uncensored },
             { "theta_source", r.theta_source },
             { "objective", r.objective },
             { "at_boundary", r.at_boundary } };
  j["theta_hat"] = r.theta ? json(*r.theta) : json(nullptr);
  j["c"] = r.c ? json(*r.c) : json(nullptr);
  if (r.est) {
    j["cap"] = r.cap;
    j["kappa_hat"] = r.kappa_hat;
    j["h"] = r.h;
    j["grid"] = grid_to_json(*r.est);
  } else {
    j["grid"] = step_to_json(*r.km);
  }
  if (r.cv) {
    json cands = json::array();
    for (const auto& cand : r.cv->candidates) {
      json cj = { { "c", cand.c }, { "ok", cand.ok } };
      if (cand.ok) {
        cj["score"] = cand.score;
        cj["theta_hat"] = cand.theta_hat;
        cj["kappa_hat"] = cand.kappa_hat;
      } else {
        cj["error"] = cand.error;
      }
      cands.push_back(cj);
    }
    j["cv"] = { { "criterion", to_string(r.cv->criterion) },
                { "maximized", r.cv->maximized },
                { "chosen_c", r.cv->chosen_c },
                { "candidates", cands } };
  }
  return j;
}

std::string opt_str(const std::optional<double>& v)
{
  return v ? format_double(*v) : "";
}

void write_summary_csv(std::ostream& out, const std::vector<GroupResult>& results)
{
  out << "group,method,n,uncensored,theta_hat,theta_source,objective,c,kappa_hat,h,at_boundary\n";
  for (const auto& r : results) {
    out << r.label << ',' << r.method << ',' << r.n << ',' << r.uncensored << ','
        << opt_str(r.theta) << ',' << r.theta_source << ',' << r.objective << ','
        << opt_str(r.c) << ',' << (r.est ? format_double(r.kappa_hat) : "") << ','
        << (r.est ? format_double(r.h) : "") << ',' << (r.at_boundary ? 1 : 0) << '\n';
  }
}

void print_results(const std::vector<GroupResult>& results)
{
  for (const auto& r : results) {
    std::printf("%-12s %-6s n=%-5zu events=%-5zu", r.label.c_str(), r.method.c_str(), r.n,
                r.uncensored);
    if (r.theta)
      std::printf(" theta=%.4f (%s)", *r.theta, r.theta_source.c_str());
    if (r.c)
      std::printf(" c=%.4g", *r.c);
    if (r.est)
      std::printf(" kappa=%.4f h=%.4g", r.kappa_hat, r.h);
    if (r.at_boundary)
      std::printf(" [boundary]");
    std::printf("\n");
  }
}

int cmd_estimate(const EstimateOptions& o)
{
  const Dataset data = read_dataset_file(o.dataset);
  if (o.method != "km")
    method_from_string(o.method);
  if (o.cv != "none")
    criterion_from_string(o.cv);
  if (o.theta != "auto" && o.theta.rfind("fixed=", 0) != 0)
    throw ConfigError("--theta must be 'auto' or 'fixed=<value>'");
  parse_bandwidth_rule(o.bandwidth);

  std::vector<GroupResult> results;
  for (const DatasetGroup* g : pick_groups(data, o.group))
    results.push_back(estimate_group(*g, o));

  if (o.format == "json") {
    json groups = json::array();
    for (const auto& r : results)
      groups.push_back(group_json(r));
    json doc = { { "meta", meta_json(o.seed, flags_json(o)) }, { "groups", groups } };
    auto f = open_output(o.out + ".json");
    f << doc.dump(2) << '\n';
  } else {
    for (const auto& r : results) {
      auto f = open_output(o.out + "_" + file_label(r.label) + ".csv");
      if (r.est)
        write_grid_csv(f, *r.est);
      else
        write_step_csv(f, *r.km);
    }
    auto f = open_output(o.out + "_summary.csv");
    write_summary_csv(f, results);
  }
  print_results(results);
  return exit_ok;
}

int cmd_theta_profile(const ProfileOptions& o)
{
  const Dataset data = read_dataset_file(o.dataset);
  const Method method = method_from_string(o.method);
  if (!uses_theta(method))
    throw ConfigError("--method must be wke or tbe for a theta profile");
  Objective objective = Objective::pseudo;
  if (o.objective == "penalized") {
    objective = Objective::penalized;
    if (!(o.c > 0.0))
      throw ConfigError("--objective penalized needs a positive --c");
  } else if (o.objective != "pseudo") {
    throw ConfigError("--objective must be pseudo or penalized");
  }
  if (o.points < 1)
    throw ConfigError("--points must be at least 1");
  if (!(o.theta_min <= o.theta_max))
    throw ConfigError("--theta-min must not exceed --theta-max");

  json flags = { { "method", o.method },   { "objective", o.objective }, { "c", o.c },
                 { "bandwidth", o.bandwidth }, { "grid", o.grid },     { "group", o.group },
                 { "cap", o.cap },         { "theta_min", o.theta_min }, { "theta_max", o.theta_max },
                 { "points", o.points } };
  json groups = json::array();
  for (const DatasetGroup* g : pick_groups(data, o.group)) {
    FitConfig fit;
    fit.family = family_for(o.cap, g->sample, o.theta_max);
    fit.rule = parse_bandwidth_rule(o.bandwidth);
    fit.grid_points = o.grid;
    // a single-point profile sits at --theta-min
    fit.search = ThetaRange{ o.theta_min, o.points == 1 ? o.theta_min : o.theta_max };
    fit.scan_points = o.points;
    const ThetaFit tf = estimate_theta(g->sample, method, objective, o.c, fit);
    std::printf("%-12s %s theta_hat=%.6f objective=%.6f%s\n", g->label.c_str(),
                tf.kind().c_str(), tf.theta_hat, tf.objective_at_hat,
                tf.at_boundary ? " [boundary]" : "");
    if (o.format == "json") {
      json j = profile_to_json(tf);
      j["label"] = g->label;
      groups.push_back(j);
    } else {
      auto f = open_output(o.out + "_" + file_label(g->label) + ".csv");
      write_profile_csv(f, tf);
    }
  }
  if (o.format == "json") {
    auto f = open_output(o.out + ".json");
    f << json{ { "meta", meta_json(0, flags) }, { "groups", groups } }.dump(2) << '\n';
  }
  return exit_ok;
}

int cmd_simulate(const SimulateOptions& o)
{
  ExperimentConfig config = load_experiment_config(o.config);
  if (o.threads)
    config.threads = *o.threads;
  if (o.seed)
    config.seed = *o.seed;
  config.validate();

  const ExperimentReport report = run_experiment(config);
  // thread count never changes results, so it stays out of the meta block
  json cfg = config_to_json(config);
  cfg.erase("threads");
  const json meta = { { "version", BIASSURV_VERSION }, { "seed", config.seed }, { "config", cfg } };

  if (o.format == "csv" || o.format == "both") {
    auto f = open_output(o.out + ".csv");
    write_report_csv(f, report);
    if (!report.bands.empty()) {
      auto b = open_output(o.out + "_bands.csv");
      write_bands_csv(b, report);
    }
  }
  if (o.format == "json" || o.format == "both") {
    auto f = open_output(o.out + ".json");
    f << report_to_json(report, meta).dump(2) << '\n';
  }
  if (!o.quiet)
    print_summary(std::cout, report);
  return exit_ok;
}

struct SynthGroup
{
  const char* label;
  std::size_t n;
  double theta;
  double shape;
  double rate;
  double censor_fraction;
};

int cmd_synth(const SynthOptions& o)
{
  // group sizes of the bone-marrow transplant study; times in years
  const SynthGroup groups[] = {
    { "ALL", 38, 0.45, 1.2, 0.9, 0.35 },
    { "AML-low", 54, 0.89, 1.4, 0.35, 0.45 },
    { "AML-high", 45, 0.89, 1.3, 1.1, 0.25 },
  };
  const double cap = 3.0;
  auto f = open_output(o.out);
  f << "group,time,status\n";
  for (std::size_t k = 0; k < std::size(groups); ++k) {
    const SynthGroup& g = groups[k];
    const TruthModel truth(g.shape, g.rate);
    const SelectionFamily family(ThetaRange{ 0.0, 3.0 }, cap);
    Rng rng = replication_rng(o.seed, k, 0);
    std::vector<double> times;
    while (times.size() < g.n) {
      const auto batch = draw_biased_sample(g.n, truth, family, g.theta, rng);
      for (double t : batch)
        if (times.size() < g.n)
          times.push_back(t);
    }
    const auto plan = CensoringPlan::calibrated(truth, family, g.theta, g.censor_fraction);
    const SurvivalSample sample = apply_censoring(times, plan, rng);
    for (const auto& r : sample.records()) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6g", r.time);
      f << g.label << ',' << buf << ',' << (r.event ? 1 : 0) << '\n';
    }
  }
  std::printf("wrote %s\n", o.out.c_str());
  return exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{ "Density and CDF estimation for biased, right-censored survival data" };
  app.set_version_flag("--version", BIASSURV_VERSION);
  app.require_subcommand(1);

  EstimateOptions eo;
  auto* est = app.add_subcommand("estimate", "Estimate f, F and S per group of a dataset");
  est->add_option("dataset", eo.dataset, "CSV with time,status[,group] columns")->required();
  est->add_option("--method", eo.method, "wke|tbe|jones|naive|km|mp")
    ->check(CLI::IsMember({ "wke", "tbe", "jones", "naive", "km", "mp" }))
    ->capture_default_str();
  est->add_option("--theta", eo.theta, "auto or fixed=<value>")->capture_default_str();
  est->add_option("--objective", eo.objective,
                  "pseudo|penalized; auto picks penalized when --cv or a numeric --c is given")
    ->check(CLI::IsMember({ "auto", "pseudo", "penalized" }))
    ->capture_default_str();
  est->add_option("--cv", eo.cv, "cv1|cv2|cv3|none: criterion choosing c")
    ->check(CLI::IsMember({ "cv1", "cv2", "cv3", "none" }))
    ->capture_default_str();
  est->add_option("--c", eo.c, "penalty constant or auto")->capture_default_str();
  est->add_option("--c-range", [&](const CLI::results_t& v) {
       eo.c_lo = std::stod(v.at(0));
       eo.c_hi = std::stod(v.at(1));
       return true;
     }, "candidate range for c (default 1 20)")
    ->expected(2);
  est->add_option("--c-count", eo.c_count, "number of log-spaced candidates")->capture_default_str();
  est->add_flag("--full-cv", eo.full_cv, "rescan theta in every leave-one-out refit");
  est->add_option("--bandwidth", eo.bandwidth, "dpi|nrd|fixed=<h>")->capture_default_str();
  est->add_option("--grid", eo.grid, "evaluation grid points")->check(CLI::Range(2, 1000000))
    ->capture_default_str();
  est->add_option("--group", eo.group, "group label or all")->capture_default_str();
  est->add_option("--out", eo.out, "output path stem")->capture_default_str();
  est->add_option("--format", eo.format, "csv|json")->check(CLI::IsMember({ "csv", "json" }))
    ->capture_default_str();
  est->add_option("--seed", eo.seed, "recorded in the output metadata")->capture_default_str();
  est->add_option("--cap", eo.cap, "selection cap a, or auto for the largest observed time")
    ->capture_default_str();
  est->add_option("--theta-min", eo.theta_min)->capture_default_str();
  est->add_option("--theta-max", eo.theta_max)->capture_default_str();
  est->add_option("--scan-points", eo.scan_points)->check(CLI::PositiveNumber)->capture_default_str();
  est->add_option("--threads", eo.threads, "threads for leave-one-out refits (0 = all cores)")
    ->capture_default_str();

  ProfileOptions po;
  auto* prof = app.add_subcommand("theta-profile", "Tabulate the theta objective");
  prof->add_option("dataset", po.dataset)->required();
  prof->add_option("--method", po.method, "wke|tbe")->check(CLI::IsMember({ "wke", "tbe" }))
    ->capture_default_str();
  prof->add_option("--objective", po.objective, "pseudo|penalized")->capture_default_str();
  prof->add_option("--c", po.c, "penalty constant for the penalized objective");
  prof->add_option("--bandwidth", po.bandwidth)->capture_default_str();
  prof->add_option("--grid", po.grid)->check(CLI::Range(2, 1000000))->capture_default_str();
  prof->add_option("--group", po.group)->capture_default_str();
  prof->add_option("--out", po.out, "output path stem")->capture_default_str();
  prof->add_option("--format", po.format)->check(CLI::IsMember({ "csv", "json" }))
    ->capture_default_str();
  prof->add_option("--cap", po.cap)->capture_default_str();
  prof->add_option("--theta-min", po.theta_min)->capture_default_str();
  prof->add_option("--theta-max", po.theta_max)->capture_default_str();
  prof->add_option("--points", po.points, "theta scan points; 1 profiles --theta-min alone")->capture_default_str();

  SimulateOptions so;
  auto* sim = app.add_subcommand("simulate", "Run a Monte Carlo experiment from a JSON config");
  sim->add_option("config", so.config)->required();
  sim->add_option("--out", so.out, "output path stem")->capture_default_str();
  sim->add_option("--format", so.format, "csv|json|both")
    ->check(CLI::IsMember({ "csv", "json", "both" }))
    ->capture_default_str();
  sim->add_option("--threads", so.threads, "override the config's thread count");
  sim->add_option("--seed", so.seed, "override the config's seed");
  sim->add_flag("--quiet", so.quiet, "skip the printed summary");

  SynthOptions syo;
  auto* syn = app.add_subcommand("synth", "Write a synthetic three-group transplant-style dataset");
  syn->add_option("--out", syo.out)->capture_default_str();
  syn->add_option("--seed", syo.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_input;
  }

  try {
    if (*est)
      return cmd_estimate(eo);
    if (*prof)
      return cmd_theta_profile(po);
    if (*sim)
      return cmd_simulate(so);
    if (*syn)
      return cmd_synth(syo);
  } catch (const DatasetError& e) {
    std::cerr << "error: " << e.what();
    if (!e.rows().empty()) {
      std::cerr << " (rows";
      for (auto r : e.rows())
        std::cerr << ' ' << r;
      std::cerr << ')';
    }
    std::cerr << '\n';
    return exit_input;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_input;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_input;
  } catch (const EstimationError& e) {
    std::cerr << "estimation error: " << e.what() << '\n';
    return exit_estimation;
  } catch (const std::exception& e) {
    std::cerr << "estimation error: " << e.what() << '\n';
    return exit_estimation;
  }
  return exit_input;
}
