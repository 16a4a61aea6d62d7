#pragma once

#include "biassurv/estimators.hpp"
#include "biassurv/km.hpp"
#include "biassurv/model.hpp"
#include "biassurv/simulation.hpp"
#include "biassurv/theta.hpp"

#include "json.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace biassurv {

//! Malformed dataset; carries the offending 1-based data row numbers.
class DatasetError : public std::runtime_error
{
public:
  DatasetError(const std::string& what, std::vector<std::size_t> rows)
    : std::runtime_error(what)
    , rows_(std::move(rows))
  {}
  const std::vector<std::size_t>& rows() const { return rows_; }

private:
  std::vector<std::size_t> rows_;
};

struct DatasetGroup
{
  std::string label;
  SurvivalSample sample;
};

//! Delimited text with a header naming `time` and `status` columns (1 =
//! event, 0 = censored) and an optional `group` column. Comma, tab and
//! semicolon delimiters are detected from the header. Groups keep their
//! order of first appearance; without a group column there is one group
//! labelled "all".
struct Dataset
{
  bool has_group_column{ false };
  std::vector<DatasetGroup> groups;

  const DatasetGroup& group(const std::string& label) const;
};

Dataset read_dataset(std::istream& in);
Dataset read_dataset_file(const std::string& path);

//! "dpi", "nrd" or "fixed=<h>".
BandwidthRule parse_bandwidth_rule(const std::string& s);

//! Shortest-safe decimal: 17 significant digits, round-trips exactly.
std::string format_double(double v);

void write_grid_csv(std::ostream& out, const DensityEstimate& est);
//! Kaplan-Meier knots as t,f_hat,F_hat,S_hat with f_hat the jump size.
void write_step_csv(std::ostream& out, const StepCdf& km);
void write_profile_csv(std::ostream& out, const ThetaFit& fit);

nlohmann::json grid_to_json(const DensityEstimate& est);
nlohmann::json step_to_json(const StepCdf& km);
nlohmann::json profile_to_json(const ThetaFit& fit);

//! Reads a grid CSV written by write_grid_csv back into columns.
struct GridTable
{
  std::vector<double> t, f_hat, F_hat, S_hat;
};
GridTable read_grid_csv(std::istream& in);

//! Experiment configuration documents (JSON). Schema violations raise
//! ConfigError whose message starts with the JSON pointer of the field.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& config);

//! One row per N x method x metric: N,method,metric,mean,sd.
void write_report_csv(std::ostream& out, const ExperimentReport& report);
//! N,t,F_true,<method>_lower,<method>_upper,...
void write_bands_csv(std::ostream& out, const ExperimentReport& report);
nlohmann::json report_to_json(const ExperimentReport& report, const nlohmann::json& meta);
//! Table-1-shaped plain-text summary.
void print_summary(std::ostream& out, const ExperimentReport& report);

} // namespace biassurv
