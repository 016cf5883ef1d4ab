#pragma once

#include <string>
#include <vector>

#include "ddw/grid.hpp"

namespace ddw {
namespace scorecard {

/// cos(lat) weights normalized so their mean over rows is 1.
std::vector<double> lat_weights(const GridSpec& spec);

/// Latitude-weighted RMSE for one field pair: sqrt(mean_jk w(j)*(f-o)^2).
double rmse(const float* forecast, const float* verification, const GridSpec& spec,
            const std::vector<double>& weights);

/// Mean weighted squared error (the pre-sqrt quantity); cases aggregate as
/// root of the mean of these.
double weighted_mse(const float* forecast, const float* verification, const GridSpec& spec,
                    const std::vector<double>& weights);

/// Anomaly correlation against a climatology slice. Throws ZeroAnomalyNorm
/// when either anomaly field has zero weighted norm.
double acc(const float* forecast, const float* verification, const float* climatology,
           const GridSpec& spec, const std::vector<double>& weights);

/// Per day-of-year mean over training years, [day][var][lat][lon]. Day 366
/// of a verification leap year maps to day 365's value when the climatology
/// was built without one.
struct Climatology {
    GridSpec spec;
    VariableCatalog catalog;
    int first_year = 0;
    int last_year = 0;
    int n_days = 365;
    std::vector<float> values;

    const float* slice(int day_of_year, int var) const;
};

/// `shard` is a multi-year lag0 daily shard whose day 0 is Jan 1 of
/// first_year.
Climatology build_climatology(const HourlyArchive& shard, int first_year, int last_year);

struct ScoreRow {
    std::string variable;
    int lead_day = 0;
    double rmse = 0;
    double acc = 0;
    int n_cases = 0;
};

struct ScoreTable {
    std::string run;
    std::vector<ScoreRow> rows;
};

void write_scores_csv(const ScoreTable& table, const std::string& path);
ScoreTable read_scores_csv(const std::string& path);

struct CompareRow {
    std::string variable;
    int lead_day = 0;
    double rmse_a = 0, rmse_b = 0, rmse_delta = 0, rmse_pct = 0;
    double acc_a = 0, acc_b = 0, acc_delta = 0;
};

/// Per-key deltas of run A minus run B over the overlapping (variable, lead)
/// keys. Throws when the runs share no keys.
std::vector<CompareRow> compare(const ScoreTable& a, const ScoreTable& b);

void write_compare_csv(const std::vector<CompareRow>& rows, const std::string& run_a,
                       const std::string& run_b, const std::string& path);

/// Published reference scores (context only, not reproduction targets).
struct ReferenceRow {
    std::string experiment; // "lag4x" or "decade"
    std::string variable;
    int lead_day = 0;
    double rmse = 0;
};
const std::vector<ReferenceRow>& published_reference();
std::string format_reference_table();

} // namespace scorecard
} // namespace ddw
