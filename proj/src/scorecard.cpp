#include "ddw/scorecard.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "ddw/calendar.hpp"

namespace ddw {
namespace scorecard {

std::vector<double> lat_weights(const GridSpec& spec) {
    spec.validate();
    std::vector<double> w(spec.n_lat);
    double sum = 0;
    for (int j = 0; j < spec.n_lat; ++j) {
        w[j] = std::cos(spec.lat_deg[j] * std::numbers::pi / 180.0);
        sum += w[j];
    }
    if (sum <= 0) throw NumericError("degenerate grid: cosine weights sum to zero");
    const double mean = sum / spec.n_lat;
    for (auto& x : w) x /= mean;
    return w;
}

double weighted_mse(const float* forecast, const float* verification, const GridSpec& spec,
                    const std::vector<double>& weights) {
    if (static_cast<int>(weights.size()) != spec.n_lat)
        throw ShapeMismatch("weight count must equal n_lat");
    double acc = 0;
    for (int j = 0; j < spec.n_lat; ++j) {
        const double w = weights[j];
        const std::size_t off = static_cast<std::size_t>(j) * spec.n_lon;
        for (int k = 0; k < spec.n_lon; ++k) {
            const double d = static_cast<double>(forecast[off + k]) - verification[off + k];
            acc += w * d * d;
        }
    }
    return acc / static_cast<double>(spec.cells());
}

double rmse(const float* forecast, const float* verification, const GridSpec& spec,
            const std::vector<double>& weights) {
    return std::sqrt(weighted_mse(forecast, verification, spec, weights));
}

double acc(const float* forecast, const float* verification, const float* climatology,
           const GridSpec& spec, const std::vector<double>& weights) {
    if (static_cast<int>(weights.size()) != spec.n_lat)
        throw ShapeMismatch("weight count must equal n_lat");
    double ff = 0, oo = 0, fo = 0;
    for (int j = 0; j < spec.n_lat; ++j) {
        const double w = weights[j];
        const std::size_t off = static_cast<std::size_t>(j) * spec.n_lon;
        for (int k = 0; k < spec.n_lon; ++k) {
            const double fa = static_cast<double>(forecast[off + k]) - climatology[off + k];
            const double oa = static_cast<double>(verification[off + k]) - climatology[off + k];
            ff += w * fa * fa;
            oo += w * oa * oa;
            fo += w * fa * oa;
        }
    }
    if (ff <= 0 || oo <= 0)
        throw ZeroAnomalyNorm("anomaly field has zero weighted norm");
    double r = fo / std::sqrt(ff * oo);
    return std::clamp(r, -1.0, 1.0);
}

const float* Climatology::slice(int day_of_year, int var) const {
    int d = day_of_year;
    if (d >= n_days) d = n_days - 1; // day 366 verified against day 365's mean
    if (d < 0) throw IndexOutOfRange("negative day of year");
    return values.data() +
           (static_cast<std::size_t>(d) * catalog.entries.size() + var) * spec.cells();
}

Climatology build_climatology(const HourlyArchive& shard, int first_year, int last_year) {
    if (first_year > last_year) throw IndexOutOfRange("empty climatology year range");
    if (shard.step_hours != 24) throw ShapeMismatch("climatology needs a daily shard");

    Climatology c;
    c.spec = shard.spec;
    c.catalog = shard.catalog;
    c.first_year = first_year;
    c.last_year = last_year;

    bool any_leap = false;
    for (int y = first_year; y <= last_year; ++y) any_leap |= calendar::is_leap_year(y);
    c.n_days = any_leap ? 366 : 365;

    const std::size_t frame = shard.frame_size();
    std::vector<double> sum(static_cast<std::size_t>(c.n_days) * frame, 0.0);
    std::vector<int> count(c.n_days, 0);

    int day0 = 0;
    for (int y = first_year; y <= last_year; ++y) {
        const int n = calendar::days_in_year(y);
        for (int d = 0; d < n; ++d) {
            const int t = day0 + d;
            if (t >= shard.n_time)
                throw ShapeMismatch("shard does not cover the requested climatology years");
            const float* src = shard.values.data() + static_cast<std::size_t>(t) * frame;
            double* dst = sum.data() + static_cast<std::size_t>(d) * frame;
            for (std::size_t i = 0; i < frame; ++i) dst[i] += src[i];
            ++count[d];
        }
        day0 += n;
    }

    c.values.resize(sum.size());
    for (int d = 0; d < c.n_days; ++d) {
        const double* s = sum.data() + static_cast<std::size_t>(d) * frame;
        float* dst = c.values.data() + static_cast<std::size_t>(d) * frame;
        for (std::size_t i = 0; i < frame; ++i)
            dst[i] = static_cast<float>(s[i] / count[d]);
    }
    return c;
}

void write_scores_csv(const ScoreTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "run,variable,lead_day,rmse,acc,n_cases\n";
    char buf[256];
    for (const auto& r : table.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.9g,%.9g,%d\n", table.run.c_str(),
                      r.variable.c_str(), r.lead_day, r.rmse, r.acc, r.n_cases);
        out << buf;
    }
    if (!out) throw IoError("write failure: " + path);
}

ScoreTable read_scores_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    ScoreTable t;
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string run, var, lead, rm, ac, nc;
        std::getline(ss, run, ',');
        std::getline(ss, var, ',');
        std::getline(ss, lead, ',');
        std::getline(ss, rm, ',');
        std::getline(ss, ac, ',');
        std::getline(ss, nc, ',');
        t.run = run;
        t.rows.push_back({var, std::stoi(lead), std::stod(rm), std::stod(ac), std::stoi(nc)});
    }
    return t;
}

std::vector<CompareRow> compare(const ScoreTable& a, const ScoreTable& b) {
    std::map<std::pair<std::string, int>, const ScoreRow*> bindex;
    for (const auto& r : b.rows) bindex[{r.variable, r.lead_day}] = &r;

    std::vector<CompareRow> out;
    for (const auto& ra : a.rows) {
        const auto it = bindex.find({ra.variable, ra.lead_day});
        if (it == bindex.end()) continue;
        const auto& rb = *it->second;
        CompareRow c;
        c.variable = ra.variable;
        c.lead_day = ra.lead_day;
        c.rmse_a = ra.rmse;
        c.rmse_b = rb.rmse;
        c.rmse_delta = ra.rmse - rb.rmse;
        c.rmse_pct = rb.rmse != 0 ? 100.0 * (ra.rmse - rb.rmse) / rb.rmse : 0.0;
        c.acc_a = ra.acc;
        c.acc_b = rb.acc;
        c.acc_delta = ra.acc - rb.acc;
        out.push_back(c);
    }
    if (out.empty()) throw IndexOutOfRange("score tables share no (variable, lead) keys");
    return out;
}

void write_compare_csv(const std::vector<CompareRow>& rows, const std::string& run_a,
                       const std::string& run_b, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "variable,lead_day,rmse_" << run_a << ",rmse_" << run_b
        << ",rmse_delta,rmse_pct,acc_" << run_a << ",acc_" << run_b << ",acc_delta\n";
    char buf[320];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                      r.variable.c_str(), r.lead_day, r.rmse_a, r.rmse_b, r.rmse_delta,
                      r.rmse_pct, r.acc_a, r.acc_b, r.acc_delta);
        out << buf;
    }
    if (!out) throw IoError("write failure: " + path);
}

// Published reference RMSE values (see also data/reference_scores.csv).
// "lag4x": the 1979-2015 lag4x model; "decade_recent"/"decade_early": the
// 2006-2015 and 1980-1989 training-period experiments.
const std::vector<ReferenceRow>& published_reference() {
    static const std::vector<ReferenceRow> rows = {
        {"lag4x", "t2m", 1, 0.48},   {"lag4x", "t2m", 3, 0.79},
        {"lag4x", "t2m", 5, 1.18},   {"lag4x", "t2m", 7, 1.58},
        {"lag4x", "z500", 1, 48.23}, {"lag4x", "z500", 3, 151.46},
        {"lag4x", "z500", 5, 300.41},{"lag4x", "z500", 7, 465.39},
        {"decade_recent", "z500", 1, 60.67}, {"decade_early", "z500", 1, 80.92},
        {"decade_recent", "z500", 3, 178.15},{"decade_early", "z500", 3, 224.61},
        {"decade_recent", "z500", 5, 326.03},{"decade_early", "z500", 5, 369.28},
        {"decade_recent", "z500", 7, 443.33},{"decade_early", "z500", 7, 474.75},
        {"decade_recent", "t2m", 1, 0.64},   {"decade_early", "t2m", 1, 0.72},
        {"decade_recent", "t2m", 3, 1.05},   {"decade_early", "t2m", 3, 1.15},
        {"decade_recent", "t2m", 7, 1.90},   {"decade_early", "t2m", 7, 2.31},
    };
    return rows;
}

std::string format_reference_table() {
    std::ostringstream out;
    out << "# published reference, not reproduced\n";
    out << "# experiment variable lead_day rmse\n";
    char buf[128];
    for (const auto& r : published_reference()) {
        std::snprintf(buf, sizeof(buf), "%-14s %-5s day%d %10.2f\n", r.experiment.c_str(),
                      r.variable.c_str(), r.lead_day, r.rmse);
        out << buf;
    }
    return out.str();
}

} // namespace scorecard
} // namespace ddw
