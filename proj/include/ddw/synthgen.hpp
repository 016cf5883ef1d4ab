#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ddw/grid.hpp"

namespace ddw {
namespace synthgen {

/// Synthetic hourly archive: solid-body longitude advection of seeded smooth
/// base fields, an additive diurnal cycle, an optional linear secular trend,
/// and white noise. Stands in for reanalysis data at desk scale.
struct SynthConfig {
    GridSpec spec;
    int n_vars = 1;
    int n_years = 1;             // 365-day synthetic years unless leap_mode
    bool leap_mode = false;      // insert a 366-day year every 4th year
    int start_year = 2000;       // epoch anchor for the archive header
    double advection_speed = 0;  // cells/hour along longitude
    std::vector<double> diurnal_amplitude; // per-var; single value broadcasts
    std::vector<double> trend_per_year;    // per-var; single value broadcasts
    double noise_std = 0;
    std::uint64_t seed = 0;

    void validate() const;
    int total_days() const;
    double diurnal(int v) const;
    double trend(int v) const;

    static SynthConfig from_file(const std::string& path);
};

HourlyArchive generate(const SynthConfig& config);

/// Noise-limited one-day-ahead RMSE floor per variable: the std of the
/// difference of two independent 24-draw daily means, noise_std*sqrt(2/24).
std::vector<double> ideal_predictor_error(const SynthConfig& config);

} // namespace synthgen
} // namespace ddw
