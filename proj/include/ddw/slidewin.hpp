#pragma once

#include <map>
#include <string>
#include <vector>

#include "ddw/grid.hpp"

namespace ddw {
namespace slidewin {

/// Subset of {0, 6, 12, 18}, strictly ascending.
struct LagSet {
    std::vector<int> lags_hours;

    void validate() const;
    static LagSet parse(const std::string& csv); // e.g. "0,6,12,18"
    static LagSet all4() { return LagSet{{0, 6, 12, 18}}; }
};

struct PairEntry {
    int lag_hours = 0;
    int input_day = 0;
    int target_day = 0;
};

/// (input, target) training pairs; pairs never mix lag streams.
struct PairManifest {
    std::vector<PairEntry> entries;
    int dt_days = 1;
};

/// Mean of the 24 hourly snapshots starting at hour 24*day_index + lag_hours.
/// Accumulates in 64-bit, stores 32-bit.
DailySample sliding_daily_mean(const HourlyArchive& archive, int day_index, int lag_hours);

struct AugmentResult {
    std::vector<DailySample> samples;          // ordered by lag, then day
    std::map<int, std::vector<int>> days_per_lag;
    long long skipped_windows = 0;             // (day, lag) items lacking a full window
};

/// All lagged daily means whose full 24-hour window exists. Deterministic
/// ordering regardless of worker count.
AugmentResult augment(const HourlyArchive& archive, const LagSet& lags, int threads = 1);

PairManifest build_pairs(const std::map<int, std::vector<int>>& sample_days_per_lag, int dt_days);

/// Daily-mean GRD1 shard (step_hours = 24) for one lag stream. Sample days
/// are contiguous from 0, so the shard's time index equals the day index.
HourlyArchive samples_to_shard(const HourlyArchive& source, const std::vector<DailySample>& samples,
                               int lag_hours);

void write_pairs_tsv(const PairManifest& manifest, const std::string& path);
PairManifest read_pairs_tsv(const std::string& path);

} // namespace slidewin
} // namespace ddw
