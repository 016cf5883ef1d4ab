#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ddw/errors.hpp"

namespace ddw {

/// Regular lat-lon grid. Latitudes descend from the north pole, longitudes
/// ascend from 0 with uniform spacing; both conventions are written into the
/// file header so readers never have to guess.
struct GridSpec {
    int n_lat = 0;
    int n_lon = 0;
    std::vector<double> lat_deg; // strictly descending
    std::vector<double> lon_deg; // strictly ascending, uniform spacing

    std::size_t cells() const { return static_cast<std::size_t>(n_lat) * n_lon; }

    void validate() const;
    bool operator==(const GridSpec&) const = default;

    /// 2.5-degree grid on cell centers: 72 x 144, +88.75 .. -88.75.
    static GridSpec regular_2p5();
    static GridSpec uniform(int n_lat, int n_lon);
};

struct VarEntry {
    std::string short_name;
    std::optional<int> level_hpa;
    std::string units;

    /// Lookup key: lowercased short name plus level, e.g. "z500", "t2m".
    std::string key() const;
    bool operator==(const VarEntry&) const = default;
};

struct VariableCatalog {
    std::vector<VarEntry> entries;

    int size() const { return static_cast<int>(entries.size()); }
    int index_of(const std::string& key) const; // throws IndexOutOfRange
    void validate() const;                      // keys unique
    bool operator==(const VariableCatalog&) const = default;

    /// The 66-variable configuration: U,V,T,Q,Z at 12 pressure levels plus
    /// T2m, MSL, SP, TCWV, SKT, TISR. Orography is a static field, not an
    /// entry here.
    static VariableCatalog full66();
};

/// Contiguous hourly snapshots, [time][var][lat][lon], 32-bit on disk.
/// Also reused for daily shards (step_hours = 24) and static fields
/// (n_time = 1).
struct HourlyArchive {
    GridSpec spec;
    VariableCatalog catalog;
    std::int64_t start_epoch_hours = 0; // hours since 1970-01-01T00Z
    int n_time = 0;
    int step_hours = 1;
    std::vector<float> values;

    std::size_t frame_size() const { return catalog.entries.size() * spec.cells(); }

    float at(int t, int v, int j, int k) const {
        return values[((static_cast<std::size_t>(t) * catalog.entries.size() + v) * spec.n_lat + j) * spec.n_lon + k];
    }
    float& at(int t, int v, int j, int k) {
        return values[((static_cast<std::size_t>(t) * catalog.entries.size() + v) * spec.n_lat + j) * spec.n_lon + k];
    }
    const float* frame(int t, int v) const {
        return values.data() + (static_cast<std::size_t>(t) * catalog.entries.size() + v) * spec.cells();
    }

    void validate(bool check_finite = false) const;
    bool operator==(const HourlyArchive&) const = default;
};

/// One lagged daily-mean grid for a (day, lag) pair.
struct DailySample {
    int day_index = 0;
    int lag_hours = 0; // one of {0, 6, 12, 18}
    int n_var = 0;
    int n_lat = 0;
    int n_lon = 0;
    std::vector<float> values; // [var][lat][lon]

    float at(int v, int j, int k) const {
        return values[(static_cast<std::size_t>(v) * n_lat + j) * n_lon + k];
    }
};

void write_archive(const HourlyArchive& archive, const std::string& path);
HourlyArchive read_archive(const std::string& path);

/// Copy of `archive` restricted to the named variables, in request order.
HourlyArchive slice_vars(const HourlyArchive& archive, const std::vector<std::string>& keys);

} // namespace ddw
