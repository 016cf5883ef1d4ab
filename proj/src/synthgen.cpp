#include "ddw/synthgen.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "ddw/calendar.hpp"

namespace ddw {
namespace synthgen {

namespace {

constexpr int kLatModes = 4;
constexpr int kLonModes = 4;

std::uint64_t mix(std::uint64_t seed, std::uint64_t t) {
    std::uint64_t x = seed ^ (t + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

std::vector<double> parse_csv(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        out.push_back(std::stod(tok));
    return out;
}

} // namespace

void SynthConfig::validate() const {
    spec.validate();
    if (n_vars < 1) throw ShapeMismatch("n_vars must be >= 1");
    if (n_years < 1) throw ShapeMismatch("n_years must be >= 1");
    if (noise_std < 0) throw ShapeMismatch("noise_std must be non-negative");
    auto check = [&](const std::vector<double>& v, const char* what) {
        if (!v.empty() && v.size() != 1 && v.size() != static_cast<std::size_t>(n_vars))
            throw ShapeMismatch(std::string(what) + " must have 1 or n_vars entries");
    };
    check(diurnal_amplitude, "diurnal_amplitude");
    check(trend_per_year, "trend_per_year");
}

int SynthConfig::total_days() const {
    if (!leap_mode) return 365 * n_years;
    int total = 0;
    for (int y = start_year; y < start_year + n_years; ++y)
        total += calendar::days_in_year(y);
    return total;
}

double SynthConfig::diurnal(int v) const {
    if (diurnal_amplitude.empty()) return 0;
    return diurnal_amplitude.size() == 1 ? diurnal_amplitude[0] : diurnal_amplitude[v];
}

double SynthConfig::trend(int v) const {
    if (trend_per_year.empty()) return 0;
    return trend_per_year.size() == 1 ? trend_per_year[0] : trend_per_year[v];
}

SynthConfig SynthConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    int n_lat = 12, n_lon = 24;
    SynthConfig c;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw IoError("malformed config line: " + line);
        const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "n_lat") n_lat = std::stoi(val);
        else if (key == "n_lon") n_lon = std::stoi(val);
        else if (key == "n_vars") c.n_vars = std::stoi(val);
        else if (key == "n_years") c.n_years = std::stoi(val);
        else if (key == "leap_mode") c.leap_mode = (val == "1" || val == "true");
        else if (key == "start_year") c.start_year = std::stoi(val);
        else if (key == "advection_speed") c.advection_speed = std::stod(val);
        else if (key == "diurnal_amplitude") c.diurnal_amplitude = parse_csv(val);
        else if (key == "trend_per_year") c.trend_per_year = parse_csv(val);
        else if (key == "noise_std") c.noise_std = std::stod(val);
        else if (key == "seed") c.seed = std::stoull(val);
        else throw IoError("unknown config key: " + key);
    }
    c.spec = GridSpec::uniform(n_lat, n_lon);
    c.validate();
    return c;
}

HourlyArchive generate(const SynthConfig& config) {
    config.validate();
    const int H = config.spec.n_lat, W = config.spec.n_lon, V = config.n_vars;
    const int n_days = config.total_days();
    const long long n_time = 24LL * n_days;

    // base fields: low-order lat/lon Fourier modes, drawn once per variable
    std::mt19937_64 base_rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::vector<double> base(static_cast<std::size_t>(V) * H * W, 0.0);
    for (int v = 0; v < V; ++v) {
        for (int m = 0; m < kLatModes; ++m) {
            for (int n = 0; n < kLonModes; ++n) {
                const double amp = normal(base_rng) / (1.0 + m + n);
                const double lon_phase = phase(base_rng);
                const double lat_phase = phase(base_rng);
                for (int j = 0; j < H; ++j) {
                    const double latf =
                        std::cos(std::numbers::pi * m * (j + 0.5) / H + lat_phase);
                    for (int k = 0; k < W; ++k) {
                        const double lonf =
                            std::cos(2.0 * std::numbers::pi * n * k / W + lon_phase);
                        base[(static_cast<std::size_t>(v) * H + j) * W + k] += amp * latf * lonf;
                    }
                }
            }
        }
    }

    HourlyArchive a;
    a.spec = config.spec;
    for (int v = 0; v < V; ++v)
        a.catalog.entries.push_back({"v" + std::to_string(v), std::nullopt, "1"});
    a.n_time = static_cast<int>(n_time);
    a.step_hours = 1;
    {
        using namespace std::chrono;
        const sys_days d0 =
            sys_days(year_month_day(std::chrono::year(config.start_year), January, day(1)));
        a.start_epoch_hours = duration_cast<hours>(d0.time_since_epoch()).count();
    }
    a.values.resize(n_time * a.frame_size());

    for (long long t = 0; t < n_time; ++t) {
        // per-snapshot noise substream: deterministic regardless of chunking
        std::mt19937_64 noise_rng(mix(config.seed, static_cast<std::uint64_t>(t)));
        std::normal_distribution<double> noise_dist(0.0, 1.0);
        const long long raw_shift = static_cast<long long>(std::floor(config.advection_speed * t));
        const int shift = static_cast<int>(((raw_shift % W) + W) % W);
        const double diurnal_phase =
            std::sin(2.0 * std::numbers::pi * static_cast<double>(t % 24) / 24.0);
        float* frame = a.values.data() + t * a.frame_size();
        for (int v = 0; v < V; ++v) {
            const double dv = config.diurnal(v) * diurnal_phase;
            const double tv = config.trend(v) * (static_cast<double>(t) / 8760.0);
            const double* bv = base.data() + static_cast<std::size_t>(v) * H * W;
            for (int j = 0; j < H; ++j)
                for (int k = 0; k < W; ++k) {
                    const int ks = (k - shift + W) % W;
                    double val = bv[j * W + ks] + dv + tv;
                    if (config.noise_std > 0) val += config.noise_std * noise_dist(noise_rng);
                    frame[(static_cast<std::size_t>(v) * H + j) * W + k] = static_cast<float>(val);
                }
        }
    }
    return a;
}

std::vector<double> ideal_predictor_error(const SynthConfig& config) {
    return std::vector<double>(config.n_vars, config.noise_std * std::sqrt(2.0 / 24.0));
}

} // namespace synthgen
} // namespace ddw
