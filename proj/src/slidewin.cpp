#include "ddw/slidewin.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace ddw {
namespace slidewin {

void LagSet::validate() const {
    if (lags_hours.empty()) throw ShapeMismatch("lag set must be non-empty");
    static const std::set<int> allowed = {0, 6, 12, 18};
    for (std::size_t i = 0; i < lags_hours.size(); ++i) {
        if (!allowed.count(lags_hours[i]))
            throw ShapeMismatch("lag must be one of {0,6,12,18}: got " + std::to_string(lags_hours[i]));
        if (i > 0 && lags_hours[i] <= lags_hours[i - 1])
            throw ShapeMismatch("lags must be strictly ascending");
    }
}

LagSet LagSet::parse(const std::string& csv) {
    LagSet s;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
        s.lags_hours.push_back(std::stoi(tok));
    s.validate();
    return s;
}

DailySample sliding_daily_mean(const HourlyArchive& archive, int day_index, int lag_hours) {
    if (archive.step_hours != 1) throw ShapeMismatch("daily means need an hourly archive");
    const long long first = 24LL * day_index + lag_hours;
    const long long last = first + 23;
    if (day_index < 0 || first < 0 || last >= archive.n_time)
        throw WindowOutOfBounds("24-hour window [" + std::to_string(first) + "," +
                                std::to_string(last) + "] outside archive of " +
                                std::to_string(archive.n_time) + " hours");

    DailySample s;
    s.day_index = day_index;
    s.lag_hours = lag_hours;
    s.n_var = archive.catalog.size();
    s.n_lat = archive.spec.n_lat;
    s.n_lon = archive.spec.n_lon;
    const std::size_t frame = archive.frame_size();
    s.values.resize(frame);

    std::vector<double> acc(frame, 0.0);
    for (int h = 0; h < 24; ++h) {
        const float* src = archive.values.data() + (first + h) * frame;
        for (std::size_t i = 0; i < frame; ++i) acc[i] += src[i];
    }
    for (std::size_t i = 0; i < frame; ++i)
        s.values[i] = static_cast<float>(acc[i] / 24.0);
    return s;
}

AugmentResult augment(const HourlyArchive& archive, const LagSet& lags, int threads) {
    lags.validate();
    if (archive.n_time < 48) throw ShapeMismatch("augmentation needs at least 2 days of data");

    struct Item { int lag; int day; };
    std::vector<Item> items;
    AugmentResult res;
    const int max_days = (archive.n_time + 23) / 24;
    for (int lag : lags.lags_hours) {
        auto& days = res.days_per_lag[lag];
        for (int d = 0; d < max_days; ++d) {
            if (24LL * d + lag + 23 < archive.n_time) {
                items.push_back({lag, d});
                days.push_back(d);
            } else {
                ++res.skipped_windows;
            }
        }
    }

    res.samples.resize(items.size());
    const int n_workers = std::max(1, threads);
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            res.samples[i] = sliding_daily_mean(archive, items[i].day, items[i].lag);
    };
    if (n_workers == 1) {
        work(0, items.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (items.size() + n_workers - 1) / n_workers;
        for (int w = 0; w < n_workers; ++w) {
            const std::size_t b = std::min(items.size(), w * chunk);
            const std::size_t e = std::min(items.size(), b + chunk);
            if (b < e) pool.emplace_back(work, b, e);
        }
        for (auto& t : pool) t.join();
    }
    return res;
}

PairManifest build_pairs(const std::map<int, std::vector<int>>& sample_days_per_lag, int dt_days) {
    if (dt_days < 1) throw ShapeMismatch("dt_days must be >= 1");
    PairManifest m;
    m.dt_days = dt_days;
    for (const auto& [lag, days] : sample_days_per_lag) {
        const std::set<int> have(days.begin(), days.end());
        for (int d : days)
            if (have.count(d + dt_days))
                m.entries.push_back({lag, d, d + dt_days});
    }
    return m;
}

HourlyArchive samples_to_shard(const HourlyArchive& source, const std::vector<DailySample>& samples,
                               int lag_hours) {
    HourlyArchive shard;
    shard.spec = source.spec;
    shard.catalog = source.catalog;
    shard.step_hours = 24;
    shard.start_epoch_hours = source.start_epoch_hours + lag_hours;

    std::vector<const DailySample*> mine;
    for (const auto& s : samples)
        if (s.lag_hours == lag_hours) mine.push_back(&s);
    std::sort(mine.begin(), mine.end(),
              [](const DailySample* a, const DailySample* b) { return a->day_index < b->day_index; });
    for (std::size_t i = 0; i < mine.size(); ++i)
        if (mine[i]->day_index != static_cast<int>(i))
            throw ShapeMismatch("shard days must be contiguous from 0");

    shard.n_time = static_cast<int>(mine.size());
    shard.values.reserve(shard.n_time * shard.frame_size());
    for (const auto* s : mine)
        shard.values.insert(shard.values.end(), s->values.begin(), s->values.end());
    return shard;
}

void write_pairs_tsv(const PairManifest& manifest, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "lag_hours\tinput_day\ttarget_day\n";
    for (const auto& e : manifest.entries)
        out << e.lag_hours << '\t' << e.input_day << '\t' << e.target_day << '\n';
    if (!out) throw IoError("write failure: " + path);
}

PairManifest read_pairs_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    PairManifest m;
    std::string line;
    std::getline(in, line); // header
    bool dt_set = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        PairEntry e;
        ss >> e.lag_hours >> e.input_day >> e.target_day;
        if (!ss) throw IoError("malformed pairs line: " + line);
        if (!dt_set) {
            m.dt_days = e.target_day - e.input_day;
            dt_set = true;
        } else if (e.target_day - e.input_day != m.dt_days) {
            throw IoError("inconsistent dt in pairs file");
        }
        m.entries.push_back(e);
    }
    return m;
}

} // namespace slidewin
} // namespace ddw
