#include "ddw/calendar.hpp"

#include <chrono>

namespace ddw {
namespace calendar {

bool is_leap_year(int year) {
    return year % 4 == 0 && (year % 100 != 0 || year % 400 == 0);
}

int days_in_year(int year) {
    return is_leap_year(year) ? 366 : 365;
}

long long total_days(const YearRange& range) {
    long long total = 0;
    for (int y = range.first_year; y <= range.last_year; ++y)
        total += days_in_year(y);
    return total;
}

SampleLocator locate(long long global_idx, const YearRange& range, int dt) {
    if (dt < 1) throw IndexOutOfRange("dt must be >= 1");
    if (global_idx < 0) throw IndexOutOfRange("negative global index");

    long long remaining = global_idx;
    for (int yi = 0; yi < range.n_years(); ++yi) {
        const int n = days_in_year(range.first_year + yi);
        if (remaining < n) {
            const int local = static_cast<int>(remaining);
            // Only the last file has no successor to borrow targets from.
            if (local >= n - dt && yi == range.n_years() - 1)
                throw SkipLastSample(global_idx, local);
            return SampleLocator{global_idx, yi, local, dt};
        }
        remaining -= n;
    }
    throw IndexOutOfRange("global index beyond year range");
}

long long valid_pair_count(const YearRange& range, int dt) {
    const long long n = total_days(range) - dt;
    return n > 0 ? n : 0;
}

std::vector<int> init_schedule(int year, const std::set<Weekday>& weekdays) {
    using namespace std::chrono;
    if (weekdays.empty()) throw IndexOutOfRange("weekday set must be non-empty");

    const sys_days jan1 = sys_days(year_month_day(std::chrono::year(year), January, day(1)));
    std::vector<int> out;
    for (int d = 0; d < days_in_year(year); ++d) {
        const weekday wd(jan1 + days(d));
        // iso_encoding: Mon=1..Sun=7.
        const auto ours = static_cast<Weekday>(wd.iso_encoding() - 1);
        if (weekdays.count(ours)) out.push_back(d);
    }
    return out;
}

} // namespace calendar
} // namespace ddw
