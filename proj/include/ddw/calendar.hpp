#pragma once

#include <set>
#include <vector>

#include "ddw/errors.hpp"

namespace ddw {
namespace calendar {

struct YearRange {
    int first_year = 0;
    int last_year = 0;

    int n_years() const { return last_year - first_year + 1; }
};

/// Position of a global sample index inside a per-year file layout.
struct SampleLocator {
    long long global_idx = 0;
    int year_idx = 0;  // 0-based offset from range.first_year
    int local_idx = 0; // 0-based day of year
    int dt = 1;        // forecast step in days
};

bool is_leap_year(int year);
int days_in_year(int year);
long long total_days(const YearRange& range);

/// Maps a global day index to (year, day-of-year). Throws SkipLastSample for
/// the final dt indices of the final year (they have no target); indices near
/// the boundary of a non-final year stay valid, the target simply crosses
/// into the next year's file.
SampleLocator locate(long long global_idx, const YearRange& range, int dt);

/// Number of global indices locate() accepts: total days minus dt.
long long valid_pair_count(const YearRange& range, int dt);

/// Day-of-week, 0 = Monday .. 6 = Sunday.
enum class Weekday { Mon = 0, Tue, Wed, Thu, Fri, Sat, Sun };

/// 0-based day-of-year indices of all dates in `year` falling on the given
/// weekdays, ascending.
std::vector<int> init_schedule(int year, const std::set<Weekday>& weekdays);

} // namespace calendar
} // namespace ddw
