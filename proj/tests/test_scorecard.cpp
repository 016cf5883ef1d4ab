#include "doctest.h"

#include <cmath>
#include <random>

#include "ddw/calendar.hpp"
#include "ddw/scorecard.hpp"
#include "test_util.hpp"

using namespace ddw;
using namespace ddw::scorecard;

TEST_CASE("latitude weights") {
    SUBCASE("mean over rows is exactly 1 by construction") {
        auto w = lat_weights(GridSpec::regular_2p5());
        double mean = 0;
        for (double x : w) mean += x;
        mean /= w.size();
        CHECK(mean == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("proportional to cos(lat)") {
        auto spec = GridSpec::uniform(6, 8);
        auto w = lat_weights(spec);
        for (int j = 1; j < 6; ++j) {
            const double r = w[j] / w[0];
            const double c = std::cos(spec.lat_deg[j] * M_PI / 180.0) /
                             std::cos(spec.lat_deg[0] * M_PI / 180.0);
            CHECK(r == doctest::Approx(c).epsilon(1e-12));
        }
    }
}

TEST_CASE("rmse identities") {
    auto spec = GridSpec::uniform(5, 7);
    auto w = lat_weights(spec);
    std::vector<float> f(spec.cells()), o(spec.cells());
    std::mt19937 rng(2);
    std::uniform_real_distribution<float> dist(-3, 3);
    for (auto& v : f) v = dist(rng);
    for (auto& v : o) v = dist(rng);

    SUBCASE("zero when forecast equals verification") {
        CHECK(rmse(f.data(), f.data(), spec, w) == 0.0);
    }
    SUBCASE("constant offset c gives rmse exactly c") {
        std::vector<float> g(f);
        for (auto& v : g) v += 1.75f;
        CHECK(rmse(g.data(), f.data(), spec, w) == doctest::Approx(1.75).epsilon(1e-6));
    }
    SUBCASE("scaling the error scales the rmse") {
        std::vector<float> mid(spec.cells()), far(spec.cells());
        for (std::size_t i = 0; i < spec.cells(); ++i) {
            mid[i] = o[i] + 0.5f * (f[i] - o[i]);
            far[i] = f[i];
        }
        CHECK(rmse(far.data(), o.data(), spec, w) ==
              doctest::Approx(2.0 * rmse(mid.data(), o.data(), spec, w)).epsilon(1e-5));
    }
    SUBCASE("rmse is sqrt of weighted_mse") {
        CHECK(rmse(f.data(), o.data(), spec, w) ==
              doctest::Approx(std::sqrt(weighted_mse(f.data(), o.data(), spec, w))));
    }
}

TEST_CASE("acc identities") {
    auto spec = GridSpec::uniform(4, 9);
    auto w = lat_weights(spec);
    std::vector<float> clim(spec.cells(), 10.0f);
    std::vector<float> o(spec.cells());
    std::mt19937 rng(3);
    std::uniform_real_distribution<float> dist(-2, 2);
    for (auto& v : o) v += 10.0f + dist(rng);

    SUBCASE("perfect forecast gives acc 1") {
        CHECK(acc(o.data(), o.data(), clim.data(), spec, w) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("negated anomaly gives acc -1") {
        std::vector<float> neg(spec.cells());
        for (std::size_t i = 0; i < spec.cells(); ++i) neg[i] = 2 * clim[i] - o[i];
        CHECK(acc(neg.data(), o.data(), clim.data(), spec, w) == doctest::Approx(-1.0).epsilon(1e-9));
    }
    SUBCASE("scaling an anomaly leaves acc unchanged") {
        std::vector<float> scaled(spec.cells());
        for (std::size_t i = 0; i < spec.cells(); ++i)
            scaled[i] = clim[i] + 3.0f * (o[i] - clim[i]);
        CHECK(acc(scaled.data(), o.data(), clim.data(), spec, w) ==
              doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("zero anomaly norm throws") {
        CHECK_THROWS_AS(acc(clim.data(), o.data(), clim.data(), spec, w), ZeroAnomalyNorm);
        CHECK_THROWS_AS(acc(o.data(), clim.data(), clim.data(), spec, w), ZeroAnomalyNorm);
    }
    SUBCASE("1000 random triples stay in [-1, 1]") {
        std::mt19937 r2(77);
        std::normal_distribution<float> nd(0.0f, 1.0f);
        for (int trial = 0; trial < 1000; ++trial) {
            std::vector<float> ff(spec.cells()), oo(spec.cells()), cc(spec.cells());
            for (std::size_t i = 0; i < spec.cells(); ++i) {
                ff[i] = nd(r2);
                oo[i] = nd(r2);
                cc[i] = nd(r2);
            }
            const double a = acc(ff.data(), oo.data(), cc.data(), spec, w);
            CHECK(a >= -1.0);
            CHECK(a <= 1.0);
        }
    }
}

TEST_CASE("climatology") {
    SUBCASE("two plain years: per-day mean of the pair") {
        auto shard = testutil::random_archive(730, 2, 3, 4, 5);
        shard.step_hours = 24;
        auto clim = build_climatology(shard, 2001, 2002);
        CHECK(clim.n_days == 365);
        for (int d : {0, 100, 364})
            for (int v = 0; v < 2; ++v) {
                const float* s = clim.slice(d, v);
                for (std::size_t i = 0; i < shard.spec.cells(); ++i) {
                    const double expect =
                        0.5 * (static_cast<double>(shard.frame(d, v)[i]) + shard.frame(365 + d, v)[i]);
                    CHECK(s[i] == doctest::Approx(expect).epsilon(1e-6));
                }
            }
    }
    SUBCASE("leap-year range produces 366 days; day 366 of a plain build maps to 365") {
        auto shard = testutil::random_archive(365 + 366, 1, 2, 2, 6);
        shard.step_hours = 24;
        auto clim = build_climatology(shard, 2003, 2004);
        CHECK(clim.n_days == 366);
        CHECK(clim.slice(365, 0) != nullptr); // the extra day exists

        auto plain = testutil::random_archive(365, 1, 2, 2, 7);
        plain.step_hours = 24;
        auto c365 = build_climatology(plain, 2001, 2001);
        CHECK(c365.n_days == 365);
        CHECK(c365.slice(365, 0) == c365.slice(364, 0)); // day 366 falls back
    }
    SUBCASE("shard length must match the year range") {
        auto shard = testutil::random_archive(400, 1, 2, 2, 8);
        shard.step_hours = 24;
        CHECK_THROWS_AS(build_climatology(shard, 2001, 2002), ShapeMismatch);
    }
}

TEST_CASE("score tables") {
    ScoreTable t;
    t.run = "runA";
    t.rows = {{"t2m", 1, 0.5, 0.99, 52}, {"t2m", 3, 1.2, 0.9, 52}, {"z500", 1, 60.0, 0.97, 52}};
    testutil::TempDir tmp;

    SUBCASE("csv roundtrip") {
        write_scores_csv(t, tmp.file("s.csv"));
        auto t2 = read_scores_csv(tmp.file("s.csv"));
        CHECK(t2.run == t.run);
        REQUIRE(t2.rows.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(t2.rows[i].variable == t.rows[i].variable);
            CHECK(t2.rows[i].lead_day == t.rows[i].lead_day);
            CHECK(t2.rows[i].rmse == doctest::Approx(t.rows[i].rmse).epsilon(1e-9));
            CHECK(t2.rows[i].acc == doctest::Approx(t.rows[i].acc).epsilon(1e-9));
            CHECK(t2.rows[i].n_cases == t.rows[i].n_cases);
        }
    }
    SUBCASE("compare joins on variable and lead") {
        ScoreTable u;
        u.run = "runB";
        u.rows = {{"t2m", 1, 0.6, 0.98, 52}, {"z500", 1, 55.0, 0.95, 52}, {"z500", 5, 300.0, 0.6, 52}};
        auto rows = compare(t, u);
        REQUIRE(rows.size() == 2); // (t2m,1) and (z500,1)
        CHECK(rows[0].variable == "t2m");
        CHECK(rows[0].rmse_delta == doctest::Approx(-0.1).epsilon(1e-9));
        CHECK(rows[0].rmse_pct == doctest::Approx(100.0 * (0.5 - 0.6) / 0.6).epsilon(1e-9));
        CHECK(rows[1].variable == "z500");
        CHECK(rows[1].acc_delta == doctest::Approx(0.02).epsilon(1e-9));
    }
    SUBCASE("compare with no overlap throws") {
        ScoreTable u;
        u.run = "runB";
        u.rows = {{"q700", 2, 1.0, 0.5, 10}};
        CHECK_THROWS_AS(compare(t, u), IndexOutOfRange);
    }
}

TEST_CASE("published reference table is labeled as context only") {
    const auto& ref = published_reference();
    CHECK_FALSE(ref.empty());
    bool has_lag4x_t2m = false, has_decade = false;
    for (const auto& r : ref) {
        if (r.experiment == "lag4x" && r.variable == "t2m" && r.lead_day == 1) {
            has_lag4x_t2m = true;
            CHECK(r.rmse == doctest::Approx(0.48));
        }
        if (r.experiment.rfind("decade", 0) == 0) has_decade = true;
    }
    CHECK(has_lag4x_t2m);
    CHECK(has_decade);
    auto text = format_reference_table();
    CHECK(text.find("not reproduced") != std::string::npos);
}
