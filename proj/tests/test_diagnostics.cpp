#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "parrep/diagnostics.hpp"
#include "parrep/errors.hpp"

using namespace parrep;

namespace {

// R-hat straight from the definition on stored trajectories traj[k][step],
// each step weighted by dt.
double rhat_direct(const std::vector<std::vector<double>>& traj)
{
    const double n = static_cast<double>(traj.size());
    const double steps = static_cast<double>(traj.front().size());
    double grand = 0;
    for (const auto& t : traj)
        for (double v : t) grand += v;
    grand /= n * steps;
    double num = 0, den = 0;
    for (const auto& t : traj) {
        double m = 0;
        for (double v : t) m += v;
        m /= steps;
        for (double v : t) {
            num += (v - grand) * (v - grand) / steps;
            den += (v - m) * (v - m) / steps;
        }
    }
    return (num / n) / (den / n);
}

GrAccumulator feed(const std::vector<std::vector<double>>& traj, double dt)
{
    GrAccumulator acc(traj.size());
    std::vector<double> vals(traj.size());
    for (std::size_t s = 0; s < traj.front().size(); ++s) {
        for (std::size_t k = 0; k < traj.size(); ++k) vals[k] = traj[k][s];
        acc.update(vals, dt);
    }
    return acc;
}

} // namespace

TEST_CASE("hand-computed two-replica case")
{
    const GrAccumulator acc = feed({{0, 1}, {2, 3}}, 1.0);
    const RhatParts p = rhat_parts(acc);
    CHECK(p.numerator == doctest::Approx(1.25));
    CHECK(p.denominator == doctest::Approx(0.25));
    CHECK(compute_rhat(acc) == doctest::Approx(5.0));
    // The step weight cancels.
    CHECK(compute_rhat(feed({{0, 1}, {2, 3}}, 1e-3)) == doctest::Approx(5.0));
}

TEST_CASE("degenerate trajectories")
{
    CHECK(compute_rhat(feed({{0.3, 0.7, 0.1}, {0.3, 0.7, 0.1}, {0.3, 0.7, 0.1}}, 0.1)) == doctest::Approx(1.0));
    CHECK(compute_rhat(feed({{2, 2, 2}, {2, 2, 2}}, 0.1)) == 1.0);
    CHECK(compute_rhat(feed({{0, 0}, {1, 1}}, 0.1)) == kRhatInfinite);
    GrAccumulator fresh(3);
    CHECK_THROWS_AS(compute_rhat(fresh), PreconditionViolation);
}

TEST_CASE("single update gives each replica its value as trajectory mean")
{
    GrAccumulator acc(4);
    acc.update(std::vector<double>{1.5, 1.5, 1.5, 1.5}, 0.2);
    for (std::size_t k = 0; k < 4; ++k) CHECK(acc.sum(k) / acc.time() == doctest::Approx(1.5));
    CHECK(acc.time() == doctest::Approx(0.2));
}

TEST_CASE("non-finite values are rejected")
{
    GrAccumulator acc(2);
    CHECK_THROWS_AS(acc.update(std::vector<double>{1.0, std::nan("")}, 0.1), DiagnosticsFault);
    RhatMonitor mon({Observable{"inv", [](std::span<const double> x) { return 1.0 / x[0]; }}}, 2, 1);
    CHECK_THROWS_AS(mon.update(std::vector<double>{1.0, 0.0}, 0.1), DiagnosticsFault);
}

TEST_CASE("accumulator agrees with the direct definition, is at least one and exchangeable")
{
    std::mt19937_64 gen(12);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + trial % 7, steps = 1 + trial % 13;
        std::vector<std::vector<double>> traj(n, std::vector<double>(steps));
        for (std::size_t k = 0; k < n; ++k) {
            const double offset = 0.3 * z(gen);
            for (double& v : traj[k]) v = offset + z(gen);
        }
        const double r = compute_rhat(feed(traj, 0.01));
        if (steps == 1) {
            // No within-trajectory spread yet.
            CHECK(r == kRhatInfinite);
            continue;
        }
        CHECK(r == doctest::Approx(rhat_direct(traj)).epsilon(1e-9));
        CHECK(r >= 1.0);
        auto shuffled = traj;
        std::shuffle(shuffled.begin(), shuffled.end(), gen);
        CHECK(compute_rhat(feed(shuffled, 0.01)) == doctest::Approx(r).epsilon(1e-12));
    }
}

TEST_CASE("stationarity criterion")
{
    DiagnosticsConfig cfg;
    CHECK(stationarity_check(std::vector<double>{1.05, 1.01}, cfg));
    CHECK_FALSE(stationarity_check(std::vector<double>{1.05, 1.11}, cfg));
    CHECK_FALSE(stationarity_check(std::vector<double>{1.0, kRhatInfinite}, cfg));
    cfg.tol = 0.0;
    CHECK_THROWS(cfg.validate());
    cfg.tol = 0.1;
    cfg.check_stride = 0;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("monitor feeds one accumulator per observable")
{
    RhatMonitor mon({coordinate_observable(0, "x"), coordinate_observable(1, "y"),
                     distance_observable(Position{0.0, 0.0}, "r")},
                    2, 2);
    mon.update(std::vector<double>{0, 0, 3, 4}, 1.0);
    mon.update(std::vector<double>{1, 0, 2, 4}, 1.0);
    CHECK(mon.accumulator(0).sum(0) == doctest::Approx(1.0));
    CHECK(mon.accumulator(1).sum(1) == doctest::Approx(8.0));
    CHECK(mon.accumulator(2).sum(1) == doctest::Approx(5.0 + std::sqrt(20.0)));
    const auto r = mon.rhats();
    REQUIRE(r.size() == 3);
    CHECK(r[0] == doctest::Approx(compute_rhat(feed({{0, 1}, {3, 2}}, 1.0))));
    CHECK(r[1] == kRhatInfinite);
    CHECK(mon.time() == doctest::Approx(2.0));
}
