#include <doctest.h>

#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include "parrep/domain.hpp"
#include "parrep/dynamics.hpp"
#include "parrep/errors.hpp"
#include "parrep/partition.hpp"
#include "parrep/qsd_oracle.hpp"

using namespace parrep;

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST_CASE("em_step formula")
{
    IntegratorConfig cfg{0.1, 1.0, 0, 0};
    QuadraticPotential quad(1, 1.0);
    CHECK(em_step(Position{1.0}, quad, cfg, Position{0.0})[0] == doctest::Approx(0.9));
    CHECK(em_step(Position{0.0}, quad, cfg, Position{0.0})[0] == 0.0);
    // sqrt(2 * 0.1 / 1) * 0.5
    CHECK(em_step(Position{0.0}, quad, cfg, Position{0.5})[0] == doctest::Approx(std::sqrt(0.2) * 0.5));
    CosinePotential cos2(2, 1.0);
    const Position at_min = em_step(Position{2.0, 0.0}, cos2, cfg, Position{0.0, 0.0});
    CHECK(at_min[0] == doctest::Approx(2.0));
    CHECK(at_min[1] == doctest::Approx(0.0));
}

TEST_CASE("em_step rejects a singular gradient")
{
    LennardJones2D lj(2);
    IntegratorConfig cfg{1e-3, 1.0, 0, 0};
    CHECK_THROWS_AS(em_step(Position{0, 0, 0, 0}, lj, cfg, Position{0, 0, 0, 0}), IntegrationFault);
}

TEST_CASE("integrator config validation")
{
    CHECK_THROWS_AS((IntegratorConfig{0.0, 1.0, 0, 0}.validate()), ConfigError);
    CHECK_THROWS_AS((IntegratorConfig{1e-3, -1.0, 0, 0}.validate()), ConfigError);
    CHECK_NOTHROW((IntegratorConfig{1e-3, 1.0, 0, 0}.validate()));
}

TEST_CASE("brownian increments have variance 2 k dt / beta")
{
    const double dt = 1e-3, beta = 2.0;
    Dynamics dyn(std::make_shared<FreePotential>(1), {}, dt, beta);
    Dynamics::Workspace ws(1);
    for (int k : {1, 10}) {
        const int n = k == 1 ? 100000 : 20000;
        double s = 0, s2 = 0;
        for (int i = 0; i < n; ++i) {
            NoiseStream stream(StreamSeed{11, static_cast<std::uint64_t>(k)}.child(i));
            Position x{0.0};
            for (int j = 0; j < k; ++j) dyn.advance(x, stream, ws);
            s += x[0];
            s2 += x[0] * x[0];
        }
        const double var = 2.0 * k * dt / beta;
        const double mean = s / n, sample_var = s2 / n - mean * mean;
        CHECK(std::abs(mean) < 3.0 * std::sqrt(var / n));
        CHECK(std::abs(sample_var - var) < 3.0 * var * std::sqrt(2.0 / n));
    }
}

TEST_CASE("reflection examples")
{
    ReflectingDomain half({Rect{-kInf, 0.0, kInf, kInf}});
    const Position p = reflect_step(Position{0.0, 0.05}, Position{0.0, -0.03}, half);
    CHECK(p[0] == doctest::Approx(0.0));
    CHECK(p[1] == doctest::Approx(0.03));
    const Position inside = reflect_step(Position{0.0, 0.05}, Position{1.0, 2.0}, half);
    CHECK(inside == Position{1.0, 2.0});
    CHECK_THROWS_AS(reflect_step(Position{0.0, -1.0}, Position{0.0, 1.0}, half), PreconditionViolation);

    // Crossing a unit-width strip twenty times needs more than eight bounces.
    ReflectingDomain strip({Rect{0.0, -kInf, 1.0, kInf}});
    const Position stuck = reflect_step(Position{0.5, 0.0}, Position{20.7, 0.3}, strip);
    CHECK(stuck == Position{0.5, 0.0});
    const Position two = reflect_step(Position{0.5, 0.0}, Position{1.6, 0.0}, strip);
    CHECK(two[0] == doctest::Approx(0.4));
}

TEST_CASE("reflection keeps trajectories inside the maze")
{
    const MazeGeometry maze = MazeGeometry::standard();
    const ReflectingDomain dom = maze.domain();
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> ux(0.0, 10.0), uy(0.0, 3.0), jump(-0.6, 0.6);
    int tested = 0;
    while (tested < 20000) {
        Position x{ux(gen), uy(gen)};
        if (!dom.contains(x)) continue;
        ++tested;
        const Position out = reflect_step(x, Position{x[0] + jump(gen), x[1] + jump(gen)}, dom);
        REQUIRE(dom.contains(out));
    }
    // Points just inside a neck bounce off its thin walls.
    const Position neck = reflect_step(Position{3.2, 0.05}, Position{3.25, 0.13}, dom);
    CHECK(dom.contains(neck));
    CHECK(neck[1] == doctest::Approx(0.07));
}

TEST_CASE("run_until_exit is deterministic")
{
    Dynamics dyn(std::make_shared<CosinePotential>(2, 1.0), {}, 1e-3, 1.0);
    GridPartition grid(2);
    const StreamSeed seed{123, 4};
    const auto a = run_until_exit(Position{0.5, 0.5}, dyn, seed, grid, 1000000);
    const auto b = run_until_exit(Position{0.5, 0.5}, dyn, seed, grid, 1000000);
    REQUIRE(a.exited);
    CHECK(a.steps == b.steps);
    CHECK(a.position == b.position);
    CHECK(a.event->source == StateId{0, 0});
    CHECK(a.event->destination != StateId{0, 0});
    CHECK(a.event->time == doctest::Approx(a.steps * 1e-3));
    const auto c = run_until_exit(Position{0.5, 0.5}, dyn, seed.child(1), grid, 1000000);
    CHECK(c.position != a.position);

    const auto capped = run_until_exit(Position{0.0, 0.0}, dyn, seed, grid, 5);
    CHECK_FALSE(capped.exited);
    CHECK(capped.steps == 5);
    CHECK_FALSE(capped.event.has_value());
}

TEST_CASE("start on a cell face exits on the first step toward the lower cell")
{
    // x = 1 belongs to cell 1; a step to x < 1 changes the label immediately.
    Dynamics dyn(std::make_shared<FreePotential>(1), {}, 1e-4, 1.0);
    GridPartition grid(1);
    int first_step_exits = 0;
    for (int i = 0; i < 200; ++i) {
        const auto r = run_until_exit(Position{1.0}, dyn, StreamSeed{8, 0}.child(i), grid, 100000);
        REQUIRE(r.exited);
        if (r.steps == 1) ++first_step_exits;
    }
    CHECK(first_step_exits > 60);
    CHECK(first_step_exits < 140);
}

TEST_CASE("mean exit time from the QSD matches 1/lambda1")
{
    auto pot = std::make_shared<CosinePotential>(1, 2.0);
    const EigenSolution sol = solve_generator(*pot, 1.0, -1.0, 1.0);
    const auto starts = sample_qsd(sol, 1000, 77);
    Dynamics dyn(pot, {}, 1e-4, 1.0);
    GridPartition grid(1);
    double s = 0, s2 = 0;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        const auto r = run_until_exit(Position{starts[i]}, dyn, StreamSeed{99, 0}.child(i), grid, 100000000);
        REQUIRE(r.exited);
        s += r.event->time;
        s2 += r.event->time * r.event->time;
    }
    const double n = static_cast<double>(starts.size());
    const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    MESSAGE("mean exit time " << mean << " vs " << sol.mean_exit_time() << " (se " << se << ")");
    CHECK(std::abs(mean - sol.mean_exit_time()) < 3.0 * se);
}
