#include <doctest.h>

#include <cmath>
#include <memory>
#include <sstream>

#include "parrep/errors.hpp"
#include "parrep/fleming_viot.hpp"
#include "parrep/qsd_oracle.hpp"
#include "parrep/stats.hpp"

using namespace parrep;

namespace {

// One state: the half-line x < 0.5.
class HalfLine final : public Partition {
public:
    std::size_t dimension() const override { return 1; }
    std::string kind() const override { return "half-line"; }
    State locate(std::span<const double> x) const override
    {
        State s;
        s.id = {x[0] < 0.5 ? 0 : 1, 0};
        s.anchor = {0.0};
        return s;
    }
};

Dynamics per1d(double dt = 1e-4)
{
    return Dynamics(std::make_shared<CosinePotential>(1, 2.0), {}, dt, 1.0);
}

std::vector<Observable> per1d_observables()
{
    auto pot = std::make_shared<CosinePotential>(1, 2.0);
    return {coordinate_observable(0, "x"), energy_observable(pot), distance_observable(Position{0.0})};
}

} // namespace

TEST_CASE("replica count and containment are preserved")
{
    const Dynamics dyn = per1d(1e-3);
    GridPartition grid(1);
    const State s = grid.locate(Position{0.9});
    FvEnsemble ens(Position{0.9}, 50, s, StreamSeed{3, 0});
    for (int step = 0; step < 3000; ++step) {
        fv_step(ens, dyn, grid);
        REQUIRE(ens.positions().size() == 50);
        for (std::size_t k = 0; k < ens.size(); ++k) REQUIRE(grid.contains(s, ens.position(k)));
    }
    CHECK(ens.steps() == 3000);
    CHECK(ens.time(1e-3) == doctest::Approx(3.0));
    CHECK_FALSE(ens.branch_log().empty());
    for (const auto& b : ens.branch_log()) CHECK(b.killed != b.parent);
}

TEST_CASE("no exit leaves the branch log untouched")
{
    const Dynamics dyn = per1d(1e-8);
    GridPartition grid(1);
    FvEnsemble ens(Position{0.0}, 20, grid.locate(Position{0.0}), StreamSeed{4, 0});
    for (int step = 0; step < 10; ++step) fv_step(ens, dyn, grid);
    CHECK(ens.branch_log().empty());
}

TEST_CASE("killed slot copies a uniformly chosen survivor")
{
    // Replica 0 starts far outside, so it is killed on the first step while
    // replicas 1 and 2 (at the origin, tiny noise) survive.
    Dynamics dyn(std::make_shared<FreePotential>(1), {}, 1e-12, 1.0);
    HalfLine part;
    const State s = part.locate(Position{0.0});
    std::vector<std::size_t> counts(2, 0);
    for (std::uint64_t trial = 0; trial < 4000; ++trial) {
        FvEnsemble ens(Position{0.0}, 3, s, StreamSeed{77, 0}.child(trial));
        ens.position(0)[0] = 10.0;
        fv_step(ens, dyn, part);
        REQUIRE(ens.branch_log().size() == 1);
        const BranchRecord& b = ens.branch_log().front();
        REQUIRE(b.killed == 0);
        REQUIRE((b.parent == 1 || b.parent == 2));
        ++counts[b.parent - 1];
        CHECK(ens.position(0)[0] == ens.position(b.parent)[0]);
    }
    const double p = chi_square_uniform_pvalue(counts);
    MESSAGE("parent counts " << counts[0] << " / " << counts[1] << ", p = " << p);
    CHECK(p > 0.01);
}

TEST_CASE("branched copy evolves independently of its parent")
{
    Dynamics dyn(std::make_shared<FreePotential>(1), {}, 1e-6, 1.0);
    HalfLine part;
    FvEnsemble ens(Position{0.0}, 3, part.locate(Position{0.0}), StreamSeed{1, 1});
    ens.position(0)[0] = 10.0;
    fv_step(ens, dyn, part);
    const std::size_t parent = ens.branch_log().front().parent;
    fv_step(ens, dyn, part);
    CHECK(ens.position(0)[0] != ens.position(parent)[0]);
}

TEST_CASE("simultaneous exit of every replica is an extinction")
{
    Dynamics dyn(std::make_shared<FreePotential>(1), {}, 1e-12, 1.0);
    HalfLine part;
    FvEnsemble ens(Position{0.0}, 2, part.locate(Position{0.0}), StreamSeed{2, 0});
    ens.position(0)[0] = 5.0;
    ens.position(1)[0] = 6.0;
    CHECK_THROWS_AS(fv_step(ens, dyn, part), ExtinctionFault);
}

TEST_CASE("several kills in one step are processed in index order")
{
    Dynamics dyn(std::make_shared<FreePotential>(1), {}, 1e-12, 1.0);
    HalfLine part;
    FvEnsemble ens(Position{0.0}, 5, part.locate(Position{0.0}), StreamSeed{5, 0});
    ens.position(3)[0] = 7.0;
    ens.position(1)[0] = 7.0;
    fv_step(ens, dyn, part);
    REQUIRE(ens.branch_log().size() == 2);
    CHECK(ens.branch_log()[0].killed == 1);
    CHECK(ens.branch_log()[1].killed == 3);
    // Parents come from the replicas that did not exit.
    for (const auto& b : ens.branch_log()) CHECK((b.parent == 0 || b.parent == 2 || b.parent == 4));
}

TEST_CASE("run_fv_until with a huge tolerance stops at the first check")
{
    const Dynamics dyn = per1d();
    GridPartition grid(1);
    FvEnsemble ens(Position{0.3}, 10, grid.locate(Position{0.3}), StreamSeed{6, 0});
    const FvRunResult r = run_fv_until(ens, dyn, grid, per1d_observables(), {10.0, 10, 10}, 1000);
    CHECK(r.stationary);
    CHECK(r.steps == 10);
    CHECK(r.t_phase == doctest::Approx(10 * 1e-4));

    FvEnsemble capped(Position{0.3}, 10, grid.locate(Position{0.3}), StreamSeed{6, 0});
    const FvRunResult c = run_fv_until(capped, dyn, grid, per1d_observables(), {1e-9, 10, 10}, 55, true);
    CHECK_FALSE(c.stationary);
    CHECK(c.steps == 55);
    CHECK(c.history.size() == 5);
    CHECK(c.rhats.size() == 3);
}

TEST_CASE("same seed reproduces the ensemble bit for bit")
{
    const Dynamics dyn = per1d(1e-3);
    GridPartition grid(1);
    const State s = grid.locate(Position{0.9});
    FvEnsemble a(Position{0.9}, 30, s, StreamSeed{8, 2}), b(Position{0.9}, 30, s, StreamSeed{8, 2});
    for (int i = 0; i < 500; ++i) {
        fv_step(a, dyn, grid);
        fv_step(b, dyn, grid);
    }
    CHECK(std::equal(a.positions().begin(), a.positions().end(), b.positions().begin()));
    CHECK(a.branch_log().size() == b.branch_log().size());
    std::ostringstream la, lb;
    write_branch_log_csv(la, a);
    write_branch_log_csv(lb, b);
    CHECK(la.str() == lb.str());
}

TEST_CASE("empirical distribution")
{
    GridPartition grid(1);
    FvEnsemble one(Position{0.25}, 1, grid.locate(Position{0.25}), StreamSeed{1, 0});
    const EmpiricalEnsemble e1 = empirical_distribution(one);
    REQUIRE(e1.points.size() == 1);
    CHECK(e1.points[0] == Position{0.25});
    CHECK(e1.weights[0] == 1.0);
    for (std::size_t n : {3u, 7u, 1000u}) {
        FvEnsemble ens(Position{0.0}, n, grid.locate(Position{0.0}), StreamSeed{1, 0});
        const EmpiricalEnsemble e = empirical_distribution(ens);
        double total = 0;
        for (double w : e.weights) total += w;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("snapshot distance to the oracle density shrinks as N grows")
{
    auto pot = std::make_shared<CosinePotential>(1, 2.0);
    const EigenSolution sol = solve_generator(*pot, 1.0, -1.0, 1.0);
    const Dynamics dyn = per1d();
    GridPartition grid(1);
    const State s = grid.locate(Position{0.99});
    const std::size_t bins = 40;
    std::vector<double> l1;
    for (std::size_t n : {100u, 1000u, 10000u}) {
        const std::size_t runs = n == 100 ? 10 : n == 1000 ? 3 : 1;
        double total = 0;
        for (std::size_t r = 0; r < runs; ++r) {
            FvEnsemble ens(Position{0.99}, n, s, StreamSeed{31, n}.child(r));
            for (int i = 0; i < 15000; ++i) fv_step(ens, dyn, grid);
            const Histogram h = histogram(ens.positions(), bins, -1.0, 1.0);
            for (std::size_t b = 0; b < bins; ++b) {
                const double w = h.edges[b + 1] - h.edges[b];
                total += std::abs(h.densities[b] * w - sol.mass(h.edges[b], h.edges[b + 1]));
            }
        }
        l1.push_back(total / static_cast<double>(runs));
    }
    MESSAGE("mean L1 at t=1.5, N=100: " << l1[0] << ", N=1000: " << l1[1] << ", N=10000: " << l1[2]);
    CHECK(l1[2] < 0.1);
    CHECK(l1[1] < l1[0]);
    CHECK(l1[2] < l1[1]);
}
