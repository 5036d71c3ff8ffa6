// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance            all criteria (tens of minutes)
//   acceptance --smoke    fast subset with a reduced escape run
//   acceptance --only 6   a single criterion

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "parrep/experiments.hpp"
#include "parrep/fleming_viot.hpp"
#include "parrep/lj7.hpp"
#include "parrep/qsd_oracle.hpp"
#include "parrep/stats.hpp"

using namespace parrep;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

constexpr std::size_t kSeeds = 5;
std::size_t g_threads = 0;

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double mean_of(const std::vector<double>& v)
{
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// L1 distance between a 40-bin histogram on (-1, 1) and the bin-averaged oracle density.
double l1_to_oracle(const std::vector<double>& xs, const EigenSolution& sol)
{
    const Histogram h = histogram(xs, 40, -1.0, 1.0);
    double l1 = 0;
    for (std::size_t b = 0; b < 40; ++b) {
        const double w = h.edges[b + 1] - h.edges[b];
        l1 += std::abs(h.densities[b] - sol.mass(h.edges[b], h.edges[b + 1]) / w) * w;
    }
    return l1;
}

void c1_oracle(Verdict& v)
{
    const auto t0 = std::chrono::steady_clock::now();
    FreePotential free(1);
    const EigenSolution sol = solve_generator(free, 1.0, -1.0, 1.0, 2000);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double e1 = std::abs(sol.lambda1 / (std::numbers::pi * std::numbers::pi / 4) - 1);
    const double e2 = std::abs(sol.lambda2 / (std::numbers::pi * std::numbers::pi) - 1);
    v.detail << "lambda1=" << sol.lambda1 << " (rel " << e1 << ") lambda2=" << sol.lambda2 << " (rel " << e2
             << ") solve " << secs << "s";
    v.require(e1 < 0.005, "lambda1 within 0.5%");
    v.require(e2 < 0.005, "lambda2 within 0.5%");
    v.require(secs < 1.0, "runtime < 1 s");
}

// Shared by the FV histogram and R-hat criteria.
struct Per1dRuns {
    std::vector<DiagnosticsResult> runs;
    EigenSolution oracle;
};

const Per1dRuns& per1d_runs()
{
    static const Per1dRuns cache = [] {
        Per1dRuns r;
        ExperimentConfig c = defaults_for("per1d-diagnostics");
        r.oracle = solve_generator(build_system(c).dynamics.potential(), c.beta, -1.0, 1.0);
        c.replicas = 2000;
        c.t_max = 1.5;
        c.snapshot_times = {1.5};
        for (std::size_t s = 0; s < kSeeds; ++s) {
            c.seed = 1000 + s;
            r.runs.push_back(run_fv_diagnostics(c));
        }
        return r;
    }();
    return cache;
}

void c2_fv_qsd(Verdict& v)
{
    const auto& p = per1d_runs();
    std::vector<double> l1s, pooled;
    for (const auto& r : p.runs) {
        v.require(!r.extinct && r.snapshots.size() == 1, "run reached t = 1.5");
        if (r.snapshots.empty()) continue;
        const auto& xs = r.snapshots.back().positions;
        l1s.push_back(l1_to_oracle(xs, p.oracle));
        pooled.insert(pooled.end(), xs.begin(), xs.end());
    }
    const double avg = mean_of(l1s);
    v.detail << "mean per-seed L1=" << avg << " pooled-histogram L1=" << l1_to_oracle(pooled, p.oracle) << " seeds:";
    for (double l : l1s) v.detail << ' ' << l;
    v.require(avg < 0.1, "mean L1 < 0.1");
}

void c3_rhat(Verdict& v)
{
    const auto& p = per1d_runs();
    std::size_t converged = 0;
    bool all_at_least_one = true;
    v.detail << "first t with all R-hat < 1.1:";
    for (const auto& r : p.runs) {
        std::optional<double> first;
        for (const auto& s : r.series) {
            for (double x : s.rhats) all_at_least_one &= x >= 1.0;
            if (!first && std::all_of(s.rhats.begin(), s.rhats.end(), [](double x) { return x < 1.1; }))
                first = s.t;
        }
        if (first && *first <= 1.5) ++converged;
        v.detail << ' ' << (first ? std::to_string(*first) : "never");
    }
    v.detail << " (" << converged << "/" << p.runs.size() << ")";
    v.require(converged >= 4, ">= 4 of 5 seeds below 1.1 by t = 1.5");
    v.require(all_at_least_one, "R-hat >= 1 at every check");
}

void c4_exit_law(Verdict& v)
{
    const ExperimentConfig c = defaults_for("per1d-diagnostics");
    const System sys = build_system(c);
    const EigenSolution sol = solve_generator(sys.dynamics.potential(), c.beta, -1.0, 1.0);
    const std::size_t n = 10000;
    const auto starts = sample_qsd(sol, n, 404);
    std::vector<double> times(n);
    std::vector<int> side(n);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    const StreamSeed seed{404, 0};
    bool all_exited = true;
    auto one = [&](std::size_t i) {
        const auto r = run_until_exit(Position{starts[i]}, sys.dynamics, seed.child(i), *sys.partition, 1000000000);
        if (!r.exited) {
            all_exited = false;
            return;
        }
        times[i] = r.event->time;
        side[i] = r.event->position[0] > 0.0;
    };
    for (std::size_t i : idx) one(i);
    v.require(all_exited, "every trajectory exited");
    const double lambda = sol.lambda1;
    const KsResult ks = ks_one_sample(times, [lambda](double t) { return t > 0 ? 1.0 - std::exp(-lambda * t) : 0.0; },
                                      0.01);
    const double r = point_biserial(side, times);
    v.detail << "mean T=" << mean_of(times) << " vs 1/lambda1=" << 1 / lambda << " KS D=" << ks.statistic
             << " p=" << ks.p_value << " point-biserial r=" << r;
    v.require(ks.pass, "KS vs Exp(lambda1) at alpha 0.01");
    v.require(std::abs(r) < 0.05, "|r| < 0.05");
}

void c5_discrete(Verdict& v)
{
    const double p = 0.001, dt = 1.0;
    const std::size_t n = 100, trials = 100000;
    std::mt19937_64 gen(55);
    std::geometric_distribution<std::uint64_t> geo(p);
    std::vector<std::optional<std::uint64_t>> steps(n);
    double total = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        for (auto& s : steps) s = geo(gen) + 1;
        const std::size_t w = *select_winner(steps);
        total += parallel_credit(*steps[w], w, n, dt);
    }
    const double mean = total / static_cast<double>(trials);
    v.detail << "mean credit " << mean << " vs " << dt / p;
    v.require(std::abs(mean - dt / p) < 0.02 * dt / p, "geometric credit within 2%");

    // N = 1: the parallel-phase credit of one replica against a serial run on the same stream.
    ExperimentConfig c = defaults_for("per2d-single");
    c.beta = 2.0;
    const System sys = build_system(c);
    const State home = sys.partition->locate(c.x0);
    ParRepConfig pc;
    pc.replicas = 1;
    std::uniform_real_distribution<double> u(-0.9, 0.9);
    std::size_t exact = 0;
    for (std::size_t r = 0; r < 100; ++r) {
        const Position x0{u(gen), u(gen)};
        const StreamSeed s = StreamSeed{56, 0}.child(r);
        SimulationClock clock;
        const auto par = parallel_step(x0, home, sys, pc, s, clock);
        const auto ser = run_until_exit(x0, sys.dynamics, s.child(0), *sys.partition, 100000000);
        exact += par && ser.exited && par->credited == static_cast<double>(ser.steps) * sys.dynamics.dt() &&
                 par->event.position == ser.position;
    }
    v.detail << "; N=1 exact " << exact << "/100";
    v.require(exact == 100, "N=1 credit equals serial time");
}

struct ExitChecks {
    double serial_mean = 0, serial_se = 0;
    const MethodResult* serial = nullptr;
    const MethodResult* parrep = nullptr;
};

ExitChecks split(const ExitExperimentResult& r)
{
    ExitChecks e;
    for (const auto& m : r.methods) (m.method == "serial" ? e.serial : e.parrep) = &m;
    std::vector<double> t;
    for (const auto& run : e.serial->runs) t.push_back(run.exit_time);
    const MeanVar mv = mean_var(t);
    e.serial_mean = *mv.mean;
    e.serial_se = std::sqrt(*mv.variance / static_cast<double>(t.size()));
    return e;
}

std::optional<ClopperPearsonInterval> label_interval(const MethodResult& m, const std::string& label)
{
    for (const auto& [l, ci] : m.label_intervals)
        if (l == label) return ci;
    return std::nullopt;
}

void c6_per2d(Verdict& v, bool smoke)
{
    ExperimentConfig c = defaults_for("per2d-single");
    c.replicas = 100;
    c.tols = {0.05};
    c.realizations = smoke ? 200 : 1000;
    c.threads = g_threads;
    c.seed = 6;
    if (smoke) c.beta = 2.5;
    const ExitExperimentResult r = run_exit_experiment(c);
    const ExitChecks e = split(r);
    const SummaryRow& s = e.parrep->summary;
    v.detail << (smoke ? "smoke beta=2.5: " : "") << "serial <T>=" << e.serial_mean << " (se " << e.serial_se
             << ") parrep <T>=" << *s.mean_exit_time << " <t_phase>=" << s.mean_t_phase.value_or(NAN)
             << " dephased=" << *s.pct_dephased << "% speedup=" << *s.mean_speedup << " KS(T) p=" << e.parrep->ks_time->p_value;
    if (e.parrep->ks_coord) v.detail << " KS(exit point) p=" << e.parrep->ks_coord->p_value;
    v.require(e.parrep->ks_time->pass, "exit-time KS at alpha 0.05");
    if (smoke) {
        bool complete = true;
        for (const auto* m : {e.serial, e.parrep})
            for (const auto& run : m->runs) complete &= run.completed && run.exit_time > 0;
        v.require(complete, "all realizations exit");
        v.require(*s.mean_speedup > 1.0, "speedup > 1");
        return;
    }
    v.require(std::abs(e.serial_mean - 34.8) < 3 * e.serial_se, "serial <T> within 3 se of 34.8");
    v.require(*s.pct_dephased >= 75 && *s.pct_dephased <= 92, "dephase rate in [75, 92]%");
    v.require(*s.mean_speedup >= 4 && *s.mean_speedup <= 9, "speedup in [4, 9]");
}

void c7_maze(Verdict& v)
{
    ExperimentConfig c = defaults_for("ent2d-single");
    c.tols = {0.1};
    c.realizations = 1000;
    c.threads = g_threads;
    c.seed = 7;
    const ExitExperimentResult r = run_exit_experiment(c);
    const ExitChecks e = split(r);
    const auto ci_s = label_interval(*e.serial, "3");
    const auto ci_p = label_interval(*e.parrep, "3");
    v.detail << "serial <T>=" << e.serial_mean << " parrep <T>=" << *e.parrep->summary.mean_exit_time
             << " speedup=" << *e.parrep->summary.mean_speedup << " KS(T) p=" << e.parrep->ks_time->p_value;
    if (ci_s) v.detail << " serial P[3] CI=[" << ci_s->lower << ", " << ci_s->upper << "]";
    if (ci_p) v.detail << " parrep P[3] CI=[" << ci_p->lower << ", " << ci_p->upper << "]";
    v.require(e.parrep->ks_time->pass, "exit-time KS at alpha 0.05");
    v.require(ci_s && ci_s->contains(0.5), "serial P[state 3] interval contains 0.5");
    v.require(ci_p && ci_p->contains(0.5), "parrep P[state 3] interval contains 0.5");
}

void c8_lj7(Verdict& v)
{
    ExperimentConfig c = defaults_for("lj7-single");
    c.run_parrep = false;
    c.realizations = 200;
    c.threads = g_threads;
    c.seed = 8;
    const ExitExperimentResult r = run_exit_experiment(c);
    const ExitChecks e = split(r);
    v.detail << "<T>=" << e.serial_mean << " (se " << e.serial_se << ")";
    v.require(std::abs(e.serial_mean / 17.0 - 1) <= 0.25, "<T> within 25% of 17.0");
    for (const std::string label : {"C1", "C2"}) {
        const auto ci = label_interval(*e.serial, label);
        if (ci) v.detail << " P[" << label << "] CI=[" << ci->lower << ", " << ci->upper << "]";
        v.require(ci && ci->contains(0.5), "P[" + label + "] interval contains 0.5");
    }
    const std::vector<double> known{-12.53, -11.50, -11.48};
    double worst = 0;
    for (const auto& run : e.serial->runs) {
        double best = 1e300;
        for (double k : known) best = std::min(best, std::abs(run.destination_energy - k));
        worst = std::max(worst, best);
    }
    v.detail << " worst energy offset " << worst;
    v.require(worst <= 0.02, "quenched energies within 0.02");

    // Descriptors under a random rigid motion plus relabeling.
    const System sys = build_system(c);
    const State c0 = sys.partition->locate(c.x0);
    const auto obs = sys.observables(c0);
    std::mt19937_64 gen(88);
    std::normal_distribution<double> jitter(0.0, 0.1);
    std::uniform_real_distribution<double> ang(0.0, 2 * std::numbers::pi), shift(-5.0, 5.0);
    double worst_obs = 0;
    bool same_basin = true;
    for (int trial = 0; trial < 50; ++trial) {
        Position x = c.x0;
        for (double& xi : x) xi += jitter(gen);
        std::vector<std::size_t> perm(lj7::kAtoms);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), gen);
        const Position y = lj7::rigid_permute(x, ang(gen), shift(gen), shift(gen), perm);
        for (const auto& o : obs) worst_obs = std::max(worst_obs, std::abs(o.eval(x) - o.eval(y)));
        same_basin &= sys.partition->locate(x).id == sys.partition->locate(y).id;
    }
    v.detail << " invariance max |dO|=" << worst_obs;
    v.require(worst_obs < 1e-10, "observables invariant to round-off");
    v.require(same_basin, "basin label invariant");
}

void c9_pseudo(Verdict& v)
{
    ExperimentConfig c = defaults_for("dw2d-pseudoconv");
    c.replicas = 2000;
    c.t_max = 20;
    c.snapshot_times = {};
    std::size_t good = 0;
    for (std::size_t s = 0; s < kSeeds; ++s) {
        c.seed = 900 + s;
        const DiagnosticsResult r = dw2d_independent_diagnostics(c);
        const RhatSample& last = r.series.back();
        bool ok = true;
        v.detail << (s ? "; " : "") << "t=" << last.t;
        for (std::size_t j = 0; j < r.observable_names.size(); ++j) {
            const std::string& name = r.observable_names[j];
            const double x = last.rhats[j];
            v.detail << ' ' << name << '=' << x;
            ok &= name == "x" ? x > 1.3 : x < 1.15;
        }
        good += ok;
    }
    v.detail << " (" << good << "/" << kSeeds << ")";
    v.require(good >= 4, ">= 4 of 5 seeds");
}

void c10_properties(Verdict& v)
{
    // FV count conservation and containment.
    {
        ExperimentConfig c = defaults_for("per2d-single");
        c.beta = 1.0;
        const System sys = build_system(c);
        const State s = sys.partition->locate(c.x0);
        FvEnsemble ens(c.x0, 200, s, StreamSeed{10, 0});
        bool ok = true;
        for (int i = 0; i < 20000; ++i) {
            fv_step(ens, sys.dynamics, *sys.partition);
            ok &= ens.size() == 200;
            for (std::size_t k = 0; k < ens.size(); ++k) ok &= sys.partition->contains(s, ens.position(k));
        }
        v.detail << "FV kills=" << ens.branch_log().size();
        v.require(ok, "FV count and containment");
        v.require(!ens.branch_log().empty(), "FV saw kills");

        // Parent choice is uniform over survivors: bin parent indices.
        std::vector<std::size_t> counts(10, 0);
        for (const auto& b : ens.branch_log()) ++counts[b.parent * 10 / 200];
        const double p = chi_square_uniform_pvalue(counts);
        v.detail << " parent chi2 p=" << p;
        v.require(p > 0.01, "parent uniformity");
    }
    // Clock monotonicity.
    {
        ExperimentConfig c = defaults_for("per2d-multi");
        c.beta = 2.0;
        const System sys = build_system(c);
        ParRepConfig pc;
        pc.diagnostics.tol = 0.2;
        bool ok = true;
        for (std::uint64_t r = 0; r < 10; ++r) {
            const ParRepRun run = run_parrep(c.x0, sys, pc, build_stopping(c), StreamSeed{11, 0}.child(r));
            double prev = 0;
            for (const auto& ev : run.events) {
                ok &= ev.time >= prev;
                prev = ev.time;
            }
            for (const auto& rec : run.report.visits) ok &= rec.physical >= 0;
        }
        v.require(ok, "clock monotone");
    }
    // KS null calibration and Clopper-Pearson coverage.
    {
        std::mt19937_64 gen(12);
        std::uniform_real_distribution<double> u;
        std::vector<double> a(1000), b(1000);
        int rejections = 0;
        for (int t = 0; t < 1000; ++t) {
            for (double& x : a) x = u(gen);
            for (double& x : b) x = u(gen);
            rejections += !ks_two_sample(a, b, 0.05).pass;
        }
        const double rate = rejections / 1000.0;
        std::binomial_distribution<std::size_t> binom(100, 0.5);
        int hits = 0;
        for (int t = 0; t < 10000; ++t) hits += clopper_pearson(binom(gen), 100).contains(0.5);
        const double coverage = hits / 10000.0;
        v.detail << " KS null rate=" << rate << " CP coverage=" << coverage;
        v.require(std::abs(rate - 0.05) <= 0.02, "KS null calibration");
        v.require(coverage >= 0.95, "CP coverage");
    }
    // Bit-exact reproduction from a manifest.
    {
        const fs::path a = fs::temp_directory_path() / "parrep_acceptance_a";
        const fs::path b = fs::temp_directory_path() / "parrep_acceptance_b";
        fs::remove_all(a);
        fs::remove_all(b);
        ExperimentConfig c = defaults_for("per2d-single");
        c.beta = 2.5;
        c.realizations = 10;
        c.out_dir = a.string();
        c.threads = g_threads;
        const auto files = write_outputs(run_exit_experiment(c));
        ExperimentConfig again = load_config(a / "manifest.json");
        again.out_dir = b.string();
        write_outputs(run_exit_experiment(again));
        bool same = true;
        for (const auto& f : files)
            if (f.ends_with(".csv")) same &= slurp(a / f) == slurp(b / f);
        v.require(same, "manifest reproduction");
        fs::remove_all(a);
        fs::remove_all(b);
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"acceptance checks"};
    bool smoke = false;
    int only = 0;
    app.add_flag("--smoke", smoke, "fast subset");
    app.add_option("--only", only, "run one criterion");
    app.add_option("--threads", g_threads, "worker threads (0: all cores)");
    CLI11_PARSE(app, argc, argv);

    struct Criterion {
        int id;
        std::string title;
        std::function<void(Verdict&)> run;
        bool in_smoke;
    };
    const std::vector<Criterion> criteria{
        {1, "oracle sanity", c1_oracle, true},
        {2, "FV converges to the QSD", c2_fv_qsd, false},
        {3, "Gelman-Rubin behaviour", c3_rhat, false},
        {4, "QSD exit laws", c4_exit_law, false},
        {5, "discrete correction", c5_discrete, true},
        {6, "per2d single escape", [smoke](Verdict& v) { c6_per2d(v, smoke); }, true},
        {7, "entropic maze", c7_maze, false},
        {8, "LJ7", c8_lj7, false},
        {9, "pseudo-convergence", c9_pseudo, false},
        {10, "property suite", c10_properties, true},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        if (only ? c.id != only : smoke && !c.in_smoke) continue;
        Verdict v;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(v);
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail << " [exception: " << e.what() << "]";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failures += !v.pass;
        std::printf("%s C%d %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", c.id, c.title.c_str(),
                    v.detail.str().c_str(), secs);
        std::fflush(stdout);
    }
    return failures ? 1 : 0;
}
