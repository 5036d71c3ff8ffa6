#include "parrep/parrep.hpp"

#include <algorithm>

#include "parrep/errors.hpp"

namespace parrep {

namespace {
// Child indices of a visit's stream lineage.
constexpr std::uint64_t kReferenceStream = 0;
constexpr std::uint64_t kEnsembleStream = 1;
constexpr std::uint64_t kParallelStream = 2;
constexpr std::uint64_t kRejectionStream = 3;
} // namespace

void SimulationClock::advance(double dt)
{
    if (!(dt >= 0.0)) throw PreconditionViolation("simulation clock cannot move backwards");
    t_ += dt;
}

void ParRepConfig::validate() const
{
    if (replicas < 2) throw ConfigError("ParRep needs at least two replicas");
    diagnostics.validate();
    if (dephasing == DephasingMode::rejection && !(rejection_t_phase > 0.0))
        throw ConfigError("rejection dephasing needs a positive t_phase");
}

bool StoppingRule::done(const StateId& now, double t, std::size_t visits) const
{
    if (t >= time_cap || visits >= max_visits) return true;
    switch (kind) {
    case Kind::exit_state: return true;
    case Kind::reach_state: return now == target;
    case Kind::leave_region: return !in_region(now);
    case Kind::time_cap: return false;
    }
    return true;
}

StoppingRule StoppingRule::reach(StateId target)
{
    StoppingRule r;
    r.kind = Kind::reach_state;
    r.target = target;
    return r;
}

StoppingRule StoppingRule::leave(std::function<bool(const StateId&)> in_region)
{
    StoppingRule r;
    r.kind = Kind::leave_region;
    r.in_region = std::move(in_region);
    return r;
}

DephaseOutcome decorrelation_dephasing_step(std::span<const double> x_ref, const State& state, const System& sys,
                                            const ParRepConfig& cfg, StreamSeed seed, SimulationClock& clock)
{
    cfg.validate();
    const Dynamics& dyn = sys.dynamics;
    const Partition& part = *sys.partition;

    NoiseStream ref_stream(seed.child(kReferenceStream));
    Dynamics::Workspace ws(dyn.dimension());
    ExitMonitor monitor(part, state);
    Position x(x_ref.begin(), x_ref.end());

    FvEnsemble ens(x_ref, cfg.replicas, state, seed.child(kEnsembleStream));
    std::optional<FvDephaser> dephaser;
    dephaser.emplace(ens, dyn, part, sys.observables(state), cfg.diagnostics);
    bool extinct = false;
    double fv_time = 0.0;

    auto ref_exit = [&](const ExitMonitor::Exit& e) {
        RefExited out;
        out.steps = e.step;
        out.extinction = extinct;
        out.fv_time = extinct ? fv_time : ens.time(dyn.dt());
        clock.advance(static_cast<double>(e.step) * dyn.dt());
        out.event = ExitEvent{clock.now(), e.position, state.id, part.state_of(e.position), Phase::decorrelation};
        return out;
    };

    for (std::uint64_t step = 1; step <= cfg.max_steps_per_visit; ++step) {
        dyn.advance(x, ref_stream, ws);
        if (auto e = monitor.record(x, step)) return ref_exit(*e);
        if (extinct) continue;
        bool stationary = false;
        try {
            stationary = dephaser->step();
        } catch (const ExtinctionFault&) {
            extinct = true;
            fv_time = ens.time(dyn.dt());
            dephaser.reset();
            continue;
        }
        if (stationary) {
            // The reference must not have left during a partially checked window.
            if (auto e = monitor.flush()) return ref_exit(*e);
            Dephased out;
            out.t_corr = ens.time(dyn.dt());
            out.positions.assign(ens.positions().begin(), ens.positions().end());
            clock.advance(out.t_corr);
            return out;
        }
    }
    if (auto e = monitor.flush()) return ref_exit(*e);
    throw IntegrationFault("reference trajectory hit the per-visit step cap", x);
}

std::optional<std::size_t> select_winner(std::span<const std::optional<std::uint64_t>> exit_steps)
{
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < exit_steps.size(); ++k) {
        if (!exit_steps[k]) continue;
        if (!best || *exit_steps[k] < *exit_steps[*best]) best = k;
    }
    return best;
}

double parallel_credit(std::uint64_t exit_step, std::size_t winner, std::size_t replicas, double dt)
{
    if (exit_step < 1 || winner >= replicas) throw ArgumentFault("parallel_credit: invalid winner");
    const auto n = static_cast<std::uint64_t>(replicas);
    return dt * static_cast<double>(n * (exit_step - 1) + winner + 1);
}

std::optional<ParallelOutcome> parallel_step(std::span<const double> starts, const State& state, const System& sys,
                                             const ParRepConfig& cfg, StreamSeed seed, SimulationClock& clock)
{
    const Dynamics& dyn = sys.dynamics;
    const Partition& part = *sys.partition;
    const std::size_t d = dyn.dimension();
    const std::size_t n = starts.size() / d;
    if (n == 0 || n * d != starts.size()) throw ArgumentFault("parallel_step: bad ensemble size");

    std::vector<double> x(starts.begin(), starts.end());
    std::vector<NoiseStream> streams;
    std::vector<ExitMonitor> monitors;
    streams.reserve(n);
    monitors.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        streams.emplace_back(seed.child(k));
        monitors.emplace_back(part, state);
    }
    Dynamics::Workspace ws(d);
    std::vector<std::optional<std::uint64_t>> exit_steps(n);
    std::vector<Position> exit_points(n);

    auto finish = [&](std::size_t winner) {
        ParallelOutcome out;
        out.winner = winner;
        out.exit_step = *exit_steps[winner];
        out.credited = parallel_credit(out.exit_step, winner, n, dyn.dt());
        clock.advance(out.credited);
        const Position& p = exit_points[winner];
        out.event = ExitEvent{clock.now(), p, state.id, part.state_of(p), Phase::parallel};
        return out;
    };

    for (std::uint64_t step = 1; step <= cfg.max_steps_per_visit; ++step) {
        bool any = false;
        for (std::size_t k = 0; k < n; ++k) {
            std::span<double> xk(x.data() + k * d, d);
            dyn.advance(xk, streams[k], ws);
            if (auto e = monitors[k].record(xk, step)) {
                exit_steps[k] = e->step;
                exit_points[k] = std::move(e->position);
                any = true;
            }
        }
        if (any) return finish(*select_winner(exit_steps));
    }
    bool any = false;
    for (std::size_t k = 0; k < n; ++k) {
        if (auto e = monitors[k].flush()) {
            exit_steps[k] = e->step;
            exit_points[k] = std::move(e->position);
            any = true;
        }
    }
    if (any) return finish(*select_winner(exit_steps));
    return std::nullopt;
}

RejectionResult rejection_dephase(std::span<const double> x_ref, const State& state, double t_phase,
                                  std::size_t replicas, const System& sys, StreamSeed seed, std::size_t max_restarts)
{
    if (!(t_phase > 0.0)) throw PreconditionViolation("rejection_dephase: t_phase must be positive");
    const Dynamics& dyn = sys.dynamics;
    const Partition& part = *sys.partition;
    const std::size_t d = dyn.dimension();
    const auto steps = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(t_phase / dyn.dt())));

    RejectionResult res;
    res.positions.resize(replicas * d);
    res.restarts.assign(replicas, 0);
    Dynamics::Workspace ws(d);
    Position x(d);
    for (std::size_t k = 0; k < replicas; ++k) {
        NoiseStream stream(seed.child(k));
        std::uint64_t used = 0;
        bool accepted = false;
        while (!accepted) {
            std::copy(x_ref.begin(), x_ref.end(), x.begin());
            ExitMonitor monitor(part, state);
            bool left = false;
            for (std::uint64_t s = 1; s <= steps && !left; ++s) {
                dyn.advance(x, stream, ws);
                ++used;
                left = monitor.record(x, s).has_value();
            }
            if (!left) left = monitor.flush().has_value();
            if (!left) {
                accepted = true;
            } else if (++res.restarts[k] > max_restarts) {
                res.longest_steps = std::max(res.longest_steps, used);
                return res;
            }
        }
        std::copy(x.begin(), x.end(), res.positions.begin() + static_cast<std::ptrdiff_t>(k * d));
        res.longest_steps = std::max(res.longest_steps, used);
    }
    res.success = true;
    return res;
}

ParRepRun run_parrep(std::span<const double> x0, const System& sys, const ParRepConfig& cfg,
                     const StoppingRule& stop, StreamSeed seed)
{
    cfg.validate();
    const Partition& part = *sys.partition;
    const double dt = sys.dynamics.dt();
    ParRepRun run;
    SimulationClock clock;
    Position x(x0.begin(), x0.end());
    State state = part.locate(x);

    for (std::uint64_t visit = 0;; ++visit) {
        const StreamSeed vs = seed.child(visit);
        const double start = clock.now();
        VisitRecord rec;
        rec.state = state.id;
        ExitEvent event;

        if (cfg.dephasing == DephasingMode::fleming_viot) {
            DephaseOutcome out = decorrelation_dephasing_step(x, state, sys, cfg, vs, clock);
            if (auto* ref = std::get_if<RefExited>(&out)) {
                rec.extinction = ref->extinction;
                rec.exit_phase = Phase::decorrelation;
                rec.computational = clock.now() - start;
                event = std::move(ref->event);
            } else {
                auto& dep = std::get<Dephased>(out);
                rec.dephased = true;
                rec.t_phase = dep.t_corr;
                auto par = parallel_step(dep.positions, state, sys, cfg, vs.child(kParallelStream), clock);
                if (!par) {
                    run.report.completed = false;
                    run.report.visits.push_back(rec);
                    break;
                }
                rec.exit_phase = Phase::parallel;
                rec.computational = dep.t_corr + static_cast<double>(par->exit_step) * dt;
                event = std::move(par->event);
            }
        } else {
            // Original scheme: the reference decorrelates alone for a fixed time,
            // then samples are dephased by rejection before the parallel step.
            ParRepConfig ref_cfg = cfg;
            ref_cfg.max_steps_per_visit = static_cast<std::uint64_t>(std::llround(cfg.rejection_t_phase / dt));
            auto ref = run_until_exit(x, sys.dynamics, vs.child(kReferenceStream), part, ref_cfg.max_steps_per_visit);
            if (ref.exited) {
                clock.advance(static_cast<double>(ref.steps) * dt);
                rec.exit_phase = Phase::decorrelation;
                rec.computational = clock.now() - start;
                event = *ref.event;
                event.time = clock.now();
                event.phase = Phase::decorrelation;
            } else {
                const double t_corr = static_cast<double>(ref.steps) * dt;
                clock.advance(t_corr);
                auto dep = rejection_dephase(x, state, cfg.rejection_t_phase, cfg.replicas, sys,
                                             vs.child(kRejectionStream), cfg.rejection_max_restarts);
                auto par = dep.success ? parallel_step(dep.positions, state, sys, cfg, vs.child(kParallelStream), clock)
                                       : std::nullopt;
                if (!par) {
                    run.report.completed = false;
                    run.report.visits.push_back(rec);
                    break;
                }
                rec.dephased = true;
                rec.t_phase = cfg.rejection_t_phase;
                rec.exit_phase = Phase::parallel;
                rec.computational = t_corr + static_cast<double>(dep.longest_steps + par->exit_step) * dt;
                event = std::move(par->event);
            }
        }

        rec.physical = clock.now() - start;
        run.report.visits.push_back(rec);
        x = event.position;
        state = part.locate(x);
        run.events.push_back(std::move(event));
        if (stop.done(state.id, clock.now(), run.report.visits.size())) break;
    }

    run.report.physical_time = clock.now();
    for (const auto& v : run.report.visits) run.report.computational_time += v.computational;
    run.report.speedup = compute_speedup(run.report.visits);
    return run;
}

SerialRun run_serial(std::span<const double> x0, const System& sys, const StoppingRule& stop, StreamSeed seed,
                     std::uint64_t max_steps)
{
    const Dynamics& dyn = sys.dynamics;
    const Partition& part = *sys.partition;
    SerialRun run;
    Position x(x0.begin(), x0.end());
    State state = part.locate(x);
    NoiseStream stream(seed.child(kReferenceStream));
    Dynamics::Workspace ws(dyn.dimension());
    ExitMonitor monitor(part, state);

    auto on_exit = [&](const ExitMonitor::Exit& e) {
        const State next = part.locate(e.position);
        run.events.push_back({static_cast<double>(e.step) * dyn.dt(), e.position, state.id, next.id, Phase::serial});
        // Continue from the exit point; steps already taken past it in a
        // window are discarded so the trajectory stays a single path.
        x = e.position;
        state = next;
        monitor.reset(state);
        return stop.done(state.id, static_cast<double>(e.step) * dyn.dt(), run.events.size());
    };

    for (std::uint64_t step = 1; step <= max_steps; ++step) {
        dyn.advance(x, stream, ws);
        if (auto e = monitor.record(x, step)) {
            if (on_exit(*e)) return run;
            step = e->step;
        }
    }
    if (auto e = monitor.flush())
        if (on_exit(*e)) return run;
    run.completed = false;
    return run;
}

double compute_speedup(std::span<const VisitRecord> visits)
{
    double phys = 0.0, comp = 0.0;
    for (const auto& v : visits) {
        phys += v.physical;
        comp += v.computational;
    }
    return comp > 0.0 ? phys / comp : 0.0;
}

} // namespace parrep
