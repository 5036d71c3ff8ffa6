#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "parrep/diagnostics.hpp"
#include "parrep/dynamics.hpp"
#include "parrep/fleming_viot.hpp"
#include "parrep/partition.hpp"
#include "parrep/rng.hpp"

namespace parrep {

// Everything that defines a test problem: dynamics, states, and the
// observables used to judge stationarity inside a state.
struct System {
    Dynamics dynamics;
    PartitionPtr partition;
    ObservableFactory observables;
};

class SimulationClock {
public:
    double now() const { return t_; }
    // Throws PreconditionViolation on a negative increment.
    void advance(double dt);

private:
    double t_ = 0.0;
};

enum class DephasingMode { fleming_viot, rejection };

struct ParRepConfig {
    std::size_t replicas = 100;
    DiagnosticsConfig diagnostics;
    DephasingMode dephasing = DephasingMode::fleming_viot;
    double rejection_t_phase = 0.0;           // fixed dephasing time, rejection mode only
    std::size_t rejection_max_restarts = 1000; // per sample
    std::uint64_t max_steps_per_visit = std::numeric_limits<std::uint64_t>::max();

    void validate() const;
};

struct StoppingRule {
    enum class Kind { exit_state, reach_state, leave_region, time_cap };
    Kind kind = Kind::exit_state;
    StateId target;
    std::function<bool(const StateId&)> in_region;
    double time_cap = std::numeric_limits<double>::infinity();
    std::size_t max_visits = 1'000'000;

    // Whether the run is over after arriving in `now` at simulation time t.
    bool done(const StateId& now, double t, std::size_t visits) const;

    static StoppingRule exit_state() { return {}; }
    static StoppingRule reach(StateId target);
    static StoppingRule leave(std::function<bool(const StateId&)> in_region);
};

// ---- decorrelation / dephasing ----

struct Dephased {
    std::vector<double> positions; // replicas * d, the Fleming-Viot ensemble at t_corr
    double t_corr = 0.0;
};

struct RefExited {
    ExitEvent event;
    std::uint64_t steps = 0; // reference steps taken in this state
    bool extinction = false; // the Fleming-Viot ensemble died out first
    double fv_time = 0.0;    // Fleming-Viot time reached before it was discarded
};

using DephaseOutcome = std::variant<Dephased, RefExited>;

// Runs the reference trajectory and a Fleming-Viot ensemble started from the
// same point in lockstep. Advances the clock by t_corr on success or by the
// reference exit time otherwise; event times are absolute clock values.
DephaseOutcome decorrelation_dephasing_step(std::span<const double> x_ref, const State& state, const System& sys,
                                            const ParRepConfig& cfg, StreamSeed seed, SimulationClock& clock);

// ---- parallel step ----

// Lexicographic (step, replica) winner among first exit steps; replicas that
// never exited carry nullopt. Returns the 0-based winner, or nullopt.
std::optional<std::size_t> select_winner(std::span<const std::optional<std::uint64_t>> exit_steps);

// Physical time credited when replica `winner` (0-based) of N is the first to
// leave, at step K: dt * (N (K - 1) + winner + 1). Equals dt*K when N = 1.
double parallel_credit(std::uint64_t exit_step, std::size_t winner, std::size_t replicas, double dt);

struct ParallelOutcome {
    ExitEvent event;
    std::size_t winner = 0;
    std::uint64_t exit_step = 0;
    double credited = 0.0;
};

// Independent copies started from `starts` race to leave the state. Returns
// nullopt if nobody leaves within cfg.max_steps_per_visit steps.
std::optional<ParallelOutcome> parallel_step(std::span<const double> starts, const State& state, const System& sys,
                                             const ParRepConfig& cfg, StreamSeed seed, SimulationClock& clock);

// ---- original rejection dephasing ----

struct RejectionResult {
    bool success = false;
    std::vector<double> positions;        // replicas * d when successful
    std::vector<std::size_t> restarts;    // per sample
    std::uint64_t longest_steps = 0;      // most steps any sample needed, restarts included
};

// Each sample restarts from x_ref until it survives t_phase inside the state.
RejectionResult rejection_dephase(std::span<const double> x_ref, const State& state, double t_phase,
                                  std::size_t replicas, const System& sys, StreamSeed seed,
                                  std::size_t max_restarts = 1000);

// ---- full driver ----

struct VisitRecord {
    StateId state;
    bool dephased = false;
    bool extinction = false;
    double t_phase = 0.0;       // valid when dephased
    double physical = 0.0;      // clock advance during the visit
    double computational = 0.0; // modeled wall time of the visit
    Phase exit_phase = Phase::decorrelation;
};

struct ParRepReport {
    std::vector<VisitRecord> visits;
    double physical_time = 0.0;
    double computational_time = 0.0;
    double speedup = 0.0;
    bool completed = true; // false if a visit hit its step cap
};

struct ParRepRun {
    std::vector<ExitEvent> events;
    ParRepReport report;
};

ParRepRun run_parrep(std::span<const double> x0, const System& sys, const ParRepConfig& cfg,
                     const StoppingRule& stop, StreamSeed seed);

struct SerialRun {
    std::vector<ExitEvent> events;
    bool completed = true;
};

SerialRun run_serial(std::span<const double> x0, const System& sys, const StoppingRule& stop, StreamSeed seed,
                     std::uint64_t max_steps = std::numeric_limits<std::uint64_t>::max());

// Total physical time over total modeled computational time. A visit that
// ends in the decorrelation phase contributes equally to both.
double compute_speedup(std::span<const VisitRecord> visits);

} // namespace parrep
