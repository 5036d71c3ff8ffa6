#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "parrep/domain.hpp"
#include "parrep/partition.hpp"
#include "parrep/potential.hpp"
#include "parrep/rng.hpp"

namespace parrep {

struct IntegratorConfig {
    double dt = 1e-4;
    double beta = 1.0;
    std::uint64_t rng_seed = 0;
    std::uint64_t stream_id = 0;

    void validate() const;
};

// Euler-Maruyama update x - grad V(x) dt + sqrt(2 dt / beta) * noise.
// Throws IntegrationFault on a non-finite gradient.
Position em_step(std::span<const double> x, const Potential& pot, const IntegratorConfig& cfg,
                 std::span<const double> noise);

// Potential, optional reflecting walls and step parameters. Advances
// trajectories in place given a noise stream; holds no per-trajectory state.
class Dynamics {
public:
    Dynamics(PotentialPtr potential, ReflectingDomain domain, double dt, double beta);

    std::size_t dimension() const { return potential_->dimension(); }
    const Potential& potential() const { return *potential_; }
    const PotentialPtr& potential_ptr() const { return potential_; }
    const ReflectingDomain& domain() const { return domain_; }
    double dt() const { return dt_; }
    double beta() const { return beta_; }

    struct Workspace {
        std::vector<double> noise, grad, prev;
        explicit Workspace(std::size_t dim) : noise(dim), grad(dim), prev(dim) {}
    };

    void advance(std::span<double> x, NoiseStream& stream, Workspace& ws) const;

private:
    PotentialPtr potential_;
    ReflectingDomain domain_;
    double dt_;
    double beta_;
    double noise_scale_;
};

enum class Phase { decorrelation, parallel, serial };
std::string to_string(Phase p);

struct ExitEvent {
    double time = 0.0;
    Position position;
    StateId source;
    StateId destination;
    Phase phase = Phase::serial;
};

// Watches one trajectory for leaving a state. Membership is tested every
// `check_interval` steps; when a window ends outside, the first step whose
// position lies outside is found by bisection over the stored window.
class ExitMonitor {
public:
    ExitMonitor(const Partition& partition, const State& state);

    struct Exit {
        std::uint64_t step;
        Position position;
    };

    // Report the position reached after `step` steps (steps are consecutive).
    std::optional<Exit> record(std::span<const double> x, std::uint64_t step);
    // Test the pending partial window now.
    std::optional<Exit> flush();
    void reset(const State& state);

private:
    std::optional<Exit> resolve();

    const Partition* partition_;
    const State* state_;
    std::size_t interval_;
    std::size_t dim_;
    std::vector<double> window_;
    std::uint64_t first_step_ = 0;
    std::size_t count_ = 0;
};

struct ExitOutcome {
    bool exited = false;
    std::uint64_t steps = 0;
    Position position;                // exit position, or the position at max_steps
    std::optional<ExitEvent> event;   // present iff exited
};

// Integrates from x0 until the trajectory first leaves the state containing
// x0. Reaching max_steps is a normal outcome with exited == false.
ExitOutcome run_until_exit(std::span<const double> x0, const Dynamics& dyn, StreamSeed seed,
                           const Partition& partition, std::uint64_t max_steps);

} // namespace parrep
