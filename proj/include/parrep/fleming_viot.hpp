#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "parrep/diagnostics.hpp"
#include "parrep/dynamics.hpp"
#include "parrep/partition.hpp"
#include "parrep/rng.hpp"

namespace parrep {

struct BranchRecord {
    std::uint64_t step;
    std::size_t killed;
    std::size_t parent;
};

// N replicas confined to one state by killing and branching. Positions are
// stored flat (replica k at [k*d, (k+1)*d)).
class FvEnsemble {
public:
    // All replicas start at x0. Replica k initially draws from seed.child(k);
    // branched slots receive streams derived from a separate lineage.
    FvEnsemble(std::span<const double> x0, std::size_t replicas, State state, StreamSeed seed);

    std::size_t size() const { return streams_.size(); }
    std::size_t dimension() const { return dim_; }
    const State& state() const { return state_; }
    std::span<const double> positions() const { return positions_; }
    std::span<double> positions() { return positions_; }
    std::span<const double> position(std::size_t k) const { return {positions_.data() + k * dim_, dim_}; }
    std::span<double> position(std::size_t k) { return {positions_.data() + k * dim_, dim_}; }
    std::uint64_t steps() const { return steps_; }
    double time(double dt) const { return static_cast<double>(steps_) * dt; }
    const std::vector<BranchRecord>& branch_log() const { return branch_log_; }

private:
    friend void fv_step(FvEnsemble&, const Dynamics&, const Partition&);

    std::size_t dim_;
    State state_;
    std::vector<double> positions_;
    std::vector<NoiseStream> streams_;
    StreamSeed branch_lineage_;
    std::uint64_t next_branch_stream_ = 0;
    NoiseStream selector_;
    std::uint64_t steps_ = 0;
    std::vector<BranchRecord> branch_log_;
    std::vector<std::size_t> exited_, survivors_;
    Dynamics::Workspace ws_;
};

// Advances every replica one step, then replaces each replica that left the
// state (in increasing index order) by a copy of a uniformly chosen replica
// that did not leave this step. Throws ExtinctionFault if all replicas left.
// Membership is tested only on steps that are multiples of the partition's
// check interval.
void fv_step(FvEnsemble& ens, const Dynamics& dyn, const Partition& partition);

struct RhatSample {
    double t;
    std::vector<double> rhats;
};

// Lockstep Fleming-Viot evolution with Gelman-Rubin accumulation. Each step
// first accumulates observables at the current positions, then moves the
// ensemble; the criterion is evaluated every check_stride steps once
// min_checks steps have elapsed.
class FvDephaser {
public:
    FvDephaser(FvEnsemble& ens, const Dynamics& dyn, const Partition& partition, std::vector<Observable> observables,
               DiagnosticsConfig cfg);

    // Returns true when the stationarity criterion holds after this step.
    bool step();

    const RhatMonitor& monitor() const { return monitor_; }
    const std::vector<double>& last_rhats() const { return last_; }
    bool checked_this_step() const { return checked_; }
    FvEnsemble& ensemble() { return *ens_; }

private:
    FvEnsemble* ens_;
    const Dynamics* dyn_;
    const Partition* partition_;
    DiagnosticsConfig cfg_;
    RhatMonitor monitor_;
    std::vector<double> last_;
    bool checked_ = false;
};

struct FvRunResult {
    bool stationary = false;   // false: the step cap was reached first
    double t_phase = 0.0;      // time of the stop
    std::uint64_t steps = 0;
    std::vector<double> rhats; // at the last check
    std::vector<RhatSample> history; // every check, when requested
};

FvRunResult run_fv_until(FvEnsemble& ens, const Dynamics& dyn, const Partition& partition,
                         std::vector<Observable> observables, const DiagnosticsConfig& cfg, std::uint64_t max_steps,
                         bool keep_history = false);

struct EmpiricalEnsemble {
    std::vector<Position> points;
    std::vector<double> weights;
};

EmpiricalEnsemble empirical_distribution(const FvEnsemble& ens);

void write_branch_log_csv(std::ostream& os, const FvEnsemble& ens);
void write_snapshot_csv(std::ostream& os, const FvEnsemble& ens);

} // namespace parrep
