#include "parrep/fleming_viot.hpp"

#include <algorithm>
#include <ostream>

#include "parrep/errors.hpp"

namespace parrep {

namespace {
constexpr std::uint64_t kInitialLineage = 0;
constexpr std::uint64_t kBranchLineage = 1;
constexpr std::uint64_t kSelectorLineage = 2;
} // namespace

FvEnsemble::FvEnsemble(std::span<const double> x0, std::size_t replicas, State state, StreamSeed seed)
    : dim_(x0.size()),
      state_(std::move(state)),
      branch_lineage_(seed.child(kBranchLineage)),
      selector_(seed.child(kSelectorLineage)),
      ws_(x0.size())
{
    if (replicas < 1) throw ArgumentFault("Fleming-Viot ensemble needs at least one replica");
    positions_.resize(replicas * dim_);
    const StreamSeed initial = seed.child(kInitialLineage);
    streams_.reserve(replicas);
    for (std::size_t k = 0; k < replicas; ++k) {
        std::copy(x0.begin(), x0.end(), positions_.begin() + static_cast<std::ptrdiff_t>(k * dim_));
        streams_.emplace_back(initial.child(k));
    }
}

void fv_step(FvEnsemble& ens, const Dynamics& dyn, const Partition& partition)
{
    const std::size_t n = ens.size();
    for (std::size_t k = 0; k < n; ++k) dyn.advance(ens.position(k), ens.streams_[k], ens.ws_);
    ++ens.steps_;

    if (ens.steps_ % partition.check_interval() != 0) return;

    ens.exited_.clear();
    ens.survivors_.clear();
    for (std::size_t k = 0; k < n; ++k) {
        if (partition.contains(ens.state_, ens.position(k))) {
            ens.survivors_.push_back(k);
        } else {
            ens.exited_.push_back(k);
        }
    }
    if (ens.exited_.empty()) return;
    if (ens.survivors_.empty())
        throw ExtinctionFault("all Fleming-Viot replicas exited in the same step", ens.steps_);

    for (std::size_t killed : ens.exited_) {
        const std::size_t parent = ens.survivors_[ens.selector_.below(ens.survivors_.size())];
        const auto src = ens.position(parent);
        std::copy(src.begin(), src.end(), ens.position(killed).begin());
        ens.streams_[killed] = NoiseStream(ens.branch_lineage_.child(ens.next_branch_stream_++));
        ens.branch_log_.push_back({ens.steps_, killed, parent});
    }
}

FvDephaser::FvDephaser(FvEnsemble& ens, const Dynamics& dyn, const Partition& partition,
                       std::vector<Observable> observables, DiagnosticsConfig cfg)
    : ens_(&ens),
      dyn_(&dyn),
      partition_(&partition),
      cfg_(cfg),
      monitor_(std::move(observables), ens.size(), ens.dimension())
{
    cfg_.validate();
}

bool FvDephaser::step()
{
    monitor_.update(ens_->positions(), dyn_->dt());
    fv_step(*ens_, *dyn_, *partition_);
    const std::uint64_t s = ens_->steps();
    checked_ = s >= cfg_.min_checks && s % cfg_.check_stride == 0;
    if (!checked_) return false;
    last_ = monitor_.rhats();
    return stationarity_check(last_, cfg_);
}

FvRunResult run_fv_until(FvEnsemble& ens, const Dynamics& dyn, const Partition& partition,
                         std::vector<Observable> observables, const DiagnosticsConfig& cfg, std::uint64_t max_steps,
                         bool keep_history)
{
    FvDephaser dephaser(ens, dyn, partition, std::move(observables), cfg);
    FvRunResult res;
    for (std::uint64_t i = 0; i < max_steps; ++i) {
        const bool done = dephaser.step();
        if (dephaser.checked_this_step() && keep_history)
            res.history.push_back({ens.time(dyn.dt()), dephaser.last_rhats()});
        if (done) {
            res.stationary = true;
            break;
        }
    }
    res.steps = ens.steps();
    res.t_phase = ens.time(dyn.dt());
    res.rhats = dephaser.last_rhats();
    return res;
}

EmpiricalEnsemble empirical_distribution(const FvEnsemble& ens)
{
    EmpiricalEnsemble out;
    const std::size_t n = ens.size();
    out.points.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto p = ens.position(k);
        out.points.emplace_back(p.begin(), p.end());
    }
    out.weights.assign(n, 1.0 / static_cast<double>(n));
    return out;
}

void write_branch_log_csv(std::ostream& os, const FvEnsemble& ens)
{
    os << "step,killed,parent\n";
    for (const auto& b : ens.branch_log()) os << b.step << ',' << b.killed << ',' << b.parent << '\n';
}

void write_snapshot_csv(std::ostream& os, const FvEnsemble& ens)
{
    os << "replica";
    for (std::size_t i = 0; i < ens.dimension(); ++i) os << ",x" << i;
    os << '\n';
    for (std::size_t k = 0; k < ens.size(); ++k) {
        os << k;
        for (double v : ens.position(k)) os << ',' << v;
        os << '\n';
    }
}

} // namespace parrep
