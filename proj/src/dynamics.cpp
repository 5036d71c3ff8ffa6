#include "parrep/dynamics.hpp"

#include <cmath>

#include "parrep/errors.hpp"

namespace parrep {

void IntegratorConfig::validate() const
{
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(beta > 0.0)) throw ConfigError("beta must be positive");
}

Position em_step(std::span<const double> x, const Potential& pot, const IntegratorConfig& cfg,
                 std::span<const double> noise)
{
    cfg.validate();
    const Position g = pot.gradient(x);
    const double scale = std::sqrt(2.0 * cfg.dt / cfg.beta);
    Position out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(g[i])) throw IntegrationFault("non-finite gradient", Position(x.begin(), x.end()));
        out[i] = x[i] - g[i] * cfg.dt + scale * noise[i];
    }
    return out;
}

Dynamics::Dynamics(PotentialPtr potential, ReflectingDomain domain, double dt, double beta)
    : potential_(std::move(potential)), domain_(std::move(domain)), dt_(dt), beta_(beta)
{
    IntegratorConfig{dt, beta}.validate();
    if (!domain_.unbounded() && potential_->dimension() != 2)
        throw ConfigError("reflecting domains are planar");
    noise_scale_ = std::sqrt(2.0 * dt_ / beta_);
}

void Dynamics::advance(std::span<double> x, NoiseStream& stream, Workspace& ws) const
{
    const std::size_t d = x.size();
    stream.fill_normal(ws.noise);
    potential_->gradient(x, ws.grad);
    if (!domain_.unbounded()) std::copy(x.begin(), x.end(), ws.prev.begin());
    for (std::size_t i = 0; i < d; ++i) {
        if (!std::isfinite(ws.grad[i])) throw IntegrationFault("non-finite gradient", Position(x.begin(), x.end()));
        x[i] += -ws.grad[i] * dt_ + noise_scale_ * ws.noise[i];
    }
    if (!domain_.unbounded()) reflect_in_place(ws.prev, x, domain_);
}

std::string to_string(Phase p)
{
    switch (p) {
    case Phase::decorrelation: return "decorrelation";
    case Phase::parallel: return "parallel";
    case Phase::serial: return "serial";
    }
    return "?";
}

ExitMonitor::ExitMonitor(const Partition& partition, const State& state)
    : partition_(&partition), state_(&state), interval_(partition.check_interval()), dim_(partition.dimension())
{
    if (interval_ > 1) window_.resize(interval_ * dim_);
}

void ExitMonitor::reset(const State& state)
{
    state_ = &state;
    count_ = 0;
}

std::optional<ExitMonitor::Exit> ExitMonitor::record(std::span<const double> x, std::uint64_t step)
{
    if (interval_ <= 1) {
        if (partition_->contains(*state_, x)) return std::nullopt;
        return Exit{step, Position(x.begin(), x.end())};
    }
    if (count_ == 0) first_step_ = step;
    std::copy(x.begin(), x.end(), window_.begin() + static_cast<std::ptrdiff_t>(count_ * dim_));
    ++count_;
    if (count_ < interval_) return std::nullopt;
    return resolve();
}

std::optional<ExitMonitor::Exit> ExitMonitor::flush()
{
    if (interval_ <= 1 || count_ == 0) return std::nullopt;
    return resolve();
}

std::optional<ExitMonitor::Exit> ExitMonitor::resolve()
{
    const std::size_t n = count_;
    count_ = 0;
    auto at = [&](std::size_t i) {
        return std::span<const double>(window_.data() + i * dim_, dim_);
    };
    if (partition_->contains(*state_, at(n - 1))) return std::nullopt;
    // Invariant: entries before lo are taken as inside, entry hi is outside.
    std::size_t lo = 0, hi = n - 1;
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (partition_->contains(*state_, at(mid))) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    const auto x = at(hi);
    return Exit{first_step_ + hi, Position(x.begin(), x.end())};
}

ExitOutcome run_until_exit(std::span<const double> x0, const Dynamics& dyn, StreamSeed seed,
                           const Partition& partition, std::uint64_t max_steps)
{
    const State start = partition.locate(x0);
    NoiseStream stream(seed);
    Dynamics::Workspace ws(dyn.dimension());
    ExitMonitor monitor(partition, start);
    Position x(x0.begin(), x0.end());

    auto finish = [&](const ExitMonitor::Exit& e) {
        ExitOutcome out;
        out.exited = true;
        out.steps = e.step;
        out.position = e.position;
        out.event = ExitEvent{static_cast<double>(e.step) * dyn.dt(), e.position, start.id,
                              partition.state_of(e.position), Phase::serial};
        return out;
    };

    for (std::uint64_t step = 1; step <= max_steps; ++step) {
        dyn.advance(x, stream, ws);
        if (auto e = monitor.record(x, step)) return finish(*e);
    }
    if (auto e = monitor.flush()) return finish(*e);
    ExitOutcome out;
    out.steps = max_steps;
    out.position = x;
    return out;
}

} // namespace parrep
