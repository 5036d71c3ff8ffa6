#include "parrep/diagnostics.hpp"

#include <cmath>
#include <limits>

#include "parrep/errors.hpp"

namespace parrep {

void DiagnosticsConfig::validate() const
{
    if (!(tol > 0.0)) throw ConfigError("TOL must be positive");
    if (check_stride < 1) throw ConfigError("check_stride must be at least 1");
}

void GrAccumulator::update(std::span<const double> values, double dt)
{
    for (std::size_t k = 0; k < sum_.size(); ++k) {
        const double v = values[k];
        if (!std::isfinite(v)) throw DiagnosticsFault("non-finite observable value on replica " + std::to_string(k));
        sum_[k] += v * dt;
        sum_sq_[k] += v * v * dt;
    }
    t_ += dt;
}

namespace {

struct Spread {
    double between; // (1/N) sum_k (mean_k - mean_all)^2
    double within;  // (1/N) sum_k (mean_sq_k - mean_k^2)
};

Spread spread(const GrAccumulator& acc)
{
    if (!(acc.time() > 0.0)) throw PreconditionViolation("compute_rhat: no elapsed time");
    const std::size_t n = acc.replicas();
    const double inv_t = 1.0 / acc.time();
    double grand = 0.0;
    for (std::size_t k = 0; k < n; ++k) grand += acc.sum(k) * inv_t;
    grand /= static_cast<double>(n);
    double between = 0.0, within = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double m = acc.sum(k) * inv_t;
        between += (m - grand) * (m - grand);
        // The expanded form cancels badly for (nearly) constant trajectories;
        // anything at round-off level of the second moment counts as zero.
        const double second = acc.sum_sq(k) * inv_t;
        const double var = second - m * m;
        if (var > 64.0 * std::numeric_limits<double>::epsilon() * second) within += var;
    }
    return {between / static_cast<double>(n), within / static_cast<double>(n)};
}

} // namespace

RhatParts rhat_parts(const GrAccumulator& acc)
{
    const Spread s = spread(acc);
    return {s.within + s.between, s.within};
}

double compute_rhat(const GrAccumulator& acc)
{
    const Spread s = spread(acc);
    if (s.within == 0.0) return s.between == 0.0 ? 1.0 : kRhatInfinite;
    return 1.0 + s.between / s.within;
}

bool stationarity_check(std::span<const double> rhats, const DiagnosticsConfig& cfg)
{
    for (double r : rhats)
        if (!(r < 1.0 + cfg.tol)) return false;
    return true;
}

RhatMonitor::RhatMonitor(std::vector<Observable> observables, std::size_t replicas, std::size_t dim)
    : observables_(std::move(observables)), dim_(dim), scratch_(replicas)
{
    accs_.reserve(observables_.size());
    for (std::size_t j = 0; j < observables_.size(); ++j) accs_.emplace_back(replicas);
}

void RhatMonitor::update(std::span<const double> positions, double dt)
{
    const std::size_t n = scratch_.size();
    for (std::size_t j = 0; j < observables_.size(); ++j) {
        for (std::size_t k = 0; k < n; ++k) {
            const double v = observables_[j].eval(positions.subspan(k * dim_, dim_));
            if (!std::isfinite(v))
                throw DiagnosticsFault("observable '" + observables_[j].name + "' non-finite on replica " +
                                       std::to_string(k));
            scratch_[k] = v;
        }
        accs_[j].update(scratch_, dt);
    }
}

std::vector<double> RhatMonitor::rhats() const
{
    std::vector<double> r;
    r.reserve(accs_.size());
    for (const auto& a : accs_) r.push_back(compute_rhat(a));
    return r;
}

Observable coordinate_observable(std::size_t axis, std::string name)
{
    return {std::move(name), [axis](std::span<const double> x) { return x[axis]; }};
}

Observable energy_observable(PotentialPtr pot)
{
    return {"V", [pot = std::move(pot)](std::span<const double> x) { return pot->energy(x); }};
}

Observable distance_observable(Position ref, std::string name)
{
    return {std::move(name), [ref = std::move(ref)](std::span<const double> x) {
                double s = 0.0;
                for (std::size_t i = 0; i < ref.size(); ++i) s += (x[i] - ref[i]) * (x[i] - ref[i]);
                return std::sqrt(s);
            }};
}

} // namespace parrep
