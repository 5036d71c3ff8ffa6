#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "parrep/partition.hpp"
#include "parrep/potential.hpp"

namespace parrep {

struct Observable {
    std::string name;
    std::function<double(std::span<const double>)> eval;
};

// Builds the observables for one state (they may depend on its anchor).
using ObservableFactory = std::function<std::vector<Observable>(const State&)>;

struct DiagnosticsConfig {
    double tol = 0.1;
    std::uint64_t check_stride = 10;
    std::uint64_t min_checks = 10; // steps that must elapse before the criterion may fire

    void validate() const;
};

// Time integrals of one observable along N trajectories, left-Riemann in dt.
class GrAccumulator {
public:
    explicit GrAccumulator(std::size_t replicas) : sum_(replicas, 0.0), sum_sq_(replicas, 0.0) {}

    std::size_t replicas() const { return sum_.size(); }
    double time() const { return t_; }
    double sum(std::size_t k) const { return sum_[k]; }
    double sum_sq(std::size_t k) const { return sum_sq_[k]; }

    // values[k] = O(X^k_t) at the current step.
    void update(std::span<const double> values, double dt);

private:
    friend class RhatMonitor;
    std::vector<double> sum_, sum_sq_;
    double t_ = 0.0;
};

inline constexpr double kRhatInfinite = std::numeric_limits<double>::infinity();

// Gelman-Rubin ratio of pooled to within-trajectory variance. Computed as
// 1 + between / within so the result never drops below one from rounding.
// Returns 1 when every trajectory is the same constant, +inf when
// trajectories are constant but distinct. Throws PreconditionViolation at t = 0.
double compute_rhat(const GrAccumulator& acc);

struct RhatParts {
    double numerator;   // (1/N) sum_k (1/t) int (O - mean_all)^2
    double denominator; // (1/N) sum_k (1/t) int (O - mean_k)^2
};
RhatParts rhat_parts(const GrAccumulator& acc);

bool stationarity_check(std::span<const double> rhats, const DiagnosticsConfig& cfg);

// One accumulator per observable, fed from a flat ensemble of positions.
class RhatMonitor {
public:
    RhatMonitor(std::vector<Observable> observables, std::size_t replicas, std::size_t dim);

    // positions holds replicas * dim coordinates.
    void update(std::span<const double> positions, double dt);
    std::vector<double> rhats() const;
    double time() const { return accs_.empty() ? 0.0 : accs_.front().time(); }
    const std::vector<Observable>& observables() const { return observables_; }
    const GrAccumulator& accumulator(std::size_t j) const { return accs_[j]; }

private:
    std::vector<Observable> observables_;
    std::vector<GrAccumulator> accs_;
    std::size_t dim_;
    std::vector<double> scratch_;
};

// Common observable builders.
Observable coordinate_observable(std::size_t axis, std::string name);
Observable energy_observable(PotentialPtr pot);
Observable distance_observable(Position ref, std::string name = "dist_ref");

} // namespace parrep
