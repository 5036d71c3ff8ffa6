#include "parrep/lj7.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/numeric/odeint.hpp>

#include "parrep/errors.hpp"

namespace parrep::lj7 {

namespace odeint = boost::numeric::odeint;

Position hexagon(double radius)
{
    Position x(2 * kAtoms, 0.0);
    for (std::size_t i = 1; i < kAtoms; ++i) {
        const double a = static_cast<double>(i - 1) * std::numbers::pi / 3.0;
        x[2 * i] = radius * std::cos(a);
        x[2 * i + 1] = radius * std::sin(a);
    }
    return x;
}

namespace {

double norm2(std::span<const double> v)
{
    double s = 0.0;
    for (double a : v) s += a * a;
    return std::sqrt(s);
}

} // namespace

QuenchResult quench(std::span<const double> x0, const Potential& pot, const QuenchOptions& opt,
                    std::vector<double>* trace)
{
    using State = std::vector<double>;
    QuenchResult res;
    res.x.assign(x0.begin(), x0.end());
    State grad(res.x.size());

    auto rel_grad = [&](const State& x, double& energy) {
        energy = pot.energy(x);
        pot.gradient(x, grad);
        return norm2(grad) / std::abs(energy);
    };

    res.relative_gradient = rel_grad(res.x, res.energy);
    if (res.relative_gradient < opt.relative_gradient_tol) {
        res.converged = true;
        return res;
    }

    std::size_t stages = 0;
    auto flow = [&](const State& x, State& dxdt, double) {
        ++stages;
        pot.gradient(x, dxdt);
        for (double& v : dxdt) v = -v;
    };
    auto stepper = odeint::make_controlled(1e-8, 1e-8, odeint::runge_kutta_dopri5<State>());

    double t = 0.0;
    double h = opt.initial_step;
    while (stages < opt.max_stages) {
        if (stepper.try_step(flow, res.x, t, h) != odeint::success) continue;
        ++res.accepted_steps;
        res.relative_gradient = rel_grad(res.x, res.energy);
        if (trace) trace->push_back(res.energy);
        if (!std::isfinite(res.energy)) break;
        if (res.relative_gradient < opt.relative_gradient_tol) {
            res.converged = true;
            break;
        }
    }
    res.stages = stages;
    return res;
}

std::vector<double> sorted_bonds(std::span<const double> x)
{
    const std::size_t n = x.size() / 2;
    std::vector<double> b;
    b.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            b.push_back(std::hypot(x[2 * i] - x[2 * j], x[2 * i + 1] - x[2 * j + 1]));
        }
    }
    std::sort(b.begin(), b.end());
    return b;
}

double bond_distance(std::span<const double> x, std::span<const double> ref)
{
    const auto b = sorted_bonds(x);
    if (b.size() != ref.size()) throw ArgumentFault("bond_distance: reference has wrong length");
    double d = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) d += std::abs(b[i] - ref[i]);
    return d;
}

std::string to_string(Conformation c)
{
    switch (c) {
    case Conformation::C0: return "C0";
    case Conformation::C1: return "C1";
    case Conformation::C2: return "C2";
    case Conformation::C3: return "C3";
    case Conformation::other: return "other";
    }
    return "other";
}

Conformation classify_energy(double e)
{
    // Bands are disjoint only up to the C1/C2 gap; pick the nearest level.
    std::size_t best = kConformationEnergies.size();
    double best_gap = kEnergyBand;
    for (std::size_t i = 0; i < kConformationEnergies.size(); ++i) {
        const double gap = std::abs(e - kConformationEnergies[i]);
        if (gap <= best_gap) {
            best_gap = gap;
            best = i;
        }
    }
    return best == kConformationEnergies.size() ? Conformation::other : static_cast<Conformation>(best);
}

Conformation classify_conformation(std::span<const double> x_min, const Potential& pot)
{
    return classify_energy(pot.energy(x_min));
}

Position rigid_permute(std::span<const double> x, double angle, double tx, double ty,
                       std::span<const std::size_t> perm)
{
    const double c = std::cos(angle), s = std::sin(angle);
    Position out(x.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        const double px = x[2 * perm[i]], py = x[2 * perm[i] + 1];
        out[2 * i] = c * px - s * py + tx;
        out[2 * i + 1] = s * px + c * py + ty;
    }
    return out;
}

Lj7BasinPartition::Lj7BasinPartition(PotentialPtr pot, QuenchOptions opt, double threshold,
                                     std::size_t check_interval)
    : pot_(std::move(pot)), opt_(opt), threshold_(threshold), interval_(std::max<std::size_t>(1, check_interval))
{
    if (pot_->dimension() != 2 * kAtoms) throw ConfigError("lj7 partition needs a 14-dimensional potential");
}

State Lj7BasinPartition::locate(std::span<const double> x) const
{
    if (x.size() != 2 * kAtoms) throw LabelingFault("lj7 partition: dimension mismatch");
    for (double v : x)
        if (!std::isfinite(v)) throw LabelingFault("lj7 partition: non-finite coordinate");
    const QuenchResult q = quench(x, *pot_, opt_);
    State s;
    s.anchor = q.x;
    s.anchor_energy = q.energy;
    s.signature = sorted_bonds(q.x);
    s.id.major = static_cast<std::int64_t>(classify_energy(q.energy));
    std::uint64_t h = 0x9E3779B97F4A7C15ULL;
    for (double b : s.signature) {
        const auto r = static_cast<std::uint64_t>(std::llround(b * 100.0));
        h = (h ^ r) * 0x100000001B3ULL;
    }
    s.id.minor = static_cast<std::int64_t>(h >> 1);
    return s;
}

bool Lj7BasinPartition::contains(const State& s, std::span<const double> x) const
{
    const QuenchResult q = quench(x, *pot_, opt_);
    return bond_distance(q.x, s.signature) <= threshold_;
}

} // namespace parrep::lj7
