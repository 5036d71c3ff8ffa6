#include "parrep/potential.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace parrep {

using std::numbers::pi;

void FreePotential::gradient(std::span<const double>, std::span<double> grad) const
{
    std::fill(grad.begin(), grad.end(), 0.0);
}

double QuadraticPotential::energy(std::span<const double> x) const
{
    double s = 0.0;
    for (double v : x) s += v * v;
    return 0.5 * k_ * s;
}

void QuadraticPotential::gradient(std::span<const double> x, std::span<double> grad) const
{
    for (std::size_t i = 0; i < dim_; ++i) grad[i] = k_ * x[i];
}

double CosinePotential::energy(std::span<const double> x) const
{
    double s = 0.0;
    for (double v : x) s -= std::cos(pi * v);
    return a_ * s;
}

void CosinePotential::gradient(std::span<const double> x, std::span<double> grad) const
{
    for (std::size_t i = 0; i < dim_; ++i) grad[i] = a_ * pi * std::sin(pi * x[i]);
}

double DoubleWell2D::energy(std::span<const double> p) const
{
    const double x = p[0], y = p[1];
    const double r2 = x * x + y * y;
    const double a = 1.0 - r2;
    const double b = x * x - 2.0;
    const double c = (x + y) * (x + y) - 1.0;
    const double d = (x - y) * (x - y) - 1.0;
    return (4.0 * a * a + 2.0 * b * b + c * c + d * d) / 6.0;
}

void DoubleWell2D::gradient(std::span<const double> p, std::span<double> g) const
{
    const double x = p[0], y = p[1];
    const double a = 1.0 - x * x - y * y;
    const double b = x * x - 2.0;
    const double c = (x + y) * (x + y) - 1.0;
    const double d = (x - y) * (x - y) - 1.0;
    // d/dx: 8a(-2x) + 4b(2x) + 2c*2(x+y) + 2d*2(x-y)
    g[0] = (-16.0 * a * x + 8.0 * b * x + 4.0 * c * (x + y) + 4.0 * d * (x - y)) / 6.0;
    g[1] = (-16.0 * a * y + 4.0 * c * (x + y) - 4.0 * d * (x - y)) / 6.0;
}

double LennardJones2D::energy(std::span<const double> x) const
{
    double e = 0.0;
    for (std::size_t i = 0; i < atoms_; ++i) {
        for (std::size_t j = i + 1; j < atoms_; ++j) {
            const double dx = x[2 * i] - x[2 * j];
            const double dy = x[2 * i + 1] - x[2 * j + 1];
            const double inv2 = 1.0 / (dx * dx + dy * dy);
            const double inv6 = inv2 * inv2 * inv2;
            e += inv6 * inv6 - 2.0 * inv6;
        }
    }
    return e;
}

void LennardJones2D::gradient(std::span<const double> x, std::span<double> g) const
{
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t i = 0; i < atoms_; ++i) {
        for (std::size_t j = i + 1; j < atoms_; ++j) {
            const double dx = x[2 * i] - x[2 * j];
            const double dy = x[2 * i + 1] - x[2 * j + 1];
            const double inv2 = 1.0 / (dx * dx + dy * dy);
            const double inv6 = inv2 * inv2 * inv2;
            // (1/r) dphi/dr with phi = r^-12 - 2 r^-6
            const double f = -12.0 * inv2 * inv6 * (inv6 - 1.0);
            g[2 * i] += f * dx;
            g[2 * i + 1] += f * dy;
            g[2 * j] -= f * dx;
            g[2 * j + 1] -= f * dy;
        }
    }
}

} // namespace parrep
