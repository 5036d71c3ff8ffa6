#include "parrep/qsd_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "parrep/errors.hpp"
#include "parrep/rng.hpp"

namespace parrep {

std::size_t SymTridiagonal::count_below(double x) const
{
    std::size_t count = 0;
    double d = 1.0;
    const std::size_t n = diag.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double b2 = i == 0 ? 0.0 : off[i - 1] * off[i - 1];
        d = diag[i] - x - (i == 0 ? 0.0 : b2 / d);
        if (d == 0.0) d = -std::numeric_limits<double>::epsilon() * (std::abs(diag[i]) + std::abs(x) + 1.0);
        if (d < 0.0) ++count;
    }
    return count;
}

double SymTridiagonal::eigenvalue(std::size_t k) const
{
    const std::size_t n = diag.size();
    // Gershgorin bounds.
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = (i > 0 ? std::abs(off[i - 1]) : 0.0) + (i + 1 < n ? std::abs(off[i]) : 0.0);
        lo = std::min(lo, diag[i] - r);
        hi = std::max(hi, diag[i] + r);
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (count_below(mid) > k) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return 0.5 * (lo + hi);
}

std::vector<double> SymTridiagonal::eigenvector(double lambda) const
{
    const std::size_t n = diag.size();
    // LU with partial pivoting of (T - lambda I); U has two superdiagonals.
    std::vector<double> u0(n), u1(n, 0.0), u2(n, 0.0), l(n, 0.0);
    std::vector<char> swapped(n, 0);
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(diag[i] - lambda) + (i + 1 < n ? std::abs(off[i]) : 0.0));
    const double tiny = std::numeric_limits<double>::epsilon() * scale;

    // Row i of the working matrix: (a, b, c) at columns i, i+1, i+2.
    double a = diag[0] - lambda, b = n > 1 ? off[0] : 0.0, c = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        // Next row: sub = off[i] at column i, then diag[i+1]-lambda, off[i+1].
        double sub = off[i];
        double na = diag[i + 1] - lambda, nb = i + 2 < n ? off[i + 1] : 0.0, nc = 0.0;
        if (std::abs(sub) > std::abs(a)) {
            std::swap(a, sub);
            std::swap(b, na);
            std::swap(c, nb);
            swapped[i] = 1;
        }
        if (a == 0.0) a = tiny;
        const double m = sub / a;
        l[i] = m;
        u0[i] = a;
        u1[i] = b;
        u2[i] = c;
        a = na - m * b;
        b = nb - m * c;
        c = nc;
    }
    u0[n - 1] = a == 0.0 ? tiny : a;

    std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
    std::vector<double> prev;
    for (int it = 0; it < 8; ++it) {
        // Forward: apply the recorded row swaps and multipliers.
        std::vector<double> y = v;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (swapped[i]) std::swap(y[i], y[i + 1]);
            y[i + 1] -= l[i] * y[i];
        }
        // Back substitution.
        for (std::size_t ii = n; ii-- > 0;) {
            double s = y[ii];
            if (ii + 1 < n) s -= u1[ii] * y[ii + 1];
            if (ii + 2 < n) s -= u2[ii] * y[ii + 2];
            y[ii] = s / u0[ii];
        }
        double norm = 0.0;
        for (double t : y) norm += t * t;
        norm = std::sqrt(norm);
        if (!std::isfinite(norm) || norm == 0.0) throw OracleFault("inverse iteration broke down");
        for (double& t : y) t /= norm;
        prev = std::move(v);
        v = std::move(y);
        double diff_plus = 0.0, diff_minus = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            diff_plus = std::max(diff_plus, std::abs(v[i] - prev[i]));
            diff_minus = std::max(diff_minus, std::abs(v[i] + prev[i]));
        }
        if (it > 0 && std::min(diff_plus, diff_minus) < 1e-12) return v;
    }
    throw OracleFault("inverse iteration did not converge");
}

namespace {

void trapezoid_cdf(const std::vector<double>& x, const std::vector<double>& f, std::vector<double>& cdf)
{
    cdf.assign(x.size(), 0.0);
    for (std::size_t i = 1; i < x.size(); ++i) cdf[i] = cdf[i - 1] + 0.5 * (f[i] + f[i - 1]) * (x[i] - x[i - 1]);
}

} // namespace

EigenSolution solve_generator(const Potential& pot, double beta, double a, double b, std::size_t M)
{
    if (pot.dimension() != 1) throw ArgumentFault("solve_generator: potential must be one-dimensional");
    if (M < 100) throw ArgumentFault("solve_generator: need M >= 100");
    if (!(b > a) || !(beta > 0.0)) throw ArgumentFault("solve_generator: bad interval or beta");

    const double h = (b - a) / static_cast<double>(M + 1);
    auto V = [&](double x) { return pot.energy(std::span<const double>(&x, 1)); };

    EigenSolution sol;
    sol.grid.resize(M + 2);
    std::vector<double> v(M + 2);
    for (std::size_t i = 0; i < M + 2; ++i) {
        sol.grid[i] = i == M + 1 ? b : a + static_cast<double>(i) * h;
        v[i] = V(sol.grid[i]);
    }

    // L v = beta^-1 e^{beta V} (e^{-beta V} v')' in conservative form; after
    // the similarity transform with e^{-beta V/2} the matrix is symmetric.
    // T = -L (positive definite), indices shifted to interior points 1..M.
    SymTridiagonal T;
    T.diag.resize(M);
    T.off.resize(M - 1);
    const double c = 1.0 / (beta * h * h);
    for (std::size_t i = 1; i <= M; ++i) {
        const double left = std::exp(-beta * (V(sol.grid[i] - 0.5 * h) - v[i]));
        const double right = std::exp(-beta * (V(sol.grid[i] + 0.5 * h) - v[i]));
        T.diag[i - 1] = c * (left + right);
        if (i < M) {
            const double mid = V(sol.grid[i] + 0.5 * h);
            T.off[i - 1] = -c * std::exp(-beta * (mid - 0.5 * (v[i] + v[i + 1])));
        }
    }

    sol.lambda1 = T.eigenvalue(0);
    sol.lambda2 = T.eigenvalue(1);
    if (!(sol.lambda1 > 0.0) || !(sol.lambda2 > sol.lambda1)) throw OracleFault("eigenvalues not separated");
    const auto w1 = T.eigenvector(sol.lambda1);
    const auto w2 = T.eigenvector(sol.lambda2);

    sol.phi1.assign(M + 2, 0.0);
    sol.phi2.assign(M + 2, 0.0);
    sol.density.assign(M + 2, 0.0);
    // Sign convention: phi1 positive.
    double sum = 0.0;
    for (double t : w1) sum += t;
    const double sign = sum < 0.0 ? -1.0 : 1.0;
    double max1 = 0.0, max2 = 0.0;
    for (std::size_t i = 1; i <= M; ++i) {
        sol.phi1[i] = sign * w1[i - 1] * std::exp(0.5 * beta * v[i]);
        sol.phi2[i] = w2[i - 1] * std::exp(0.5 * beta * v[i]);
        sol.density[i] = std::max(0.0, sign * w1[i - 1] * std::exp(-0.5 * beta * v[i]));
        max1 = std::max(max1, std::abs(sol.phi1[i]));
        max2 = std::max(max2, std::abs(sol.phi2[i]));
    }
    for (auto& t : sol.phi1) t /= max1;
    for (auto& t : sol.phi2) t /= max2;
    trapezoid_cdf(sol.grid, sol.density, sol.cdf);
    const double mass = sol.cdf.back();
    for (auto& t : sol.density) t /= mass;
    for (auto& t : sol.cdf) t /= mass;
    return sol;
}

double EigenSolution::density_at(double x) const
{
    if (x <= grid.front() || x >= grid.back()) return 0.0;
    const auto it = std::upper_bound(grid.begin(), grid.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - grid.begin());
    const double f = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
    return density[i - 1] + f * (density[i] - density[i - 1]);
}

double EigenSolution::cdf_at(double x) const
{
    if (x <= grid.front()) return 0.0;
    if (x >= grid.back()) return 1.0;
    const auto it = std::upper_bound(grid.begin(), grid.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - grid.begin());
    // Exact integral of the linear interpolant of the density over [grid[i-1], x].
    const double h = grid[i] - grid[i - 1];
    const double s = x - grid[i - 1];
    const double slope = (density[i] - density[i - 1]) / h;
    return cdf[i - 1] + density[i - 1] * s + 0.5 * slope * s * s;
}

double EigenSolution::mass(double lo, double hi) const
{
    return cdf_at(hi) - cdf_at(lo);
}

std::vector<double> sample_qsd(const EigenSolution& sol, std::size_t n, std::uint64_t seed)
{
    NoiseStream rng(seed, 0x51D0);
    std::vector<double> out(n);
    for (auto& x : out) {
        const double u = rng.uniform();
        const auto it = std::upper_bound(sol.cdf.begin(), sol.cdf.end(), u);
        std::size_t i = static_cast<std::size_t>(it - sol.cdf.begin());
        i = std::clamp<std::size_t>(i, 1, sol.cdf.size() - 1);
        const double span = sol.cdf[i] - sol.cdf[i - 1];
        const double f = span > 0.0 ? (u - sol.cdf[i - 1]) / span : 0.5;
        x = sol.grid[i - 1] + f * (sol.grid[i] - sol.grid[i - 1]);
    }
    return out;
}

void write_oracle_csv(std::ostream& os, const EigenSolution& sol)
{
    os << "# lambda1=" << std::setprecision(17) << sol.lambda1 << " lambda2=" << sol.lambda2 << '\n';
    os << "x,density,phi1,phi2\n";
    for (std::size_t i = 0; i < sol.grid.size(); ++i)
        os << sol.grid[i] << ',' << sol.density[i] << ',' << sol.phi1[i] << ',' << sol.phi2[i] << '\n';
}

} // namespace parrep
