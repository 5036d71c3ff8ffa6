#pragma once

// Reference quasi-stationary distribution in one dimension: the generator
// L v = -V' v' + v'' / beta with absorbing ends, discretized by central
// differences and symmetrized so that a symmetric tridiagonal eigensolver
// applies.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "parrep/potential.hpp"

namespace parrep {

// Symmetric tridiagonal matrix: diag[0..n), off[i] couples i and i+1.
struct SymTridiagonal {
    std::vector<double> diag;
    std::vector<double> off;

    std::size_t size() const { return diag.size(); }
    // Number of eigenvalues strictly below x (Sturm sequence count).
    std::size_t count_below(double x) const;
    // k-th smallest eigenvalue (0-based) by bisection.
    double eigenvalue(std::size_t k) const;
    // Unit eigenvector for an accurate eigenvalue estimate, by inverse iteration.
    std::vector<double> eigenvector(double lambda) const;
};

struct EigenSolution {
    std::vector<double> grid;    // M interior points plus both endpoints
    std::vector<double> phi1;    // principal eigenfunction, positive inside, max 1
    std::vector<double> phi2;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    std::vector<double> density; // QSD density, zero at the endpoints, trapezoid mass 1
    std::vector<double> cdf;     // trapezoid cumulative of density

    double mean_exit_time() const { return 1.0 / lambda1; }
    // Density at x by linear interpolation (0 outside the interval).
    double density_at(double x) const;
    // Mass of [lo, hi] from the interpolated CDF.
    double mass(double lo, double hi) const;
    double cdf_at(double x) const;
};

// `pot` must be one-dimensional. Throws OracleFault if an eigenpair fails to
// converge and ArgumentFault for M < 100 or an empty interval.
EigenSolution solve_generator(const Potential& pot, double beta, double a, double b, std::size_t M = 2000);

// Inverse-CDF samples from the oracle density.
std::vector<double> sample_qsd(const EigenSolution& sol, std::size_t n, std::uint64_t seed);

void write_oracle_csv(std::ostream& os, const EigenSolution& sol);

} // namespace parrep
