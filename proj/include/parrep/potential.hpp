#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace parrep {

// A configuration point. Coordinates are stored flat; for particle systems
// atom i occupies entries [2i, 2i+1].
using Position = std::vector<double>;

class Potential {
public:
    virtual ~Potential() = default;

    virtual std::size_t dimension() const = 0;
    virtual std::string name() const = 0;
    virtual double energy(std::span<const double> x) const = 0;
    virtual void gradient(std::span<const double> x, std::span<double> grad) const = 0;

    Position gradient(std::span<const double> x) const
    {
        Position g(dimension());
        gradient(x, g);
        return g;
    }
};

using PotentialPtr = std::shared_ptr<const Potential>;

// V = 0. Used for pure Brownian motion.
class FreePotential final : public Potential {
public:
    explicit FreePotential(std::size_t dim) : dim_(dim) {}
    std::size_t dimension() const override { return dim_; }
    std::string name() const override { return "free"; }
    double energy(std::span<const double>) const override { return 0.0; }
    void gradient(std::span<const double>, std::span<double> grad) const override;
    using Potential::gradient;

private:
    std::size_t dim_;
};

// V = (k/2) |x|^2.
class QuadraticPotential final : public Potential {
public:
    QuadraticPotential(std::size_t dim, double stiffness) : dim_(dim), k_(stiffness) {}
    std::size_t dimension() const override { return dim_; }
    std::string name() const override { return "quadratic"; }
    double energy(std::span<const double> x) const override;
    void gradient(std::span<const double> x, std::span<double> grad) const override;
    using Potential::gradient;

private:
    std::size_t dim_;
    double k_;
};

// V = -a * sum_i cos(pi x_i). Minima on the even integer lattice, saddles on
// the odd lines, so the cells (2k-1, 2k+1)^d are natural metastable states.
class CosinePotential final : public Potential {
public:
    CosinePotential(std::size_t dim, double amplitude) : dim_(dim), a_(amplitude) {}
    std::size_t dimension() const override { return dim_; }
    std::string name() const override { return "cosine"; }
    double energy(std::span<const double> x) const override;
    void gradient(std::span<const double> x, std::span<double> grad) const override;
    using Potential::gradient;

    double amplitude() const { return a_; }

private:
    std::size_t dim_;
    double a_;
};

// Two wells near (+-1, 0) separated by a barrier at the origin, joined by two
// channels each crossing a saddle.
// V = (1/6)[4(1-x^2-y^2)^2 + 2(x^2-2)^2 + ((x+y)^2-1)^2 + ((x-y)^2-1)^2]
class DoubleWell2D final : public Potential {
public:
    std::size_t dimension() const override { return 2; }
    std::string name() const override { return "double-well-2d"; }
    double energy(std::span<const double> x) const override;
    void gradient(std::span<const double> x, std::span<double> grad) const override;
    using Potential::gradient;
};

// Planar Lennard-Jones cluster, V = sum_{i<j} r^-12 - 2 r^-6 (pair minimum at
// r = 1 with depth -1).
class LennardJones2D final : public Potential {
public:
    explicit LennardJones2D(std::size_t atoms) : atoms_(atoms) {}
    std::size_t dimension() const override { return 2 * atoms_; }
    std::string name() const override { return "lennard-jones-2d"; }
    double energy(std::span<const double> x) const override;
    void gradient(std::span<const double> x, std::span<double> grad) const override;
    using Potential::gradient;

    std::size_t atoms() const { return atoms_; }

private:
    std::size_t atoms_;
};

} // namespace parrep
