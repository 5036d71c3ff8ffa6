#pragma once

// Basin identification for planar Lennard-Jones clusters: gradient-flow
// quench, permutation-invariant bond descriptors and conformation classes of
// the seven-atom cluster.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "parrep/partition.hpp"
#include "parrep/potential.hpp"

namespace parrep::lj7 {

inline constexpr std::size_t kAtoms = 7;
inline constexpr std::size_t kBonds = kAtoms * (kAtoms - 1) / 2;

// One atom at the origin, six on the unit circle pi/3 apart.
Position hexagon(double radius = 1.0);

struct QuenchOptions {
    double relative_gradient_tol = 1e-5;  // stop once |grad V|_2 / |V| drops below this
    std::size_t max_stages = 1'000'000;   // gradient evaluations, rejected steps included
    double initial_step = 1e-3;
};

struct QuenchResult {
    Position x;
    double energy = 0.0;
    double relative_gradient = 0.0;
    std::size_t stages = 0;
    std::size_t accepted_steps = 0;
    bool converged = false;
};

// Follows x' = -grad V(x) with adaptive Dormand-Prince RK45 until the
// relative gradient criterion holds or the stage cap is hit. When `trace` is
// given it receives the energy after every accepted step.
QuenchResult quench(std::span<const double> x, const Potential& pot, const QuenchOptions& opt = {},
                    std::vector<double>* trace = nullptr);

// All pairwise distances, ascending.
std::vector<double> sorted_bonds(std::span<const double> x);

// l1 distance between the sorted bond multisets of x and a reference.
double bond_distance(std::span<const double> x, std::span<const double> ref_sorted_bonds);

enum class Conformation { C0, C1, C2, C3, other };
std::string to_string(Conformation c);

inline constexpr std::array<double, 4> kConformationEnergies = {-12.53, -11.50, -11.48, -11.40};
inline constexpr double kEnergyBand = 0.02;

Conformation classify_energy(double quenched_energy);
Conformation classify_conformation(std::span<const double> x_min, const Potential& pot);

// Applies a rigid motion and relabels atoms: out atom i = rotated atom perm[i].
Position rigid_permute(std::span<const double> x, double angle, double tx, double ty,
                       std::span<const std::size_t> perm);

// States are basins of the gradient flow. Two configurations share a state
// when their quenched minima differ by at most `threshold` in bond distance.
class Lj7BasinPartition final : public Partition {
public:
    Lj7BasinPartition(PotentialPtr pot, QuenchOptions opt = {}, double threshold = 0.5,
                      std::size_t check_interval = 1);

    std::size_t dimension() const override { return 2 * kAtoms; }
    std::string kind() const override { return "lj7-basins"; }
    State locate(std::span<const double> x) const override;
    bool contains(const State& s, std::span<const double> x) const override;
    std::size_t check_interval() const override { return interval_; }

    const Potential& potential() const { return *pot_; }
    double threshold() const { return threshold_; }

private:
    PotentialPtr pot_;
    QuenchOptions opt_;
    double threshold_;
    std::size_t interval_;
};

} // namespace parrep::lj7
