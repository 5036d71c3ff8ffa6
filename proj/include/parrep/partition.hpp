#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "parrep/domain.hpp"
#include "parrep/potential.hpp"

namespace parrep {

// Opaque state label. Grids use (i, j); the maze uses (room, 0); LJ
// basins use (conformation class, bond-signature hash).
struct StateId {
    std::int64_t major = 0;
    std::int64_t minor = 0;

    friend auto operator<=>(const StateId&, const StateId&) = default;
    std::string str() const;
};

// A located state: its label plus whatever the partition needs to decide
// membership later (the anchor is the state's reference point or minimum).
struct State {
    StateId id;
    Position anchor;
    std::vector<double> signature;
    double anchor_energy = 0.0;
};

class Partition {
public:
    virtual ~Partition() = default;

    virtual std::size_t dimension() const = 0;
    virtual std::string kind() const = 0;

    // Full labeling of x. Throws LabelingFault if x is not admissible.
    virtual State locate(std::span<const double> x) const = 0;

    // Whether x still belongs to `s`. Cheaper than locate for most partitions.
    virtual bool contains(const State& s, std::span<const double> x) const { return locate(x).id == s.id; }

    // Steps between membership checks along a trajectory. Exits inside a
    // window are recovered by bisection on the stored window.
    virtual std::size_t check_interval() const { return 1; }

    StateId state_of(std::span<const double> x) const { return locate(x).id; }
};

using PartitionPtr = std::shared_ptr<const Partition>;

// Translates of (-1, 1)^d. Cell k covers [2k-1, 2k+1) along each axis.
class GridPartition final : public Partition {
public:
    explicit GridPartition(std::size_t dim, double offset = 0.0) : dim_(dim), offset_(offset) {}

    std::size_t dimension() const override { return dim_; }
    std::string kind() const override { return "grid"; }
    State locate(std::span<const double> x) const override;
    bool contains(const State& s, std::span<const double> x) const override;

    std::int64_t cell_index(double coord) const;

private:
    std::size_t dim_;
    double offset_;
};

// Rooms joined by narrow corridors. Each room is one state; a corridor is
// split between its two rooms at a vertical dividing line.
struct MazeGeometry {
    std::vector<Rect> rooms;
    std::vector<Rect> corridors;
    std::vector<double> dividers;   // ascending x positions, rooms.size() - 1 of them
    std::vector<Position> references; // one per room

    // Three 3x3 rooms in a row joined by 0.5 x 0.1 necks along the floor.
    static MazeGeometry standard();
    ReflectingDomain domain() const;
};

class MazePartition final : public Partition {
public:
    explicit MazePartition(MazeGeometry geometry);

    std::size_t dimension() const override { return 2; }
    std::string kind() const override { return "maze"; }
    State locate(std::span<const double> x) const override;
    bool contains(const State& s, std::span<const double> x) const override;

    // Room number, starting at 1, of an admissible point (no domain check).
    std::int64_t room_of(double x) const;
    const MazeGeometry& geometry() const { return geometry_; }
    const ReflectingDomain& domain() const { return domain_; }

private:
    MazeGeometry geometry_;
    ReflectingDomain domain_;
};

} // namespace parrep
