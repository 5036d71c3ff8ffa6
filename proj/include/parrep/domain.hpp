#pragma once

#include <array>
#include <span>
#include <vector>

#include "parrep/potential.hpp"

namespace parrep {

// Axis-aligned rectangle [lo.x, hi.x] x [lo.y, hi.y]. Bounds may be infinite.
struct Rect {
    double x0, y0, x1, y1;

    bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

// A planar region built from rectangles that meet edge to edge. Rectangle
// sides not shared with a neighbour become reflecting walls. An empty domain
// means all of R^d with no walls.
class ReflectingDomain {
public:
    ReflectingDomain() = default;
    explicit ReflectingDomain(std::vector<Rect> rects);

    bool unbounded() const { return rects_.empty(); }
    bool contains(std::span<const double> x) const;
    const std::vector<Rect>& rects() const { return rects_; }

    // A wall lies on the line {coord[axis] == value}, spanning [lo, hi] along
    // the other axis.
    struct Wall {
        int axis;
        double value;
        double lo, hi;
    };
    const std::vector<Wall>& walls() const { return walls_; }

private:
    std::vector<Rect> rects_;
    std::vector<Wall> walls_;
};

inline constexpr int kMaxReflections = 8;

// Specular reflection of the segment x -> proposal off the domain walls, at
// most kMaxReflections times. Falls back to x when the result still lies
// outside. Throws PreconditionViolation if x itself is outside.
Position reflect_step(std::span<const double> x, std::span<const double> proposal,
                      const ReflectingDomain& dom);

// In-place form used by the integrators: `proposal` is overwritten.
void reflect_in_place(std::span<const double> x, std::span<double> proposal, const ReflectingDomain& dom);

} // namespace parrep
