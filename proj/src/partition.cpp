#include "parrep/partition.hpp"

#include <algorithm>
#include <cmath>

#include "parrep/errors.hpp"

namespace parrep {

std::string StateId::str() const
{
    return std::to_string(major) + ":" + std::to_string(minor);
}

std::int64_t GridPartition::cell_index(double coord) const
{
    return static_cast<std::int64_t>(std::floor((coord - offset_ + 1.0) / 2.0));
}

State GridPartition::locate(std::span<const double> x) const
{
    if (x.size() != dim_) throw LabelingFault("grid partition: dimension mismatch");
    State s;
    s.anchor.resize(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
        if (!std::isfinite(x[i])) throw LabelingFault("grid partition: non-finite coordinate");
        const std::int64_t k = cell_index(x[i]);
        s.anchor[i] = offset_ + 2.0 * static_cast<double>(k);
        if (i == 0) s.id.major = k;
        if (i == 1) s.id.minor = k;
    }
    return s;
}

bool GridPartition::contains(const State& s, std::span<const double> x) const
{
    for (std::size_t i = 0; i < dim_; ++i) {
        const double lo = s.anchor[i] - 1.0;
        if (x[i] < lo || x[i] >= lo + 2.0) return false;
    }
    return true;
}

MazeGeometry MazeGeometry::standard()
{
    MazeGeometry g;
    g.rooms = {{0.0, 0.0, 3.0, 3.0}, {3.5, 0.0, 6.5, 3.0}, {7.0, 0.0, 10.0, 3.0}};
    g.corridors = {{3.0, 0.0, 3.5, 0.1}, {6.5, 0.0, 7.0, 0.1}};
    g.dividers = {3.25, 6.75};
    g.references = {{1.5, 1.5}, {5.0, 1.5}, {8.5, 1.5}};
    return g;
}

ReflectingDomain MazeGeometry::domain() const
{
    std::vector<Rect> all = rooms;
    all.insert(all.end(), corridors.begin(), corridors.end());
    return ReflectingDomain(std::move(all));
}

MazePartition::MazePartition(MazeGeometry geometry) : geometry_(std::move(geometry)), domain_(geometry_.domain())
{
    if (geometry_.rooms.empty() || geometry_.dividers.size() + 1 != geometry_.rooms.size() ||
        geometry_.references.size() != geometry_.rooms.size())
        throw ConfigError("maze: need one reference per room and rooms-1 dividers");
    if (!std::is_sorted(geometry_.dividers.begin(), geometry_.dividers.end()))
        throw ConfigError("maze: dividers must be ascending");
}

std::int64_t MazePartition::room_of(double x) const
{
    const auto& d = geometry_.dividers;
    return 1 + static_cast<std::int64_t>(std::upper_bound(d.begin(), d.end(), x) - d.begin());
}

State MazePartition::locate(std::span<const double> x) const
{
    if (x.size() != 2 || !domain_.contains(x)) throw LabelingFault("maze partition: point outside domain");
    State s;
    s.id.major = room_of(x[0]);
    s.anchor = geometry_.references[static_cast<std::size_t>(s.id.major - 1)];
    return s;
}

bool MazePartition::contains(const State& s, std::span<const double> x) const
{
    return room_of(x[0]) == s.id.major;
}

} // namespace parrep
