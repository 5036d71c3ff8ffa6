#include "parrep/domain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "parrep/errors.hpp"

namespace parrep {

namespace {

// Subtract the intervals in `cut` from [lo, hi].
std::vector<std::pair<double, double>> subtract(double lo, double hi,
                                                std::vector<std::pair<double, double>> cut)
{
    std::sort(cut.begin(), cut.end());
    std::vector<std::pair<double, double>> out;
    double cur = lo;
    for (const auto& [a, b] : cut) {
        if (b <= cur) continue;
        if (a > cur) out.emplace_back(cur, std::min(a, hi));
        cur = std::max(cur, b);
        if (cur >= hi) break;
    }
    if (cur < hi) out.emplace_back(cur, hi);
    return out;
}

} // namespace

ReflectingDomain::ReflectingDomain(std::vector<Rect> rects) : rects_(std::move(rects))
{
    for (std::size_t i = 0; i < rects_.size(); ++i) {
        const Rect& r = rects_[i];
        // Each side: axis, value, span, and which side of a neighbour must face it.
        struct Side {
            int axis;
            double value, lo, hi;
            bool low_side;
        };
        const Side sides[4] = {{0, r.x0, r.y0, r.y1, true}, {0, r.x1, r.y0, r.y1, false},
                               {1, r.y0, r.x0, r.x1, true}, {1, r.y1, r.x0, r.x1, false}};
        for (const Side& s : sides) {
            if (!std::isfinite(s.value)) continue;
            std::vector<std::pair<double, double>> shared;
            for (std::size_t j = 0; j < rects_.size(); ++j) {
                if (j == i) continue;
                const Rect& o = rects_[j];
                const double facing = s.axis == 0 ? (s.low_side ? o.x1 : o.x0) : (s.low_side ? o.y1 : o.y0);
                if (facing != s.value) continue;
                const double olo = s.axis == 0 ? o.y0 : o.x0;
                const double ohi = s.axis == 0 ? o.y1 : o.x1;
                shared.emplace_back(std::max(olo, s.lo), std::min(ohi, s.hi));
            }
            for (const auto& [lo, hi] : subtract(s.lo, s.hi, shared)) walls_.push_back({s.axis, s.value, lo, hi});
        }
    }
}

bool ReflectingDomain::contains(std::span<const double> x) const
{
    if (rects_.empty()) return true;
    return std::any_of(rects_.begin(), rects_.end(), [&](const Rect& r) { return r.contains(x[0], x[1]); });
}

void reflect_in_place(std::span<const double> x, std::span<double> proposal, const ReflectingDomain& dom)
{
    if (dom.unbounded()) return;
    if (!dom.contains(x)) throw PreconditionViolation("reflect_step: starting point outside domain");
    if (dom.contains(proposal)) return;

    double px = x[0], py = x[1];
    double qx = proposal[0], qy = proposal[1];
    for (int bounce = 0; bounce < kMaxReflections; ++bounce) {
        // First wall crossed by the open segment (p, q].
        double best = std::numeric_limits<double>::infinity();
        const ReflectingDomain::Wall* hit = nullptr;
        const double dx = qx - px, dy = qy - py;
        for (const auto& w : dom.walls()) {
            const double from = w.axis == 0 ? px : py;
            const double delta = w.axis == 0 ? dx : dy;
            if (delta == 0.0) continue;
            const double s = (w.value - from) / delta;
            if (s <= 1e-12 || s > 1.0 || s >= best) continue;
            const double along = w.axis == 0 ? py + s * dy : px + s * dx;
            if (along < w.lo || along > w.hi) continue;
            best = s;
            hit = &w;
        }
        if (hit == nullptr) break;
        px += best * dx;
        py += best * dy;
        if (hit->axis == 0) {
            qx = 2.0 * hit->value - qx;
        } else {
            qy = 2.0 * hit->value - qy;
        }
        const double q[2] = {qx, qy};
        if (dom.contains(q)) {
            proposal[0] = qx;
            proposal[1] = qy;
            return;
        }
    }
    proposal[0] = x[0];
    proposal[1] = x[1];
}

Position reflect_step(std::span<const double> x, std::span<const double> proposal, const ReflectingDomain& dom)
{
    Position out(proposal.begin(), proposal.end());
    reflect_in_place(x, out, dom);
    return out;
}

} // namespace parrep
