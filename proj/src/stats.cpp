#include "parrep/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/chi_squared.hpp>

#include "parrep/errors.hpp"

namespace parrep {

double kolmogorov_survival(double lambda)
{
    if (lambda <= 0.0) return 1.0;
    if (lambda < 0.2) return 1.0;
    // Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)
    double sum = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-18) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b, double alpha)
{
    if (a.empty() || b.empty()) throw ArgumentFault("ks_two_sample: empty sample");
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    // Walk the merged support; tied values advance both ECDFs together.
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
    }
    KsResult r;
    r.statistic = d;
    r.p_value = d == 0.0 ? 1.0 : kolmogorov_survival(std::sqrt(n * m / (n + m)) * d);
    r.pass = r.p_value >= alpha;
    return r;
}

KsResult ks_two_sample(const SampleSet& a, const SampleSet& b, double alpha)
{
    return ks_two_sample(a.values, b.values, alpha);
}

double ks_exact_pvalue(std::size_t n, std::size_t m, double d)
{
    if (n == 0 || m == 0) throw ArgumentFault("ks_exact_pvalue: empty sample");
    // Count monotone lattice paths from (0,0) to (n,m) that stay strictly
    // inside |i/n - j/m| < d; P(D >= d) = 1 - inside / C(n+m, n).
    const double tol = 1e-12;
    auto inside = [&](std::size_t i, std::size_t j) {
        return std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m) < d - tol;
    };
    // Work with probabilities to avoid overflow: each path has weight 1/C(n+m,n).
    std::vector<double> row(m + 1, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
        for (std::size_t j = 0; j <= m; ++j) {
            double v;
            if (i == 0 && j == 0) {
                v = 1.0;
            } else {
                // Step probabilities of a uniformly random path: from (i-1, j) with
                // weight (n-i+1)/(n+m-i-j+1) etc. Use the counting recursion
                // normalised by binomial coefficients.
                const double from_up = i > 0 ? row[j] * static_cast<double>(n - i + 1) /
                                                     static_cast<double>(n + m - (i - 1) - j)
                                             : 0.0;
                const double from_left = j > 0 ? row[j - 1] * static_cast<double>(m - j + 1) /
                                                       static_cast<double>(n + m - i - (j - 1))
                                               : 0.0;
                v = from_up + from_left;
            }
            if (!inside(i, j)) v = 0.0;
            row[j] = v;
        }
    }
    return std::clamp(1.0 - row[m], 0.0, 1.0);
}

KsResult ks_one_sample(std::span<const double> samples, const std::function<double(double)>& cdf, double alpha)
{
    if (samples.empty()) throw ArgumentFault("ks_one_sample: empty sample");
    std::vector<double> x(samples.begin(), samples.end());
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    KsResult r;
    r.statistic = d;
    r.p_value = kolmogorov_survival(std::sqrt(n) * d);
    r.pass = r.p_value >= alpha;
    return r;
}

ClopperPearsonInterval clopper_pearson(std::size_t k, std::size_t n, double alpha)
{
    if (n < 1 || k > n) throw ArgumentFault("clopper_pearson: need 0 <= k <= n and n >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentFault("clopper_pearson: alpha must lie in (0, 1)");
    namespace bm = boost::math;
    ClopperPearsonInterval ci;
    ci.level = 1.0 - alpha;
    const double kk = static_cast<double>(k), nn = static_cast<double>(n);
    ci.lower = k == 0 ? 0.0 : bm::quantile(bm::beta_distribution<double>(kk, nn - kk + 1.0), alpha / 2.0);
    ci.upper = k == n ? 1.0 : bm::quantile(bm::beta_distribution<double>(kk + 1.0, nn - kk), 1.0 - alpha / 2.0);
    return ci;
}

double point_biserial(std::span<const int> indicator, std::span<const double> values)
{
    if (indicator.size() != values.size() || values.size() < 2) throw ArgumentFault("point_biserial: size mismatch");
    const double n = static_cast<double>(values.size());
    double mi = 0.0, mv = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        mi += indicator[i];
        mv += values[i];
    }
    mi /= n;
    mv /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double a = indicator[i] - mi, b = values[i] - mv;
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

double chi_square_uniform_pvalue(std::span<const std::size_t> counts)
{
    if (counts.size() < 2) throw ArgumentFault("chi-square test needs at least two cells");
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const double expected = total / static_cast<double>(counts.size());
    double chi2 = 0.0;
    for (auto c : counts) chi2 += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
    boost::math::chi_squared_distribution<double> dist(static_cast<double>(counts.size() - 1));
    return boost::math::cdf(boost::math::complement(dist, chi2));
}

MeanVar mean_var(std::span<const double> v)
{
    MeanVar r;
    if (v.empty()) return r;
    const double n = static_cast<double>(v.size());
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
    r.mean = m;
    if (v.size() >= 2) {
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        r.variance = s / (n - 1.0);
    }
    return r;
}

Histogram histogram(std::span<const double> samples, std::size_t bins, double lo, double hi)
{
    if (bins < 1) throw ArgumentFault("histogram: need at least one bin");
    if (!(hi > lo)) throw ArgumentFault("histogram: empty range");
    Histogram h;
    h.edges.resize(bins + 1);
    const double w = (hi - lo) / static_cast<double>(bins);
    for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = lo + static_cast<double>(i) * w;
    h.edges[bins] = hi;
    h.densities.assign(bins, 0.0);
    if (samples.empty()) return h;
    for (double x : samples) {
        if (x < lo || x > hi) continue;
        auto b = static_cast<std::size_t>((x - lo) / w);
        if (b >= bins) b = bins - 1;
        h.densities[b] += 1.0;
    }
    const double norm = 1.0 / (static_cast<double>(samples.size()) * w);
    for (double& d : h.densities) d *= norm;
    return h;
}

Histogram histogram(std::span<const double> samples, std::size_t bins)
{
    if (samples.empty()) throw ArgumentFault("histogram: no samples to infer a range");
    auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
    double lo = *mn, hi = *mx;
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    return histogram(samples, bins, lo, hi);
}

} // namespace parrep
