#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace parrep {

struct SampleSet {
    std::string label;
    std::vector<double> values;
};

struct KsResult {
    double statistic = 0.0; // D
    double p_value = 1.0;
    bool pass = true;       // null hypothesis not rejected at alpha
};

// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_survival(double lambda);

// Two-sample test with right-continuous ECDFs; p from the asymptotic
// distribution at effective size n m / (n + m). Throws ArgumentFault on
// empty input.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b, double alpha = 0.05);
KsResult ks_two_sample(const SampleSet& a, const SampleSet& b, double alpha = 0.05);

// Exact P(D >= d) for two samples of sizes n and m without ties, by
// lattice-path counting. Intended for n, m <= 50.
double ks_exact_pvalue(std::size_t n, std::size_t m, double d);

// One-sample test against a continuous CDF, asymptotic p.
KsResult ks_one_sample(std::span<const double> samples, const std::function<double(double)>& cdf,
                       double alpha = 0.05);

struct ClopperPearsonInterval {
    double lower = 0.0;
    double upper = 1.0;
    double level = 0.95;

    bool contains(double p) const { return p >= lower && p <= upper; }
};

ClopperPearsonInterval clopper_pearson(std::size_t successes, std::size_t trials, double alpha = 0.05);

// Pearson correlation between a 0/1 indicator and a real variable.
double point_biserial(std::span<const int> indicator, std::span<const double> values);

// p-value of Pearson's chi-square test that counts come from a uniform law.
double chi_square_uniform_pvalue(std::span<const std::size_t> counts);

struct MeanVar {
    std::optional<double> mean;
    std::optional<double> variance; // unbiased; absent below two samples
};
MeanVar mean_var(std::span<const double> v);

struct Histogram {
    std::vector<double> edges;     // bins + 1
    std::vector<double> densities; // integrate to 1 over the edges
};

// Density-normalized histogram on [lo, hi]; samples outside are dropped from
// the counts but not from the normalization. Throws ArgumentFault if bins < 1.
Histogram histogram(std::span<const double> samples, std::size_t bins, double lo, double hi);
// Range taken from the data (widened by 0.5 on each side for a point mass).
Histogram histogram(std::span<const double> samples, std::size_t bins);

} // namespace parrep
