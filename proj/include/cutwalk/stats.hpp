#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cutwalk/env.hpp"
#include "cutwalk/simulate.hpp"

namespace cutwalk {

/// Wilson score interval for a binomial proportion.
std::pair<double, double> wilson_interval(std::int64_t successes, std::int64_t n, double z);

struct GofReport {
    Level site = 0;
    std::string law;
    double statistic = 0.0;
    int df = 0;
    std::optional<double> p_value;  // empty when degenerate
    int buckets = 0;
    double min_expected = 0.0;
    bool degenerate = false;
    std::string note;
};

/// Chi-square test of counts observed[L] (L >= 1) against geometric(q). Cells
/// L = 1 .. L*-1 stand alone and L >= L* is merged, with L* the largest cut
/// leaving every expected count >= min_expected.
GofReport chi_square_geometric(const std::map<std::int64_t, std::int64_t>& observed, double q,
                               double min_expected = 5.0);

struct SiteComparison {
    Level site = 0;
    std::int64_t n = 0;
    double freq_cut = 0.0;
    double freq_strong = 0.0;
    double freq_weak = 0.0;
    double exact_cut = 0.0;
    double exact_strong = 0.0;
    double z_cut = 0.0;
    double z_strong = 0.0;
};

struct PairComparison {
    Level j = 0;
    Level k = 0;
    std::int64_t n = 0;
    double freq_cut = 0.0;
    double exact_cut = 0.0;
    double z_cut = 0.0;
    double freq_strong = 0.0;
    double exact_strong = 0.0;
    double z_strong = 0.0;
};

struct CensusComparison {
    std::vector<SiteComparison> sites;  // 1 .. M - guard
    std::vector<PairComparison> pairs;
};

/// (freq - exact) / sqrt(exact (1 - exact) / n)
double binomial_z(std::int64_t successes, std::int64_t n, double exact);

CensusComparison compare_census_to_exact(const Census& c, const ChainEnv& env);

/// Header `site,n,freq_cut,freq_strong,freq_weak,exact_cut,exact_strong,z_cut,z_strong`.
std::string summary_csv(const CensusComparison& cmp);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test against Uniform(0, 1), asymptotic
/// p-value with the Stephens small-sample correction.
KsResult ks_uniform(std::span<const double> samples);

}  // namespace cutwalk
