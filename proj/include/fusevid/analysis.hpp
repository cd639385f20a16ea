#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fusevid/tensor.hpp"

namespace fusevid {

// Reporting tools over token sets: value-range histograms, 2D principal
// component projections, and repeat-encoding fluctuation statistics. All
// outputs are deterministic functions of their inputs; CSV files carry the
// numbers, SVG files are companion charts for humans.

struct Histogram {
    std::vector<double> bin_edges;   // bins + 1, strictly increasing
    std::vector<std::size_t> counts;  // one per bin, sums to total
    std::size_t total = 0;
};

// Counts every element of `tokens` into `bins` equal-width bins over
// [lo, hi). Values below lo land in the first bin, values at or above hi in
// the last, so the histogram always conserves the element count.
Histogram value_histogram(const Tensor& tokens, std::size_t bins, double lo,
                          double hi);

// Fraction of the total mass in bins that lie entirely inside [lo, hi].
double histogram_mass(const Histogram& h, double lo, double hi);

struct ProjectedPoint {
    double x = 0.0;
    double y = 0.0;
    std::string label;
};

struct Projection2D {
    std::vector<ProjectedPoint> points;  // one per input token, input order
    std::string method = "pca";
};

// Pools every row of every labeled set, mean-centers, and projects onto the
// top two principal directions. Deterministic sign convention: the first
// nonzero loading of each direction is positive.
Projection2D project_2d(
    const std::vector<std::pair<std::string, Tensor>>& token_sets);

struct FluctuationReport {
    double query_var = 0.0;   // max per-coordinate variance across repeats
    double answer_var = 0.0;
};

// Encodes `prompt` with the decoder-branch simulator once per seed and
// reports the maximum per-coordinate variance across the repeats, separately
// for the query block and the answer block. Requires at least two seeds.
FluctuationReport fluctuation_stats(std::string_view prompt, std::size_t d,
                                    const std::vector<std::uint64_t>& seeds);

void write_histogram_csv(const std::string& path, const Histogram& h);
void write_histogram_svg(const std::string& path, const Histogram& h);
void write_projection_csv(const std::string& path, const Projection2D& p);
void write_projection_svg(const std::string& path, const Projection2D& p);
void write_fluctuation_csv(const std::string& path,
                           const FluctuationReport& r);
void write_fluctuation_svg(const std::string& path,
                           const FluctuationReport& r);

}  // namespace fusevid
