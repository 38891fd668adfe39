#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

// Shared knobs for the RANSAC-style estimators (pose, hand-eye, point-set
// correction).  One struct so the CLI can surface a single flag set.

namespace ghost {

struct RobustConfig {
    // Reprojection inlier gate for pose estimation.
    double inlier_threshold_px = 2.0;
    // Screw-congruence inlier gates for hand-eye motions; the translation
    // gate doubles as the residual gate for point-pair fitting.
    double rot_threshold_deg = 1.0;
    double trans_threshold_mm = 2.0;
    // Minimum pairwise rotation-axis separation below which hand-eye
    // translation is declared unobservable.
    double min_axis_spread_deg = 5.0;
    // Sampling budget and the adaptive-termination confidence level.
    int max_iterations = 1000;
    double confidence = 0.999;
    std::uint64_t seed = 0;
};

namespace detail {

// Standard adaptive stopping rule: iterations needed so that with
// probability `confidence` at least one all-inlier sample of size k is
// drawn given the current inlier ratio.
inline int ransac_iterations_needed(double inlier_ratio, int sample_size, double confidence,
                                    int max_iterations) {
    if (inlier_ratio <= 0.0) return max_iterations;
    const double w = std::min(inlier_ratio, 1.0);
    const double p_good = std::pow(w, sample_size);
    if (p_good >= 1.0) return 1;
    const double denom = std::log(1.0 - p_good);
    if (denom >= 0.0) return max_iterations;
    const double n = std::log(std::max(1.0 - confidence, 1e-12)) / denom;
    if (n >= static_cast<double>(max_iterations)) return max_iterations;
    return std::max(1, static_cast<int>(std::ceil(n)));
}

} // namespace detail

} // namespace ghost
