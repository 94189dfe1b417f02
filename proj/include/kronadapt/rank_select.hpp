#pragma once

#include <optional>
#include <span>
#include <vector>

#include "kronadapt/errors.hpp"
#include "kronadapt/matrix.hpp"

namespace kronadapt {

struct RankPolicy {
    double tau = 0.95;                  // cumulative energy threshold, in (0, 1)
    index_t r_min = 1;
    std::optional<index_t> r_max;       // nullopt = unbounded
    bool log_gaps = false;              // opt-in: elbow on log-sigma differences

    void validate() const;
};

/// Full audit trail of one rank selection. r_energy is 0 (sentinel) when the
/// spectrum carried no energy and the criterion was inapplicable.
struct RankDecision {
    std::vector<double> spectrum;
    std::vector<double> energy_curve; // E(k), nondecreasing, ends at 1 for nonzero input
    std::vector<double> gaps;         // sigma_i - sigma_{i+1}
    index_t r_energy = 0;
    index_t r_elbow = 0;
    index_t r_final = 0;
    bool clamped = false;
};

/// Smallest k (1-based) whose cumulative energy fraction
/// E(k) = sum_{i<=k} sigma_i^2 / sum_j sigma_j^2 reaches tau.
/// Throws degenerate_spectrum_error on an all-zero spectrum and argument_error
/// on unsorted input or tau outside (0, 1).
index_t energy_rank(std::span<const double> spectrum, double tau);

/// 1-based argmax of the successive gaps sigma_i - sigma_{i+1}; ties break to
/// the smallest index. A length-1 spectrum returns 1 by convention.
index_t elbow_rank(std::span<const double> spectrum);

/// Working rank r_final = clamp(min(r_energy, r_elbow), r_min, r_max), capped
/// at the spectrum length; an all-zero spectrum falls back to r_min with the
/// clamped flag set.
RankDecision select_rank(std::span<const double> spectrum, const RankPolicy& policy);

} // namespace kronadapt
