#include "kronadapt/rank_select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace kronadapt {

namespace {

void check_spectrum(std::span<const double> spectrum) {
    if (spectrum.empty()) {
        throw argument_error("spectrum must be nonempty");
    }
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        if (!(spectrum[i] >= 0.0)) {
            throw argument_error("spectrum entries must be nonnegative");
        }
        if (i > 0 && spectrum[i] > spectrum[i - 1]) {
            throw argument_error("spectrum must be nonincreasing (violated at index " +
                                 std::to_string(i) + ")");
        }
    }
}

double total_energy(std::span<const double> spectrum) {
    double total = 0.0;
    for (double s : spectrum) {
        total += s * s;
    }
    return total;
}

std::vector<double> raw_gaps(std::span<const double> spectrum) {
    std::vector<double> gaps;
    gaps.reserve(spectrum.size() > 0 ? spectrum.size() - 1 : 0);
    for (std::size_t i = 0; i + 1 < spectrum.size(); ++i) {
        gaps.push_back(spectrum[i] - spectrum[i + 1]);
    }
    return gaps;
}

std::vector<double> log_gap_values(std::span<const double> spectrum) {
    std::vector<double> gaps;
    gaps.reserve(spectrum.size() > 0 ? spectrum.size() - 1 : 0);
    for (std::size_t i = 0; i + 1 < spectrum.size(); ++i) {
        const double hi = spectrum[i];
        const double lo = spectrum[i + 1];
        if (hi == 0.0) {
            gaps.push_back(0.0); // no signal below an exactly-zero value
        } else if (lo == 0.0) {
            gaps.push_back(std::numeric_limits<double>::infinity());
        } else {
            gaps.push_back(std::log(hi) - std::log(lo));
        }
    }
    return gaps;
}

index_t argmax_gap(const std::vector<double>& gaps) {
    if (gaps.empty()) {
        return 1; // length-1 spectrum convention
    }
    index_t best = 0;
    for (index_t i = 1; i < gaps.size(); ++i) {
        if (gaps[i] > gaps[best]) {
            best = i;
        }
    }
    return best + 1;
}

} // namespace

void RankPolicy::validate() const {
    if (!(tau > 0.0 && tau < 1.0)) {
        throw argument_error("rank policy tau must lie in (0, 1)");
    }
    if (r_min == 0) {
        throw argument_error("rank policy r_min must be positive");
    }
    if (r_max.has_value() && *r_max < r_min) {
        throw argument_error("rank policy requires r_min <= r_max");
    }
}

index_t energy_rank(std::span<const double> spectrum, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) {
        throw argument_error("tau must lie in (0, 1)");
    }
    check_spectrum(spectrum);
    const double total = total_energy(spectrum);
    if (total == 0.0) {
        throw degenerate_spectrum_error("energy_rank: all-zero spectrum");
    }
    double cumulative = 0.0;
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
        cumulative += spectrum[k] * spectrum[k];
        if (cumulative / total >= tau) {
            return k + 1;
        }
    }
    return spectrum.size(); // unreachable for tau < 1, kept for totality
}

index_t elbow_rank(std::span<const double> spectrum) {
    check_spectrum(spectrum);
    return argmax_gap(raw_gaps(spectrum));
}

RankDecision select_rank(std::span<const double> spectrum, const RankPolicy& policy) {
    policy.validate();
    check_spectrum(spectrum);

    RankDecision decision;
    decision.spectrum.assign(spectrum.begin(), spectrum.end());
    decision.gaps = policy.log_gaps ? log_gap_values(spectrum) : raw_gaps(spectrum);
    decision.r_elbow = argmax_gap(decision.gaps);

    const double total = total_energy(spectrum);
    const index_t length = spectrum.size();
    decision.energy_curve.assign(length, 0.0);
    if (total > 0.0) {
        double cumulative = 0.0;
        for (index_t k = 0; k < length; ++k) {
            cumulative += spectrum[k] * spectrum[k];
            decision.energy_curve[k] = cumulative / total;
        }
    }

    index_t raw = 0;
    if (total == 0.0) {
        decision.r_energy = 0; // criterion inapplicable
        raw = policy.r_min;
        decision.r_final = std::min(policy.r_min, length);
        decision.clamped = true;
        return decision;
    }

    decision.r_energy = energy_rank(spectrum, policy.tau);
    raw = std::min(decision.r_energy, decision.r_elbow);

    index_t final_rank = std::max(raw, policy.r_min);
    if (policy.r_max.has_value()) {
        final_rank = std::min(final_rank, *policy.r_max);
    }
    final_rank = std::min(final_rank, length);
    decision.r_final = final_rank;
    decision.clamped = (final_rank != raw);
    return decision;
}

} // namespace kronadapt
