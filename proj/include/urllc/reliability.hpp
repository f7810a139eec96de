#pragma once

#include <cstddef>
#include <vector>

namespace urllc::reliability {

/// Per-path loss probabilities of a packet duplicated over N_P paths.
class MultiPathProfile {
public:
    /// Throws std::invalid_argument if empty or any entry is outside [0,1].
    explicit MultiPathProfile(std::vector<double> per_path_loss);

    const std::vector<double>& per_path_loss() const { return loss_; }
    std::size_t path_count() const { return loss_.size(); }

private:
    std::vector<double> loss_;
};

/// Line-of-sight statistics of N_P distributed antennas whose LoS indicators
/// are correlated between adjacent antennas.
struct LosField {
    double p_one;      // LoS probability of a single antenna
    double rho;        // adjacent-antenna correlation
    std::size_t antennas;

    /// Throws std::invalid_argument on out-of-range fields.
    void validate() const;
};

/// Loss probability when path losses are independent: the product.
double loss_uncorrelated(const MultiPathProfile& profile);

/// Probability that at least one antenna has a LoS path:
///   1 - (1 - p)[1 - p(1 - rho)]^(N-1).
double p_all_los(const LosField& field);

/// 3GPP terrestrial LoS probability at distance r (metres).
double p_los_terrestrial(double distance_m);

/// Elevation-angle LoS probability 1 / (1 + phi exp[-psi (theta - phi)]).
/// The angle is in degrees; phi and psi are environment constants with no
/// defaults.
double p_los_elevation(double elevation_deg, double phi, double psi);

}  // namespace urllc::reliability
