#include "urllc/reliability.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace urllc::reliability {

namespace {

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

MultiPathProfile::MultiPathProfile(std::vector<double> per_path_loss) : loss_(std::move(per_path_loss)) {
    if (loss_.empty()) throw std::invalid_argument("MultiPathProfile: need at least one path");
    if (!std::all_of(loss_.begin(), loss_.end(), is_probability))
        throw std::invalid_argument("MultiPathProfile: loss probabilities must lie in [0,1]");
}

void LosField::validate() const {
    if (!is_probability(p_one)) throw std::invalid_argument("LosField: p_one must lie in [0,1]");
    if (!is_probability(rho)) throw std::invalid_argument("LosField: rho must lie in [0,1]");
    if (antennas < 1) throw std::invalid_argument("LosField: need at least one antenna");
}

double loss_uncorrelated(const MultiPathProfile& profile) {
    const auto& loss = profile.per_path_loss();
    return std::accumulate(loss.begin(), loss.end(), 1.0, std::multiplies<>());
}

double p_all_los(const LosField& field) {
    field.validate();
    const double p = field.p_one;
    const double stay_blocked = 1.0 - p * (1.0 - field.rho);
    return 1.0 - (1.0 - p) * std::pow(stay_blocked, double(field.antennas - 1));
}

double p_los_terrestrial(double distance_m) {
    if (!(distance_m > 0.0)) throw std::invalid_argument("p_los_terrestrial: distance must be positive");
    const double decay = std::exp(-distance_m / 36.0);
    return std::min(18.0 / distance_m, 1.0) * (1.0 - decay) + decay;
}

double p_los_elevation(double elevation_deg, double phi, double psi) {
    if (!(phi > 0.0) || !(psi > 0.0)) throw std::invalid_argument("p_los_elevation: constants must be positive");
    return 1.0 / (1.0 + phi * std::exp(-psi * (elevation_deg - phi)));
}

}  // namespace urllc::reliability
