#include "urllc/fbl.hpp"

#include "urllc/numerics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace urllc::fbl {

namespace {

void require_positive(double value, const char* what) {
    if (!(value > 0.0) || !std::isfinite(value))
        throw std::invalid_argument(std::string("LinkConfig: ") + what + " must be positive and finite");
}

double dispersion_value(double snr, Dispersion dispersion) {
    return dispersion == Dispersion::unit ? 1.0 : channel_dispersion(snr);
}

}  // namespace

LinkConfig::LinkConfig(double bandwidth_hz, double snr_linear, double frame_duration_s, double payload_bits)
    : bandwidth_hz_(bandwidth_hz),
      snr_(snr_linear),
      frame_duration_s_(frame_duration_s),
      payload_bits_(payload_bits),
      blocklength_(frame_duration_s * bandwidth_hz) {
    require_positive(bandwidth_hz, "bandwidth_hz");
    require_positive(snr_linear, "snr_linear");
    require_positive(frame_duration_s, "frame_duration_s");
    require_positive(payload_bits, "payload_bits");
}

LinkConfig LinkConfig::with_payload_bits(double bits) const {
    return LinkConfig(bandwidth_hz_, snr_, frame_duration_s_, bits);
}

LinkConfig LinkConfig::with_snr(double snr) const {
    return LinkConfig(bandwidth_hz_, snr, frame_duration_s_, payload_bits_);
}

double shannon_rate(const LinkConfig& link) {
    return link.bandwidth_hz() * std::log1p(link.snr()) / std::numbers::ln2;
}

double channel_dispersion(double snr) {
    if (!(snr >= 0.0)) throw numerics::DomainError("channel_dispersion: snr must be nonnegative");
    const double inv = 1.0 / (1.0 + snr);
    return 1.0 - inv * inv;
}

double na_bits_per_symbol(double blocklength, double snr, double decoding_error_target, Dispersion dispersion) {
    const double qinv = numerics::q_func_inv(decoding_error_target);
    const double v = dispersion_value(snr, dispersion);
    return (std::log1p(snr) - std::sqrt(v / blocklength) * qinv) / std::numbers::ln2;
}

double na_rate(const LinkConfig& link, double decoding_error_target, Dispersion dispersion) {
    return link.bandwidth_hz() *
           na_bits_per_symbol(link.blocklength(), link.snr(), decoding_error_target, dispersion);
}

double decoding_error(double blocklength, double snr, double payload_bits, Dispersion dispersion) {
    const double v = dispersion_value(snr, dispersion);
    if (v == 0.0) {
        // Zero-SNR limit: the argument diverges to -inf whenever bits are sent.
        return payload_bits > 0.0 ? 1.0 : 0.5;
    }
    const double arg =
        std::sqrt(blocklength / v) * (std::log1p(snr) - payload_bits * std::numbers::ln2 / blocklength);
    return numerics::q_func(arg);
}

double decoding_error(const LinkConfig& link, Dispersion dispersion) {
    return decoding_error(link.blocklength(), link.snr(), link.payload_bits(), dispersion);
}

}  // namespace urllc::fbl
