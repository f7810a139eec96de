#pragma once

// Finite-blocklength link model: Shannon capacity, the normal approximation of
// the achievable rate, channel dispersion, and decoding error probability.
// Rates are bits/s, durations seconds, SNR and probabilities linear.

namespace urllc::fbl {

/// Physical-layer parameters of one radio link. Blocklength is derived as
/// frame_duration * bandwidth at construction.
class LinkConfig {
public:
    /// Throws std::invalid_argument unless every argument is strictly positive.
    LinkConfig(double bandwidth_hz, double snr_linear, double frame_duration_s, double payload_bits);

    double bandwidth_hz() const { return bandwidth_hz_; }
    double snr() const { return snr_; }
    double frame_duration_s() const { return frame_duration_s_; }
    double payload_bits() const { return payload_bits_; }
    double blocklength() const { return blocklength_; }

    LinkConfig with_payload_bits(double bits) const;
    LinkConfig with_snr(double snr) const;

private:
    double bandwidth_hz_;
    double snr_;
    double frame_duration_s_;
    double payload_bits_;
    double blocklength_;
};

/// Whether to use the exact AWGN dispersion or the V = 1 simplification.
enum class Dispersion { exact, unit };

/// W log2(1 + snr).
double shannon_rate(const LinkConfig& link);

/// V = 1 - (1 + snr)^-2. Requires snr >= 0.
double channel_dispersion(double snr);

/// Normal-approximation achievable rate
///   (W/ln2) [ln(1+snr) - sqrt(V/L) Qinv(eps)].
/// Not clamped: very short blocks can give a negative value.
/// Throws numerics::DomainError unless 0 < eps < 1.
double na_rate(const LinkConfig& link, double decoding_error_target,
               Dispersion dispersion = Dispersion::exact);

/// Raw form: per-symbol normal-approximation rate in bits/symbol for a block
/// of `blocklength` symbols.
double na_bits_per_symbol(double blocklength, double snr, double decoding_error_target,
                          Dispersion dispersion = Dispersion::exact);

/// Decoding error probability for payload_bits in one block,
///   Q( sqrt(L/V) [ln(1+snr) - b ln2 / L] ).
double decoding_error(const LinkConfig& link, Dispersion dispersion = Dispersion::exact);

/// Raw form used by resource-block sizing.
double decoding_error(double blocklength, double snr, double payload_bits,
                      Dispersion dispersion = Dispersion::exact);

}  // namespace urllc::fbl
