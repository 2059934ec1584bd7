#pragma once

// Domain types and the pure observation / channel-evolution equations of the
// distorted MIMO-OFDM CSI model:
//
//   H_obs,k = e^{j offset_k} E(slope_k) C H_k + W_k,   H_k = alpha H_{k-1} + V_k
//
// with E(slope) = diag(e^{j slope q_m}) and [C]_{m,l} = e^{-j 2 pi q_m l / M}.

#include <complex>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace csikf {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle to (-pi, pi].
double wrap_phase(double angle);

/// Closed real interval [lo, hi].
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const { return hi - lo; }
    bool contains(double x) const { return x >= lo && x <= hi; }
    double clamp(double x) const { return x < lo ? lo : (x > hi ? hi : x); }
};

/// Pilot layout of the observed subcarriers. Owns the Q x L DFT matrix C
/// and its Gram matrix C^H C.
class PilotSet {
public:
    /// Throws InputError unless Q <= M, L <= Q - 2 and indices are distinct
    /// modulo M.
    PilotSet(int dft_size, std::vector<int> pilot_indices, int channel_length);

    /// Same checks except L <= Q - 2. For the bare DFT / likelihood algebra on
    /// layouts too small to identify a channel and two phase parameters.
    static PilotSet unchecked(int dft_size, std::vector<int> pilot_indices, int channel_length);

    /// 40 MHz 802.11n-like layout: M = 128, q in {-58..-2} U {2..58}, L = 8.
    static PilotSet default_layout();

    int dft_size() const { return dft_size_; }
    int num_pilots() const { return static_cast<int>(indices_.size()); }
    int channel_length() const { return channel_length_; }
    const std::vector<int>& indices() const { return indices_; }
    int min_index() const { return min_index_; }
    int max_index() const { return max_index_; }
    /// max_m |q_m|
    int max_abs_index() const;

    const CMatrix& dft() const { return dft_; }
    const CMatrix& gram() const { return gram_; }
    /// Number of integer slots spanned by the indices, max - min + 1.
    int dense_size() const { return max_index_ - min_index_ + 1; }
    /// DFT rows for every slot min_index..max_index, pilot or not.
    const CMatrix& dense_dft() const { return dense_dft_; }
    /// Slot of pilot m in the dense layout.
    int dense_slot(int m) const { return indices_[m] - min_index_; }
    /// q as a real column vector (the diagonal of the index matrix).
    RVector index_vector() const;

private:
    PilotSet(int dft_size, std::vector<int> pilot_indices, int channel_length, bool check_identifiable);

    int dft_size_;
    std::vector<int> indices_;
    int channel_length_;
    int min_index_;
    int max_index_;
    CMatrix dft_;
    CMatrix gram_;
    CMatrix dense_dft_;
};

/// Q x L matrix with entries exp(-j 2 pi q_m l / M).
CMatrix dft_matrix(const PilotSet& pilots);

inline constexpr Interval kDefaultSlopeSupport{-0.2, 0.2};
inline constexpr Interval kDefaultOffsetSupport{-kPi, kPi};

/// Phase-slope / phase-offset pair. The offset is stored canonicalised to
/// (-pi, pi].
struct PhaseDistortion {
    double slope = 0.0;
    double offset = 0.0;
    Interval slope_support = kDefaultSlopeSupport;
    Interval offset_support = kDefaultOffsetSupport;

    PhaseDistortion() = default;
    /// Throws InputError when a value lies outside its support (the offset is
    /// tested modulo 2 pi).
    PhaseDistortion(double slope, double offset,
                    Interval slope_support = kDefaultSlopeSupport,
                    Interval offset_support = kDefaultOffsetSupport);

    PhaseDistortion negated() const;
};

/// True when some x + 2 pi k falls inside the interval.
bool contains_circular(const Interval& support, double x);

/// Exponential power-delay profile p_l ~ exp(-l * decay), normalised to sum 1.
RVector exponential_profile(int channel_length, double decay = 0.5);

/// Per-tap process-noise variances (1 - alpha^2) p_l that keep the AR(1)
/// channel power stationary at the profile. Returns L x n_channels.
RMatrix stationary_process_noise(double alpha, const RVector& profile, int n_channels);

/// Time-domain MIMO channel plus its AR(1) statistics. Column i of every
/// matrix belongs to channel i; rows are taps.
struct ChannelState {
    CMatrix taps;               // L x N
    double alpha = 1.0;
    RMatrix process_noise_vars; // L x N, per-tap process-noise variance
    RMatrix tap_power_profile;  // L x N, each column sums to 1

    int channel_length() const { return static_cast<int>(taps.rows()); }
    int num_channels() const { return static_cast<int>(taps.cols()); }

    /// Throws InputError on shape mismatch, alpha outside (0, 1] or a profile
    /// column that does not sum to one within 1e-12.
    void validate() const;
};

/// One packet of observed CSI (Q x N) with the noise level it was taken at.
struct Observation {
    CMatrix csi;
    double noise_var = 1.0;
    long packet_index = 0;

    int num_channels() const { return static_cast<int>(csi.cols()); }
};

/// Row m multiplied by exp(j (offset + slope q_m)).
CMatrix apply_distortion(const CMatrix& clean, const PhaseDistortion& d, const PilotSet& pilots);
/// Same rotation with raw parameters (no support check).
CMatrix apply_phase_ramp(const CMatrix& clean, double slope, double offset, const PilotSet& pilots);

/// taps <- alpha taps + noise_draw.
ChannelState ar1_step(const ChannelState& state, const std::optional<CMatrix>& noise_draw);

/// Noise-free or noisy observation of the channel under distortion d.
Observation observe(const ChannelState& state, const PhaseDistortion& d, double noise_var,
                    const PilotSet& pilots, const std::optional<CMatrix>& noise_draw,
                    long packet_index = 0);

/// sigma_w^2 = 10^(-snr_db / 10); channel power is normalised to one.
double noise_var_from_snr_db(double snr_db);

}  // namespace csikf
