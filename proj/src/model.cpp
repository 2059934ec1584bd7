#include "csikf/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>
#include <string>

#include "csikf/errors.hpp"

namespace csikf {

namespace {

CMatrix dft_rows(const std::vector<int>& indices, int dft_size, int channel_length) {
    CMatrix c(static_cast<Eigen::Index>(indices.size()), channel_length);
    for (std::size_t m = 0; m < indices.size(); ++m) {
        for (int t = 0; t < channel_length; ++t) {
            // Reduce the integer product mod M first so the angle stays small.
            const long long prod = static_cast<long long>(indices[m]) * t;
            const long long r = ((prod % dft_size) + dft_size) % dft_size;
            c(static_cast<Eigen::Index>(m), t) = std::polar(1.0, -2.0 * kPi * static_cast<double>(r) / dft_size);
        }
    }
    return c;
}

}  // namespace

double wrap_phase(double angle) {
    double r = std::remainder(angle, 2.0 * kPi);  // [-pi, pi]
    if (r <= -kPi) r += 2.0 * kPi;
    return r;
}

bool contains_circular(const Interval& support, double x) {
    if (support.width() >= 2.0 * kPi) return true;
    const double shifted = support.lo + std::fmod(std::fmod(x - support.lo, 2.0 * kPi) + 2.0 * kPi, 2.0 * kPi);
    return shifted <= support.hi + 1e-12;
}

PilotSet::PilotSet(int dft_size, std::vector<int> pilot_indices, int channel_length)
    : PilotSet(dft_size, std::move(pilot_indices), channel_length, true) {}

PilotSet PilotSet::unchecked(int dft_size, std::vector<int> pilot_indices, int channel_length) {
    return PilotSet(dft_size, std::move(pilot_indices), channel_length, false);
}

PilotSet::PilotSet(int dft_size, std::vector<int> pilot_indices, int channel_length, bool check_identifiable)
    : dft_size_(dft_size), indices_(std::move(pilot_indices)), channel_length_(channel_length) {
    if (dft_size_ <= 0) throw InputError("PilotSet: DFT size must be positive");
    if (channel_length_ <= 0) throw InputError("PilotSet: channel length must be positive");
    const int q = static_cast<int>(indices_.size());
    if (q == 0) throw InputError("PilotSet: no pilot indices");
    if (q > dft_size_) throw InputError("PilotSet: more pilots than DFT bins");
    if (check_identifiable && channel_length_ > q - 2)
        throw InputError("PilotSet: channel length " + std::to_string(channel_length_) +
                         " exceeds pilots - 2 = " + std::to_string(q - 2));
    std::set<int> residues;
    for (int idx : indices_) {
        const int r = ((idx % dft_size_) + dft_size_) % dft_size_;
        if (!residues.insert(r).second)
            throw InputError("PilotSet: duplicate pilot index " + std::to_string(idx) + " (mod M)");
    }
    min_index_ = *std::min_element(indices_.begin(), indices_.end());
    max_index_ = *std::max_element(indices_.begin(), indices_.end());
    if (static_cast<long long>(max_index_) - min_index_ >= 1 << 16)
        throw InputError("PilotSet: pilot indices span more than 65536 slots");
    dft_ = dft_matrix(*this);
    gram_ = dft_.adjoint() * dft_;
    std::vector<int> slots(dense_size());
    for (int s = 0; s < dense_size(); ++s) slots[s] = min_index_ + s;
    dense_dft_ = dft_rows(slots, dft_size_, channel_length_);
}

PilotSet PilotSet::default_layout() {
    std::vector<int> q;
    for (int i = -58; i <= -2; ++i) q.push_back(i);
    for (int i = 2; i <= 58; ++i) q.push_back(i);
    return PilotSet(128, std::move(q), 8);
}

int PilotSet::max_abs_index() const { return std::max(std::abs(min_index_), std::abs(max_index_)); }

RVector PilotSet::index_vector() const {
    RVector v(num_pilots());
    for (int m = 0; m < num_pilots(); ++m) v(m) = indices_[m];
    return v;
}

CMatrix dft_matrix(const PilotSet& pilots) {
    return dft_rows(pilots.indices(), pilots.dft_size(), pilots.channel_length());
}

PhaseDistortion::PhaseDistortion(double slope_, double offset_, Interval slope_support_,
                                 Interval offset_support_)
    : slope(slope_), offset(wrap_phase(offset_)), slope_support(slope_support_),
      offset_support(offset_support_) {
    if (!slope_support.contains(slope))
        throw InputError("PhaseDistortion: slope " + std::to_string(slope) + " outside its support");
    if (!contains_circular(offset_support, offset))
        throw InputError("PhaseDistortion: offset " + std::to_string(offset) + " outside its support");
}

PhaseDistortion PhaseDistortion::negated() const {
    PhaseDistortion d;
    d.slope = -slope;
    d.offset = wrap_phase(-offset);
    d.slope_support = {-slope_support.hi, -slope_support.lo};
    d.offset_support = {-offset_support.hi, -offset_support.lo};
    return d;
}

RVector exponential_profile(int channel_length, double decay) {
    if (channel_length <= 0) throw InputError("exponential_profile: channel length must be positive");
    RVector p(channel_length);
    for (int l = 0; l < channel_length; ++l) p(l) = std::exp(-decay * l);
    return p / p.sum();
}

RMatrix stationary_process_noise(double alpha, const RVector& profile, int n_channels) {
    RMatrix v(profile.size(), n_channels);
    for (int i = 0; i < n_channels; ++i) v.col(i) = (1.0 - alpha * alpha) * profile;
    return v;
}

void ChannelState::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("ChannelState: alpha must lie in (0, 1]");
    if (process_noise_vars.rows() != taps.rows() || process_noise_vars.cols() != taps.cols())
        throw InputError("ChannelState: process-noise shape does not match taps");
    if (tap_power_profile.rows() != taps.rows() || tap_power_profile.cols() != taps.cols())
        throw InputError("ChannelState: tap profile shape does not match taps");
    if ((tap_power_profile.array() < 0.0).any() || (process_noise_vars.array() < 0.0).any())
        throw InputError("ChannelState: negative variance");
    for (int i = 0; i < tap_power_profile.cols(); ++i)
        if (std::abs(tap_power_profile.col(i).sum() - 1.0) > 1e-12)
            throw InputError("ChannelState: tap profile of channel " + std::to_string(i) + " does not sum to 1");
}

CMatrix apply_phase_ramp(const CMatrix& clean, double slope, double offset, const PilotSet& pilots) {
    if (clean.rows() != pilots.num_pilots())
        throw InputError("apply_distortion: row count " + std::to_string(clean.rows()) +
                         " does not match " + std::to_string(pilots.num_pilots()) + " pilots");
    CMatrix out(clean.rows(), clean.cols());
    for (int m = 0; m < clean.rows(); ++m)
        out.row(m) = clean.row(m) * std::polar(1.0, offset + slope * pilots.indices()[m]);
    return out;
}

CMatrix apply_distortion(const CMatrix& clean, const PhaseDistortion& d, const PilotSet& pilots) {
    return apply_phase_ramp(clean, d.slope, d.offset, pilots);
}

ChannelState ar1_step(const ChannelState& state, const std::optional<CMatrix>& noise_draw) {
    ChannelState next = state;
    next.taps = state.alpha * state.taps;
    if (noise_draw) {
        if (noise_draw->rows() != state.taps.rows() || noise_draw->cols() != state.taps.cols())
            throw InputError("ar1_step: noise draw shape does not match taps");
        next.taps += *noise_draw;
    }
    return next;
}

Observation observe(const ChannelState& state, const PhaseDistortion& d, double noise_var,
                    const PilotSet& pilots, const std::optional<CMatrix>& noise_draw, long packet_index) {
    if (noise_var < 0.0) throw InputError("observe: negative noise variance");
    if (state.taps.rows() != pilots.channel_length())
        throw InputError("observe: channel length does not match the pilot set");
    Observation obs;
    obs.csi = apply_distortion(pilots.dft() * state.taps, d, pilots);
    if (noise_draw) {
        if (noise_draw->rows() != obs.csi.rows() || noise_draw->cols() != obs.csi.cols())
            throw InputError("observe: noise draw shape does not match the observation");
        obs.csi += *noise_draw;
    }
    obs.noise_var = noise_var;
    obs.packet_index = packet_index;
    return obs;
}

double noise_var_from_snr_db(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

}  // namespace csikf
