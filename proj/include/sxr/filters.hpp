#pragma once

#include <complex>
#include <span>
#include <vector>

namespace sxr {

// One second-order section, normalized so a0 = 1.
struct Biquad {
    double b0 = 0, b1 = 0, b2 = 0;
    double a1 = 0, a2 = 0;

    bool stable() const { return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2; }
};

// Cascade of biquads with per-channel delay state (direct form II transposed).
// Filtering is strictly causal; state persists across calls until reset().
class SosCascade {
public:
    SosCascade() = default;
    SosCascade(std::vector<Biquad> sections, int channels = 1);

    // Run one sample of one channel through every section.
    double step(double x, int channel = 0);

    void reset();
    int channels() const { return channels_; }
    const std::vector<Biquad>& sections() const { return sections_; }

    // |H(e^{j 2 pi f / fs})| evaluated from the coefficients.
    double magnitude_response(double freq_hz, double fs_hz) const;

private:
    std::vector<Biquad> sections_;
    std::vector<double> state_; // [channel][section][2]
    int channels_ = 0;
};

// Butterworth designs at prototype order `order` (even). The bandpass
// transform doubles the pole count, so bandpass cascades carry `order`
// sections and highpass cascades `order / 2`.
SosCascade design_sos_bandpass(double lo_hz, double hi_hz, double fs_hz, int order,
                               int channels = 1);
SosCascade design_sos_highpass(double cut_hz, double fs_hz, int order, int channels = 1);

// Filter a whole series through channel `channel`, advancing its state.
std::vector<double> filter_causal(SosCascade& sos, std::span<const double> series,
                                  int channel = 0);

// Subtract the least-squares straight line. Length must be >= 2.
std::vector<double> detrend(std::span<const double> window);
void detrend_in_place(std::span<double> window);

} // namespace sxr
