#include "sxr/filters.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sxr {

namespace {

using cplx = std::complex<double>;

// Analog Butterworth prototype: `order` left-half-plane poles on the unit
// circle, no finite zeros, unit gain.
std::vector<cplx> butterworth_prototype(int order) {
    std::vector<cplx> poles;
    poles.reserve(order);
    for (int k = 0; k < order; ++k) {
        double theta = std::numbers::pi * (2.0 * k + order + 1.0) / (2.0 * order);
        poles.emplace_back(std::cos(theta), std::sin(theta));
    }
    return poles;
}

struct Zpk {
    std::vector<cplx> zeros;
    std::vector<cplx> poles;
    double gain = 1.0;
};

// lowpass prototype -> analog highpass at warped cutoff wo
Zpk lp_to_hp(const Zpk& lp, double wo) {
    Zpk hp;
    // gain: k * prod(-z) / prod(-p); prototype has no zeros
    cplx num(1.0, 0.0), den(1.0, 0.0);
    for (const cplx& z : lp.zeros) num *= -z;
    for (const cplx& p : lp.poles) den *= -p;
    hp.gain = lp.gain * (num / den).real();
    for (const cplx& z : lp.zeros) hp.zeros.push_back(wo / z);
    for (const cplx& p : lp.poles) hp.poles.push_back(wo / p);
    std::size_t degree = lp.poles.size() - lp.zeros.size();
    for (std::size_t i = 0; i < degree; ++i) hp.zeros.emplace_back(0.0, 0.0);
    return hp;
}

// lowpass prototype -> analog bandpass at center wo, width bw
Zpk lp_to_bp(const Zpk& lp, double wo, double bw) {
    Zpk bp;
    std::size_t degree = lp.poles.size() - lp.zeros.size();
    bp.gain = lp.gain * std::pow(bw, static_cast<double>(degree));
    auto transform = [&](const std::vector<cplx>& roots, std::vector<cplx>& out) {
        for (const cplx& r : roots) {
            cplx s = r * (bw / 2.0);
            cplx d = std::sqrt(s * s - wo * wo);
            out.push_back(s + d);
            out.push_back(s - d);
        }
    };
    transform(lp.zeros, bp.zeros);
    transform(lp.poles, bp.poles);
    for (std::size_t i = 0; i < degree; ++i) bp.zeros.emplace_back(0.0, 0.0);
    return bp;
}

// bilinear transform, sampling rate fs
Zpk bilinear(const Zpk& analog, double fs) {
    Zpk digital;
    const cplx fs2(2.0 * fs, 0.0);
    cplx num(1.0, 0.0), den(1.0, 0.0);
    for (const cplx& z : analog.zeros) num *= fs2 - z;
    for (const cplx& p : analog.poles) den *= fs2 - p;
    digital.gain = analog.gain * (num / den).real();
    for (const cplx& z : analog.zeros) digital.zeros.push_back((fs2 + z) / (fs2 - z));
    for (const cplx& p : analog.poles) digital.poles.push_back((fs2 + p) / (fs2 - p));
    std::size_t degree = analog.poles.size() - analog.zeros.size();
    for (std::size_t i = 0; i < degree; ++i) digital.zeros.emplace_back(-1.0, 0.0);
    return digital;
}

double prewarp(double freq_hz, double fs_hz) {
    return 2.0 * fs_hz * std::tan(std::numbers::pi * freq_hz / fs_hz);
}

// Pair conjugate poles with real zeros (all our zeros sit at z = +-1) into
// normalized biquads; overall gain is folded into the first section.
std::vector<Biquad> zpk_to_sos(const Zpk& zpk) {
    if (zpk.poles.size() % 2 != 0)
        throw std::invalid_argument("sos pairing requires an even pole count");

    // Denominators: one per conjugate pair, real poles folded pairwise.
    struct PolePair { double a1, a2, radius; };
    std::vector<PolePair> pairs;
    std::vector<double> reals;
    for (const cplx& p : zpk.poles) {
        if (p.imag() > 1e-14)
            pairs.push_back({-2.0 * p.real(), std::norm(p), std::abs(p)});
        else if (p.imag() >= -1e-14)
            reals.push_back(p.real());
    }
    std::sort(reals.begin(), reals.end());
    for (std::size_t i = 0; i + 1 < reals.size(); i += 2)
        pairs.push_back({-(reals[i] + reals[i + 1]), reals[i] * reals[i + 1],
                         std::max(std::abs(reals[i]), std::abs(reals[i + 1]))});
    std::sort(pairs.begin(), pairs.end(),
              [](const PolePair& a, const PolePair& b) { return a.radius < b.radius; });

    // zeros at +1 / -1 by multiplicity
    int plus = 0, minus = 0;
    for (const cplx& z : zpk.zeros) {
        if (z.real() > 0) ++plus;
        else ++minus;
    }

    std::vector<Biquad> sections;
    sections.reserve(pairs.size());
    for (const PolePair& p : pairs) {
        Biquad s;
        s.a1 = p.a1;
        s.a2 = p.a2;
        // hand out one zero of each available sign, preferring a (+1, -1) mix
        double z0 = 0, z1 = 0;
        if (plus > 0 && minus > 0) { z0 = 1.0; z1 = -1.0; --plus; --minus; }
        else if (plus >= 2) { z0 = 1.0; z1 = 1.0; plus -= 2; }
        else if (minus >= 2) { z0 = -1.0; z1 = -1.0; minus -= 2; }
        s.b0 = 1.0;
        s.b1 = -(z0 + z1);
        s.b2 = z0 * z1;
        sections.push_back(s);
    }
    if (!sections.empty()) {
        sections.front().b0 *= zpk.gain;
        sections.front().b1 *= zpk.gain;
        sections.front().b2 *= zpk.gain;
    }
    for (const Biquad& s : sections)
        if (!s.stable()) throw std::runtime_error("designed filter section is unstable");
    return sections;
}

} // namespace

SosCascade::SosCascade(std::vector<Biquad> sections, int channels)
    : sections_(std::move(sections)), channels_(channels) {
    if (channels_ < 1) throw std::invalid_argument("channel count must be positive");
    state_.assign(static_cast<std::size_t>(channels_) * sections_.size() * 2, 0.0);
}

double SosCascade::step(double x, int channel) {
    double* st = state_.data() + static_cast<std::size_t>(channel) * sections_.size() * 2;
    for (const Biquad& s : sections_) {
        double y = s.b0 * x + st[0];
        st[0] = s.b1 * x - s.a1 * y + st[1];
        st[1] = s.b2 * x - s.a2 * y;
        st += 2;
        x = y;
    }
    return x;
}

void SosCascade::reset() { std::fill(state_.begin(), state_.end(), 0.0); }

double SosCascade::magnitude_response(double freq_hz, double fs_hz) const {
    const double w = 2.0 * std::numbers::pi * freq_hz / fs_hz;
    const cplx e1 = std::polar(1.0, -w);
    const cplx e2 = std::polar(1.0, -2.0 * w);
    cplx h(1.0, 0.0);
    for (const Biquad& s : sections_)
        h *= (s.b0 + s.b1 * e1 + s.b2 * e2) / (1.0 + s.a1 * e1 + s.a2 * e2);
    return std::abs(h);
}

SosCascade design_sos_bandpass(double lo_hz, double hi_hz, double fs_hz, int order,
                               int channels) {
    if (!(0.0 < lo_hz && lo_hz < hi_hz && hi_hz < fs_hz / 2.0))
        throw std::invalid_argument("bandpass edges must satisfy 0 < lo < hi < fs/2");
    if (order < 2 || order % 2 != 0)
        throw std::invalid_argument("filter order must be a positive even integer");

    Zpk lp;
    lp.poles = butterworth_prototype(order);
    double w1 = prewarp(lo_hz, fs_hz);
    double w2 = prewarp(hi_hz, fs_hz);
    Zpk bp = lp_to_bp(lp, std::sqrt(w1 * w2), w2 - w1);
    return SosCascade(zpk_to_sos(bilinear(bp, fs_hz)), channels);
}

SosCascade design_sos_highpass(double cut_hz, double fs_hz, int order, int channels) {
    if (!(0.0 < cut_hz && cut_hz < fs_hz / 2.0))
        throw std::invalid_argument("highpass cutoff must satisfy 0 < cut < fs/2");
    if (order < 2 || order % 2 != 0)
        throw std::invalid_argument("filter order must be a positive even integer");

    Zpk lp;
    lp.poles = butterworth_prototype(order);
    Zpk hp = lp_to_hp(lp, prewarp(cut_hz, fs_hz));
    return SosCascade(zpk_to_sos(bilinear(hp, fs_hz)), channels);
}

std::vector<double> filter_causal(SosCascade& sos, std::span<const double> series,
                                  int channel) {
    std::vector<double> out(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) out[i] = sos.step(series[i], channel);
    return out;
}

void detrend_in_place(std::span<double> window) {
    const std::size_t n = window.size();
    if (n < 2) throw std::invalid_argument("detrend needs at least 2 samples");
    const double xbar = (static_cast<double>(n) - 1.0) / 2.0;
    double sxx = 0.0, sxy = 0.0, sy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double dx = static_cast<double>(k) - xbar;
        sxx += dx * dx;
        sxy += dx * window[k];
        sy += window[k];
    }
    const double slope = sxy / sxx;
    const double intercept = sy / static_cast<double>(n) - slope * xbar;
    for (std::size_t k = 0; k < n; ++k)
        window[k] -= intercept + slope * static_cast<double>(k);
}

std::vector<double> detrend(std::span<const double> window) {
    std::vector<double> out(window.begin(), window.end());
    detrend_in_place(out);
    return out;
}

} // namespace sxr
