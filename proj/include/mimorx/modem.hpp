#pragma once

// 16QAM mapping, pilot construction, OFDM frame assembly and cyclic prefix.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "config.hpp"
#include "numerics.hpp"
#include "rng.hpp"

namespace mimorx {

using BitVector = std::vector<std::uint8_t>;

/// Gray-labelled 16QAM with unit average energy.
///
/// A 4-bit label b3 b2 b1 b0 maps to (I + jQ)/sqrt(10), with b3 b2 choosing I
/// and b1 b0 choosing Q from {00: -3, 01: -1, 11: +1, 10: +3}.
class QamConstellation {
public:
    static constexpr int order = 16;
    static constexpr int bits_per_symbol = 4;

    QamConstellation() {
        const double s = 1.0 / std::sqrt(10.0);
        for (int label = 0; label < order; ++label)
            points_[static_cast<std::size_t>(label)] = cplx(level(label >> 2), level(label & 3)) * s;
    }

    static constexpr double level(int two_bits) {
        switch (two_bits & 3) {
            case 0b00: return -3.0;
            case 0b01: return -1.0;
            case 0b11: return 1.0;
            default: return 3.0;
        }
    }

    cplx point(int label) const { return points_.at(static_cast<std::size_t>(label)); }
    const std::array<cplx, order>& points() const noexcept { return points_; }

    /// Nearest point; equidistant candidates resolve to the lowest label.
    int nearest(cplx z) const {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int label = 0; label < order; ++label) {
            const double d = std::norm(z - points_[static_cast<std::size_t>(label)]);
            if (d < best_d) {
                best_d = d;
                best = label;
            }
        }
        return best;
    }

    static int label_of(const std::uint8_t* bits) { return (bits[0] << 3) | (bits[1] << 2) | (bits[2] << 1) | bits[3]; }

    static void write_label(int label, std::uint8_t* out) {
        out[0] = static_cast<std::uint8_t>((label >> 3) & 1);
        out[1] = static_cast<std::uint8_t>((label >> 2) & 1);
        out[2] = static_cast<std::uint8_t>((label >> 1) & 1);
        out[3] = static_cast<std::uint8_t>(label & 1);
    }

private:
    std::array<cplx, order> points_{};
};

inline const QamConstellation& qam16() {
    static const QamConstellation c;
    return c;
}

inline ComplexVector map_bits(const BitVector& bits, const QamConstellation& qam = qam16()) {
    if (bits.size() % 4 != 0) throw DimensionError("map_bits: bit count must be a multiple of 4");
    ComplexVector out(static_cast<Index>(bits.size() / 4));
    for (Index i = 0; i < out.size(); ++i) {
        const auto* b = bits.data() + 4 * i;
        for (int k = 0; k < 4; ++k)
            if (b[k] > 1) throw std::invalid_argument("map_bits: bits must be 0 or 1");
        out[i] = qam.point(QamConstellation::label_of(b));
    }
    return out;
}

inline BitVector hard_demap(const ComplexVector& symbols, const QamConstellation& qam = qam16()) {
    BitVector out(static_cast<std::size_t>(symbols.size()) * 4);
    for (Index i = 0; i < symbols.size(); ++i) QamConstellation::write_label(qam.nearest(symbols[i]), out.data() + 4 * i);
    return out;
}

inline BitVector random_bits(std::size_t n, Rng& rng) {
    BitVector b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng() >> 63);
    return b;
}

struct PilotPlan {
    Index M_p = 0;
    IndexSet tones;                      // equispaced pilot subcarriers, 0-based
    std::vector<ComplexVector> sequences;  // one length-M_p sequence per transmit antenna
};

/// Tones {0, s, 2s, ...} with s = M / M_p. Antenna r (0-based) sends
/// sqrt(rho) * exp(-j 2 pi k r L / M_p), k = 0..M_p-1. The ramps are
/// orthogonal because r*L/M_p is a distinct multiple of 1/Nt per antenna.
inline PilotPlan build_pilot_plan(const LinkConfig& cfg) {
    if (cfg.M_p != cfg.Nt * cfg.L) throw DimensionError("build_pilot_plan: M_p must equal Nt*L");
    if (cfg.M_p > cfg.M || cfg.M % cfg.M_p != 0) throw DimensionError("build_pilot_plan: M must be divisible by M_p");
    PilotPlan plan;
    plan.M_p = cfg.M_p;
    plan.tones = IndexSet::strided(0, cfg.M / cfg.M_p, cfg.M_p, cfg.M);
    const double amp = std::sqrt(cfg.rho);
    for (Index r = 0; r < cfg.Nt; ++r) {
        ComplexVector s(cfg.M_p);
        for (Index k = 0; k < cfg.M_p; ++k) {
            const Index phase_idx = (k * r * cfg.L) % cfg.M_p;
            s[k] = std::polar(amp, -2.0 * std::numbers::pi * static_cast<double>(phase_idx) / static_cast<double>(cfg.M_p));
        }
        plan.sequences.push_back(std::move(s));
    }
    return plan;
}

/// One pilot OFDM symbol followed by one data OFDM symbol, per transmit antenna,
/// all in the frequency domain.
struct OfdmFrame {
    std::vector<ComplexVector> pilot_symbol;
    std::vector<ComplexVector> data_symbol;
    std::vector<BitVector> payload_bits;

    Index Nt() const { return static_cast<Index>(data_symbol.size()); }

    /// Payload bits of all antennas, antenna-major.
    BitVector all_bits() const {
        BitVector out;
        for (const auto& b : payload_bits) out.insert(out.end(), b.begin(), b.end());
        return out;
    }
};

/// Pilot values on the pilot tones and zeros elsewhere.
inline ComplexVector pilot_symbol(const PilotPlan& plan, Index antenna, Index m) {
    ComplexVector x = ComplexVector::Zero(m);
    for (Index k = 0; k < plan.M_p; ++k) x[plan.tones[k]] = plan.sequences[static_cast<std::size_t>(antenna)][k];
    return x;
}

/// Data symbols are constellation points scaled to average power rho.
inline ComplexVector data_symbol(const BitVector& bits, double rho) { return map_bits(bits) * std::sqrt(rho); }

/// `bits` holds Nt * M * 4 payload bits, antenna-major then tone.
inline OfdmFrame build_frame(const LinkConfig& cfg, const PilotPlan& plan, const BitVector& bits) {
    const auto per_antenna = static_cast<std::size_t>(cfg.M * 4);
    if (bits.size() != per_antenna * static_cast<std::size_t>(cfg.Nt))
        throw DimensionError("build_frame: expected Nt*M*4 payload bits");
    OfdmFrame f;
    for (Index r = 0; r < cfg.Nt; ++r) {
        BitVector b(bits.begin() + static_cast<std::ptrdiff_t>(r * per_antenna),
                    bits.begin() + static_cast<std::ptrdiff_t>((r + 1) * per_antenna));
        f.pilot_symbol.push_back(pilot_symbol(plan, r, cfg.M));
        f.data_symbol.push_back(data_symbol(b, cfg.rho));
        f.payload_bits.push_back(std::move(b));
    }
    return f;
}

inline ComplexVector add_cyclic_prefix(const ComplexVector& x, Index cp_len) {
    if (cp_len < 0 || cp_len > x.size()) throw DimensionError("add_cyclic_prefix: CP length out of range");
    ComplexVector out(x.size() + cp_len);
    out.head(cp_len) = x.tail(cp_len);
    out.tail(x.size()) = x;
    return out;
}

inline ComplexVector remove_cyclic_prefix(const ComplexVector& x, Index cp_len) {
    if (cp_len < 0 || cp_len >= x.size()) throw DimensionError("remove_cyclic_prefix: CP length out of range");
    return x.tail(x.size() - cp_len);
}

}  // namespace mimorx
