#pragma once

// Block-fading multipath MIMO channel, circulant application and AWGN.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "config.hpp"
#include "numerics.hpp"
#include "rng.hpp"

namespace mimorx {

/// Nr x Nt impulse responses, each L taps. taps[q][r] links transmit r to receive q.
struct ChannelRealization {
    Index Nt = 0;
    Index Nr = 0;
    Index L = 0;
    std::vector<std::vector<ComplexVector>> taps;

    const ComplexVector& h(Index q, Index r) const {
        return taps[static_cast<std::size_t>(q)][static_cast<std::size_t>(r)];
    }

    /// h^q = [h^{q,1}; ...; h^{q,Nt}], the stacked unknown of the LS problem.
    ComplexVector stacked(Index q) const {
        ComplexVector out(Nt * L);
        for (Index r = 0; r < Nt; ++r) out.segment(r * L, L) = h(q, r);
        return out;
    }
};

/// Per (q, r) link: P ~ U{1..max_paths} paths on distinct delays drawn from
/// {0..max_delay}, each gain CN(0, 1/P). E||h||^2 = 1 over the distribution.
/// P is capped at max_delay + 1 since the delays must be distinct.
inline ChannelRealization sample_channel(const LinkConfig& cfg, std::uint64_t seed) {
    if (cfg.max_delay >= cfg.L) throw DimensionError("sample_channel: max_delay must be below L");
    Rng rng(seed);
    std::uniform_int_distribution<Index> path_count(1, cfg.max_paths);
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
    ChannelRealization ch{cfg.Nt, cfg.Nr, cfg.L, {}};
    std::vector<Index> delays(static_cast<std::size_t>(cfg.max_delay + 1));
    for (Index q = 0; q < cfg.Nr; ++q) {
        std::vector<ComplexVector> row;
        for (Index r = 0; r < cfg.Nt; ++r) {
            const Index paths = std::min(path_count(rng), cfg.max_delay + 1);
            std::iota(delays.begin(), delays.end(), Index{0});
            // partial Fisher-Yates: the first `paths` entries become the delays
            for (Index i = 0; i < paths; ++i) {
                std::uniform_int_distribution<Index> pick(i, cfg.max_delay);
                std::swap(delays[static_cast<std::size_t>(i)], delays[static_cast<std::size_t>(pick(rng))]);
            }
            ComplexVector h = ComplexVector::Zero(cfg.L);
            const double scale = 1.0 / std::sqrt(static_cast<double>(paths));
            for (Index i = 0; i < paths; ++i) {
                const double re = gauss(rng);
                const double im = gauss(rng);
                h[delays[static_cast<std::size_t>(i)]] = cplx(re, im) * scale;
            }
            row.push_back(std::move(h));
        }
        ch.taps.push_back(std::move(row));
    }
    return ch;
}

/// Passes CP-prefixed per-antenna blocks through the channel. Each receive
/// block is sum_r (h^{q,r} * x^r) truncated to the input block length; the
/// previous block's tail is not modelled, so after CP removal the result is
/// exactly the circular convolution.
inline std::vector<ComplexVector> apply_channel_time(const std::vector<ComplexVector>& x_cp, const ChannelRealization& ch,
                                                     Index cp_len) {
    if (static_cast<Index>(x_cp.size()) != ch.Nt) throw DimensionError("apply_channel_time: expected Nt input streams");
    if (cp_len < ch.L - 1) throw DimensionError("apply_channel_time: cyclic prefix shorter than L-1");
    const Index n = x_cp.empty() ? 0 : x_cp.front().size();
    for (const auto& x : x_cp)
        if (x.size() != n) throw DimensionError("apply_channel_time: input streams differ in length");
    std::vector<ComplexVector> y(static_cast<std::size_t>(ch.Nr), ComplexVector::Zero(n));
    for (Index q = 0; q < ch.Nr; ++q) {
        auto& out = y[static_cast<std::size_t>(q)];
        for (Index r = 0; r < ch.Nt; ++r) {
            const auto& h = ch.h(q, r);
            const auto& x = x_cp[static_cast<std::size_t>(r)];
            for (Index l = 0; l < ch.L; ++l) {
                if (h[l] == cplx{}) continue;
                for (Index i = l; i < n; ++i) out[i] += h[l] * x[i - l];
            }
        }
    }
    return y;
}

/// F h^{q,r} for every link: freq[q][r][m] = sum_l h_l exp(-j 2 pi m l / M).
inline std::vector<std::vector<ComplexVector>> freq_response(const ChannelRealization& ch, Index m) {
    const ComplexMatrix f = partial_fourier(m, ch.L);
    std::vector<std::vector<ComplexVector>> out(static_cast<std::size_t>(ch.Nr));
    for (Index q = 0; q < ch.Nr; ++q)
        for (Index r = 0; r < ch.Nt; ++r) out[static_cast<std::size_t>(q)].push_back(f * ch.h(q, r));
    return out;
}

struct NoiseSpec {
    double sigma2 = 0.0;
    double snr_db = 0.0;

    /// sigma^2 = Nt rho / 10^(snr_db / 10).
    static NoiseSpec from_snr(double snr_db, Index nt, double rho) {
        return {static_cast<double>(nt) * rho / std::pow(10.0, snr_db / 10.0), snr_db};
    }
};

/// Adds CN(0, sigma2) noise: sigma2/2 per real component.
inline ComplexVector add_awgn(const ComplexVector& y, const NoiseSpec& spec, Rng& rng) {
    if (spec.sigma2 < 0.0) throw std::invalid_argument("add_awgn: negative noise variance");
    if (spec.sigma2 == 0.0) return y;
    std::normal_distribution<double> gauss(0.0, std::sqrt(spec.sigma2 / 2.0));
    ComplexVector out = y;
    for (Index i = 0; i < out.size(); ++i) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        out[i] += cplx(re, im);
    }
    return out;
}

inline ComplexVector add_awgn(const ComplexVector& y, const NoiseSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    return add_awgn(y, spec, rng);
}

}  // namespace mimorx
