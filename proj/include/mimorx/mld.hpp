#pragma once

// Genie-aided maximum-likelihood detection with full PA knowledge.
//
// A search covers k_mld carriers on every transmit antenna jointly. The other
// carriers are pinned: to the true data (lower-bound mode) or to one random
// draw per frame (upper-bound mode). Each candidate is pushed through the
// exact transmit model g(F^H x) and the estimated channel, and the candidate
// with the smallest squared residual over all tones and receive antennas wins.

#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "linear_rx.hpp"
#include "modem.hpp"
#include "numerics.hpp"
#include "pa.hpp"

namespace mimorx {

enum class MldMode { upper, lower };

class MldBudgetExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MldConfig {
    Index k_mld = 1;
    MldMode mode = MldMode::lower;
    std::vector<int> labels;  // candidate constellation labels; empty means all 16
    Index budget = 65536;

    std::vector<int> candidate_labels() const {
        if (!labels.empty()) return labels;
        std::vector<int> all(QamConstellation::order);
        std::iota(all.begin(), all.end(), 0);
        return all;
    }

    /// |labels|^(k_mld * Nt), saturating at budget + 1.
    Index search_size(Index nt) const {
        const auto nl = static_cast<Index>(candidate_labels().size());
        Index total = 1;
        for (Index i = 0; i < k_mld * nt; ++i) {
            total *= nl;
            if (total > budget) return budget + 1;
        }
        return total;
    }
};

struct MldDecision {
    BitVector bits;   // antenna-major, then searched-carrier order, 4 bits each
    double metric = 0.0;
};

/// LS estimate with the genie matrix A in place of B.
inline LsEstimate genie_ls_estimate(const std::vector<ComplexVector>& y_p, const ComplexMatrix& a, Index nt, Index l) {
    return ls_estimate(y_p, pseudo_inverse_ranked(a), nt, l);
}

/// Frequency-domain symbols that pin the non-searched carriers.
inline std::vector<ComplexVector> mld_fill(const OfdmFrame& frame, MldMode mode, std::uint64_t seed, double rho) {
    if (mode == MldMode::lower) return frame.data_symbol;
    Rng rng(derive_seed(seed, {stream::mld_fill}));
    std::vector<ComplexVector> fill;
    for (const auto& x : frame.data_symbol) fill.push_back(data_symbol(random_bits(static_cast<std::size_t>(x.size() * 4), rng), rho));
    return fill;
}

/// Exhaustive search over the carriers in `carriers` (same tones on every
/// antenna). `fill` supplies the pinned values of all other carriers.
/// Ties go to the lexicographically smallest candidate (antenna 0 most
/// significant, then carrier order, then label order).
inline MldDecision mld_detect(const std::vector<ComplexVector>& y_d, const LsEstimate& est,
                              const std::vector<ComplexVector>& fill, const IndexSet& carriers, const RappPaModel& pa,
                              double rho, const MldConfig& cfg) {
    const Index nt = est.Nt;
    const Index nr = est.Nr();
    if (static_cast<Index>(y_d.size()) != nr) throw DimensionError("mld_detect: need one observation per receive antenna");
    if (static_cast<Index>(fill.size()) != nt) throw DimensionError("mld_detect: need one fill symbol per transmit antenna");
    if (carriers.size() != cfg.k_mld) throw DimensionError("mld_detect: carrier set size must equal k_mld");
    const Index m = y_d.front().size();
    const Index size = cfg.search_size(nt);
    if (size > cfg.budget)
        throw MldBudgetExceeded("mld_detect: search space exceeds budget of " + std::to_string(cfg.budget) +
                                " candidates (k_mld=" + std::to_string(cfg.k_mld) + ", Nt=" + std::to_string(nt) + ")");

    const auto labels = cfg.candidate_labels();
    const auto nl = static_cast<Index>(labels.size());
    Index per_antenna = 1;
    for (Index i = 0; i < cfg.k_mld; ++i) per_antenna *= nl;

    const ComplexMatrix f = partial_fourier(m, est.L);
    ComplexVector y(nr * m);
    for (Index q = 0; q < nr; ++q) y.segment(q * m, m) = y_d[static_cast<std::size_t>(q)];

    // Column i of contrib[r]: received contribution of antenna r under candidate i.
    const double amp = std::sqrt(rho);
    const double norm = 1.0 / std::sqrt(static_cast<double>(m));
    std::vector<ComplexMatrix> contrib;
    for (Index r = 0; r < nt; ++r) {
        ComplexVector base = fill[static_cast<std::size_t>(r)];
        for (auto c : carriers) base[c] = 0.0;
        const ComplexVector base_time = idft(base);
        std::vector<ComplexVector> resp;
        for (Index q = 0; q < nr; ++q) resp.push_back(f * est.h(q, r));
        ComplexMatrix cm(nr * m, per_antenna);
        ComplexVector t(m);
        for (Index i = 0; i < per_antenna; ++i) {
            t = base_time;
            Index rest = i;
            for (Index j = cfg.k_mld - 1; j >= 0; --j) {
                const cplx sym = amp * qam16().point(labels[static_cast<std::size_t>(rest % nl)]);
                rest /= nl;
                const auto& w = detail::twiddles(m);
                const Index tone = carriers[j];
                for (Index n = 0; n < m; ++n) t[n] += sym * norm * std::conj(w[static_cast<std::size_t>((tone * n) % m)]);
            }
            const ComplexVector z = dft(apply_pa(t, pa));
            for (Index q = 0; q < nr; ++q) cm.col(i).segment(q * m, m) = resp[static_cast<std::size_t>(q)].cwiseProduct(z);
        }
        contrib.push_back(std::move(cm));
    }

    Index best = 0;
    double best_metric = std::numeric_limits<double>::infinity();
    const auto& last = contrib.back();
    const RealVector last_energy = last.colwise().squaredNorm().transpose();
    Index outer_total = 1;
    for (Index r = 0; r + 1 < nt; ++r) outer_total *= per_antenna;

    constexpr Index chunk = 256;
    for (Index start = 0; start < outer_total; start += chunk) {
        const Index cols = std::min(chunk, outer_total - start);
        ComplexMatrix resid(nr * m, cols);
        for (Index c = 0; c < cols; ++c) {
            resid.col(c) = y;
            Index rest = start + c;
            for (Index r = nt - 2; r >= 0; --r) {
                resid.col(c) -= contrib[static_cast<std::size_t>(r)].col(rest % per_antenna);
                rest /= per_antenna;
            }
        }
        const RealVector resid_energy = resid.colwise().squaredNorm().transpose();
        const ComplexMatrix cross = resid.adjoint() * last;  // cols x per_antenna
        for (Index c = 0; c < cols; ++c) {
            for (Index j = 0; j < per_antenna; ++j) {
                const double metric = resid_energy[c] - 2.0 * cross(c, j).real() + last_energy[j];
                if (metric < best_metric) {
                    best_metric = metric;
                    best = (start + c) * per_antenna + j;
                }
            }
        }
    }

    MldDecision out;
    out.metric = std::max(best_metric, 0.0);
    out.bits.resize(static_cast<std::size_t>(4 * nt * cfg.k_mld));
    std::vector<Index> antenna_index(static_cast<std::size_t>(nt));
    Index rest = best;
    for (Index r = nt - 1; r >= 0; --r) {
        antenna_index[static_cast<std::size_t>(r)] = rest % per_antenna;
        rest /= per_antenna;
    }
    for (Index r = 0; r < nt; ++r) {
        Index i = antenna_index[static_cast<std::size_t>(r)];
        for (Index j = cfg.k_mld - 1; j >= 0; --j) {
            const int label = labels[static_cast<std::size_t>(i % nl)];
            i /= nl;
            QamConstellation::write_label(label, out.bits.data() + 4 * (r * cfg.k_mld + j));
        }
    }
    return out;
}

/// Runs consecutive k_mld-carrier searches across all M tones of a simulated
/// frame with genie LS (matrix A). Returns detected and true bits in the same
/// order: search block, then antenna, then carrier.
struct MldFrameResult {
    BitVector detected;
    BitVector truth;
};

inline MldFrameResult mld_detect_frame(const LinkContext& ctx, const SimulatedFrame& sf, const MldConfig& mcfg) {
    const auto& cfg = ctx.cfg;
    if (cfg.M % mcfg.k_mld != 0) throw DimensionError("mld_detect_frame: k_mld must divide M");
    const auto a = build_A_oracle(sf.frame, ctx.pa, ctx.plan, cfg.M, cfg.L);
    const auto est = genie_ls_estimate(sf.y_p, a, cfg.Nt, cfg.L);
    const auto fill = mld_fill(sf.frame, mcfg.mode, sf.seed, cfg.rho);
    MldFrameResult res;
    for (Index first = 0; first < cfg.M; first += mcfg.k_mld) {
        const auto carriers = IndexSet::range(first, mcfg.k_mld, cfg.M);
        const auto dec = mld_detect(sf.y_d, est, fill, carriers, ctx.pa, cfg.rho, mcfg);
        res.detected.insert(res.detected.end(), dec.bits.begin(), dec.bits.end());
        for (Index r = 0; r < cfg.Nt; ++r)
            for (Index j = 0; j < mcfg.k_mld; ++j) {
                const auto& b = sf.frame.payload_bits[static_cast<std::size_t>(r)];
                const auto off = static_cast<std::size_t>(4 * (first + j));
                res.truth.insert(res.truth.end(), b.begin() + static_cast<std::ptrdiff_t>(off),
                                 b.begin() + static_cast<std::ptrdiff_t>(off + 4));
            }
    }
    return res;
}

}  // namespace mimorx
