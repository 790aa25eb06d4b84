#pragma once

// Least-squares channel estimation from pilots and zero-forcing equalization.
//
// The pilot observation at receive antenna q is y_p^q = B h^q + noise when the
// transmitter is linear, with B = [diag(x_p^1) F_p, ..., diag(x_p^Nt) F_p].
// With a nonlinear PA the true model is A h^q where A is built from the PA
// output; the receiver does not know A and uses B regardless.

#include <vector>

#include "channel.hpp"
#include "modem.hpp"
#include "numerics.hpp"
#include "pa.hpp"

namespace mimorx {

/// Stacked tap estimates, one length Nt*L vector per receive antenna.
struct LsEstimate {
    Index Nt = 0;
    Index L = 0;
    std::vector<ComplexVector> h_hat;
    Index rank = 0;
    bool rank_deficient = false;

    Index Nr() const { return static_cast<Index>(h_hat.size()); }
    ComplexVector h(Index q, Index r) const { return h_hat[static_cast<std::size_t>(q)].segment(r * L, L); }

    static LsEstimate from_channel(const ChannelRealization& ch) {
        LsEstimate e{ch.Nt, ch.L, {}, ch.Nt * ch.L, false};
        for (Index q = 0; q < ch.Nr; ++q) e.h_hat.push_back(ch.stacked(q));
        return e;
    }
};

/// Time-domain estimate of the PA outputs, antenna-major (length Nt*M).
struct EqualizedSymbol {
    ComplexVector d_hat;
    Index deficient_tones = 0;  // tones whose Nr x Nt block hit the pinv cutoff
};

/// B = [diag(x_p^1) F_p, ..., diag(x_p^Nt) F_p], size M_p x Nt*L.
inline ComplexMatrix build_B(const PilotPlan& plan, Index m, Index l) {
    const Index nt = static_cast<Index>(plan.sequences.size());
    if (plan.M_p != nt * l) throw DimensionError("build_B: M_p must equal Nt*L");
    const ComplexMatrix fp = row_select(partial_fourier(m, l), plan.tones);
    ComplexMatrix b(plan.M_p, nt * l);
    for (Index r = 0; r < nt; ++r) {
        const auto& x = plan.sequences[static_cast<std::size_t>(r)];
        if (x.size() != plan.M_p) throw DimensionError("build_B: pilot sequence length mismatch");
        b.middleCols(r * l, l) = x.asDiagonal() * fp;
    }
    return b;
}

/// Genie matrix A = [diag(Fp g(F^H x_p^1)) F_p, ...]: what B would be if the
/// receiver knew the PA. Only the MLD benchmarks and tests use this.
inline ComplexMatrix build_A_oracle(const OfdmFrame& frame, const RappPaModel& pa, const PilotPlan& plan, Index m,
                                    Index l) {
    const Index nt = frame.Nt();
    const ComplexMatrix fp = row_select(partial_fourier(m, l), plan.tones);
    ComplexMatrix a(plan.M_p, nt * l);
    for (Index r = 0; r < nt; ++r) {
        const auto& xp = frame.pilot_symbol[static_cast<std::size_t>(r)];
        if (xp.size() != m) throw DimensionError("build_A_oracle: pilot symbol length mismatch");
        const ComplexVector distorted = select(dft(apply_pa(idft(xp), pa)), plan.tones);
        a.middleCols(r * l, l) = distorted.asDiagonal() * fp;
    }
    return a;
}

/// h^q = P y_p^q for every receive antenna, with P a precomputed pseudo-inverse
/// of the pilot matrix (B for the practical receiver, A for the genie one).
inline LsEstimate ls_estimate(const std::vector<ComplexVector>& y_p, const PseudoInverse& pinv, Index nt, Index l) {
    if (pinv.matrix.rows() != nt * l) throw DimensionError("ls_estimate: pseudo-inverse has wrong row count");
    LsEstimate e{nt, l, {}, pinv.rank, pinv.rank_deficient()};
    for (const auto& y : y_p) {
        if (y.size() != pinv.matrix.cols()) throw DimensionError("ls_estimate: y_p length must equal M_p");
        e.h_hat.push_back(pinv.matrix * y);
    }
    return e;
}

inline LsEstimate ls_estimate(const std::vector<ComplexVector>& y_p, const ComplexMatrix& b, Index nt, Index l) {
    return ls_estimate(y_p, pseudo_inverse_ranked(b), nt, l);
}

/// Zero-forcing estimate of d(t) from the frequency-domain data observations
/// (one length-M vector per receive antenna).
///
/// The stacked channel factors as H = G (I_Nt (x) F) where G is per-tone block
/// diagonal, so H^+ y = (I_Nt (x) F^H) G^+ y: an Nr x Nt pseudo-inverse per
/// tone followed by one inverse DFT per transmit antenna.
inline EqualizedSymbol zf_equalize(const std::vector<ComplexVector>& y_d, const LsEstimate& est, Index m) {
    const Index nr = est.Nr();
    const Index nt = est.Nt;
    if (static_cast<Index>(y_d.size()) != nr) throw DimensionError("zf_equalize: need one observation per receive antenna");
    for (const auto& y : y_d)
        if (y.size() != m) throw DimensionError("zf_equalize: observation length must be M");
    const ComplexMatrix f = partial_fourier(m, est.L);
    // resp[q](:, r) = F h^{q,r}
    std::vector<ComplexMatrix> resp(static_cast<std::size_t>(nr), ComplexMatrix(m, nt));
    for (Index q = 0; q < nr; ++q)
        for (Index r = 0; r < nt; ++r) resp[static_cast<std::size_t>(q)].col(r) = f * est.h(q, r);

    EqualizedSymbol out;
    ComplexMatrix x_freq(m, nt);
    ComplexMatrix g(nr, nt);
    ComplexVector y(nr);
    for (Index tone = 0; tone < m; ++tone) {
        for (Index q = 0; q < nr; ++q) {
            g.row(q) = resp[static_cast<std::size_t>(q)].row(tone);
            y[q] = y_d[static_cast<std::size_t>(q)][tone];
        }
        const auto pinv = pseudo_inverse_ranked(g);
        if (pinv.rank_deficient()) ++out.deficient_tones;
        x_freq.row(tone) = (pinv.matrix * y).transpose();
    }
    out.d_hat.resize(nt * m);
    for (Index r = 0; r < nt; ++r) out.d_hat.segment(r * m, m) = idft(x_freq.col(r));
    return out;
}

/// Classical detector that takes the PA to be linear: DFT each antenna block
/// of d_hat back to the tones and slice against the rho-scaled constellation.
/// Bits come out antenna-major, tone-minor.
inline BitVector zf_baseline_detect(const EqualizedSymbol& eq, Index nt, double rho) {
    if (nt < 1 || eq.d_hat.size() % nt != 0) throw DimensionError("zf_baseline_detect: d_hat length must be Nt*M");
    const Index m = eq.d_hat.size() / nt;
    BitVector bits;
    bits.reserve(static_cast<std::size_t>(4 * nt * m));
    const double inv = 1.0 / std::sqrt(rho);
    for (Index r = 0; r < nt; ++r) {
        const auto b = hard_demap(dft(eq.d_hat.segment(r * m, m)) * inv);
        bits.insert(bits.end(), b.begin(), b.end());
    }
    return bits;
}

}  // namespace mimorx
