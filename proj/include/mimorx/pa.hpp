#pragma once

// Memoryless Rapp power amplifier (AM/AM only; AM/PM is zero).

#include <cmath>
#include <limits>
#include <stdexcept>

#include "numerics.hpp"

namespace mimorx {

/// Saturation amplitude for a clipping level 10 log10(v_sat^2 / rho) dB.
inline double clipping_to_vsat(double clipping_db, double rho) {
    if (!(rho > 0.0)) throw std::invalid_argument("clipping_to_vsat: rho must be positive");
    return std::sqrt(rho * std::pow(10.0, clipping_db / 10.0));
}

struct RappPaModel {
    double v_sat = 1.0;
    double delta = 5.0;
    double clipping_db = 0.0;
    double rho = 1.0;

    static RappPaModel from_clipping(double clipping_db, double rho, double delta = 5.0) {
        if (!(delta > 0.0)) throw std::invalid_argument("RappPaModel: delta must be positive");
        return {clipping_to_vsat(clipping_db, rho), delta, clipping_db, rho};
    }

    /// An amplifier that never saturates; apply_pa() is the identity.
    static RappPaModel linear(double rho = 1.0) {
        return {std::numeric_limits<double>::infinity(), 5.0, std::numeric_limits<double>::infinity(), rho};
    }

    bool is_linear() const noexcept { return std::isinf(v_sat); }
};

/// Output amplitude r (1 + (r/v_sat)^(2 delta))^(-1/(2 delta)).
inline double amam(double r, const RappPaModel& pa) {
    if (r < 0.0) throw std::invalid_argument("amam: amplitude must be nonnegative");
    if (pa.is_linear() || r == 0.0) return r;
    const double two_delta = 2.0 * pa.delta;
    const double u = r / pa.v_sat;
    // above saturation the v_sat-scaled form avoids overflow and stays monotone after rounding
    const double lp = two_delta * std::log(u);
    if (u > 1.0) return pa.v_sat * std::exp(-std::log1p(std::exp(-lp)) / two_delta);
    return r * std::pow(1.0 + std::exp(lp), -1.0 / two_delta);
}

/// Element-wise g(x) = x * amam(|x|) / |x|, g(0) = 0. Phase is untouched.
inline ComplexVector apply_pa(const ComplexVector& x, const RappPaModel& pa) {
    if (pa.is_linear()) return x;
    ComplexVector out(x.size());
    for (Index i = 0; i < x.size(); ++i) {
        const double r = std::abs(x[i]);
        out[i] = r < 1e-300 ? x[i] : x[i] * (amam(r, pa) / r);
    }
    return out;
}

}  // namespace mimorx
