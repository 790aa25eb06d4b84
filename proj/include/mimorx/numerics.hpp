#pragma once

// Complex linear-algebra and transform kernels shared by the whole library.
//
// Conventions: the forward DFT is unitary (1/sqrt(M) scaling). Nothing else in
// the library rescales transforms, so callers can rely on Parseval everywhere.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace mimorx {

using cplx = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Raised when operand shapes or configuration dimensions do not line up.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline bool all_finite(const ComplexVector& v) { return v.allFinite(); }

/// Sorted, duplicate-free subset of {0, ..., universe-1}.
class IndexSet {
public:
    IndexSet() = default;
    IndexSet(std::vector<Index> indices, Index universe) : idx_(std::move(indices)), universe_(universe) {
        for (std::size_t i = 0; i < idx_.size(); ++i) {
            if (idx_[i] < 0 || idx_[i] >= universe_)
                throw DimensionError("IndexSet: index " + std::to_string(idx_[i]) + " outside universe of size " +
                                     std::to_string(universe_));
            if (i > 0 && idx_[i] <= idx_[i - 1]) throw DimensionError("IndexSet: indices must be strictly increasing");
        }
    }

    /// {first, first+stride, ...} with `count` entries.
    static IndexSet strided(Index first, Index stride, Index count, Index universe) {
        std::vector<Index> v(static_cast<std::size_t>(count));
        for (Index i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = first + i * stride;
        return IndexSet(std::move(v), universe);
    }

    static IndexSet range(Index first, Index count, Index universe) { return strided(first, 1, count, universe); }

    Index size() const noexcept { return static_cast<Index>(idx_.size()); }
    Index universe() const noexcept { return universe_; }
    Index operator[](Index i) const { return idx_[static_cast<std::size_t>(i)]; }
    const std::vector<Index>& indices() const noexcept { return idx_; }
    auto begin() const noexcept { return idx_.begin(); }
    auto end() const noexcept { return idx_.end(); }

private:
    std::vector<Index> idx_;
    Index universe_ = 0;
};

namespace detail {

inline bool is_pow2(Index n) { return n > 0 && (n & (n - 1)) == 0; }

// exp(-j 2 pi k / n) for k in [0, n). Cached per thread and size.
inline const std::vector<cplx>& twiddles(Index n) {
    thread_local std::unordered_map<Index, std::vector<cplx>> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<cplx> w(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k)
        w[static_cast<std::size_t>(k)] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
    return cache.emplace(n, std::move(w)).first->second;
}

// Unnormalized in-place radix-2 transform. sign = -1 forward, +1 inverse.
inline void fft_radix2(ComplexVector& a, int sign) {
    const Index n = a.size();
    for (Index i = 1, j = 0; i < n; ++i) {
        Index bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const auto& w = twiddles(n);
    for (Index len = 2; len <= n; len <<= 1) {
        const Index half = len >> 1;
        const Index step = n / len;
        for (Index start = 0; start < n; start += len) {
            for (Index k = 0; k < half; ++k) {
                cplx tw = w[static_cast<std::size_t>(k * step)];
                if (sign > 0) tw = std::conj(tw);
                const cplx u = a[start + k];
                const cplx v = a[start + k + half] * tw;
                a[start + k] = u + v;
                a[start + k + half] = u - v;
            }
        }
    }
}

inline ComplexVector dft_dense_unnormalized(const ComplexVector& x, int sign) {
    const Index n = x.size();
    const auto& w = twiddles(n);
    ComplexVector out(n);
    for (Index m = 0; m < n; ++m) {
        cplx acc{0.0, 0.0};
        for (Index k = 0; k < n; ++k) {
            cplx tw = w[static_cast<std::size_t>((m * k) % n)];
            acc += x[k] * (sign > 0 ? std::conj(tw) : tw);
        }
        out[m] = acc;
    }
    return out;
}

inline ComplexVector transform(const ComplexVector& x, int sign, bool force_dense) {
    if (x.size() < 1) throw DimensionError("dft: empty input");
    ComplexVector out;
    if (!force_dense && is_pow2(x.size())) {
        out = x;
        fft_radix2(out, sign);
    } else {
        out = dft_dense_unnormalized(x, sign);
    }
    out /= std::sqrt(static_cast<double>(x.size()));
    return out;
}

}  // namespace detail

/// Unitary DFT: y[m] = M^{-1/2} sum_k x[k] exp(-j 2 pi m k / M).
/// Radix-2 FFT for power-of-two lengths, dense O(M^2) evaluation otherwise.
inline ComplexVector dft(const ComplexVector& x) { return detail::transform(x, -1, false); }

/// Inverse of dft().
inline ComplexVector idft(const ComplexVector& x) { return detail::transform(x, +1, false); }

/// Dense-matrix evaluation regardless of length; exposed so the FFT path can be cross-checked.
inline ComplexVector dft_dense(const ComplexVector& x) { return detail::transform(x, -1, true); }
inline ComplexVector idft_dense(const ComplexVector& x) { return detail::transform(x, +1, true); }

/// The M x M unitary DFT matrix.
inline ComplexMatrix dft_matrix(Index m) {
    if (m < 1) throw DimensionError("dft_matrix: size must be positive");
    const auto& w = detail::twiddles(m);
    ComplexMatrix f(m, m);
    const double s = 1.0 / std::sqrt(static_cast<double>(m));
    for (Index r = 0; r < m; ++r)
        for (Index c = 0; c < m; ++c) f(r, c) = s * w[static_cast<std::size_t>((r * c) % m)];
    return f;
}

/// First L columns of the DFT matrix scaled by sqrt(M): entry (m, l) = exp(-j 2 pi m l / M).
/// Maps an L-tap impulse response to its M-point frequency response.
inline ComplexMatrix partial_fourier(Index m, Index l) {
    if (m < 1 || l < 1 || l > m)
        throw DimensionError("partial_fourier: need 1 <= L <= M (M=" + std::to_string(m) + ", L=" + std::to_string(l) + ")");
    const auto& w = detail::twiddles(m);
    ComplexMatrix f(m, l);
    for (Index r = 0; r < m; ++r)
        for (Index c = 0; c < l; ++c) f(r, c) = w[static_cast<std::size_t>((r * c) % m)];
    return f;
}

inline ComplexMatrix row_select(const ComplexMatrix& mtx, const IndexSet& rows) {
    ComplexMatrix out(rows.size(), mtx.cols());
    for (Index i = 0; i < rows.size(); ++i) {
        if (rows[i] >= mtx.rows())
            throw DimensionError("row_select: row " + std::to_string(rows[i]) + " out of range for " +
                                 std::to_string(mtx.rows()) + " rows");
        out.row(i) = mtx.row(rows[i]);
    }
    return out;
}

inline ComplexVector select(const ComplexVector& v, const IndexSet& idx) {
    ComplexVector out(idx.size());
    for (Index i = 0; i < idx.size(); ++i) {
        if (idx[i] >= v.size()) throw DimensionError("select: index out of range");
        out[i] = v[idx[i]];
    }
    return out;
}

/// Singular values at or below this fraction of the largest one are treated as zero.
inline constexpr double kPinvRelTolerance = 1e-10;

struct PseudoInverse {
    ComplexMatrix matrix;
    Index rank = 0;
    bool rank_deficient() const noexcept { return rank < std::min(matrix.rows(), matrix.cols()); }
};

/// Moore-Penrose pseudo-inverse from a thin SVD, truncating singular values
/// below kPinvRelTolerance * sigma_max. The reported rank counts the kept values.
inline PseudoInverse pseudo_inverse_ranked(const ComplexMatrix& a) {
    if (!a.allFinite()) throw std::invalid_argument("pseudo_inverse: non-finite input");
    PseudoInverse out;
    out.matrix = ComplexMatrix::Zero(a.cols(), a.rows());
    if (a.size() == 0) return out;
    Eigen::JacobiSVD<ComplexMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s[0] == 0.0) return out;
    const double cutoff = kPinvRelTolerance * s[0];
    for (Index i = 0; i < s.size(); ++i) {
        if (s[i] <= cutoff) break;
        out.matrix.noalias() += svd.matrixV().col(i) * (1.0 / s[i]) * svd.matrixU().col(i).adjoint();
        ++out.rank;
    }
    return out;
}

inline ComplexMatrix pseudo_inverse(const ComplexMatrix& a) { return pseudo_inverse_ranked(a).matrix; }

}  // namespace mimorx
