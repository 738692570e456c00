#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "orthochain/numerics.hpp"

namespace orthochain {

/// Per-layer diagnostics of one representation.
struct LayerTrace {
    std::size_t layer = 0;
    double v_gap = 0.0;      // orthogonality gap V
    double lyap_gap = 0.0;   // 1/n - sigma_n^2 (NaN when the norm is not one)
    double sigma_min = 0.0;
    double frob_norm = 0.0;
    std::vector<double> cosines;  // all unordered column pairs, (0,1), (0,2), ...
    double entry_mean = 0.0;      // of the pre-normalization product W F(H)
    double entry_var = 0.0;
    Matrix gram;                  // H^T H
    SingularSpectrum spectrum;

    double mean_abs_cosine() const {
        if (cosines.empty()) return 0.0;
        double s = 0.0;
        for (double c : cosines) s += std::abs(c);
        return s / static_cast<double>(cosines.size());
    }
};

inline constexpr double kUnitNormTolerance = 1e-8;

inline Matrix gram(const Matrix& h) {
    Matrix c = h.transpose() * h;
    return 0.5 * (c + c.transpose());
}

/// || C / tr(C) - I/n ||_F for a Gram matrix C.
inline double orthogonality_gap_from_gram(const Matrix& c) {
    const double tr = c.trace();
    if (!(tr > 0.0)) throw DomainError("orthogonality_gap: zero matrix");
    const Index n = c.rows();
    Matrix dev = c / tr;
    dev.diagonal().array() -= 1.0 / static_cast<double>(n);
    return dev.norm();
}

/// Orthogonality gap V(H) = || H^T H / ||H||_F^2 - I_n / n ||_F.
inline double orthogonality_gap(const Matrix& h) { return orthogonality_gap_from_gram(gram(h)); }

/// V from the singular values of a unit-norm matrix: V^2 = sum sigma^4 - 1/n.
inline double orthogonality_gap_from_spectrum(const SingularSpectrum& s, Index n) {
    const double v2 = s.squared().array().square().sum() - 1.0 / static_cast<double>(n);
    return std::sqrt(std::max(0.0, v2));
}

inline double lyapunov_gap_from_spectrum(const SingularSpectrum& s, Index n) {
    // Fewer singular values than columns means sigma_n is exactly zero.
    const double sn = s.size() < n ? 0.0 : s.min();
    return 1.0 / static_cast<double>(n) - sn * sn;
}

/// Lyapunov gap 1/n - sigma_n(H)^2, defined for unit-Frobenius inputs only.
inline double lyapunov_gap(const Matrix& h) {
    const double f = h.norm();
    if (std::abs(f - 1.0) > kUnitNormTolerance)
        throw DomainError("lyapunov_gap: input must have unit Frobenius norm (got " + std::to_string(f) + ")");
    return lyapunov_gap_from_spectrum(singular_values(h), h.cols());
}

inline std::vector<double> pairwise_cosines(const Matrix& h) {
    const Index n = h.cols();
    Vector norms = h.colwise().norm();
    for (Index j = 0; j < n; ++j)
        if (!(norms[j] > 0.0)) throw DomainError("pairwise_cosines: column " + std::to_string(j) + " is zero");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Index a = 0; a < n; ++a)
        for (Index b = a + 1; b < n; ++b) {
            const double c = h.col(a).dot(h.col(b)) / (norms[a] * norms[b]);
            out.push_back(std::clamp(c, -1.0, 1.0));
        }
    return out;
}

struct GaussianityReport {
    double entry_mean = 0.0;
    double entry_var = 0.0;
    double target_var = 0.0;  // 1 / (n d)
    double max_column_crosscorr = 0.0;
    bool degenerate = false;
};

/// Entry moments of a pre-normalization product W H against law(G / sqrt(n)).
inline GaussianityReport gaussianity_diagnostics(const Matrix& m, Index n, Index d) {
    GaussianityReport r;
    r.target_var = 1.0 / (static_cast<double>(n) * static_cast<double>(d));
    const double count = static_cast<double>(m.size());
    r.entry_mean = m.mean();
    r.entry_var = count > 1 ? (m.array() - r.entry_mean).square().sum() / (count - 1.0) : 0.0;
    r.degenerate = !(r.entry_var > 0.0);
    if (r.degenerate || m.cols() < 2) return r;
    Matrix centered = m.rowwise() - m.colwise().mean();
    Vector sd = centered.colwise().norm();
    for (Index a = 0; a < m.cols(); ++a)
        for (Index b = a + 1; b < m.cols(); ++b) {
            if (sd[a] == 0.0 || sd[b] == 0.0) continue;
            const double c = centered.col(a).dot(centered.col(b)) / (sd[a] * sd[b]);
            r.max_column_crosscorr = std::max(r.max_column_crosscorr, std::abs(c));
        }
    return r;
}

/// L(Q_l) = || C_l - C_bar ||_F for every layer after `burn_in`, where C_bar is
/// the average Gram matrix over those same layers.
inline std::vector<double> conjecture_gap(const std::vector<Matrix>& grams, std::size_t burn_in,
                                          std::size_t min_window = 100) {
    if (grams.size() < burn_in + std::max<std::size_t>(min_window, 1))
        throw DomainError("conjecture_gap: chain too short for burn-in " + std::to_string(burn_in));
    const std::size_t window = grams.size() - burn_in;
    Matrix mean = Matrix::Zero(grams[burn_in].rows(), grams[burn_in].cols());
    for (std::size_t l = burn_in; l < grams.size(); ++l) mean += grams[l];
    mean /= static_cast<double>(window);
    std::vector<double> out;
    out.reserve(window);
    for (std::size_t l = burn_in; l < grams.size(); ++l) out.push_back((grams[l] - mean).norm());
    return out;
}

/// Builds the trace of representation `h`; `product` is the pre-normalization
/// matrix that produced it (nullptr for an input layer).
inline LayerTrace make_trace(std::size_t layer, const Matrix& h, const Matrix* product = nullptr) {
    LayerTrace t;
    t.layer = layer;
    t.gram = gram(h);
    t.frob_norm = std::sqrt(t.gram.trace());
    t.v_gap = orthogonality_gap_from_gram(t.gram);
    t.spectrum = singular_values(h);
    t.sigma_min = h.cols() > h.rows() ? 0.0 : t.spectrum.min();
    t.lyap_gap = std::abs(t.frob_norm - 1.0) <= kUnitNormTolerance
                     ? lyapunov_gap_from_spectrum(t.spectrum, h.cols())
                     : std::numeric_limits<double>::quiet_NaN();
    t.cosines = pairwise_cosines(h);
    const Matrix& src = product ? *product : h;
    const auto g = gaussianity_diagnostics(src, h.cols(), h.rows());
    t.entry_mean = g.entry_mean;
    t.entry_var = g.entry_var;
    return t;
}

}  // namespace orthochain
