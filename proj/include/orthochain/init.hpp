#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "orthochain/metrics.hpp"
#include "orthochain/numerics.hpp"

namespace orthochain {

enum class InitKind { gaussian_variance_over_d, xavier, iterative_orthogonal };

/// Choice of the orthogonal factor V' in the iterative initializer. V(W H) does
/// not depend on it; the alternatives exist to test exactly that.
enum class VPrimeChoice { slice_qr, identity, haar };

struct InitScheme {
    InitKind kind = InitKind::iterative_orthogonal;
    /// Singular values below clamp_ratio * sigma_1 count as rank deficiency.
    double clamp_ratio = 1e-8;
    /// Clamp small singular values instead of raising RankDeficiencyError.
    bool permissive = false;
    VPrimeChoice vprime = VPrimeChoice::slice_qr;

    void validate() const {
        if (!(clamp_ratio > 0.0) || clamp_ratio > 1e-3) throw DomainError("clamp_ratio must lie in (0, 1e-3]");
    }
};

inline std::string_view to_string(InitKind k) {
    switch (k) {
        case InitKind::gaussian_variance_over_d: return "gaussian";
        case InitKind::xavier: return "xavier";
        case InitKind::iterative_orthogonal: return "iterative_orthogonal";
    }
    return "?";
}

inline InitKind parse_init_kind(std::string_view s) {
    if (s == "gaussian" || s == "gaussian_variance_over_d") return InitKind::gaussian_variance_over_d;
    if (s == "xavier") return InitKind::xavier;
    if (s == "iterative_orthogonal" || s == "iterative") return InitKind::iterative_orthogonal;
    throw DomainError("unknown init scheme '" + std::string(s) + "'");
}

/// N(0, 1/fan_in) entries.
inline Matrix gaussian_init(Index fan_out, Index fan_in, SeededRng& rng) {
    return sample_gaussian_matrix(fan_out, fan_in, Variance(1.0 / static_cast<double>(fan_in)), rng);
}

/// N(0, 2 / (fan_in + fan_out)) entries.
inline Matrix xavier_init(Index fan_out, Index fan_in, SeededRng& rng) {
    return sample_gaussian_matrix(fan_out, fan_in, Variance(2.0 / static_cast<double>(fan_in + fan_out)), rng);
}

struct InitDiagnostics {
    Index clamped = 0;       // singular values raised to the clamp floor
    bool vprime_fallback = false;  // slice was rank deficient, Haar used instead
};

namespace detail {

// out_rows x r matrix with orthonormal rows (out_rows <= r) or columns (out_rows >= r).
inline Matrix orthogonal_factor(const Matrix& right, Index out_rows, VPrimeChoice choice, SeededRng& rng,
                                InitDiagnostics* diag) {
    const Index r = right.cols();
    const bool tall = out_rows >= r;
    auto haar = [&] {
        Matrix q = haar_orthonormal(std::max(out_rows, r), std::min(out_rows, r), rng);
        return tall ? q : Matrix(q.transpose());
    };
    if (choice == VPrimeChoice::identity) return Matrix::Identity(out_rows, r);
    if (choice == VPrimeChoice::haar) return haar();

    if (out_rows <= right.rows()) {
        const Matrix slice = right.topRows(out_rows);
        const Matrix basis = tall ? slice : Matrix(slice.transpose());
        Eigen::HouseholderQR<Matrix> qr(basis);
        const auto rdiag = qr.matrixQR().diagonal().cwiseAbs();
        if (rdiag.minCoeff() > 1e-8 * std::max(1.0, rdiag.maxCoeff())) {
            Matrix q = qr.householderQ() * Matrix::Identity(basis.rows(), basis.cols());
            return tall ? q : Matrix(q.transpose());
        }
    }
    if (diag) diag->vprime_fallback = true;
    return haar();
}

}  // namespace detail

/// Iterative orthogonalization: with H = U Sigma V^T (thin SVD),
///   W = V' Sigma^{-1/2} U^T / ||Sigma^{1/2}||_F,
/// so that W H = V' Sigma^{1/2} V^T / ||Sigma^{1/2}||_F has singular values
/// sqrt(sigma_i) / sqrt(sum_j sigma_j). `out_rows` defaults to H.rows().
inline Matrix iterative_orthogonal_init(const Matrix& h, SeededRng& rng, const InitScheme& scheme = {},
                                        Index out_rows = 0, InitDiagnostics* diag = nullptr) {
    scheme.validate();
    const Index d = h.rows();
    if (h.cols() < d) throw DomainError("iterative_orthogonal_init: need batch n >= rows d");
    if (out_rows == 0) out_rows = d;
    const SvdFactors f = thin_svd(h);
    Vector sigma = f.singulars.values();
    const double floor = scheme.clamp_ratio * sigma[0];
    if (!(sigma[0] > 0.0)) throw RankDeficiencyError("iterative_orthogonal_init: zero matrix");
    Index clamped = 0;
    for (Index i = 0; i < sigma.size(); ++i)
        if (sigma[i] < floor) {
            if (!scheme.permissive)
                throw RankDeficiencyError("iterative_orthogonal_init: effective rank " + std::to_string(i) + " < " +
                                          std::to_string(d));
            sigma[i] = floor;
            ++clamped;
        }
    if (diag) diag->clamped = clamped;

    const Matrix vprime = detail::orthogonal_factor(f.right, out_rows, scheme.vprime, rng, diag);
    const double root_norm = std::sqrt(sigma.sum());  // ||Sigma^{1/2}||_F
    const Vector inv_root = sigma.cwiseSqrt().cwiseInverse();
    return vprime * inv_root.asDiagonal() * f.left.transpose() / root_norm;
}

struct InitGapReport {
    double v_before = 0.0;
    double v_after = 0.0;
    bool strict_decrease = false;
    /// H's nonzero singular values are all equal (Cauchy-Schwarz equality case);
    /// then W H keeps the same gap.
    bool flat_spectrum = false;
    /// Strict decrease is required unless v_before is at the numerical floor or
    /// the spectrum is flat.
    bool required = false;

    bool holds() const { return !required || strict_decrease; }
};

inline constexpr double kGapFloor = 1e-10;

inline InitGapReport verify_init_gap(const Matrix& h, const Matrix& w) {
    if (w.cols() != h.rows()) throw DomainError("verify_init_gap: shape mismatch");
    InitGapReport r;
    r.v_before = orthogonality_gap(h);
    r.v_after = orthogonality_gap(w * h);
    r.strict_decrease = r.v_after < r.v_before;
    const SingularSpectrum s = singular_values(h);
    r.flat_spectrum = (s.max() - s.min()) <= 1e-9 * s.max();
    r.required = r.v_before > kGapFloor && !r.flat_spectrum;
    return r;
}

// ---------------------------------------------------------------------------
// Convolutional variant
// ---------------------------------------------------------------------------

/// channels x side x side x batch tensor, stored with x fastest, then y,
/// channel, sample.
class ImageBatch {
public:
    ImageBatch(Index channels, Index side, Index batch)
        : channels_(channels), side_(side), batch_(batch), data_(channels * side * side * batch, 0.0) {
        if (channels < 1 || side < 1 || batch < 1) throw DomainError("ImageBatch: empty shape");
    }

    static ImageBatch gaussian(Index channels, Index side, Index batch, SeededRng& rng) {
        ImageBatch b(channels, side, batch);
        for (auto& v : b.data_) v = rng.normal();
        return b;
    }

    Index channels() const noexcept { return channels_; }
    Index side() const noexcept { return side_; }
    Index batch() const noexcept { return batch_; }

    double& at(Index c, Index y, Index x, Index t) { return data_[offset(c, y, x, t)]; }
    double at(Index c, Index y, Index x, Index t) const { return data_[offset(c, y, x, t)]; }

    /// (channels * side^2) x batch: one flattened feature map per column.
    Matrix sample_matrix() const {
        Matrix m(channels_ * side_ * side_, batch_);
        for (Index t = 0; t < batch_; ++t)
            for (Index c = 0; c < channels_; ++c)
                for (Index y = 0; y < side_; ++y)
                    for (Index x = 0; x < side_; ++x) m((c * side_ + y) * side_ + x, t) = at(c, y, x, t);
        return m;
    }

private:
    std::size_t offset(Index c, Index y, Index x, Index t) const {
        return static_cast<std::size_t>(((t * channels_ + c) * side_ + y) * side_ + x);
    }

    Index channels_, side_, batch_;
    std::vector<double> data_;
};

struct ConvInitSpec {
    Index kernel = 3;       // k, odd
    Index in_channels = 3;  // d_in
    Index out_filters = 32; // d
    Index side = 8;         // m
    Index padding = 1;      // (k - 1) / 2

    void validate() const {
        if (kernel < 1 || kernel % 2 == 0) throw DomainError("ConvInitSpec: kernel must be odd");
        if (padding != (kernel - 1) / 2) throw DomainError("ConvInitSpec: padding must be (k - 1) / 2");
        if (in_channels < 1 || out_filters < 1 || side < 1) throw DomainError("ConvInitSpec: empty shape");
    }
};

/// im2col. Row c*k^2 + dy*k + dx, column t*m^2 + y*m + x holds the input at
/// (c, y + dy - padding, x + dx - padding, t), zero outside the image.
inline Matrix unfold(const ImageBatch& in, Index k, Index padding) {
    if (k < 1 || k % 2 == 0 || padding != (k - 1) / 2) throw DomainError("unfold: invalid kernel/padding");
    const Index c_in = in.channels(), m = in.side(), n = in.batch();
    Matrix out = Matrix::Zero(c_in * k * k, m * m * n);
    for (Index t = 0; t < n; ++t)
        for (Index y = 0; y < m; ++y)
            for (Index x = 0; x < m; ++x) {
                const Index col = t * m * m + y * m + x;
                for (Index c = 0; c < c_in; ++c)
                    for (Index dy = 0; dy < k; ++dy)
                        for (Index dx = 0; dx < k; ++dx) {
                            const Index yy = y + dy - padding, xx = x + dx - padding;
                            if (yy < 0 || yy >= m || xx < 0 || xx >= m) continue;
                            out((c * k + dy) * k + dx, col) = in.at(c, yy, xx, t);
                        }
            }
    return out;
}

/// col2im: adds every patch entry back to its pixel. For k = 1 this inverts
/// unfold exactly; for k > 1 each pixel receives one copy per covering patch.
inline ImageBatch fold(const Matrix& cols, Index channels, Index side, Index batch, Index k, Index padding) {
    if (cols.rows() != channels * k * k || cols.cols() != side * side * batch)
        throw DomainError("fold: shape mismatch");
    ImageBatch out(channels, side, batch);
    for (Index t = 0; t < batch; ++t)
        for (Index y = 0; y < side; ++y)
            for (Index x = 0; x < side; ++x) {
                const Index col = t * side * side + y * side + x;
                for (Index c = 0; c < channels; ++c)
                    for (Index dy = 0; dy < k; ++dy)
                        for (Index dx = 0; dx < k; ++dx) {
                            const Index yy = y + dy - padding, xx = x + dx - padding;
                            if (yy < 0 || yy >= side || xx < 0 || xx >= side) continue;
                            out.at(c, yy, xx, t) += cols((c * k + dy) * k + dx, col);
                        }
            }
    return out;
}

/// Convolution output W * unfold(H) reshaped to out_filters x side x side x batch.
inline ImageBatch feature_map(const Matrix& product, Index side, Index batch) {
    return fold(product, product.rows(), side, batch, 1, 0);
}

/// Iterative orthogonalization applied to the unfolded input; returns the
/// d x (d_in k^2) filter matrix.
inline Matrix conv_iterative_init(const ImageBatch& h, const ConvInitSpec& spec, SeededRng& rng,
                                  const InitScheme& scheme = {}, InitDiagnostics* diag = nullptr) {
    spec.validate();
    if (h.channels() != spec.in_channels || h.side() != spec.side)
        throw DomainError("conv_iterative_init: input does not match spec");
    const Matrix unfolded = unfold(h, spec.kernel, spec.padding);
    if (unfolded.cols() < unfolded.rows())
        throw DomainError("conv_iterative_init: need side^2 * batch >= in_channels * k^2");
    return iterative_orthogonal_init(unfolded, rng, scheme, spec.out_filters, diag);
}

}  // namespace orthochain
