#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "orthochain/errors.hpp"

namespace orthochain {

/// Dense real matrix. Representations are d x n (features x samples).
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// ---------------------------------------------------------------------------
// Seeding
// ---------------------------------------------------------------------------

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_string(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Order-sensitive combination of a base seed with any number of tags.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t h = splitmix64(base);
    for (auto p : parts) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
    return h;
}

/// 64-bit Mersenne twister plus a standard normal stream. Identical seeds and
/// call sequences give identical outputs within one build.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    std::uint64_t next_u64() { return engine_(); }

    /// Child stream; does not advance this generator.
    SeededRng fork(std::uint64_t tag) const { return SeededRng(derive_seed(seed_, {tag})); }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Strictly positive, finite variance.
class Variance {
public:
    explicit Variance(double v) : value_(v) {
        if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("variance must be positive and finite");
    }
    double value() const noexcept { return value_; }

private:
    double value_;
};

inline Matrix sample_gaussian_matrix(Index rows, Index cols, Variance variance, SeededRng& rng) {
    if (rows < 1 || cols < 1) throw DomainError("sample_gaussian_matrix: empty shape");
    const double sd = std::sqrt(variance.value());
    Matrix m(rows, cols);
    // Column-major fill keeps the draw order fixed for a given shape.
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = sd * rng.normal();
    return m;
}

/// rows x cols matrix with Haar-distributed orthonormal columns (rows >= cols).
inline Matrix haar_orthonormal(Index rows, Index cols, SeededRng& rng) {
    if (rows < cols) throw DomainError("haar_orthonormal: need rows >= cols");
    Matrix g = sample_gaussian_matrix(rows, cols, Variance(1.0), rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
    const Matrix& r = qr.matrixQR();
    for (Index j = 0; j < cols; ++j)
        if (r(j, j) < 0.0) q.col(j) *= -1.0;
    return q;
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

// ---------------------------------------------------------------------------
// Spectra and SVD
// ---------------------------------------------------------------------------

/// Descending, nonnegative singular values.
class SingularSpectrum {
public:
    SingularSpectrum() = default;

    explicit SingularSpectrum(Vector values) : values_(std::move(values)) {
        for (Index i = 0; i < values_.size(); ++i) {
            if (!(values_[i] >= 0.0) || !std::isfinite(values_[i]))
                throw DomainError("singular values must be finite and nonnegative");
            if (i > 0 && values_[i] > values_[i - 1]) throw DomainError("singular values must be descending");
        }
    }

    /// Sorts and square-roots a list of squared singular values.
    static SingularSpectrum from_squared(std::vector<double> squared) {
        std::sort(squared.begin(), squared.end(), std::greater<>());
        Vector v(static_cast<Index>(squared.size()));
        for (std::size_t i = 0; i < squared.size(); ++i) v[static_cast<Index>(i)] = std::sqrt(std::max(0.0, squared[i]));
        return SingularSpectrum(std::move(v));
    }

    const Vector& values() const noexcept { return values_; }
    Index size() const noexcept { return values_.size(); }
    double operator[](Index i) const { return values_[i]; }
    double max() const { return values_.size() ? values_[0] : 0.0; }
    double min() const { return values_.size() ? values_[values_.size() - 1] : 0.0; }
    Vector squared() const { return values_.array().square(); }
    double sum_squares() const { return values_.squaredNorm(); }

private:
    Vector values_;
};

struct SvdFactors {
    Matrix left;                 // d x r, orthonormal columns
    SingularSpectrum singulars;  // length r = min(d, n)
    Matrix right;                // n x r, orthonormal columns
    /// Number of singular values below 1e-12 * sigma_max (reported as-is).
    Index tiny_count = 0;

    Matrix reconstruct() const { return left * singulars.values().asDiagonal() * right.transpose(); }
};

inline constexpr double kTinySingularRatio = 1e-12;

inline SvdFactors thin_svd(const Matrix& m) {
    if (m.rows() < 1 || m.cols() < 1) throw DomainError("thin_svd: empty matrix");
    if (!all_finite(m)) throw ConvergenceError("thin_svd: non-finite input");
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw ConvergenceError("thin_svd: decomposition did not converge");
    SvdFactors f{svd.matrixU(), SingularSpectrum(svd.singularValues()), svd.matrixV(), 0};
    const double floor = kTinySingularRatio * f.singulars.max();
    for (Index i = 0; i < f.singulars.size(); ++i)
        if (f.singulars[i] < floor) ++f.tiny_count;
    return f;
}

inline SingularSpectrum singular_values(const Matrix& m) {
    if (m.rows() < 1 || m.cols() < 1) throw DomainError("singular_values: empty matrix");
    if (!all_finite(m)) throw ConvergenceError("singular_values: non-finite input");
    Eigen::JacobiSVD<Matrix> svd(m);
    if (svd.info() != Eigen::Success) throw ConvergenceError("singular_values: decomposition did not converge");
    return SingularSpectrum(svd.singularValues());
}

inline double min_singular_value(const Matrix& m) { return singular_values(m).min(); }

}  // namespace orthochain
