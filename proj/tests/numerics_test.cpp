#include <gtest/gtest.h>

#include <cmath>

#include "orthochain/numerics.hpp"

using namespace orthochain;

namespace {

double relative_error(const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); }

Matrix orthonormal_columns(Index rows, Index cols, std::uint64_t seed) {
    SeededRng rng(seed);
    return haar_orthonormal(rows, cols, rng);
}

}  // namespace

TEST(Sampling, GaussianMomentsMatchVariance) {
    SeededRng rng(1);
    const double var = 1.0 / 512.0;
    const Matrix m = sample_gaussian_matrix(512, 512, Variance(var), rng);
    const double count = static_cast<double>(m.size());
    const double mean = m.mean();
    const double sample_var = (m.array() - mean).square().sum() / (count - 1.0);
    EXPECT_LE(std::abs(mean), 4.0 * std::sqrt(var / count));
    EXPECT_NEAR(sample_var, var, 0.05 * var);
}

TEST(Sampling, MomentTestAtOtherVariances) {
    for (double var : {0.25, 1.0, 9.0}) {
        SeededRng rng(static_cast<std::uint64_t>(var * 100));
        const Matrix m = sample_gaussian_matrix(400, 300, Variance(var), rng);
        const double count = static_cast<double>(m.size());
        const double mean = m.mean();
        const double sample_var = (m.array() - mean).square().sum() / (count - 1.0);
        EXPECT_LE(std::abs(mean), 4.0 * std::sqrt(var / count)) << var;
        EXPECT_NEAR(sample_var, var, 0.05 * var) << var;
    }
}

TEST(Sampling, NonPositiveVarianceRejected) {
    EXPECT_THROW(Variance{0.0}, DomainError);
    EXPECT_THROW(Variance{-1.0}, DomainError);
    EXPECT_THROW(Variance{std::nan("")}, DomainError);
    EXPECT_THROW(Variance{INFINITY}, DomainError);
}

TEST(Sampling, EmptyShapeRejected) {
    SeededRng rng(1);
    EXPECT_THROW(sample_gaussian_matrix(0, 3, Variance(1.0), rng), DomainError);
    EXPECT_THROW(sample_gaussian_matrix(3, 0, Variance(1.0), rng), DomainError);
}

TEST(Sampling, SameSeedSameMatrix) {
    SeededRng a(42), b(42), c(43);
    const Matrix ma = sample_gaussian_matrix(17, 5, Variance(0.5), a);
    const Matrix mb = sample_gaussian_matrix(17, 5, Variance(0.5), b);
    const Matrix mc = sample_gaussian_matrix(17, 5, Variance(0.5), c);
    EXPECT_EQ(ma, mb);
    EXPECT_NE(ma, mc);
    EXPECT_TRUE(ma.allFinite());
}

TEST(Sampling, HaarColumnsAreOrthonormal) {
    const Matrix q = orthonormal_columns(40, 7, 3);
    EXPECT_LE((q.transpose() * q - Matrix::Identity(7, 7)).norm(), 1e-12);
    SeededRng rng(1);
    EXPECT_THROW(haar_orthonormal(3, 4, rng), DomainError);
}

TEST(Seeding, DeriveSeedIsOrderSensitiveAndStable) {
    EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
    EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
    EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(2, {2, 3}));
    EXPECT_NE(hash_string("relu"), hash_string("tanh"));
}

TEST(Seeding, ForkDoesNotAdvanceParent) {
    SeededRng a(7), b(7);
    SeededRng child = a.fork(1);
    (void)child.normal();
    EXPECT_EQ(a.normal(), b.normal());
    EXPECT_NE(a.fork(1).next_u64(), a.fork(2).next_u64());
}

TEST(Spectrum, RejectsAscendingOrNegative) {
    Vector up(2);
    up << 0.1, 0.2;
    EXPECT_THROW(SingularSpectrum{up}, DomainError);
    Vector neg(2);
    neg << 0.2, -0.1;
    EXPECT_THROW(SingularSpectrum{neg}, DomainError);
    const auto s = SingularSpectrum::from_squared({0.3, 0.7});
    EXPECT_NEAR(s[0], std::sqrt(0.7), 1e-15);
    EXPECT_NEAR(s.sum_squares(), 1.0, 1e-15);
}

TEST(ThinSvd, Identity) {
    const auto f = thin_svd(Matrix::Identity(4, 4));
    for (Index i = 0; i < 4; ++i) EXPECT_NEAR(f.singulars[i], 1.0, 1e-14);
    EXPECT_EQ(f.tiny_count, 0);
}

TEST(ThinSvd, RankOneOuterProduct) {
    SeededRng rng(5);
    Vector u = sample_gaussian_matrix(6, 1, Variance(1.0), rng).col(0).normalized();
    Vector v = sample_gaussian_matrix(4, 1, Variance(1.0), rng).col(0).normalized();
    const auto f = thin_svd(u * v.transpose());
    EXPECT_NEAR(f.singulars[0], 1.0, 1e-12);
    for (Index i = 1; i < 4; ++i) EXPECT_NEAR(f.singulars[i], 0.0, 1e-12);
    EXPECT_EQ(f.tiny_count, 3);
}

TEST(ThinSvd, RoundTripAndOrthonormalFactors) {
    const std::pair<Index, Index> shapes[] = {{8, 4}, {64, 8}, {256, 16}, {4, 8}};
    std::uint64_t seed = 10;
    for (auto [d, n] : shapes) {
        SeededRng rng(seed++);
        const Matrix m = sample_gaussian_matrix(d, n, Variance(1.0), rng);
        const auto f = thin_svd(m);
        const Index r = std::min(d, n);
        EXPECT_EQ(f.singulars.size(), r);
        EXPECT_LE(relative_error(f.reconstruct(), m), 1e-10) << d << "x" << n;
        EXPECT_LE((f.left.transpose() * f.left - Matrix::Identity(r, r)).norm(), 1e-10);
        EXPECT_LE((f.right.transpose() * f.right - Matrix::Identity(r, r)).norm(), 1e-10);
        for (Index i = 1; i < r; ++i) EXPECT_GE(f.singulars[i - 1], f.singulars[i]);
        EXPECT_GE(f.singulars.min(), 0.0);
    }
}

TEST(ThinSvd, NonFiniteInputIsConvergenceError) {
    Matrix m = Matrix::Identity(3, 3);
    m(1, 1) = std::nan("");
    EXPECT_THROW(thin_svd(m), ConvergenceError);
    EXPECT_THROW(singular_values(m), ConvergenceError);
    EXPECT_THROW(thin_svd(Matrix(0, 0)), DomainError);
}

TEST(MinSingularValue, Identity) { EXPECT_NEAR(min_singular_value(Matrix::Identity(3, 3)), 1.0, 1e-14); }

TEST(MinSingularValue, DuplicatedColumnIsZero) {
    SeededRng rng(2);
    Matrix m = sample_gaussian_matrix(5, 3, Variance(1.0), rng);
    m.col(2) = m.col(0);
    EXPECT_LE(min_singular_value(m), 1e-10);
}

TEST(MinSingularValue, BuiltFromFactors) {
    const Matrix u = orthonormal_columns(6, 2, 8);
    const Matrix v = orthonormal_columns(2, 2, 9);
    Vector s(2);
    s << 0.8, 0.6;
    EXPECT_NEAR(min_singular_value(u * s.asDiagonal() * v.transpose()), 0.6, 1e-12);
}
