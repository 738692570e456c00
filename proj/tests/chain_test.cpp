#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "orthochain/chain.hpp"
#include "orthochain/theory.hpp"

using namespace orthochain;

namespace {

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t m = xs.size() / 2;
    return xs.size() % 2 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

ChainConfig config(std::size_t d, std::size_t n, std::size_t depth, std::uint64_t seed) {
    ChainConfig c;
    c.width = d;
    c.batch = n;
    c.depth = depth;
    c.seed = seed;
    return c;
}

constexpr Activation kAllActivations[] = {Activation::linear, Activation::relu, Activation::tanh, Activation::sin,
                                          Activation::sigmoid};

}  // namespace

TEST(BatchNorm, IdempotentOnUnitRows) {
    SeededRng rng(1);
    Matrix m = sample_gaussian_matrix(6, 3, Variance(1.0), rng);
    m.rowwise().normalize();
    EXPECT_LE((batch_norm(m) - m).norm(), 1e-14);
}

TEST(BatchNorm, ScaleInvariant) {
    SeededRng rng(2);
    const Matrix m = sample_gaussian_matrix(6, 3, Variance(1.0), rng);
    EXPECT_LE((batch_norm(7.5 * m) - batch_norm(m)).norm(), 1e-14);
}

TEST(BatchNorm, ZeroRowIsDegenerate) {
    SeededRng rng(3);
    Matrix m = sample_gaussian_matrix(5, 3, Variance(1.0), rng);
    m.row(3).setZero();
    try {
        batch_norm(m);
        FAIL() << "expected DegenerateRowError";
    } catch (const DegenerateRowError& e) {
        EXPECT_EQ(e.row(), 3u);
    }
}

TEST(BnStep, UnitFrobeniusNormForEveryActivationAndSampling) {
    for (auto act : kAllActivations)
        for (auto sampling : {WeightSampling::dense, WeightSampling::gram_factor})
            for (std::uint64_t seed = 0; seed < 5; ++seed) {
                SeededRng rng(seed);
                Repr h = gaussian_input(32, 4, rng);
                for (int l = 0; l < 10; ++l) {
                    h = bn_step(h, rng, act, sampling).next;
                    ASSERT_NEAR(h.matrix().norm(), 1.0, 1e-10) << to_string(act);
                }
            }
}

TEST(BnStep, ProductOfOrthogonalInputIsScaledGaussian) {
    // H^T H = I/n: W H has i.i.d. N(0, 1/(n d)) entries.
    const Index d = 256, n = 4;
    SeededRng rng(4);
    const Repr h = orthogonal_input(d, n, rng);
    EXPECT_LE((gram(h.matrix()) - Matrix::Identity(n, n) / static_cast<double>(n)).norm(), 1e-12);
    double var_sum = 0.0, cross_max = 0.0;
    const int reps = 20;
    for (int r = 0; r < reps; ++r) {
        const Transition t = bn_step(h, rng, Activation::linear, WeightSampling::dense);
        const auto g = gaussianity_diagnostics(t.product, n, d);
        var_sum += g.entry_var;
        cross_max = std::max(cross_max, g.max_column_crosscorr);
    }
    const double target = 1.0 / static_cast<double>(n * d);
    const double se = target * std::sqrt(2.0 / static_cast<double>(n * d * reps));
    EXPECT_NEAR(var_sum / reps, target, 5.0 * se);
    EXPECT_LT(cross_max, 5.0 / std::sqrt(static_cast<double>(d)));
}

TEST(BnStep, SingleSampleStaysOrthogonal) {
    ChainConfig c = config(16, 1, 30, 3);
    for (const auto& t : simulate_chain(c)) {
        EXPECT_NEAR(t.v_gap, 0.0, 1e-12);
        EXPECT_NEAR(t.frob_norm, 1.0, 1e-12);
    }
}

TEST(BnStep, GramFactorSamplingMatchesDenseInLaw) {
    // Mean next-layer gap from both samplers on one fixed state.
    SeededRng rng(6);
    const Repr h = random_unit_state(64, random_unit_spectrum(4, rng), rng);
    std::vector<double> dense, factor;
    for (std::uint64_t r = 0; r < 2000; ++r) {
        SeededRng a = rng.fork(r), b = rng.fork(r + 100000);
        dense.push_back(orthogonality_gap(bn_step(h, a, Activation::linear, WeightSampling::dense).next.matrix()));
        factor.push_back(
            orthogonality_gap(bn_step(h, b, Activation::linear, WeightSampling::gram_factor).next.matrix()));
    }
    const auto ed = mean_and_error(dense), ef = mean_and_error(factor);
    EXPECT_LE(std::abs(ed.mean - ef.mean), 4.0 * std::hypot(ed.std_error, ef.std_error));
}

TEST(BnStep, ColumnPermutationEquivarianceUnderReplayedWeights) {
    const Index d = 16, n = 4;
    SeededRng rng(7);
    const Repr h0 = gaussian_input(d, n, rng);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(n);
    perm.indices() << 2, 0, 3, 1;
    for (auto act : kAllActivations) {
        Repr a = h0, b(h0.matrix() * perm);
        SeededRng wr(8);
        for (int l = 0; l < 12; ++l) {
            const Matrix w = sample_gaussian_matrix(d, d, Variance(1.0 / d), wr);
            a = bn_step_with_weights(a, w, act);
            b = bn_step_with_weights(b, w, act);
            ASSERT_LE((a.matrix() * perm - b.matrix()).norm(), 1e-12) << to_string(act);
        }
    }
}

TEST(BnStep, DenseStepEqualsExplicitWeights) {
    SeededRng rng(9);
    const Repr h = gaussian_input(12, 3, rng);
    SeededRng a(10), b(10);
    const Transition t = bn_step(h, a, Activation::tanh, WeightSampling::dense);
    const Matrix w = sample_gaussian_matrix(12, 12, Variance(1.0 / 12), b);
    EXPECT_LE((t.next.matrix() - bn_step_with_weights(h, w, Activation::tanh).matrix()).norm(), 1e-14);
    EXPECT_THROW(bn_step_with_weights(h, Matrix::Identity(5, 5)), DomainError);
}

TEST(VanillaStep, CosineUnchangedByFrobeniusRescaling) {
    SeededRng rng(11);
    const Repr h = gaussian_input(20, 2, rng);
    const Matrix w = sample_gaussian_matrix(20, 20, Variance(1.0 / 20), rng);
    const Matrix raw = w * h.matrix();
    const Repr next = vanilla_step_with_weights(h, w);
    EXPECT_NEAR(next.matrix().norm(), 1.0, 1e-12);
    EXPECT_NEAR(pairwise_cosines(next.matrix())[0], pairwise_cosines(raw)[0], 1e-12);
}

TEST(VanillaStep, RankCollapseTrend) {
    std::vector<double> early, late;
    for (std::uint64_t s = 0; s < 20; ++s) {
        ChainConfig c = config(32, 4, 50, 100 + s);
        c.kind = ChainKind::vanilla;
        c.input = InputKind::orthogonal;
        const auto tr = simulate_chain(c);
        early.push_back(tr[4].v_gap);
        late.push_back(tr[49].v_gap);
    }
    EXPECT_GT(median(late), median(early));
}

TEST(VanillaStep, ReluChainAlignsOrthogonalInputs) {
    std::vector<double> cos50;
    for (std::uint64_t s = 0; s < 20; ++s) {
        ChainConfig c = config(32, 2, 50, 200 + s);
        c.kind = ChainKind::vanilla;
        c.input = InputKind::orthogonal;
        c.activation = Activation::relu;
        cos50.push_back(std::abs(simulate_chain(c).back().cosines[0]));
    }
    EXPECT_GT(median(cos50), 0.9);
}

TEST(VanillaStep, LinearChainAlignsOnlyAtTheProductRate) {
    // Population median of |cos| at layer 50 sits near 0.84 for d = 32.
    std::vector<double> cos50;
    for (std::uint64_t s = 0; s < 200; ++s) {
        ChainConfig c = config(32, 2, 50, 300 + s);
        c.kind = ChainKind::vanilla;
        c.input = InputKind::orthogonal;
        cos50.push_back(std::abs(simulate_chain(c).back().cosines[0]));
    }
    const double m = median(cos50);
    EXPECT_GT(m, 0.7);
    EXPECT_LT(m, 0.95);
}

TEST(SimulateChain, BnOrthogonalizesCorrelatedInputs) {
    std::vector<double> cos50;
    for (std::uint64_t s = 0; s < 20; ++s) {
        ChainConfig c = config(32, 2, 50, 7 + s);
        c.input = InputKind::correlated;
        const ChainRun run = run_chain(c);
        EXPECT_GT(std::abs(run.input.cosines[0]), 0.99);
        cos50.push_back(std::abs(run.layers.back().cosines[0]));
    }
    EXPECT_LT(median(cos50), 0.2);
}

TEST(SimulateChain, DepthOneGivesOneTrace) {
    const auto tr = simulate_chain(config(8, 2, 1, 1));
    ASSERT_EQ(tr.size(), 1u);
    EXPECT_EQ(tr[0].layer, 1u);
}

TEST(SimulateChain, Deterministic) {
    ChainConfig c = config(24, 3, 15, 99);
    c.activation = Activation::sin;
    const auto a = simulate_chain(c), b = simulate_chain(c);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].v_gap, b[i].v_gap);
        EXPECT_EQ(a[i].gram, b[i].gram);
    }
}

TEST(SimulateChain, MedianGapNonIncreasingWhenWidthExceedsBatchSquared) {
    std::vector<double> v3, v30;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto tr = simulate_chain(config(256, 4, 30, 500 + s));
        v3.push_back(tr[2].v_gap);
        v30.push_back(tr[29].v_gap);
    }
    EXPECT_LE(median(v30), median(v3));
}

TEST(SimulateChain, ExplicitInitialStateIsUsed) {
    SeededRng rng(12);
    const Repr h0 = orthogonal_input(16, 4, rng);
    const ChainRun run = run_chain(config(16, 4, 3, 1), h0);
    EXPECT_NEAR(run.input.v_gap, 0.0, 1e-12);
    EXPECT_THROW(run_chain(config(16, 3, 3, 1), h0), DomainError);
}

TEST(SimulateChain, InputKindsMatchTheirConstruction) {
    SeededRng rng(13);
    const Repr orth = orthogonal_input(32, 2, rng);
    EXPECT_NEAR(pairwise_cosines(orth.matrix())[0], 0.0, 1e-12);
    const Repr corr = correlated_input(32, 2, 0.01, rng);
    EXPECT_GT(pairwise_cosines(corr.matrix())[0], 1.0 - 1e-3);
    EXPECT_NEAR(corr.matrix().norm(), 1.0, 1e-12);
    const Repr g = gaussian_input(32, 2, rng);
    EXPECT_NEAR(g.matrix().norm(), 1.0, 1e-12);
}

TEST(ChainConfigValidation, RejectsInvalidShapes) {
    EXPECT_THROW(simulate_chain(config(4, 8, 5, 1)), DomainError);
    EXPECT_THROW(simulate_chain(config(4, 2, 0, 1)), DomainError);
    EXPECT_THROW(simulate_chain(config(4, 0, 3, 1)), DomainError);
    EXPECT_THROW(Repr(Matrix(0, 0)), DomainError);
    Matrix bad = Matrix::Identity(2, 2);
    bad(0, 0) = INFINITY;
    EXPECT_THROW(Repr{bad}, DomainError);
}

TEST(ChainConfigValidation, ParsersRoundTrip) {
    for (auto a : kAllActivations) EXPECT_EQ(parse_activation(to_string(a)), a);
    EXPECT_EQ(parse_chain_kind("vanilla"), ChainKind::vanilla);
    EXPECT_EQ(parse_input_kind("correlated"), InputKind::correlated);
    EXPECT_THROW(parse_activation("gelu"), DomainError);
}

TEST(ChainError, CarriesLayer) {
    const ChainError e(17, "boom");
    EXPECT_EQ(e.layer(), 17u);
    EXPECT_NE(std::string(e.what()).find("layer 17"), std::string::npos);
}
