#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "orthochain/experiments.hpp"

using namespace orthochain;

namespace {

ExperimentSpec spec_of(ExperimentKind k) {
    ExperimentSpec s;
    s.kind = k;
    s.master_seed = 1;
    return s;
}

const CheckResult* find_check(const TheoryBatteryResult& r, const std::string& name, std::size_t n) {
    for (const auto& c : r.checks)
        if (c.name == name && c.n == n) return &c;
    return nullptr;
}

}  // namespace

TEST(LogLogFit, ExactPowerLaw) {
    std::vector<std::pair<double, double>> pts;
    for (double d : {32.0, 64.0, 128.0, 256.0, 512.0, 1024.0}) pts.emplace_back(d, 3.0 / std::sqrt(d));
    const auto f = fit_loglog_slope(pts);
    EXPECT_NEAR(f.slope, -0.5, 1e-12);
    EXPECT_NEAR(f.intercept, std::log(3.0), 1e-12);
    EXPECT_NEAR(f.r2, 1.0, 1e-12);
}

TEST(LogLogFit, TwoPointsAreExact) {
    const auto f = fit_loglog_slope({{2.0, 8.0}, {4.0, 2.0}});
    EXPECT_NEAR(f.slope, -2.0, 1e-12);
    EXPECT_NEAR(f.r2, 1.0, 1e-12);
}

TEST(LogLogFit, NoisyPowerLaw) {
    SeededRng rng(3);
    std::vector<std::pair<double, double>> pts;
    for (double d = 32; d <= 1024; d *= 2)
        for (int k = 0; k < 5; ++k) pts.emplace_back(d, std::pow(d, -0.46) * std::exp(0.05 * rng.normal()));
    EXPECT_NEAR(fit_loglog_slope(pts).slope, -0.46, 0.05);
}

TEST(LogLogFit, RejectsBadInput) {
    EXPECT_THROW(fit_loglog_slope({{1.0, 1.0}}), DomainError);
    EXPECT_THROW(fit_loglog_slope({{1.0, 1.0}, {2.0, 0.0}}), DomainError);
    EXPECT_THROW(fit_loglog_slope({{-1.0, 1.0}, {2.0, 1.0}}), DomainError);
    EXPECT_THROW(fit_loglog_slope({{3.0, 1.0}, {3.0, 2.0}}), DomainError);
}

TEST(Quantile, InterpolatesSortedSample) {
    EXPECT_EQ(quantile({3.0, 1.0, 2.0}, 0.5), 2.0);
    EXPECT_EQ(quantile({1.0, 2.0, 3.0, 4.0}, 0.5), 2.5);
    EXPECT_EQ(quantile({5.0}, 0.975), 5.0);
    EXPECT_THROW(quantile({}, 0.5), DomainError);
}

TEST(Spec, DefaultsPerKind) {
    const auto w = with_defaults(spec_of(ExperimentKind::width_sweep));
    EXPECT_EQ(*w.n, 4u);
    EXPECT_EQ(w.widths, (std::vector<std::size_t>{32, 64, 128, 256, 512, 1024}));
    EXPECT_EQ(*w.depth, 500u);
    EXPECT_EQ(w.seeds.size(), 20u);
    const auto c = with_defaults(spec_of(ExperimentKind::conjecture_sweep));
    EXPECT_EQ(*c.burn_in, 50u);
    EXPECT_EQ(c.activations.size(), 4u);
    const auto z = with_defaults(spec_of(ExperimentKind::cosine_contrast));
    EXPECT_EQ(*z.n, 2u);
    EXPECT_EQ(z.widths.front(), 32u);
    EXPECT_EQ(*with_defaults(spec_of(ExperimentKind::depth_sweep)).input, InputKind::correlated);
}

TEST(Spec, Validation) {
    auto w = spec_of(ExperimentKind::width_sweep);
    w.widths = {64};
    EXPECT_THROW(with_defaults(w), DomainError);
    w.widths = {64, 32};
    EXPECT_THROW(with_defaults(w), DomainError);
    auto c = spec_of(ExperimentKind::chain);
    c.n = 8;
    c.widths = {4};
    EXPECT_THROW(with_defaults(c), DomainError);
    auto z = spec_of(ExperimentKind::cosine_contrast);
    z.n = 3;
    EXPECT_THROW(with_defaults(z), DomainError);
    auto q = spec_of(ExperimentKind::conjecture_sweep);
    q.activations = {Activation::linear};
    EXPECT_THROW(with_defaults(q), DomainError);
    auto d = spec_of(ExperimentKind::depth_sweep);
    d.depth = 20;
    EXPECT_THROW(with_defaults(d), DomainError);
    EXPECT_EQ(parse_experiment_kind("depth_sweep"), ExperimentKind::depth_sweep);
    EXPECT_THROW(parse_experiment_kind("sweep"), DomainError);
}

TEST(RunSeed, SeparatesEveryComponent) {
    const auto base = run_seed(1, ExperimentKind::chain, 4, 32, "relu", 0);
    EXPECT_EQ(base, run_seed(1, ExperimentKind::chain, 4, 32, "relu", 0));
    EXPECT_NE(base, run_seed(2, ExperimentKind::chain, 4, 32, "relu", 0));
    EXPECT_NE(base, run_seed(1, ExperimentKind::width_sweep, 4, 32, "relu", 0));
    EXPECT_NE(base, run_seed(1, ExperimentKind::chain, 2, 32, "relu", 0));
    EXPECT_NE(base, run_seed(1, ExperimentKind::chain, 4, 64, "relu", 0));
    EXPECT_NE(base, run_seed(1, ExperimentKind::chain, 4, 32, "tanh", 0));
    EXPECT_NE(base, run_seed(1, ExperimentKind::chain, 4, 32, "relu", 1));
}

TEST(Csv, HeaderAndRoundTrip) {
    const std::vector<RunRecord> recs = {{"chain", 4, 32, 3, 7, "v_gap", 0.1},
                                         {"chain", 4, 32, -1, 7, "mean_v", 1.0 / 3.0}};
    const std::string csv = to_csv(recs);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "kind,n,d,layer,seed,metric,value");
    std::getline(in, line);
    EXPECT_EQ(line, "chain,4,32,3,7,v_gap,0.10000000000000001");
    std::getline(in, line);
    const auto comma = line.rfind(',');
    EXPECT_EQ(std::stod(line.substr(comma + 1)), 1.0 / 3.0);
    EXPECT_EQ(line.substr(0, comma), "chain,4,32,-1,7,mean_v");
}

TEST(ChainExperiment, RecordsEveryLayerAndTheLemmasHold) {
    auto s = spec_of(ExperimentKind::chain);
    s.n = 4;
    s.widths = {32};
    s.depth = 10;
    s.n_seeds = 2;
    const auto r = run_chain_experiment(s);
    std::size_t v_rows = 0;
    for (const auto& rec : r.records) v_rows += rec.metric == "v_gap";
    EXPECT_EQ(v_rows, 2u * 11u);
    EXPECT_EQ(r.lemmas.layers, 20u);
    EXPECT_TRUE(r.lemmas.clean());
}

TEST(ChainExperiment, ThreadCountDoesNotChangeOutput) {
    auto s = spec_of(ExperimentKind::chain);
    s.widths = {32};
    s.depth = 15;
    s.n_seeds = 5;
    s.activations = {Activation::relu};
    s.threads = 1;
    const std::string one = to_csv(run_chain_experiment(s).records);
    s.threads = 4;
    EXPECT_EQ(one, to_csv(run_chain_experiment(s).records));
}

TEST(WidthSweep, SmallSweepHasNegativeSlope) {
    auto s = spec_of(ExperimentKind::width_sweep);
    s.widths = {32, 128, 512};
    s.depth = 100;
    s.n_seeds = 4;
    const auto r = run_width_sweep(s);
    ASSERT_EQ(r.mean_v.size(), 3u);
    EXPECT_GT(r.mean_v[0], r.mean_v[1]);
    EXPECT_GT(r.mean_v[1], r.mean_v[2]);
    EXPECT_LT(r.fit.slope, -0.3);
    EXPECT_GT(r.fit.slope, -0.7);
    EXPECT_LE(r.slope_ci_low, r.fit.slope + 1e-12);
    EXPECT_GE(r.slope_ci_high, r.fit.slope - 1e-12);
    EXPECT_TRUE(r.lemmas.clean());
}

TEST(WidthSweep, BootstrapIntervalShrinksWithMoreSeeds) {
    auto s = spec_of(ExperimentKind::width_sweep);
    s.widths = {32, 64, 128};
    s.depth = 60;
    s.n_seeds = 3;
    const auto few = run_width_sweep(s);
    s.n_seeds = 24;
    const auto many = run_width_sweep(s);
    EXPECT_LT(many.slope_ci_high - many.slope_ci_low, few.slope_ci_high - few.slope_ci_low);
}

TEST(DepthDecay, RecoversGeometricRate) {
    const double c = 0.8, rate = 0.9, floor = 1e-3;
    std::vector<double> v, lv;
    for (int l = 0; l <= 200; ++l) {
        v.push_back(std::max(c * std::pow(rate, l), floor));
        lv.push_back(std::log(v.back()));
    }
    const auto f = analyze_depth_decay(v, lv);
    EXPECT_NEAR(f.plateau, floor, 1e-12);
    EXPECT_GE(f.segment_end, 20u);
    EXPECT_NEAR(f.rate, rate, 0.01 * rate);
    EXPECT_THROW(analyze_depth_decay({1.0, 0.5}, {0.0, 0.0}), DomainError);
    EXPECT_THROW(analyze_depth_decay({1.0, 0.5, 0.2}, {0.0, 0.0}), DomainError);
}

TEST(DepthSweep, PlateauFallsWithWidth) {
    auto s = spec_of(ExperimentKind::depth_sweep);
    s.widths = {64, 256, 1024};
    s.depth = 80;
    s.n_seeds = 4;
    s.input = InputKind::gaussian;
    const auto r = run_depth_sweep(s);
    ASSERT_EQ(r.curves.size(), 3u);
    EXPECT_GT(r.curves[0].decay.plateau, r.curves[1].decay.plateau);
    EXPECT_GT(r.curves[1].decay.plateau, r.curves[2].decay.plateau);
    for (const auto& c : r.curves) {
        EXPECT_EQ(c.mean_v.size(), 81u);
        EXPECT_TRUE(c.bound_dominates) << c.width;
        EXPECT_LE(c.decay.plateau, c.plateau_bound);
    }
    EXPECT_TRUE(r.lemmas.clean());
}

TEST(DepthSweep, CorrelatedInputDecaysFromNearRankOne) {
    auto s = spec_of(ExperimentKind::depth_sweep);
    s.widths = {1024};
    s.depth = 60;
    s.n_seeds = 3;
    const auto r = run_depth_sweep(s);
    const auto& c = r.curves.front();
    EXPECT_GT(c.mean_v[0], 0.8);
    EXPECT_LT(c.ratio_30_to_1, 0.05);
}

TEST(CosineContrast, BatchNormDecorrelatesAndVanillaCollapses) {
    const auto r = run_cosine_contrast(spec_of(ExperimentKind::cosine_contrast));
    ASSERT_EQ(r.bn.median.size(), 51u);
    EXPECT_GT(r.bn.median.front(), 0.9);
    EXPECT_LT(r.vanilla.median.front(), 1e-12);
    EXPECT_LT(r.bn.median.back(), 0.2);
    EXPECT_GT(r.vanilla.median.back(), 0.9);
    for (std::size_t l = 0; l < r.bn.median.size(); ++l) {
        EXPECT_LE(r.bn.low[l], r.bn.median[l]);
        EXPECT_LE(r.bn.median[l], r.bn.high[l]);
    }
}

TEST(ConjectureSweep, SmallSweep) {
    auto s = spec_of(ExperimentKind::conjecture_sweep);
    s.widths = {64, 256};
    s.depth = 100;
    s.burn_in = 20;
    s.n_seeds = 2;
    s.activations = {Activation::relu, Activation::tanh};
    const auto r = run_conjecture_sweep(s);
    ASSERT_EQ(r.series.size(), 2u);
    for (const auto& c : r.series) {
        EXPECT_LT(c.fit.slope, -0.2);
        EXPECT_GT(c.mean_l[0], c.mean_l[1]);
    }
    EXPECT_NEAR(r.slope_spread, std::abs(r.series[0].fit.slope - r.series[1].fit.slope), 1e-15);
    EXPECT_TRUE(r.lemmas.clean());
}

TEST(TheoryBattery, DefaultRunHasNoFailures) {
    const auto r = run_theory_battery(spec_of(ExperimentKind::theory_battery));
    EXPECT_EQ(r.checks.size(), 45u);
    for (const auto& c : r.checks) EXPECT_TRUE(c.passed) << c.name << " n=" << c.n << " d=" << c.d;
    ASSERT_NE(find_check(r, "quad_vs_mc", 8), nullptr);
}

TEST(TheoryBattery, DroppingTheWidthScaleIsCaught) {
    auto s = spec_of(ExperimentKind::theory_battery);
    s.n_seeds = 2;
    s.corrupt_scaling = true;
    const auto r = run_theory_battery(s);
    EXPECT_EQ(r.checks.size(), 3u);
    EXPECT_EQ(r.failures(), 3u);
    const auto* c = find_check(r, "unit_norm", 4);
    ASSERT_NE(c, nullptr);
    EXPECT_FALSE(c->passed);
    EXPECT_GT(c->empirical, 1.0);
    const auto out = run_experiment(s);
    EXPECT_FALSE(out.ok);
    EXPECT_NE(out.summary.find("FAILED unit_norm"), std::string::npos);
}

TEST(TheoryBattery, SameSeedSameRecords) {
    auto s = spec_of(ExperimentKind::theory_battery);
    s.n = 2;
    s.widths = {32};
    s.n_seeds = 3;
    s.depth = 20;
    BatterySizes small;
    small.single_step_states = 2;
    small.single_step_replicates = 100;
    small.gram_states = 1;
    small.gram_replicates = 200;
    small.contraction_spectra = 10;
    small.quad_mc_spectra = 1;
    small.quad_mc_samples = 20000;
    EXPECT_EQ(to_csv(run_theory_battery(s, small).records), to_csv(run_theory_battery(s, small).records));
}

TEST(InitDemo, IterativeInitKeepsSamplesApart) {
    auto s = spec_of(ExperimentKind::init_demo);
    s.n_seeds = 2;
    s.depth = 10;
    const auto r = run_init_demo(s);
    ASSERT_EQ(r.series.size(), 2u);
    EXPECT_EQ(r.series[0].init, InitKind::xavier);
    EXPECT_GT(r.series[0].mean_v.back(), r.series[1].mean_v.back());
    EXPECT_EQ(r.gap_checks, 20u);
    EXPECT_EQ(r.gap_failures, 0u);
}

TEST(Dispatch, SummaryNamesTheExperiment) {
    auto s = spec_of(ExperimentKind::width_sweep);
    s.widths = {32, 64};
    s.depth = 20;
    s.n_seeds = 2;
    const auto out = run_experiment(s);
    EXPECT_TRUE(out.ok);
    EXPECT_EQ(out.summary.rfind("width_sweep: slope=", 0), 0u);
    EXPECT_FALSE(out.records.empty());
}
