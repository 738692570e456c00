#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "orthochain/chain.hpp"
#include "orthochain/init.hpp"
#include "orthochain/metrics.hpp"
#include "orthochain/parallel.hpp"
#include "orthochain/theory.hpp"

namespace orthochain {

// ---------------------------------------------------------------------------
// Specs and records
// ---------------------------------------------------------------------------

enum class ExperimentKind { chain, depth_sweep, width_sweep, cosine_contrast, conjecture_sweep, theory_battery, init_demo };

inline std::string_view to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::chain: return "chain";
        case ExperimentKind::depth_sweep: return "depth_sweep";
        case ExperimentKind::width_sweep: return "width_sweep";
        case ExperimentKind::cosine_contrast: return "cosine_contrast";
        case ExperimentKind::conjecture_sweep: return "conjecture_sweep";
        case ExperimentKind::theory_battery: return "theory_battery";
        case ExperimentKind::init_demo: return "init_demo";
    }
    return "?";
}

inline ExperimentKind parse_experiment_kind(std::string_view s) {
    for (auto k : {ExperimentKind::chain, ExperimentKind::depth_sweep, ExperimentKind::width_sweep,
                   ExperimentKind::cosine_contrast, ExperimentKind::conjecture_sweep, ExperimentKind::theory_battery,
                   ExperimentKind::init_demo})
        if (s == to_string(k)) return k;
    throw DomainError("unknown experiment kind '" + std::string(s) + "'");
}

/// Unset optionals and empty lists take the per-kind defaults of with_defaults().
struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::chain;
    std::optional<std::size_t> n;
    std::vector<std::size_t> widths;
    std::optional<std::size_t> depth;
    std::vector<Activation> activations;
    ChainKind chain_kind = ChainKind::bn;
    std::vector<std::uint64_t> seeds;  // replicate ids
    std::optional<std::size_t> n_seeds;
    std::uint64_t master_seed = 0;
    std::optional<std::size_t> burn_in;
    std::optional<InputKind> input;
    std::vector<InitKind> inits;
    std::string out;
    std::size_t threads = 0;
    /// Negative control for the theory battery: drop the 1/sqrt(d) factor.
    bool corrupt_scaling = false;

    void validate() const {
        if (seeds.empty()) throw DomainError("experiment needs at least one seed");
        for (std::size_t i = 1; i < widths.size(); ++i)
            if (widths[i] <= widths[i - 1]) throw DomainError("sweep widths must be strictly increasing");
        if (kind == ExperimentKind::width_sweep && widths.size() < 2)
            throw DomainError("width sweep needs at least two widths to fit a slope");
        if (kind == ExperimentKind::conjecture_sweep && activations.size() && widths.size() < 2)
            throw DomainError("conjecture sweep needs at least two widths to fit a slope");
        if (kind == ExperimentKind::depth_sweep && depth && *depth < 50)
            throw DomainError("depth sweep needs depth >= 50");
        if (kind == ExperimentKind::cosine_contrast && n && *n != 2) throw DomainError("cosine contrast uses n = 2");
        if (kind == ExperimentKind::conjecture_sweep)
            for (auto a : activations)
                if (a == Activation::linear) throw DomainError("conjecture sweep takes nonlinear activations");
        if (n && kind != ExperimentKind::init_demo && kind != ExperimentKind::theory_battery)
            for (auto d : widths)
                if (d < *n) throw DomainError("every width must be >= n");
    }
};

/// Fills every unset field with the default of the spec's kind.
inline ExperimentSpec with_defaults(ExperimentSpec s) {
    auto set_widths = [&](std::initializer_list<std::size_t> w) {
        if (s.widths.empty()) s.widths = w;
    };
    switch (s.kind) {
        case ExperimentKind::chain:
            if (!s.n) s.n = 4;
            set_widths({32});
            if (!s.depth) s.depth = 50;
            if (!s.n_seeds) s.n_seeds = 1;
            if (!s.input) s.input = InputKind::gaussian;
            break;
        case ExperimentKind::width_sweep:
            if (!s.n) s.n = 4;
            set_widths({32, 64, 128, 256, 512, 1024});
            if (!s.depth) s.depth = 500;
            if (!s.n_seeds) s.n_seeds = 20;
            if (!s.input) s.input = InputKind::gaussian;
            break;
        case ExperimentKind::depth_sweep:
            if (!s.n) s.n = 4;
            set_widths({1024});
            if (!s.depth) s.depth = 500;
            if (!s.n_seeds) s.n_seeds = 20;
            if (!s.input) s.input = InputKind::correlated;
            break;
        case ExperimentKind::cosine_contrast:
            if (!s.n) s.n = 2;
            set_widths({32});
            if (!s.depth) s.depth = 50;
            if (!s.n_seeds) s.n_seeds = 20;
            if (s.activations.empty()) s.activations = {Activation::linear, Activation::relu};
            break;
        case ExperimentKind::conjecture_sweep:
            if (!s.n) s.n = 4;
            set_widths({64, 128, 256, 512});
            if (!s.depth) s.depth = 1000;
            if (!s.burn_in) s.burn_in = 50;
            if (!s.n_seeds) s.n_seeds = 10;
            if (!s.input) s.input = InputKind::gaussian;
            if (s.activations.empty())
                s.activations = {Activation::relu, Activation::tanh, Activation::sin, Activation::sigmoid};
            break;
        case ExperimentKind::theory_battery:
            if (!s.n_seeds) s.n_seeds = 20;
            if (!s.depth) s.depth = 200;
            break;
        case ExperimentKind::init_demo:
            set_widths({32});
            if (!s.depth) s.depth = 20;
            if (!s.n_seeds) s.n_seeds = 5;
            if (s.activations.empty()) s.activations = {Activation::relu};
            if (s.inits.empty()) s.inits = {InitKind::xavier, InitKind::iterative_orthogonal};
            break;
    }
    if (s.activations.empty()) s.activations = {Activation::linear};
    if (!s.burn_in) s.burn_in = 50;
    if (s.seeds.empty())
        for (std::uint64_t i = 0; i < *s.n_seeds; ++i) s.seeds.push_back(i);
    s.n_seeds = s.seeds.size();
    s.validate();
    return s;
}

/// One CSV row: kind,n,d,layer,seed,metric,value. Aggregates use layer -1;
/// aggregates across widths use d = 0.
struct RunRecord {
    std::string kind;
    std::size_t n = 0;
    std::size_t d = 0;
    long long layer = -1;
    std::uint64_t seed = 0;
    std::string metric;
    double value = 0.0;
};

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline constexpr std::string_view kCsvHeader = "kind,n,d,layer,seed,metric,value";

inline void write_csv(std::ostream& os, const std::vector<RunRecord>& records) {
    os << kCsvHeader << '\n';
    for (const auto& r : records)
        os << r.kind << ',' << r.n << ',' << r.d << ',' << r.layer << ',' << r.seed << ',' << r.metric << ','
           << format_double(r.value) << '\n';
}

inline std::string to_csv(const std::vector<RunRecord>& records) {
    std::ostringstream os;
    write_csv(os, records);
    return os.str();
}

/// Seed of one run: a hash of the master seed, the experiment kind, the
/// parameter tuple and the replicate id.
inline std::uint64_t run_seed(std::uint64_t master, ExperimentKind kind, std::size_t n, std::size_t d,
                              std::string_view variant, std::uint64_t replicate) {
    return derive_seed(master, {hash_string(to_string(kind)), n, d, hash_string(variant), replicate});
}

// ---------------------------------------------------------------------------
// Statistics helpers
// ---------------------------------------------------------------------------

struct LogLogFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// OLS of ln y on ln x.
inline LogLogFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 2) throw DomainError("fit_loglog_slope: need at least two points");
    std::vector<double> lx, ly;
    for (auto [x, y] : points) {
        if (!(x > 0.0) || !(y > 0.0)) throw DomainError("fit_loglog_slope: coordinates must be positive");
        lx.push_back(std::log(x));
        ly.push_back(std::log(y));
    }
    const double m = static_cast<double>(lx.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= m;
    my /= m;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (!(sxx > 0.0)) throw DomainError("fit_loglog_slope: x values must not all coincide");
    LogLogFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

/// Linear-interpolated sample quantile, q in [0, 1].
inline double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) throw DomainError("quantile: empty sample");
    std::sort(xs.begin(), xs.end());
    const double pos = q * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

inline double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

/// Pointwise checks of the per-layer lemmas over every simulated layer.
struct InequalityTally {
    std::size_t layers = 0;
    std::size_t gap_lyapunov_violations = 0;   // V <= 2 n lyap (+1e-8)
    std::size_t tight_violations = 0;     // V <= sqrt(2) (n-1) lyap (+1e-8)
    std::size_t coupling_violations = 0;  // cost <= n V^2 and cost <= 2 n V
    std::size_t identity_violations = 0;  // V from Gram == V from spectrum (1e-8)
    std::size_t unit_norm_violations = 0; // | ||H||_F - 1 | <= 1e-10
    double worst_gap_lyapunov_margin = std::numeric_limits<double>::infinity();
    double worst_coupling_margin = std::numeric_limits<double>::infinity();

    void add(const LayerTrace& t) {
        ++layers;
        const auto n = static_cast<std::size_t>(t.gram.rows());
        const double nn = static_cast<double>(n);
        if (std::abs(t.frob_norm - 1.0) > 1e-10 || !std::isfinite(t.lyap_gap)) {
            ++unit_norm_violations;
            return;
        }
        const double margin_a = 2.0 * nn * t.lyap_gap - t.v_gap;
        worst_gap_lyapunov_margin = std::min(worst_gap_lyapunov_margin, margin_a);
        if (margin_a < -1e-8) ++gap_lyapunov_violations;
        if (t.v_gap > std::sqrt(2.0) * (nn - 1.0) * t.lyap_gap + 1e-8) ++tight_violations;
        SingularSpectrum unit(t.spectrum.values() / t.spectrum.values().norm());
        const auto q = coupling_w2_quantities(unit, n);
        const double margin_c = std::min(q.v_squared_bound, q.v_bound) - q.coupling_cost;
        worst_coupling_margin = std::min(worst_coupling_margin, margin_c);
        if (margin_c < -1e-12) ++coupling_violations;
        if (std::abs(q.v_gap - t.v_gap) > 1e-8) ++identity_violations;
    }

    void merge(const InequalityTally& o) {
        layers += o.layers;
        gap_lyapunov_violations += o.gap_lyapunov_violations;
        tight_violations += o.tight_violations;
        coupling_violations += o.coupling_violations;
        identity_violations += o.identity_violations;
        unit_norm_violations += o.unit_norm_violations;
        worst_gap_lyapunov_margin = std::min(worst_gap_lyapunov_margin, o.worst_gap_lyapunov_margin);
        worst_coupling_margin = std::min(worst_coupling_margin, o.worst_coupling_margin);
    }

    bool clean() const {
        return gap_lyapunov_violations == 0 && tight_violations == 0 && coupling_violations == 0 &&
               identity_violations == 0 && unit_norm_violations == 0;
    }
};

namespace detail {

inline ChainConfig chain_config(std::size_t n, std::size_t d, std::size_t depth, Activation act, ChainKind kind,
                                InputKind input, std::uint64_t seed) {
    ChainConfig c;
    c.batch = n;
    c.width = d;
    c.depth = depth;
    c.activation = act;
    c.kind = kind;
    c.input = input;
    c.seed = seed;
    return c;
}

inline void append(std::vector<RunRecord>& dst, std::vector<RunRecord>&& src) {
    dst.insert(dst.end(), std::make_move_iterator(src.begin()), std::make_move_iterator(src.end()));
}

inline void add_meta(std::vector<RunRecord>& out, const ExperimentSpec& s, std::size_t n, std::size_t d) {
    const std::string kind(to_string(s.kind));
    if (s.input) out.push_back({kind, n, d, -1, s.master_seed, "meta.input." + std::string(to_string(*s.input)), 1.0});
    out.push_back({kind, n, d, -1, s.master_seed, "meta.sampling.gram_factor", 1.0});
    out.push_back({kind, n, d, -1, s.master_seed, "meta.n_seeds", static_cast<double>(s.seeds.size())});
    out.push_back({kind, n, d, -1, s.master_seed, "meta.depth", static_cast<double>(*s.depth)});
}

struct Job {
    std::size_t width = 0;
    std::size_t width_index = 0;
    std::size_t seed_index = 0;
    std::size_t variant = 0;  // activation / chain / init index
};

inline std::vector<Job> grid(std::size_t variants, std::size_t widths, std::size_t seeds,
                             const std::vector<std::size_t>& width_values) {
    std::vector<Job> jobs;
    for (std::size_t v = 0; v < variants; ++v)
        for (std::size_t w = 0; w < widths; ++w)
            for (std::size_t s = 0; s < seeds; ++s) jobs.push_back({width_values[w], w, s, v});
    return jobs;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// chain
// ---------------------------------------------------------------------------

struct ChainExperimentResult {
    std::vector<RunRecord> records;
    InequalityTally lemmas;
};

inline ChainExperimentResult run_chain_experiment(const ExperimentSpec& raw) {
    const ExperimentSpec s = with_defaults(raw);
    const std::size_t n = *s.n;
    const std::string kind(to_string(s.kind));
    const std::string variant = std::string(to_string(s.activations[0])) + "/" + std::string(to_string(s.chain_kind));
    const auto jobs = detail::grid(1, s.widths.size(), s.seeds.size(), s.widths);
    struct Out {
        std::vector<RunRecord> records;
        InequalityTally lemmas;
    };
    auto outs = parallel_map(jobs.size(), resolve_threads(s.threads), [&](std::size_t j) {
        const auto& job = jobs[j];
        const std::uint64_t rep = s.seeds[job.seed_index];
        const auto cfg = detail::chain_config(n, job.width, *s.depth, s.activations[0], s.chain_kind, *s.input,
                                              run_seed(s.master_seed, s.kind, n, job.width, variant, rep));
        const ChainRun run = run_chain(cfg);
        Out o;
        auto emit = [&](const LayerTrace& t) {
            const auto l = static_cast<long long>(t.layer);
            o.records.push_back({kind, n, job.width, l, rep, "v_gap", t.v_gap});
            o.records.push_back({kind, n, job.width, l, rep, "lyap_gap", t.lyap_gap});
            o.records.push_back({kind, n, job.width, l, rep, "sigma_min", t.sigma_min});
            o.records.push_back({kind, n, job.width, l, rep, "frob_norm", t.frob_norm});
            o.records.push_back({kind, n, job.width, l, rep, "mean_abs_cosine", t.mean_abs_cosine()});
            o.records.push_back({kind, n, job.width, l, rep, "entry_mean", t.entry_mean});
            o.records.push_back({kind, n, job.width, l, rep, "entry_var", t.entry_var});
        };
        emit(run.input);
        for (const auto& t : run.layers) {
            emit(t);
            if (s.chain_kind == ChainKind::bn) o.lemmas.add(t);
        }
        return o;
    });
    ChainExperimentResult r;
    for (std::size_t w = 0; w < s.widths.size(); ++w) detail::add_meta(r.records, s, n, s.widths[w]);
    for (auto& o : outs) {
        detail::append(r.records, std::move(o.records));
        r.lemmas.merge(o.lemmas);
    }
    return r;
}

// ---------------------------------------------------------------------------
// width sweep
// ---------------------------------------------------------------------------

struct WidthSweepResult {
    std::vector<RunRecord> records;
    std::vector<std::size_t> widths;
    std::vector<double> mean_v;                  // per width, averaged over layers and seeds
    std::vector<std::vector<double>> seed_means; // [width][seed]
    LogLogFit fit;
    double slope_ci_low = 0.0;
    double slope_ci_high = 0.0;
    InequalityTally lemmas;
};

inline constexpr std::size_t kBootstrapResamples = 200;

/// Averages V over layers 1..depth per (width, seed) and fits the log-log
/// slope of the seed-mean against width; bootstrap CI over seeds.
inline WidthSweepResult run_width_sweep(const ExperimentSpec& raw) {
    ExperimentSpec in = raw;
    in.kind = ExperimentKind::width_sweep;
    const ExperimentSpec s = with_defaults(in);
    const std::size_t n = *s.n;
    const std::string kind(to_string(s.kind));
    const auto jobs = detail::grid(1, s.widths.size(), s.seeds.size(), s.widths);
    struct Out {
        std::vector<RunRecord> records;
        double mean_v = 0.0;
        InequalityTally lemmas;
    };
    auto outs = parallel_map(jobs.size(), resolve_threads(s.threads), [&](std::size_t j) {
        const auto& job = jobs[j];
        const std::uint64_t rep = s.seeds[job.seed_index];
        const auto cfg = detail::chain_config(n, job.width, *s.depth, Activation::linear, ChainKind::bn, *s.input,
                                              run_seed(s.master_seed, s.kind, n, job.width, "bn", rep));
        const auto traces = simulate_chain(cfg);
        Out o;
        double acc = 0.0;
        for (const auto& t : traces) {
            o.records.push_back({kind, n, job.width, static_cast<long long>(t.layer), rep, "v_gap", t.v_gap});
            acc += t.v_gap;
            o.lemmas.add(t);
        }
        o.mean_v = acc / static_cast<double>(traces.size());
        o.records.push_back({kind, n, job.width, -1, rep, "mean_v", o.mean_v});
        return o;
    });

    WidthSweepResult r;
    r.widths = s.widths;
    r.seed_means.assign(s.widths.size(), {});
    for (std::size_t w = 0; w < s.widths.size(); ++w) detail::add_meta(r.records, s, n, s.widths[w]);
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        r.seed_means[jobs[j].width_index].push_back(outs[j].mean_v);
        detail::append(r.records, std::move(outs[j].records));
        r.lemmas.merge(outs[j].lemmas);
    }
    std::vector<std::pair<double, double>> pts;
    for (std::size_t w = 0; w < s.widths.size(); ++w) {
        r.mean_v.push_back(mean_of(r.seed_means[w]));
        pts.emplace_back(static_cast<double>(s.widths[w]), r.mean_v.back());
        r.records.push_back({kind, n, s.widths[w], -1, s.master_seed, "mean_v_over_seeds", r.mean_v.back()});
    }
    r.fit = fit_loglog_slope(pts);

    SeededRng boot(derive_seed(s.master_seed, {hash_string("bootstrap")}));
    std::vector<double> slopes;
    const std::size_t k = s.seeds.size();
    for (std::size_t b = 0; b < kBootstrapResamples; ++b) {
        std::vector<std::size_t> pick(k);
        for (auto& p : pick) p = static_cast<std::size_t>(boot.next_u64() % k);
        std::vector<std::pair<double, double>> bp;
        for (std::size_t w = 0; w < s.widths.size(); ++w) {
            double acc = 0.0;
            for (auto p : pick) acc += r.seed_means[w][p];
            bp.emplace_back(static_cast<double>(s.widths[w]), acc / static_cast<double>(k));
        }
        slopes.push_back(fit_loglog_slope(bp).slope);
    }
    r.slope_ci_low = quantile(slopes, 0.025);
    r.slope_ci_high = quantile(slopes, 0.975);
    for (auto [name, v] : {std::pair{"slope", r.fit.slope}, {"intercept", r.fit.intercept}, {"r2", r.fit.r2},
                           {"slope_ci_low", r.slope_ci_low}, {"slope_ci_high", r.slope_ci_high}})
        r.records.push_back({kind, n, 0, -1, s.master_seed, name, v});
    return r;
}

// ---------------------------------------------------------------------------
// depth sweep
// ---------------------------------------------------------------------------

struct DecayFit {
    double plateau = 0.0;            // mean of mean V over the final half of layers
    std::size_t segment_end = 0;     // last layer of the pre-plateau segment
    double slope = std::numeric_limits<double>::quiet_NaN();  // of mean log V per layer
    double rate = std::numeric_limits<double>::quiet_NaN();   // exp(slope)
};

/// `mean_v` and `mean_log_v` are indexed by layer 0..L. The pre-plateau
/// segment is the run of layers from 1 on where mean V exceeds 3x the plateau.
inline DecayFit analyze_depth_decay(const std::vector<double>& mean_v, const std::vector<double>& mean_log_v) {
    if (mean_v.size() < 3 || mean_v.size() != mean_log_v.size())
        throw DomainError("analyze_depth_decay: need matching series of at least two layers");
    const std::size_t last = mean_v.size() - 1;
    const std::size_t half = last / 2;
    DecayFit f;
    double acc = 0.0;
    for (std::size_t l = last - half + 1; l <= last; ++l) acc += mean_v[l];
    f.plateau = acc / static_cast<double>(half);
    std::size_t end = 0;
    for (std::size_t l = 1; l <= last && mean_v[l] > 3.0 * f.plateau; ++l) end = l;
    f.segment_end = end;
    if (end >= 2) {
        double mx = 0.0, my = 0.0;
        for (std::size_t l = 1; l <= end; ++l) {
            mx += static_cast<double>(l);
            my += mean_log_v[l];
        }
        mx /= static_cast<double>(end);
        my /= static_cast<double>(end);
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t l = 1; l <= end; ++l) {
            sxx += (static_cast<double>(l) - mx) * (static_cast<double>(l) - mx);
            sxy += (static_cast<double>(l) - mx) * (mean_log_v[l] - my);
        }
        f.slope = sxy / sxx;
        f.rate = std::exp(f.slope);
    }
    return f;
}

inline constexpr std::size_t kDepthBoundCheckLayers = 100;

struct DepthCurve {
    std::size_t width = 0;
    std::vector<double> mean_v;      // layers 0..L
    std::vector<double> mean_log_v;  // layers 0..L
    double alpha_hat = 0.0;          // min sigma_n^2 over layers 1..L and seeds
    DecayFit decay;
    double plateau_bound = 0.0;      // 3 n / (alpha_hat sqrt(d))
    bool bound_dominates = false;    // depth_bound(alpha_hat, l-1) >= mean V_l for l <= 100
    std::size_t first_bound_violation = 0;
    double ratio_30_to_1 = std::numeric_limits<double>::quiet_NaN();
};

struct DepthSweepResult {
    std::vector<RunRecord> records;
    std::vector<DepthCurve> curves;
    InequalityTally lemmas;
};

inline DepthSweepResult run_depth_sweep(const ExperimentSpec& raw) {
    ExperimentSpec in = raw;
    in.kind = ExperimentKind::depth_sweep;
    const ExperimentSpec s = with_defaults(in);
    const std::size_t n = *s.n, depth = *s.depth;
    const std::string kind(to_string(s.kind));
    const auto jobs = detail::grid(1, s.widths.size(), s.seeds.size(), s.widths);
    struct Out {
        std::vector<RunRecord> records;
        std::vector<double> v;  // 0..L
        double alpha = 0.0;
        InequalityTally lemmas;
    };
    auto outs = parallel_map(jobs.size(), resolve_threads(s.threads), [&](std::size_t j) {
        const auto& job = jobs[j];
        const std::uint64_t rep = s.seeds[job.seed_index];
        const auto cfg = detail::chain_config(n, job.width, depth, Activation::linear, ChainKind::bn, *s.input,
                                              run_seed(s.master_seed, s.kind, n, job.width, "bn", rep));
        const ChainRun run = run_chain(cfg);
        Out o;
        o.v.push_back(run.input.v_gap);
        o.records.push_back({kind, n, job.width, 0, rep, "v_gap", run.input.v_gap});
        for (const auto& t : run.layers) {
            o.v.push_back(t.v_gap);
            o.records.push_back({kind, n, job.width, static_cast<long long>(t.layer), rep, "v_gap", t.v_gap});
            o.records.push_back({kind, n, job.width, static_cast<long long>(t.layer), rep, "lyap_gap", t.lyap_gap});
            o.lemmas.add(t);
        }
        o.alpha = estimate_alpha(run.layers);
        return o;
    });

    DepthSweepResult r;
    for (std::size_t w = 0; w < s.widths.size(); ++w) detail::add_meta(r.records, s, n, s.widths[w]);
    for (std::size_t w = 0; w < s.widths.size(); ++w) {
        DepthCurve c;
        c.width = s.widths[w];
        c.mean_v.assign(depth + 1, 0.0);
        c.mean_log_v.assign(depth + 1, 0.0);
        c.alpha_hat = std::numeric_limits<double>::infinity();
        std::size_t count = 0;
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            if (jobs[j].width_index != w) continue;
            ++count;
            for (std::size_t l = 0; l <= depth; ++l) {
                c.mean_v[l] += outs[j].v[l];
                c.mean_log_v[l] += std::log(outs[j].v[l]);
            }
            c.alpha_hat = std::min(c.alpha_hat, outs[j].alpha);
        }
        for (std::size_t l = 0; l <= depth; ++l) {
            c.mean_v[l] /= static_cast<double>(count);
            c.mean_log_v[l] /= static_cast<double>(count);
        }
        c.decay = analyze_depth_decay(c.mean_v, c.mean_log_v);
        const double sqrt_d = std::sqrt(static_cast<double>(c.width));
        c.plateau_bound = c.alpha_hat > 0.0 ? 3.0 * static_cast<double>(n) / (c.alpha_hat * sqrt_d)
                                            : std::numeric_limits<double>::infinity();
        c.bound_dominates = c.alpha_hat > 0.0;
        for (std::size_t l = 1; l <= std::min(depth, kDepthBoundCheckLayers) && c.alpha_hat > 0.0; ++l) {
            const double b = depth_bound(std::min(c.alpha_hat, 1.0 / static_cast<double>(n)), l - 1, n, c.width);
            if (c.mean_v[l] > b) {
                c.bound_dominates = false;
                if (!c.first_bound_violation) c.first_bound_violation = l;
            }
        }
        if (depth >= 30) c.ratio_30_to_1 = c.mean_v[30] / c.mean_v[1];
        for (std::size_t l = 0; l <= depth; ++l) {
            r.records.push_back({kind, n, c.width, static_cast<long long>(l), s.master_seed, "mean_v", c.mean_v[l]});
            r.records.push_back(
                {kind, n, c.width, static_cast<long long>(l), s.master_seed, "mean_log_v", c.mean_log_v[l]});
        }
        for (auto [name, v] :
             {std::pair{"alpha_hat", c.alpha_hat}, {"meta.alpha_definition.min_sigma_n_squared", 1.0},
              {"plateau", c.decay.plateau}, {"plateau_bound", c.plateau_bound},
              {"decay_slope", c.decay.slope}, {"decay_rate", c.decay.rate},
              {"segment_end", static_cast<double>(c.decay.segment_end)}, {"ratio_30_to_1", c.ratio_30_to_1},
              {"depth_bound_dominates", c.bound_dominates ? 1.0 : 0.0}})
            r.records.push_back({kind, n, c.width, -1, s.master_seed, name, v});
        r.curves.push_back(std::move(c));
    }
    for (auto& o : outs) {
        detail::append(r.records, std::move(o.records));
        r.lemmas.merge(o.lemmas);
    }
    return r;
}

// ---------------------------------------------------------------------------
// cosine contrast
// ---------------------------------------------------------------------------

struct CosineBand {
    std::vector<double> median, low, high;  // per layer 0..L; 2.5% / 97.5% quantiles
};

struct CosineContrastResult {
    std::vector<RunRecord> records;
    std::size_t width = 0;
    CosineBand bn;       // correlated inputs
    CosineBand vanilla;  // orthogonal inputs
    InequalityTally lemmas;
};

/// |cosine| between the two samples across layers, for a BN chain started
/// from correlated inputs and a vanilla chain started from orthogonal inputs.
/// activations[0] drives the BN arm, activations[1] (or [0]) the vanilla arm.
inline CosineContrastResult run_cosine_contrast(const ExperimentSpec& raw) {
    ExperimentSpec in = raw;
    in.kind = ExperimentKind::cosine_contrast;
    const ExperimentSpec s = with_defaults(in);
    const std::size_t n = *s.n, depth = *s.depth, d = s.widths.front();
    const std::string kind(to_string(s.kind));
    const ChainKind kinds[2] = {ChainKind::bn, ChainKind::vanilla};
    const InputKind inputs[2] = {InputKind::correlated, InputKind::orthogonal};
    const auto jobs = detail::grid(2, 1, s.seeds.size(), {d});
    auto arm_activation = [&](std::size_t arm) { return s.activations[std::min(arm, s.activations.size() - 1)]; };
    struct Out {
        std::vector<RunRecord> records;
        std::vector<double> cos;  // 0..L
        InequalityTally lemmas;
    };
    auto outs = parallel_map(jobs.size(), resolve_threads(s.threads), [&](std::size_t j) {
        const auto& job = jobs[j];
        const std::uint64_t rep = s.seeds[job.seed_index];
        const ChainKind ck = kinds[job.variant];
        const std::string metric = "abs_cosine." + std::string(to_string(ck));
        const auto cfg = detail::chain_config(n, d, depth, arm_activation(job.variant), ck, inputs[job.variant],
                                              run_seed(s.master_seed, s.kind, n, d, to_string(ck), rep));
        const ChainRun run = run_chain(cfg);
        Out o;
        o.cos.push_back(std::abs(run.input.cosines.at(0)));
        o.records.push_back({kind, n, d, 0, rep, metric, o.cos.back()});
        for (const auto& t : run.layers) {
            o.cos.push_back(std::abs(t.cosines.at(0)));
            o.records.push_back({kind, n, d, static_cast<long long>(t.layer), rep, metric, o.cos.back()});
            if (ck == ChainKind::bn) o.lemmas.add(t);
        }
        return o;
    });

    CosineContrastResult r;
    r.width = d;
    r.records.push_back({kind, n, d, -1, s.master_seed, "meta.input.bn.correlated", 1.0});
    r.records.push_back({kind, n, d, -1, s.master_seed, "meta.input.vanilla.orthogonal", 1.0});
    r.records.push_back(
        {kind, n, d, -1, s.master_seed, "meta.activation.bn." + std::string(to_string(arm_activation(0))), 1.0});
    r.records.push_back(
        {kind, n, d, -1, s.master_seed, "meta.activation.vanilla." + std::string(to_string(arm_activation(1))), 1.0});
    for (std::size_t v = 0; v < 2; ++v) {
        CosineBand& band = v == 0 ? r.bn : r.vanilla;
        const std::string name(to_string(kinds[v]));
        for (std::size_t l = 0; l <= depth; ++l) {
            std::vector<double> xs;
            for (std::size_t j = 0; j < jobs.size(); ++j)
                if (jobs[j].variant == v) xs.push_back(outs[j].cos[l]);
            band.median.push_back(quantile(xs, 0.5));
            band.low.push_back(quantile(xs, 0.025));
            band.high.push_back(quantile(xs, 0.975));
            const auto ll = static_cast<long long>(l);
            r.records.push_back({kind, n, d, ll, s.master_seed, "median_abs_cosine." + name, band.median.back()});
            r.records.push_back({kind, n, d, ll, s.master_seed, "q025_abs_cosine." + name, band.low.back()});
            r.records.push_back({kind, n, d, ll, s.master_seed, "q975_abs_cosine." + name, band.high.back()});
        }
    }
    for (auto& o : outs) {
        detail::append(r.records, std::move(o.records));
        r.lemmas.merge(o.lemmas);
    }
    return r;
}

// ---------------------------------------------------------------------------
// conjecture sweep
// ---------------------------------------------------------------------------

struct ConjectureSeries {
    Activation activation = Activation::relu;
    std::vector<double> mean_l;   // per width
    std::vector<double> mean_v;   // per width, same layers
    std::vector<double> v_l_rel_diff;  // |mean L - mean V| / mean V per width
    LogLogFit fit;
};

struct ConjectureSweepResult {
    std::vector<RunRecord> records;
    std::vector<std::size_t> widths;
    std::vector<ConjectureSeries> series;
    double slope_spread = 0.0;  // max slope - min slope over activations
    InequalityTally lemmas;
};

/// Mean of L(Q_l) over `depth` post-burn-in layers per (activation, width),
/// and the log-log slope against width per activation.
inline ConjectureSweepResult run_conjecture_sweep(const ExperimentSpec& raw) {
    ExperimentSpec in = raw;
    in.kind = ExperimentKind::conjecture_sweep;
    const ExperimentSpec s = with_defaults(in);
    const std::size_t n = *s.n, depth = *s.depth, burn = *s.burn_in;
    const std::string kind(to_string(s.kind));
    const auto jobs = detail::grid(s.activations.size(), s.widths.size(), s.seeds.size(), s.widths);
    struct Out {
        std::vector<RunRecord> records;
        double mean_l = 0.0, mean_v = 0.0;
        InequalityTally lemmas;
    };
    auto outs = parallel_map(jobs.size(), resolve_threads(s.threads), [&](std::size_t j) {
        const auto& job = jobs[j];
        const std::uint64_t rep = s.seeds[job.seed_index];
        const Activation act = s.activations[job.variant];
        const std::string an(to_string(act));
        const auto cfg = detail::chain_config(n, job.width, burn + depth, act, ChainKind::bn, *s.input,
                                              run_seed(s.master_seed, s.kind, n, job.width, an, rep));
        const auto traces = simulate_chain(cfg);
        std::vector<Matrix> grams;
        grams.reserve(traces.size());
        for (const auto& t : traces) grams.push_back(t.gram);
        const auto gaps = conjecture_gap(grams, burn);
        Out o;
        for (std::size_t k = 0; k < gaps.size(); ++k) {
            const auto& t = traces[burn + k];
            const auto l = static_cast<long long>(t.layer);
            o.records.push_back({kind, n, job.width, l, rep, an + ".conjecture_gap", gaps[k]});
            o.records.push_back({kind, n, job.width, l, rep, an + ".v_gap", t.v_gap});
            o.mean_l += gaps[k];
            o.mean_v += t.v_gap;
        }
        for (const auto& t : traces) o.lemmas.add(t);
        o.mean_l /= static_cast<double>(gaps.size());
        o.mean_v /= static_cast<double>(gaps.size());
        o.records.push_back({kind, n, job.width, -1, rep, an + ".mean_conjecture_gap", o.mean_l});
        return o;
    });

    ConjectureSweepResult r;
    r.widths = s.widths;
    for (std::size_t w = 0; w < s.widths.size(); ++w) {
        detail::add_meta(r.records, s, n, s.widths[w]);
        r.records.push_back({kind, n, s.widths[w], -1, s.master_seed, "meta.burn_in", static_cast<double>(burn)});
    }
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t a = 0; a < s.activations.size(); ++a) {
        ConjectureSeries c;
        c.activation = s.activations[a];
        const std::string an(to_string(c.activation));
        std::vector<std::pair<double, double>> pts;
        for (std::size_t w = 0; w < s.widths.size(); ++w) {
            double l_acc = 0.0, v_acc = 0.0;
            std::size_t count = 0;
            for (std::size_t j = 0; j < jobs.size(); ++j)
                if (jobs[j].variant == a && jobs[j].width_index == w) {
                    l_acc += outs[j].mean_l;
                    v_acc += outs[j].mean_v;
                    ++count;
                }
            c.mean_l.push_back(l_acc / static_cast<double>(count));
            c.mean_v.push_back(v_acc / static_cast<double>(count));
            c.v_l_rel_diff.push_back(std::abs(c.mean_l.back() - c.mean_v.back()) / c.mean_v.back());
            pts.emplace_back(static_cast<double>(s.widths[w]), c.mean_l.back());
            r.records.push_back({kind, n, s.widths[w], -1, s.master_seed, an + ".mean_l", c.mean_l.back()});
            r.records.push_back({kind, n, s.widths[w], -1, s.master_seed, an + ".mean_v", c.mean_v.back()});
            r.records.push_back(
                {kind, n, s.widths[w], -1, s.master_seed, an + ".v_l_rel_diff", c.v_l_rel_diff.back()});
        }
        c.fit = fit_loglog_slope(pts);
        lo = std::min(lo, c.fit.slope);
        hi = std::max(hi, c.fit.slope);
        r.records.push_back({kind, n, 0, -1, s.master_seed, an + ".slope", c.fit.slope});
        r.records.push_back({kind, n, 0, -1, s.master_seed, an + ".intercept", c.fit.intercept});
        r.records.push_back({kind, n, 0, -1, s.master_seed, an + ".r2", c.fit.r2});
        r.series.push_back(std::move(c));
    }
    r.slope_spread = hi - lo;
    r.records.push_back({kind, n, 0, -1, s.master_seed, "slope_spread", r.slope_spread});
    for (auto& o : outs) {
        detail::append(r.records, std::move(o.records));
        r.lemmas.merge(o.lemmas);
    }
    return r;
}

// ---------------------------------------------------------------------------
// theory battery
// ---------------------------------------------------------------------------

struct CheckResult {
    std::string name;
    std::size_t n = 0;
    std::size_t d = 0;
    bool passed = false;
    double empirical = 0.0;  // worst observed value of the checked quantity
    double bound = 0.0;
};

struct TheoryBatteryResult {
    std::vector<RunRecord> records;
    std::vector<CheckResult> checks;

    std::size_t failures() const {
        std::size_t f = 0;
        for (const auto& c : checks) f += c.passed ? 0 : 1;
        return f;
    }
};

struct BatterySizes {
    std::size_t chain_layers = 50;
    std::size_t single_step_states = 10;
    std::size_t single_step_replicates = 500;
    std::size_t gram_states = 3;
    std::size_t gram_replicates = 500;
    std::size_t contraction_spectra = 100;
    std::size_t quad_mc_spectra = 5;
    std::size_t quad_mc_samples = 200000;
};

/// Runs every verifier of the theory module on the (n, d) pairs of the spec
/// (default (2, 64), (4, 256), (8, 1024)). Failures are recorded, not thrown.
inline TheoryBatteryResult run_theory_battery(const ExperimentSpec& raw, const BatterySizes& sizes = {}) {
    ExperimentSpec in = raw;
    in.kind = ExperimentKind::theory_battery;
    const ExperimentSpec s = with_defaults(in);
    const std::string kind(to_string(s.kind));
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    if (s.n && !s.widths.empty())
        for (auto d : s.widths) pairs.emplace_back(*s.n, d);
    else
        pairs = {{2, 64}, {4, 256}, {8, 1024}};
    const std::size_t threads = resolve_threads(s.threads);
    const std::uint64_t master = s.master_seed;

    TheoryBatteryResult r;
    auto record = [&](CheckResult c) {
        r.records.push_back({kind, c.n, c.d, -1, master, c.name + ".passed", c.passed ? 1.0 : 0.0});
        r.records.push_back({kind, c.n, c.d, -1, master, c.name + ".empirical", c.empirical});
        r.records.push_back({kind, c.n, c.d, -1, master, c.name + ".bound", c.bound});
        r.checks.push_back(std::move(c));
    };
    auto seed_for = [&](std::string_view check, std::size_t n, std::size_t d, std::uint64_t rep) {
        return run_seed(master, s.kind, n, d, check, rep);
    };

    for (auto [n, d] : pairs) {
        const double nn = static_cast<double>(n);

        // Chains: unit norm, the V-Lyapunov inequality (both forms), coupling chain, V identity,
        // no-assumption stability and the depth bound, all on the same runs.
        auto runs = parallel_map(s.seeds.size(), threads, [&](std::size_t i) {
            ChainConfig cfg = detail::chain_config(n, d, std::max(*s.depth, sizes.chain_layers), Activation::linear,
                                                   ChainKind::bn, InputKind::gaussian,
                                                   seed_for("chain", n, d, s.seeds[i]));
            cfg.width_scaling = !s.corrupt_scaling;
            return run_chain(cfg);
        });
        double worst_norm = 0.0;
        InequalityTally tally;
        std::vector<double> lyap0;
        std::vector<std::vector<LayerTrace>> layers;
        for (const auto& run : runs) {
            for (const auto& t : run.layers) {
                worst_norm = std::max(worst_norm, std::abs(t.frob_norm - 1.0));
                tally.add(t);
            }
            lyap0.push_back(run.input.lyap_gap);
            layers.push_back(run.layers);
        }
        record({"unit_norm", n, d, worst_norm <= 1e-10, worst_norm, 1e-10});
        if (s.corrupt_scaling) continue;  // the remaining checks presume unit norm
        record({"gap_lyapunov", n, d, tally.gap_lyapunov_violations == 0, -tally.worst_gap_lyapunov_margin, 1e-8});
        record({"gap_lyapunov_tight", n, d, tally.tight_violations == 0, static_cast<double>(tally.tight_violations), 0.0});
        record({"coupling_chain", n, d, tally.coupling_violations == 0, -tally.worst_coupling_margin, 1e-12});
        record({"v_spectrum_identity", n, d, tally.identity_violations == 0,
                static_cast<double>(tally.identity_violations), 0.0});
        const BoundReport stab = no_assumption_stability(lyap0, layers, d);
        record({"no_assumption_stability", n, d, stab.satisfied, stab.empirical, stab.bound});
        const double alpha = estimate_alpha(layers);
        bool dominates = alpha > 0.0;
        double worst_ratio = 0.0;
        for (std::size_t l = 1; dominates && l <= std::min<std::size_t>(kDepthBoundCheckLayers, layers[0].size()); ++l) {
            double mv = 0.0;
            for (const auto& run : layers) mv += run[l - 1].v_gap;
            mv /= static_cast<double>(layers.size());
            const double b = depth_bound(std::min(alpha, 1.0 / nn), l - 1, n, d);
            worst_ratio = std::max(worst_ratio, mv / b);
            if (mv > b) dominates = false;
        }
        record({"depth_bound_dominates", n, d, dominates, worst_ratio, 1.0});

        // Single-step contraction from random unit-norm states.
        auto steps = parallel_map(sizes.single_step_states, threads, [&](std::size_t i) {
            SeededRng rng(seed_for("single_step", n, d, i));
            const Repr h = random_unit_state(static_cast<Index>(d), random_unit_spectrum(n, rng), rng);
            return verify_single_step(h, sizes.single_step_replicates, rng);
        });
        bool ok = true;
        double worst = -std::numeric_limits<double>::infinity();
        for (const auto& b : steps) {
            ok = ok && b.satisfied;
            worst = std::max(worst, -b.margin);
        }
        record({"single_step", n, d, ok, worst, 0.0});

        auto grams = parallel_map(sizes.gram_states, threads, [&](std::size_t i) {
            SeededRng rng(seed_for("gram", n, d, i));
            const Repr h = random_unit_state(static_cast<Index>(d), random_unit_spectrum(n, rng), rng);
            return verify_gram_concentration(h, sizes.gram_replicates, rng);
        });
        ok = true;
        double worst_z = 0.0, worst_conc = 0.0;
        for (const auto& g : grams) {
            ok = ok && g.all_ok();
            worst_z = std::max({worst_z, g.max_diag_z, g.max_offdiag_z});
            worst_conc = std::max(worst_conc, g.concentration.empirical);
        }
        record({"gram_concentration", n, d, ok, worst_conc, 1.0 / static_cast<double>(d)});
        record({"gram_mean_zscore", n, d, ok, worst_z, kGramZThreshold});

        // Spectrum-only checks.
        SeededRng srng(seed_for("spectra", n, d, 0));
        bool cc_ok = true, cc_proof_ok = true;
        double cc_worst = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < sizes.contraction_spectra; ++i) {
            const auto rep = verify_contraction_center(random_unit_spectrum(n, srng));
            cc_ok = cc_ok && rep.stated_ok;
            cc_proof_ok = cc_proof_ok && rep.proof_ok;
            cc_worst = std::max(cc_worst, rep.lhs - rep.stated_bound);
        }
        record({"contraction_center", n, d, cc_ok, cc_worst, 0.0});
        record({"contraction_center_proof_form", n, d, cc_proof_ok, 0.0, 0.0});

        const auto scan = g_convexity_scan(n, {0.0, 1.0, 10.0, 100.0});
        record({"g_convexity", n, d, scan.convex, scan.min_second_difference, kConvexitySlack});

        // Quadrature against Monte Carlo with a family-wise 1% threshold.
        const std::size_t comparisons = sizes.quad_mc_spectra * n;
        const double z_star = boost::math::quantile(boost::math::normal(),
                                                    1.0 - 0.005 / static_cast<double>(comparisons));
        auto qm = parallel_map(sizes.quad_mc_spectra, threads, [&](std::size_t i) {
            SeededRng rng(seed_for("quad_mc", n, d, i));
            const SingularSpectrum sig = random_unit_spectrum(n, rng);
            const PVector q = p_vector_quadrature(sig);
            const PVector m = p_vector_montecarlo(sig, sizes.quad_mc_samples, rng);
            return std::pair{max_p_zscore(q, m), std::abs(q.sum() - 1.0)};
        });
        double zmax = 0.0, sum_err = 0.0;
        for (auto [z, e] : qm) {
            zmax = std::max(zmax, z);
            sum_err = std::max(sum_err, e);
        }
        record({"quad_vs_mc", n, d, zmax <= z_star, zmax, z_star});
        record({"p_sum_to_one", n, d, sum_err <= 1e-6, sum_err, 1e-6});
    }
    return r;
}

// ---------------------------------------------------------------------------
// init demo
// ---------------------------------------------------------------------------

struct InitDemoSeries {
    InitKind init = InitKind::xavier;
    std::vector<double> mean_v;  // layers 0..L
};

struct InitDemoResult {
    std::vector<RunRecord> records;
    std::vector<InitDemoSeries> series;
    std::size_t gap_checks = 0;
    std::size_t gap_failures = 0;
};

/// Vanilla MLP without BN, batch n (default 2d): per-layer V under each init
/// scheme. The iterative scheme computes each W from the layer's actual input
/// and checks V(W X) < V(X) at every layer.
inline InitDemoResult run_init_demo(const ExperimentSpec& raw) {
    ExperimentSpec in = raw;
    in.kind = ExperimentKind::init_demo;
    const ExperimentSpec s = with_defaults(in);
    const std::size_t d = s.widths.front();
    const std::size_t n = s.n ? *s.n : 2 * d;
    if (n < d) throw DomainError("init demo needs batch n >= width d");
    const std::size_t depth = *s.depth;
    const Activation act = s.activations.front();
    const std::string kind(to_string(s.kind));
    const auto jobs = detail::grid(s.inits.size(), 1, s.seeds.size(), {d});
    struct Out {
        std::vector<RunRecord> records;
        std::vector<double> v;
        std::size_t checks = 0, failures = 0;
    };
    auto outs = parallel_map(jobs.size(), resolve_threads(s.threads), [&](std::size_t j) {
        const auto& job = jobs[j];
        const std::uint64_t rep = s.seeds[job.seed_index];
        const InitKind ik = s.inits[job.variant];
        const std::string iname(to_string(ik));
        SeededRng rng(run_seed(s.master_seed, s.kind, n, d, iname, rep));
        Matrix x = sample_gaussian_matrix(static_cast<Index>(d), static_cast<Index>(n), Variance(1.0), rng);
        x /= x.norm();
        Out o;
        o.v.push_back(orthogonality_gap(x));
        o.records.push_back({kind, n, d, 0, rep, iname + ".v_gap", o.v.back()});
        for (std::size_t l = 1; l <= depth; ++l) {
            const Matrix a = l == 1 ? x : activate(act, x);
            Matrix w;
            switch (ik) {
                case InitKind::gaussian_variance_over_d: w = gaussian_init(a.rows(), a.rows(), rng); break;
                case InitKind::xavier: w = xavier_init(a.rows(), a.rows(), rng); break;
                case InitKind::iterative_orthogonal: {
                    w = iterative_orthogonal_init(a, rng);
                    const auto g = verify_init_gap(a, w);
                    ++o.checks;
                    if (!g.holds()) ++o.failures;
                    break;
                }
            }
            const Matrix next = w * a;
            x = next / next.norm();
            o.v.push_back(orthogonality_gap(x));
            o.records.push_back({kind, n, d, static_cast<long long>(l), rep, iname + ".v_gap", o.v.back()});
        }
        return o;
    });
    InitDemoResult r;
    r.records.push_back({kind, n, d, -1, s.master_seed, "meta.activation." + std::string(to_string(act)), 1.0});
    for (std::size_t v = 0; v < s.inits.size(); ++v) {
        InitDemoSeries series{s.inits[v], std::vector<double>(depth + 1, 0.0)};
        std::size_t count = 0;
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            if (jobs[j].variant != v) continue;
            ++count;
            for (std::size_t l = 0; l <= depth; ++l) series.mean_v[l] += outs[j].v[l];
        }
        const std::string iname(to_string(s.inits[v]));
        for (std::size_t l = 0; l <= depth; ++l) {
            series.mean_v[l] /= static_cast<double>(count);
            r.records.push_back(
                {kind, n, d, static_cast<long long>(l), s.master_seed, iname + ".mean_v", series.mean_v[l]});
        }
        r.series.push_back(std::move(series));
    }
    for (auto& o : outs) {
        detail::append(r.records, std::move(o.records));
        r.gap_checks += o.checks;
        r.gap_failures += o.failures;
    }
    r.records.push_back({kind, n, d, -1, s.master_seed, "gap_checks", static_cast<double>(r.gap_checks)});
    r.records.push_back({kind, n, d, -1, s.master_seed, "gap_failures", static_cast<double>(r.gap_failures)});
    return r;
}

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

struct ExperimentOutcome {
    std::vector<RunRecord> records;
    std::string summary;
    bool ok = true;  // false when a verifier check failed
};

inline ExperimentOutcome run_experiment(const ExperimentSpec& spec) {
    std::ostringstream sum;
    sum.precision(6);
    ExperimentOutcome out;
    switch (spec.kind) {
        case ExperimentKind::chain: {
            auto r = run_chain_experiment(spec);
            sum << "chain: " << r.lemmas.layers << " layers simulated, lemma violations "
                << (r.lemmas.gap_lyapunov_violations + r.lemmas.coupling_violations);
            out.records = std::move(r.records);
            break;
        }
        case ExperimentKind::width_sweep: {
            auto r = run_width_sweep(spec);
            sum << "width_sweep: slope=" << r.fit.slope << " intercept=" << r.fit.intercept << " r2=" << r.fit.r2
                << " ci95=[" << r.slope_ci_low << ", " << r.slope_ci_high << "]";
            out.records = std::move(r.records);
            break;
        }
        case ExperimentKind::depth_sweep: {
            auto r = run_depth_sweep(spec);
            sum << "depth_sweep:";
            for (const auto& c : r.curves)
                sum << " d=" << c.width << " plateau=" << c.decay.plateau << " decay_rate=" << c.decay.rate
                    << " alpha_hat=" << c.alpha_hat << " ratio_30_to_1=" << c.ratio_30_to_1
                    << " depth_bound_dominates=" << (c.bound_dominates ? "yes" : "no") << ";";
            out.records = std::move(r.records);
            break;
        }
        case ExperimentKind::cosine_contrast: {
            auto r = run_cosine_contrast(spec);
            sum << "cosine_contrast: final median |cos| bn=" << r.bn.median.back()
                << " vanilla=" << r.vanilla.median.back();
            out.records = std::move(r.records);
            break;
        }
        case ExperimentKind::conjecture_sweep: {
            auto r = run_conjecture_sweep(spec);
            sum << "conjecture_sweep:";
            for (const auto& c : r.series) sum << " " << to_string(c.activation) << ".slope=" << c.fit.slope;
            sum << " spread=" << r.slope_spread;
            out.records = std::move(r.records);
            break;
        }
        case ExperimentKind::theory_battery: {
            auto r = run_theory_battery(spec);
            sum << "theory_battery: " << r.checks.size() << " checks, " << r.failures() << " failures";
            for (const auto& c : r.checks)
                if (!c.passed) sum << "; FAILED " << c.name << " (n=" << c.n << ", d=" << c.d << ")";
            out.ok = r.failures() == 0;
            out.records = std::move(r.records);
            break;
        }
        case ExperimentKind::init_demo: {
            auto r = run_init_demo(spec);
            sum << "init_demo:";
            for (const auto& sr : r.series) sum << " " << to_string(sr.init) << ".final_v=" << sr.mean_v.back();
            sum << " gap_failures=" << r.gap_failures << "/" << r.gap_checks;
            out.ok = r.gap_failures == 0;
            out.records = std::move(r.records);
            break;
        }
    }
    out.summary = sum.str();
    return out;
}

}  // namespace orthochain
