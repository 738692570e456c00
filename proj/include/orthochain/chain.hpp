#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "orthochain/metrics.hpp"
#include "orthochain/numerics.hpp"

namespace orthochain {

enum class Activation { linear, relu, tanh, sin, sigmoid };
enum class ChainKind { bn, vanilla };

/// How the layer-0 representation is generated when none is supplied.
enum class InputKind {
    gaussian,    // Gaussian matrix, one BN, 1/sqrt(d) scaling
    correlated,  // columns u + eps * g_i, normalized: nearly rank one
    orthogonal,  // Haar orthonormal columns scaled by 1/sqrt(n)
};

/// How W * X with W ~ N(0, I_d / d) is drawn.
///  - dense: W is sampled explicitly (d^2 normals). Needed to replay a weight draw.
///  - gram_factor: rows of W X are i.i.d. N(0, X^T X / d), so W X has the same law
///    as G S with G ~ N(0, 1/d)^{d x n} and S^T S = X^T X. Costs d n normals.
enum class WeightSampling { dense, gram_factor };

inline std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::linear: return "linear";
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::sin: return "sin";
        case Activation::sigmoid: return "sigmoid";
    }
    return "?";
}

inline std::string_view to_string(ChainKind k) { return k == ChainKind::bn ? "bn" : "vanilla"; }

inline std::string_view to_string(InputKind k) {
    switch (k) {
        case InputKind::gaussian: return "gaussian";
        case InputKind::correlated: return "correlated";
        case InputKind::orthogonal: return "orthogonal";
    }
    return "?";
}

inline Activation parse_activation(std::string_view s) {
    for (auto a : {Activation::linear, Activation::relu, Activation::tanh, Activation::sin, Activation::sigmoid})
        if (s == to_string(a)) return a;
    throw DomainError("unknown activation '" + std::string(s) + "'");
}

inline ChainKind parse_chain_kind(std::string_view s) {
    if (s == "bn") return ChainKind::bn;
    if (s == "vanilla") return ChainKind::vanilla;
    throw DomainError("unknown chain kind '" + std::string(s) + "'");
}

inline InputKind parse_input_kind(std::string_view s) {
    for (auto k : {InputKind::gaussian, InputKind::correlated, InputKind::orthogonal})
        if (s == to_string(k)) return k;
    throw DomainError("unknown input kind '" + std::string(s) + "'");
}

struct ChainConfig {
    std::size_t width = 32;  // d
    std::size_t batch = 4;   // n, must not exceed d
    std::size_t depth = 50;  // L
    Activation activation = Activation::linear;
    ChainKind kind = ChainKind::bn;
    std::uint64_t seed = 0;
    InputKind input = InputKind::gaussian;
    WeightSampling sampling = WeightSampling::gram_factor;
    double correlation_eps = 0.01;
    /// Apply the 1/sqrt(d) factor after BN. Only disabled as a negative control.
    bool width_scaling = true;

    void validate() const {
        if (batch < 1) throw DomainError("batch size must be >= 1");
        if (width < batch) throw DomainError("width d must be >= batch size n");
        if (depth < 1) throw DomainError("depth must be >= 1");
        if (!(correlation_eps > 0.0)) throw DomainError("correlation eps must be positive");
    }
};

/// d x n hidden representation of one batch at one layer.
class Repr {
public:
    explicit Repr(Matrix m) : m_(std::move(m)) {
        if (m_.rows() < 1 || m_.cols() < 1) throw DomainError("Repr: empty matrix");
        if (!m_.allFinite()) throw DomainError("Repr: non-finite entries");
    }

    const Matrix& matrix() const noexcept { return m_; }
    Index width() const noexcept { return m_.rows(); }
    Index batch() const noexcept { return m_.cols(); }

private:
    Matrix m_;
};

inline constexpr double kMinRowNorm = 1e-12;

/// diag(M M^T)^{-1/2} M: every row scaled to unit l2 norm, no mean subtraction.
inline Matrix batch_norm(const Matrix& m) {
    Matrix out = m;
    for (Index i = 0; i < m.rows(); ++i) {
        const double norm = m.row(i).norm();
        if (!(norm >= kMinRowNorm)) throw DegenerateRowError(static_cast<std::size_t>(i));
        out.row(i) /= norm;
    }
    return out;
}

inline double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::linear: return x;
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::tanh: return std::tanh(x);
        case Activation::sin: return std::sin(x);
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    }
    return x;
}

/// F applied to the chain state. Nonlinear F acts on sqrt(d) * H, whose rows
/// have unit norm, so the activation sees O(1) inputs at every width.
inline Matrix activate(Activation a, const Matrix& h) {
    if (a == Activation::linear) return h;
    const double scale = std::sqrt(static_cast<double>(h.rows()));
    return h.unaryExpr([a, scale](double x) { return apply_activation(a, scale * x); });
}

/// W X for W with i.i.d. N(0, 1/d) entries, d = X.rows().
inline Matrix weight_product(const Matrix& x, SeededRng& rng, WeightSampling sampling) {
    const Index d = x.rows();
    const Variance var(1.0 / static_cast<double>(d));
    if (sampling == WeightSampling::dense) return sample_gaussian_matrix(d, d, var, rng) * x;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram(x));
    if (eig.info() != Eigen::Success) throw ConvergenceError("weight_product: eigendecomposition failed");
    const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Matrix s = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
    return sample_gaussian_matrix(d, x.cols(), var, rng) * s;
}

/// One chain transition plus the pre-normalization product W F(H).
struct Transition {
    Repr next;
    Matrix product;
};

inline Repr bn_normalize(const Matrix& product, bool width_scaling = true) {
    Matrix out = batch_norm(product);
    if (width_scaling) out /= std::sqrt(static_cast<double>(product.rows()));
    return Repr(std::move(out));
}

inline Repr frobenius_normalize(const Matrix& product) {
    const double f = product.norm();
    if (!(f > 0.0) || !std::isfinite(f)) throw DomainError("vanilla step: degenerate product");
    return Repr(product / f);
}

/// H_{l+1} = (1/sqrt(d)) BN(W F(H_l)) with a fresh weight draw.
inline Transition bn_step(const Repr& h, SeededRng& rng, Activation act = Activation::linear,
                          WeightSampling sampling = WeightSampling::gram_factor, bool width_scaling = true) {
    Matrix product = weight_product(activate(act, h.matrix()), rng, sampling);
    Repr next = bn_normalize(product, width_scaling);
    return {std::move(next), std::move(product)};
}

/// Same transition with caller-supplied weights (d x d).
inline Repr bn_step_with_weights(const Repr& h, const Matrix& w, Activation act = Activation::linear) {
    if (w.rows() != h.width() || w.cols() != h.width()) throw DomainError("bn_step: weight shape mismatch");
    return bn_normalize(w * activate(act, h.matrix()));
}

/// W F(H) rescaled to unit Frobenius norm; no BN.
inline Transition vanilla_step(const Repr& h, SeededRng& rng, Activation act = Activation::linear,
                               WeightSampling sampling = WeightSampling::gram_factor) {
    Matrix product = weight_product(activate(act, h.matrix()), rng, sampling);
    Repr next = frobenius_normalize(product);
    return {std::move(next), std::move(product)};
}

inline Repr vanilla_step_with_weights(const Repr& h, const Matrix& w, Activation act = Activation::linear) {
    if (w.rows() != h.width() || w.cols() != h.width()) throw DomainError("vanilla_step: weight shape mismatch");
    return frobenius_normalize(w * activate(act, h.matrix()));
}

// ---------------------------------------------------------------------------
// Inputs
// ---------------------------------------------------------------------------

inline Repr gaussian_input(Index d, Index n, SeededRng& rng) {
    Matrix g = sample_gaussian_matrix(d, n, Variance(1.0), rng);
    return bn_normalize(g);
}

/// Columns u + eps * g_i (u, g_i standard Gaussian), each column normalized,
/// then the whole matrix scaled to unit Frobenius norm.
inline Repr correlated_input(Index d, Index n, double eps, SeededRng& rng) {
    Matrix u = sample_gaussian_matrix(d, 1, Variance(1.0), rng);
    Matrix x(d, n);
    for (Index j = 0; j < n; ++j) {
        Matrix g = sample_gaussian_matrix(d, 1, Variance(1.0), rng);
        x.col(j) = u.col(0) + eps * g.col(0);
        x.col(j).normalize();
    }
    return Repr(x / x.norm());
}

inline Repr orthogonal_input(Index d, Index n, SeededRng& rng) {
    return Repr(haar_orthonormal(d, n, rng) / std::sqrt(static_cast<double>(n)));
}

inline Repr make_input(const ChainConfig& cfg, SeededRng& rng) {
    const auto d = static_cast<Index>(cfg.width);
    const auto n = static_cast<Index>(cfg.batch);
    switch (cfg.input) {
        case InputKind::gaussian: return gaussian_input(d, n, rng);
        case InputKind::correlated: return correlated_input(d, n, cfg.correlation_eps, rng);
        case InputKind::orthogonal: return orthogonal_input(d, n, rng);
    }
    throw DomainError("unknown input kind");
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

struct ChainRun {
    LayerTrace input;                // layer 0
    std::vector<LayerTrace> layers;  // layers 1..L
};

/// Runs the chain for `cfg.depth` layers. The input, when absent, is drawn from
/// the same generator before the first weight.
inline ChainRun run_chain(const ChainConfig& cfg, std::optional<Repr> h0 = std::nullopt) {
    cfg.validate();
    SeededRng rng(cfg.seed);
    Repr h = h0 ? std::move(*h0) : make_input(cfg, rng);
    if (h.width() != static_cast<Index>(cfg.width) || h.batch() != static_cast<Index>(cfg.batch))
        throw DomainError("initial representation shape does not match the chain config");

    ChainRun run;
    run.input = make_trace(0, h.matrix());
    run.layers.reserve(cfg.depth);
    for (std::size_t l = 1; l <= cfg.depth; ++l) {
        try {
            Transition t = cfg.kind == ChainKind::bn
                               ? bn_step(h, rng, cfg.activation, cfg.sampling, cfg.width_scaling)
                               : vanilla_step(h, rng, cfg.activation, cfg.sampling);
            run.layers.push_back(make_trace(l, t.next.matrix(), &t.product));
            h = std::move(t.next);
        } catch (const ChainError&) {
            throw;
        } catch (const Error& e) {
            throw ChainError(l, e.what());
        }
    }
    return run;
}

inline std::vector<LayerTrace> simulate_chain(const ChainConfig& cfg, std::optional<Repr> h0 = std::nullopt) {
    return run_chain(cfg, std::move(h0)).layers;
}

}  // namespace orthochain
