#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "orthochain/chain.hpp"
#include "orthochain/metrics.hpp"
#include "orthochain/numerics.hpp"

namespace orthochain {

// ---------------------------------------------------------------------------
// Expected Gram diagonal p_i(sigma)
// ---------------------------------------------------------------------------

enum class PMethod { quadrature, montecarlo };

/// Expected diagonal of the next Gram matrix (in the right-singular basis of
/// the current state), p_i = E[ s_i w_i^2 / sum_k s_k w_k^2 ], s = sigma^2.
struct PVector {
    Vector values;
    PMethod method = PMethod::quadrature;
    Vector std_errors;  // zero for quadrature

    double sum() const { return values.sum(); }
};

inline constexpr double kSpectrumNormTolerance = 1e-8;

inline void require_unit_spectrum(const SingularSpectrum& s, const char* who) {
    if (s.size() < 1) throw DomainError(std::string(who) + ": empty spectrum");
    if (std::abs(s.sum_squares() - 1.0) > kSpectrumNormTolerance)
        throw DomainError(std::string(who) + ": squared singular values must sum to one");
}

namespace detail {

// Integrand of p_i after u = -theta and u = e^x:
//   e^x s_i / (1 + 2 u s_i) * prod_j (1 + 2 u s_j)^{-1/2},
// analytic in x, evaluated in log space.
inline double p_integrand(const Vector& s, Index i, double x) {
    const double u = std::exp(x);
    double log_f = x + std::log(s[i]) - std::log1p(2.0 * u * s[i]);
    for (Index j = 0; j < s.size(); ++j) log_f -= 0.5 * std::log1p(2.0 * u * s[j]);
    return std::exp(log_f);
}

// Integration grid in x. Each factor switches regime at x = -log(2 s_j); the
// integrand is below s_i e^x to the left of the grid and decays at least like
// e^{-x} to the right, so the truncated tails are below 1e-17.
inline std::vector<double> p_breakpoints(const Vector& s) {
    std::vector<double> knees;
    for (Index j = 0; j < s.size(); ++j) knees.push_back(-std::log(2.0 * s[j]));
    std::sort(knees.begin(), knees.end());
    const double lo = knees.front() - 40.0, hi = knees.back() + 45.0;
    std::vector<double> pts{lo};
    for (double k : knees)
        if (k - pts.back() > 1e-9) pts.push_back(k);
    pts.push_back(hi);
    std::vector<double> grid{pts.front()};
    for (std::size_t k = 1; k < pts.size(); ++k) {
        const double a = grid.back(), b = pts[k];
        const auto pieces = static_cast<int>(std::ceil((b - a) / 8.0));
        for (int m = 1; m <= pieces; ++m) grid.push_back(a + (b - a) * m / pieces);
    }
    return grid;
}

}  // namespace detail

/// p_i(sigma) by adaptive Gauss-Kronrod, in x = log(-theta), on
///   p_i = int_{-inf}^0 s_i / (1 - 2 theta s_i) prod_j (1 - 2 theta s_j)^{-1/2} d theta.
/// Requires sum sigma^2 = 1 and every sigma_i > 0.
inline PVector p_vector_quadrature(const SingularSpectrum& sigma, double tol = 1e-8) {
    require_unit_spectrum(sigma, "p_vector_quadrature");
    if (!(tol > 0.0)) throw DomainError("p_vector_quadrature: tolerance must be positive");
    const Index n = sigma.size();
    const Vector s = sigma.squared();
    for (Index i = 0; i < n; ++i)
        if (!(s[i] > 0.0))
            throw DomainError("p_vector_quadrature: sigma_" + std::to_string(i + 1) + " is zero");

    PVector p{Vector::Zero(n), PMethod::quadrature, Vector::Zero(n)};
    if (n == 1) {
        p.values[0] = 1.0;
        return p;
    }
    const auto pts = detail::p_breakpoints(s);
    for (Index i = 0; i < n; ++i) {
        double total = 0.0;
        double err_total = 0.0;
        for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
            double err = 0.0;
            total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                [&](double t) { return detail::p_integrand(s, i, t); }, pts[k], pts[k + 1], 15, 1e-10, &err);
            err_total += err;
        }
        if (!(err_total <= tol))
            throw ConvergenceError("p_vector_quadrature: error estimate " + std::to_string(err_total) +
                                   " exceeds tolerance");
        p.values[i] = total;
    }
    return p;
}

/// Quadrature p-vector that tolerates zero singular values: p_i = 0 exactly for
/// sigma_i = 0 and the remaining components use the renormalized spectrum.
inline PVector p_vector_with_zeros(const SingularSpectrum& sigma, double tol = 1e-8) {
    require_unit_spectrum(sigma, "p_vector_with_zeros");
    const Index n = sigma.size();
    Index positive = 0;
    while (positive < n && sigma[positive] > 0.0) ++positive;
    if (positive == n) return p_vector_quadrature(sigma, tol);
    Vector head = sigma.values().head(positive);
    head /= head.norm();
    PVector sub = p_vector_quadrature(SingularSpectrum(head), tol);
    PVector p{Vector::Zero(n), PMethod::quadrature, Vector::Zero(n)};
    p.values.head(positive) = sub.values;
    return p;
}

inline PVector p_vector_montecarlo(const SingularSpectrum& sigma, std::size_t samples, SeededRng& rng) {
    if (samples < 10000) throw DomainError("p_vector_montecarlo: need at least 1e4 samples");
    const Index n = sigma.size();
    if (n < 1) throw DomainError("p_vector_montecarlo: empty spectrum");
    const Vector s = sigma.squared();
    Vector sum = Vector::Zero(n), sum_sq = Vector::Zero(n), a(n);
    for (std::size_t k = 0; k < samples; ++k) {
        double total = 0.0;
        for (Index i = 0; i < n; ++i) {
            const double w = rng.normal();
            a[i] = s[i] * w * w;
            total += a[i];
        }
        for (Index i = 0; i < n; ++i) {
            const double r = a[i] / total;
            sum[i] += r;
            sum_sq[i] += r * r;
        }
    }
    const double m = static_cast<double>(samples);
    PVector p{sum / m, PMethod::montecarlo, Vector::Zero(n)};
    for (Index i = 0; i < n; ++i) {
        const double var = std::max(0.0, (sum_sq[i] - m * p.values[i] * p.values[i]) / (m - 1.0));
        p.std_errors[i] = std::sqrt(var / m);
    }
    return p;
}

/// Largest |p_quad - p_mc| / stderr over components.
inline double max_p_zscore(const PVector& quad, const PVector& mc) {
    double worst = 0.0;
    for (Index i = 0; i < quad.values.size(); ++i) {
        const double diff = std::abs(quad.values[i] - mc.values[i]);
        const double se = mc.std_errors[i];
        worst = std::max(worst, se > 0.0 ? diff / se : (diff > 1e-12 ? std::numeric_limits<double>::infinity() : 0.0));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Bound reports
// ---------------------------------------------------------------------------

/// Empirical value against an upper bound, with a 3-standard-error Monte Carlo slack.
struct BoundReport {
    double empirical = 0.0;
    double bound = 0.0;
    bool satisfied = false;
    double margin = 0.0;  // bound - empirical
    double mc_std_error = 0.0;
};

inline constexpr double kBoundSlackSigmas = 3.0;

inline BoundReport make_bound_report(double empirical, double bound, double std_error = 0.0, double abs_tol = 0.0) {
    return {empirical, bound, empirical <= bound + kBoundSlackSigmas * std_error + abs_tol, bound - empirical,
            std_error};
}

struct MeanAndError {
    double mean = 0.0;
    double std_error = 0.0;
};

inline MeanAndError mean_and_error(const std::vector<double>& xs) {
    MeanAndError r;
    if (xs.empty()) return r;
    double s = 0.0;
    for (double x : xs) s += x;
    r.mean = s / static_cast<double>(xs.size());
    if (xs.size() < 2) return r;
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.std_error = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
    return r;
}

// ---------------------------------------------------------------------------
// Closed-form bounds
// ---------------------------------------------------------------------------

/// Right side of the single-step contraction:
///   (1 - (2/3)(1/n - lyap)) lyap + 1/sqrt(d).
inline double single_step_bound(double lyap, std::size_t n, std::size_t d) {
    const double inv_n = 1.0 / static_cast<double>(n);
    if (lyap < inv_n - 1.0 - 1e-12 || lyap > inv_n + 1e-12)
        throw DomainError("single_step_bound: lyapunov gap outside [1/n - 1, 1/n]");
    return (1.0 - (2.0 / 3.0) * (inv_n - lyap)) * lyap + 1.0 / std::sqrt(static_cast<double>(d));
}

inline void require_alpha(double alpha, std::size_t n) {
    if (!(alpha > 0.0) || alpha > 1.0 / static_cast<double>(n) + 1e-12)
        throw DomainError("alpha must lie in (0, 1/n]");
}

/// Depth bound on E[V(H_{l+1})]: 2 (1 - 2 alpha / 3)^depth + 3 n / (alpha sqrt(d)).
/// alpha floors sigma_n^2 over the chain.
inline double depth_bound(double alpha, std::size_t depth, std::size_t n, std::size_t d) {
    require_alpha(alpha, n);
    return 2.0 * std::pow(1.0 - 2.0 * alpha / 3.0, static_cast<double>(depth)) +
           3.0 * static_cast<double>(n) / (alpha * std::sqrt(static_cast<double>(d)));
}

/// Same bound with the halved additive constant 3 n / (2 alpha sqrt(d)) that
/// appears in the induction write-up. Reported alongside, never used as a gate.
inline double depth_bound_halved(double alpha, std::size_t depth, std::size_t n, std::size_t d) {
    require_alpha(alpha, n);
    return 2.0 * std::pow(1.0 - 2.0 * alpha / 3.0, static_cast<double>(depth)) +
           1.5 * static_cast<double>(n) / (alpha * std::sqrt(static_cast<double>(d)));
}

/// Squared W2 distance bound between law(W H) and law(G / sqrt(n)):
///   4 n (1 - 2 alpha / 3)^depth + 6 n^2 / (alpha sqrt(d)).
inline double w2_distance_bound(double alpha, std::size_t depth, std::size_t n, std::size_t d) {
    require_alpha(alpha, n);
    const double nn = static_cast<double>(n);
    return 4.0 * nn * std::pow(1.0 - 2.0 * alpha / 3.0, static_cast<double>(depth)) +
           6.0 * nn * nn / (alpha * std::sqrt(static_cast<double>(d)));
}

struct CouplingQuantities {
    double coupling_cost = 0.0;    // sum_i (sigma_i - 1/sqrt(n))^2
    double v_gap = 0.0;            // V from the spectrum
    double v_squared_bound = 0.0;  // n V^2
    double v_bound = 0.0;          // 2 n V
};

/// Terms of the coupling argument for a unit-norm spectrum; components past
/// the spectrum length count as zero singular values.
inline CouplingQuantities coupling_w2_quantities(const SingularSpectrum& sigma, std::size_t n) {
    require_unit_spectrum(sigma, "coupling_w2_quantities");
    const double nn = static_cast<double>(n);
    const double root = 1.0 / std::sqrt(nn);
    CouplingQuantities q;
    double v2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = static_cast<Index>(i) < sigma.size() ? sigma[static_cast<Index>(i)] : 0.0;
        q.coupling_cost += (s - root) * (s - root);
        v2 += (s * s - 1.0 / nn) * (s * s - 1.0 / nn);
    }
    q.v_gap = std::sqrt(v2);
    q.v_squared_bound = nn * v2;
    q.v_bound = 2.0 * nn * q.v_gap;
    return q;
}

// ---------------------------------------------------------------------------
// Random states
// ---------------------------------------------------------------------------

/// Squared singular values uniform on the simplex, sorted descending.
inline SingularSpectrum random_unit_spectrum(std::size_t n, SeededRng& rng) {
    std::vector<double> e(n);
    double total = 0.0;
    for (auto& x : e) {
        x = -std::log1p(-rng.uniform());
        total += x;
    }
    for (auto& x : e) x /= total;
    SingularSpectrum s = SingularSpectrum::from_squared(std::move(e));
    // Renormalize after the square roots so sum sigma^2 = 1 to rounding.
    return SingularSpectrum(s.values() / s.values().norm());
}

/// U diag(sigma) V^T with Haar U (d x n) and V (n x n).
inline Repr random_unit_state(Index d, const SingularSpectrum& sigma, SeededRng& rng) {
    const Index n = sigma.size();
    Matrix u = haar_orthonormal(d, n, rng);
    Matrix v = haar_orthonormal(n, n, rng);
    return Repr(u * sigma.values().asDiagonal() * v.transpose());
}

// ---------------------------------------------------------------------------
// Monte Carlo verifiers
// ---------------------------------------------------------------------------

inline double lyapunov_gap_from_gram(const Matrix& c) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(c, Eigen::EigenvaluesOnly);
    const double smallest = std::max(0.0, eig.eigenvalues()[0]);
    return 1.0 / static_cast<double>(c.rows()) - smallest;
}

/// Estimates E[lyap(H_{l+1}) | H_l] over fresh weight draws and compares it to
/// single_step_bound. Replicate r draws from rng.fork(r).
inline BoundReport verify_single_step(const Repr& h, std::size_t replicates, const SeededRng& rng,
                                      WeightSampling sampling = WeightSampling::gram_factor) {
    if (replicates < 100) throw DomainError("verify_single_step: need at least 100 replicates");
    const double lyap = lyapunov_gap(h.matrix());
    const auto n = static_cast<std::size_t>(h.batch());
    const auto d = static_cast<std::size_t>(h.width());
    std::vector<double> next(replicates);
    for (std::size_t r = 0; r < replicates; ++r) {
        SeededRng rr = rng.fork(r);
        const Transition t = bn_step(h, rr, Activation::linear, sampling);
        next[r] = lyapunov_gap_from_gram(gram(t.next.matrix()));
    }
    const auto est = mean_and_error(next);
    return make_bound_report(est.mean, single_step_bound(lyap, n, d), est.std_error);
}

struct GramConcentrationReport {
    BoundReport concentration;  // E||C - E C||_F^2 against 1/d
    PVector p;                  // quadrature p-vector of the input spectrum
    Matrix mean_gram;           // replicate mean, in the right-singular basis of H
    double max_diag_z = 0.0;
    double max_offdiag_z = 0.0;
    bool diag_ok = false;
    bool offdiag_ok = false;

    bool all_ok() const { return concentration.satisfied && diag_ok && offdiag_ok; }
};

inline constexpr double kGramZThreshold = 4.0;

/// Monte Carlo check of the Gram concentration: E||C - E C||_F^2 <= 1/d and,
/// in the right-singular basis of H, E C = diag(p(sigma)).
inline GramConcentrationReport verify_gram_concentration(const Repr& h, std::size_t replicates, const SeededRng& rng,
                                                         WeightSampling sampling = WeightSampling::gram_factor) {
    if (replicates < 200) throw DomainError("verify_gram_concentration: need at least 200 replicates");
    const Index n = h.batch();
    const auto d = static_cast<std::size_t>(h.width());
    if (std::abs(h.matrix().norm() - 1.0) > kUnitNormTolerance)
        throw DomainError("verify_gram_concentration: state must have unit Frobenius norm");
    const SvdFactors f = thin_svd(h.matrix());
    if (f.right.cols() != n) throw DomainError("verify_gram_concentration: need d >= n");
    const Matrix& basis = f.right;

    std::vector<Matrix> samples;
    samples.reserve(replicates);
    Matrix mean = Matrix::Zero(n, n);
    for (std::size_t r = 0; r < replicates; ++r) {
        SeededRng rr = rng.fork(r);
        const Transition t = bn_step(h, rr, Activation::linear, sampling);
        samples.push_back(basis.transpose() * gram(t.next.matrix()) * basis);
        mean += samples.back();
    }
    const double reps = static_cast<double>(replicates);
    mean /= reps;

    std::vector<double> dev(replicates);
    Matrix var = Matrix::Zero(n, n);
    for (std::size_t r = 0; r < replicates; ++r) {
        const Matrix diff = samples[r] - mean;
        dev[r] = diff.squaredNorm();
        var.array() += diff.array().square();
    }
    var /= (reps - 1.0);
    auto est = mean_and_error(dev);
    est.mean *= reps / (reps - 1.0);  // unbiased around the replicate mean

    GramConcentrationReport rep;
    rep.concentration = make_bound_report(est.mean, 1.0 / static_cast<double>(d), est.std_error);
    SingularSpectrum sigma(f.singulars.values() / f.singulars.values().norm());
    rep.p = p_vector_with_zeros(sigma);
    rep.mean_gram = mean;
    auto zscore = [&](double diff, double v) {
        const double se = std::sqrt(v / reps);
        if (se > 0.0) return std::abs(diff) / se;
        return std::abs(diff) <= 1e-12 ? 0.0 : std::numeric_limits<double>::infinity();
    };
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
            if (i == j)
                rep.max_diag_z = std::max(rep.max_diag_z, zscore(mean(i, i) - rep.p.values[i], var(i, i)));
            else
                rep.max_offdiag_z = std::max(rep.max_offdiag_z, zscore(mean(i, j), var(i, j)));
        }
    rep.diag_ok = rep.max_diag_z <= kGramZThreshold;
    rep.offdiag_ok = rep.max_offdiag_z <= kGramZThreshold;
    return rep;
}

struct ContractionCenterReport {
    double lhs = 0.0;            // 1/n - p_n(sigma)
    double stated_bound = 0.0;   // (1 - (2/3) sigma_n^2)(1/n - sigma_n^2)
    double proof_bound = 0.0;    // (1 - 2n/(n+2) sigma_n^2)(1/n - sigma_n^2)
    bool stated_ok = false;
    bool proof_ok = false;

    BoundReport as_bound() const { return make_bound_report(lhs, stated_bound); }
};

/// Compares 1/n - p_n against both forms of the contraction-center bound;
/// `tol` absorbs quadrature error.
inline ContractionCenterReport verify_contraction_center(const SingularSpectrum& sigma, double tol = 1e-8) {
    require_unit_spectrum(sigma, "verify_contraction_center");
    const Index n = sigma.size();
    const double nn = static_cast<double>(n);
    const PVector p = p_vector_with_zeros(sigma, tol);
    const double sn2 = sigma.min() * sigma.min();
    ContractionCenterReport r;
    r.lhs = 1.0 / nn - p.values[n - 1];
    r.stated_bound = (1.0 - (2.0 / 3.0) * sn2) * (1.0 / nn - sn2);
    r.proof_bound = (1.0 - 2.0 * nn / (nn + 2.0) * sn2) * (1.0 / nn - sn2);
    r.stated_ok = r.lhs <= r.stated_bound + tol;
    r.proof_ok = r.lhs <= r.proof_bound + tol;
    return r;
}

/// g(delta) = (1 + 2 theta (1/n - delta))^{-3/2} (1 + 2 theta (1/n + delta/(n-1)))^{-(n-1)/2}
inline double g_function(double delta, double theta, std::size_t n) {
    if (n < 2) throw DomainError("g_function: n must be >= 2");
    const double nn = static_cast<double>(n);
    return std::pow(1.0 + 2.0 * theta * (1.0 / nn - delta), -1.5) *
           std::pow(1.0 + 2.0 * theta * (1.0 / nn + delta / (nn - 1.0)), -(nn - 1.0) / 2.0);
}

struct ConvexityScan {
    double min_second_difference = std::numeric_limits<double>::infinity();
    double theta_at_min = 0.0;
    double delta_at_min = 0.0;
    bool convex = false;
};

inline constexpr double kConvexitySlack = -1e-6;

/// Central second differences of g over `delta_points` evenly spaced points of
/// [0, 1/n] for each theta, with step rel_step / n.
inline ConvexityScan g_convexity_scan(std::size_t n, const std::vector<double>& thetas, std::size_t delta_points = 200,
                                      double rel_step = 1e-4) {
    if (n < 2) throw DomainError("g_convexity_scan: n must be >= 2");
    if (delta_points < 2) throw DomainError("g_convexity_scan: need at least two delta points");
    const double range = 1.0 / static_cast<double>(n);
    const double h = rel_step * range;
    ConvexityScan scan;
    for (double theta : thetas) {
        if (theta < 0.0) throw DomainError("g_convexity_scan: theta must be nonnegative");
        for (std::size_t k = 0; k < delta_points; ++k) {
            const double delta = range * static_cast<double>(k) / static_cast<double>(delta_points - 1);
            const double second =
                (g_function(delta + h, theta, n) - 2.0 * g_function(delta, theta, n) + g_function(delta - h, theta, n)) /
                (h * h);
            if (second < scan.min_second_difference) {
                scan.min_second_difference = second;
                scan.theta_at_min = theta;
                scan.delta_at_min = delta;
            }
        }
    }
    scan.convex = scan.min_second_difference >= kConvexitySlack;
    return scan;
}

/// Seed-averaged (1/l) sum_k lyap_k (1/n - lyap_k) against
///   3 E[lyap_0] / (2 l) + 3 / (2 sqrt(d)).
inline BoundReport no_assumption_stability(const std::vector<double>& initial_lyap,
                                           const std::vector<std::vector<LayerTrace>>& runs, std::size_t d) {
    if (runs.empty() || runs.size() != initial_lyap.size())
        throw DomainError("no_assumption_stability: need one initial gap per run");
    const std::size_t depth = runs.front().size();
    if (depth < 10) throw DomainError("no_assumption_stability: need at least 10 layers");
    std::vector<double> averages;
    for (const auto& run : runs) {
        if (run.size() != depth) throw DomainError("no_assumption_stability: runs differ in depth");
        const double inv_n = 1.0 / static_cast<double>(run.front().gram.rows());
        double acc = 0.0;
        for (const auto& t : run) acc += t.lyap_gap * (inv_n - t.lyap_gap);
        averages.push_back(acc / static_cast<double>(depth));
    }
    double lyap0 = 0.0;
    for (double v : initial_lyap) lyap0 += v;
    lyap0 /= static_cast<double>(initial_lyap.size());
    const auto est = mean_and_error(averages);
    const double bound = 3.0 * lyap0 / (2.0 * static_cast<double>(depth)) + 1.5 / std::sqrt(static_cast<double>(d));
    return make_bound_report(est.mean, bound, est.std_error);
}

/// Empirical floor of sigma_n^2 over the given layers.
inline double estimate_alpha(const std::vector<LayerTrace>& traces) {
    if (traces.empty()) throw DomainError("estimate_alpha: no traces");
    double alpha = std::numeric_limits<double>::infinity();
    for (const auto& t : traces) alpha = std::min(alpha, t.sigma_min * t.sigma_min);
    return alpha;
}

inline double estimate_alpha(const std::vector<std::vector<LayerTrace>>& runs) {
    double alpha = std::numeric_limits<double>::infinity();
    for (const auto& r : runs) alpha = std::min(alpha, estimate_alpha(r));
    return alpha;
}

}  // namespace orthochain
