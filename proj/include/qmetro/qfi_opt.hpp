#pragma once

// Iterative maximization of the QFI over symmetric input states.

#include "qmetro/qfi.hpp"

#include <cstdint>
#include <random>

namespace qmetro {

struct IterationConfig {
    int max_iters = 2000;
    double rel_tol = 1e-10;
    int restarts = 1;                 // independent runs; best one is kept
    double perturbation_scale = 1e-3; // amplitude noise added to the sine start
    std::uint64_t seed = 20140101;

    void validate() const {
        if (max_iters < 1) throw std::domain_error("IterationConfig: max_iters must be >= 1");
        if (!(rel_tol > 0.0)) throw std::domain_error("IterationConfig: rel_tol must be > 0");
        if (restarts < 1) throw std::domain_error("IterationConfig: restarts must be >= 1");
        if (!(perturbation_scale >= 0.0)) throw std::domain_error("IterationConfig: perturbation_scale < 0");
    }
};

struct OptimizationTrace {
    std::vector<double> qfi_values; // per iteration, best restart
    bool converged = false;
    SymmetricPureState final_state;
    double qfi = 0.0;
    int iterations = 0;
    std::vector<double> restart_qfi; // final QFI of each restart
    bool multimodal = false;         // restarts disagree beyond 1e-6 relative
};

/// QFI of the channel output and the Heisenberg-picture matrix
/// A = Lambda*(L^2 + 2i[H, L]) built from its SLD. The QFI equals -<psi|A|psi>.
struct QfiGradient {
    double qfi = 0.0;
    Eigen::MatrixXcd a;
};

namespace detail {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Works with K = -iL so that a real input state stays in real arithmetic:
/// then K is real antisymmetric and A = -K^2 - 2[H, K] is real symmetric.
template <typename Scalar>
std::pair<double, Mat<Scalar>> gradient_impl(const PhaseCovariantChannel& ch, const Vec<Scalar>& psi) {
    using Eigen::numext::conj;
    const int N = ch.n_particles();
    struct Work {
        double p = 0.0;
        Vec<Scalar> phi;
        Eigen::VectorXd values;
        Mat<Scalar> vectors;
    };
    const auto& blocks = ch.blocks();
    std::vector<Work> work(blocks.size());
    double top = 0.0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& cb = blocks[i];
        const auto s = psi.segment(cb.offset, cb.dim());
        if (cb.rank_one() && cb.undamped()) {
            work[i].phi = cb.factor.template cast<Scalar>().cwiseProduct(s);
            work[i].p = work[i].phi.squaredNorm();
            if (work[i].p > 0.0) work[i].phi /= std::sqrt(work[i].p);
            top = std::max(top, work[i].p);
        } else {
            Mat<Scalar> rho = s * s.adjoint();
            for (int b = 0; b < cb.dim(); ++b)
                for (int a = 0; a < cb.dim(); ++a) rho(a, b) *= cb.weight(a, b);
            Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(rho);
            if (es.info() != Eigen::Success) throw numerical_error("qfi_and_gradient: eigensolver did not converge");
            work[i].values = es.eigenvalues();
            work[i].vectors = es.eigenvectors();
            top = std::max(top, work[i].values(cb.dim() - 1));
        }
    }
    if (top <= 0.0) throw numerical_error("qfi_and_gradient: channel output vanishes");
    const double cutoff = support_cutoff * top;

    double f = 0.0;
    Mat<Scalar> out = Mat<Scalar>::Zero(N + 1, N + 1);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& cb = blocks[i];
        const int d = cb.dim();
        auto& w = work[i];
        Mat<Scalar> g(d, d);
        if (cb.rank_one() && cb.undamped()) {
            if (w.p <= cutoff) continue;
            // Pure block: L = 2i(|chi><phi| - |phi><chi|), chi = (h - mu) phi.
            double mu = 0.0, nu = 0.0;
            for (int a = 0; a < d; ++a) {
                const double q = Eigen::numext::abs2(w.phi(a));
                mu += q * a;
                nu += q * a * a;
            }
            f += w.p * std::max(0.0, 4.0 * (nu - mu * mu));
            for (int b = 0; b < d; ++b)
                for (int a = 0; a < d; ++a) {
                    const double dm = a - b;
                    g(a, b) = w.phi(a) * conj(w.phi(b)) *
                              (4.0 * (static_cast<double>(a) * b - mu * (a + b) + nu - dm * dm));
                }
        } else {
            const auto s = psi.segment(cb.offset, d);
            Mat<Scalar> r = s * s.adjoint(); // drho / i
            for (int b = 0; b < d; ++b)
                for (int a = 0; a < d; ++a) r(a, b) *= cb.weight(a, b) * (a - b);
            Mat<Scalar> kt = w.vectors.adjoint() * r * w.vectors;
            for (int c = 0; c < d; ++c)
                for (int a = 0; a < d; ++a) {
                    const double sum = std::max(w.values(a), 0.0) + std::max(w.values(c), 0.0);
                    kt(a, c) = sum > cutoff ? kt(a, c) * (2.0 / sum) : Scalar(0);
                }
            for (int a = 0; a < d; ++a) f += std::max(w.values(a), 0.0) * kt.row(a).squaredNorm();
            const Mat<Scalar> k = w.vectors * kt * w.vectors.adjoint();
            g.noalias() = -k * k;
            for (int b = 0; b < d; ++b)
                for (int a = 0; a < d; ++a) g(a, b) -= (2.0 * (a - b)) * k(a, b);
        }
        for (int b = 0; b < d; ++b)
            for (int a = 0; a < d; ++a) out(cb.offset + a, cb.offset + b) += cb.weight(a, b) * g(a, b);
    }
    out = (0.5 * (out + out.adjoint())).eval();
    return {f, std::move(out)};
}

inline bool is_real(const Eigen::VectorXcd& v) { return v.imag().cwiseAbs().maxCoeff() == 0.0; }

} // namespace detail

inline QfiGradient qfi_and_gradient(const PhaseCovariantChannel& ch, const Eigen::VectorXcd& psi) {
    if (psi.size() != ch.n_particles() + 1) throw std::domain_error("qfi_and_gradient: state dimension mismatch");
    if (detail::is_real(psi)) {
        auto [f, a] = detail::gradient_impl<double>(ch, psi.real());
        return {f, a.cast<cplx>()};
    }
    auto [f, a] = detail::gradient_impl<cplx>(ch, psi);
    return {f, std::move(a)};
}

/// Heisenberg-picture channel map on an operand shaped like the channel output.
inline Eigen::MatrixXcd channel_adjoint_apply(const NoiseModel& noise, int n_particles, const AngularBlockMatrix& operand) {
    return PhaseCovariantChannel(n_particles, noise).adjoint(operand);
}

namespace detail {

inline void fix_global_phase(Eigen::VectorXcd& v) {
    const double big = v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v(i)) > 1e-8 * big) {
            v *= std::conj(v(i)) / std::abs(v(i));
            break;
        }
    }
    v.normalize();
}

/// Phase-fixed eigenvector of the smallest eigenvalue; real input stays real.
inline Eigen::VectorXcd minimal_eigenvector(const Eigen::MatrixXcd& a) {
    Eigen::VectorXcd v;
    if (a.imag().cwiseAbs().maxCoeff() == 0.0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.real());
        if (es.info() != Eigen::Success) throw numerical_error("minimal_eigenvector: eigensolver did not converge");
        v = es.eigenvectors().col(0).cast<cplx>();
    } else {
        v = hermitian_eigen(a).vectors.col(0);
    }
    fix_global_phase(v);
    return v;
}

inline Eigen::VectorXcd perturbed_sine(int n, double scale, std::uint64_t seed) {
    Eigen::VectorXcd v = SymmetricPureState::sine_profile(n).amplitudes;
    if (scale > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(0.0, scale);
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += g(rng);
    }
    v.normalize();
    return v;
}

} // namespace detail

/// Carries an amplitude profile to a different N by linear interpolation on
/// x = (n+1)/(N+2), with zeros at both ends of the unit interval.
inline SymmetricPureState interpolate_state(const SymmetricPureState& s, int n_particles) {
    if (n_particles < 1) throw std::domain_error("interpolate_state: N must be >= 1");
    const int m = s.n_particles;
    const auto at = [&](int k) { return (k < 0 || k > m) ? cplx(0.0) : s.amplitudes(k); };
    Eigen::VectorXcd v(n_particles + 1);
    for (int i = 0; i <= n_particles; ++i) {
        const double u = static_cast<double>(i + 1) / (n_particles + 2) * (m + 2) - 1.0;
        const int k = static_cast<int>(std::floor(u));
        const double t = u - k;
        v(i) = (1.0 - t) * at(k) + t * at(k + 1);
    }
    return SymmetricPureState::from_amplitudes(std::move(v), true);
}

/// Alternates the SLD step and the minimal-eigenvector state update until
/// the relative QFI change drops below rel_tol. Keeps the best iterate.
inline OptimizationTrace optimize_qfi(const PhaseCovariantChannel& ch, const IterationConfig& cfg,
                                      const std::optional<SymmetricPureState>& initial = std::nullopt) {
    cfg.validate();
    const int N = ch.n_particles();
    if (initial && initial->n_particles != N) throw std::domain_error("optimize_qfi: initial state N mismatch");

    OptimizationTrace best;
    best.qfi = -1.0;
    std::vector<double> finals;
    for (int r = 0; r < cfg.restarts; ++r) {
        Eigen::VectorXcd psi = (initial && r == 0)
                                   ? initial->amplitudes
                                   : detail::perturbed_sine(N, cfg.perturbation_scale, cfg.seed + static_cast<std::uint64_t>(r));
        std::vector<double> values;
        Eigen::VectorXcd run_best = psi;
        double run_best_f = -1.0, prev = 0.0;
        bool converged = false;
        for (int it = 0; it < cfg.max_iters; ++it) {
            const auto step = qfi_and_gradient(ch, psi);
            values.push_back(step.qfi);
            if (step.qfi > run_best_f) {
                run_best_f = step.qfi;
                run_best = psi;
            }
            if (it > 0 && std::abs(step.qfi - prev) <= cfg.rel_tol * std::max(std::abs(step.qfi), 1e-300)) {
                converged = true;
                break;
            }
            prev = step.qfi;
            if (it + 1 == cfg.max_iters) break;
            psi = detail::minimal_eigenvector(step.a);
        }
        finals.push_back(run_best_f);
        if (run_best_f > best.qfi) {
            detail::fix_global_phase(run_best);
            best.qfi = run_best_f;
            best.final_state = SymmetricPureState::from_amplitudes(run_best, true);
            best.iterations = static_cast<int>(values.size());
            best.qfi_values = std::move(values);
            best.converged = converged;
        }
    }
    best.restart_qfi = finals;
    for (double f : finals)
        if (std::abs(f - best.qfi) > 1e-6 * std::max(best.qfi, 1e-300)) best.multimodal = true;
    return best;
}

inline OptimizationTrace qfi_iterate(int n_particles, const NoiseModel& noise, const IterationConfig& cfg = {},
                                     const std::optional<SymmetricPureState>& initial = std::nullopt) {
    if (n_particles < 1) throw std::domain_error("qfi_iterate: N must be >= 1");
    return optimize_qfi(PhaseCovariantChannel(n_particles, noise), cfg, initial);
}

/// Cramer-Rao bound 1 / sqrt(k F).
inline double cr_bound(double qfi_value, int repetitions = 1) {
    if (!(qfi_value > 0.0)) throw std::domain_error("cr_bound: QFI must be positive");
    if (repetitions < 1) throw std::domain_error("cr_bound: repetitions must be >= 1");
    return 1.0 / std::sqrt(repetitions * qfi_value);
}

} // namespace qmetro
