#pragma once

// Optimal Bayesian costs: covariant flat-prior measurement, the Gaussian
// prior through the QFI of the prior-averaged state, and mixtures over the
// particle number.

#include "qmetro/qfi_opt.hpp"

#include <map>
#include <utility>

namespace qmetro {

using Diagnostics = std::vector<std::string>;

/// Uniform on (-pi, pi].
struct FlatPrior {};
/// Zero-mean Gaussian of width delta0, assumed narrow against 2 pi.
struct GaussianPrior {
    double delta0 = 0.1;
};
using Prior = std::variant<FlatPrior, GaussianPrior>;

// ---------------------------------------------------------------------------
// Flat prior, covariant measurement

struct Tridiagonal {
    Eigen::VectorXd diagonal;
    Eigen::VectorXd off_diagonal;

    [[nodiscard]] Eigen::MatrixXd dense() const {
        const auto n = diagonal.size();
        Eigen::MatrixXd m = diagonal.asDiagonal();
        for (Eigen::Index i = 0; i + 1 < n; ++i) m(i, i + 1) = m(i + 1, i) = off_diagonal(i);
        return m;
    }
};

/// Matrix whose largest eigenvalue gives the optimal covariant cost. Entry
/// (n, n+1) sums the neighbouring coherences that the seed |e_j> = sum_m |j,m>
/// can pick up from each output block.
inline Tridiagonal covariant_m_matrix(int n_particles, const NoiseModel& noise) {
    if (n_particles < 1) throw std::domain_error("covariant_m_matrix: N must be >= 1");
    validate(noise);
    const int N = n_particles;
    Tridiagonal t{Eigen::VectorXd::Zero(N + 1), Eigen::VectorXd::Zero(N)};
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, NoiseFree>) {
                t.off_diagonal.setOnes();
            } else if constexpr (std::is_same_v<T, CollectiveDephasing>) {
                t.off_diagonal.setConstant(std::exp(-0.5 * n.gamma));
            } else if constexpr (std::is_same_v<T, LocalDephasing>) {
                const auto table = CouplingTable(N, n.eta);
                for (int i = 0; i < N; ++i) {
                    const HalfInt m = half(2 * i - N);
                    const HalfInt lo = std::max(habs(m), habs(m + half(2)));
                    double s = 0.0;
                    for (HalfInt j = lo; j <= half(N); j = j + half(2)) s += table(j, m, m + half(2));
                    t.off_diagonal(i) = s;
                }
            } else {
                for (int la = 0; la <= N; ++la)
                    for (int lb = 0; la + lb <= N; ++lb)
                        for (int i = la; i < N - lb; ++i)
                            t.off_diagonal(i) += loss_amplitude(N, i, la, lb, n.eta) * loss_amplitude(N, i + 1, la, lb, n.eta);
            }
        },
        noise);
    return t;
}

struct CovariantResult {
    double cost_squared = 0.0;
    double cost = 0.0;
    double lambda_max = 0.0;
    SymmetricPureState optimal_state;
};

/// Flat-prior cost with the sine cost function: cost^2 = 2 - lambda_max(M).
/// The reported cost is the square root, so it approaches pi/N without noise.
inline CovariantResult covariant_cost(int n_particles, const NoiseModel& noise) {
    const auto t = covariant_m_matrix(n_particles, noise);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(t.diagonal, t.off_diagonal, Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw numerical_error("covariant_cost: eigensolver did not converge");
    const auto top = es.eigenvalues().size() - 1;
    Eigen::VectorXd v = es.eigenvectors().col(top);
    if (v.sum() < 0.0) v = -v;
    // Perron vector of a non-negative matrix; clear rounding-level negatives.
    v = v.cwiseMax(0.0);
    CovariantResult r;
    r.lambda_max = es.eigenvalues()(top);
    r.cost_squared = std::max(0.0, 2.0 - r.lambda_max);
    r.cost = std::sqrt(r.cost_squared);
    r.optimal_state = SymmetricPureState::from_amplitudes(v.cast<cplx>(), true);
    return r;
}

// ---------------------------------------------------------------------------
// Gaussian prior

struct GaussianPriorResult {
    double cost = 0.0;
    double fisher = 0.0; // optimized QFI of the prior-averaged state
    bool converged = false;
    bool clamped = false;
    int iterations = 0;
    SymmetricPureState optimal_state;
    Diagnostics diagnostics;
};

/// Cost Delta0 sqrt(1 - Delta0^2 F) where F is the best QFI of the state
/// averaged over the prior, i.e. with extra collective dephasing Delta0^2.
inline GaussianPriorResult gaussian_prior_cost(int n_particles, double delta0, const NoiseModel& noise,
                                               const IterationConfig& cfg = {},
                                               const std::optional<SymmetricPureState>& initial = std::nullopt) {
    if (!(delta0 > 0.0) || !std::isfinite(delta0)) throw std::domain_error("gaussian_prior_cost: delta0 must be > 0");
    GaussianPriorResult r;
    if (delta0 >= 1.0)
        r.diagnostics.push_back("prior width " + std::to_string(delta0) + " is not small against pi; tails are neglected");
    const PhaseCovariantChannel ch(n_particles, noise, delta0 * delta0);
    const auto tr = optimize_qfi(ch, cfg, initial);
    r.fisher = tr.qfi;
    r.converged = tr.converged;
    r.iterations = tr.iterations;
    r.optimal_state = tr.final_state;
    double s = 1.0 - delta0 * delta0 * tr.qfi;
    if (s < 0.0) {
        r.clamped = true;
        r.diagnostics.push_back("1 - delta0^2 F = " + std::to_string(s) + " < 0; clamped to zero");
        s = 0.0;
    }
    r.cost = delta0 * std::sqrt(s);
    if (!tr.converged) r.diagnostics.push_back("QFI iteration stopped at max_iters before reaching rel_tol");
    return r;
}

/// 1 / sqrt(F + I) with I the Fisher information of the prior. A flat prior on
/// the circle has no finite I, so it yields 1/sqrt(F) with a caveat.
inline double bayesian_cr_bound(const Prior& prior, double qfi_value, Diagnostics* diag = nullptr) {
    if (!(qfi_value >= 0.0)) throw std::domain_error("bayesian_cr_bound: QFI must be >= 0");
    double info = 0.0;
    if (const auto* g = std::get_if<GaussianPrior>(&prior)) {
        if (!(g->delta0 > 0.0)) throw std::domain_error("bayesian_cr_bound: delta0 must be > 0");
        info = 1.0 / (g->delta0 * g->delta0);
    } else if (diag) {
        diag->push_back("flat prior does not vanish on the boundary; prior information term omitted");
    }
    const double total = qfi_value + info;
    if (!(total > 0.0)) throw std::domain_error("bayesian_cr_bound: F + I must be > 0");
    return 1.0 / std::sqrt(total);
}

// ---------------------------------------------------------------------------
// Indefinite particle number

/// Direct sum of definite-N states with probabilities p_N. N = 0 is the vacuum.
struct ParticleNumberMixture {
    std::vector<std::pair<int, double>> entries;

    void validate() const {
        if (entries.empty()) throw std::domain_error("ParticleNumberMixture: no entries");
        double s = 0.0;
        for (const auto& [n, p] : entries) {
            if (n < 0) throw std::domain_error("ParticleNumberMixture: negative particle number");
            if (!(p >= 0.0)) throw std::domain_error("ParticleNumberMixture: negative probability");
            s += p;
        }
        if (std::abs(s - 1.0) > 1e-10) throw std::domain_error("ParticleNumberMixture: probabilities do not sum to 1");
    }

    [[nodiscard]] double mean_n() const {
        double m = 0.0;
        for (const auto& [n, p] : entries) m += p * n;
        return m;
    }

    /// (1 - nbar/N) vacuum + (nbar/N) N-particle state.
    static ParticleNumberMixture vacuum_plus(int n, double nbar) {
        if (n < 1 || !(nbar > 0.0) || nbar > n) throw std::domain_error("vacuum_plus: need 0 < nbar <= N");
        const double p = nbar / n;
        if (p == 1.0) return {{{n, 1.0}}};
        return {{{0, 1.0 - p}, {n, p}}};
    }
};

/// Weighted sum of per-N QFIs. The vacuum carries no phase information and
/// may be omitted from per_n_qfi.
inline double mixture_qfi(const ParticleNumberMixture& mix, const std::map<int, double>& per_n_qfi) {
    mix.validate();
    double f = 0.0;
    for (const auto& [n, p] : mix.entries) {
        const auto it = per_n_qfi.find(n);
        if (it == per_n_qfi.end()) {
            if (n == 0) continue;
            throw std::domain_error("mixture_qfi: no QFI supplied for N = " + std::to_string(n));
        }
        f += p * it->second;
    }
    return f;
}

struct IndefiniteBound {
    double exact = 0.0;   // Delta0 sqrt(1 - Delta0^2 sum_N p_N / (Delta0^2 + pi^2/N^2))
    double relaxed = 0.0; // same with the sum replaced by its value at nbar
    double mean_n = 0.0;
    bool ordered = false; // exact >= relaxed
    Diagnostics diagnostics;
};

/// Lower bound on the Gaussian-prior cost of a particle-number mixture, built
/// from the large-N optimal QFI 1/(Delta0^2 + pi^2/N^2) of each component.
/// x^2 / (Delta0^2 x^2 + pi^2) is concave only for x > pi / (Delta0 sqrt 3), so
/// the relaxed form is a valid bound only when every component lies there.
inline IndefiniteBound indefinite_bayes_bound(const ParticleNumberMixture& mix, double delta0) {
    mix.validate();
    if (!(delta0 > 0.0)) throw std::domain_error("indefinite_bayes_bound: delta0 must be > 0");
    const double d2 = delta0 * delta0, pi2 = std::numbers::pi * std::numbers::pi;
    const auto fisher = [&](double n) { return n > 0.0 ? n * n / (d2 * n * n + pi2) : 0.0; };

    IndefiniteBound r;
    r.mean_n = mix.mean_n();
    double sum = 0.0;
    for (const auto& [n, p] : mix.entries) sum += p * fisher(n);
    r.exact = delta0 * std::sqrt(std::max(0.0, 1.0 - d2 * sum));
    r.relaxed = delta0 * std::sqrt(std::max(0.0, 1.0 - d2 * fisher(r.mean_n)));
    r.ordered = r.exact >= r.relaxed * (1.0 - 1e-14);

    const double knee = std::numbers::pi / (delta0 * std::sqrt(3.0));
    bool small = false, convex = false;
    for (const auto& [n, p] : mix.entries) {
        if (p == 0.0 || n == 0) continue; // the vacuum term is exact
        small = small || n < 10;
        convex = convex || n <= knee;
    }
    if (small) r.diagnostics.push_back("mixture has components with N < 10; the large-N QFI form is only approximate there");
    if (convex)
        r.diagnostics.push_back("components below N = pi/(delta0 sqrt 3) lie where the QFI form is convex; exact >= relaxed is not guaranteed");
    if (!r.ordered) r.diagnostics.push_back("exact expression fell below the relaxed bound");
    return r;
}

} // namespace qmetro
