#pragma once

// Symmetric N-particle states, noise channels in their compressed block
// representations, and the phase generator.

#include "qmetro/angmom.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace qmetro {

using cplx = std::complex<double>;

/// Raised when a matrix that should be a density matrix is not, beyond tolerance,
/// or when a dense eigensolver fails.
class numerical_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct HermitianEigen {
    Eigen::VectorXd values; // ascending
    Eigen::MatrixXcd vectors;
};

inline HermitianEigen hermitian_eigen(const Eigen::MatrixXcd& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("hermitian_eigen: matrix not square");
    if (m.rows() == 0) return {};
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
    if (es.info() != Eigen::Success) throw numerical_error("hermitian_eigen: eigensolver did not converge");
    return {es.eigenvalues(), es.eigenvectors()};
}

// ---------------------------------------------------------------------------
// States

/// Permutation-symmetric pure state of N two-level particles.
///
/// amplitudes(n) multiplies |n, N-n> = |j=N/2, m=n-N/2>.
struct SymmetricPureState {
    int n_particles = 0;
    Eigen::VectorXcd amplitudes;

    static SymmetricPureState from_amplitudes(Eigen::VectorXcd amps, bool normalize = false) {
        if (amps.size() < 2) throw std::domain_error("SymmetricPureState: need N >= 1");
        const double norm = amps.norm();
        if (normalize) {
            if (norm == 0.0) throw std::domain_error("SymmetricPureState: zero vector");
            amps /= norm;
        } else if (std::abs(norm * norm - 1.0) > 1e-12) {
            throw std::domain_error("SymmetricPureState: amplitudes not normalized");
        }
        return {static_cast<int>(amps.size()) - 1, std::move(amps)};
    }

    /// (|N,0> + |0,N>)/sqrt(2)
    static SymmetricPureState noon(int n) {
        Eigen::VectorXcd c = Eigen::VectorXcd::Zero(n + 1);
        c(0) = c(n) = std::numbers::sqrt2 / 2;
        return from_amplitudes(std::move(c));
    }

    /// |+>^{(x)N}: binomial amplitudes sqrt(binom(N,n)/2^N).
    static SymmetricPureState product_plus(int n) {
        Eigen::VectorXcd c(n + 1);
        for (int i = 0; i <= n; ++i) c(i) = std::exp(0.5 * (detail::log_binomial(n, i) - n * std::log(2.0)));
        return from_amplitudes(std::move(c), true);
    }

    /// c_n proportional to sin(pi (n+1) / (N+2)).
    static SymmetricPureState sine_profile(int n) {
        Eigen::VectorXcd c(n + 1);
        for (int i = 0; i <= n; ++i) c(i) = std::sin(std::numbers::pi * (i + 1) / (n + 2));
        return from_amplitudes(std::move(c), true);
    }

    [[nodiscard]] HalfInt m_of(int n) const { return half(2 * n - n_particles); }
    [[nodiscard]] Eigen::MatrixXcd density() const { return amplitudes * amplitudes.adjoint(); }
};

// ---------------------------------------------------------------------------
// Noise

struct NoiseFree {};
/// Independent sigma_z kicks; eta = 1 is noiseless.
struct LocalDephasing {
    double eta = 1.0;
};
/// Photon loss with transmissivity eta in both arms.
struct Loss {
    double eta = 1.0;
};
/// One Gaussian phase kick of variance gamma shared by all particles.
struct CollectiveDephasing {
    double gamma = 0.0;
};

using NoiseModel = std::variant<NoiseFree, LocalDephasing, Loss, CollectiveDephasing>;

inline void validate(const NoiseModel& noise) {
    std::visit(
        [](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, LocalDephasing> || std::is_same_v<T, Loss>) {
                if (!(n.eta >= 0.0 && n.eta <= 1.0)) throw std::domain_error("noise: eta outside [0,1]");
            } else if constexpr (std::is_same_v<T, CollectiveDephasing>) {
                if (!(n.gamma >= 0.0) || !std::isfinite(n.gamma)) throw std::domain_error("noise: gamma < 0");
            }
        },
        noise);
}

inline std::string describe(const NoiseModel& noise) {
    return std::visit(
        [](const auto& n) -> std::string {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, NoiseFree>) return "none";
            else if constexpr (std::is_same_v<T, LocalDephasing>) return "dephasing(eta=" + std::to_string(n.eta) + ")";
            else if constexpr (std::is_same_v<T, Loss>) return "loss(eta=" + std::to_string(n.eta) + ")";
            else return "collective(gamma=" + std::to_string(n.gamma) + ")";
        },
        noise);
}

// ---------------------------------------------------------------------------
// Block-diagonal operators

/// One dense block acting on a spin-j irrep; row a <-> m = -j + a.
/// Loss sectors also carry the number of particles lost in each arm.
struct SpinBlock {
    HalfInt j;
    Eigen::MatrixXcd matrix;
    int lost_a = 0;
    int lost_b = 0;
};

/// Direct sum of spin blocks (multiplicity spaces traced out).
struct AngularBlockMatrix {
    int n_particles = 0;
    std::vector<SpinBlock> blocks;

    [[nodiscard]] double trace() const {
        double t = 0.0;
        for (const auto& b : blocks) t += b.matrix.trace().real();
        return t;
    }

    [[nodiscard]] const SpinBlock* find(HalfInt j, int lost_a = 0, int lost_b = 0) const {
        for (const auto& b : blocks)
            if (b.j == j && b.lost_a == lost_a && b.lost_b == lost_b) return &b;
        return nullptr;
    }

    [[nodiscard]] double hermiticity_error() const {
        double e = 0.0;
        for (const auto& b : blocks) e = std::max(e, (b.matrix - b.matrix.adjoint()).cwiseAbs().maxCoeff());
        return e;
    }

    [[nodiscard]] double min_eigenvalue() const {
        double lo = std::numeric_limits<double>::infinity();
        for (const auto& b : blocks) {
            const Eigen::MatrixXcd h = 0.5 * (b.matrix + b.matrix.adjoint());
            lo = std::min(lo, hermitian_eigen(h).values(0));
        }
        return lo;
    }

    /// Same block structure, all entries zero.
    [[nodiscard]] AngularBlockMatrix zeros_like() const {
        AngularBlockMatrix z = *this;
        for (auto& b : z.blocks) b.matrix.setZero();
        return z;
    }
};

/// Generator eigenvalue of row a in a spin-j block.
inline double block_charge(HalfInt j, Eigen::Index a) { return -j.value() + static_cast<double>(a); }

/// d rho / d phi at phi = 0 for U = exp(+i H phi): entry (m,m') -> i (m - m') rho_{m,m'}.
inline AngularBlockMatrix generator_commutator(const AngularBlockMatrix& rho) {
    AngularBlockMatrix d = rho;
    for (auto& b : d.blocks) {
        const auto n = b.matrix.rows();
        for (Eigen::Index c = 0; c < n; ++c)
            for (Eigen::Index r = 0; r < n; ++r) b.matrix(r, c) *= cplx(0.0, static_cast<double>(r - c));
    }
    return d;
}

/// U_phi rho U_phi^dagger blockwise.
inline AngularBlockMatrix phase_shift(const AngularBlockMatrix& rho, double phi) {
    AngularBlockMatrix out = rho;
    for (auto& b : out.blocks) {
        const auto n = b.matrix.rows();
        for (Eigen::Index c = 0; c < n; ++c)
            for (Eigen::Index r = 0; r < n; ++r) b.matrix(r, c) *= std::polar(1.0, phi * static_cast<double>(r - c));
    }
    return out;
}

/// Multiplies entry (m,m') by exp(-gamma (m-m')^2 / 2).
inline AngularBlockMatrix apply_collective_dephasing(const AngularBlockMatrix& rho, double gamma) {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::domain_error("apply_collective_dephasing: gamma < 0");
    AngularBlockMatrix out = rho;
    if (gamma == 0.0) return out;
    for (auto& b : out.blocks) {
        const auto n = b.matrix.rows();
        for (Eigen::Index c = 0; c < n; ++c)
            for (Eigen::Index r = 0; r < n; ++r) {
                const double d = static_cast<double>(r - c);
                b.matrix(r, c) *= std::exp(-0.5 * gamma * d * d);
            }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Loss

/// B^n_{l0 l1}(eta) = sqrt(binom(n,l0) binom(N-n,l1) eta^{N-l0-l1} (1-eta)^{l0+l1}).
inline double loss_amplitude(int n_particles, int n, int lost_a, int lost_b, double eta) {
    if (lost_a > n || lost_b > n_particles - n || lost_a < 0 || lost_b < 0) return 0.0;
    const int kept = n_particles - lost_a - lost_b, lost = lost_a + lost_b;
    if ((eta == 0.0 && kept > 0) || (eta == 1.0 && lost > 0)) return 0.0;
    double lg = detail::log_binomial(n, lost_a) + detail::log_binomial(n_particles - n, lost_b);
    if (kept > 0) lg += kept * std::log(eta);
    if (lost > 0) lg += lost * std::log1p(-eta);
    return std::exp(0.5 * lg);
}

/// One branch of the loss channel: lost_a and lost_b particles removed from
/// the two arms. amplitudes(i) multiplies |n - lost_a, N - n - lost_b> with
/// n = lost_a + i and is normalized; weight is the branch probability.
struct LossComponent {
    int lost_a = 0;
    int lost_b = 0;
    double weight = 0.0;
    Eigen::VectorXcd amplitudes;
};

struct SectorMixture {
    int n_particles = 0;
    double transmissivity = 1.0;
    std::vector<LossComponent> components;

    [[nodiscard]] double total_weight() const {
        double s = 0.0;
        for (const auto& c : components) s += c.weight;
        return s;
    }

    /// Each component as its own orthogonal block.
    [[nodiscard]] AngularBlockMatrix as_blocks() const {
        AngularBlockMatrix out{n_particles, {}};
        for (const auto& c : components) {
            const int survivors = n_particles - c.lost_a - c.lost_b;
            out.blocks.push_back(
                {half(survivors), c.weight * (c.amplitudes * c.amplitudes.adjoint()), c.lost_a, c.lost_b});
        }
        return out;
    }
};

inline SectorMixture apply_loss(const SymmetricPureState& state, double eta) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::domain_error("apply_loss: eta outside [0,1]");
    const int N = state.n_particles;
    SectorMixture mix{N, eta, {}};
    for (int la = 0; la <= N; ++la) {
        for (int lb = 0; la + lb <= N; ++lb) {
            const int dim = N - la - lb + 1;
            Eigen::VectorXcd v(dim);
            for (int i = 0; i < dim; ++i) v(i) = state.amplitudes(la + i) * loss_amplitude(N, la + i, la, lb, eta);
            const double p = v.squaredNorm();
            if (p == 0.0) continue;
            mix.components.push_back({la, lb, p, v / std::sqrt(p)});
        }
    }
    return mix;
}

// ---------------------------------------------------------------------------
// Compressed channel

/// How one output block is fed from the (N+1)-dimensional symmetric input:
///
///   out(a, b) = w(a, b) * rho_in(offset + a, offset + b),
///   w(a, b)   = base(a, b) * damping(|a - b|)
///
/// where base is either a dense matrix (local dephasing: A^{N,j}(eta)) or the
/// rank-one f f^T (noise-free, loss), and damping is the collective factor
/// exp(-gamma d^2 / 2) or absent.
struct ChannelBlock {
    HalfInt j;
    int offset = 0;
    int lost_a = 0;
    int lost_b = 0;
    Eigen::MatrixXd dense;   // empty when rank one
    Eigen::VectorXd factor;  // used when dense is empty
    Eigen::VectorXd damping; // empty when undamped

    [[nodiscard]] int dim() const { return j.twice() + 1; }
    [[nodiscard]] bool rank_one() const { return dense.size() == 0; }
    [[nodiscard]] bool undamped() const { return damping.size() == 0; }

    [[nodiscard]] double weight(Eigen::Index a, Eigen::Index b) const {
        const double base = rank_one() ? factor(a) * factor(b) : dense(a, b);
        return undamped() ? base : base * damping(std::abs(a - b));
    }

    [[nodiscard]] Eigen::MatrixXd weights() const {
        const int d = dim();
        Eigen::MatrixXd w(d, d);
        for (int b = 0; b < d; ++b)
            for (int a = 0; a < d; ++a) w(a, b) = weight(a, b);
        return w;
    }
};

/// Phase-covariant channel from the symmetric input space to a direct sum of
/// spin blocks. Optionally followed by collective dephasing of variance
/// extra_gamma (used for prior averaging).
class PhaseCovariantChannel {
  public:
    PhaseCovariantChannel(int n_particles, const NoiseModel& noise, double extra_gamma = 0.0)
        : n_(n_particles), noise_(noise) {
        if (n_particles < 1) throw std::domain_error("PhaseCovariantChannel: N must be >= 1");
        validate(noise);
        if (!(extra_gamma >= 0.0)) throw std::domain_error("PhaseCovariantChannel: extra_gamma < 0");
        const int N = n_particles;
        double gamma = extra_gamma;

        const auto ones_block = [&](HalfInt j, int offset) {
            ChannelBlock b{j, offset};
            b.factor = Eigen::VectorXd::Ones(b.dim());
            return b;
        };

        std::visit(
            [&](const auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, NoiseFree>) {
                    blocks_.push_back(ones_block(half(N), 0));
                } else if constexpr (std::is_same_v<T, CollectiveDephasing>) {
                    gamma += n.gamma;
                    blocks_.push_back(ones_block(half(N), 0));
                } else if constexpr (std::is_same_v<T, LocalDephasing>) {
                    if (n.eta == 1.0) {
                        blocks_.push_back(ones_block(half(N), 0));
                        return;
                    }
                    coupling_ = std::make_shared<const CouplingTable>(N, n.eta);
                    for (HalfInt j : spin_ladder(N)) {
                        const Eigen::MatrixXd& a = coupling_->block(j);
                        if (a.cwiseAbs().maxCoeff() == 0.0) continue;
                        ChannelBlock b{j, (N - j.twice()) / 2};
                        b.dense = a;
                        blocks_.push_back(std::move(b));
                    }
                } else { // Loss
                    for (int la = 0; la <= N; ++la) {
                        for (int lb = 0; la + lb <= N; ++lb) {
                            ChannelBlock b{half(N - la - lb), la, la, lb};
                            b.factor.resize(b.dim());
                            for (int i = 0; i < b.dim(); ++i) b.factor(i) = loss_amplitude(N, la + i, la, lb, n.eta);
                            if (b.factor.cwiseAbs().maxCoeff() == 0.0) continue;
                            blocks_.push_back(std::move(b));
                        }
                    }
                }
            },
            noise);

        gamma_ = gamma;
        if (gamma > 0.0) {
            for (auto& b : blocks_) {
                b.damping.resize(b.dim());
                for (int d = 0; d < b.dim(); ++d) b.damping(d) = std::exp(-0.5 * gamma * d * d);
            }
        }
    }

    [[nodiscard]] int n_particles() const { return n_; }
    [[nodiscard]] const NoiseModel& noise() const { return noise_; }
    [[nodiscard]] double collective_gamma() const { return gamma_; }
    [[nodiscard]] const std::vector<ChannelBlock>& blocks() const { return blocks_; }

    [[nodiscard]] AngularBlockMatrix apply(const Eigen::MatrixXcd& rho_in) const {
        if (rho_in.rows() != n_ + 1 || rho_in.cols() != n_ + 1)
            throw std::domain_error("PhaseCovariantChannel::apply: input dimension mismatch");
        AngularBlockMatrix out{n_, {}};
        out.blocks.reserve(blocks_.size());
        for (const auto& cb : blocks_) {
            const int d = cb.dim();
            Eigen::MatrixXcd m = rho_in.block(cb.offset, cb.offset, d, d);
            for (int b = 0; b < d; ++b)
                for (int a = 0; a < d; ++a) m(a, b) *= cb.weight(a, b);
            out.blocks.push_back({cb.j, std::move(m), cb.lost_a, cb.lost_b});
        }
        return out;
    }

    [[nodiscard]] AngularBlockMatrix apply(const SymmetricPureState& state) const {
        if (state.n_particles != n_) throw std::domain_error("PhaseCovariantChannel::apply: N mismatch");
        return apply(state.density());
    }

    /// Heisenberg-picture map: tr(apply(rho) G) = tr(rho adjoint(G)).
    [[nodiscard]] Eigen::MatrixXcd adjoint(const AngularBlockMatrix& op) const {
        if (op.blocks.size() != blocks_.size())
            throw std::domain_error("PhaseCovariantChannel::adjoint: block structure mismatch");
        Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n_ + 1, n_ + 1);
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            const auto& cb = blocks_[i];
            const auto& ob = op.blocks[i];
            if (ob.j != cb.j || ob.lost_a != cb.lost_a || ob.lost_b != cb.lost_b || ob.matrix.rows() != cb.dim())
                throw std::domain_error("PhaseCovariantChannel::adjoint: block structure mismatch");
            const int d = cb.dim();
            for (int b = 0; b < d; ++b)
                for (int a = 0; a < d; ++a) out(cb.offset + a, cb.offset + b) += cb.weight(a, b) * ob.matrix(a, b);
        }
        return out;
    }

  private:
    int n_;
    NoiseModel noise_;
    double gamma_ = 0.0;
    std::shared_ptr<const CouplingTable> coupling_;
    std::vector<ChannelBlock> blocks_;
};

/// Output of the local dephasing channel in block form: block j holds
/// sum_k w_k rho_{m,m'} C^{N,k}_{j,m} C^{N,k}_{j,m'}.
inline AngularBlockMatrix apply_dephasing(const SymmetricPureState& state, double eta) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::domain_error("apply_dephasing: eta outside [0,1]");
    return PhaseCovariantChannel(state.n_particles, LocalDephasing{eta}).apply(state);
}

/// Channel output for any noise model. Loss sectors appear as separate blocks.
inline AngularBlockMatrix encode(const SymmetricPureState& state, const NoiseModel& noise) {
    return PhaseCovariantChannel(state.n_particles, noise).apply(state);
}

} // namespace qmetro
