#pragma once

// Symmetric logarithmic derivative and quantum Fisher information on block
// matrices.

#include "qmetro/qcore.hpp"

#include <Eigen/SVD>

namespace qmetro {

/// Relative eigenvalue cutoff below which a direction counts as outside the support.
inline constexpr double support_cutoff = 1e-12;
/// Most negative eigenvalue (relative to the largest) accepted for a state.
inline constexpr double psd_tolerance = 1e-10;

namespace detail {

struct BlockSpectra {
    std::vector<HermitianEigen> eig;
    double cutoff = 0.0;
};

inline BlockSpectra spectra_of(const AngularBlockMatrix& rho) {
    BlockSpectra s;
    s.eig.reserve(rho.blocks.size());
    double top = 0.0, bottom = 0.0;
    for (const auto& b : rho.blocks) {
        s.eig.push_back(hermitian_eigen(0.5 * (b.matrix + b.matrix.adjoint())));
        const auto& v = s.eig.back().values;
        if (v.size() == 0) continue;
        top = std::max(top, v(v.size() - 1));
        bottom = std::min(bottom, v(0));
    }
    if (top <= 0.0) throw numerical_error("sld: state has no positive eigenvalue");
    if (bottom < -psd_tolerance * std::max(1.0, top))
        throw numerical_error("sld: state is not positive semidefinite (min eigenvalue " + std::to_string(bottom) + ")");
    s.cutoff = support_cutoff * top;
    return s;
}

inline void require_same_structure(const AngularBlockMatrix& a, const AngularBlockMatrix& b, const char* where) {
    bool ok = a.blocks.size() == b.blocks.size();
    for (std::size_t i = 0; ok && i < a.blocks.size(); ++i)
        ok = a.blocks[i].j == b.blocks[i].j && a.blocks[i].lost_a == b.blocks[i].lost_a &&
             a.blocks[i].lost_b == b.blocks[i].lost_b && a.blocks[i].matrix.rows() == b.blocks[i].matrix.rows();
    if (!ok) throw std::domain_error(std::string(where) + ": block structures differ");
}

/// Eigenbasis SLD of one block: L~_ik = 2 <v_i|drho|v_k> / (l_i + l_k).
inline Eigen::MatrixXcd sld_eigenbasis(const HermitianEigen& e, const Eigen::MatrixXcd& drho, double cutoff) {
    Eigen::MatrixXcd l = e.vectors.adjoint() * drho * e.vectors;
    const auto n = l.rows();
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index i = 0; i < n; ++i) {
            const double s = std::max(e.values(i), 0.0) + std::max(e.values(k), 0.0);
            l(i, k) = s > cutoff ? 2.0 * l(i, k) / s : cplx(0.0);
        }
    return l;
}

} // namespace detail

/// SLD L solving drho = (rho L + L rho)/2 on the support of rho, block by block.
inline AngularBlockMatrix sld(const AngularBlockMatrix& rho, const AngularBlockMatrix& drho) {
    detail::require_same_structure(rho, drho, "sld");
    const auto spec = detail::spectra_of(rho);
    AngularBlockMatrix out = drho;
    for (std::size_t b = 0; b < rho.blocks.size(); ++b) {
        const auto& e = spec.eig[b];
        const Eigen::MatrixXcd lt = detail::sld_eigenbasis(e, drho.blocks[b].matrix, spec.cutoff);
        Eigen::MatrixXcd l = e.vectors * lt * e.vectors.adjoint();
        out.blocks[b].matrix = 0.5 * (l + l.adjoint());
    }
    return out;
}

/// tr(rho L^2).
inline double qfi(const AngularBlockMatrix& rho, const AngularBlockMatrix& drho) {
    detail::require_same_structure(rho, drho, "qfi");
    const auto spec = detail::spectra_of(rho);
    double f = 0.0;
    for (std::size_t b = 0; b < rho.blocks.size(); ++b) {
        const auto& e = spec.eig[b];
        const Eigen::MatrixXcd lt = detail::sld_eigenbasis(e, drho.blocks[b].matrix, spec.cutoff);
        for (Eigen::Index i = 0; i < lt.rows(); ++i)
            f += std::max(e.values(i), 0.0) * lt.row(i).squaredNorm();
    }
    return f;
}

/// QFI for the phase generator, drho = i[H, rho].
inline double qfi(const AngularBlockMatrix& rho) { return qfi(rho, generator_commutator(rho)); }

/// 4 Var(m) of a normalized pure vector on a block with row a <-> m = -j + a.
inline double pure_block_qfi(const Eigen::VectorXcd& psi, HalfInt j) {
    double mu = 0.0, nu = 0.0;
    for (Eigen::Index a = 0; a < psi.size(); ++a) {
        const double p = std::norm(psi(a)), m = block_charge(j, a);
        mu += p * m;
        nu += p * m * m;
    }
    return std::max(0.0, 4.0 * (nu - mu * mu));
}

/// QFI of the loss output: sectors are orthogonal and each one is pure, so
/// the block SLD reduces to 4 Var(m) per component.
inline double qfi_loss(const SectorMixture& mix) {
    if (mix.components.empty()) throw std::domain_error("qfi_loss: empty mixture");
    double f = 0.0;
    for (const auto& c : mix.components) {
        if (c.weight < 0.0) throw std::domain_error("qfi_loss: negative weight");
        f += c.weight * pure_block_qfi(c.amplitudes, half(mix.n_particles - c.lost_a - c.lost_b));
    }
    return f;
}

/// Uhlmann root fidelity tr|sqrt(rho) sqrt(sigma)| between rho and its phase-shifted copy.
inline double phase_shift_fidelity(const AngularBlockMatrix& rho, double phi) {
    const auto spec = detail::spectra_of(rho);
    double kept = 0.0, fid = 0.0;
    for (std::size_t b = 0; b < rho.blocks.size(); ++b) {
        const auto& e = spec.eig[b];
        Eigen::VectorXd root(e.values.size());
        for (Eigen::Index i = 0; i < root.size(); ++i) {
            const double l = e.values(i) > spec.cutoff ? e.values(i) : 0.0;
            kept += l;
            root(i) = std::sqrt(l);
        }
        const Eigen::MatrixXcd sq = e.vectors * root.asDiagonal() * e.vectors.adjoint();
        Eigen::MatrixXcd rotated = sq;
        for (Eigen::Index c = 0; c < sq.cols(); ++c)
            for (Eigen::Index r = 0; r < sq.rows(); ++r)
                rotated(r, c) *= std::polar(1.0, phi * static_cast<double>(r - c));
        fid += Eigen::JacobiSVD<Eigen::MatrixXcd>(sq * rotated).singularValues().sum();
    }
    return fid / kept;
}

/// Finite-difference QFI 8 (1 - Fid(rho_0, rho_delta)) / delta^2.
inline double fidelity_qfi_check(const SymmetricPureState& state, const NoiseModel& noise, double delta) {
    if (delta == 0.0 || !std::isfinite(delta)) throw std::domain_error("fidelity_qfi_check: delta must be nonzero");
    const auto rho = encode(state, noise);
    return 8.0 * (1.0 - phase_shift_fidelity(rho, delta)) / (delta * delta);
}

} // namespace qmetro
