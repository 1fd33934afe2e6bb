#pragma once

// Angular-momentum kernel for N spin-1/2 particles: Clebsch-Gordan
// coefficients, the transfer coefficients C^{N,k}_{j,m} that describe how k
// sigma_z flips act on a symmetric state, and the per-block coupling matrices
// A^{N,j}(eta) of the local dephasing channel.

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qmetro {

/// Integer or half-integer quantum number, stored as twice its value.
class HalfInt {
  public:
    constexpr HalfInt() = default;
    constexpr explicit HalfInt(int integer) : twice_(2 * integer) {}

    static constexpr HalfInt from_twice(int twice) {
        HalfInt h;
        h.twice_ = twice;
        return h;
    }

    [[nodiscard]] constexpr int twice() const { return twice_; }
    [[nodiscard]] constexpr double value() const { return 0.5 * twice_; }
    [[nodiscard]] constexpr bool is_integer() const { return twice_ % 2 == 0; }

    constexpr HalfInt operator-() const { return from_twice(-twice_); }
    friend constexpr HalfInt operator+(HalfInt a, HalfInt b) { return from_twice(a.twice_ + b.twice_); }
    friend constexpr HalfInt operator-(HalfInt a, HalfInt b) { return from_twice(a.twice_ - b.twice_); }
    friend constexpr bool operator==(HalfInt, HalfInt) = default;
    friend constexpr auto operator<=>(HalfInt, HalfInt) = default;

    friend std::ostream& operator<<(std::ostream& os, HalfInt h) {
        if (h.is_integer()) return os << h.twice_ / 2;
        return os << h.twice_ << "/2";
    }

  private:
    int twice_ = 0;
};

constexpr HalfInt half(int twice) { return HalfInt::from_twice(twice); }
constexpr HalfInt habs(HalfInt h) { return h.twice() < 0 ? -h : h; }

/// Arguments of <j1 m1; j2 m2 | J M>.
struct CgKey {
    HalfInt j1, m1, j2, m2, J, M;
};

/// Why a coefficient is zero by selection rule (as opposed to a physical zero).
enum class CgSelection {
    allowed,
    negative_spin,
    projection_out_of_range,
    projection_parity,
    projection_sum,
    triangle,
};

inline CgSelection cg_selection(const CgKey& k) {
    if (k.j1.twice() < 0 || k.j2.twice() < 0 || k.J.twice() < 0) return CgSelection::negative_spin;
    if (habs(k.m1) > k.j1 || habs(k.m2) > k.j2 || habs(k.M) > k.J)
        return CgSelection::projection_out_of_range;
    if ((k.j1 - k.m1).twice() % 2 != 0 || (k.j2 - k.m2).twice() % 2 != 0 || (k.J - k.M).twice() % 2 != 0)
        return CgSelection::projection_parity;
    if (k.m1 + k.m2 != k.M) return CgSelection::projection_sum;
    if (k.J < habs(k.j1 - k.j2) || k.J > k.j1 + k.j2 || (k.j1 + k.j2 + k.J).twice() % 2 != 0)
        return CgSelection::triangle;
    return CgSelection::allowed;
}

namespace detail {

using BigInt = boost::multiprecision::cpp_int;
using BigFloat = boost::multiprecision::cpp_bin_float_50;

/// Cached n!. A deque keeps earlier references valid while the cache grows.
inline const BigInt& big_factorial(int n) {
    static std::mutex mutex;
    static std::deque<BigInt> table{BigInt(1)};
    std::lock_guard lock(mutex);
    while (static_cast<int>(table.size()) <= n) table.push_back(table.back() * BigInt(table.size()));
    return table[static_cast<std::size_t>(n)];
}

inline double log_binomial(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

} // namespace detail

/// <j1 m1; j2 m2 | J M> in the Condon-Shortley convention.
///
/// Evaluated with Racah's closed-form sum in exact integer arithmetic, so the
/// alternating sum does not lose digits; the square root is taken last.
/// Returns 0 whenever a selection rule fails (see cg_selection()).
inline double clebsch_gordan(const CgKey& key) {
    if (cg_selection(key) != CgSelection::allowed) return 0.0;
    using detail::BigInt;
    const auto f = [](HalfInt h) -> const BigInt& { return detail::big_factorial(h.twice() / 2); };
    const HalfInt j1 = key.j1, j2 = key.j2, J = key.J, m1 = key.m1, m2 = key.m2, M = key.M;

    // All of the following are integers once the selection rules hold.
    const HalfInt a = j1 + j2 - J, b = j1 - m1, c = j2 + m2, d = J - j2 + m1, e = J - j1 - m2;
    const int zmin = std::max({0, -d.twice() / 2, -e.twice() / 2});
    const int zmax = std::min({a.twice() / 2, b.twice() / 2, c.twice() / 2});

    // Exact sum over a common denominator.
    BigInt numerator_sum = 0;
    BigInt common = 1;
    std::vector<BigInt> denominators;
    for (int z = zmin; z <= zmax; ++z) {
        BigInt den = detail::big_factorial(z) * detail::big_factorial(a.twice() / 2 - z) *
                     detail::big_factorial(b.twice() / 2 - z) * detail::big_factorial(c.twice() / 2 - z) *
                     detail::big_factorial(d.twice() / 2 + z) * detail::big_factorial(e.twice() / 2 + z);
        denominators.push_back(std::move(den));
    }
    for (const auto& den : denominators) common = boost::multiprecision::lcm(common, den);
    for (int z = zmin; z <= zmax; ++z) {
        BigInt term = common / denominators[static_cast<std::size_t>(z - zmin)];
        numerator_sum += (z % 2 == 0) ? term : BigInt(-term);
    }
    if (numerator_sum == 0) return 0.0;

    // CG^2 = (2J+1) (J+j1-j2)! (J-j1+j2)! (j1+j2-J)! / (j1+j2+J+1)!
    //        * (J+M)! (J-M)! (j1-m1)! (j1+m1)! (j2-m2)! (j2+m2)! * (sum / common)^2
    const BigInt pref_num = BigInt(J.twice() + 1) * f(J + j1 - j2) * f(J - j1 + j2) * f(j1 + j2 - J) * f(J + M) *
                            f(J - M) * f(j1 - m1) * f(j1 + m1) * f(j2 - m2) * f(j2 + m2) * numerator_sum *
                            numerator_sum;
    const BigInt pref_den = f(j1 + j2 + J + HalfInt(1)) * common * common;
    const detail::BigFloat squared = detail::BigFloat(pref_num) / detail::BigFloat(pref_den);
    const double magnitude = static_cast<double>(sqrt(squared));
    return numerator_sum < 0 ? -magnitude : magnitude;
}

/// All Clebsch-Gordan coefficients for coupling spins j1 and j2.
///
/// For each total projection M the coefficients <j1 m1; j2 M-m1 | J M> are the
/// eigenvectors of J^2 restricted to the uncoupled M subspace, which is a
/// symmetric tridiagonal matrix with eigenvalues J(J+1). Signs follow
/// Condon-Shortley: the highest-weight state has a positive m1 = j1 component
/// and lower states are fixed by overlap with J_- applied to the previous M.
class ClebschGordanTable {
  public:
    ClebschGordanTable(HalfInt j1, HalfInt j2) : j1_(j1), j2_(j2) {
        if (j1.twice() < 0 || j2.twice() < 0) throw std::domain_error("ClebschGordanTable: negative spin");
        const int tj1 = j1.twice(), tj2 = j2.twice();
        const int top = tj1 + tj2;
        slices_.resize(static_cast<std::size_t>(top + 1));
        for (int tM = top; tM >= -top; tM -= 2) {
            Slice& s = slices_[slice_index(tM)];
            s.m1_hi = std::min(tj1, tM + tj2);
            s.m1_lo = std::max(-tj1, tM - tj2);
            s.J_lo = std::max(std::abs(tj1 - tj2), std::abs(tM));
            const int dim = (s.m1_hi - s.m1_lo) / 2 + 1;

            Eigen::VectorXd diag(dim);
            Eigen::VectorXd sub(std::max(dim - 1, 0));
            const double a1 = 0.25 * tj1 * (tj1 + 2), a2 = 0.25 * tj2 * (tj2 + 2);
            for (int r = 0; r < dim; ++r) {
                const int tm1 = s.m1_hi - 2 * r;
                const int tm2 = tM - tm1;
                diag(r) = a1 + a2 + 0.5 * tm1 * tm2;
                if (r + 1 < dim) {
                    // <m1-1, m2+1| J1- J2+ |m1, m2>
                    sub(r) = 0.5 * std::sqrt(double(tj1 + tm1) * double(tj1 - tm1 + 2)) * 0.5 *
                             std::sqrt(double(tj2 - tm2) * double(tj2 + tm2 + 2));
                }
            }
            if (dim == 1) {
                s.vectors = Eigen::MatrixXd::Ones(1, 1);
            } else {
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
                es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
                if (es.info() != Eigen::Success)
                    throw std::runtime_error("ClebschGordanTable: tridiagonal eigensolver failed");
                s.vectors = es.eigenvectors();
            }
            fix_signs(tM);
        }
    }

    [[nodiscard]] HalfInt j1() const { return j1_; }
    [[nodiscard]] HalfInt j2() const { return j2_; }

    /// <j1 m1; j2 M-m1 | J M>, zero outside the allowed ranges.
    [[nodiscard]] double operator()(HalfInt m1, HalfInt J, HalfInt M) const {
        const int top = j1_.twice() + j2_.twice();
        if (std::abs(M.twice()) > top || (top - M.twice()) % 2 != 0) return 0.0;
        const Slice& s = slices_[slice_index(M.twice())];
        if (m1.twice() > s.m1_hi || m1.twice() < s.m1_lo || (s.m1_hi - m1.twice()) % 2 != 0) return 0.0;
        if (J.twice() < s.J_lo || J.twice() > top || (J.twice() - s.J_lo) % 2 != 0) return 0.0;
        return s.vectors((s.m1_hi - m1.twice()) / 2, (J.twice() - s.J_lo) / 2);
    }

    /// Rows: m1 from m1_hi down in steps of one; columns: J upward from J_lo.
    struct Slice {
        int m1_hi = 0, m1_lo = 0, J_lo = 0;
        Eigen::MatrixXd vectors;
    };
    [[nodiscard]] const Slice& slice(HalfInt M) const { return slices_[slice_index(M.twice())]; }

  private:
    [[nodiscard]] std::size_t slice_index(int tM) const {
        return static_cast<std::size_t>((j1_.twice() + j2_.twice() - tM) / 2);
    }

    void fix_signs(int tM) {
        const int tj1 = j1_.twice(), tj2 = j2_.twice();
        Slice& s = slices_[slice_index(tM)];
        const int dim = static_cast<int>(s.vectors.rows());
        const int nJ = static_cast<int>(s.vectors.cols());
        for (int col = 0; col < nJ; ++col) {
            const int tJ = s.J_lo + 2 * col;
            auto v = s.vectors.col(col);
            if (tJ == tM) {
                // Highest weight: m1 = j1 component is positive.
                if (v(0) < 0) v = -v;
                continue;
            }
            const Slice& p = slices_[slice_index(tM + 2)];
            const auto pv = p.vectors.col((tJ - p.J_lo) / 2);
            double overlap = 0.0;
            for (int r = 0; r < static_cast<int>(p.vectors.rows()); ++r) {
                const int tm1 = p.m1_hi - 2 * r;
                const int tm2 = tM + 2 - tm1;
                // J1-: m1 -> m1 - 1
                if (tm1 - 2 >= -tj1) {
                    const int row = (s.m1_hi - (tm1 - 2)) / 2;
                    if (row >= 0 && row < dim)
                        overlap += v(row) * 0.5 * std::sqrt(double(tj1 + tm1) * double(tj1 - tm1 + 2)) * pv(r);
                }
                // J2-: m2 -> m2 - 1 (m1 unchanged)
                if (tm2 - 2 >= -tj2) {
                    const int row = (s.m1_hi - tm1) / 2;
                    if (row >= 0 && row < dim)
                        overlap += v(row) * 0.5 * std::sqrt(double(tj2 + tm2) * double(tj2 - tm2 + 2)) * pv(r);
                }
            }
            if (overlap < 0) v = -v;
        }
    }

    HalfInt j1_, j2_;
    std::vector<Slice> slices_;
};

/// Allowed total spins for N spin-1/2 particles: from N%2 / 2 up to N/2.
inline std::vector<HalfInt> spin_ladder(int n_particles) {
    std::vector<HalfInt> js;
    for (int tj = n_particles % 2; tj <= n_particles; tj += 2) js.push_back(half(tj));
    return js;
}

inline void require_spin_for(int n_particles, HalfInt j, const char* where) {
    if (n_particles < 0 || j.twice() < 0 || j.twice() > n_particles || (n_particles - j.twice()) % 2 != 0)
        throw std::domain_error(std::string(where) + ": spin j not on the ladder for N");
}

/// Transfer coefficients C^{N,k}_{j,m} for one particle number N.
///
/// C^{N,k}_{j,m} = sum_mt <k/2 mt; (N-k)/2 m-mt | N/2 m> <k/2 mt; (N-k)/2 m-mt | j m> (-1)^{k/2-mt}
///
/// is the amplitude of sigma_z^{(x)k} (x) 1 |N/2, m> in the spin-j irrep obtained
/// by coupling the first k and the remaining N-k particles. The first factor is
/// the stretched coupling and has the closed form
/// sqrt(binom(k,a) binom(N-k,n-a) / binom(N,n)).
class TransferTable {
  public:
    explicit TransferTable(int n_particles) : n_(n_particles) {
        if (n_particles < 1) throw std::domain_error("TransferTable: N must be >= 1");
        const int N = n_particles;
        const int n_spins = N / 2 + 1;
        data_.assign(static_cast<std::size_t>((N + 1) * n_spins * (N + 1)), 0.0);
        for (int k = 0; k <= N; ++k) {
            const ClebschGordanTable table(half(k), half(N - k));
            for (int n = 0; n <= N; ++n) {
                const int tM = 2 * n - N;
                const auto& s = table.slice(half(tM));
                const int dim = static_cast<int>(s.vectors.rows());
                Eigen::VectorXd stretched(dim);
                for (int r = 0; r < dim; ++r) {
                    const int tm1 = s.m1_hi - 2 * r;
                    const int ups = (k + tm1) / 2; // spin-up count among the first k
                    const double lg =
                        0.5 * (detail::log_binomial(k, ups) + detail::log_binomial(N - k, n - ups) -
                               detail::log_binomial(N, n));
                    const int flips = (k - tm1) / 2; // spin-down count among the first k
                    stretched(r) = (flips % 2 == 0 ? 1.0 : -1.0) * std::exp(lg);
                }
                const Eigen::VectorXd coeffs = s.vectors.transpose() * stretched;
                for (int col = 0; col < coeffs.size(); ++col) {
                    const int tj = s.J_lo + 2 * col;
                    at(k, tj, n) = coeffs(col);
                }
            }
        }
    }

    [[nodiscard]] int n_particles() const { return n_; }

    /// C^{N,k}_{j,m}; zero when j is below |N/2 - k| or |m| > j.
    [[nodiscard]] double operator()(int k, HalfInt j, HalfInt m) const {
        const int tj = j.twice();
        const int n = (m.twice() + n_) / 2;
        if (std::abs(m.twice()) > tj) return 0.0;
        return data_[index(k, tj, n)];
    }

  private:
    [[nodiscard]] std::size_t index(int k, int tj, int n) const {
        const int n_spins = n_ / 2 + 1;
        const int jidx = (tj - n_ % 2) / 2;
        return static_cast<std::size_t>((k * n_spins + jidx) * (n_ + 1) + n);
    }
    double& at(int k, int tj, int n) { return data_[index(k, tj, n)]; }

    int n_;
    std::vector<double> data_;
};

/// Shared, immutable transfer table for N. Built once and cached.
inline std::shared_ptr<const TransferTable> transfer_table(int n_particles) {
    static std::mutex mutex;
    static std::map<int, std::shared_ptr<const TransferTable>> cache;
    {
        std::lock_guard lock(mutex);
        if (auto it = cache.find(n_particles); it != cache.end()) return it->second;
    }
    auto table = std::make_shared<const TransferTable>(n_particles);
    std::lock_guard lock(mutex);
    return cache.emplace(n_particles, std::move(table)).first->second;
}

/// C^{N,k}_{j,m}. Throws std::domain_error outside 0<=k<=N, |N/2-k|<=j<=N/2, |m|<=j.
inline double transfer_coefficient(int n_particles, int k, HalfInt j, HalfInt m) {
    require_spin_for(n_particles, j, "transfer_coefficient");
    if (k < 0 || k > n_particles) throw std::domain_error("transfer_coefficient: k out of range");
    if (std::abs(n_particles - 2 * k) > j.twice())
        throw std::domain_error("transfer_coefficient: j below |N/2 - k|");
    if (habs(m) > j || (j - m).twice() % 2 != 0) throw std::domain_error("transfer_coefficient: invalid m");
    return (*transfer_table(n_particles))(k, j, m);
}

/// binom(N,k) ((1-eta)/2)^k ((1+eta)/2)^(N-k): probability that exactly k of
/// the N particles receive a sigma_z kick.
inline double dephasing_weight(int n_particles, int k, double eta) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::domain_error("dephasing_weight: eta outside [0,1]");
    if (k < 0 || k > n_particles) throw std::domain_error("dephasing_weight: k out of range");
    const double flip = 0.5 * (1.0 - eta), keep = 0.5 * (1.0 + eta);
    if (flip == 0.0) return k == 0 ? 1.0 : 0.0;
    return std::exp(detail::log_binomial(n_particles, k) + k * std::log(flip) + (n_particles - k) * std::log(keep));
}

/// d_j = binom(N, N/2-j) - binom(N, N/2-j-1). Exact in 64 bits up to N = 62.
inline std::uint64_t multiplicity_dimension(int n_particles, HalfInt j) {
    require_spin_for(n_particles, j, "multiplicity_dimension");
    if (n_particles > 62) throw std::domain_error("multiplicity_dimension: N > 62 overflows 64 bits");
    const auto binom = [](int n, int k) -> std::uint64_t {
        if (k < 0 || k > n) return 0;
        std::uint64_t r = 1;
        for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
        return r;
    };
    const int lower = (n_particles - j.twice()) / 2;
    return binom(n_particles, lower) - binom(n_particles, lower - 1);
}

/// A^{N,j}_{m,m'}(eta) for every spin block of one (N, eta) pair.
///
/// Block j of the dephased state is A^j (Hadamard) rho restricted to
/// |m|,|m'| <= j. Row/column index a corresponds to m = -j + a.
class CouplingTable {
  public:
    CouplingTable(int n_particles, double eta) : CouplingTable(transfer_table(n_particles), eta) {}

    CouplingTable(std::shared_ptr<const TransferTable> transfer, double eta)
        : n_(transfer->n_particles()), eta_(eta) {
        if (!(eta >= 0.0 && eta <= 1.0)) throw std::domain_error("CouplingTable: eta outside [0,1]");
        const int N = n_;
        for (HalfInt j : spin_ladder(N)) {
            const int dim = j.twice() + 1;
            Eigen::MatrixXd block = Eigen::MatrixXd::Zero(dim, dim);
            Eigen::VectorXd c(dim);
            for (int k = 0; k <= N; ++k) {
                if (std::abs(N - 2 * k) > j.twice()) continue;
                const double w = dephasing_weight(N, k, eta);
                if (w == 0.0) continue;
                for (int a = 0; a < dim; ++a) c(a) = (*transfer)(k, j, half(2 * a - j.twice()));
                for (int b = 0; b < dim; ++b)
                    for (int a = 0; a < dim; ++a) block(a, b) += w * (c(a) * c(b));
            }
            blocks_.push_back(std::move(block));
        }
    }

    [[nodiscard]] int n_particles() const { return n_; }
    [[nodiscard]] double eta() const { return eta_; }

    /// Block for spin j; index a <-> m = -j + a.
    [[nodiscard]] const Eigen::MatrixXd& block(HalfInt j) const {
        require_spin_for(n_, j, "CouplingTable::block");
        return blocks_[static_cast<std::size_t>((j.twice() - n_ % 2) / 2)];
    }

    [[nodiscard]] double operator()(HalfInt j, HalfInt m, HalfInt m2) const {
        if (habs(m) > j || habs(m2) > j) throw std::domain_error("CouplingTable: |m| > j");
        return block(j)((m + j).twice() / 2, (m2 + j).twice() / 2);
    }

  private:
    int n_;
    double eta_;
    std::vector<Eigen::MatrixXd> blocks_;
};

/// A^{N,j}_{m,m2}(eta) = sum_k dephasing_weight(N,k,eta) C^{N,k}_{j,m} C^{N,k}_{j,m2}.
inline double coupling_matrix_entry(int n_particles, HalfInt j, HalfInt m, HalfInt m2, double eta) {
    require_spin_for(n_particles, j, "coupling_matrix_entry");
    if (habs(m) > j || habs(m2) > j || (j - m).twice() % 2 != 0 || (j - m2).twice() % 2 != 0)
        throw std::domain_error("coupling_matrix_entry: invalid m");
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::domain_error("coupling_matrix_entry: eta outside [0,1]");
    const auto table = transfer_table(n_particles);
    double sum = 0.0;
    for (int k = 0; k <= n_particles; ++k) {
        if (std::abs(n_particles - 2 * k) > j.twice()) continue;
        const double w = dephasing_weight(n_particles, k, eta);
        if (w == 0.0) continue;
        sum += w * ((*table)(k, j, m) * (*table)(k, j, m2));
    }
    return sum;
}

} // namespace qmetro
