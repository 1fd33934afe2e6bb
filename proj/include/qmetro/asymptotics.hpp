#pragma once

// Closed-form large-N limits and the grouping threshold.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace qmetro {

struct HeisenbergCR {};                // 1/N
struct BayesPi {};                     // pi/N
struct LossLimit { double eta; };      // sqrt((1-eta)/(eta N))
struct DephasingLimit { double eta; }; // sqrt((1-eta^2)/(eta^2 N))
struct CollectiveLimit {               // sqrt(Gamma / (1 + Gamma/Delta0^2)), independent of N
    double gamma;
    double delta0;
};
struct GeneralUnitary {                // pi / ((lambda_plus - lambda_minus) N)
    double lambda_plus;
    double lambda_minus;
};

using AsymptoteSpec = std::variant<HeisenbergCR, BayesPi, LossLimit, DephasingLimit, CollectiveLimit, GeneralUnitary>;

inline double evaluate(const AsymptoteSpec& spec, int n) {
    const double N = n;
    return std::visit(
        [N](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, HeisenbergCR>) return 1.0 / N;
            else if constexpr (std::is_same_v<T, BayesPi>) return std::numbers::pi / N;
            else if constexpr (std::is_same_v<T, LossLimit>) return std::sqrt((1.0 - s.eta) / (s.eta * N));
            else if constexpr (std::is_same_v<T, DephasingLimit>)
                return std::sqrt((1.0 - s.eta * s.eta) / (s.eta * s.eta * N));
            else if constexpr (std::is_same_v<T, CollectiveLimit>)
                return std::sqrt(s.gamma / (1.0 + s.gamma / (s.delta0 * s.delta0)));
            else return std::numbers::pi / ((s.lambda_plus - s.lambda_minus) * N);
        },
        spec);
}

inline std::string describe(const AsymptoteSpec& spec) {
    return std::visit(
        [](const auto& s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, HeisenbergCR>) return "1/N";
            else if constexpr (std::is_same_v<T, BayesPi>) return "pi/N";
            else if constexpr (std::is_same_v<T, LossLimit>) return "sqrt((1-eta)/(eta N))";
            else if constexpr (std::is_same_v<T, DephasingLimit>) return "sqrt((1-eta^2)/(eta^2 N))";
            else if constexpr (std::is_same_v<T, CollectiveLimit>) return "sqrt(gamma/(1+gamma/delta0^2))";
            else return "pi/((lambda_plus-lambda_minus) N)";
        },
        spec);
}

namespace detail {
inline void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::domain_error(std::string("group_size_threshold: ") + what + " must be > 0");
}
} // namespace detail

/// Group size beyond which a fraction eps of the asymptotic QFI per particle
/// is reached, for F(N) ~ N (alpha - beta N^-gamma). Limit form (beta/(alpha eps))^(1/gamma).
inline double group_size_threshold(double alpha, double beta, double gamma, double eps) {
    detail::require_positive(alpha, "alpha");
    detail::require_positive(beta, "beta");
    detail::require_positive(gamma, "gamma");
    if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("group_size_threshold: eps must lie in (0,1)");
    return std::pow(beta / (alpha * eps), 1.0 / gamma);
}

/// Finite-N form (alpha eps/beta + (1-eps) N^-gamma)^(-1/gamma).
inline double group_size_threshold(double alpha, double beta, double gamma, double eps, double n) {
    (void)group_size_threshold(alpha, beta, gamma, eps);
    detail::require_positive(n, "N");
    return std::pow(alpha * eps / beta + (1.0 - eps) * std::pow(n, -gamma), -1.0 / gamma);
}

/// One sweep point.
struct PrecisionRecord {
    int n = 0;
    std::string method;
    std::optional<double> qfi;
    std::optional<double> cr_bound;
    std::optional<double> bayes_cost;
    std::optional<double> asymptote;
    bool converged = false;
    std::optional<double> wall_time_s;
    std::string error; // set when the row failed

    /// Precision the row stands for: the Bayesian cost when present, else the C-R bound.
    [[nodiscard]] std::optional<double> precision() const { return bayes_cost ? bayes_cost : cr_bound; }
};

struct ConvergenceReport {
    std::vector<int> n;
    std::vector<double> ratio;  // precision / asymptote
    std::vector<double> scaled; // N * precision
    double tail_slope = 0.0;    // d log(precision) / d log N over the final decade
    double tail_max_deviation = 0.0;
    bool tail_decreasing = false;
    bool within_tolerance = false; // every tail ratio within tolerance of 1
};

/// Compares records (sorted by N) against a limit over the final decade of N,
/// i.e. the rows with N >= N_max / 10.
inline ConvergenceReport convergence_report(const std::vector<PrecisionRecord>& computed, const AsymptoteSpec& spec,
                                            double tolerance = 0.1) {
    ConvergenceReport r;
    for (const auto& rec : computed) {
        const auto v = rec.precision();
        if (!v || !(*v > 0.0)) continue;
        if (!r.n.empty() && rec.n <= r.n.back()) throw std::domain_error("convergence_report: records must be sorted by N");
        r.n.push_back(rec.n);
        r.ratio.push_back(*v / evaluate(spec, rec.n));
        r.scaled.push_back(rec.n * *v);
    }
    if (r.n.size() < 3) throw std::domain_error("convergence_report: need at least 3 usable records");

    const double cut = r.n.back() / 10.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int k = 0;
    r.tail_decreasing = true;
    for (std::size_t i = 0; i < r.n.size(); ++i) {
        if (r.n[i] < cut) continue;
        const double x = std::log(static_cast<double>(r.n[i])), y = std::log(r.scaled[i] / r.n[i]);
        sx += x, sy += y, sxx += x * x, sxy += x * y, ++k;
        r.tail_max_deviation = std::max(r.tail_max_deviation, std::abs(r.ratio[i] - 1.0));
        if (i > 0 && r.n[i - 1] >= cut && r.ratio[i] > r.ratio[i - 1]) r.tail_decreasing = false;
    }
    const double den = k * sxx - sx * sx;
    r.tail_slope = (k >= 2 && den != 0.0) ? (k * sxy - sx * sy) / den : 0.0;
    r.within_tolerance = r.tail_max_deviation <= tolerance;
    return r;
}

} // namespace qmetro
