#pragma once

// Sweeps over N for the three precision pipelines, table output, and the
// particle-number mixture report.

#include "qmetro/asymptotics.hpp"
#include "qmetro/bayes.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace qmetro {

class config_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class io_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class parse_error : public config_error {
  public:
    parse_error(const std::string& source, int line, const std::string& what)
        : config_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
    [[nodiscard]] int line() const { return line_; }

  private:
    int line_;
};

enum class Method { qfi_opt, bayes_flat, bayes_gauss };
enum class Grid { linear, geometric };
enum class Format { csv, json };

inline std::string to_string(Method m) {
    switch (m) {
    case Method::qfi_opt: return "qfi-opt";
    case Method::bayes_flat: return "bayes-flat";
    case Method::bayes_gauss: return "bayes-gauss";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    if (s == "qfi-opt") return Method::qfi_opt;
    if (s == "bayes-flat") return Method::bayes_flat;
    if (s == "bayes-gauss") return Method::bayes_gauss;
    throw config_error("unknown method '" + s + "' (expected qfi-opt, bayes-flat or bayes-gauss)");
}

struct SweepConfig {
    int n_min = 1;
    int n_max = 20;
    int n_step = 1;
    Grid grid = Grid::linear;
    int per_decade = 10; // geometric grid density
    NoiseModel noise = NoiseFree{};
    std::vector<Method> methods{Method::bayes_flat};
    std::optional<double> prior_width;
    int repetitions = 1;
    IterationConfig iteration;
    bool warm_start = true;   // seed each N from the previous optimum
    bool record_time = false; // wall_time_s stays empty so output is reproducible
    std::string out_path;     // empty: caller handles the stream
    Format format = Format::csv;

    void validate() const {
        if (n_min < 1) throw config_error("n-min must be >= 1");
        if (n_max < n_min) throw config_error("n-max must be >= n-min");
        if (grid == Grid::linear && n_step < 1) throw config_error("n-step must be >= 1");
        if (grid == Grid::geometric && per_decade < 1) throw config_error("per-decade must be >= 1");
        if (methods.empty()) throw config_error("at least one method is required");
        const bool gauss = std::find(methods.begin(), methods.end(), Method::bayes_gauss) != methods.end();
        if (gauss && !prior_width) throw config_error("bayes-gauss needs --prior-width");
        if (!gauss && prior_width) throw config_error("--prior-width is only used by bayes-gauss");
        if (prior_width && !(*prior_width > 0.0)) throw config_error("prior width must be > 0");
        if (repetitions < 1) throw config_error("reps must be >= 1");
        try {
            qmetro::validate(noise);
            iteration.validate();
        } catch (const std::domain_error& e) {
            throw config_error(e.what());
        }
    }
};

/// Linear grid n_min, n_min+step, ... or a log-spaced grid with per_decade
/// points per factor of ten (rounded, duplicates dropped). Both include n_max.
inline std::vector<int> grid_points(const SweepConfig& cfg) {
    std::set<int> pts;
    if (cfg.grid == Grid::linear) {
        for (int n = cfg.n_min; n <= cfg.n_max; n += cfg.n_step) pts.insert(n);
    } else {
        const double lo = std::log10(cfg.n_min), hi = std::log10(cfg.n_max);
        const int steps = std::max(1, static_cast<int>(std::ceil((hi - lo) * cfg.per_decade)));
        for (int i = 0; i <= steps; ++i)
            pts.insert(static_cast<int>(std::lround(std::pow(10.0, lo + (hi - lo) * i / steps))));
    }
    pts.insert(cfg.n_max);
    return {pts.begin(), pts.end()};
}

/// Reference limit for a method under a noise model, when one is known.
inline std::optional<AsymptoteSpec> reference_limit(Method method, const NoiseModel& noise,
                                                    std::optional<double> prior_width) {
    return std::visit(
        [&](const auto& n) -> std::optional<AsymptoteSpec> {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, NoiseFree>) {
                if (method == Method::qfi_opt) return HeisenbergCR{};
                return BayesPi{};
            } else if constexpr (std::is_same_v<T, LocalDephasing>) {
                if (n.eta <= 0.0 || n.eta >= 1.0) return std::nullopt;
                return DephasingLimit{n.eta};
            } else if constexpr (std::is_same_v<T, Loss>) {
                if (n.eta <= 0.0 || n.eta >= 1.0) return std::nullopt;
                return LossLimit{n.eta};
            } else {
                if (method == Method::bayes_gauss && prior_width && n.gamma > 0.0)
                    return CollectiveLimit{n.gamma, *prior_width};
                return std::nullopt;
            }
        },
        noise);
}

/// Fails early if the output file cannot be opened for writing.
inline void check_writable(const std::string& path) {
    if (path.empty()) return;
    std::ofstream probe(path, std::ios::app);
    if (!probe) throw io_error("cannot open output file '" + path + "' for writing");
}

/// QFI values below this times N^2 are rounding noise.
inline constexpr double qfi_zero = 1e-12;

/// One row per (N, method), ordered by N then method. A failing row keeps
/// its error message and empty numeric fields; the sweep carries on.
inline std::vector<PrecisionRecord> run_sweep(const SweepConfig& cfg) {
    cfg.validate();
    check_writable(cfg.out_path);
    using clock = std::chrono::steady_clock;

    std::vector<PrecisionRecord> rows;
    std::optional<SymmetricPureState> warm_qfi, warm_gauss;
    for (int n : grid_points(cfg)) {
        for (Method method : cfg.methods) {
            PrecisionRecord rec;
            rec.n = n;
            rec.method = to_string(method);
            if (auto lim = reference_limit(method, cfg.noise, cfg.prior_width)) rec.asymptote = evaluate(*lim, n);
            const auto t0 = clock::now();
            try {
                const PhaseCovariantChannel physical(n, cfg.noise);
                switch (method) {
                case Method::qfi_opt: {
                    std::optional<SymmetricPureState> start;
                    if (cfg.warm_start && warm_qfi) start = interpolate_state(*warm_qfi, n);
                    const auto tr = optimize_qfi(physical, cfg.iteration, start);
                    if (tr.qfi <= qfi_zero * n * n) throw numerical_error("QFI vanishes to working precision");
                    warm_qfi = tr.final_state;
                    rec.qfi = tr.qfi;
                    rec.cr_bound = cr_bound(tr.qfi, cfg.repetitions);
                    rec.converged = tr.converged;
                    break;
                }
                case Method::bayes_flat: {
                    const auto cov = covariant_cost(n, cfg.noise);
                    const double f = qfi_and_gradient(physical, cov.optimal_state.amplitudes).qfi;
                    rec.bayes_cost = cov.cost;
                    rec.qfi = f;
                    if (f > qfi_zero * n * n) rec.cr_bound = cr_bound(f, cfg.repetitions);
                    rec.converged = true;
                    break;
                }
                case Method::bayes_gauss: {
                    std::optional<SymmetricPureState> start;
                    if (cfg.warm_start && warm_gauss) start = interpolate_state(*warm_gauss, n);
                    const auto g = gaussian_prior_cost(n, *cfg.prior_width, cfg.noise, cfg.iteration, start);
                    warm_gauss = g.optimal_state;
                    const double f = qfi_and_gradient(physical, g.optimal_state.amplitudes).qfi;
                    rec.bayes_cost = g.cost;
                    rec.qfi = f;
                    rec.cr_bound = bayesian_cr_bound(GaussianPrior{*cfg.prior_width}, cfg.repetitions * f);
                    rec.converged = g.converged && !g.clamped;
                    break;
                }
                }
            } catch (const std::exception& e) {
                rec = PrecisionRecord{n, to_string(method), {}, {}, {}, rec.asymptote, false, {}, e.what()};
            }
            if (cfg.record_time) rec.wall_time_s = std::chrono::duration<double>(clock::now() - t0).count();
            rows.push_back(std::move(rec));
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Output

inline constexpr const char* csv_header = "n,method,qfi,cr_bound,bayes_cost,asymptote,converged,wall_time_s";

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

namespace detail {
inline nlohmann::json json_number(const std::optional<double>& v) {
    if (!v || !std::isfinite(*v)) return nullptr;
    return std::stod(format_number(*v));
}
inline std::string csv_number(const std::optional<double>& v) {
    return (v && std::isfinite(*v)) ? format_number(*v) : std::string();
}
} // namespace detail

inline nlohmann::json to_json(const PrecisionRecord& r) {
    return {{"n", r.n},
            {"method", r.method},
            {"qfi", detail::json_number(r.qfi)},
            {"cr_bound", detail::json_number(r.cr_bound)},
            {"bayes_cost", detail::json_number(r.bayes_cost)},
            {"asymptote", detail::json_number(r.asymptote)},
            {"converged", r.converged},
            {"wall_time_s", detail::json_number(r.wall_time_s)}};
}

inline PrecisionRecord record_from_json(const nlohmann::json& j) {
    const auto num = [&](const char* k) -> std::optional<double> {
        if (!j.contains(k) || j.at(k).is_null()) return std::nullopt;
        return j.at(k).get<double>();
    };
    PrecisionRecord r;
    r.n = j.at("n").get<int>();
    r.method = j.at("method").get<std::string>();
    r.qfi = num("qfi");
    r.cr_bound = num("cr_bound");
    r.bayes_cost = num("bayes_cost");
    r.asymptote = num("asymptote");
    r.converged = j.at("converged").get<bool>();
    r.wall_time_s = num("wall_time_s");
    return r;
}

inline void emit(const std::vector<PrecisionRecord>& records, Format format, std::ostream& os) {
    if (records.empty()) throw std::domain_error("emit: no records");
    if (format == Format::csv) {
        os << csv_header << '\n';
        for (const auto& r : records)
            os << r.n << ',' << r.method << ',' << detail::csv_number(r.qfi) << ',' << detail::csv_number(r.cr_bound)
               << ',' << detail::csv_number(r.bayes_cost) << ',' << detail::csv_number(r.asymptote) << ','
               << (r.converged ? "true" : "false") << ',' << detail::csv_number(r.wall_time_s) << '\n';
    } else {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : records) arr.push_back(to_json(r));
        os << arr.dump(2) << '\n';
    }
}

inline void emit(const std::vector<PrecisionRecord>& records, Format format, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw io_error("cannot open output file '" + path + "' for writing");
    emit(records, format, os);
    os.flush();
    if (!os) throw io_error("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Particle-number mixtures

/// Reads "N p" pairs, one per line; '#' starts a comment.
inline ParticleNumberMixture parse_mixture(std::istream& in, const std::string& source = "<mixture>") {
    ParticleNumberMixture mix;
    std::string line;
    int lineno = 0, last = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string a, b, extra;
        if (!(ss >> a)) continue;
        if (!(ss >> b)) throw parse_error(source, lineno, "expected 'N p'");
        if (ss >> extra) throw parse_error(source, lineno, "unexpected trailing field '" + extra + "'");
        int n = 0;
        double p = 0.0;
        try {
            std::size_t used = 0;
            n = std::stoi(a, &used);
            if (used != a.size()) throw std::invalid_argument(a);
            p = std::stod(b, &used);
            if (used != b.size()) throw std::invalid_argument(b);
        } catch (const std::exception&) {
            throw parse_error(source, lineno, "could not read numbers from '" + a + " " + b + "'");
        }
        if (n < 0) throw parse_error(source, lineno, "particle number must be >= 0");
        if (!(p >= 0.0 && p <= 1.0)) throw parse_error(source, lineno, "probability must lie in [0,1]");
        mix.entries.emplace_back(n, p);
        last = lineno;
    }
    if (mix.entries.empty()) throw parse_error(source, std::max(lineno, 1), "mixture has no entries");
    try {
        mix.validate();
    } catch (const std::domain_error& e) {
        throw parse_error(source, last, e.what());
    }
    return mix;
}

inline ParticleNumberMixture parse_mixture_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot read mixture file '" + path + "'");
    return parse_mixture(in, path);
}

struct IndefiniteReport {
    double mean_n = 0.0;
    double qfi = 0.0;      // sum_N p_N N^2 (noise-free N00N components)
    double cr_bound = 0.0; // 1/sqrt(F)
    double bayes_exact = 0.0;
    double bayes_relaxed = 0.0; // value of a definite state with N = mean_n
    bool ordered = false;
    Diagnostics diagnostics;
};

inline IndefiniteReport run_indefinite(const ParticleNumberMixture& mix, double delta0) {
    mix.validate();
    std::map<int, double> per_n;
    for (const auto& [n, p] : mix.entries) per_n[n] = static_cast<double>(n) * n;
    IndefiniteReport r;
    r.mean_n = mix.mean_n();
    r.qfi = mixture_qfi(mix, per_n);
    r.cr_bound = r.qfi > 0.0 ? cr_bound(r.qfi) : std::numeric_limits<double>::infinity();
    const auto b = indefinite_bayes_bound(mix, delta0);
    r.bayes_exact = b.exact;
    r.bayes_relaxed = b.relaxed;
    r.ordered = b.ordered;
    r.diagnostics = b.diagnostics;
    if (delta0 >= 1.0) r.diagnostics.push_back("prior width is not small against pi");
    return r;
}

inline nlohmann::json to_json(const IndefiniteReport& r) {
    return {{"mean_n", detail::json_number(r.mean_n)},
            {"qfi", detail::json_number(r.qfi)},
            {"cr_bound", detail::json_number(r.cr_bound)},
            {"bayes_bound", detail::json_number(r.bayes_exact)},
            {"bayes_bound_definite", detail::json_number(r.bayes_relaxed)},
            {"ordered", r.ordered},
            {"diagnostics", r.diagnostics}};
}

} // namespace qmetro
