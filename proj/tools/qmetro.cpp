// Command-line front end: precision sweeps, particle-number mixtures,
// reference limits and a small-N oracle self-test.

#include "qmetro/qmetro.hpp"
#include "qmetro/testing/brute_force.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace qmetro;

enum Exit { ok = 0, config_failure = 1, io_failure = 2, numeric_failure = 3 };

struct NoiseArgs {
    std::string kind = "none";
    std::optional<double> eta;
    std::optional<double> gamma;
};

NoiseModel make_noise(const NoiseArgs& a) {
    if (a.kind == "none") {
        if (a.eta || a.gamma) throw config_error("--eta/--gamma given but --noise is none");
        return NoiseFree{};
    }
    if (a.kind == "dephasing" || a.kind == "loss") {
        if (!a.eta) throw config_error("--noise " + a.kind + " needs --eta");
        if (a.gamma) throw config_error("--gamma does not apply to --noise " + a.kind);
        if (a.kind == "dephasing") return LocalDephasing{*a.eta};
        return Loss{*a.eta};
    }
    if (!a.gamma) throw config_error("--noise collective needs --gamma");
    if (a.eta) throw config_error("--eta does not apply to --noise collective");
    return CollectiveDephasing{*a.gamma};
}

void add_noise_options(CLI::App* app, NoiseArgs& a) {
    app->add_option("--noise", a.kind, "Noise model")
        ->check(CLI::IsMember({"none", "dephasing", "loss", "collective"}))
        ->capture_default_str();
    app->add_option("--eta", a.eta, "Dephasing or transmission parameter in [0,1]");
    app->add_option("--gamma", a.gamma, "Collective dephasing strength");
}

/// Writes to the file when a path is given, otherwise to stdout.
template <typename F>
void with_output(const std::string& path, F&& write) {
    if (path.empty()) {
        write(std::cout);
        return;
    }
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw io_error("cannot open output file '" + path + "' for writing");
    write(os);
    os.flush();
    if (!os) throw io_error("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// scan

struct ScanArgs {
    NoiseArgs noise;
    int n_min = 1, n_max = 20, n_step = 1, per_decade = 10, reps = 1;
    std::string grid = "linear", format = "csv", out;
    std::vector<std::string> methods{"bayes-flat"};
    std::optional<double> prior_width;
    std::uint64_t seed = IterationConfig{}.seed;
    int max_iters = IterationConfig{}.max_iters, restarts = 1;
    double rel_tol = IterationConfig{}.rel_tol;
    bool timing = false, cold_start = false;
};

int run_scan(const ScanArgs& a) {
    SweepConfig cfg;
    cfg.n_min = a.n_min;
    cfg.n_max = a.n_max;
    cfg.n_step = a.n_step;
    cfg.per_decade = a.per_decade;
    cfg.grid = a.grid == "geometric" ? Grid::geometric : Grid::linear;
    cfg.noise = make_noise(a.noise);
    cfg.methods.clear();
    for (const auto& m : a.methods) cfg.methods.push_back(parse_method(m));
    cfg.prior_width = a.prior_width;
    cfg.repetitions = a.reps;
    cfg.iteration.seed = a.seed;
    cfg.iteration.max_iters = a.max_iters;
    cfg.iteration.rel_tol = a.rel_tol;
    cfg.iteration.restarts = a.restarts;
    cfg.warm_start = !a.cold_start;
    cfg.record_time = a.timing;
    cfg.out_path = a.out;
    cfg.format = a.format == "json" ? Format::json : Format::csv;
    cfg.validate();

    const auto rows = run_sweep(cfg);
    std::size_t failed = 0;
    for (const auto& r : rows) {
        if (r.error.empty()) continue;
        ++failed;
        std::cerr << "row n=" << r.n << " method=" << r.method << " failed: " << r.error << '\n';
    }
    with_output(a.out, [&](std::ostream& os) { emit(rows, cfg.format, os); });

    if (!a.out.empty()) {
        std::vector<std::string> names;
        for (auto m : cfg.methods) names.push_back(to_string(m));
        nlohmann::json meta = {{"seed", cfg.iteration.seed},
                               {"noise", describe(cfg.noise)},
                               {"methods", names},
                               {"grid", grid_points(cfg)},
                               {"repetitions", cfg.repetitions},
                               {"max_iters", cfg.iteration.max_iters},
                               {"rel_tol", cfg.iteration.rel_tol},
                               {"restarts", cfg.iteration.restarts},
                               {"warm_start", cfg.warm_start}};
        if (cfg.prior_width) meta["prior_width"] = *cfg.prior_width;
        with_output(a.out + ".meta.json", [&](std::ostream& os) { os << meta.dump(2) << '\n'; });
    }
    return failed == rows.size() ? numeric_failure : ok;
}

// ---------------------------------------------------------------------------
// indefinite

struct IndefiniteArgs {
    std::string mixture, format = "text", out;
    std::optional<int> vacuum_noon;
    std::optional<double> nbar;
    double prior_width = 0.0;
};

int run_indefinite_cmd(const IndefiniteArgs& a) {
    ParticleNumberMixture mix;
    if (!a.mixture.empty()) {
        if (a.vacuum_noon || a.nbar) throw config_error("use either --mixture or --vacuum-noon/--nbar");
        mix = parse_mixture_file(a.mixture);
    } else {
        if (!a.vacuum_noon || !a.nbar) throw config_error("need --mixture FILE or both --vacuum-noon and --nbar");
        try {
            mix = ParticleNumberMixture::vacuum_plus(*a.vacuum_noon, *a.nbar);
        } catch (const std::domain_error& e) {
            throw config_error(e.what());
        }
    }
    if (!(a.prior_width > 0.0)) throw config_error("--prior-width must be > 0");
    const auto r = run_indefinite(mix, a.prior_width);
    with_output(a.out, [&](std::ostream& os) {
        if (a.format == "json") {
            os << to_json(r).dump(2) << '\n';
            return;
        }
        os << "mean_n " << format_number(r.mean_n) << '\n'
           << "qfi " << format_number(r.qfi) << '\n'
           << "cr_bound " << format_number(r.cr_bound) << '\n'
           << "bayes_bound " << format_number(r.bayes_exact) << '\n'
           << "bayes_bound_definite " << format_number(r.bayes_relaxed) << '\n'
           << "ordered " << (r.ordered ? "true" : "false") << '\n';
        for (const auto& d : r.diagnostics) os << "# " << d << '\n';
    });
    return ok;
}

// ---------------------------------------------------------------------------
// asymptote

struct AsymptoteArgs {
    std::string kind = "bayes-pi", format = "csv", out;
    double eta = 0.7, gamma = 0.02, prior_width = 0.5, lambda_plus = 0.5, lambda_minus = -0.5;
    int n_min = 1, n_max = 100, n_step = 1;
    std::optional<double> alpha, beta, exponent, eps, n_finite;
};

int run_asymptote(const AsymptoteArgs& a) {
    if (a.alpha || a.beta || a.exponent || a.eps) {
        if (!(a.alpha && a.beta && a.exponent && a.eps))
            throw config_error("threshold mode needs --alpha, --beta, --exponent and --eps");
        double v = 0.0;
        try {
            v = a.n_finite ? group_size_threshold(*a.alpha, *a.beta, *a.exponent, *a.eps, *a.n_finite)
                           : group_size_threshold(*a.alpha, *a.beta, *a.exponent, *a.eps);
        } catch (const std::domain_error& e) {
            throw config_error(e.what());
        }
        with_output(a.out, [&](std::ostream& os) { os << format_number(v) << '\n'; });
        return ok;
    }
    AsymptoteSpec spec;
    if (a.kind == "heisenberg") spec = HeisenbergCR{};
    else if (a.kind == "bayes-pi") spec = BayesPi{};
    else if (a.kind == "loss") spec = LossLimit{a.eta};
    else if (a.kind == "dephasing") spec = DephasingLimit{a.eta};
    else if (a.kind == "collective") spec = CollectiveLimit{a.gamma, a.prior_width};
    else spec = GeneralUnitary{a.lambda_plus, a.lambda_minus};
    if (a.n_min < 1 || a.n_max < a.n_min || a.n_step < 1) throw config_error("invalid N range");
    with_output(a.out, [&](std::ostream& os) {
        if (a.format == "json") {
            nlohmann::json arr = nlohmann::json::array();
            for (int n = a.n_min; n <= a.n_max; n += a.n_step)
                arr.push_back({{"n", n}, {"asymptote", std::stod(format_number(evaluate(spec, n)))}});
            os << arr.dump(2) << '\n';
            return;
        }
        os << "n,asymptote\n";
        for (int n = a.n_min; n <= a.n_max; n += a.n_step) os << n << ',' << format_number(evaluate(spec, n)) << '\n';
    });
    return ok;
}

// ---------------------------------------------------------------------------
// selftest

int run_selftest() {
    using namespace qmetro::testing;
    std::mt19937_64 rng(7);
    int failures = 0;
    const auto report = [&](const std::string& name, double err, double tol) {
        const bool pass = err <= tol;
        failures += pass ? 0 : 1;
        std::cout << (pass ? "PASS " : "FAIL ") << name << "  max_err=" << format_number(err) << " tol=" << tol << '\n';
    };

    double cg = 0.0;
    for (int tj1 = 0; tj1 <= 8; ++tj1)
        for (int tj2 = 0; tj2 <= 8; ++tj2) {
            const ClebschGordanTable t(half(tj1), half(tj2));
            for (int tJ = std::abs(tj1 - tj2); tJ <= tj1 + tj2; tJ += 2)
                for (int tm1 = -tj1; tm1 <= tj1; tm1 += 2)
                    for (int tM = -tJ; tM <= tJ; tM += 2) {
                        const int tm2 = tM - tm1;
                        if (std::abs(tm2) > tj2) continue;
                        const double exact =
                            clebsch_gordan({half(tj1), half(tm1), half(tj2), half(tm2), half(tJ), half(tM)});
                        cg = std::max(cg, std::abs(exact - t(half(tm1), half(tJ), half(tM))));
                    }
        }
    report("clebsch-gordan table vs exact sum (j <= 4)", cg, 1e-13);

    double dep = 0.0, dep_qfi = 0.0;
    for (int N = 1; N <= 4; ++N)
        for (double eta : {0.3, 0.7}) {
            const auto s = random_state(N, rng);
            const Eigen::VectorXcd v = embed_symmetric(s);
            const Eigen::MatrixXcd full = dephase_full(v * v.adjoint(), N, eta);
            const auto ref = project_blocks(full, N);
            const auto blk = apply_dephasing(s, eta);
            for (const auto& b : ref.blocks) {
                const auto* mine = blk.find(b.j);
                const double e = mine ? (mine->matrix - b.matrix).cwiseAbs().maxCoeff() : b.matrix.cwiseAbs().maxCoeff();
                dep = std::max(dep, e);
            }
            dep_qfi = std::max(dep_qfi, std::abs(qfi(blk) - qfi_full(full, total_spin(N).jz)));
        }
    report("dephasing blocks vs 2^N Kraus expansion (N <= 4)", dep, 1e-12);
    report("dephasing QFI vs full-space QFI (N <= 4)", dep_qfi, 1e-9);

    double loss = 0.0, loss_qfi = 0.0;
    for (int N = 1; N <= 3; ++N) {
        const auto s = random_state(N, rng);
        const auto d = dilate_loss(s, 0.7);
        const auto mix = apply_loss(s, 0.7);
        for (const auto& c : mix.components) {
            const Eigen::VectorXcd v = dilation_sector(d, c.lost_a, c.lost_b);
            const double p = v.squaredNorm();
            loss = std::max(loss, std::abs(p - c.weight));
            const Eigen::MatrixXcd diff = v * v.adjoint() / p - c.amplitudes * c.amplitudes.adjoint();
            loss = std::max(loss, diff.cwiseAbs().maxCoeff());
        }
        loss_qfi = std::max(loss_qfi, std::abs(qfi_loss(mix) - dilation_qfi_recorded(d)));
    }
    report("loss sectors vs beam-splitter dilation (N <= 3)", loss, 1e-12);
    report("loss QFI vs dilation QFI (N <= 3)", loss_qfi, 1e-9);

    double cov = 0.0;
    for (int N = 1; N <= 4; ++N)
        for (const NoiseModel& nm : {NoiseModel{NoiseFree{}}, NoiseModel{LocalDephasing{0.7}}, NoiseModel{Loss{0.7}}}) {
            const auto c = covariant_cost(N, nm);
            const auto rho = encode(c.optimal_state, nm);
            cov = std::max(cov, std::abs(covariant_cost_quadrature(rho, all_ones_seed(rho), N + 3) - c.cost_squared));
        }
    report("covariant cost vs POVM quadrature (N <= 4)", cov, 1e-12);

    std::cout << (failures == 0 ? "selftest passed" : "selftest FAILED") << '\n';
    return failures == 0 ? ok : numeric_failure;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-N precision limits for phase estimation under noise"};
    app.set_config("--config", "", "Read options from a TOML or INI file");
    app.require_subcommand(1);

    ScanArgs scan;
    auto* s = app.add_subcommand("scan", "Sweep N and emit a precision table");
    add_noise_options(s, scan.noise);
    s->add_option("--n-min", scan.n_min, "Smallest N")->capture_default_str();
    s->add_option("--n-max", scan.n_max, "Largest N")->capture_default_str();
    s->add_option("--n-step", scan.n_step, "Step of the linear grid")->capture_default_str();
    s->add_option("--grid", scan.grid, "Grid type")->check(CLI::IsMember({"linear", "geometric"}))->capture_default_str();
    s->add_option("--per-decade", scan.per_decade, "Points per decade of the geometric grid")->capture_default_str();
    s->add_option("--method", scan.methods, "Comma-separated subset of qfi-opt,bayes-flat,bayes-gauss")
        ->delimiter(',')
        ->capture_default_str();
    s->add_option("--prior-width", scan.prior_width, "Gaussian prior width (bayes-gauss)");
    s->add_option("--reps", scan.reps, "Repetitions k in the Cramer-Rao bound")->capture_default_str();
    s->add_option("--seed", scan.seed, "Seed for optimizer start perturbations")->capture_default_str();
    s->add_option("--max-iters", scan.max_iters, "Iteration cap of the QFI optimizer")->capture_default_str();
    s->add_option("--rel-tol", scan.rel_tol, "Relative QFI change that ends an optimization")->capture_default_str();
    s->add_option("--restarts", scan.restarts, "Independent optimizer runs per point")->capture_default_str();
    s->add_flag("--timing", scan.timing, "Fill wall_time_s (output is then not reproducible)");
    s->add_flag("--cold-start", scan.cold_start, "Start every N from the perturbed sine profile");
    s->add_option("--out", scan.out, "Output file (default stdout); metadata goes to OUT.meta.json");
    s->add_option("--format", scan.format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

    IndefiniteArgs ind;
    auto* i = app.add_subcommand("indefinite", "Bounds for a mixture over particle number");
    i->add_option("--mixture", ind.mixture, "File of 'N p' lines ('#' comments)");
    i->add_option("--vacuum-noon", ind.vacuum_noon, "N of a vacuum + N00N mixture");
    i->add_option("--nbar", ind.nbar, "Mean particle number of the vacuum + N00N mixture");
    i->add_option("--prior-width", ind.prior_width, "Gaussian prior width")->required();
    i->add_option("--format", ind.format, "Output format")->check(CLI::IsMember({"text", "json"}))->capture_default_str();
    i->add_option("--out", ind.out, "Output file (default stdout)");

    AsymptoteArgs asy;
    auto* a = app.add_subcommand("asymptote", "Tabulate a closed-form limit, or the grouping threshold");
    a->add_option("--kind", asy.kind, "Limit")
        ->check(CLI::IsMember({"heisenberg", "bayes-pi", "loss", "dephasing", "collective", "general"}))
        ->capture_default_str();
    a->add_option("--eta", asy.eta, "Noise parameter for loss/dephasing")->capture_default_str();
    a->add_option("--gamma", asy.gamma, "Collective dephasing strength")->capture_default_str();
    a->add_option("--prior-width", asy.prior_width, "Prior width for the collective floor")->capture_default_str();
    a->add_option("--lambda-plus", asy.lambda_plus, "Largest generator eigenvalue")->capture_default_str();
    a->add_option("--lambda-minus", asy.lambda_minus, "Smallest generator eigenvalue")->capture_default_str();
    a->add_option("--n-min", asy.n_min, "Smallest N")->capture_default_str();
    a->add_option("--n-max", asy.n_max, "Largest N")->capture_default_str();
    a->add_option("--n-step", asy.n_step, "N step")->capture_default_str();
    a->add_option("--alpha", asy.alpha, "Threshold: leading QFI coefficient");
    a->add_option("--beta", asy.beta, "Threshold: correction coefficient");
    a->add_option("--exponent", asy.exponent, "Threshold: correction exponent");
    a->add_option("--eps", asy.eps, "Threshold: tolerated fraction in (0,1)");
    a->add_option("--n", asy.n_finite, "Threshold: finite total N (default: N -> infinity)");
    a->add_option("--format", asy.format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    a->add_option("--out", asy.out, "Output file (default stdout)");

    auto* t = app.add_subcommand("selftest", "Check block formulas against brute-force oracles for N <= 4");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return config_failure;
    }

    try {
        if (s->parsed()) return run_scan(scan);
        if (i->parsed()) return run_indefinite_cmd(ind);
        if (a->parsed()) return run_asymptote(asy);
        if (t->parsed()) return run_selftest();
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return config_failure;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return io_failure;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return config_failure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return numeric_failure;
    }
    return ok;
}
