// Acceptance checks, one per invocation: `acceptance --cli PATH K` prints a
// single PASS/FAIL line for criterion K and exits nonzero on failure.

#include "qmetro/qmetro.hpp"
#include "qmetro/testing/brute_force.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

namespace {

using namespace qmetro;
namespace bf = qmetro::testing;
using clock_type = std::chrono::steady_clock;

constexpr double pi = std::numbers::pi;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (ok) return;
        if (pass) detail.clear();
        if (!detail.empty()) detail += "; ";
        detail += what;
        pass = false;
    }
    void note(const std::string& s) {
        if (!pass) return;
        if (!detail.empty()) detail += "; ";
        detail += s;
    }
};

std::string fmt(const char* f, auto... v) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, v...);
    return buf;
}

std::string cli_path;

std::string run_cli(const std::string& args) {
    const std::string cmd = "\"" + cli_path + "\" " + args + " 2>/dev/null";
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) throw std::runtime_error("cannot start " + cli_path);
    std::string out;
    char buf[4096];
    while (std::size_t k = std::fread(buf, 1, sizeof buf, p)) out.append(buf, k);
    if (pclose(p) != 0) throw std::runtime_error("CLI failed: " + args);
    return out;
}

// ---------------------------------------------------------------------------

Outcome covariant_noise_free() {
    Outcome o;
    double worst = 0.0;
    for (int N = 1; N <= 200; ++N) {
        const double exact = std::sqrt(2.0 - 2.0 * std::cos(pi / (N + 2.0)));
        worst = std::max(worst, std::abs(covariant_cost(N, NoiseFree{}).cost - exact));
    }
    o.require(worst <= 1e-10, fmt("max |cost - analytic| = %.3g > 1e-10", worst));
    const double scaled = 200.0 * covariant_cost(200, NoiseFree{}).cost / pi;
    o.require(std::abs(scaled - 1.0) <= 0.02, fmt("N cost / pi at N=200 is %.6f", scaled));
    o.note(fmt("max deviation %.2g, N cost/pi(200) = %.5f", worst, scaled));
    return o;
}

Outcome heisenberg_qfi() {
    Outcome o;
    double worst = 0.0;
    int worst_n = 0;
    for (int N = 1; N <= 50; ++N) {
        const double rel = std::abs(qfi_iterate(N, NoiseFree{}).qfi / (double(N) * N) - 1.0);
        if (rel > worst) worst = rel, worst_n = N;
    }
    o.require(worst <= 1e-8, fmt("relative deviation %.3g at N=%d", worst, worst_n));
    o.note(fmt("max relative deviation %.2g (N=%d)", worst, worst_n));
    return o;
}

/// Row-wise ordering bayes >= cr >= limit and monotone decrease of bayes/cr.
Outcome flat_prior_convergence(const NoiseModel& noise) {
    Outcome o;
    SweepConfig cfg;
    cfg.n_min = 1;
    cfg.n_max = 120;
    cfg.noise = noise;
    cfg.methods = {Method::qfi_opt, Method::bayes_flat};
    const auto rows = run_sweep(cfg);

    std::vector<int> ns;
    std::vector<double> ratio;
    std::vector<std::string> order_fail;
    for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
        const auto& q = rows[i];
        const auto& b = rows[i + 1];
        if (!q.error.empty() || !b.error.empty()) {
            o.require(false, fmt("N=%d failed: %s", q.n, (q.error + b.error).c_str()));
            continue;
        }
        const double cr = *q.cr_bound, cost = *b.bayes_cost, lim = *q.asymptote;
        if (!(cost >= cr && cr >= lim))
            order_fail.push_back(fmt("N=%d bayes %.4f cr %.4f limit %.4f", q.n, cost, cr, lim));
        ns.push_back(q.n);
        ratio.push_back(cost / cr);
    }
    if (!order_fail.empty())
        o.require(false, fmt("ordering broken in %zu rows, first %s", order_fail.size(), order_fail.front().c_str()));

    int rising = 0, first_rise = 0;
    for (std::size_t i = 1; i < ns.size(); ++i) {
        if (ns[i - 1] < 5) continue;
        if (ratio[i] > ratio[i - 1]) {
            if (!rising) first_rise = ns[i];
            ++rising;
        }
    }
    o.require(rising == 0, fmt("bayes/cr rises at %d points from N>=5, first at N=%d", rising, first_rise));
    const double last = ratio.back();
    o.require(last <= 1.10, fmt("bayes/cr at N=120 is %.4f", last));
    o.note(fmt("bayes/cr at N=120 is %.4f", last));
    return o;
}

Outcome dephasing_convergence() { return flat_prior_convergence(LocalDephasing{0.7}); }
Outcome loss_convergence() { return flat_prior_convergence(Loss{0.7}); }

Outcome gaussian_prior_pi() {
    Outcome o;
    const int N = 150;
    std::vector<double> scaled;
    for (double d0 : {0.2, 0.5}) {
        const auto g = gaussian_prior_cost(N, d0, NoiseFree{});
        scaled.push_back(N * g.cost / pi);
        o.require(std::abs(scaled.back() - 1.0) <= 0.10, fmt("delta0=%.1f: N cost/pi = %.5f", d0, scaled.back()));
    }
    const double gap = std::abs(scaled[0] - scaled[1]) / std::max(scaled[0], scaled[1]);
    o.require(gap <= 0.03, fmt("delta0 curves differ by %.2f%% at N=150 (N cost/pi %.5f vs %.5f)", 100 * gap,
                               scaled[0], scaled[1]));
    o.note(fmt("N cost/pi = %.5f, %.5f", scaled[0], scaled[1]));
    return o;
}

Outcome collective_floor() {
    Outcome o;
    const int N = 200;
    const double gamma = 0.02;
    std::vector<double> floors;
    for (double d0 : {0.5, 0.1}) {
        const double floor = evaluate(CollectiveLimit{gamma, d0}, N);
        const double cost = gaussian_prior_cost(N, d0, CollectiveDephasing{gamma}).cost;
        const double rel = std::abs(cost / floor - 1.0);
        o.require(rel <= 0.02, fmt("delta0=%.1f: cost %.6f vs floor %.6f", d0, cost, floor));
        o.note(fmt("delta0=%.1f cost/floor %.4f", d0, cost / floor));
        floors.push_back(floor);
    }
    o.require(floors[0] - floors[1] > 0.02 * floors[0], "floor does not move with the prior width");
    return o;
}

Outcome brute_force_channels() {
    Outcome o;
    std::mt19937_64 rng(7);
    double entry = 0.0, qrel = 0.0, loss = 0.0;
    for (int N = 1; N <= 4; ++N) {
        const auto jz = bf::total_spin(N).jz;
        for (double eta : {0.3, 0.7})
            for (int t = 0; t < 4; ++t) {
                const auto s = t == 0 ? SymmetricPureState::noon(N) : bf::random_state(N, rng);
                const Eigen::VectorXcd v = bf::embed_symmetric(s);
                const Eigen::MatrixXcd full = bf::dephase_full(v * v.adjoint(), N, eta);
                const auto ref = bf::project_blocks(full, N);
                const auto got = apply_dephasing(s, eta);
                for (const auto& rb : ref.blocks) {
                    const auto* gb = got.find(rb.j);
                    const double d = gb ? (gb->matrix - rb.matrix).cwiseAbs().maxCoeff() : rb.matrix.cwiseAbs().maxCoeff();
                    entry = std::max(entry, d);
                }
                const double fr = bf::qfi_full(full, jz);
                qrel = std::max(qrel, std::abs(qfi(got) - fr) / std::max(fr, 1e-300));
            }
    }
    for (int N = 1; N <= 2; ++N)
        for (double eta : {0.3, 0.7})
            for (int t = 0; t < 4; ++t) {
                const auto s = bf::random_state(N, rng);
                const auto d = bf::dilate_loss(s, eta);
                const auto mix = apply_loss(s, eta);
                for (int la = 0; la <= N; ++la)
                    for (int lb = 0; la + lb <= N; ++lb) {
                        const Eigen::VectorXcd r = bf::dilation_sector(d, la, lb);
                        Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(r.size(), r.size());
                        for (const auto& c : mix.components)
                            if (c.lost_a == la && c.lost_b == lb) g = c.weight * (c.amplitudes * c.amplitudes.adjoint());
                        loss = std::max(loss, (g - r * r.adjoint()).cwiseAbs().maxCoeff());
                    }
                const double fr = bf::dilation_qfi_recorded(d);
                qrel = std::max(qrel, std::abs(qfi_loss(mix) - fr) / std::max(fr, 1e-300));
            }
    o.require(entry <= 1e-12, fmt("dephasing entries differ by %.3g", entry));
    o.require(loss <= 1e-12, fmt("loss sectors differ by %.3g", loss));
    o.require(qrel <= 1e-9, fmt("QFI relative difference %.3g", qrel));
    o.note(fmt("entries %.1g, loss %.1g, QFI %.1g", entry, loss, qrel));
    return o;
}

Outcome fidelity_qfi() {
    Outcome o;
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> pick_n(1, 10);
    const std::vector<NoiseModel> models{NoiseFree{}, LocalDephasing{0.3}, LocalDephasing{0.7}, Loss{0.5},
                                         CollectiveDephasing{0.05}};
    double worst = 0.0;
    std::string where;
    for (int k = 0; k < 20; ++k) {
        const int N = pick_n(rng);
        const auto s = bf::random_state(N, rng);
        for (const auto& nm : models) {
            const double f = qfi(encode(s, nm));
            const double g = fidelity_qfi_check(s, nm, 1e-3);
            const double rel = std::abs(g - f) / f;
            if (rel > worst) worst = rel, where = describe(nm) + fmt(" N=%d", N);
        }
    }
    o.require(worst <= 1e-3, fmt("relative deviation %.3g (%s)", worst, where.c_str()));
    o.note(fmt("max relative deviation %.2g", worst));
    return o;
}

Outcome indefinite_number() {
    Outcome o;
    double worst = 0.0;
    for (double nbar : {1.0, 5.0, 10.0, 50.0})
        for (int N : {50, 100, 1000, 10000}) {
            const auto mix = ParticleNumberMixture::vacuum_plus(N, nbar);
            const double f = run_indefinite(mix, 0.5).qfi;
            worst = std::max(worst, std::abs(f / (nbar * N) - 1.0));
        }
    o.require(worst <= 1e-12, fmt("vacuum+N00N QFI deviates from nbar N by %.3g", worst));

    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> count(2, 5), pick_n(0, 1000);
    std::uniform_real_distribution<double> u(0.0, 1.0), width(0.1, 1.0);
    int violations = 0;
    std::string first;
    for (int k = 0; k < 100; ++k) {
        ParticleNumberMixture mix;
        const int c = count(rng);
        double total = 0.0;
        for (int i = 0; i < c; ++i) {
            const double w = -std::log(1.0 - u(rng));
            mix.entries.emplace_back(pick_n(rng), w);
            total += w;
        }
        for (auto& e : mix.entries) e.second /= total;
        const double d0 = width(rng);
        const auto b = indefinite_bayes_bound(mix, d0);
        if (!b.ordered && violations++ == 0) first = fmt("nbar=%.1f delta0=%.2f", b.mean_n, d0);
    }
    o.require(violations == 0, fmt("exact < relaxed for %d of 100 random mixtures, first %s", violations, first.c_str()));

    std::vector<double> cr, bayes, definite;
    for (int N : {100, 1000, 10000, 100000}) {
        const auto j = nlohmann::json::parse(
            run_cli(fmt("indefinite --vacuum-noon %d --nbar 10 --prior-width 0.5 --format json", N)));
        cr.push_back(j.at("cr_bound").get<double>());
        const double expect = 1.0 / std::sqrt(10.0 * N);
        o.require(std::abs(cr.back() / expect - 1.0) <= 1e-9, fmt("CLI cr_bound %.6g at N=%d, expected %.6g", cr.back(), N, expect));
        bayes.push_back(j.at("bayes_bound").get<double>());
        definite.push_back(j.at("bayes_bound_definite").get<double>());
    }
    for (std::size_t i = 0; i < cr.size(); ++i) {
        o.require(bayes[i] >= definite[i], fmt("CLI bayes_bound %.6f below definite %.6f", bayes[i], definite[i]));
        if (i) o.require(cr[i] < cr[i - 1], "CLI cr_bound does not decrease with N");
    }
    o.note(fmt("cr_bound %.2g -> %.2g, bayes %.4f >= %.4f", cr.front(), cr.back(), bayes.back(), definite.back()));
    return o;
}

Outcome group_threshold() {
    Outcome o;
    struct Point {
        double alpha, beta, gamma, eps, expected;
    };
    const Point pts[] = {{1, 1, 1, 0.1, 10}, {1, 4, 2, 0.01, 20}, {2, 1, 1, 0.5, 1}, {1, 8, 3, 0.125, 4},
                         {0.5, 2, 0.5, 0.25, 256}};
    double worst = 0.0;
    for (const auto& p : pts) worst = std::max(worst, std::abs(group_size_threshold(p.alpha, p.beta, p.gamma, p.eps) - p.expected));
    o.require(worst <= 1e-12, fmt("max deviation %.3g", worst));
    o.note(fmt("max deviation %.1g", worst));
    return o;
}

struct Criterion {
    const char* label;
    double budget_s;
    std::function<Outcome()> run;
};

const std::map<int, Criterion>& criteria() {
    static const std::map<int, Criterion> c{
        {1, {"noise-free covariant cost", 10, covariant_noise_free}},
        {2, {"Heisenberg QFI", 30, heisenberg_qfi}},
        {3, {"dephasing convergence", 300, dephasing_convergence}},
        {4, {"loss convergence", 300, loss_convergence}},
        {5, {"Gaussian prior pi/N", 300, gaussian_prior_pi}},
        {6, {"collective dephasing floor", 120, collective_floor}},
        {7, {"brute-force channel oracle", 10, brute_force_channels}},
        {8, {"fidelity QFI check", 10, fidelity_qfi}},
        {9, {"indefinite particle number", 5, indefinite_number}},
        {10, {"group size threshold", 1, group_threshold}},
    };
    return c;
}

} // namespace

int main(int argc, char** argv) {
    int which = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--cli" && i + 1 < argc) cli_path = argv[++i];
        else which = std::atoi(argv[i]);
    }
    const auto it = criteria().find(which);
    if (it == criteria().end() || cli_path.empty()) {
        std::cerr << "usage: acceptance --cli PATH K   (K = 1..10)\n";
        return 2;
    }
    const auto& c = it->second;
    const auto t0 = clock_type::now();
    Outcome o;
    try {
        o = c.run();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
    o.require(secs <= c.budget_s, fmt("took %.1f s, budget %.0f s", secs, c.budget_s));
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << which << " (" << c.label << "): " << o.detail
              << fmt(" [%.1f s]", secs) << std::endl;
    return o.pass ? 0 : 1;
}
