#include <ncanm/bench.hpp>
#include <ncanm/ncanm.hpp>

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace ncanm;
using namespace ncanm::bench;

namespace
{

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

struct Options
{
    std::string config;
    std::string out;
    std::string method;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Options& o, bool with_method)
{
    sub->add_option("--config", o.config, "INI configuration file (defaults apply when omitted)");
    sub->add_option("--out", o.out, "output file (standard output when omitted)");
    sub->add_option("--seed", o.seed, "base seed; overrides experiment.base_seed");
    if (with_method)
        sub->add_option("--method", o.method, "estimator: ncanm, omp, ls, fft, music (comma list for sweep)");
}

ExperimentConfig load(const Options& o)
{
    ExperimentConfig cfg = o.config.empty() ? parse_config("") : load_config(o.config);
    if (o.seed)
        cfg.base_seed = *o.seed;
    if (!o.method.empty()) {
        cfg.methods = bench::detail::parse_list(o.method);
        cfg.validate();
    }
    return cfg;
}

/// Writes to --out when given, otherwise to standard output.
template <typename Fn>
void with_output(const std::string& path, Fn&& fn)
{
    if (path.empty()) {
        fn(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw ConfigError("cannot write '" + path + "'");
    fn(f);
    f.flush();
    if (!f)
        throw ConfigError("error while writing '" + path + "'");
}

int cmd_simulate(const Options& o)
{
    const ExperimentConfig cfg = load(o);
    const TrialScene t = make_trial(cfg, cfg.points().front(), 0);
    with_output(o.out, [&](std::ostream& out) { out << signal_record(t.signal, fnv1a(cfg.source_text)) << '\n'; });
    return kExitOk;
}

int cmd_estimate(const Options& o)
{
    ExperimentConfig cfg = load(o);
    if (cfg.methods.size() != 1)
        throw ConfigError("estimate takes exactly one method");
    const TrialScene t = make_trial(cfg, cfg.points().front(), 0);
    const std::string& m = cfg.methods.front();
    const Index K = t.scene.size();
    std::vector<double> angles;
    if (m == "ncanm")
        angles = solve(t.signal, t.B, t.geometry, trial_solver_config(cfg, t.seed)).angles;
    else if (m == "omp")
        angles = omp_estimate(t.signal.y, t.B, t.geometry, cfg.grid, K).angles;
    else if (m == "ls")
        angles = ls_estimate(t.signal.y, t.B, t.geometry, cfg.grid, K).angles;
    else if (m == "fft")
        angles = fft_estimate(t.signal.y, t.B, t.geometry, K, cfg.fft_zero_pad).angles;
    else
        angles = music_ss_estimate(t.signal.y, t.B, t.geometry, K, cfg.grid).angles;
    std::sort(angles.begin(), angles.end());
    with_output(o.out, [&](std::ostream& out) {
        for (double a : angles)
            out << format_number(a) << '\n';
    });
    return kExitOk;
}

int cmd_sweep(const Options& o)
{
    ExperimentConfig cfg = load(o);
    const std::string path = o.out.empty() ? cfg.output_path : o.out;
    const std::vector<SweepResult> res = run_experiment(cfg);
    if (path.empty()) {
        if (cfg.format == OutputFormat::Csv)
            write_csv(std::cout, to_rows(res));
        else
            write_jsonl(std::cout, res);
    } else {
        emit_results(res, cfg.format, path);
    }
    if (!cfg.records_path.empty())
        with_output(cfg.records_path, [&](std::ostream& out) { write_records_jsonl(out, res, cfg.timing); });
    return kExitOk;
}

/// Mean per-angle bound over the configured trials at every sweep point.
int cmd_crlb(const Options& o)
{
    const ExperimentConfig cfg = load(o);
    const std::size_t K = cfg.scenario.angles_deg.size();
    with_output(o.out, [&](std::ostream& out) {
        out << "axis_name,axis_value,angle_deg,crlb_deg2,crlb_deg,method\n";
        for (double v : cfg.points()) {
            std::vector<double> sum(K, 0.0);
            bool diagonal = false;
            for (Index t = 0; t < cfg.trials; ++t) {
                const TrialScene s = make_trial(cfg, v, t);
                if (!(s.signal.noise_variance > 0.0))
                    throw NumericalError("crlb: noiseless scenario has no finite bound");
                const CrlbReport r =
                    crlb(CrlbModel::unit_power(s.geometry, s.B, s.scene.angles_deg, s.signal.noise_variance));
                diagonal = diagonal || r.method == CrlbMethod::DiagonalBound;
                for (std::size_t k = 0; k < K; ++k)
                    sum[k] += r.crlb_theta_deg2[static_cast<Index>(k)];
            }
            for (std::size_t k = 0; k < K; ++k) {
                const double mean = sum[k] / static_cast<double>(cfg.trials);
                out << to_string(cfg.axis) << ',' << format_number(v) << ',' << format_number(cfg.scenario.angles_deg[k])
                    << ',' << format_number(mean) << ',' << format_number(std::sqrt(mean)) << ','
                    << (diagonal ? "diagonal" : "schur") << '\n';
            }
        }
    });
    return kExitOk;
}

struct Tally
{
    int passed = 0;
    int failed = 0;

    void record(const std::string& suite, bool ok, const std::string& detail)
    {
        (ok ? passed : failed) += 1;
        std::cout << (ok ? "PASS " : "FAIL ") << suite << ": " << detail << '\n';
    }
};

AtomBank random_bank(Index S, Rng& rng)
{
    RealVector c(S), b(S), t(S);
    for (Index k = 0; k < S; ++k) {
        c[k] = rng.uniform_open0();
        b[k] = rng.uniform(0.0, 2.0 * kPi);
        t[k] = rng.uniform(-60.0, 60.0);
    }
    return AtomBank(c, b, t);
}

double fd_relative_error(const AtomBank& bank, const ComplexVector& y, const ComplexMatrix& B, const ArrayGeometry& g)
{
    const Gradients an = evaluate(bank, y, B, g);
    const double h = 1e-6;
    double worst = 0.0;
    for (int block = 0; block < 3; ++block) {
        RealVector fd = RealVector::Zero(bank.size());
        for (Index k = 0; k < bank.size(); ++k) {
            AtomBank up = bank, dn = bank;
            RealVector& u = block == 0 ? up.c : block == 1 ? up.beta : up.theta;
            RealVector& d = block == 0 ? dn.c : block == 1 ? dn.beta : dn.theta;
            const double step = block == 2 ? h * kRadToDeg : h;
            u[k] += step;
            d[k] -= step;
            fd[k] = (objective(up, y, B, g) - objective(dn, y, B, g)) / (2.0 * h);
        }
        const RealVector& a = block == 0 ? an.c : block == 1 ? an.beta : an.theta;
        worst = std::max(worst, (a - fd).norm() / std::max(fd.norm(), 1e-300));
    }
    return worst;
}

int cmd_selftest(const Options& o)
{
    ExperimentConfig cfg = load(o);
    Tally tally;
    const std::uint64_t base = cfg.base_seed;

    // Gradient suite: analytic gradients against central differences.
    {
        Rng rng(derive_seed(base, 101));
        int ok = 0;
        const int states = 20;
        double worst = 0.0;
        for (int i = 0; i < states; ++i) {
            ExperimentConfig c = cfg;
            c.base_seed = base + static_cast<std::uint64_t>(i);
            const TrialScene t = make_trial(c, c.points().front(), 0);
            const double e = fd_relative_error(random_bank(20, rng), t.signal.y, t.B, t.geometry);
            worst = std::max(worst, e);
            ok += e < 1e-5;
        }
        tally.record("gradient", ok == states,
                     std::to_string(ok) + "/" + std::to_string(states) + " states, worst relative error " +
                         format_number(worst));
    }

    // Descent suite: objective traces are monotone outside perturbation steps.
    // Proposition-1 suite: sampled strong-convexity and Lipschitz inequalities around the solution.
    {
        const int solves = 5;
        int descent_ok = 0;
        int prop_ok = 0;
        for (int i = 0; i < solves; ++i) {
            const TrialScene t = make_trial(cfg, cfg.points().front(), i);
            const DoaEstimate e = solve(t.signal, t.B, t.geometry, trial_solver_config(cfg, t.seed));
            descent_ok += check_descent(e.diagnostics);
            if (e.bank.active_count() == 0)
                continue;
            Rng rng(derive_seed(t.seed, 102));
            const Proposition1Sample sample = proposition1_sample(t.signal.y, t.B, t.geometry, e.bank, 200, rng);
            const auto [l, L] = sample.bounds();
            prop_ok += L > 0.0 && sample.check(l / L).passed();
        }
        tally.record("descent", descent_ok == solves, std::to_string(descent_ok) + "/" + std::to_string(solves) + " solves");
        tally.record("proposition1", prop_ok == solves, std::to_string(prop_ok) + "/" + std::to_string(solves) + " solves");
    }

    std::cout << "selftest: " << tally.passed << " passed, " << tally.failed << " failed\n";
    return tally.failed == 0 ? kExitOk : kExitNumerical;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"IRS-aided single-receiver gridless DOA toolkit", "ncanm"};
    app.require_subcommand(1, 1);
    Options o;
    CLI::App* simulate = app.add_subcommand("simulate", "synthesize one scene and dump the received signal as JSON");
    CLI::App* estimate = app.add_subcommand("estimate", "estimate the angles of one scene with one method");
    CLI::App* sweep = app.add_subcommand("sweep", "run a Monte Carlo experiment and write the results");
    CLI::App* bound = app.add_subcommand("crlb", "Cramer-Rao bound per angle across the sweep");
    CLI::App* selftest = app.add_subcommand("selftest", "run the gradient, descent and Proposition-1 suites");
    add_common(simulate, o, false);
    add_common(estimate, o, true);
    add_common(sweep, o, true);
    add_common(bound, o, false);
    add_common(selftest, o, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kExitConfig;
    }

    try {
        if (*simulate)
            return cmd_simulate(o);
        if (*estimate)
            return cmd_estimate(o);
        if (*sweep)
            return cmd_sweep(o);
        if (*bound)
            return cmd_crlb(o);
        return cmd_selftest(o);
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return kExitNumerical;
    }
}
