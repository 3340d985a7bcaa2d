#ifndef NCANM_BENCH_EXPERIMENT_HPP
#define NCANM_BENCH_EXPERIMENT_HPP

#include <ncanm/baselines.hpp>
#include <ncanm/bench/config.hpp>
#include <ncanm/bench/metrics.hpp>
#include <ncanm/crlb.hpp>
#include <ncanm/random.hpp>
#include <ncanm/signal_model.hpp>
#include <ncanm/solver.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace ncanm::bench
{

/// Sub-stream tags for derive_seed; noise uses the trial seed itself.
inline constexpr std::uint64_t kScheduleStream = 1;
inline constexpr std::uint64_t kPhaseStream = 2;
inline constexpr std::uint64_t kSolverStream = 3;

struct TrialScene
{
    ArrayGeometry geometry;
    IrsSchedule schedule;
    ComplexMatrix B;
    SourceScene scene;
    ReceivedSignal signal;
    double snr_db = 0.0;
    std::uint64_t seed = 0;
};

///
/// Scene for trial t at one sweep point, seeded by base_seed + t. Schedule
/// and source phases come from derived sub-streams so they are independent
/// of the noise draw; the same trial index gives the same schedule, phases
/// and noise shape at every SNR point.
///
inline TrialScene make_trial(const ExperimentConfig& cfg, double axis_value, Index trial)
{
    Index N = cfg.scenario.elements;
    Index P = cfg.scenario.measurements;
    double snr = cfg.scenario.snr_db;
    switch (cfg.axis) {
    case SweepAxis::Snr: snr = axis_value; break;
    case SweepAxis::NElements: N = static_cast<Index>(axis_value); break;
    case SweepAxis::NMeasurements: P = static_cast<Index>(axis_value); break;
    case SweepAxis::None: break;
    }
    const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(trial);
    Rng sched_rng(derive_seed(seed, kScheduleStream));
    Rng phase_rng(derive_seed(seed, kPhaseStream));
    TrialScene t{ArrayGeometry::uniform(N, cfg.scenario.spacing),
                 {},
                 {},
                 SourceScene::unit_random_phase(cfg.scenario.angles_deg, phase_rng),
                 {},
                 snr,
                 seed};
    t.schedule = IrsSchedule::random_binary(P, N, sched_rng, cfg.scenario.receiver_direction_deg);
    t.B = measurement_matrix(t.geometry, t.schedule);
    const double sigma2 = noise_variance_for_snr(t.geometry, t.B, t.scene, snr);
    t.signal = synthesize(t.geometry, t.schedule, t.scene, sigma2, seed);
    return t;
}

inline SolverConfig trial_solver_config(const ExperimentConfig& cfg, std::uint64_t trial_seed)
{
    SolverConfig s = cfg.solver;
    s.seed = derive_seed(trial_seed, kSolverStream) + cfg.solver.seed;
    return s;
}

/// Runs one estimator on one trial; numerical failures are recorded, not thrown.
inline TrialRecord run_method(const std::string& method, const TrialScene& t, const ExperimentConfig& cfg,
                              Index trial, double axis_value)
{
    TrialRecord r;
    r.trial = trial;
    r.seed = t.seed;
    r.method = method;
    r.axis_value = axis_value;
    r.truth = t.scene.angles_deg;
    const Index K = t.scene.size();
    const auto t0 = std::chrono::steady_clock::now();
    try {
        if (method == "ncanm") {
            const DoaEstimate e = solve(t.signal, t.B, t.geometry, trial_solver_config(cfg, t.seed));
            r.estimates = e.angles;
            r.iterations = e.diagnostics.iters_run;
        } else if (method == "omp") {
            r.estimates = omp_estimate(t.signal.y, t.B, t.geometry, cfg.grid, K).angles;
        } else if (method == "ls") {
            r.estimates = ls_estimate(t.signal.y, t.B, t.geometry, cfg.grid, K).angles;
        } else if (method == "fft") {
            r.estimates = fft_estimate(t.signal.y, t.B, t.geometry, K, cfg.fft_zero_pad).angles;
        } else if (method == "music") {
            r.estimates = music_ss_estimate(t.signal.y, t.B, t.geometry, K, cfg.grid).angles;
        } else {
            throw ConfigError("unknown method '" + method + "'");
        }
    } catch (const NumericalError&) {
        r.failed = true;
        r.estimates.clear();
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.wall_time = std::max(dt, 1e-9);
    score_trial(r, cfg.miss_penalty_deg, cfg.success_tolerance_deg);
    return r;
}

struct MethodSummary
{
    std::string method;
    double rmse_deg = 0.0;
    double prob = 0.0;
    double mean_time_s = 0.0;
    Index trials = 0;
    Index failures = 0;
    double median_trial_rmse_deg = 0.0;
    double fraction_trials_within_025 = 0.0;
    std::vector<VarianceEstimate> angle_variance; // degrees^2, per truth
};

struct SweepResult
{
    std::string axis_name;
    double axis_value = 0.0;
    std::vector<MethodSummary> methods;
    double crlb_deg = std::numeric_limits<double>::quiet_NaN(); // sqrt of the mean per-angle bound
    std::vector<double> crlb_angle_deg2;                          // mean over trials, per truth
    Index trials = 0;
    std::vector<TrialRecord> records;

    const MethodSummary& method(const std::string& name) const
    {
        for (const MethodSummary& m : methods)
            if (m.method == name)
                return m;
        throw ParameterError("SweepResult: no method '" + name + "'");
    }
};

inline MethodSummary summarize(const std::string& method, std::span<const TrialRecord> records, std::size_t K,
                               bool timing)
{
    MethodSummary s;
    s.method = method;
    s.trials = static_cast<Index>(records.size());
    s.rmse_deg = rmse(records);
    s.prob = reconstruction_probability(records);
    s.mean_time_s = timing ? mean_wall_time(records) : std::numeric_limits<double>::quiet_NaN();
    std::vector<double> per;
    Index within = 0;
    for (const TrialRecord& r : records) {
        const double e = trial_rmse(r);
        per.push_back(e);
        within += e <= 0.25;
        s.failures += r.failed;
    }
    s.median_trial_rmse_deg = median(per);
    s.fraction_trials_within_025 = static_cast<double>(within) / static_cast<double>(records.size());
    s.angle_variance = per_angle_variance(records, K);
    return s;
}

using ProgressFn = std::function<void(double axis_value, Index trial)>;

///
/// Runs every (sweep point, trial, method) combination in index order and
/// aggregates per point. Output depends only on the configuration (apart from
/// wall-clock timing fields).
///
inline std::vector<SweepResult> run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {})
{
    cfg.validate();
    const std::size_t K = cfg.scenario.angles_deg.size();
    std::vector<SweepResult> out;
    for (double v : cfg.points()) {
        SweepResult res;
        res.axis_name = to_string(cfg.axis);
        res.axis_value = v;
        res.trials = cfg.trials;
        std::vector<std::vector<TrialRecord>> per_method(cfg.methods.size());
        std::vector<double> crlb_sum(K, 0.0);
        Index crlb_count = 0;
        for (Index t = 0; t < cfg.trials; ++t) {
            if (progress)
                progress(v, t);
            const TrialScene scene = make_trial(cfg, v, t);
            for (std::size_t m = 0; m < cfg.methods.size(); ++m)
                per_method[m].push_back(run_method(cfg.methods[m], scene, cfg, t, v));
            if (cfg.crlb && scene.signal.noise_variance > 0.0) {
                try {
                    const CrlbReport rep = crlb(CrlbModel::unit_power(scene.geometry, scene.B,
                                                                      scene.scene.angles_deg,
                                                                      scene.signal.noise_variance));
                    for (std::size_t k = 0; k < K; ++k)
                        crlb_sum[k] += rep.crlb_theta_deg2[static_cast<Index>(k)];
                    ++crlb_count;
                } catch (const NumericalError&) {
                    // An uninformative trial geometry contributes no bound.
                }
            }
        }
        for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
            res.methods.push_back(summarize(cfg.methods[m], per_method[m], K, cfg.timing));
            res.records.insert(res.records.end(), per_method[m].begin(), per_method[m].end());
        }
        if (crlb_count > 0) {
            double mean = 0.0;
            for (double& s : crlb_sum) {
                s /= static_cast<double>(crlb_count);
                mean += s;
            }
            res.crlb_angle_deg2 = crlb_sum;
            res.crlb_deg = std::sqrt(mean / static_cast<double>(K));
        }
        out.push_back(std::move(res));
    }
    return out;
}

} // namespace ncanm::bench

#endif // NCANM_BENCH_EXPERIMENT_HPP
