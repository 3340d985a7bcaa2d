#ifndef NCANM_BENCH_METRICS_HPP
#define NCANM_BENCH_METRICS_HPP

#include <ncanm/types.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace ncanm::bench
{

struct TrialRecord
{
    Index trial = 0;
    std::uint64_t seed = 0;
    std::string method;
    double axis_value = 0.0;
    std::vector<double> estimates;     // ascending, degrees
    std::vector<double> truth;         // degrees
    std::vector<double> errors;        // |error| per truth, miss penalty for unmatched truths
    std::vector<double> signed_errors; // estimate - truth per truth, NaN when unmatched
    bool success = false;
    bool failed = false;               // estimator raised a numerical error
    double wall_time = 0.0;
    Index iterations = 0;
};

struct Assignment
{
    std::vector<Index> estimate_of; // per truth, -1 when unmatched
    std::vector<double> errors;     // |error| per truth, penalty when unmatched
    double total = 0.0;
};

///
/// Assigns estimates to truths, each used at most once, minimizing the summed
/// absolute error; an unmatched truth costs the penalty. Exact dynamic program
/// over subsets of truths (K up to about 20).
///
inline Assignment match_estimates(std::span<const double> estimates, std::span<const double> truth, double penalty)
{
    const std::size_t K = truth.size();
    if (K > 20)
        throw ParameterError("match_estimates: at most 20 sources supported");
    const std::size_t states = std::size_t{1} << K;
    const std::size_t E = estimates.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    // cost[e][mask]: best cost of assigning truths in mask among the first e estimates.
    std::vector<std::vector<double>> cost(E + 1, std::vector<double>(states, inf));
    std::vector<std::vector<int>> choice(E + 1, std::vector<int>(states, -1));
    cost[0][0] = 0.0;
    for (std::size_t e = 0; e < E; ++e) {
        for (std::size_t mask = 0; mask < states; ++mask) {
            const double base = cost[e][mask];
            if (base == inf)
                continue;
            if (base < cost[e + 1][mask]) {
                cost[e + 1][mask] = base;
                choice[e + 1][mask] = -1;
            }
            for (std::size_t k = 0; k < K; ++k) {
                if (mask & (std::size_t{1} << k))
                    continue;
                const std::size_t next = mask | (std::size_t{1} << k);
                const double c = base + std::abs(estimates[e] - truth[k]);
                if (c < cost[e + 1][next]) {
                    cost[e + 1][next] = c;
                    choice[e + 1][next] = static_cast<int>(k);
                }
            }
        }
    }
    std::size_t best_mask = 0;
    double best = inf;
    for (std::size_t mask = 0; mask < states; ++mask) {
        if (cost[E][mask] == inf)
            continue;
        const double c = cost[E][mask] + penalty * static_cast<double>(K - static_cast<std::size_t>(std::popcount(mask)));
        if (c < best) {
            best = c;
            best_mask = mask;
        }
    }
    Assignment a;
    a.estimate_of.assign(K, -1);
    std::size_t mask = best_mask;
    for (std::size_t e = E; e > 0; --e) {
        const int k = choice[e][mask];
        if (k >= 0) {
            a.estimate_of[static_cast<std::size_t>(k)] = static_cast<Index>(e - 1);
            mask &= ~(std::size_t{1} << k);
        }
    }
    a.errors.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        const Index e = a.estimate_of[k];
        a.errors[k] = e < 0 ? penalty : std::abs(estimates[static_cast<std::size_t>(e)] - truth[k]);
        a.total += a.errors[k];
    }
    return a;
}

/// Fills errors, signed_errors and success from estimates and truth.
inline void score_trial(TrialRecord& r, double penalty, double success_tolerance)
{
    const Assignment a = match_estimates(r.estimates, r.truth, penalty);
    r.errors = a.errors;
    r.signed_errors.assign(r.truth.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < r.truth.size(); ++k)
        if (a.estimate_of[k] >= 0)
            r.signed_errors[k] = r.estimates[static_cast<std::size_t>(a.estimate_of[k])] - r.truth[k];
    r.success = !r.failed && r.estimates.size() == r.truth.size() &&
                std::all_of(r.errors.begin(), r.errors.end(), [&](double e) { return e <= success_tolerance; });
}

/// sqrt(sum of squared errors / (M K)) over the records' per-truth errors.
inline double rmse(std::span<const TrialRecord> records)
{
    if (records.empty())
        throw ParameterError("rmse: empty record set");
    double sum = 0.0;
    std::size_t count = 0;
    for (const TrialRecord& r : records) {
        for (double e : r.errors)
            sum += e * e;
        count += r.errors.size();
    }
    if (count == 0)
        throw ParameterError("rmse: records carry no errors");
    return std::sqrt(sum / static_cast<double>(count));
}

inline double trial_rmse(const TrialRecord& r)
{
    return rmse(std::span<const TrialRecord>(&r, 1));
}

inline double reconstruction_probability(std::span<const TrialRecord> records)
{
    if (records.empty())
        return 0.0;
    const auto n = std::count_if(records.begin(), records.end(), [](const TrialRecord& r) { return r.success; });
    return static_cast<double>(n) / static_cast<double>(records.size());
}

inline double mean_wall_time(std::span<const TrialRecord> records)
{
    if (records.empty())
        return 0.0;
    double s = 0.0;
    for (const TrialRecord& r : records)
        s += r.wall_time;
    return s / static_cast<double>(records.size());
}

inline double median(std::vector<double> v)
{
    if (v.empty())
        return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

///
/// Per-truth sample variance of the matched estimates (unbiased, degrees^2),
/// with the standard error of that variance estimate. Unmatched truths are
/// left out.
///
struct VarianceEstimate
{
    double variance = std::numeric_limits<double>::quiet_NaN();
    double standard_error = std::numeric_limits<double>::quiet_NaN();
    Index samples = 0;
};

inline std::vector<VarianceEstimate> per_angle_variance(std::span<const TrialRecord> records, std::size_t K)
{
    std::vector<VarianceEstimate> out(K);
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<double> x;
        for (const TrialRecord& r : records)
            if (k < r.signed_errors.size() && std::isfinite(r.signed_errors[k]))
                x.push_back(r.signed_errors[k]);
        const std::size_t n = x.size();
        out[k].samples = static_cast<Index>(n);
        if (n < 2)
            continue;
        double mean = 0.0;
        for (double v : x)
            mean += v;
        mean /= static_cast<double>(n);
        double m2 = 0.0, m4 = 0.0;
        for (double v : x) {
            const double d = (v - mean) * (v - mean);
            m2 += d;
            m4 += d * d;
        }
        const double var = m2 / static_cast<double>(n - 1);
        const double mu4 = m4 / static_cast<double>(n);
        const double nd = static_cast<double>(n);
        // Var(s^2) = (mu4 - (n - 3) / (n - 1) sigma^4) / n.
        const double vv = std::max(0.0, (mu4 - (nd - 3.0) / (nd - 1.0) * var * var) / nd);
        out[k].variance = var;
        out[k].standard_error = std::sqrt(vv);
    }
    return out;
}

} // namespace ncanm::bench

#endif // NCANM_BENCH_METRICS_HPP
