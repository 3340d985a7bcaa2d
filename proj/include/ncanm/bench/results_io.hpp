#ifndef NCANM_BENCH_RESULTS_IO_HPP
#define NCANM_BENCH_RESULTS_IO_HPP

#include <ncanm/bench/config.hpp>
#include <ncanm/bench/experiment.hpp>
#include <ncanm/bench/metrics.hpp>
#include <ncanm/signal_model.hpp>

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace ncanm::bench
{

/// Shortest decimal text that parses back to the same double ("nan" for NaN).
inline std::string format_number(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline double parse_number(const std::string& s)
{
    if (s == "nan")
        return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError("not a number: '" + s + "'");
    return v;
}

/// One output row: a (sweep point, method) pair.
struct ResultRow
{
    std::string axis_name;
    double axis_value = 0.0;
    std::string method;
    double rmse_deg = 0.0;
    double prob = 0.0;
    double mean_time_s = 0.0;
    double crlb_deg = 0.0;
    Index trials = 0;

    bool operator==(const ResultRow& o) const
    {
        auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
        return axis_name == o.axis_name && same(axis_value, o.axis_value) && method == o.method &&
               same(rmse_deg, o.rmse_deg) && same(prob, o.prob) && same(mean_time_s, o.mean_time_s) &&
               same(crlb_deg, o.crlb_deg) && trials == o.trials;
    }
};

inline std::vector<ResultRow> to_rows(const std::vector<SweepResult>& results)
{
    std::vector<ResultRow> rows;
    for (const SweepResult& r : results)
        for (const MethodSummary& m : r.methods)
            rows.push_back({r.axis_name, r.axis_value, m.method, m.rmse_deg, m.prob, m.mean_time_s, r.crlb_deg,
                            m.trials});
    return rows;
}

inline constexpr const char* kCsvHeader = "axis_name,axis_value,method,rmse_deg,prob,mean_time_s,crlb_deg,trials";

inline void write_csv(std::ostream& out, const std::vector<ResultRow>& rows)
{
    out << kCsvHeader << '\n';
    for (const ResultRow& r : rows)
        out << r.axis_name << ',' << format_number(r.axis_value) << ',' << r.method << ','
            << format_number(r.rmse_deg) << ',' << format_number(r.prob) << ',' << format_number(r.mean_time_s)
            << ',' << format_number(r.crlb_deg) << ',' << r.trials << '\n';
}

inline std::vector<ResultRow> read_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader)
        throw ConfigError("results CSV: missing or unexpected header");
    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            f.push_back(cell);
        if (f.size() != 8)
            throw ConfigError("results CSV: expected 8 fields, got " + std::to_string(f.size()));
        ResultRow r;
        r.axis_name = f[0];
        r.axis_value = parse_number(f[1]);
        r.method = f[2];
        r.rmse_deg = parse_number(f[3]);
        r.prob = parse_number(f[4]);
        r.mean_time_s = parse_number(f[5]);
        r.crlb_deg = parse_number(f[6]);
        r.trials = static_cast<Index>(parse_number(f[7]));
        rows.push_back(r);
    }
    return rows;
}

namespace detail
{
/// JSON has no NaN; non-finite values are written as null.
inline nlohmann::json number_or_null(double v)
{
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}
} // namespace detail

inline void write_jsonl(std::ostream& out, const std::vector<SweepResult>& results)
{
    for (const SweepResult& r : results) {
        for (const MethodSummary& m : r.methods) {
            nlohmann::json j;
            j["axis_name"] = r.axis_name;
            j["axis_value"] = r.axis_value;
            j["method"] = m.method;
            j["rmse_deg"] = m.rmse_deg;
            j["prob"] = m.prob;
            j["mean_time_s"] = detail::number_or_null(m.mean_time_s);
            j["crlb_deg"] = detail::number_or_null(r.crlb_deg);
            j["trials"] = m.trials;
            j["failures"] = m.failures;
            j["median_trial_rmse_deg"] = m.median_trial_rmse_deg;
            j["fraction_trials_within_025"] = m.fraction_trials_within_025;
            nlohmann::json var = nlohmann::json::array();
            for (const VarianceEstimate& v : m.angle_variance)
                var.push_back(detail::number_or_null(v.variance));
            j["angle_variance_deg2"] = var;
            nlohmann::json cr = nlohmann::json::array();
            for (double c : r.crlb_angle_deg2)
                cr.push_back(detail::number_or_null(c));
            j["crlb_angle_deg2"] = cr;
            out << j.dump() << '\n';
        }
    }
}

inline void write_records_jsonl(std::ostream& out, const std::vector<SweepResult>& results, bool timing)
{
    for (const SweepResult& res : results) {
        for (const TrialRecord& r : res.records) {
            nlohmann::json j;
            j["axis_name"] = res.axis_name;
            j["axis_value"] = r.axis_value;
            j["trial"] = r.trial;
            j["seed"] = r.seed;
            j["method"] = r.method;
            j["estimates"] = r.estimates;
            j["truth"] = r.truth;
            j["errors"] = r.errors;
            j["success"] = r.success;
            j["failed"] = r.failed;
            j["iterations"] = r.iterations;
            j["wall_time"] = timing ? nlohmann::json(r.wall_time) : nlohmann::json(nullptr);
            out << j.dump() << '\n';
        }
    }
}

inline void emit_results(const std::vector<SweepResult>& results, OutputFormat format, const std::string& path)
{
    if (results.empty())
        throw ParameterError("emit_results: no results");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ConfigError("cannot write '" + path + "'");
    if (format == OutputFormat::Csv)
        write_csv(out, to_rows(results));
    else
        write_jsonl(out, results);
    out.flush();
    if (!out)
        throw ConfigError("error while writing '" + path + "'");
}

/// One received-signal dump record for the simulate subcommand.
inline std::string signal_record(const ReceivedSignal& s, std::uint64_t config_hash)
{
    nlohmann::json j;
    j["seed"] = s.seed;
    std::vector<double> re(static_cast<std::size_t>(s.y.size())), im(re.size());
    for (Index p = 0; p < s.y.size(); ++p) {
        re[static_cast<std::size_t>(p)] = s.y[p].real();
        im[static_cast<std::size_t>(p)] = s.y[p].imag();
    }
    j["y_re"] = re;
    j["y_im"] = im;
    j["sigma2"] = s.noise_variance;
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(config_hash));
    j["config_hash"] = hex;
    return j.dump();
}

} // namespace ncanm::bench

#endif // NCANM_BENCH_RESULTS_IO_HPP
