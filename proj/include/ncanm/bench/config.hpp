#ifndef NCANM_BENCH_CONFIG_HPP
#define NCANM_BENCH_CONFIG_HPP

#include <ncanm/baselines.hpp>
#include <ncanm/solver.hpp>
#include <ncanm/types.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace ncanm::bench
{

enum class SweepAxis
{
    None,
    Snr,
    NElements,
    NMeasurements
};

inline std::string to_string(SweepAxis a)
{
    switch (a) {
    case SweepAxis::Snr: return "snr";
    case SweepAxis::NElements: return "n_elements";
    case SweepAxis::NMeasurements: return "n_measurements";
    default: return "none";
    }
}

enum class OutputFormat
{
    Csv,
    JsonLines
};

inline const std::vector<std::string>& known_methods()
{
    static const std::vector<std::string> m{"ncanm", "omp", "ls", "fft", "music"};
    return m;
}

struct ScenarioConfig
{
    Index elements = 32;
    double spacing = 0.5;
    Index measurements = 32;
    double receiver_direction_deg = 0.0;
    std::vector<double> angles_deg{-30.01, 12.51, 20.00};
    double snr_db = 20.0;
};

struct ExperimentConfig
{
    ScenarioConfig scenario;
    std::vector<std::string> methods{"ncanm"};
    SweepAxis axis = SweepAxis::None;
    std::vector<double> values;
    Index trials = 200;
    std::uint64_t base_seed = 0;
    double success_tolerance_deg = 1.0;
    double miss_penalty_deg = 100.0;
    bool crlb = true;

    SolverConfig solver;
    AngleGrid grid;
    Index fft_zero_pad = 16;

    std::string output_path;
    OutputFormat format = OutputFormat::Csv;
    bool timing = true;
    std::string records_path;

    std::string source_text; // raw configuration text, for hashing

    /// Axis values to run; a single placeholder point for SweepAxis::None.
    std::vector<double> points() const
    {
        return axis == SweepAxis::None ? std::vector<double>{0.0} : values;
    }

    void validate() const
    {
        if (methods.empty())
            throw ConfigError("experiment.methods must not be empty");
        for (const std::string& m : methods)
            if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end())
                throw ConfigError("unknown method '" + m + "'");
        if (trials < 1)
            throw ConfigError("experiment.trials must be at least 1");
        if (axis != SweepAxis::None && values.empty())
            throw ConfigError("experiment.values must not be empty for a sweep");
        if (!(success_tolerance_deg > 0.0))
            throw ConfigError("experiment.success_tolerance_deg must be positive");
        if (!(miss_penalty_deg > 0.0))
            throw ConfigError("experiment.miss_penalty_deg must be positive");
        if (scenario.angles_deg.empty())
            throw ConfigError("scenario.angles_deg must not be empty");
        if (scenario.elements < 2)
            throw ConfigError("scenario.elements must be at least 2");
        if (scenario.measurements < 1)
            throw ConfigError("scenario.measurements must be at least 1");
        if (!(scenario.spacing > 0.0))
            throw ConfigError("scenario.spacing must be positive");
        for (double v : values) {
            if (!std::isfinite(v))
                throw ConfigError("experiment.values must be finite");
            if ((axis == SweepAxis::NElements && (v < 2 || v != std::floor(v))) ||
                (axis == SweepAxis::NMeasurements && (v < 1 || v != std::floor(v))))
                throw ConfigError("experiment.values must be integers for an element/measurement sweep");
        }
        if (fft_zero_pad < 1)
            throw ConfigError("baselines.fft_zero_pad must be at least 1");
        try {
            SourceScene s;
            s.angles_deg = scenario.angles_deg;
            s.amplitudes.assign(s.angles_deg.size(), Complex{1.0, 0.0});
            s.validate();
            grid.validate();
            solver.validate();
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }
};

namespace detail
{

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& text)
{
    const std::string t = trim(text);
    double v = 0.0;
    const char* first = t.data();
    if (!t.empty() && t[0] == '+')
        ++first;
    const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw ConfigError(key + ": '" + text + "' is not a number");
    return v;
}

inline long long parse_int(const std::string& key, const std::string& text)
{
    const std::string t = trim(text);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw ConfigError(key + ": '" + text + "' is not an integer");
    return v;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& text)
{
    const std::string t = trim(text);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw ConfigError(key + ": '" + text + "' is not a non-negative integer");
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& text)
{
    std::string t = trim(text);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    if (t == "true" || t == "yes" || t == "on" || t == "1")
        return true;
    if (t == "false" || t == "no" || t == "off" || t == "0")
        return false;
    throw ConfigError(key + ": '" + text + "' is not a boolean");
}

/// Comma-separated items; surrounding brackets and quotes are ignored.
inline std::vector<std::string> parse_list(const std::string& text)
{
    std::string t = trim(text);
    if (t.size() >= 2 && t.front() == '[' && t.back() == ']')
        t = t.substr(1, t.size() - 2);
    std::vector<std::string> out;
    std::stringstream ss(t);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.size() >= 2 && (item.front() == '"' || item.front() == '\'') && item.back() == item.front())
            item = item.substr(1, item.size() - 2);
        if (!item.empty())
            out.push_back(item);
    }
    return out;
}

/// Comma list of numbers, or an inclusive range written start:step:stop.
inline std::vector<double> parse_numbers(const std::string& key, const std::string& text)
{
    const std::string t = trim(text);
    if (t.find(':') != std::string::npos && t.find(',') == std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(t);
        std::string p;
        while (std::getline(ss, p, ':'))
            parts.push_back(p);
        if (parts.size() != 3)
            throw ConfigError(key + ": range must be start:step:stop");
        const double a = parse_double(key, parts[0]);
        const double s = parse_double(key, parts[1]);
        const double b = parse_double(key, parts[2]);
        if (!(s > 0.0) || b < a)
            throw ConfigError(key + ": range needs a positive step and start <= stop");
        std::vector<double> v;
        const auto n = static_cast<long long>(std::floor((b - a) / s + 1e-9));
        for (long long i = 0; i <= n; ++i)
            v.push_back(a + static_cast<double>(i) * s);
        return v;
    }
    std::vector<double> v;
    for (const std::string& item : parse_list(t))
        v.push_back(parse_double(key, item));
    return v;
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

inline const std::map<std::string, std::map<std::string, Setter>>& config_schema()
{
    using C = ExperimentConfig;
    using S = std::string;
    static const std::map<std::string, std::map<std::string, Setter>> schema{
        {"scenario",
         {
             {"elements", [](C& c, const S& k, const S& v) { c.scenario.elements = parse_int(k, v); }},
             {"spacing", [](C& c, const S& k, const S& v) { c.scenario.spacing = parse_double(k, v); }},
             {"measurements", [](C& c, const S& k, const S& v) { c.scenario.measurements = parse_int(k, v); }},
             {"receiver_direction_deg",
              [](C& c, const S& k, const S& v) { c.scenario.receiver_direction_deg = parse_double(k, v); }},
             {"angles_deg", [](C& c, const S& k, const S& v) { c.scenario.angles_deg = parse_numbers(k, v); }},
             {"snr_db", [](C& c, const S& k, const S& v) { c.scenario.snr_db = parse_double(k, v); }},
         }},
        {"experiment",
         {
             {"methods", [](C& c, const S&, const S& v) { c.methods = parse_list(v); }},
             {"sweep",
              [](C& c, const S& k, const S& v) {
                  const S t = trim(v);
                  if (t == "none")
                      c.axis = SweepAxis::None;
                  else if (t == "snr")
                      c.axis = SweepAxis::Snr;
                  else if (t == "n_elements")
                      c.axis = SweepAxis::NElements;
                  else if (t == "n_measurements")
                      c.axis = SweepAxis::NMeasurements;
                  else
                      throw ConfigError(k + ": unknown sweep axis '" + t + "'");
              }},
             {"values", [](C& c, const S& k, const S& v) { c.values = parse_numbers(k, v); }},
             {"trials", [](C& c, const S& k, const S& v) { c.trials = parse_int(k, v); }},
             {"base_seed", [](C& c, const S& k, const S& v) { c.base_seed = parse_uint(k, v); }},
             {"success_tolerance_deg",
              [](C& c, const S& k, const S& v) { c.success_tolerance_deg = parse_double(k, v); }},
             {"miss_penalty_deg", [](C& c, const S& k, const S& v) { c.miss_penalty_deg = parse_double(k, v); }},
             {"crlb", [](C& c, const S& k, const S& v) { c.crlb = parse_bool(k, v); }},
         }},
        {"solver",
         {
             {"sparsity", [](C& c, const S& k, const S& v) { c.solver.sparsity = parse_int(k, v); }},
             {"max_iters", [](C& c, const S& k, const S& v) { c.solver.max_iters = parse_int(k, v); }},
             {"step_size", [](C& c, const S& k, const S& v) { c.solver.step_size = parse_double(k, v); }},
             {"grad_epsilon", [](C& c, const S& k, const S& v) { c.solver.grad_epsilon = parse_double(k, v); }},
             {"perturb_radius", [](C& c, const S& k, const S& v) { c.solver.perturb_radius = parse_double(k, v); }},
             {"threshold",
              [](C& c, const S& k, const S& v) {
                  const S t = trim(v);
                  if (t == "median")
                      c.solver.threshold_rule = ThresholdRule::median_of_sorted();
                  else if (t.rfind("fixed:", 0) == 0)
                      c.solver.threshold_rule = ThresholdRule::fixed(parse_double(k, t.substr(6)));
                  else
                      throw ConfigError(k + ": expected 'median' or 'fixed:<value>'");
              }},
             {"min_separation_deg",
              [](C& c, const S& k, const S& v) { c.solver.min_separation_deg = parse_double(k, v); }},
             {"seed", [](C& c, const S& k, const S& v) { c.solver.seed = parse_uint(k, v); }},
             {"paper_literal_gradient",
              [](C& c, const S& k, const S& v) { c.solver.paper_literal_gradient = parse_bool(k, v); }},
             {"relative_threshold",
              [](C& c, const S& k, const S& v) { c.solver.relative_threshold = parse_double(k, v); }},
             {"resolution_cells",
              [](C& c, const S& k, const S& v) { c.solver.resolution_cells = parse_double(k, v); }},
             {"init_gain", [](C& c, const S& k, const S& v) { c.solver.init_gain = parse_double(k, v); }},
             {"init_range_deg", [](C& c, const S& k, const S& v) { c.solver.init_range_deg = parse_double(k, v); }},
             {"matched_phase_init",
              [](C& c, const S& k, const S& v) { c.solver.matched_phase_init = parse_bool(k, v); }},
             {"descent_guard", [](C& c, const S& k, const S& v) { c.solver.descent_guard = parse_bool(k, v); }},
             {"cluster_fraction",
              [](C& c, const S& k, const S& v) { c.solver.cluster_fraction = parse_double(k, v); }},
             {"lipschitz_iterations",
              [](C& c, const S& k, const S& v) { c.solver.lipschitz_iterations = parse_int(k, v); }},
         }},
        {"baselines",
         {
             {"grid_start_deg", [](C& c, const S& k, const S& v) { c.grid.start_deg = parse_double(k, v); }},
             {"grid_stop_deg", [](C& c, const S& k, const S& v) { c.grid.stop_deg = parse_double(k, v); }},
             {"grid_step_deg", [](C& c, const S& k, const S& v) { c.grid.step_deg = parse_double(k, v); }},
             {"fft_zero_pad", [](C& c, const S& k, const S& v) { c.fft_zero_pad = parse_int(k, v); }},
         }},
        {"output",
         {
             {"path", [](C& c, const S&, const S& v) { c.output_path = trim(v); }},
             {"format",
              [](C& c, const S& k, const S& v) {
                  const S t = trim(v);
                  if (t == "csv")
                      c.format = OutputFormat::Csv;
                  else if (t == "jsonl" || t == "json-lines")
                      c.format = OutputFormat::JsonLines;
                  else
                      throw ConfigError(k + ": expected 'csv' or 'jsonl'");
              }},
             {"timing", [](C& c, const S& k, const S& v) { c.timing = parse_bool(k, v); }},
             {"records", [](C& c, const S&, const S& v) { c.records_path = trim(v); }},
         }},
    };
    return schema;
}

} // namespace detail

///
/// Parses an INI configuration. Every key must belong to the schema; keys
/// outside any section, unknown sections and unknown keys are errors.
///
inline ExperimentConfig parse_config(const std::string& text)
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("malformed configuration: ") + e.what());
    }
    ExperimentConfig cfg;
    cfg.source_text = text;
    const auto& schema = detail::config_schema();
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError("key '" + section + "' outside any section");
        const auto sec = schema.find(section);
        if (sec == schema.end())
            throw ConfigError("unknown section [" + section + "]");
        for (const auto& [key, node] : body) {
            const auto setter = sec->second.find(key);
            if (setter == sec->second.end())
                throw ConfigError("unknown key '" + key + "' in [" + section + "]");
            setter->second(cfg, section + "." + key, node.data());
        }
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open configuration file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// FNV-1a 64-bit hash, used to tag outputs with the configuration they came from.
inline std::uint64_t fnv1a(const std::string& text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace ncanm::bench

#endif // NCANM_BENCH_CONFIG_HPP
