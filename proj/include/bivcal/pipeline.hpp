#pragma once

// Command implementations behind the bivcal tool: generate, calibrate,
// verify and compare. Every command is a function of its inputs, flags and
// seed; dates are processed on a worker pool with one random substream each.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "bivcal/serialize.hpp"
#include "bivcal/synth.hpp"

namespace bivcal {

namespace fs = std::filesystem;

enum class Method { raw, bma_full, bma_pars, copula };

inline std::string_view to_string(Method m) {
    switch (m) {
        case Method::raw: return "raw";
        case Method::bma_full: return "bma_full";
        case Method::bma_pars: return "bma_pars";
        case Method::copula: return "copula";
    }
    return "";
}

inline Method parse_method(std::string_view name) {
    for (auto m : {Method::raw, Method::bma_full, Method::bma_pars, Method::copula}) {
        if (to_string(m) == name) return m;
    }
    throw InvalidArgument("unknown method '" + std::string(name) + "'");
}

struct DateRange {
    Date start;
    Date end;

    bool contains(const Date& d) const { return d >= start && d <= end; }

    /// "YYYY-MM-DD:YYYY-MM-DD", both ends inclusive.
    static DateRange parse(std::string_view text) {
        const auto colon = text.find(':');
        if (colon == std::string_view::npos) throw InvalidArgument("date range must look like START:END");
        DateRange r{Date::parse(text.substr(0, colon)), Date::parse(text.substr(colon + 1))};
        if (r.end < r.start) throw InvalidArgument("date range ends before it starts");
        return r;
    }
};

struct RunConfig {
    fs::path dataset;
    Method method = Method::bma_full;
    std::optional<GroupingKind> grouping;  // defaults to the manifest's
    int training_days = 40;
    std::size_t mc_samples = 10000;
    std::optional<DateRange> corr_period;
    std::optional<Date> from;
    std::optional<Date> to;
    fs::path output;
    std::uint64_t seed = 1;
    std::size_t threads = 0;  // 0: hardware concurrency
    EmConfig em;

    void validate() const {
        if (training_days < 1) throw InvalidArgument("training_days must be at least 1");
        if (mc_samples < 100) throw InvalidArgument("mc_samples must be at least 100");
        if (corr_period && method != Method::copula) throw InvalidArgument("corr_period applies to copula only");
        if (from && to && *to < *from) throw InvalidArgument("--to precedes --from");
        if (output.empty()) throw InvalidArgument("an output directory is required");
        em.validate();
    }
};

namespace detail {

inline std::mutex& log_mutex() {
    static std::mutex m;
    return m;
}

inline void log_line(const std::string& text) {
    std::lock_guard lock(log_mutex());
    std::cerr << text << '\n';
}

inline std::size_t worker_count(std::size_t requested) {
    std::size_t n = requested > 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
    if (const char* cap = std::getenv("BIVAR_CALIB_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(cap, &end, 10);
        if (end != cap && v >= 1) n = std::min(n, static_cast<std::size_t>(v));
    }
    return n;
}

/// Runs body(i) for i in [0, n) on up to `threads` workers. The first
/// exception is rethrown after all workers stop.
template <class Body>
void parallel_for(std::size_t n, std::size_t threads, Body body) {
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            while (!failed) {
                const std::size_t i = next++;
                if (i >= n) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    failed = true;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

inline void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
    if (!out) throw Error("write failed for " + path.string());
}

inline void write_atomically(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    write_file(tmp, content);
    fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Failures of a single date's fit; these skip the date instead of ending the run.
inline bool is_fit_failure(const std::exception& e) {
    return dynamic_cast<const DegenerateLikelihood*>(&e) || dynamic_cast<const RankDeficient*>(&e) ||
           dynamic_cast<const Divergence*>(&e) || dynamic_cast<const InvalidDistribution*>(&e) ||
           dynamic_cast<const InsufficientHistory*>(&e);
}

}  // namespace detail

// ---------------------------------------------------------------- generate

inline void cmd_generate(const SynthConfig& cfg, const fs::path& csv) {
    const auto cases = generate(cfg);
    if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
    write_dataset(csv, cfg.manifest(), cases);
}

// --------------------------------------------------------------- calibrate

inline const std::vector<std::string>& prediction_columns() {
    static const std::vector<std::string> cols{"station_id", "date",      "obs_wind",     "obs_temp",
                                               "mean_wind",  "mean_temp", "median_wind",  "median_temp",
                                               "es",         "ds",        "rank",         "rank_wind",
                                               "rank_temp",  "covered_wind", "covered_temp"};
    return cols;
}

inline std::string prediction_row(const std::string& station, const Date& date, const CaseScores& s) {
    using detail::format_number;
    std::ostringstream row;
    row << station << ',' << date.iso() << ',' << format_number(s.obs(0)) << ',' << format_number(s.obs(1)) << ','
        << format_number(s.mean(0)) << ',' << format_number(s.mean(1)) << ',' << format_number(s.median(0)) << ','
        << format_number(s.median(1)) << ',' << format_number(s.es) << ',' << format_number(s.ds) << ',' << s.rank
        << ',' << s.rank_wind << ',' << s.rank_temp << ',' << (s.covered_wind ? 1 : 0) << ','
        << (s.covered_temp ? 1 : 0) << '\n';
    return row.str();
}

struct CalibrateSummary {
    std::vector<Date> dates;
    std::vector<std::pair<Date, std::string>> skipped;
    std::optional<double> latent_corr;
};

namespace detail {

struct DateOutcome {
    bool ok = false;
    std::string reason;
};

inline ModelProvenance provenance_of(const RollingStep& step, const DatasetManifest& manifest) {
    return {manifest.ensemble_name, step.target_date - static_cast<long>(step.window.n_days),
            step.target_date - 1L};
}

/// Latent correlation from margins refitted on every rolling date in `period`.
inline double copula_correlation(std::span<const RollingStep> steps, const DateRange& period,
                                 const GroupSpec& groups, const EmConfig& em, std::size_t threads) {
    std::vector<const RollingStep*> chosen;
    for (const auto& s : steps) if (period.contains(s.target_date)) chosen.push_back(&s);
    std::vector<std::vector<Vec2>> pairs(chosen.size());
    parallel_for(chosen.size(), threads, [&](std::size_t i) {
        const RollingStep& step = *chosen[i];
        try {
            const auto wind = fit_margin(step.window, Variable::wind, groups, em).model;
            const auto temp = fit_margin(step.window, Variable::temp, groups, em).model;
            for (const auto& c : step.evaluation) pairs[i].push_back(latent_pair(c, wind, temp));
        } catch (const Error& e) {
            if (!is_fit_failure(e)) throw;
            log_line("correlation period " + step.target_date.iso() + ": skipped (" + e.what() + ")");
        }
    });
    std::vector<Vec2> all;
    for (const auto& p : pairs) all.insert(all.end(), p.begin(), p.end());
    return latent_correlation(all);
}

}  // namespace detail

/// Rolling-window calibration. Writes models/DATE.json (not for raw),
/// predictions/DATE.csv and predictions/index.json under cfg.output.
inline CalibrateSummary cmd_calibrate(const RunConfig& cfg) {
    cfg.validate();
    const Dataset ds = load_dataset(cfg.dataset);
    const std::size_t m = ds.manifest.members;
    const GroupingKind grouping = cfg.grouping.value_or(ds.manifest.grouping);
    const GroupSpec groups = make_group_model(grouping, m);
    if (groups.member_count() != m) {
        throw InvalidArgument("grouping " + std::string(to_string(grouping)) + " does not fit " + std::to_string(m) +
                              " members");
    }
    const auto steps = rolling_windows(ds.cases, cfg.training_days);
    std::vector<const RollingStep*> targets;
    for (const auto& s : steps) {
        if (cfg.from && s.target_date < *cfg.from) continue;
        if (cfg.to && s.target_date > *cfg.to) continue;
        targets.push_back(&s);
    }
    const std::size_t threads = detail::worker_count(cfg.threads);

    CalibrateSummary summary;
    std::optional<DateRange> corr_window;
    if (cfg.method == Method::copula) {
        if (cfg.corr_period) {
            corr_window = cfg.corr_period;
        } else if (!targets.empty() && !steps.empty() && steps.front().target_date < targets.front()->target_date) {
            corr_window = DateRange{steps.front().target_date, targets.front()->target_date - 1L};
        } else if (!steps.empty()) {
            corr_window = DateRange{steps.front().target_date, steps.back().target_date};
            detail::log_line("copula: no dates precede the evaluation range; correlation estimated in sample");
        } else {
            throw InsufficientHistory("no rolling dates to estimate the copula correlation");
        }
        summary.latent_corr = detail::copula_correlation(steps, *corr_window, groups, cfg.em, threads);
    }

    const fs::path models_dir = cfg.output / "models";
    const fs::path pred_dir = cfg.output / "predictions";
    fs::create_directories(pred_dir);
    if (cfg.method != Method::raw) fs::create_directories(models_dir);

    const RandomStream base(cfg.seed);
    std::vector<detail::DateOutcome> outcomes(targets.size());

    detail::parallel_for(targets.size(), threads, [&](std::size_t i) {
        const RollingStep& step = *targets[i];
        RandomStream rng = base.split(static_cast<std::uint64_t>(step.target_date.serial()));
        std::function<Forecast(const ForecastCase&)> make;
        std::optional<json> model_json;

        try {
            switch (cfg.method) {
                case Method::raw:
                    make = [](const ForecastCase& c) { return Forecast(EnsembleForecast{c.members}); };
                    break;
                case Method::bma_full:
                case Method::bma_pars: {
                    const Mode mode = cfg.method == Method::bma_full ? Mode::full : Mode::parsimonious;
                    auto fitted = fit(step.window, groups, mode, cfg.em);
                    model_json = model_to_json<2>(fitted.model, detail::provenance_of(step, ds.manifest));
                    (*model_json)["diagnostics"] = diagnostics_to_json(fitted.diagnostics);
                    make = [model = std::move(fitted.model), m](const ForecastCase& c) {
                        PredictiveForecast p;
                        p.sampler = [&model, f = c.members](std::size_t n, RandomStream& r) {
                            return predictive_sample<2>(model, f, n, r);
                        };
                        p.rank_members = m;
                        p.exact_mean = predictive_mean<2>(model, c.members);
                        return Forecast(std::move(p));
                    };
                    break;
                }
                case Method::copula: {
                    auto wind = fit_margin(step.window, Variable::wind, groups, cfg.em);
                    auto temp = fit_margin(step.window, Variable::temp, groups, cfg.em);
                    CopulaModel cm{wind.model, temp.model, *summary.latent_corr};
                    model_json = copula_to_json(cm, corr_window->start, corr_window->end,
                                                detail::provenance_of(step, ds.manifest));
                    (*model_json)["diagnostics"] = {{"wind", diagnostics_to_json(wind.diagnostics)},
                                                    {"temp", diagnostics_to_json(temp.diagnostics)}};
                    make = [cm, m](const ForecastCase& c) {
                        PredictiveForecast p;
                        p.sampler = [cm, f = c.members](std::size_t n, RandomStream& r) {
                            return copula_sample(cm, f, n, r);
                        };
                        p.rank_members = m;
                        p.exact_mean = copula_mean(cm, c.members);
                        return Forecast(std::move(p));
                    };
                    break;
                }
            }
        } catch (const Error& e) {
            if (!detail::is_fit_failure(e)) throw;
            outcomes[i].reason = e.what();
            detail::log_line(step.target_date.iso() + ": skipped (" + e.what() + ")");
            return;
        }
        // Model objects referenced by the samplers live inside `make`.
        std::ostringstream csv;
        for (std::size_t k = 0; k < prediction_columns().size(); ++k) {
            csv << (k ? "," : "") << prediction_columns()[k];
        }
        csv << '\n';
        for (const auto& c : step.evaluation) {
            const Forecast forecast = make(c);
            const CaseScores s = score_case(forecast, c.obs, cfg.mc_samples, rng);
            csv << prediction_row(c.station_id, c.date, s);
        }
        if (model_json) detail::write_file(models_dir / (step.target_date.iso() + ".json"), model_json->dump(2) + "\n");
        detail::write_file(pred_dir / (step.target_date.iso() + ".csv"), csv.str());
        outcomes[i].ok = true;
    });

    json dates = json::array();
    json skipped = json::array();
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const Date d = targets[i]->target_date;
        if (outcomes[i].ok) {
            summary.dates.push_back(d);
            dates.push_back(d.iso());
        } else {
            summary.skipped.emplace_back(d, outcomes[i].reason);
            skipped.push_back({{"date", d.iso()}, {"reason", outcomes[i].reason}});
        }
    }
    json index{{"method", std::string(to_string(cfg.method))},
               {"grouping", std::string(to_string(grouping))},
               {"members", m},
               {"training_days", cfg.training_days},
               {"mc_samples", cfg.mc_samples},
               {"seed", cfg.seed},
               {"dates", dates},
               {"skipped", skipped}};
    if (summary.latent_corr) {
        index["latent_corr"] = *summary.latent_corr;
        index["corr_window"] = {{"start", corr_window->start.iso()}, {"end", corr_window->end.iso()}};
    }
    detail::write_atomically(pred_dir / "index.json", index.dump(2) + "\n");
    return summary;
}

// ------------------------------------------------------------------ verify

/// Reads predictions/DATE.csv files listed in the index.
inline std::vector<std::pair<std::string, CaseScores>> read_predictions(const fs::path& file, const Date& date) {
    std::istringstream in(detail::read_file(file));
    std::string line;
    std::size_t row = 1;
    if (!std::getline(in, line)) throw LoadError("empty prediction file " + file.string());
    const auto header = detail::split_csv(line);
    if (header.size() != prediction_columns().size() ||
        !std::equal(header.begin(), header.end(), prediction_columns().begin())) {
        throw LoadError("unexpected prediction header in " + file.string(), 1);
    }
    std::vector<std::pair<std::string, CaseScores>> out;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_csv(line);
        if (f.size() != prediction_columns().size()) throw LoadError("wrong field count in " + file.string(), row);
        if (Date::parse(detail::trim(f[1])) != date) throw LoadError("row dated outside " + file.string(), row);
        auto num = [&](std::size_t k) { return detail::parse_number(detail::trim(f[k]), row); };
        auto count = [&](std::size_t k) { return static_cast<std::size_t>(num(k)); };
        CaseScores s;
        s.obs = {num(2), num(3)};
        s.mean = {num(4), num(5)};
        s.median = {num(6), num(7)};
        s.es = num(8);
        s.ds = num(9);
        s.rank = count(10);
        s.rank_wind = count(11);
        s.rank_temp = count(12);
        s.covered_wind = num(13) != 0.0;
        s.covered_temp = num(14) != 0.0;
        out.emplace_back(std::string(detail::trim(f[0])), s);
    }
    return out;
}

struct VerifyConfig {
    fs::path run_dir;   // calibrate --output
    fs::path dataset;
    fs::path output;    // defaults to run_dir
};

/// Joins every prediction with its dataset case, aggregates, and writes
/// report.json and rankhist_<method>.csv.
inline VerificationReport cmd_verify(const VerifyConfig& cfg) {
    const json index = json::parse(detail::read_file(cfg.run_dir / "predictions" / "index.json"));
    const std::string method = index.at("method").get<std::string>();
    const std::size_t m = index.at("members").get<std::size_t>();
    const Dataset ds = load_dataset(cfg.dataset);
    if (ds.manifest.members != m) throw InvalidArgument("prediction member count does not match the dataset");

    std::map<std::pair<std::string, long>, const ForecastCase*> by_key;
    for (const auto& c : ds.cases) by_key[{c.station_id, c.date.serial()}] = &c;

    std::vector<CaseScores> scores;
    std::map<std::pair<std::string, long>, bool> seen;
    for (const auto& d : index.at("dates")) {
        const Date date = Date::parse(d.get<std::string>());
        for (auto& [station, s] : read_predictions(cfg.run_dir / "predictions" / (date.iso() + ".csv"), date)) {
            const auto key = std::make_pair(station, date.serial());
            const auto it = by_key.find(key);
            if (it == by_key.end()) {
                throw InvalidArgument("prediction for " + station + " on " + date.iso() + " has no dataset case");
            }
            if (seen[key]) throw InvalidArgument("duplicate prediction for " + station + " on " + date.iso());
            seen[key] = true;
            if (it->second->obs != s.obs) {
                throw InvalidArgument("observation mismatch for " + station + " on " + date.iso());
            }
            scores.push_back(s);
        }
    }
    const VerificationReport report = aggregate(method, scores, m);
    const fs::path out = cfg.output.empty() ? cfg.run_dir : cfg.output;
    fs::create_directories(out);
    detail::write_file(out / "report.json", report_to_json(report).dump(2) + "\n");
    detail::write_file(out / ("rankhist_" + method + ".csv"), report.histogram.to_csv());
    return report;
}

// ----------------------------------------------------------------- compare

struct ComparisonTable {
    std::string text;
    std::string csv;
};

inline ComparisonTable cmd_compare(std::vector<VerificationReport> reports) {
    if (reports.empty()) throw InvalidArgument("no reports to compare");
    std::stable_sort(reports.begin(), reports.end(),
                     [](const auto& a, const auto& b) { return a.method < b.method; });
    const std::vector<std::string> head{"method", "ES", "Delta", "DS", "EE-median", "EE-mean", "rho-median",
                                        "rho-mean"};
    std::vector<std::vector<std::string>> rows{head};
    auto fixed = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", v);
        return std::string(buf);
    };
    for (const auto& r : reports) {
        rows.push_back({r.method, fixed(r.mean_es), fixed(r.delta), fixed(r.mean_ds), fixed(r.ee_median),
                        fixed(r.ee_mean), fixed(r.corr_median), fixed(r.corr_mean)});
    }
    std::vector<std::size_t> width(head.size(), 0);
    for (const auto& row : rows) {
        for (std::size_t k = 0; k < row.size(); ++k) width[k] = std::max(width[k], row[k].size());
    }
    ComparisonTable table;
    std::ostringstream text, csv;
    for (const auto& row : rows) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k == 0) {
                text << row[k] << std::string(width[k] - row[k].size(), ' ');
            } else {
                text << "  " << std::string(width[k] - row[k].size(), ' ') << row[k];
            }
            csv << (k ? "," : "") << row[k];
        }
        text << '\n';
        csv << '\n';
    }
    table.text = text.str();
    table.csv = csv.str();
    return table;
}

inline ComparisonTable cmd_compare(const std::vector<fs::path>& report_files) {
    std::vector<VerificationReport> reports;
    for (const auto& f : report_files) reports.push_back(report_from_json(json::parse(detail::read_file(f))));
    return cmd_compare(std::move(reports));
}

}  // namespace bivcal
