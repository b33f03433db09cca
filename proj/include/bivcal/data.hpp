#pragma once

// Station/date indexed ensemble forecast data: CSV + JSON manifest I/O and
// rolling training windows.
//
// CSV layout (header required):
//   station_id,date,obs_wind,obs_temp,m1_wind,m1_temp,...,mM_wind,mM_temp

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <compare>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bivcal/groups.hpp"
#include "bivcal/linalg.hpp"

namespace bivcal {

/// Calendar date (proleptic Gregorian), ISO-8601 on the wire.
class Date {
public:
    Date() = default;
    explicit Date(std::chrono::sys_days days) : days_(days) {}
    Date(int y, unsigned m, unsigned d)
        : days_(std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}}) {}

    static Date parse(std::string_view text) {
        auto digits = [&](std::size_t pos, std::size_t len) {
            int v = 0;
            for (std::size_t i = pos; i < pos + len; ++i) {
                if (text[i] < '0' || text[i] > '9') throw InvalidArgument("bad date '" + std::string(text) + "'");
                v = v * 10 + (text[i] - '0');
            }
            return v;
        };
        if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
            throw InvalidArgument("bad date '" + std::string(text) + "'");
        }
        const std::chrono::year_month_day ymd{std::chrono::year{digits(0, 4)},
                                              std::chrono::month{static_cast<unsigned>(digits(5, 2))},
                                              std::chrono::day{static_cast<unsigned>(digits(8, 2))}};
        if (!ymd.ok()) throw InvalidArgument("bad date '" + std::string(text) + "'");
        return Date(std::chrono::sys_days{ymd});
    }

    std::string iso() const {
        const std::chrono::year_month_day ymd{days_};
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
        return buf;
    }

    /// Days since 1970-01-01.
    long serial() const { return days_.time_since_epoch().count(); }

    Date operator+(long n) const { return Date(days_ + std::chrono::days{n}); }
    Date operator-(long n) const { return Date(days_ - std::chrono::days{n}); }
    long operator-(const Date& other) const { return serial() - other.serial(); }
    auto operator<=>(const Date&) const = default;

private:
    std::chrono::sys_days days_{};
};

/// One (station, date) record: M member vectors and the verifying observation,
/// each as (wind m/s, temperature K).
struct ForecastCase {
    std::string station_id;
    Date date;
    std::vector<Vec2> members;
    Vec2 obs = Vec2::Zero();
};

struct Units {
    std::string wind = "m/s";
    std::string temp = "K";
};

struct DatasetManifest {
    std::string ensemble_name;
    std::size_t members = 0;
    std::vector<std::string> member_labels;
    GroupingKind grouping = GroupingKind::individual;
    Units units;

    GroupSpec group_spec() const {
        const GroupSpec spec = make_group_model(grouping, members);
        if (spec.member_count() != members) {
            throw InvalidArgument("grouping " + std::string(to_string(grouping)) + " does not fit " +
                                  std::to_string(members) + " members");
        }
        return spec;
    }

    void validate() const {
        if (members == 0) throw InvalidArgument("manifest has no members");
        if (member_labels.size() != members) throw InvalidArgument("one label per member required");
        std::vector<std::string> sorted = member_labels;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw InvalidArgument("member labels are not unique");
        }
        group_spec();
    }

    static DatasetManifest standard(std::string name, std::size_t m, GroupingKind grouping) {
        DatasetManifest manifest{std::move(name), m, {}, grouping, {}};
        for (std::size_t i = 0; i < m; ++i) manifest.member_labels.push_back("m" + std::to_string(i + 1));
        return manifest;
    }
};

inline void to_json(nlohmann::json& j, const DatasetManifest& m) {
    j = nlohmann::json{{"ensemble_name", m.ensemble_name},
                       {"M", m.members},
                       {"member_labels", m.member_labels},
                       {"grouping", std::string(to_string(m.grouping))},
                       {"variables", {{"wind", m.units.wind}, {"temp", m.units.temp}}}};
}

inline void from_json(const nlohmann::json& j, DatasetManifest& m) {
    m.ensemble_name = j.at("ensemble_name").get<std::string>();
    m.members = j.at("M").get<std::size_t>();
    m.member_labels = j.at("member_labels").get<std::vector<std::string>>();
    m.grouping = parse_grouping(j.at("grouping").get<std::string>());
    m.units.wind = j.at("variables").at("wind").get<std::string>();
    m.units.temp = j.at("variables").at("temp").get<std::string>();
}

struct Dataset {
    DatasetManifest manifest;
    std::vector<ForecastCase> cases;  // sorted by (date, station_id)
    std::size_t dropped = 0;          // incomplete rows skipped at load
};

/// `data/foo.csv` -> `data/foo.manifest.json`
inline std::filesystem::path manifest_path(const std::filesystem::path& csv) {
    std::filesystem::path p = csv;
    p.replace_extension(".manifest.json");
    return p;
}

inline void sort_cases(std::vector<ForecastCase>& cases) {
    std::stable_sort(cases.begin(), cases.end(), [](const ForecastCase& a, const ForecastCase& b) {
        if (a.date != b.date) return a.date < b.date;
        return a.station_id < b.station_id;
    });
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline bool is_missing(std::string_view token) {
    return token.empty() || token == "NA" || token == "NaN" || token == "nan" || token == "NAN";
}

inline double parse_number(std::string_view token, std::size_t row) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value)) {
        throw LoadError("cannot parse number '" + std::string(token) + "'", row);
    }
    return value;
}

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> expected_header(std::size_t m) {
    std::vector<std::string> h{"station_id", "date", "obs_wind", "obs_temp"};
    for (std::size_t i = 1; i <= m; ++i) {
        h.push_back("m" + std::to_string(i) + "_wind");
        h.push_back("m" + std::to_string(i) + "_temp");
    }
    return h;
}

}  // namespace detail

/// Reads a dataset CSV and its manifest sidecar (if the sidecar is missing the
/// member count is taken from the header and members are treated as
/// individually distinguishable). Rows with empty or NA fields, or too few
/// fields, are dropped and counted.
inline Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw LoadError("missing header", 1);
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
    const auto header = detail::split_csv(line);
    if (header.size() < 6 || (header.size() - 4) % 2 != 0) throw LoadError("malformed header", 1);
    const std::size_t m = (header.size() - 4) / 2;
    const auto expected = detail::expected_header(m);
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] != expected[i]) {
            throw LoadError("malformed header: column " + std::to_string(i + 1) + " is '" +
                                std::string(header[i]) + "', expected '" + expected[i] + "'",
                            1);
        }
    }

    Dataset ds;
    const auto mpath = manifest_path(path);
    if (std::filesystem::exists(mpath)) {
        std::ifstream min(mpath);
        try {
            ds.manifest = nlohmann::json::parse(min).get<DatasetManifest>();
        } catch (const nlohmann::json::exception& e) {
            throw LoadError("bad manifest " + mpath.string() + ": " + e.what());
        }
        if (ds.manifest.units.wind != "m/s" || ds.manifest.units.temp != "K") {
            throw LoadError("unit mismatch: expected wind in m/s and temperature in K");
        }
        if (ds.manifest.members != m) {
            throw LoadError("manifest declares " + std::to_string(ds.manifest.members) + " members, header has " +
                            std::to_string(m));
        }
        ds.manifest.validate();
    } else {
        ds.manifest = DatasetManifest::standard(path.stem().string(), m, GroupingKind::individual);
    }

    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv(line);
        if (fields.size() > header.size()) throw LoadError("too many fields", row);
        if (fields.size() < header.size() ||
            std::any_of(fields.begin(), fields.end(), [](std::string_view f) { return detail::is_missing(f); })) {
            ++ds.dropped;
            continue;
        }
        ForecastCase c;
        c.station_id = std::string(fields[0]);
        try {
            c.date = Date::parse(fields[1]);
        } catch (const InvalidArgument& e) {
            throw LoadError(e.what(), row);
        }
        c.obs = Vec2(detail::parse_number(fields[2], row), detail::parse_number(fields[3], row));
        if (c.obs(0) < 0.0) throw LoadError("negative wind observation", row);
        c.members.reserve(m);
        for (std::size_t i = 0; i < m; ++i) {
            const Vec2 f(detail::parse_number(fields[4 + 2 * i], row), detail::parse_number(fields[5 + 2 * i], row));
            if (f(0) < 0.0) throw LoadError("negative wind forecast", row);
            c.members.push_back(f);
        }
        ds.cases.push_back(std::move(c));
    }
    sort_cases(ds.cases);
    return ds;
}

inline void write_dataset(const std::filesystem::path& path, const DatasetManifest& manifest,
                          std::span<const ForecastCase> cases) {
    manifest.validate();
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw LoadError("cannot write " + path.string());
        const auto header = detail::expected_header(manifest.members);
        for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
        out << '\n';
        for (const auto& c : cases) {
            if (c.members.size() != manifest.members) throw InvalidArgument("case member count differs from manifest");
            out << c.station_id << ',' << c.date.iso() << ',' << detail::format_number(c.obs(0)) << ','
                << detail::format_number(c.obs(1));
            for (const auto& f : c.members) {
                out << ',' << detail::format_number(f(0)) << ',' << detail::format_number(f(1));
            }
            out << '\n';
        }
    }
    std::ofstream mout(manifest_path(path), std::ios::binary);
    mout << nlohmann::json(manifest).dump(2) << '\n';
}

/// Training cases of the `n_days` calendar days preceding `target_date`.
/// A view: the referenced cases must outlive the window.
struct TrainingWindow {
    std::span<const ForecastCase> cases;
    int n_days = 0;
    Date target_date;

    std::size_t size() const noexcept { return cases.size(); }
    bool empty() const noexcept { return cases.empty(); }
};

struct RollingStep {
    Date target_date;
    TrainingWindow window;
    std::span<const ForecastCase> evaluation;  // all cases dated target_date
};

/// One step per date that has cases, a nonempty window, and a full `n_days`
/// of calendar history inside the dataset (target - n_days >= first date).
/// Windows pool every station. Missing days shrink the window rather than
/// extending it. `cases` must be sorted by date.
inline std::vector<RollingStep> rolling_windows(std::span<const ForecastCase> cases, int n_days) {
    if (n_days < 1) throw InvalidArgument("training window must span at least one day");
    for (std::size_t i = 1; i < cases.size(); ++i) {
        if (cases[i].date < cases[i - 1].date) throw InvalidArgument("cases are not sorted by date");
    }
    std::vector<RollingStep> steps;
    if (cases.empty()) return steps;
    const Date first = cases.front().date;

    auto lower = [&](Date d) {
        return static_cast<std::size_t>(
            std::lower_bound(cases.begin(), cases.end(), d,
                             [](const ForecastCase& c, const Date& v) { return c.date < v; }) -
            cases.begin());
    };

    std::size_t i = 0;
    while (i < cases.size()) {
        const Date target = cases[i].date;
        std::size_t j = i;
        while (j < cases.size() && cases[j].date == target) ++j;
        if (target - static_cast<long>(n_days) >= first) {
            const std::size_t begin = lower(target - static_cast<long>(n_days));
            if (begin < i) {
                steps.push_back({target, TrainingWindow{cases.subspan(begin, i - begin), n_days, target},
                                 cases.subspan(i, j - i)});
            }
        }
        i = j;
    }
    return steps;
}

}  // namespace bivcal
