#pragma once

// JSON documents for fitted models, EM diagnostics and verification reports.
// Doubles are written in shortest round-trip form, so parameters survive a
// write/read cycle bit for bit.

#include <nlohmann/json.hpp>

#include <optional>
#include <string>

#include "bivcal/copula.hpp"
#include "bivcal/em.hpp"
#include "bivcal/verify.hpp"

namespace bivcal {

using json = nlohmann::json;

namespace detail {

template <int D>
json vec_to_json(const Vec<D>& v) {
    json j = json::array();
    for (int i = 0; i < D; ++i) j.push_back(v(i));
    return j;
}

template <int D>
Vec<D> vec_from_json(const json& j) {
    if (!j.is_array() || j.size() != D) throw InvalidArgument("expected a " + std::to_string(D) + "-vector");
    Vec<D> v;
    for (int i = 0; i < D; ++i) v(i) = j[i].get<double>();
    return v;
}

template <int D>
json mat_to_json(const Mat<D>& m) {
    json j = json::array();
    for (int r = 0; r < D; ++r) j.push_back(vec_to_json<D>(m.row(r).transpose()));
    return j;
}

template <int D>
Mat<D> mat_from_json(const json& j) {
    if (!j.is_array() || j.size() != D) throw InvalidArgument("expected a matrix with " + std::to_string(D) + " rows");
    Mat<D> m;
    for (int r = 0; r < D; ++r) m.row(r) = vec_from_json<D>(j[r]).transpose();
    return m;
}

}  // namespace detail

inline json groups_to_json(const GroupSpec& spec) {
    json j = json::array();
    for (const auto& g : spec.groups()) {
        json members = json::array();
        for (auto m : g.members) members.push_back(m + 1);  // 1-based on the wire
        j.push_back({{"id", g.id}, {"members", members}});
    }
    return j;
}

inline GroupSpec groups_from_json(const json& j) {
    std::vector<Group> groups;
    for (const auto& g : j) {
        Group group{g.at("id").get<std::string>(), {}};
        for (const auto& m : g.at("members")) {
            const auto index = m.get<std::size_t>();
            if (index < 1) throw InvalidArgument("member indices are 1-based");
            group.members.push_back(index - 1);
        }
        groups.push_back(std::move(group));
    }
    return GroupSpec(std::move(groups));
}

/// Where and how a model was trained.
struct ModelProvenance {
    std::string ensemble;
    std::optional<Date> window_start;
    std::optional<Date> window_end;
};

namespace detail {

inline json window_json(const std::optional<Date>& start, const std::optional<Date>& end) {
    return {{"start_date", start ? json(start->iso()) : json(nullptr)},
            {"end_date", end ? json(end->iso()) : json(nullptr)}};
}

}  // namespace detail

template <int D>
json model_to_json(const AffineMixture<D>& model, const ModelProvenance& provenance = {}) {
    json intercepts = json::array();
    json slopes = json::array();
    for (const auto& a : model.intercepts) intercepts.push_back(detail::vec_to_json<D>(a));
    for (const auto& b : model.slopes) slopes.push_back(detail::mat_to_json<D>(b));
    json j{{"mode", std::string(to_string(model.mode))},
           {"family", model.truncated ? "truncnormal" : "normal"},
           {"groups", groups_to_json(model.groups)},
           {"weights", model.weights},
           {"A", intercepts},
           {"B", slopes},
           {"sigma", detail::mat_to_json<D>(model.scale)},
           {"training_window", detail::window_json(provenance.window_start, provenance.window_end)},
           {"ensemble", provenance.ensemble}};
    return j;
}

template <int D>
AffineMixture<D> model_from_json(const json& j) {
    AffineMixture<D> model;
    model.mode = parse_mode(j.at("mode").get<std::string>());
    model.truncated = j.value("family", std::string("truncnormal")) == "truncnormal";
    model.groups = groups_from_json(j.at("groups"));
    model.weights = j.at("weights").get<std::vector<double>>();
    for (const auto& a : j.at("A")) model.intercepts.push_back(detail::vec_from_json<D>(a));
    for (const auto& b : j.at("B")) model.slopes.push_back(detail::mat_from_json<D>(b));
    model.scale = detail::mat_from_json<D>(j.at("sigma"));
    model.validate();
    return model;
}

inline json copula_to_json(const CopulaModel& cm, std::optional<Date> corr_start = std::nullopt,
                           std::optional<Date> corr_end = std::nullopt, const ModelProvenance& provenance = {}) {
    return {{"wind_margin", model_to_json<1>(cm.wind_margin, provenance)},
            {"temp_margin", model_to_json<1>(cm.temp_margin, provenance)},
            {"latent_corr", cm.latent_corr},
            {"corr_window", {{"start", corr_start ? json(corr_start->iso()) : json(nullptr)},
                             {"end", corr_end ? json(corr_end->iso()) : json(nullptr)}}}};
}

inline CopulaModel copula_from_json(const json& j) {
    CopulaModel cm;
    cm.wind_margin = model_from_json<1>(j.at("wind_margin"));
    cm.temp_margin = model_from_json<1>(j.at("temp_margin"));
    cm.latent_corr = j.at("latent_corr").get<double>();
    if (!(std::abs(cm.latent_corr) < 1.0)) throw InvalidArgument("latent_corr must lie in (-1, 1)");
    return cm;
}

inline json diagnostics_to_json(const EmDiagnostics& d) {
    return {{"iterations", d.iterations},
            {"loglik_trace", d.loglik_trace},
            {"converged", d.converged},
            {"best_iter", d.best_iter},
            {"init_fallback", d.init_fallback},
            {"warnings", d.warnings}};
}

inline json report_to_json(const VerificationReport& r) {
    return {{"method", r.method},
            {"es", r.mean_es},
            {"delta", r.delta},
            {"ds", r.mean_ds},
            {"ee_median", r.ee_median},
            {"ee_mean", r.ee_mean},
            {"corr_median", r.corr_median},
            {"corr_mean", r.corr_mean},
            {"n_cases", r.n_cases},
            {"delta_wind", r.delta_wind},
            {"delta_temp", r.delta_temp},
            {"coverage_wind", r.coverage_wind},
            {"coverage_temp", r.coverage_temp},
            {"rank_counts", r.histogram.counts()}};
}

inline VerificationReport report_from_json(const json& j) {
    VerificationReport r;
    r.method = j.at("method").get<std::string>();
    r.mean_es = j.at("es").get<double>();
    r.delta = j.at("delta").get<double>();
    r.mean_ds = j.at("ds").get<double>();
    r.ee_median = j.at("ee_median").get<double>();
    r.ee_mean = j.at("ee_mean").get<double>();
    r.corr_median = j.at("corr_median").get<double>();
    r.corr_mean = j.at("corr_mean").get<double>();
    r.n_cases = j.value("n_cases", std::size_t{0});
    r.delta_wind = j.value("delta_wind", 0.0);
    r.delta_temp = j.value("delta_temp", 0.0);
    r.coverage_wind = j.value("coverage_wind", 0.0);
    r.coverage_temp = j.value("coverage_temp", 0.0);
    if (j.contains("rank_counts")) {
        r.histogram = RankHistogram::from_counts(j.at("rank_counts").get<std::vector<std::size_t>>());
    }
    return r;
}

}  // namespace bivcal
