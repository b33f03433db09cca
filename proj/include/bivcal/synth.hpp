#pragma once

// Synthetic ensembles with a known truth.
//
// Each case has a predictable centre c drawn from a climatology shared by all
// stations and a truth x ~ N2^0(c, S) (wind truncated at zero). Members are
// c + bias + dispersion * eta_j with eta_j ~ N(0, S), wind floored at zero.
// With dispersion 1 and no bias the members and the truth are exchangeable
// draws around c; dispersion < 1 makes the ensemble underdispersive. The
// climatological and the conditional covariance share one correlation, so the
// observations carry `truth_corr`.

#include <cstdio>
#include <vector>

#include "bivcal/data.hpp"
#include "bivcal/dists.hpp"

namespace bivcal {

struct SynthConfig {
    std::size_t n_stations = 10;
    std::size_t n_days = 400;
    std::size_t members = 8;
    double truth_corr = 0.12;
    Vec2 member_bias{0.5, -0.8};
    double dispersion_factor = 0.4;
    GroupingKind grouping = GroupingKind::individual;
    std::uint64_t seed = 7;
    Date start_date{2008, 1, 1};

    // Conditional (forecast error) standard deviations. Daily centres spread
    // twice as wide around the climate mean.
    Vec2 noise_sd{1.0, 1.5};
    Vec2 climate_mean{8.0, 280.0};

    void validate() const {
        if (n_stations < 1 || n_days < 1 || members < 1) throw InvalidArgument("counts must be positive");
        if (!(dispersion_factor > 0.0)) throw InvalidArgument("dispersion_factor must be positive");
        if (!(std::abs(truth_corr) < 1.0)) throw InvalidArgument("truth_corr must lie in (-1, 1)");
        if (!(noise_sd.minCoeff() > 0.0)) throw InvalidArgument("noise_sd must be positive");
        if (grouping_member_count(grouping) != 0 && grouping_member_count(grouping) != members) {
            throw InvalidArgument("grouping " + std::string(to_string(grouping)) + " needs " +
                                  std::to_string(grouping_member_count(grouping)) + " members");
        }
    }

    DatasetManifest manifest() const {
        return DatasetManifest::standard("synthetic", members, grouping);
    }
};

inline std::string station_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "S%03zu", index + 1);
    return buf;
}

/// Deterministic given `cfg.seed`; cases sorted by (date, station).
inline std::vector<ForecastCase> generate(const SynthConfig& cfg) {
    cfg.validate();
    RandomStream rng(cfg.seed);

    auto covariance = [&](const Vec2& sd) {
        Mat2 s;
        s << sd(0) * sd(0), cfg.truth_corr * sd(0) * sd(1), cfg.truth_corr * sd(0) * sd(1), sd(1) * sd(1);
        return s;
    };
    const Mat2 noise_cov = covariance(cfg.noise_sd);
    const Mat2 climate_chol = covariance(2.0 * cfg.noise_sd).llt().matrixL();
    const Mat2 noise_chol = noise_cov.llt().matrixL();
    const ScaleKernel<2> truth_kernel(noise_cov, true);

    // No per-station offsets: with few stations their sample correlation would
    // dominate the pooled one.
    std::vector<ForecastCase> cases;
    cases.reserve(cfg.n_stations * cfg.n_days);
    for (std::size_t day = 0; day < cfg.n_days; ++day) {
        const Date date = cfg.start_date + static_cast<long>(day);
        for (std::size_t s = 0; s < cfg.n_stations; ++s) {
            const Vec2 centre = cfg.climate_mean + climate_chol * Vec2(rng.normal(), rng.normal());
            ForecastCase c;
            c.station_id = station_name(s);
            c.date = date;
            c.obs = truth_kernel.draw(centre, rng);
            c.members.reserve(cfg.members);
            for (std::size_t m = 0; m < cfg.members; ++m) {
                Vec2 f = centre + cfg.member_bias +
                         cfg.dispersion_factor * (noise_chol * Vec2(rng.normal(), rng.normal()));
                f(0) = std::max(f(0), 0.0);
                c.members.push_back(f);
            }
            cases.push_back(std::move(c));
        }
    }
    return cases;
}

}  // namespace bivcal
