#pragma once

// Multivariate forecast verification: energy score, multivariate and
// univariate rank histograms, reliability index, determinant sharpness and
// point-forecast errors.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bivcal/median.hpp"
#include "bivcal/random.hpp"

namespace bivcal {

/// ES of an ensemble: (1/M) sum ||f_j - x|| - (1/2M^2) sum_j sum_k ||f_j - f_k||.
inline double energy_score_ensemble(std::span<const Vec2> members, const Vec2& x) {
    if (members.empty()) throw InvalidArgument("energy score of an empty ensemble");
    const double m = static_cast<double>(members.size());
    double accuracy = 0.0;
    for (const auto& f : members) accuracy += (f - x).norm();
    double spread = 0.0;
    for (std::size_t j = 0; j < members.size(); ++j) {
        for (std::size_t k = j + 1; k < members.size(); ++k) spread += (members[j] - members[k]).norm();
    }
    return accuracy / m - spread / (m * m);  // each unordered pair counted once: 2 * spread / (2 M^2)
}

/// Monte Carlo ES of a predictive sample: the spread term pairs consecutive
/// draws, (1/n) sum ||X_j - x|| - (1/(2(n-1))) sum_j ||X_j - X_{j+1}||.
inline double energy_score_mc(std::span<const Vec2> sample, const Vec2& x) {
    if (sample.size() < 2) throw InvalidArgument("energy_score_mc needs at least two draws");
    const double n = static_cast<double>(sample.size());
    double accuracy = 0.0;
    for (const auto& s : sample) accuracy += (s - x).norm();
    double spread = 0.0;
    for (std::size_t j = 0; j + 1 < sample.size(); ++j) spread += (sample[j] - sample[j + 1]).norm();
    return accuracy / n - spread / (2.0 * (n - 1.0));
}

/// Multivariate rank of `x` within `members` by componentwise pre-ranks,
/// ties broken uniformly at random. Result in 1..M+1.
inline std::size_t multivariate_rank(std::span<const Vec2> members, const Vec2& x, RandomStream& rng) {
    const std::size_t total = members.size() + 1;
    auto at = [&](std::size_t i) -> const Vec2& { return i == 0 ? x : members[i - 1]; };
    std::vector<std::size_t> pre(total, 0);
    for (std::size_t i = 0; i < total; ++i) {
        const Vec2& v = at(i);
        for (std::size_t j = 0; j < total; ++j) {
            const Vec2& w = at(j);
            if (w(0) <= v(0) && w(1) <= v(1)) ++pre[i];
        }
    }
    std::size_t below = 0, ties = 0;
    for (std::size_t i = 0; i < total; ++i) {
        if (pre[i] < pre[0]) ++below;
        else if (pre[i] == pre[0]) ++ties;  // includes x itself
    }
    return below + 1 + rng.index(ties);
}

/// Rank of `x` among scalar `values`, ties broken at random. Result in 1..M+1.
inline std::size_t univariate_rank(std::span<const double> values, double x, RandomStream& rng) {
    std::size_t below = 0, ties = 0;
    for (double v : values) {
        if (v < x) ++below;
        else if (v == x) ++ties;
    }
    return below + 1 + rng.index(ties + 1);
}

/// Counts of ranks 1..M+1.
class RankHistogram {
public:
    explicit RankHistogram(std::size_t ensemble_size) : counts_(ensemble_size + 1, 0) {}

    void add(std::size_t rank) {
        if (rank < 1 || rank > counts_.size()) throw InvalidArgument("rank out of range");
        ++counts_[rank - 1];
        ++n_cases_;
    }

    std::size_t bins() const noexcept { return counts_.size(); }
    std::size_t n_cases() const noexcept { return n_cases_; }
    const std::vector<std::size_t>& counts() const noexcept { return counts_; }

    static RankHistogram from_counts(std::vector<std::size_t> counts) {
        if (counts.empty()) throw InvalidArgument("histogram needs at least one bin");
        RankHistogram h(counts.size() - 1);
        h.counts_ = std::move(counts);
        for (auto c : h.counts_) h.n_cases_ += c;
        return h;
    }

    /// "rank,count" lines with a header.
    std::string to_csv() const {
        std::string out = "rank,count\n";
        for (std::size_t r = 0; r < counts_.size(); ++r) {
            out += std::to_string(r + 1) + "," + std::to_string(counts_[r]) + "\n";
        }
        return out;
    }

private:
    std::vector<std::size_t> counts_;
    std::size_t n_cases_ = 0;
};

/// Delta = sum_r |rho_r - 1/(M+1)|.
inline double reliability_index(const RankHistogram& h) {
    if (h.n_cases() == 0) throw InvalidArgument("reliability index of an empty histogram");
    // Integer numerators |(M+1) c_r - n|, so the only rounding is the final division.
    const auto n = static_cast<long long>(h.n_cases());
    const auto bins = static_cast<long long>(h.bins());
    long long total = 0;
    for (auto c : h.counts()) total += std::llabs(bins * static_cast<long long>(c) - n);
    return static_cast<double>(total) / (static_cast<double>(bins) * static_cast<double>(n));
}

/// DS = det(cov)^(1/(2d)). Determinants that are negative only by rounding count as 0.
inline double determinant_sharpness(const Eigen::MatrixXd& cov) {
    if (cov.rows() != cov.cols() || cov.rows() == 0) throw InvalidArgument("covariance must be square");
    const double d = static_cast<double>(cov.rows());
    const double det = cov.determinant();
    if (det < 0.0) {
        const double scale = std::pow(std::max(cov.cwiseAbs().maxCoeff(), 1e-300), d);
        if (det < -1e-12 * scale) throw InvalidArgument("invalid covariance: negative determinant");
        return 0.0;
    }
    return std::pow(det, 1.0 / (2.0 * d));
}

/// Sample covariance with divisor n - 1.
inline Mat2 sample_covariance(std::span<const Vec2> points) {
    if (points.size() < 2) return Mat2::Zero();
    Vec2 mean = Vec2::Zero();
    for (const auto& p : points) mean += p;
    mean /= static_cast<double>(points.size());
    Mat2 cov = Mat2::Zero();
    for (const auto& p : points) cov += (p - mean) * (p - mean).transpose();
    return cov / static_cast<double>(points.size() - 1);
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    if (n < 2 || b.size() != n) return 0.0;
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    return saa > 0.0 && sbb > 0.0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

/// A raw forecast ensemble.
struct EnsembleForecast {
    std::vector<Vec2> members;
};

/// A predictive distribution known through a sampler. Ranks are computed
/// against `rank_members` draws; `exact_mean`, when available, replaces the
/// sample mean as mean point forecast.
struct PredictiveForecast {
    std::function<std::vector<Vec2>(std::size_t, RandomStream&)> sampler;
    std::size_t rank_members = 0;
    std::optional<Vec2> exact_mean;
};

using Forecast = std::variant<EnsembleForecast, PredictiveForecast>;

/// Per-case verification quantities.
struct CaseScores {
    Vec2 obs = Vec2::Zero();
    Vec2 mean = Vec2::Zero();
    Vec2 median = Vec2::Zero();
    double es = 0.0;
    double ds = 0.0;
    std::size_t rank = 1;
    std::size_t rank_wind = 1;
    std::size_t rank_temp = 1;
    bool covered_wind = false;
    bool covered_temp = false;
};

struct VerificationReport {
    std::string method;
    double mean_es = 0.0;
    double delta = 0.0;
    double mean_ds = 0.0;
    double ee_median = 0.0;
    double ee_mean = 0.0;
    double corr_median = 0.0;
    double corr_mean = 0.0;
    std::size_t n_cases = 0;
    double delta_wind = 0.0;
    double delta_temp = 0.0;
    double coverage_wind = 0.0;
    double coverage_temp = 0.0;
    RankHistogram histogram{1};
};

namespace detail {

inline void rank_against(std::span<const Vec2> members, const Vec2& obs, RandomStream& rng, CaseScores& s) {
    s.rank = multivariate_rank(members, obs, rng);
    std::vector<double> w, t;
    for (const auto& f : members) {
        w.push_back(f(0));
        t.push_back(f(1));
    }
    s.rank_wind = univariate_rank(w, obs(0), rng);
    s.rank_temp = univariate_rank(t, obs(1), rng);
    auto inside = [](const std::vector<double>& v, double x) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        return x >= *lo && x <= *hi;
    };
    s.covered_wind = inside(w, obs(0));
    s.covered_temp = inside(t, obs(1));
}

}  // namespace detail

/// Scores one case. Ensembles use the closed-form ES and their own members
/// for ranks, DS, mean and geometric median; predictive forecasts use an
/// `n_mc` draw for ES, DS and median and a separate M-member draw for ranks.
inline CaseScores score_case(const Forecast& forecast, const Vec2& obs, std::size_t n_mc, RandomStream& rng) {
    CaseScores s;
    s.obs = obs;
    if (const auto* ens = std::get_if<EnsembleForecast>(&forecast)) {
        const std::span<const Vec2> members(ens->members);
        if (members.empty()) throw InvalidArgument("empty ensemble");
        s.es = energy_score_ensemble(members, obs);
        s.ds = determinant_sharpness(sample_covariance(members));
        Vec2 mean = Vec2::Zero();
        for (const auto& f : members) mean += f;
        s.mean = mean / static_cast<double>(members.size());
        s.median = geometric_median<2>(members);
        detail::rank_against(members, obs, rng, s);
        return s;
    }
    const auto& pred = std::get<PredictiveForecast>(forecast);
    if (pred.rank_members < 1) throw InvalidArgument("predictive forecast needs rank_members >= 1");
    const auto draws = pred.sampler(n_mc, rng);
    const std::span<const Vec2> sample(draws);
    s.es = energy_score_mc(sample, obs);
    s.ds = determinant_sharpness(sample_covariance(sample));
    if (pred.exact_mean) {
        s.mean = *pred.exact_mean;
    } else {
        Vec2 mean = Vec2::Zero();
        for (const auto& d : sample) mean += d;
        s.mean = mean / static_cast<double>(sample.size());
    }
    s.median = geometric_median<2>(sample);
    const auto rank_draws = pred.sampler(pred.rank_members, rng);
    detail::rank_against(rank_draws, obs, rng, s);
    return s;
}

/// Aggregates per-case scores, summed in input order.
inline VerificationReport aggregate(const std::string& method, std::span<const CaseScores> cases,
                                    std::size_t ensemble_size) {
    if (cases.empty()) throw InvalidArgument("no cases to verify");
    VerificationReport r;
    r.method = method;
    r.n_cases = cases.size();
    r.histogram = RankHistogram(ensemble_size);
    RankHistogram hw(ensemble_size), ht(ensemble_size);
    std::vector<double> med_w, med_t, mean_w, mean_t;
    double covered_w = 0.0, covered_t = 0.0;
    for (const auto& c : cases) {
        r.mean_es += c.es;
        r.mean_ds += c.ds;
        r.ee_median += (c.median - c.obs).norm();
        r.ee_mean += (c.mean - c.obs).norm();
        r.histogram.add(c.rank);
        hw.add(c.rank_wind);
        ht.add(c.rank_temp);
        covered_w += c.covered_wind ? 1.0 : 0.0;
        covered_t += c.covered_temp ? 1.0 : 0.0;
        med_w.push_back(c.median(0));
        med_t.push_back(c.median(1));
        mean_w.push_back(c.mean(0));
        mean_t.push_back(c.mean(1));
    }
    const double n = static_cast<double>(cases.size());
    r.mean_es /= n;
    r.mean_ds /= n;
    r.ee_median /= n;
    r.ee_mean /= n;
    r.delta = reliability_index(r.histogram);
    r.delta_wind = reliability_index(hw);
    r.delta_temp = reliability_index(ht);
    r.coverage_wind = covered_w / n;
    r.coverage_temp = covered_t / n;
    r.corr_median = pearson(med_w, med_t);
    r.corr_mean = pearson(mean_w, mean_t);
    return r;
}

struct VerificationCase {
    Forecast forecast;
    Vec2 obs;
};

/// Scores every case in order with one random stream and aggregates.
/// `ensemble_size` fixes the histogram to M + 1 bins.
inline VerificationReport evaluate(const std::string& method, std::span<const VerificationCase> cases,
                                   std::size_t ensemble_size, std::size_t n_mc, RandomStream& rng) {
    if (cases.empty()) throw InvalidArgument("no cases to verify");
    std::vector<CaseScores> scores;
    scores.reserve(cases.size());
    for (const auto& c : cases) scores.push_back(score_case(c.forecast, c.obs, n_mc, rng));
    return aggregate(method, scores, ensemble_size);
}

}  // namespace bivcal
