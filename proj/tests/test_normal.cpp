#include <gtest/gtest.h>

#include <cmath>

#include "bivcal/normal.hpp"
#include "bivcal/errors.hpp"

using namespace bivcal;

// Reference values computed with 40-digit arithmetic.
struct TailCase {
    double z, log_cdf, hazard;
};

TEST(Normal, LogCdfAndHazardMatchHighPrecisionValues) {
    const TailCase cases[] = {
        {-40.0, -804.60844201375378817, 40.024968847207263723},
        {-20.0, -203.91715537109726394, 20.049753068527850542},
        {-10.0, -53.231285150512470578, 10.098093233962511963},
        {-6.5, -23.938149495161838554, 6.6473013611904906913},
        {-5.9, -20.125799580203174004, 6.0609166256353465176},
        {-3.0, -6.6077262215103495433, 3.2830986549304365069},
        {0.0, -0.69314718055994530942, 0.79788456080286535588},
        {1.96, -0.025315649164282114853, 0.059939300687289996859},
        {5.0, -2.8665161296376359338e-7, 1.4867199409049057124e-6},
    };
    for (const auto& c : cases) {
        EXPECT_NEAR(std_normal_log_cdf(c.z), c.log_cdf, 1e-12 * std::abs(c.log_cdf)) << c.z;
        EXPECT_NEAR(normal_hazard(c.z), c.hazard, 1e-12 * c.hazard) << c.z;
    }
}

TEST(Normal, HazardIsContinuousAcrossTheTailSwitch) {
    const double below = normal_hazard(std::nextafter(-6.0, -7.0));
    const double at = normal_hazard(-6.0);
    EXPECT_NEAR(below, at, 1e-12 * at);
}

TEST(Normal, CdfKnownValuesAndSymmetry) {
    EXPECT_DOUBLE_EQ(std_normal_cdf(0.0), 0.5);
    EXPECT_NEAR(std_normal_cdf(1.96), 0.9750021048517795, 1e-15);
    for (double z = -8.0; z <= 8.0; z += 0.37) {
        EXPECT_NEAR(std_normal_cdf(z) + std_normal_cdf(-z), 1.0, 1e-15);
    }
}

TEST(Normal, QuantileKnownValues) {
    EXPECT_NEAR(std_normal_quantile(1e-300), -37.047096299361199237, 1e-12 * 37.0);
    EXPECT_NEAR(std_normal_quantile(1e-12), -7.0344838253011319298, 1e-13 * 7.0);
    EXPECT_NEAR(std_normal_quantile(1e-10), -6.3613409024040561991, 1e-13 * 6.4);
    EXPECT_NEAR(std_normal_quantile(0.025), -1.9599639845400542118, 1e-14);
    EXPECT_NEAR(std_normal_quantile(0.3), -0.52440051270804081597, 1e-14);
    EXPECT_EQ(std_normal_quantile(0.5), 0.0);
    EXPECT_NEAR(std_normal_quantile(0.9), 1.2815515655446005935, 1e-14);
}

TEST(Normal, QuantileInvertsCdf) {
    for (double p = 0.0005; p < 1.0; p += 0.0123) {
        EXPECT_NEAR(std_normal_cdf(std_normal_quantile(p)), p, 1e-14) << p;
    }
}

TEST(Normal, QuantileRejectsBoundary) {
    EXPECT_THROW(std_normal_quantile(0.0), DomainError);
    EXPECT_THROW(std_normal_quantile(1.0), DomainError);
    EXPECT_THROW(std_normal_quantile(-0.1), DomainError);
    EXPECT_THROW(std_normal_quantile(std::nan("")), DomainError);
}

TEST(Normal, LogPdfMatchesPdf) {
    for (double z = -5.0; z <= 5.0; z += 0.5) {
        EXPECT_NEAR(std::exp(std_normal_log_pdf(z)), std_normal_pdf(z), 1e-16);
    }
}
