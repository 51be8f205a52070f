#include <gtest/gtest.h>

#include <cmath>

#include "akrel/normal.hpp"

using namespace akrel;

// Reference values computed with mpmath at 30 significant digits.
TEST(NormalCdf, MatchesHighPrecisionValues) {
  const struct {
    double x, p;
  } ref[] = {{-8, 6.2209605742717841235e-16}, {-5, 2.8665157187919391167e-7}, {-2, 0.0227501319481792072},
             {-1, 0.15865525393145705141},     {0, 0.5},                        {0.5, 0.69146246127401310364},
             {1, 0.84134474606854294859},      {2, 0.9772498680518207928},     {5, 0.99999971334842812081},
             {8, 0.9999999999999993779}};
  for (const auto& r : ref) {
    EXPECT_NEAR(norm_cdf(r.x), r.p, 1e-12) << r.x;
    if (r.p < 0.5) EXPECT_NEAR(norm_cdf(r.x) / r.p, 1.0, 1e-13) << r.x;
  }
}

TEST(NormalCdf, SymmetricTails) {
  for (double x = 0.0; x <= 8.0; x += 0.25) EXPECT_NEAR(norm_cdf(x) + norm_cdf(-x), 1.0, 1e-15);
}

TEST(NormalCdf, RatioLimits) {
  EXPECT_EQ(norm_cdf_ratio(1.0, 0.0), 1.0);
  EXPECT_EQ(norm_cdf_ratio(-1.0, 0.0), 0.0);
  EXPECT_EQ(norm_cdf_ratio(0.0, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(norm_cdf_ratio(-2.0, 1.0), norm_cdf(-2.0));
  EXPECT_EQ(norm_pdf_ratio(3.0, 0.0), 0.0);
}

TEST(NormalPdf, ClosedForm) {
  EXPECT_NEAR(norm_pdf(0.0), 0.3989422804014327, 1e-16);
  EXPECT_NEAR(norm_pdf(1.0), 0.24197072451914337, 1e-16);
}

TEST(NormalPpf, MatchesHighPrecisionValues) {
  const struct {
    double p, x;
  } ref[] = {{1e-12, -7.0344838253011319326}, {1e-06, -4.7534243088228989573}, {0.001, -3.0902323061678135354},
             {0.02425, -1.9729610513118848376}, {0.1, -1.2815515655446004353},  {0.5, 0.0},
             {0.9, 1.2815515655446005935},      {0.975, 1.9599639845400538556}, {0.999999, 4.7534243088170877657}};
  for (const auto& r : ref) EXPECT_NEAR(norm_ppf(r.p), r.x, 1e-9) << r.p;
}

TEST(NormalPpf, RoundTrip) {
  for (int i = 1; i < 1000; ++i) {
    const double p = i / 1000.0;
    EXPECT_NEAR(norm_cdf(norm_ppf(p)), p, 1e-14);
  }
}

TEST(NormalPpf, Boundaries) {
  EXPECT_EQ(norm_ppf(0.0), -std::numeric_limits<double>::infinity());
  EXPECT_EQ(norm_ppf(1.0), std::numeric_limits<double>::infinity());
  EXPECT_THROW(norm_ppf(1.5), InvalidArgument);
  EXPECT_THROW(norm_ppf(-0.1), InvalidArgument);
}
