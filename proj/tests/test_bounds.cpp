#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "maxdiff/maxdiff.hpp"

using namespace maxdiff;

namespace {

const double kEabs1 = std::sqrt(2.0 / std::numbers::pi);  // E|Z|
const double kEabs2 = 2.0 / std::sqrt(std::numbers::pi);  // E max(|Z1|, |Z2|), iid

const McConfig kMc{1000000, 41};

CovSpec pair_spec(double rho) {
    Matrix s(2, 2);
    s << 1.0, rho, rho, 1.0;
    return CovSpec::explicit_cov(s);
}

const Partition kPair({0}, {1}, 2);

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(HomogeneousBound, IndependentPair) {
    EXPECT_NEAR(bound_thm21(pair_spec(0.0), kPair, 0.05, kMc).value(), 7.0 * 0.05 * kEabs1, 7 * 0.05 * 0.002);
    EXPECT_NEAR(7.0 * 0.05 * kEabs1, 0.2793, 1e-4);
}

TEST(HomogeneousBound, DegenerateDesign) {
    const Design d = degenerate_design();
    const BoundTerm b = bound_thm21(d.spec, d.part, 0.01, kMc);
    EXPECT_NEAR(b.rate * (1.0 - 1.0 / std::sqrt(2.0)), kEabs2, 0.003);
}

TEST(HomogeneousBound, Errors) {
    Matrix g(2, 1);
    g << 1.0, 1.0;
    EXPECT_EQ(code_of([&] { bound_thm21(CovSpec::factor(g), kPair, 0.05, kMc); }), ErrorCode::PerfectCrossCorrelation);
    Matrix s = Matrix::Identity(2, 2);
    s(1, 1) = 4.0;
    EXPECT_EQ(code_of([&] { bound_thm21(CovSpec::explicit_cov(s), kPair, 0.05, kMc); }),
              ErrorCode::HeterogeneousVariances);
}

TEST(HeterogeneousBound, IndependentAndCorrelatedPairs) {
    EXPECT_NEAR(bound_thm31(pair_spec(0.0), kPair, 0.05, kMc).value(), 2.0 * kEabs1 * 0.05, 2 * 0.05 * 0.002);
    for (double rho : {-0.5, 0.4, 0.8}) {
        EXPECT_NEAR(bound_thm31(pair_spec(rho), kPair, 0.05, kMc).value(),
                    std::sqrt(8.0 / std::numbers::pi) * 0.05 / (1.0 - rho), 2 * 0.05 * 0.002 / (1.0 - rho));
    }
}

TEST(HeterogeneousBound, Errors) {
    DesignConfig c;
    c.kind = DesignKind::HeterogViolation;
    c.p = 32;
    c.variance_profile = 1;
    const Design d = gen_design(c);
    EXPECT_EQ(code_of([&] { bound_thm31(d.spec, d.part, 0.05, kMc); }), ErrorCode::ConditionFails);
    Matrix g(2, 1);
    g << 1.0, 2.0;
    EXPECT_EQ(code_of([&] { bound_thm31(CovSpec::factor(g), kPair, 0.05, kMc); }), ErrorCode::PerfectCrossCorrelation);
}

TEST(HeterogeneousBound, HeterogeneousConditionA) {
    // sigma_A = 0.5, sigma_B = 1, cov 0.2: (A) gap = 1 - 0.2 = 0.8, (B) gap = 0.5 - 0.4 = 0.1
    Matrix s(2, 2);
    s << 0.25, 0.2, 0.2, 1.0;
    const BoundTerm b = bound_thm31(CovSpec::explicit_cov(s), kPair, 0.05, kMc);
    EXPECT_NEAR(b.rate, kEabs1 / 0.8, 0.003);
    EXPECT_EQ(b.detail, "S=B");
}

TEST(ConditionalBound, CorrelatedPair) {
    for (double rho : {0.0, 0.5, -0.8}) {
        EXPECT_NEAR(bound_prop24(pair_spec(rho), kPair, 0.05, kMc).value(),
                    2.0 * kEabs1 * 0.05 / std::sqrt(1.0 - rho * rho), 2 * 0.05 * 0.002 / std::sqrt(1 - rho * rho));
    }
}

TEST(ConditionalBound, IndependentBlocksAndDegenerateDesign) {
    EXPECT_NEAR(bound_prop24(CovSpec::explicit_cov(Matrix::Identity(4, 4)), Partition::halves(4), 0.05, kMc).value(),
                2.0 * kEabs2 * 0.05, 2 * 0.05 * 0.003);
    const Design d = degenerate_design();
    EXPECT_EQ(code_of([&] { bound_prop24(d.spec, d.part, 0.05, kMc); }), ErrorCode::ZeroResidualVariance);
}

TEST(Baseline, ClosedForm) {
    EXPECT_NEAR(bound_baseline_lambda_min(pair_spec(0.0), 0.05).value(), 0.1 * (std::sqrt(2.0 * std::log(2.0)) + 2.0),
                1e-14);
    EXPECT_NEAR(0.1 * (std::sqrt(2.0 * std::log(2.0)) + 2.0), 0.3177, 1e-4);
    const Design d = degenerate_design();
    EXPECT_EQ(code_of([&] { bound_baseline_lambda_min(d.spec, 0.05); }), ErrorCode::SingularCovariance);
}

TEST(SingleMaxBound, SingleMaximum) {
    const CovSpec one = CovSpec::explicit_cov(Matrix::Identity(1, 1));
    EXPECT_NEAR(bound_cor23_single(one, 0.05, kMc).value(), 0.0798, 2e-4);
    const CovSpec two = CovSpec::explicit_cov(Matrix::Identity(2, 2));
    EXPECT_NEAR(bound_cor23_single(two, 0.05, kMc).value(), 2.0 * kEabs2 * 0.05, 2 * 0.05 * 0.003);
    const auto v = sample(one, 200000, 42);
    const std::vector<double> x(v.data.data(), v.data.data() + 200000);
    EXPECT_LE(levy_hat_single(x, 0.05).value, bound_cor23_single(one, 0.05, kMc).value());
    const CovSpec doubled = CovSpec::explicit_cov(4.0 * Matrix::Identity(2, 2));
    EXPECT_EQ(bound_cor23_single(doubled, 0.05, kMc).value(), 0.5 * bound_cor23_single(two, 0.05, kMc).value());
}

TEST(DeltaGridBound, EmptyNearSetPicksLargestDelta) {
    const CovSpec spec = pair_spec(0.3);
    const std::vector<double> grid = {0.1, 0.2, 0.4, 0.6};
    const Cor22Result r = bound_cor22(spec, kPair, 0.05, grid, kMc);
    EXPECT_EQ(r.omega_delta, 0.0);
    EXPECT_EQ(r.best_delta, 0.6);
    EXPECT_NEAR(r.value, 7.0 * 0.05 * kEabs1 / 0.6, 7 * 0.05 * 0.002 / 0.6);
}

TEST(DeltaGridBound, NoAdmissibleDelta) {
    Matrix g(2, 1);
    g << 1.0, 1.0;
    const std::vector<double> grid = {0.5};
    EXPECT_EQ(code_of([&] { bound_cor22(CovSpec::factor(g), kPair, 0.05, grid, kMc); }), ErrorCode::NoAdmissibleDelta);
}

TEST(DeltaGridBound, ExchangeableOverlapDominatesLowerBound) {
    DesignConfig c;
    c.kind = DesignKind::ExchangeableOverlap;
    c.p = 14;
    c.overlap_k = 2;
    c.rho = 0.3;
    const Design d = gen_design(c);
    const std::vector<double> grid = {0.5};
    const Cor22Result r = bound_cor22(d.spec, d.part, 0.05, grid, McConfig{200000, 43});
    EXPECT_GT(r.omega_delta, 0.0);
    EXPECT_GE(r.value, 2.0 / 14.0);
    EXPECT_GE(r.value, levy_hat(sample_max_diff(d.spec, d.part, 100000, 44), 0.05).value);
}

TEST(ExchangeableLower, Geometry) {
    EXPECT_DOUBLE_EQ(lower_bound_exchangeable(1, 3).lower, 1.0 / 3.0);
    const auto g = lower_bound_exchangeable(2, 14);
    EXPECT_DOUBLE_EQ(g.lower, 1.0 / 7.0);
    EXPECT_DOUBLE_EQ(g.residual, 0.5);
    EXPECT_EQ(g.m, 8u);
    EXPECT_NO_THROW(lower_bound_exchangeable(7, 9));  // k = m - 1
    EXPECT_EQ(code_of([] { lower_bound_exchangeable(8, 8); }), ErrorCode::BadGeometry);  // k = m
    EXPECT_EQ(code_of([] { lower_bound_exchangeable(2, 13); }), ErrorCode::BadGeometry);
}

TEST(BoundTerm, ExactlyLinearInEpsilon) {
    const CovSpec spec = pair_spec(0.2);
    const McConfig mc{20000, 45};
    const double b1 = bound_thm31(spec, kPair, 0.0375, mc).value();
    EXPECT_EQ(bound_thm31(spec, kPair, 0.075, mc).value(), 2.0 * b1);
}

TEST(Report, DegenerateDesignKeepsHomogeneousBound) {
    const Design d = degenerate_design();
    const BoundReport r = evaluate_bounds(d.spec, d.part, 0.05, McConfig{20000, 46});
    EXPECT_TRUE(r.thm21.applicable());
    EXPECT_TRUE(r.thm31.applicable());
    EXPECT_FALSE(r.baseline.applicable());
    EXPECT_EQ(*r.baseline.reason, ErrorCode::SingularCovariance);
    EXPECT_FALSE(r.prop24.applicable());
    EXPECT_TRUE(r.any_applicable());
    const auto j = to_json(r);
    EXPECT_EQ(j["baseline_lambda_min"]["inapplicable"], "SingularCovariance");
    EXPECT_TRUE(j["thm21_homogeneous"].is_number());
}
