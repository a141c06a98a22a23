#include <gtest/gtest.h>

#include <cmath>

#include "maxdiff/maxdiff.hpp"

using namespace maxdiff;

namespace {

Matrix equicorr(std::size_t p, double rho) {
    Matrix s = Matrix::Constant(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p), rho);
    s.diagonal().setOnes();
    return s;
}

Design profile_design(int profile) {
    DesignConfig c;
    c.kind = DesignKind::HeterogViolation;
    c.p = 64;
    c.rho = 0.9;
    c.variance_profile = profile;
    return gen_design(c);
}

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

TEST(CovSpec, FactorGivesOuterProduct) {
    Matrix g(2, 1);
    g << 1.0, 1.0;
    const CovSpec s = CovSpec::factor(g);
    EXPECT_EQ(explicit_cov(s), Matrix::Ones(2, 2));
    EXPECT_EQ(s.form(), CovForm::Factor);
    EXPECT_EQ(s.rank_dim(), 1u);
}

TEST(CovSpec, ExplicitIdentityPassesThrough) {
    const CovSpec s = CovSpec::explicit_cov(Matrix::Identity(2, 2));
    EXPECT_EQ(explicit_cov(s), Matrix::Identity(2, 2));
}

TEST(CovSpec, DegenerateDesignIsSingularWithUnitDiagonal) {
    const Design d = degenerate_design();
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(d.spec.sd(i), 1.0, 1e-15);
    EXPECT_NEAR(min_eigenvalue(d.spec.sigma()), 0.0, 1e-12);
}

TEST(CovSpec, RejectsInvalidInput) {
    Matrix asym = Matrix::Identity(2, 2);
    asym(0, 1) = 0.5;
    EXPECT_EQ(code_of([&] { CovSpec::explicit_cov(asym); }), ErrorCode::NotSymmetric);
    Matrix indefinite(2, 2);
    indefinite << 1.0, 2.0, 2.0, 1.0;
    EXPECT_EQ(code_of([&] { CovSpec::explicit_cov(indefinite); }), ErrorCode::NotPSD);
    Matrix zero_var = Matrix::Identity(2, 2);
    zero_var(1, 1) = 0.0;
    EXPECT_EQ(code_of([&] { CovSpec::explicit_cov(zero_var); }), ErrorCode::ZeroVariance);
    Matrix nan = Matrix::Identity(2, 2);
    nan(0, 0) = std::nan("");
    EXPECT_EQ(code_of([&] { CovSpec::explicit_cov(nan); }), ErrorCode::NonFinite);
    Matrix g = Matrix::Zero(2, 1);
    g(0, 0) = 1.0;
    EXPECT_EQ(code_of([&] { CovSpec::factor(g); }), ErrorCode::ZeroVariance);
    EXPECT_EQ(code_of([&] { CovSpec::factor(Matrix::Identity(2, 2), Vector::Zero(3)); }),
              ErrorCode::DimensionMismatch);
}

TEST(CovSpec, HashAndJsonRoundTrip) {
    const Design d = degenerate_design();
    const CovSpec back = cov_spec_from_json(to_json(d.spec));
    EXPECT_EQ(back.hash(), d.spec.hash());
    EXPECT_EQ(back.sigma(), d.spec.sigma());
    EXPECT_NE(d.spec.shifted(1.0).hash(), d.spec.hash());
}

TEST(Partition, ValidatesCover) {
    EXPECT_EQ(code_of([] { Partition({0}, {0, 1}, 2); }), ErrorCode::BadPartition);
    EXPECT_EQ(code_of([] { Partition({0}, {}, 1); }), ErrorCode::BadPartition);
    EXPECT_EQ(code_of([] { Partition({0}, {2}, 3); }), ErrorCode::BadPartition);
    const Partition p = Partition::split_at(5, 2);
    EXPECT_EQ(p.a(), (IndexSet{0, 1}));
    EXPECT_EQ(p.b(), (IndexSet{2, 3, 4}));
    EXPECT_EQ(p.swapped().a(), p.b());
}

TEST(RhoBar, Examples) {
    const Partition p2({0}, {1}, 2);
    EXPECT_EQ(rho_bar(CovSpec::explicit_cov(Matrix::Identity(2, 2)), p2), 0.0);
    EXPECT_NEAR(rho_bar(CovSpec::explicit_cov(equicorr(6, 0.9)), Partition::split_at(6, 2)), 0.9, 1e-15);
    const Design d = degenerate_design();
    EXPECT_NEAR(rho_bar(d.spec, d.part), 1.0 / std::sqrt(2.0), 1e-12);
}

TEST(Conditions, IdentityHoldsBothWays) {
    const auto r = check_conditions(CovSpec::explicit_cov(Matrix::Identity(4, 4)), Partition::halves(4));
    EXPECT_TRUE(r.cond_a_holds);
    EXPECT_TRUE(r.cond_b_holds);
    EXPECT_EQ(r.c_ab, 1.0);
    EXPECT_EQ(r.s_set, "A,B");
}

TEST(Conditions, EquicorrelatedGap) {
    const auto r = check_conditions(CovSpec::explicit_cov(equicorr(6, 0.9)), Partition::halves(6));
    EXPECT_TRUE(r.cond_a_holds && r.cond_b_holds);
    EXPECT_NEAR(r.c_ab, 0.1, 1e-12);
}

TEST(Conditions, ViolationDesignFailsBoth) {
    const Design d = profile_design(1);
    const auto r = check_conditions(d.spec, d.part);
    EXPECT_FALSE(r.cond_a_holds);
    EXPECT_FALSE(r.cond_b_holds);
    EXPECT_TRUE(std::isnan(r.c_ab));
}

TEST(ViolationStats, IdentityHasNone) {
    const auto s = violation_stats(CovSpec::explicit_cov(Matrix::Identity(4, 4)), Partition::halves(4));
    EXPECT_EQ(s.nu_a, 0.0);
    EXPECT_EQ(s.nu_b, 0.0);
    EXPECT_TRUE(std::isnan(s.m_a));
}

TEST(ViolationStats, ReportedProfiles) {
    const auto s1 = violation_stats(profile_design(1).spec, profile_design(1).part);
    EXPECT_DOUBLE_EQ(s1.nu_a, 0.75);
    EXPECT_DOUBLE_EQ(s1.nu_b, 0.75);
    EXPECT_NEAR(s1.m_a, -8.067, 5e-4);
    EXPECT_NEAR(s1.m_b, -8.067, 5e-4);
    const auto s2 = violation_stats(profile_design(2).spec, profile_design(2).part);
    EXPECT_DOUBLE_EQ(s2.nu_a, 0.875);
    EXPECT_DOUBLE_EQ(s2.nu_b, 0.875);
    EXPECT_NEAR(s2.m_a, -12.586, 5e-4);
    EXPECT_NEAR(s2.m_b, -12.586, 5e-4);
}

TEST(ResidualCov, ScalarSchurComplement) {
    const double rho = 0.6;
    Matrix s(2, 2);
    s << 1.0, rho, rho, 1.0;
    const auto r = residual_cov(CovSpec::explicit_cov(s), Partition({0}, {1}, 2));
    EXPECT_NEAR(r.a(0, 0), 1.0 - rho * rho, 1e-15);
    EXPECT_NEAR(r.b(0, 0), 1.0 - rho * rho, 1e-15);
}

TEST(ResidualCov, IndependentBlocks) {
    const auto r = residual_cov(CovSpec::explicit_cov(Matrix::Identity(4, 4)), Partition::halves(4));
    EXPECT_EQ(r.a, Matrix::Identity(2, 2));
    EXPECT_EQ(r.b, Matrix::Identity(2, 2));
}

TEST(ResidualCov, DegenerateDesignHasZeroResidualVariance) {
    const Design d = degenerate_design();
    const auto r = residual_cov(d.spec, d.part);
    EXPECT_NEAR(r.a.diagonal().minCoeff(), 0.0, 1e-12);
    EXPECT_NEAR(r.b.diagonal().minCoeff(), 0.0, 1e-12);
}

TEST(ResidualCov, SingularBlock) {
    Matrix g(4, 2);
    g << 1, 0, 1, 0, 0, 1, 1, 1;
    EXPECT_EQ(code_of([&] { residual_cov(CovSpec::factor(g), Partition::halves(4)); }), ErrorCode::SingularBlock);
}

TEST(SqrtFactor, Examples) {
    EXPECT_TRUE(sqrt_factor(Matrix::Identity(3, 3)).cols() == 3);
    const Matrix l1 = sqrt_factor(Matrix::Identity(3, 3));
    EXPECT_LT((l1 * l1.transpose() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-14);
    const Matrix ones = Matrix::Ones(2, 2);
    const Matrix l2 = sqrt_factor(ones);
    EXPECT_EQ(l2.cols(), 1);
    EXPECT_LT((l2 * l2.transpose() - ones).cwiseAbs().maxCoeff(), 1e-14);
    Xoshiro256 rng(5);
    Matrix g(10, 3);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
    const Matrix s = g * g.transpose();
    const Matrix l3 = sqrt_factor(s);
    EXPECT_EQ(l3.cols(), 3);
    EXPECT_LT((l3 * l3.transpose() - s).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(MinEigenvalue, Examples) {
    EXPECT_NEAR(min_eigenvalue(Matrix::Identity(5, 5)), 1.0, 1e-15);
    for (double rho : {-0.7, 0.3, 0.95}) {
        Matrix s(2, 2);
        s << 1.0, rho, rho, 1.0;
        EXPECT_NEAR(min_eigenvalue(s), 1.0 - std::abs(rho), 1e-14);
    }
}

TEST(CorrelationMatrix, UnitDiagonal) {
    const Design d = profile_design(1);
    const Matrix r = correlation_matrix(d.spec);
    for (Eigen::Index i = 0; i < r.rows(); ++i) EXPECT_EQ(r(i, i), 1.0);
    EXPECT_NEAR(r(0, 40), 0.9, 1e-12);
}
