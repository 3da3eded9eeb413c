#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "lcmid/error.hpp"
#include "lcmid/linalg.hpp"
#include "lcmid/prob_matrices.hpp"
#include "oracles.hpp"

using namespace lcmid;

namespace {

std::vector<MatrixXd> random_gamma(std::mt19937_64& rng, int c_count, const std::vector<int>& levels) {
    std::normal_distribution<double> n;
    std::vector<MatrixXd> g;
    for (int m : levels) {
        MatrixXd x(m, c_count);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
        x.row(0).setZero();
        g.push_back(x);
    }
    return g;
}

} // namespace

TEST(Psi, SingleClassSingleItem) {
    CoreParams p;
    p.eta = VectorXd::Ones(1);
    p.theta = {MatrixXd(2, 1)};
    p.theta[0] << 0.3, 0.7;
    const auto psi = build_psi(p, PatternSpace({2}));
    ASSERT_EQ(psi.values.rows(), 1);
    EXPECT_DOUBLE_EQ(psi.values(0, 0), 0.7);
    EXPECT_EQ(psi.row_index, std::vector<std::size_t>{1});
}

TEST(Psi, DuplicateClassesGiveIdenticalColumns) {
    std::mt19937_64 rng(1);
    auto p = oracle::random_core(rng, 3, {2, 3});
    for (auto& t : p.theta) t.col(1) = t.col(0);
    const auto psi = build_psi(p, PatternSpace({2, 3}));
    EXPECT_EQ(psi.values.col(0), psi.values.col(1));
}

TEST(Psi, MatchesProductTable) {
    std::mt19937_64 rng(2);
    const auto p = oracle::random_core(rng, 2, {2, 2});
    const auto psi = build_psi(p, PatternSpace({2, 2}), true);
    int row = 0;
    oracle::for_each_pattern({2, 2}, [&](const std::vector<int>& r) {
        for (int c = 0; c < 2; ++c) EXPECT_DOUBLE_EQ(psi.values(row, c), p.theta[0](r[0], c) * p.theta[1](r[1], c));
        ++row;
    });
}

TEST(Psi, ColumnStochasticity) {
    std::mt19937_64 rng(3);
    const std::vector<int> levels{3, 2, 2, 4};
    const auto p = oracle::random_core(rng, 4, levels);
    const PatternSpace s(levels);
    const auto full = build_psi(p, s, true);
    const auto reduced = build_psi(p, s);
    for (int c = 0; c < 4; ++c) {
        EXPECT_NEAR(full.values.col(c).sum(), 1.0, 1e-12);
        EXPECT_NEAR(reduced.values.col(c).sum(), 1.0 - full.values(0, c), 1e-12);
    }
}

TEST(Phi, ZeroInterceptsGiveHalfPowers) {
    const auto phi = build_phi({MatrixXd::Zero(2, 3), MatrixXd::Zero(2, 3), MatrixXd::Zero(2, 3)}, PatternSpace({2, 2, 2}));
    EXPECT_TRUE(phi.values.isApprox(MatrixXd::Constant(7, 3, 0.125)));
    EXPECT_EQ(phi.kind, MatrixKind::Phi);
}

TEST(Phi, LogNineSingleItem) {
    MatrixXd g = MatrixXd::Zero(2, 2);
    g(1, 0) = std::log(9.0);
    const auto phi = build_phi({g}, PatternSpace({2}));
    EXPECT_NEAR(phi.values(0, 0), 0.9, 1e-15);
    EXPECT_NEAR(phi.values(0, 1), 0.5, 1e-15);
}

TEST(Phi, BitIdenticalToPsiOfZeroCovariateTheta) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const std::vector<int> levels{2, 3, 2};
        const auto gamma = random_gamma(rng, 3, levels);
        std::vector<MatrixXd> lambda;
        std::normal_distribution<double> n;
        for (int m : levels) {
            MatrixXd l(2, m);
            for (Eigen::Index i = 0; i < l.size(); ++i) l.data()[i] = n(rng);
            l.col(0).setZero();
            lambda.push_back(l);
        }
        CoreParams p;
        p.eta = VectorXd::Constant(3, 1.0 / 3.0);
        p.theta = theta_from_gamma_lambda(gamma, lambda, std::vector<VectorXd>(3, VectorXd::Zero(2)));
        const PatternSpace s(levels);
        EXPECT_EQ(build_phi(gamma, s).values, build_psi(p, s).values);
    }
}

TEST(Tmat, ReferenceRowIsOnes) {
    std::mt19937_64 rng(5);
    const auto p = oracle::random_core(rng, 3, {2, 3});
    const auto t = build_T(p, PatternSpace({2, 3}));
    EXPECT_TRUE(t.values.row(0).isApprox(Eigen::RowVectorXd::Ones(3)));
}

TEST(Tmat, BinaryItemsUseSuccessProbabilities) {
    std::mt19937_64 rng(6);
    const auto p = oracle::random_core(rng, 2, {2, 2, 2});
    const auto t = build_T(p, PatternSpace({2, 2, 2}));
    // pattern (1,0,1) is index 5
    for (int c = 0; c < 2; ++c) EXPECT_NEAR(t.values(5, c), p.theta[0](1, c) * p.theta[2](1, c), 1e-15);
}

TEST(Tmat, PolytomousCumulativeSums) {
    CoreParams p;
    p.eta = VectorXd::Ones(1);
    p.theta = {MatrixXd(3, 1)};
    p.theta[0] << 0.2, 0.5, 0.3;
    const auto t = build_T(p, PatternSpace({3}));
    EXPECT_NEAR(t.values(2, 0), 0.3, 1e-15);
    EXPECT_NEAR(t.values(1, 0), 0.8, 1e-15);
}

TEST(Tmat, RankMatchesFullPsi) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        const std::vector<int> levels{2, 3, 2};
        auto p = oracle::random_core(rng, 5, levels);
        if (trial % 3 == 0) {
            for (auto& th : p.theta) th.col(4) = th.col(2);
        }
        const PatternSpace s(levels);
        const MatrixXd t = build_T(p, s).values;
        const MatrixXd psi = build_psi(p, s, true).values;
        const double tol = 1e-10;
        EXPECT_EQ(numeric_rank(t, tol).rank, numeric_rank(psi, tol).rank);
    }
}

TEST(Jacobian, IdenticalClassesHaveZeroEtaColumns) {
    std::mt19937_64 rng(8);
    auto p = oracle::random_core(rng, 3, {2, 2, 3});
    for (auto& t : p.theta) {
        t.col(1) = t.col(0);
        t.col(2) = t.col(0);
    }
    const auto j = build_jacobian(p, PatternSpace({2, 2, 3}));
    EXPECT_TRUE(j.values.leftCols(2).isZero(0));
}

TEST(Jacobian, SingleClassHasOnlyThetaColumns) {
    CoreParams p;
    p.eta = VectorXd::Ones(1);
    p.theta = {MatrixXd::Constant(2, 1, 0.5), MatrixXd::Constant(3, 1, 1.0 / 3.0)};
    const auto j = build_jacobian(p, PatternSpace({2, 3}));
    EXPECT_EQ(j.values.cols(), 3);
    for (const auto& l : j.columns) EXPECT_EQ(l.kind, ParamLabel::Kind::Theta);
}

TEST(Jacobian, DimensionsAndColumnOrder) {
    std::mt19937_64 rng(9);
    const std::vector<int> levels{2, 3, 2};
    const auto p = oracle::random_core(rng, 3, levels);
    const auto j = build_jacobian(p, PatternSpace(levels));
    EXPECT_EQ(j.values.rows(), 11);
    EXPECT_EQ(j.values.cols(), 2 + 3 * 4);
    EXPECT_EQ(j.columns[2].str(), "theta[0,1,0]");
    EXPECT_EQ(j.columns[5].str(), "theta[1,1,0]");
    EXPECT_EQ(j.columns[6].str(), "theta[1,2,0]");
    EXPECT_EQ(theta_column(3, levels, 1, 2, 2), 10);
    EXPECT_EQ(j.columns[10].str(), "theta[1,2,2]");
}

TEST(Jacobian, MatchesCentralFiniteDifferences) {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const std::vector<int> levels{2, 2, 2};
        const auto p = oracle::random_core(rng, 2, levels);
        const MatrixXd a = build_jacobian(p, PatternSpace(levels)).values;
        const MatrixXd fd = oracle::fd_jacobian(p, 1e-6);
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
            const double scale = std::max(fd.col(c).norm(), 1e-300);
            EXPECT_LT((a.col(c) - fd.col(c)).norm() / scale, 1e-6) << "column " << c;
        }
    }
}

TEST(Jacobian, FreeParameterRoundTrip) {
    std::mt19937_64 rng(11);
    const std::vector<int> levels{3, 2};
    const auto p = oracle::random_core(rng, 3, levels);
    const auto back = from_free_parameters(free_parameters(p), 3, levels);
    EXPECT_LT((back.eta - p.eta).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((back.theta[0] - p.theta[0]).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Jacobian, LabelPermutationPermutesColumns) {
    std::mt19937_64 rng(12);
    const std::vector<int> levels{2, 2, 2, 2};
    const auto p = oracle::random_core(rng, 3, levels);
    CoreParams q = p;
    const std::vector<int> perm{2, 0, 1};
    for (int c = 0; c < 3; ++c) {
        q.eta[c] = p.eta[perm[static_cast<std::size_t>(c)]];
        for (std::size_t j = 0; j < levels.size(); ++j) q.theta[j].col(c) = p.theta[j].col(perm[static_cast<std::size_t>(c)]);
    }
    const PatternSpace s(levels);
    const auto pa = build_psi(p, s).values;
    const auto qa = build_psi(q, s).values;
    for (int c = 0; c < 3; ++c) EXPECT_EQ(qa.col(c), pa.col(perm[static_cast<std::size_t>(c)]));
    EXPECT_EQ(numeric_rank(build_jacobian(p, s).values).rank, numeric_rank(build_jacobian(q, s).values).rank);
    EXPECT_EQ(numeric_rank(build_T(p, s).values).rank, numeric_rank(build_T(q, s).values).rank);
}

TEST(JacobianZeroCovariate, ZeroRegressionIsUniformJacobian) {
    RegressionParams reg;
    reg.beta = MatrixXd::Zero(2, 2);
    reg.gamma = {MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 2)};
    reg.lambda = {MatrixXd::Zero(1, 2), MatrixXd::Zero(1, 2), MatrixXd::Zero(1, 2)};
    CoreParams u;
    u.eta = VectorXd::Constant(2, 0.5);
    u.theta = std::vector<MatrixXd>(3, MatrixXd::Constant(2, 2, 0.5));
    const PatternSpace s({2, 2, 2});
    EXPECT_EQ(build_jacobian_zero_covariate(reg, s).values, build_jacobian(u, s).values);
}

TEST(JacobianZeroCovariate, CompositionWithPerSubjectPath) {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> n;
    const std::vector<int> levels{2, 3, 2};
    RegressionParams reg;
    reg.beta = MatrixXd(2, 3);
    for (Eigen::Index i = 0; i < reg.beta.size(); ++i) reg.beta.data()[i] = n(rng);
    reg.beta.col(0).setZero();
    reg.gamma = random_gamma(rng, 3, levels);
    for (int m : levels) {
        MatrixXd l(1, m);
        for (Eigen::Index i = 0; i < l.size(); ++i) l.data()[i] = n(rng);
        l.col(0).setZero();
        reg.lambda.push_back(l);
    }
    CovariateDesign d;
    d.x = MatrixXd(1, 2);
    d.x << 1, 0;
    d.z = std::vector<MatrixXd>(3, MatrixXd::Zero(1, 1));
    const PatternSpace s(levels);
    EXPECT_EQ(build_jacobian_zero_covariate(reg, s).values, build_jacobian(per_subject_params(reg, d, 0), s).values);

    // With no slopes the covariate-free model is recovered.
    RegressionParams flat = reg;
    flat.beta.row(1).setZero();
    for (auto& l : flat.lambda) l.setZero();
    CoreParams core;
    core.eta = eta_from_beta(flat.beta.topRows(1), VectorXd::Ones(1));
    core.theta = theta_from_gamma_lambda(flat.gamma, flat.lambda, std::vector<VectorXd>(3, VectorXd::Zero(1)));
    EXPECT_EQ(build_jacobian_zero_covariate(flat, s).values, build_jacobian(core, s).values);
}

TEST(Fisher, SingleBinaryItemSingleClass) {
    CoreParams p;
    p.eta = VectorXd::Ones(1);
    p.theta = {MatrixXd(2, 1)};
    p.theta[0] << 0.3, 0.7;
    const MatrixXd f = fisher_information(p, PatternSpace({2}));
    ASSERT_EQ(f.rows(), 1);
    EXPECT_NEAR(f(0, 0), 1.0 / (0.3 * 0.7), 1e-12);
}

TEST(Fisher, DuplicatedClassesAreSingular) {
    std::mt19937_64 rng(14);
    auto p = oracle::random_core(rng, 2, {2, 2, 2});
    for (auto& t : p.theta) t.col(1) = t.col(0);
    const MatrixXd f = fisher_information(p, PatternSpace({2, 2, 2}));
    EXPECT_LT(numeric_rank(f).rank, f.cols());
}

TEST(Fisher, RankAgreesWithJacobian) {
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 20; ++trial) {
        const std::vector<int> levels = trial % 2 ? std::vector<int>{2, 2, 2} : std::vector<int>{2, 3, 2, 2};
        const int c_count = 2 + trial % 2;
        auto p = oracle::random_core(rng, c_count, levels, 0.1);
        if (trial % 5 == 0) {
            for (auto& t : p.theta) t.col(1) = t.col(0);
        }
        const PatternSpace s(levels);
        const MatrixXd f = fisher_information(p, s);
        EXPECT_TRUE(f.isApprox(f.transpose()));
        EXPECT_EQ(numeric_rank(f).rank, numeric_rank(build_jacobian(p, s).values).rank) << "trial " << trial;
    }
}

TEST(Fisher, ZeroProbabilityIsRejected) {
    CoreParams p;
    p.eta = VectorXd::Ones(1);
    p.theta = {MatrixXd(2, 1)};
    p.theta[0] << 1.0, 0.0;
    EXPECT_THROW(fisher_information(p, PatternSpace({2})), InvalidInput);
}

TEST(Partition, ThreeSingleItemBlocks) {
    std::mt19937_64 rng(16);
    const auto p = oracle::random_core(rng, 4, {2, 2, 2});
    const auto blocks = partition_submatrices(p, parse_partition("1,2,3"));
    for (int t = 0; t < 3; ++t) {
        EXPECT_EQ(blocks[static_cast<std::size_t>(t)].values.rows(), 2);
        EXPECT_EQ(blocks[static_cast<std::size_t>(t)].values, p.theta[static_cast<std::size_t>(t)]);
    }
}

TEST(Partition, BlocksMatchBruteForceAndMarginalisation) {
    std::mt19937_64 rng(17);
    const std::vector<int> levels{2, 3, 2, 2};
    const auto p = oracle::random_core(rng, 3, levels);
    const Partition part = parse_partition("1,1,2,3");
    const auto direct = partition_submatrices(p, part);
    const PatternSpace s(levels);
    const auto via_full = partition_submatrices(build_psi(p, s, true), part);
    const auto via_reduced = partition_submatrices(build_psi(p, s), part);
    ASSERT_EQ(direct[0].values.rows(), 6);
    int row = 0;
    oracle::for_each_pattern({2, 3}, [&](const std::vector<int>& r) {
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(direct[0].values(row, c), p.theta[0](r[0], c) * p.theta[1](r[1], c), 1e-15);
        ++row;
    });
    for (int t = 0; t < 3; ++t) {
        EXPECT_LT((direct[static_cast<std::size_t>(t)].values - via_full[static_cast<std::size_t>(t)].values).cwiseAbs().maxCoeff(), 1e-14);
        EXPECT_LT((direct[static_cast<std::size_t>(t)].values - via_reduced[static_cast<std::size_t>(t)].values).cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(Partition, EmptyBlockIsRejected) {
    std::mt19937_64 rng(18);
    const auto p = oracle::random_core(rng, 2, {2, 2, 2});
    EXPECT_THROW(partition_submatrices(p, parse_partition("1,1,2")), InvalidInput);
    EXPECT_THROW(parse_partition("1,4,2"), InvalidInput);
}
