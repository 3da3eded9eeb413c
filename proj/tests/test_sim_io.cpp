#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "lcmid/error.hpp"
#include "lcmid/fixtures.hpp"
#include "lcmid/io.hpp"
#include "lcmid/simulate.hpp"
#include "oracles.hpp"

using namespace lcmid;
using testkit::qmatrix;

namespace {

RegressionParams zero_regression(int c_count, int items, int p, int q) {
    RegressionParams reg;
    reg.beta = MatrixXd::Zero(p + 1, c_count);
    reg.gamma.assign(static_cast<std::size_t>(items), MatrixXd::Zero(2, c_count));
    reg.lambda.assign(static_cast<std::size_t>(items), MatrixXd::Zero(q, 2));
    return reg;
}

ModelSpec spec_of(const RegressionParams& reg) {
    ModelSpec s;
    s.n_items = reg.n_items();
    for (const auto& g : reg.gamma) s.levels.push_back(static_cast<int>(g.rows()));
    s.n_classes = reg.n_classes();
    s.p = reg.p();
    s.q = reg.q();
    return s;
}

template <class F>
int parse_error_column(F&& f) {
    try {
        f();
    } catch (const ParseError& e) {
        return e.line() * 1000 + e.column();
    }
    return -1;
}

} // namespace

TEST(Simulate, SameSeedSameData) {
    std::mt19937_64 rng(1);
    const auto in = testkit::regcdm_input(qmatrix({{1, 0}, {0, 1}, {1, 1}}), rng);
    SimConfig cfg;
    cfg.n_subjects = 200;
    cfg.seed = 42;
    const auto a = simulate(*in.regression, cfg, in.spec);
    const auto b = simulate(*in.regression, cfg, in.spec);
    EXPECT_EQ(a.responses, b.responses);
    EXPECT_EQ(a.latent, b.latent);
    EXPECT_EQ(format_dataset(a), format_dataset(b));
    cfg.seed = 43;
    EXPECT_NE(simulate(*in.regression, cfg, in.spec).responses, a.responses);
}

TEST(Simulate, FixedSeedFirstDrawsArePinned) {
    // Guards against accidental changes to the sampling scheme.
    Sampler s(7);
    std::mt19937_64 e(7);
    EXPECT_EQ(s.uniform(), static_cast<double>(e() >> 11) * 0x1.0p-53);
}

TEST(Simulate, ZeroRegressionGivesFairCoins) {
    const auto reg = zero_regression(2, 4, 1, 1);
    SimConfig cfg;
    cfg.n_subjects = 20000;
    cfg.seed = 3;
    const auto d = simulate(reg, cfg, spec_of(reg));
    const double se = std::sqrt(0.25 / cfg.n_subjects);
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(d.responses.col(j).cast<double>().mean(), 0.5, 5 * se) << "item " << j;
    double share = 0.0;
    for (int c : d.latent) share += c;
    EXPECT_NEAR(share / cfg.n_subjects, 0.5, 5 * se);
}

TEST(Simulate, LatentSharesFollowEta) {
    auto reg = zero_regression(3, 2, 0, 0);
    reg.beta << 0.0, std::log(2.0), std::log(5.0); // eta = (1, 2, 5) / 8
    SimConfig cfg;
    cfg.n_subjects = 40000;
    cfg.seed = 9;
    const auto d = simulate(reg, cfg, spec_of(reg));
    std::vector<double> counts(3, 0.0);
    for (int c : d.latent) counts[static_cast<std::size_t>(c)] += 1.0;
    const double expect[3] = {1.0 / 8, 2.0 / 8, 5.0 / 8};
    for (int c = 0; c < 3; ++c) {
        const double se = std::sqrt(expect[c] * (1 - expect[c]) / cfg.n_subjects);
        EXPECT_NEAR(counts[static_cast<std::size_t>(c)] / cfg.n_subjects, expect[c], 5 * se);
    }
}

TEST(Simulate, CovariateGenerators) {
    const auto reg = zero_regression(2, 3, 2, 1);
    SimConfig cfg;
    cfg.n_subjects = 50;
    cfg.x = {{CovariateGenerator::Kind::Constant, 2.5, 1.0, 1}, {CovariateGenerator::Kind::Uniform, -1.0, 1.0, 1}};
    cfg.z = {{CovariateGenerator::Kind::XColumn, 0.5, 1.0, 2}};
    const auto d = simulate(reg, cfg, spec_of(reg));
    EXPECT_TRUE((d.design.x.col(0).array() == 1.0).all());
    EXPECT_TRUE((d.design.x.col(1).array() == 2.5).all());
    EXPECT_TRUE((d.design.x.col(2).array() >= -1.0).all() && (d.design.x.col(2).array() < 1.0).all());
    for (const auto& z : d.design.z) EXPECT_EQ(z.col(0), d.design.x.col(2));
}

TEST(Simulate, PerItemCovariates) {
    const auto reg = zero_regression(2, 3, 0, 1);
    SimConfig cfg;
    cfg.n_subjects = 100;
    cfg.z = {{CovariateGenerator::Kind::Uniform, 0.0, 1.0, 1}};
    const auto shared = simulate(reg, cfg, spec_of(reg));
    EXPECT_EQ(shared.design.z[0], shared.design.z[2]);
    cfg.z_per_item = true;
    const auto own = simulate(reg, cfg, spec_of(reg));
    EXPECT_NE(own.design.z[0], own.design.z[2]);
}

TEST(Simulate, BadConfigIsRejected) {
    const auto reg = zero_regression(2, 3, 1, 0);
    SimConfig cfg;
    cfg.n_subjects = 0;
    EXPECT_THROW(simulate(reg, cfg, spec_of(reg)), InvalidInput);
    cfg.n_subjects = 1;
    cfg.x = {{CovariateGenerator::Kind::Bernoulli, 1.5, 1.0, 1}};
    EXPECT_THROW(simulate(reg, cfg, spec_of(reg)), InvalidInput);
}

TEST(QMatrixIo, RoundTripWithLabels) {
    const auto f = fixture("timss_k7");
    const auto back = parse_qmatrix(format_qmatrix(f.q));
    EXPECT_EQ(back, f.q);
    EXPECT_EQ(back.labels(), f.q.labels());
}

TEST(QMatrixIo, HeaderlessAndQuotedFields) {
    const auto q = parse_qmatrix("\"skill, one\",b\n1,0\r\n0,1\n\n");
    EXPECT_EQ(q.n_items(), 2);
    EXPECT_EQ(q.labels().front(), "skill, one");
    EXPECT_EQ(parse_qmatrix("1,0\n0,1\n"), q);
    EXPECT_TRUE(parse_qmatrix("1,0\n0,1\n").labels().empty());
}

TEST(QMatrixIo, ErrorsCarryLineAndColumn) {
    EXPECT_EQ(parse_error_column([] { parse_qmatrix("a,b\n1,0\n0,2\n"); }), 3003);
    EXPECT_EQ(parse_error_column([] { parse_qmatrix("1,0\n0,1,1\n"); }), 2001);
    EXPECT_EQ(parse_error_column([] { parse_qmatrix("1,0\n\"0,1\n"); }), 2001);
    EXPECT_EQ(parse_error_column([] { parse_qmatrix("\n\n"); }), 3001);
}

TEST(MatrixCsv, ParsesAndReportsBadNumbers) {
    const auto m = parse_matrix_csv("1, 2.5\n-3,4e-2\n");
    EXPECT_EQ(m(0, 1), 2.5);
    EXPECT_EQ(m(1, 1), 0.04);
    EXPECT_EQ(parse_error_column([] { parse_matrix_csv("1,2\n3,x\n"); }), 2003);
}

TEST(ParamsIo, RegressionRoundTripIsExact) {
    std::mt19937_64 rng(5);
    const auto in = testkit::regcdm_input(qmatrix({{1, 0}, {0, 1}, {1, 1}}), rng);
    ParamsDocument doc;
    doc.spec = in.spec;
    doc.regression = in.regression;
    doc.design = in.design;
    const auto text = dump_canonical(params_to_json(doc));
    const auto back = parse_params(text);
    EXPECT_EQ(back.regression->beta, in.regression->beta);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(back.regression->gamma[j], in.regression->gamma[j]);
        EXPECT_EQ(back.regression->lambda[j], in.regression->lambda[j]);
        EXPECT_EQ(back.design->z[j], in.design->z[j]);
    }
    EXPECT_EQ(dump_canonical(params_to_json(back)), text);
}

TEST(ParamsIo, CoreOnlyInfersSpec) {
    std::mt19937_64 rng(6);
    const auto p = oracle::random_core(rng, 3, {2, 3});
    const auto doc = parse_params(dump_canonical(nlohmann::json{{"core", core_to_json(p)}}));
    EXPECT_EQ(doc.spec.n_classes, 3);
    EXPECT_EQ(doc.spec.levels, (std::vector<int>{2, 3}));
    EXPECT_EQ(doc.core->theta[1], p.theta[1]);
}

TEST(ParamsIo, GdinaEffectsNeedQ) {
    const auto q = qmatrix({{1, 0}, {0, 1}, {1, 1}});
    const std::string text = R"({
      "regression": {"beta": [[0, 0.5, 0.1, -0.2]]},
      "gdina": [[{"": -1.0, "0": 2.0}], [{"": -1.5, "1": 1.0}], [{"": -2.0, "0": 1.0, "1": 1.0, "0,1": 0.5}]]
    })";
    EXPECT_THROW(parse_params(text), InvalidInput);
    const auto doc = parse_params(text, &q);
    // class 3 = (1,1): -2 + 1 + 1 + 0.5
    EXPECT_DOUBLE_EQ(doc.regression->gamma[2](1, 3), 0.5);
    EXPECT_DOUBLE_EQ(doc.regression->gamma[0](1, 1), -1.0);
    EXPECT_DOUBLE_EQ(doc.regression->gamma[0](1, 2), 1.0);
}

TEST(ParamsIo, NonFiniteValuesSurviveForA2) {
    const std::string text = R"({"regression": {"beta": [[0, "inf"]], "gamma": [[[0, 1], [0, null]], [[0, 0], [0, 0]], [[0, 0], [0, 0]]]}})";
    const auto doc = parse_params(text);
    EXPECT_TRUE(std::isinf(doc.regression->beta(0, 1)));
    EXPECT_TRUE(std::isnan(doc.regression->gamma[0](1, 1)));
    EXPECT_EQ(check_A2(*doc.regression, nullptr).status, Status::Fails);
}

TEST(ParamsIo, JsonSyntaxErrorLocation) {
    try {
        parse_params("{\n  \"core\": [1,\n  ]\n}");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3);
    }
    EXPECT_THROW(parse_params("{\"core\": {\"eta\": [0.5, 0.5]}}"), InvalidInput);
}

TEST(SimConfigIo, Generators) {
    const auto cfg = parse_sim_config(R"({"n": 10, "seed": 4, "x": [{"type": "bernoulli", "p": 0.3}],
                                          "z": [{"type": "x_column", "column": 1}], "z_per_item": true})");
    EXPECT_EQ(cfg.n_subjects, 10);
    EXPECT_EQ(cfg.seed, 4u);
    EXPECT_EQ(cfg.x[0].a, 0.3);
    EXPECT_EQ(cfg.z[0].kind, CovariateGenerator::Kind::XColumn);
    EXPECT_TRUE(cfg.z_per_item);
    EXPECT_THROW(parse_sim_config(R"({"n": 1, "x": [{"type": "poisson"}]})"), InvalidInput);
    EXPECT_THROW(parse_sim_config(R"({"seed": 1})"), InvalidInput);
}

TEST(DatasetIo, HeaderLayout) {
    const auto reg = zero_regression(2, 2, 1, 1);
    SimConfig cfg;
    cfg.n_subjects = 2;
    const auto text = format_dataset(simulate(reg, cfg, spec_of(reg)));
    EXPECT_EQ(text.substr(0, text.find('\n')), "subject,x1,z1_1,z2_1,latent,r1,r2");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

TEST(CanonicalJson, SortedKeysAndFullPrecision) {
    const nlohmann::json j = {{"b", 1}, {"a", 0.1}, {"c", std::nan("")}, {"d", {1.5, 2}}};
    EXPECT_EQ(dump_canonical(j), "{\n  \"a\": 0.10000000000000001,\n  \"b\": 1,\n  \"c\": null,\n  \"d\": [1.5, 2]\n}");
}

TEST(Fixtures, ShapesChecksumsAndColumnSums) {
    const auto k7 = fixture("timss_k7");
    ASSERT_EQ(k7.q.n_items(), 25);
    ASSERT_EQ(k7.q.n_attributes(), 7);
    EXPECT_EQ(qmatrix_checksum(k7.q), k7.checksum);
    const std::vector<int> sums7{18, 4, 5, 3, 7, 3, 5};
    for (int k = 0; k < 7; ++k) EXPECT_EQ(k7.q.column_sum(k), sums7[static_cast<std::size_t>(k)]) << k;
    EXPECT_EQ(k7.q.required(13), (std::vector<int>{0, 1, 6})); // item 14

    const auto k3 = fixture("timss_k3");
    ASSERT_EQ(k3.q.n_attributes(), 3);
    EXPECT_EQ(qmatrix_checksum(k3.q), k3.checksum);
    const std::vector<int> sums3{19, 8, 6};
    for (int k = 0; k < 3; ++k) EXPECT_EQ(k3.q.column_sum(k), sums3[static_cast<std::size_t>(k)]) << k;
    EXPECT_NE(k3.checksum, k7.checksum);
    EXPECT_THROW(fixture("timss_k5"), InvalidInput);
}

TEST(Fixtures, ReferenceBlocksHaveUnitDiagonal) {
    for (const auto& name : fixture_names()) {
        const auto f = fixture(name);
        const int k_count = f.q.n_attributes();
        for (const auto* block : {&f.block1_items, &f.block2_items}) {
            ASSERT_EQ(static_cast<int>(block->size()), k_count);
            for (int k = 0; k < k_count; ++k) EXPECT_EQ(f.q((*block)[static_cast<std::size_t>(k)] - 1, k), 1) << name;
        }
    }
}
