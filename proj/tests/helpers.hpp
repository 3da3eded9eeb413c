#pragma once

// Builders for regression-model inputs shared by the condition tests and the
// acceptance runner.

#include <random>
#include <vector>

#include "lcmid/conditions.hpp"
#include "lcmid/model.hpp"

namespace testkit {

using lcmid::MatrixXd;

// Binary-item G-DINA intercepts with a negative baseline and positive
// main effects, so every class has a distinct, finite logit.
inline lcmid::GDINACoeffs random_gdina(const lcmid::QMatrix& q, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> base(-2.0, -0.5), main(0.5, 2.0), inter(-0.3, 0.3);
    lcmid::GDINACoeffs b;
    for (int j = 0; j < q.n_items(); ++j) {
        const auto req = q.required(j);
        MatrixXd c(1, 1 << req.size());
        for (int s = 0; s < c.cols(); ++s) {
            const int bits = __builtin_popcount(static_cast<unsigned>(s));
            c(0, s) = bits == 0 ? base(rng) : bits == 1 ? main(rng) : inter(rng);
        }
        b.required.push_back(req);
        b.coeffs.push_back(c);
    }
    return b;
}

// Gender-style design: intercept plus one binary primary covariate, one
// secondary covariate per item; four subjects, two of each group.
inline lcmid::CovariateDesign gender_design(int n_items, bool mixed = true) {
    lcmid::CovariateDesign d;
    d.x = MatrixXd(4, 2);
    d.x << 1, 0, 1, 1, 1, 0, 1, 1;
    if (!mixed) d.x.col(1).setZero();
    MatrixXd z(4, 1);
    z << 0, 1, 0, 1;
    if (!mixed) z.setZero();
    d.z.assign(static_cast<std::size_t>(n_items), z);
    return d;
}

// RegCDM input with p = q = 1 and binary items.
inline lcmid::CheckInput regcdm_input(const lcmid::QMatrix& q, std::mt19937_64& rng, bool mixed = true) {
    std::normal_distribution<double> n(0.0, 0.3);
    const int c_count = q.n_classes();
    const int j_count = q.n_items();
    lcmid::RegressionParams reg;
    reg.beta = MatrixXd(2, c_count);
    for (Eigen::Index i = 0; i < reg.beta.size(); ++i) reg.beta.data()[i] = n(rng);
    reg.beta.col(0).setZero();
    const std::vector<int> levels(static_cast<std::size_t>(j_count), 2);
    reg.gamma = lcmid::gdina_to_gamma(random_gdina(q, rng), q, levels);
    for (int j = 0; j < j_count; ++j) {
        MatrixXd l(1, 2);
        l << 0.0, n(rng);
        reg.lambda.push_back(l);
    }
    lcmid::CheckInput in;
    in.kind = lcmid::ModelKind::RegCDM;
    in.spec.n_items = j_count;
    in.spec.levels = levels;
    in.spec.n_classes = c_count;
    in.spec.p = 1;
    in.spec.q = 1;
    in.q = q;
    in.regression = reg;
    in.design = gender_design(j_count, mixed);
    return in;
}

// Small-integer matrix with planted column dependencies so Kruskal ranks vary.
inline MatrixXd structured_matrix(std::mt19937_64& rng, int rows, int cols) {
    std::uniform_int_distribution<int> v(-2, 2);
    MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = v(rng);
    switch (rng() % 5) {
    case 0: m.col(static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(cols))).setZero(); break;
    case 1: m.col(1) = m.col(0) * 2.0; break;
    case 2: m.col(3) = m.col(0) + m.col(2); break;
    case 3: m.col(2) = m.col(0) - m.col(1); m.col(3) = m.col(0) + m.col(1); break;
    default: break;
    }
    return m;
}

inline lcmid::QMatrix qmatrix(std::initializer_list<std::initializer_list<int>> rows) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto k = static_cast<Eigen::Index>(rows.begin()->size());
    Eigen::MatrixXi m(n, k);
    Eigen::Index i = 0;
    for (const auto& r : rows) {
        Eigen::Index j = 0;
        for (int v : r) m(i, j++) = v;
        ++i;
    }
    return lcmid::QMatrix(m);
}

} // namespace testkit
