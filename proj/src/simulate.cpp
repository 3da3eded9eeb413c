#include "lcmid/simulate.hpp"

#include <cmath>
#include <string>

#include "lcmid/error.hpp"

namespace lcmid {

void CovariateGenerator::validate(int p) const {
    switch (kind) {
    case Kind::Bernoulli:
        if (!(a >= 0.0 && a <= 1.0)) throw InvalidInput("bernoulli probability must lie in [0, 1]");
        break;
    case Kind::Uniform:
        if (!std::isfinite(a) || !std::isfinite(b) || !(a < b)) throw InvalidInput("uniform bounds must satisfy a < b");
        break;
    case Kind::Constant:
        if (!std::isfinite(a)) throw InvalidInput("constant covariate must be finite");
        break;
    case Kind::XColumn:
        if (column < 1 || column > p) throw InvalidInput("x_column must reference one of the p primary covariates");
        break;
    }
}

void SimConfig::complete(const ModelSpec& spec) {
    if (n_subjects < 1) throw InvalidInput("simulation needs at least one subject");
    if (x.empty()) x.assign(static_cast<std::size_t>(spec.p), CovariateGenerator{});
    if (z.empty()) z.assign(static_cast<std::size_t>(spec.q), CovariateGenerator{});
    if (static_cast<int>(x.size()) != spec.p) throw InvalidInput("config must give one x generator per primary covariate");
    if (static_cast<int>(z.size()) != spec.q) throw InvalidInput("config must give one z generator per secondary covariate");
    for (const auto& g : x) {
        if (g.kind == CovariateGenerator::Kind::XColumn) throw InvalidInput("x generators cannot copy x columns");
        g.validate(spec.p);
    }
    for (const auto& g : z) g.validate(spec.p);
}

int Sampler::categorical(const Eigen::Ref<const VectorXd>& probs) {
    const double u = uniform();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

namespace {

double draw(Sampler& s, const CovariateGenerator& g, const Eigen::Ref<const VectorXd>& x_row) {
    switch (g.kind) {
    case CovariateGenerator::Kind::Bernoulli: return s.uniform() < g.a ? 1.0 : 0.0;
    case CovariateGenerator::Kind::Uniform: return g.a + (g.b - g.a) * s.uniform();
    case CovariateGenerator::Kind::Constant: return g.a;
    case CovariateGenerator::Kind::XColumn: return x_row[g.column];
    }
    return 0.0;
}

} // namespace

Dataset simulate(const RegressionParams& reg, SimConfig cfg, const ModelSpec& spec) {
    spec.validate();
    reg.validate(spec);
    cfg.complete(spec);
    const int n = cfg.n_subjects;
    const int n_items = spec.n_items;

    Dataset out;
    out.responses.resize(n, n_items);
    out.latent.resize(static_cast<std::size_t>(n));
    out.design.x.resize(n, spec.p + 1);
    out.design.z.assign(static_cast<std::size_t>(n_items), MatrixXd(n, spec.q));

    Sampler s(cfg.seed);
    VectorXd x(spec.p + 1);
    std::vector<VectorXd> z(static_cast<std::size_t>(n_items), VectorXd(spec.q));
    for (int i = 0; i < n; ++i) {
        x[0] = 1.0;
        for (int d = 0; d < spec.p; ++d) x[d + 1] = draw(s, cfg.x[static_cast<std::size_t>(d)], x);
        for (int j = 0; j < n_items; ++j) {
            auto& zj = z[static_cast<std::size_t>(j)];
            if (j > 0 && !cfg.z_per_item) {
                zj = z.front();
                continue;
            }
            for (int t = 0; t < spec.q; ++t) zj[t] = draw(s, cfg.z[static_cast<std::size_t>(t)], x);
        }
        const VectorXd eta = eta_from_beta(reg.beta, x);
        const auto theta = theta_from_gamma_lambda(reg.gamma, reg.lambda, z);
        const int c = s.categorical(eta);
        out.latent[static_cast<std::size_t>(i)] = c;
        for (int j = 0; j < n_items; ++j) out.responses(i, j) = s.categorical(theta[static_cast<std::size_t>(j)].col(c));
        out.design.x.row(i) = x.transpose();
        for (int j = 0; j < n_items; ++j) out.design.z[static_cast<std::size_t>(j)].row(i) = z[static_cast<std::size_t>(j)].transpose();
    }
    return out;
}

} // namespace lcmid
