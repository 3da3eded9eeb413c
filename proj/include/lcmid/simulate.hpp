#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "lcmid/model.hpp"

namespace lcmid {

struct CovariateGenerator {
    enum class Kind { Bernoulli, Uniform, Constant, XColumn };
    Kind kind = Kind::Bernoulli;
    double a = 0.5; // Bernoulli p, Uniform lower bound, Constant value
    double b = 1.0; // Uniform upper bound
    int column = 1; // XColumn: index into the x row (1..p)

    void validate(int p) const;
};

struct SimConfig {
    int n_subjects = 1;
    std::uint64_t seed = 0;
    /// One generator per primary covariate (p entries).
    std::vector<CovariateGenerator> x;
    /// One generator per secondary covariate (q entries).
    std::vector<CovariateGenerator> z;
    /// Draw z separately for every item instead of sharing one row.
    bool z_per_item = false;

    /// Fills missing generators with Bernoulli(0.5) and checks the rest.
    void complete(const ModelSpec& spec);
};

struct Dataset {
    MatrixXi responses; // N x J
    CovariateDesign design;
    std::vector<int> latent;
};

/// Bit-reproducible uniform draws and categorical sampling on top of
/// std::mt19937_64, so results do not depend on the standard library's
/// distribution implementations.
class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    /// Index drawn from the probability vector by inverse CDF.
    int categorical(const Eigen::Ref<const VectorXd>& probs);

private:
    std::mt19937_64 engine_;
};

/// Draws covariates, latent classes and responses subject by subject.
Dataset simulate(const RegressionParams& reg, SimConfig cfg, const ModelSpec& spec);

} // namespace lcmid
