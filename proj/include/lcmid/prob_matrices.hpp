#pragma once

#include <array>
#include <string>
#include <vector>

#include "lcmid/model.hpp"

namespace lcmid {

enum class MatrixKind { Psi, Phi, Tmat, Block };

std::string to_string(MatrixKind kind);

/// Class-conditional pattern probabilities. Row i holds the pattern
/// space.pattern(row_index[i]); column c is latent class c.
struct ProbMatrix {
    MatrixKind kind = MatrixKind::Psi;
    MatrixXd values;
    std::vector<int> levels;
    std::vector<std::size_t> row_index;

    std::vector<int> row_pattern(Eigen::Index row) const;
};

/// entry(r, c) = prod_j theta_{j r_j c}. The reference row is dropped unless
/// include_reference is set (giving the full matrix over all patterns).
ProbMatrix build_psi(const CoreParams& params, const PatternSpace& space, bool include_reference = false);

/// Psi of the zero-covariate item parameters implied by the intercepts.
ProbMatrix build_phi(const std::vector<MatrixXd>& gamma, const PatternSpace& space);

/// entry(r, c) = prod_j P(R_j >= r_j | c) over every pattern.
ProbMatrix build_T(const CoreParams& params, const PatternSpace& space);

/// Column labels of the (eta, theta) free parameters.
struct ParamLabel {
    enum class Kind { Eta, Theta } kind = Kind::Eta;
    int item = -1;
    int level = -1;
    int cls = 0;

    std::string str() const;
};

struct JacobianMatrix {
    MatrixXd values;
    std::vector<ParamLabel> columns;
    std::vector<std::size_t> row_index;
};

/// Column layout shared by the Jacobian and the free-parameter vector:
/// eta_1..eta_{C-1}, then theta_{jrc} (r >= 1) ordered by j, then c, then r.
std::vector<ParamLabel> free_parameter_labels(int n_classes, const std::vector<int>& levels);
Eigen::Index theta_column(int n_classes, const std::vector<int>& levels, int j, int c, int r);

VectorXd free_parameters(const CoreParams& params);
/// Rebuilds eta_0 and theta_{j0c} from the sum-to-one constraints.
CoreParams from_free_parameters(const VectorXd& v, int n_classes, const std::vector<int>& levels);

/// Derivatives of P(R = r) with respect to the free parameters, one row per
/// non-reference pattern (plus the reference row first if requested).
JacobianMatrix build_jacobian(const CoreParams& params, const PatternSpace& space, bool include_reference = false);

JacobianMatrix build_jacobian_zero_covariate(const RegressionParams& reg, const PatternSpace& space);

/// Sum over every pattern r of g_r g_r' / P(R = r), g_r the gradient of
/// P(R = r). Throws InvalidInput if some pattern has probability zero.
MatrixXd fisher_information(const CoreParams& params, const PatternSpace& space);

/// Item tripartition with block labels 1, 2, 3.
struct Partition {
    std::vector<int> assignment;

    std::vector<int> items(int block) const;
    /// Product of level counts per block, saturating at UINT64_MAX.
    std::array<std::uint64_t, 3> kappa(const std::vector<int>& levels) const;
    void validate(int n_items) const;
};

/// Parses "1,2,3,..." into a partition; throws InvalidInput.
Partition parse_partition(const std::string& text);

/// Per-block full pattern tables over the items of each block.
std::array<ProbMatrix, 3> partition_submatrices(const CoreParams& params, const Partition& part,
                                                std::uint64_t cap = kDefaultPatternCap);

/// Same tables obtained by marginalising a full Psi (with reference row) or
/// the full Phi over the items outside each block.
std::array<ProbMatrix, 3> partition_submatrices(const ProbMatrix& full, const Partition& part);

/// Block table for an arbitrary item subset.
ProbMatrix block_matrix(const CoreParams& params, const std::vector<int>& items,
                        std::uint64_t cap = kDefaultPatternCap);

} // namespace lcmid
