#pragma once

// Model representation for latent class models with covariates and their
// cognitive-diagnosis specialisation: dimensions, response patterns, the
// logit links and their inverses, the response distribution, and the
// G-DINA <-> intercept correspondence.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lcmid {

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;

inline constexpr std::uint64_t kDefaultPatternCap = std::uint64_t{1} << 22;

/// Dimensions of a model: J items with M_j response levels, C latent classes,
/// p primary covariates (class membership) and q secondary covariates
/// (item responses).
struct ModelSpec {
    int n_items = 0;
    std::vector<int> levels;
    int n_classes = 0;
    int p = 0;
    int q = 0;

    void validate() const;

    /// Product of the level counts, saturating at UINT64_MAX.
    std::uint64_t pattern_count() const;
    /// Sum over items of (M_j - 1).
    int level_excess() const;
    /// C * sum(M_j - 1) + C - 1, the number of free (eta, theta) parameters.
    std::int64_t free_parameter_count() const;
    bool equal_levels() const;
};

/// Lexicographically ordered response patterns over items with the given
/// level counts; the last item varies fastest and index 0 is the all-zeros
/// reference pattern. Patterns are decoded on demand.
class PatternSpace {
public:
    explicit PatternSpace(std::vector<int> levels, std::uint64_t cap = kDefaultPatternCap);

    std::size_t size() const noexcept { return size_; }
    int n_items() const noexcept { return static_cast<int>(levels_.size()); }
    const std::vector<int>& levels() const noexcept { return levels_; }
    static constexpr std::size_t reference_index() noexcept { return 0; }

    std::vector<int> pattern(std::size_t index) const;
    std::size_t index_of(std::span<const int> pattern) const;

    /// Visits every pattern in order; the span is only valid during the call.
    void for_each(const std::function<void(std::size_t, std::span<const int>)>& visit) const;

private:
    std::vector<int> levels_;
    std::size_t size_ = 0;
};

PatternSpace enumerate_patterns(const ModelSpec& spec, std::uint64_t cap = kDefaultPatternCap);

/// Binary item-by-attribute matrix.
class QMatrix {
public:
    QMatrix() = default;
    explicit QMatrix(MatrixXi entries, std::vector<std::string> labels = {});

    int n_items() const noexcept { return static_cast<int>(entries_.rows()); }
    int n_attributes() const noexcept { return static_cast<int>(entries_.cols()); }
    int n_classes() const { return 1 << n_attributes(); }
    int operator()(int j, int k) const { return entries_(j, k); }
    const MatrixXi& entries() const noexcept { return entries_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }

    /// Attributes required by item j, ascending.
    std::vector<int> required(int j) const;
    int column_sum(int k) const;
    /// True iff row j equals the k-th unit vector.
    bool row_is_unit(int j, int k) const;

    bool operator==(const QMatrix& other) const { return entries_ == other.entries_; }

private:
    MatrixXi entries_;
    std::vector<std::string> labels_;
};

/// Attribute k (0-based) of class c under c = alpha' v, v = (2^{K-1}, ..., 1).
inline int attribute_of_class(int c, int k, int n_attributes) {
    return (c >> (n_attributes - 1 - k)) & 1;
}

/// Class membership probabilities and class-conditional item response
/// probabilities. theta[j] is M_j x C; column c is the response vector of
/// item j in class c.
struct CoreParams {
    VectorXd eta;
    std::vector<MatrixXd> theta;

    int n_classes() const noexcept { return static_cast<int>(eta.size()); }
    int n_items() const noexcept { return static_cast<int>(theta.size()); }
    std::vector<int> levels() const;

    /// Shape and normalisation check (sums within 1e-9); positivity is
    /// checked separately as condition C2.
    void validate() const;
    void validate(const ModelSpec& spec) const;
};

/// Logit-link coefficients. beta is (p+1) x C with column 0 zero; gamma[j]
/// is M_j x C with row 0 zero; lambda[j] is q x M_j with column 0 zero.
struct RegressionParams {
    MatrixXd beta;
    std::vector<MatrixXd> gamma;
    std::vector<MatrixXd> lambda;

    int n_classes() const noexcept { return static_cast<int>(beta.cols()); }
    int n_items() const noexcept { return static_cast<int>(gamma.size()); }
    int p() const noexcept { return static_cast<int>(beta.rows()) - 1; }
    int q() const noexcept { return lambda.empty() ? 0 : static_cast<int>(lambda.front().rows()); }

    /// Shapes and reference normalisations; finiteness is condition A2.
    void validate() const;
    void validate(const ModelSpec& spec) const;
};

/// Subject covariates. x is N x (p+1) with a leading ones column; z[j] is
/// N x q and holds the secondary covariates of item j.
struct CovariateDesign {
    MatrixXd x;
    std::vector<MatrixXd> z;

    int n_subjects() const noexcept { return static_cast<int>(x.rows()); }
    void validate(const ModelSpec& spec) const;
};

/// G-DINA attribute effects. For item j, required[j] lists the attributes
/// with q_jk = 1 and coeffs[j] is (M_j - 1) x 2^|required[j]|; column s
/// holds the effect of the attribute subset whose bit i selects
/// required[j][i]. Column 0 is the intercept.
struct GDINACoeffs {
    std::vector<std::vector<int>> required;
    std::vector<MatrixXd> coeffs;

    int n_items() const noexcept { return static_cast<int>(coeffs.size()); }
    void validate(const QMatrix& q) const;
};

/// Log-ratio coordinates of (eta, theta): eta = softmax(epsilon) and
/// theta[j](., c) = softmax(omega[j](., c)).
struct TransformedParams {
    VectorXd epsilon;
    std::vector<MatrixXd> omega;
};

/// Softmax of linear class scores x' beta_c.
VectorXd eta_from_beta(const MatrixXd& beta, const VectorXd& x);

/// Item response probabilities under the secondary-covariate logit link.
/// z[j] is the length-q covariate row of item j.
std::vector<MatrixXd> theta_from_gamma_lambda(const std::vector<MatrixXd>& gamma,
                                              const std::vector<MatrixXd>& lambda,
                                              const std::vector<VectorXd>& z);

/// P(R = r) for every pattern of the space, in pattern order.
VectorXd response_distribution(const CoreParams& params, const PatternSpace& space);

std::vector<MatrixXd> gdina_to_gamma(const GDINACoeffs& b, const QMatrix& q,
                                     const std::vector<int>& levels);
/// Inverse of gdina_to_gamma. Throws InvalidInput("not G-DINA
/// representable") if some item's intercepts differ between classes with the
/// same masked profile.
GDINACoeffs gamma_to_gdina(const std::vector<MatrixXd>& gamma, const QMatrix& q, double tol = 1e-12);

TransformedParams lemma1_forward(const CoreParams& params);
CoreParams lemma1_backward(const TransformedParams& t);

CoreParams per_subject_params(const RegressionParams& reg, const CovariateDesign& design, int subject);
/// Parameters of a subject with x = (1, 0, ..., 0) and z = 0.
CoreParams zero_covariate_params(const RegressionParams& reg);

/// Binary-response DINA-style parameters: an item succeeds with probability
/// 1 - slip when every required attribute is mastered and with probability
/// guess otherwise. eta defaults to uniform.
CoreParams dina_params(const QMatrix& q, double guess, double slip, VectorXd eta = {});

} // namespace lcmid
