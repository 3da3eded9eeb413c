#include "lcmid/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "lcmid/error.hpp"

namespace lcmid {

namespace {

constexpr double kSumTolerance = 1e-9;

std::string dims(Eigen::Index r, Eigen::Index c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

// Stable softmax; scores include the reference entry.
VectorXd softmax(const VectorXd& scores) {
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) {
            throw InvalidInput("A2 violated: non-finite linear score");
        }
    }
    const double shift = scores.maxCoeff();
    VectorXd e = (scores.array() - shift).exp();
    return e / e.sum();
}

void check_finite(const MatrixXd& m, const char* what) {
    if (!m.allFinite()) {
        throw InvalidInput(std::string("A2 violated: non-finite entry in ") + what);
    }
}

} // namespace

// ---------------------------------------------------------------------------
// ModelSpec

void ModelSpec::validate() const {
    if (n_items < 1) throw InvalidInput("model spec: n_items must be >= 1");
    if (static_cast<int>(levels.size()) != n_items) {
        throw InvalidInput("model spec: levels has " + std::to_string(levels.size()) + " entries, expected " +
                           std::to_string(n_items));
    }
    for (int m : levels) {
        if (m < 2) throw InvalidInput("model spec: every item needs at least 2 response levels");
    }
    if (n_classes < 2) throw InvalidInput("model spec: n_classes must be >= 2");
    if (p < 0 || q < 0) throw InvalidInput("model spec: covariate dimensions must be >= 0");
}

std::uint64_t ModelSpec::pattern_count() const {
    std::uint64_t s = 1;
    for (int m : levels) {
        const auto mu = static_cast<std::uint64_t>(m);
        if (s > std::numeric_limits<std::uint64_t>::max() / mu) return std::numeric_limits<std::uint64_t>::max();
        s *= mu;
    }
    return s;
}

int ModelSpec::level_excess() const {
    return std::accumulate(levels.begin(), levels.end(), 0, [](int acc, int m) { return acc + (m - 1); });
}

std::int64_t ModelSpec::free_parameter_count() const {
    return static_cast<std::int64_t>(n_classes) * level_excess() + n_classes - 1;
}

bool ModelSpec::equal_levels() const {
    return std::adjacent_find(levels.begin(), levels.end(), std::not_equal_to<>()) == levels.end();
}

// ---------------------------------------------------------------------------
// PatternSpace

PatternSpace::PatternSpace(std::vector<int> levels, std::uint64_t cap) : levels_(std::move(levels)) {
    std::uint64_t s = 1;
    for (int m : levels_) {
        if (m < 1) throw InvalidInput("pattern space: level counts must be positive");
        const auto mu = static_cast<std::uint64_t>(m);
        if (s > cap / mu) {
            throw CapExceeded("pattern space exceeds the enumeration cap of " + std::to_string(cap) + " patterns");
        }
        s *= mu;
    }
    size_ = static_cast<std::size_t>(s);
}

std::vector<int> PatternSpace::pattern(std::size_t index) const {
    if (index >= size_) throw InvalidInput("pattern index out of range");
    std::vector<int> r(levels_.size());
    for (std::size_t j = levels_.size(); j-- > 0;) {
        r[j] = static_cast<int>(index % static_cast<std::size_t>(levels_[j]));
        index /= static_cast<std::size_t>(levels_[j]);
    }
    return r;
}

std::size_t PatternSpace::index_of(std::span<const int> pattern) const {
    if (pattern.size() != levels_.size()) throw InvalidInput("pattern length does not match the item count");
    std::size_t index = 0;
    for (std::size_t j = 0; j < levels_.size(); ++j) {
        if (pattern[j] < 0 || pattern[j] >= levels_[j]) throw InvalidInput("pattern entry out of range");
        index = index * static_cast<std::size_t>(levels_[j]) + static_cast<std::size_t>(pattern[j]);
    }
    return index;
}

void PatternSpace::for_each(const std::function<void(std::size_t, std::span<const int>)>& visit) const {
    std::vector<int> r(levels_.size(), 0);
    for (std::size_t index = 0; index < size_; ++index) {
        visit(index, r);
        for (std::size_t j = levels_.size(); j-- > 0;) {
            if (++r[j] < levels_[j]) break;
            r[j] = 0;
        }
    }
}

PatternSpace enumerate_patterns(const ModelSpec& spec, std::uint64_t cap) {
    spec.validate();
    return PatternSpace(spec.levels, cap);
}

// ---------------------------------------------------------------------------
// QMatrix

QMatrix::QMatrix(MatrixXi entries, std::vector<std::string> labels)
    : entries_(std::move(entries)), labels_(std::move(labels)) {
    if (entries_.rows() < 1 || entries_.cols() < 1) throw InvalidInput("Q-matrix must have at least one row and column");
    if (entries_.cols() > 30) throw InvalidInput("Q-matrix: more than 30 attributes is not supported");
    for (Eigen::Index j = 0; j < entries_.rows(); ++j) {
        for (Eigen::Index k = 0; k < entries_.cols(); ++k) {
            const int v = entries_(j, k);
            if (v != 0 && v != 1) {
                throw InvalidInput("Q-matrix entry (" + std::to_string(j) + "," + std::to_string(k) +
                                   ") is not binary");
            }
        }
    }
    if (!labels_.empty() && static_cast<Eigen::Index>(labels_.size()) != entries_.cols()) {
        throw InvalidInput("Q-matrix: label count does not match the attribute count");
    }
}

std::vector<int> QMatrix::required(int j) const {
    std::vector<int> out;
    for (int k = 0; k < n_attributes(); ++k) {
        if (entries_(j, k) == 1) out.push_back(k);
    }
    return out;
}

int QMatrix::column_sum(int k) const { return entries_.col(k).sum(); }

bool QMatrix::row_is_unit(int j, int k) const {
    return entries_(j, k) == 1 && entries_.row(j).sum() == 1;
}

// ---------------------------------------------------------------------------
// Parameter containers

std::vector<int> CoreParams::levels() const {
    std::vector<int> out;
    out.reserve(theta.size());
    for (const auto& t : theta) out.push_back(static_cast<int>(t.rows()));
    return out;
}

void CoreParams::validate() const {
    const auto c = eta.size();
    if (c < 1) throw InvalidInput("core params: eta is empty");
    if (theta.empty()) throw InvalidInput("core params: theta is empty");
    if (!eta.allFinite() || std::abs(eta.sum() - 1.0) > kSumTolerance) {
        throw InvalidInput("core params: eta must be finite and sum to 1");
    }
    for (std::size_t j = 0; j < theta.size(); ++j) {
        const auto& t = theta[j];
        if (t.cols() != c || t.rows() < 2) {
            throw InvalidInput("core params: theta[" + std::to_string(j) + "] has shape " + dims(t.rows(), t.cols()));
        }
        for (Eigen::Index col = 0; col < c; ++col) {
            if (!t.col(col).allFinite() || std::abs(t.col(col).sum() - 1.0) > kSumTolerance) {
                throw InvalidInput("core params: theta[" + std::to_string(j) + "][class " + std::to_string(col) +
                                   "] must be finite and sum to 1");
            }
        }
    }
}

void CoreParams::validate(const ModelSpec& spec) const {
    validate();
    if (n_classes() != spec.n_classes || n_items() != spec.n_items || levels() != spec.levels) {
        throw InvalidInput("dimension mismatch: core params do not match the model spec");
    }
}

void RegressionParams::validate() const {
    const auto c = beta.cols();
    if (c < 1 || beta.rows() < 1) throw InvalidInput("regression params: beta must be (p+1) x C");
    if (!beta.col(0).isZero(0.0)) throw InvalidInput("regression params: beta column 0 must be zero");
    if (gamma.empty()) throw InvalidInput("regression params: gamma is empty");
    if (lambda.size() != gamma.size()) throw InvalidInput("regression params: lambda and gamma item counts differ");
    const auto q = lambda.front().rows();
    for (std::size_t j = 0; j < gamma.size(); ++j) {
        const auto& g = gamma[j];
        if (g.cols() != c || g.rows() < 2) {
            throw InvalidInput("regression params: gamma[" + std::to_string(j) + "] has shape " + dims(g.rows(), g.cols()));
        }
        if (!g.row(0).isZero(0.0)) throw InvalidInput("regression params: gamma reference level must be zero");
        const auto& l = lambda[j];
        if (l.rows() != q || l.cols() != g.rows()) {
            throw InvalidInput("regression params: lambda[" + std::to_string(j) + "] has shape " +
                               dims(l.rows(), l.cols()));
        }
        if (!l.col(0).isZero(0.0)) throw InvalidInput("regression params: lambda reference level must be zero");
    }
}

void RegressionParams::validate(const ModelSpec& spec) const {
    validate();
    if (n_classes() != spec.n_classes || n_items() != spec.n_items || p() != spec.p || q() != spec.q) {
        throw InvalidInput("dimension mismatch: regression params do not match the model spec");
    }
    for (int j = 0; j < spec.n_items; ++j) {
        if (gamma[static_cast<std::size_t>(j)].rows() != spec.levels[static_cast<std::size_t>(j)]) {
            throw InvalidInput("dimension mismatch: gamma levels differ from the model spec");
        }
    }
}

void CovariateDesign::validate(const ModelSpec& spec) const {
    if (x.cols() != spec.p + 1) throw InvalidInput("design: X must have p+1 columns");
    if (x.rows() < 1) throw InvalidInput("design: X has no rows");
    if (!x.col(0).isOnes(0.0)) throw InvalidInput("design: first column of X must be identically 1");
    if (static_cast<int>(z.size()) != spec.n_items) throw InvalidInput("design: Z must have one block per item");
    for (const auto& zj : z) {
        if (zj.rows() != x.rows() || zj.cols() != spec.q) throw InvalidInput("design: Z block must be N x q");
    }
}

void GDINACoeffs::validate(const QMatrix& q) const {
    if (n_items() != q.n_items() || required.size() != coeffs.size()) {
        throw InvalidInput("G-DINA coefficients: item count differs from the Q-matrix");
    }
    for (int j = 0; j < n_items(); ++j) {
        const auto& req = required[static_cast<std::size_t>(j)];
        if (req != q.required(j)) {
            throw InvalidInput("G-DINA coefficients: required attributes of item " + std::to_string(j) +
                               " differ from the Q-matrix");
        }
        if (coeffs[static_cast<std::size_t>(j)].cols() != (Eigen::Index{1} << req.size())) {
            throw InvalidInput("G-DINA coefficients: item " + std::to_string(j) + " needs 2^" +
                               std::to_string(req.size()) + " coefficients per level");
        }
    }
}

// ---------------------------------------------------------------------------
// Links

VectorXd eta_from_beta(const MatrixXd& beta, const VectorXd& x) {
    if (x.size() != beta.rows()) throw InvalidInput("eta_from_beta: x must have length p+1");
    if (x.size() < 1 || x[0] != 1.0) throw InvalidInput("eta_from_beta: x[0] must be 1");
    check_finite(beta, "beta");
    if (!x.allFinite()) throw InvalidInput("A2 violated: non-finite covariate");
    VectorXd scores = beta.transpose() * x;
    scores[0] = 0.0;
    return softmax(scores);
}

std::vector<MatrixXd> theta_from_gamma_lambda(const std::vector<MatrixXd>& gamma, const std::vector<MatrixXd>& lambda,
                                              const std::vector<VectorXd>& z) {
    if (lambda.size() != gamma.size() || z.size() != gamma.size()) {
        throw InvalidInput("theta_from_gamma_lambda: gamma, lambda and z must cover the same items");
    }
    std::vector<MatrixXd> theta;
    theta.reserve(gamma.size());
    for (std::size_t j = 0; j < gamma.size(); ++j) {
        const auto& g = gamma[j];
        const auto& l = lambda[j];
        if (l.rows() != z[j].size() || l.cols() != g.rows()) {
            throw InvalidInput("theta_from_gamma_lambda: z[" + std::to_string(j) + "] must have length q");
        }
        check_finite(g, "gamma");
        check_finite(l, "lambda");
        if (!z[j].allFinite()) throw InvalidInput("A2 violated: non-finite covariate");
        // Level shift shared by every class: lambda_{.jr}' z_j.
        VectorXd shift = l.transpose() * z[j];
        shift[0] = 0.0;
        MatrixXd t(g.rows(), g.cols());
        for (Eigen::Index c = 0; c < g.cols(); ++c) {
            VectorXd scores = g.col(c) + shift;
            scores[0] = 0.0;
            t.col(c) = softmax(scores);
        }
        theta.push_back(std::move(t));
    }
    return theta;
}

VectorXd response_distribution(const CoreParams& params, const PatternSpace& space) {
    if (space.levels() != params.levels()) throw InvalidInput("dimension mismatch: pattern space vs params");
    const int c_count = params.n_classes();
    VectorXd out(static_cast<Eigen::Index>(space.size()));
    space.for_each([&](std::size_t index, std::span<const int> r) {
        double total = 0.0;
        for (int c = 0; c < c_count; ++c) {
            double prod = params.eta[c];
            for (std::size_t j = 0; j < r.size(); ++j) prod *= params.theta[j](r[j], c);
            total += prod;
        }
        out[static_cast<Eigen::Index>(index)] = total;
    });
    return out;
}

// ---------------------------------------------------------------------------
// G-DINA

namespace {

// Local subset mask (bits over item-required attributes) of the attributes
// mastered by class c.
unsigned mastered_mask(int c, const std::vector<int>& req, int n_attributes) {
    unsigned mask = 0;
    for (std::size_t i = 0; i < req.size(); ++i) {
        if (attribute_of_class(c, req[i], n_attributes) == 1) mask |= 1u << i;
    }
    return mask;
}

} // namespace

std::vector<MatrixXd> gdina_to_gamma(const GDINACoeffs& b, const QMatrix& q, const std::vector<int>& levels) {
    b.validate(q);
    if (static_cast<int>(levels.size()) != q.n_items()) throw InvalidInput("gdina_to_gamma: levels do not match Q");
    const int k_count = q.n_attributes();
    const int c_count = q.n_classes();
    std::vector<MatrixXd> gamma;
    gamma.reserve(levels.size());
    for (int j = 0; j < q.n_items(); ++j) {
        const auto& req = b.required[static_cast<std::size_t>(j)];
        const auto& coef = b.coeffs[static_cast<std::size_t>(j)];
        const int m = levels[static_cast<std::size_t>(j)];
        if (coef.rows() != m - 1) throw InvalidInput("gdina_to_gamma: coefficient rows must equal M_j - 1");
        MatrixXd g = MatrixXd::Zero(m, c_count);
        for (int c = 0; c < c_count; ++c) {
            const unsigned mastered = mastered_mask(c, req, k_count);
            for (int r = 1; r < m; ++r) {
                double sum = 0.0;
                // Sum over every subset of the mastered required attributes.
                for (unsigned s = mastered;; s = (s - 1) & mastered) {
                    sum += coef(r - 1, static_cast<Eigen::Index>(s));
                    if (s == 0) break;
                }
                g(r, c) = sum;
            }
        }
        gamma.push_back(std::move(g));
    }
    return gamma;
}

GDINACoeffs gamma_to_gdina(const std::vector<MatrixXd>& gamma, const QMatrix& q, double tol) {
    if (static_cast<int>(gamma.size()) != q.n_items()) throw InvalidInput("gamma_to_gdina: item count differs from Q");
    const int k_count = q.n_attributes();
    const int c_count = q.n_classes();
    GDINACoeffs out;
    for (int j = 0; j < q.n_items(); ++j) {
        const auto& g = gamma[static_cast<std::size_t>(j)];
        if (g.cols() != c_count) throw InvalidInput("gamma_to_gdina: gamma must have 2^K columns");
        const auto req = q.required(j);
        const unsigned n_sub = 1u << req.size();
        // Representative class for every masked profile: the class mastering
        // exactly that subset of required attributes and nothing else.
        std::vector<int> rep(n_sub, 0);
        for (unsigned s = 0; s < n_sub; ++s) {
            int c = 0;
            for (std::size_t i = 0; i < req.size(); ++i) {
                if (s & (1u << i)) c |= 1 << (k_count - 1 - req[i]);
            }
            rep[s] = c;
        }
        for (int c = 0; c < c_count; ++c) {
            const int r_class = rep[mastered_mask(c, req, k_count)];
            for (Eigen::Index r = 1; r < g.rows(); ++r) {
                const double a = g(r, c);
                const double b = g(r, r_class);
                if (std::abs(a - b) > tol * std::max(1.0, std::max(std::abs(a), std::abs(b)))) {
                    throw InvalidInput("not G-DINA representable: item " + std::to_string(j) +
                                       " intercepts differ between classes with the same masked profile");
                }
            }
        }
        MatrixXd coef = MatrixXd::Zero(g.rows() - 1, static_cast<Eigen::Index>(n_sub));
        for (Eigen::Index r = 1; r < g.rows(); ++r) {
            for (unsigned s = 0; s < n_sub; ++s) {
                // Moebius inversion over the subset lattice.
                double v = 0.0;
                for (unsigned t = s;; t = (t - 1) & s) {
                    const int parity = std::popcount(s ^ t) & 1;
                    v += (parity ? -1.0 : 1.0) * g(r, rep[t]);
                    if (t == 0) break;
                }
                coef(r - 1, static_cast<Eigen::Index>(s)) = v;
            }
        }
        out.required.push_back(req);
        out.coeffs.push_back(std::move(coef));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Log-ratio transform

TransformedParams lemma1_forward(const CoreParams& params) {
    params.validate();
    if ((params.eta.array() <= 0.0).any()) throw InvalidInput("C2 violated: zero class probability");
    TransformedParams t;
    t.epsilon = (params.eta.array() / params.eta[0]).log().matrix();
    t.epsilon[0] = 0.0;
    t.omega.reserve(params.theta.size());
    for (const auto& th : params.theta) {
        if ((th.array() <= 0.0).any()) throw InvalidInput("C2 violated: zero response probability");
        MatrixXd w(th.rows(), th.cols());
        for (Eigen::Index c = 0; c < th.cols(); ++c) {
            w.col(c) = (th.col(c).array() / th(0, c)).log().matrix();
            w(0, c) = 0.0;
        }
        t.omega.push_back(std::move(w));
    }
    return t;
}

CoreParams lemma1_backward(const TransformedParams& t) {
    if (t.epsilon.size() < 1) throw InvalidInput("lemma1_backward: epsilon is empty");
    CoreParams p;
    p.eta = softmax(t.epsilon);
    p.theta.reserve(t.omega.size());
    for (const auto& w : t.omega) {
        if (w.cols() != t.epsilon.size()) throw InvalidInput("lemma1_backward: omega column count differs from C");
        MatrixXd th(w.rows(), w.cols());
        for (Eigen::Index c = 0; c < w.cols(); ++c) th.col(c) = softmax(w.col(c));
        p.theta.push_back(std::move(th));
    }
    return p;
}

// ---------------------------------------------------------------------------
// Per-subject parameters

CoreParams per_subject_params(const RegressionParams& reg, const CovariateDesign& design, int subject) {
    if (subject < 0 || subject >= design.n_subjects()) throw InvalidInput("per_subject_params: subject index out of range");
    if (design.x.cols() != reg.beta.rows() || static_cast<int>(design.z.size()) != reg.n_items()) {
        throw InvalidInput("dimension mismatch: design vs regression params");
    }
    CoreParams out;
    out.eta = eta_from_beta(reg.beta, design.x.row(subject).transpose());
    std::vector<VectorXd> z;
    z.reserve(design.z.size());
    for (const auto& zj : design.z) z.emplace_back(zj.row(subject).transpose());
    out.theta = theta_from_gamma_lambda(reg.gamma, reg.lambda, z);
    return out;
}

CoreParams zero_covariate_params(const RegressionParams& reg) {
    CoreParams out;
    VectorXd x = VectorXd::Zero(reg.beta.rows());
    x[0] = 1.0;
    out.eta = eta_from_beta(reg.beta, x);
    std::vector<VectorXd> z(reg.gamma.size(), VectorXd::Zero(reg.q()));
    out.theta = theta_from_gamma_lambda(reg.gamma, reg.lambda, z);
    return out;
}

CoreParams dina_params(const QMatrix& q, double guess, double slip, VectorXd eta) {
    const int c_count = q.n_classes();
    const int k_count = q.n_attributes();
    CoreParams p;
    p.eta = eta.size() == 0 ? VectorXd::Constant(c_count, 1.0 / c_count) : std::move(eta);
    if (p.eta.size() != c_count) throw InvalidInput("dina_params: eta must have 2^K entries");
    for (int j = 0; j < q.n_items(); ++j) {
        MatrixXd th(2, c_count);
        for (int c = 0; c < c_count; ++c) {
            bool capable = true;
            for (int k = 0; k < k_count; ++k) {
                if (q(j, k) == 1 && attribute_of_class(c, k, k_count) == 0) capable = false;
            }
            const double success = capable ? 1.0 - slip : guess;
            th(0, c) = 1.0 - success;
            th(1, c) = success;
        }
        p.theta.push_back(std::move(th));
    }
    return p;
}

} // namespace lcmid
