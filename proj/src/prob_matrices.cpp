#include "lcmid/prob_matrices.hpp"

#include <limits>
#include <sstream>

#include "lcmid/error.hpp"

namespace lcmid {

std::string to_string(MatrixKind kind) {
    switch (kind) {
    case MatrixKind::Psi: return "Psi";
    case MatrixKind::Phi: return "Phi";
    case MatrixKind::Tmat: return "T";
    case MatrixKind::Block: return "Block";
    }
    return "?";
}

std::vector<int> ProbMatrix::row_pattern(Eigen::Index row) const {
    std::vector<int> r(levels.size());
    std::size_t idx = row_index.at(static_cast<std::size_t>(row));
    for (std::size_t j = levels.size(); j-- > 0;) {
        const auto m = static_cast<std::size_t>(levels[j]);
        r[j] = static_cast<int>(idx % m);
        idx /= m;
    }
    return r;
}

namespace {

void require_match(const CoreParams& params, const PatternSpace& space) {
    params.validate();
    if (space.levels() != params.levels()) throw InvalidInput("dimension mismatch: pattern space vs params");
}

// Fills a ProbMatrix with f(pattern, c) over the space, optionally skipping
// the reference pattern.
template <class F>
ProbMatrix tabulate(MatrixKind kind, const PatternSpace& space, int n_classes, bool include_reference, F&& f) {
    ProbMatrix out;
    out.kind = kind;
    out.levels = space.levels();
    const std::size_t skip = include_reference ? 0 : 1;
    const std::size_t rows = space.size() - skip;
    out.values.resize(static_cast<Eigen::Index>(rows), n_classes);
    out.row_index.resize(rows);
    space.for_each([&](std::size_t index, std::span<const int> r) {
        if (index < skip) return;
        const auto row = static_cast<Eigen::Index>(index - skip);
        out.row_index[index - skip] = index;
        for (int c = 0; c < n_classes; ++c) out.values(row, c) = f(r, c);
    });
    return out;
}

} // namespace

ProbMatrix build_psi(const CoreParams& params, const PatternSpace& space, bool include_reference) {
    require_match(params, space);
    return tabulate(MatrixKind::Psi, space, params.n_classes(), include_reference, [&](std::span<const int> r, int c) {
        double prod = 1.0;
        for (std::size_t j = 0; j < r.size(); ++j) prod *= params.theta[j](r[j], c);
        return prod;
    });
}

ProbMatrix build_phi(const std::vector<MatrixXd>& gamma, const PatternSpace& space) {
    std::vector<MatrixXd> lambda;
    lambda.reserve(gamma.size());
    for (const auto& g : gamma) lambda.emplace_back(0, g.rows());
    CoreParams p;
    p.theta = theta_from_gamma_lambda(gamma, lambda, std::vector<VectorXd>(gamma.size()));
    const int c_count = gamma.empty() ? 0 : static_cast<int>(gamma.front().cols());
    p.eta = VectorXd::Constant(c_count, 1.0 / c_count);
    ProbMatrix out = build_psi(p, space);
    out.kind = MatrixKind::Phi;
    return out;
}

ProbMatrix build_T(const CoreParams& params, const PatternSpace& space) {
    require_match(params, space);
    // Survival tables: surv[j](r, c) = P(R_j >= r | c).
    std::vector<MatrixXd> surv;
    for (const auto& th : params.theta) {
        MatrixXd s(th.rows(), th.cols());
        s.row(th.rows() - 1) = th.row(th.rows() - 1);
        for (Eigen::Index r = th.rows() - 2; r >= 0; --r) s.row(r) = s.row(r + 1) + th.row(r);
        s.row(0).setOnes();
        surv.push_back(std::move(s));
    }
    return tabulate(MatrixKind::Tmat, space, params.n_classes(), true, [&](std::span<const int> r, int c) {
        double prod = 1.0;
        for (std::size_t j = 0; j < r.size(); ++j) prod *= surv[j](r[j], c);
        return prod;
    });
}

// ---------------------------------------------------------------------------
// Jacobian

std::string ParamLabel::str() const {
    std::ostringstream os;
    if (kind == Kind::Eta) {
        os << "eta[" << cls << "]";
    } else {
        os << "theta[" << item << "," << level << "," << cls << "]";
    }
    return os.str();
}

std::vector<ParamLabel> free_parameter_labels(int n_classes, const std::vector<int>& levels) {
    std::vector<ParamLabel> out;
    for (int c = 1; c < n_classes; ++c) out.push_back({ParamLabel::Kind::Eta, -1, -1, c});
    for (std::size_t j = 0; j < levels.size(); ++j) {
        for (int c = 0; c < n_classes; ++c) {
            for (int r = 1; r < levels[j]; ++r) out.push_back({ParamLabel::Kind::Theta, static_cast<int>(j), r, c});
        }
    }
    return out;
}

Eigen::Index theta_column(int n_classes, const std::vector<int>& levels, int j, int c, int r) {
    Eigen::Index offset = n_classes - 1;
    for (int d = 0; d < j; ++d) offset += static_cast<Eigen::Index>(n_classes) * (levels[d] - 1);
    return offset + static_cast<Eigen::Index>(c) * (levels[j] - 1) + (r - 1);
}

VectorXd free_parameters(const CoreParams& params) {
    const int c_count = params.n_classes();
    const auto levels = params.levels();
    const auto labels = free_parameter_labels(c_count, levels);
    VectorXd v(static_cast<Eigen::Index>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto& l = labels[i];
        v[static_cast<Eigen::Index>(i)] = l.kind == ParamLabel::Kind::Eta ? params.eta[l.cls]
                                                                           : params.theta[l.item](l.level, l.cls);
    }
    return v;
}

CoreParams from_free_parameters(const VectorXd& v, int n_classes, const std::vector<int>& levels) {
    const auto labels = free_parameter_labels(n_classes, levels);
    if (v.size() != static_cast<Eigen::Index>(labels.size())) throw InvalidInput("free parameter vector has wrong length");
    CoreParams p;
    p.eta = VectorXd::Zero(n_classes);
    for (int m : levels) p.theta.emplace_back(MatrixXd::Zero(m, n_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto& l = labels[i];
        const double x = v[static_cast<Eigen::Index>(i)];
        if (l.kind == ParamLabel::Kind::Eta) {
            p.eta[l.cls] = x;
        } else {
            p.theta[l.item](l.level, l.cls) = x;
        }
    }
    p.eta[0] = 1.0 - p.eta.tail(n_classes - 1).sum();
    for (auto& th : p.theta) {
        for (Eigen::Index c = 0; c < th.cols(); ++c) th(0, c) = 1.0 - th.col(c).tail(th.rows() - 1).sum();
    }
    return p;
}

JacobianMatrix build_jacobian(const CoreParams& params, const PatternSpace& space, bool include_reference) {
    require_match(params, space);
    const int c_count = params.n_classes();
    const auto levels = params.levels();
    const auto n_items = static_cast<std::size_t>(params.n_items());

    JacobianMatrix out;
    out.columns = free_parameter_labels(c_count, levels);
    const std::size_t skip = include_reference ? 0 : 1;
    const std::size_t rows = space.size() - skip;
    out.values = MatrixXd::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(out.columns.size()));
    out.row_index.resize(rows);

    std::vector<Eigen::Index> item_offset(n_items);
    {
        Eigen::Index offset = c_count - 1;
        for (std::size_t j = 0; j < n_items; ++j) {
            item_offset[j] = offset;
            offset += static_cast<Eigen::Index>(c_count) * (levels[j] - 1);
        }
    }

    // Leave-one-out products via prefix and suffix products, so zero
    // probabilities need no special casing.
    std::vector<double> factor(n_items), prefix(n_items + 1), suffix(n_items + 1);
    space.for_each([&](std::size_t index, std::span<const int> r) {
        if (index < skip) return;
        const auto row = static_cast<Eigen::Index>(index - skip);
        out.row_index[index - skip] = index;
        for (int c = 0; c < c_count; ++c) {
            for (std::size_t j = 0; j < n_items; ++j) factor[j] = params.theta[j](r[j], c);
            prefix[0] = 1.0;
            for (std::size_t j = 0; j < n_items; ++j) prefix[j + 1] = prefix[j] * factor[j];
            suffix[n_items] = 1.0;
            for (std::size_t j = n_items; j-- > 0;) suffix[j] = suffix[j + 1] * factor[j];
            const double full = prefix[n_items];

            if (c == 0) {
                for (int d = 1; d < c_count; ++d) out.values(row, d - 1) -= full;
            } else {
                out.values(row, c - 1) += full;
            }
            for (std::size_t j = 0; j < n_items; ++j) {
                const double others = params.eta[c] * prefix[j] * suffix[j + 1];
                const Eigen::Index base = item_offset[j] + static_cast<Eigen::Index>(c) * (levels[j] - 1);
                if (r[j] == 0) {
                    for (int s = 1; s < levels[j]; ++s) out.values(row, base + s - 1) = -others;
                } else {
                    out.values(row, base + r[j] - 1) = others;
                }
            }
        }
    });
    return out;
}

JacobianMatrix build_jacobian_zero_covariate(const RegressionParams& reg, const PatternSpace& space) {
    reg.validate();
    return build_jacobian(zero_covariate_params(reg), space);
}

MatrixXd fisher_information(const CoreParams& params, const PatternSpace& space) {
    const JacobianMatrix jac = build_jacobian(params, space, true);
    const VectorXd prob = response_distribution(params, space);
    for (Eigen::Index i = 0; i < prob.size(); ++i) {
        if (!(prob[i] > 0.0)) {
            throw InvalidInput("fisher_information: pattern " + std::to_string(i) + " has probability zero");
        }
    }
    const MatrixXd scaled = prob.cwiseInverse().asDiagonal() * jac.values;
    MatrixXd info = jac.values.transpose() * scaled;
    // Symmetrise away rounding asymmetry.
    return (info + info.transpose()) / 2.0;
}

// ---------------------------------------------------------------------------
// Partitions

std::vector<int> Partition::items(int block) const {
    std::vector<int> out;
    for (std::size_t j = 0; j < assignment.size(); ++j) {
        if (assignment[j] == block) out.push_back(static_cast<int>(j));
    }
    return out;
}

std::array<std::uint64_t, 3> Partition::kappa(const std::vector<int>& levels) const {
    std::array<std::uint64_t, 3> k{1, 1, 1};
    constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
    for (std::size_t j = 0; j < assignment.size(); ++j) {
        auto& slot = k[static_cast<std::size_t>(assignment[j] - 1)];
        const auto m = static_cast<std::uint64_t>(levels[j]);
        slot = slot > kMax / m ? kMax : slot * m;
    }
    return k;
}

void Partition::validate(int n_items) const {
    if (static_cast<int>(assignment.size()) != n_items) {
        throw InvalidInput("partition: expected " + std::to_string(n_items) + " entries, got " +
                           std::to_string(assignment.size()));
    }
    std::array<int, 3> count{};
    for (int a : assignment) {
        if (a < 1 || a > 3) throw InvalidInput("partition: block labels must be 1, 2 or 3");
        ++count[static_cast<std::size_t>(a - 1)];
    }
    for (int t = 0; t < 3; ++t) {
        if (count[static_cast<std::size_t>(t)] == 0) {
            throw InvalidInput("partition: block " + std::to_string(t + 1) + " is empty");
        }
    }
}

Partition parse_partition(const std::string& text) {
    Partition p;
    std::istringstream is(text);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        const auto b = tok.find_first_not_of(" \t");
        const auto e = tok.find_last_not_of(" \t");
        if (b == std::string::npos) throw InvalidInput("partition: empty entry");
        const std::string t = tok.substr(b, e - b + 1);
        if (t != "1" && t != "2" && t != "3") throw InvalidInput("partition: invalid block label '" + t + "'");
        p.assignment.push_back(t[0] - '0');
    }
    return p;
}

ProbMatrix block_matrix(const CoreParams& params, const std::vector<int>& items, std::uint64_t cap) {
    params.validate();
    if (items.empty()) throw InvalidInput("block_matrix: empty item set");
    CoreParams sub;
    sub.eta = params.eta;
    std::vector<int> levels;
    for (int j : items) {
        sub.theta.push_back(params.theta.at(static_cast<std::size_t>(j)));
        levels.push_back(static_cast<int>(sub.theta.back().rows()));
    }
    ProbMatrix out = build_psi(sub, PatternSpace(levels, cap), true);
    out.kind = MatrixKind::Block;
    return out;
}

std::array<ProbMatrix, 3> partition_submatrices(const CoreParams& params, const Partition& part, std::uint64_t cap) {
    part.validate(params.n_items());
    return {block_matrix(params, part.items(1), cap), block_matrix(params, part.items(2), cap),
            block_matrix(params, part.items(3), cap)};
}

std::array<ProbMatrix, 3> partition_submatrices(const ProbMatrix& full, const Partition& part) {
    if (full.kind != MatrixKind::Psi && full.kind != MatrixKind::Phi) {
        throw InvalidInput("partition_submatrices: expected a Psi or Phi matrix");
    }
    part.validate(static_cast<int>(full.levels.size()));
    const Eigen::Index c_count = full.values.cols();

    // Every non-reference row is present; the reference row is recovered
    // from column stochasticity when it was dropped.
    const bool has_reference = !full.row_index.empty() && full.row_index.front() == 0;
    std::array<ProbMatrix, 3> out;
    for (int t = 1; t <= 3; ++t) {
        const auto items = part.items(t);
        std::vector<int> levels;
        for (int j : items) levels.push_back(full.levels[static_cast<std::size_t>(j)]);
        const PatternSpace block_space(levels);
        ProbMatrix& b = out[static_cast<std::size_t>(t - 1)];
        b.kind = MatrixKind::Block;
        b.levels = levels;
        b.values = MatrixXd::Zero(static_cast<Eigen::Index>(block_space.size()), c_count);
        b.row_index.resize(block_space.size());
        for (std::size_t i = 0; i < block_space.size(); ++i) b.row_index[i] = i;

        std::vector<int> sub(items.size());
        for (Eigen::Index row = 0; row < full.values.rows(); ++row) {
            const auto r = full.row_pattern(row);
            for (std::size_t i = 0; i < items.size(); ++i) sub[i] = r[static_cast<std::size_t>(items[i])];
            b.values.row(static_cast<Eigen::Index>(block_space.index_of(sub))) += full.values.row(row);
        }
        if (!has_reference) {
            // The reference pattern projects onto block pattern 0.
            b.values.row(0) += (VectorXd::Ones(c_count) - full.values.colwise().sum().transpose()).transpose();
        }
    }
    return out;
}

} // namespace lcmid
