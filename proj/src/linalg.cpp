#include "lcmid/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lcmid/error.hpp"

namespace lcmid {

namespace {

// Singular values of m, descending. Tall inputs are reduced to their square
// R factor first; singular values are invariant under the orthogonal Q.
std::vector<double> singular_values(const Eigen::Ref<const Eigen::MatrixXd>& m) {
    if (m.size() == 0) return {};
    Eigen::MatrixXd a = m.rows() >= m.cols() ? Eigen::MatrixXd(m) : Eigen::MatrixXd(m.transpose());
    if (a.rows() > 2 * a.cols()) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
        a = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const auto& s = svd.singularValues();
    return {s.data(), s.data() + s.size()};
}

} // namespace

double default_rank_tolerance(Eigen::Index rows, Eigen::Index cols, double sigma_max) {
    return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon() * sigma_max;
}

RankResult numeric_rank(const Eigen::Ref<const Eigen::MatrixXd>& m, std::optional<double> tol) {
    if (!m.allFinite()) throw InvalidInput("numeric_rank: matrix has non-finite entries");
    if (tol && (!std::isfinite(*tol) || *tol < 0.0)) throw InvalidInput("numeric_rank: tolerance must be >= 0");
    RankResult out;
    out.singular_values = singular_values(m);
    const double sigma_max = out.singular_values.empty() ? 0.0 : out.singular_values.front();
    out.tolerance_used = tol ? *tol : default_rank_tolerance(m.rows(), m.cols(), sigma_max);
    for (double s : out.singular_values) {
        if (s > out.tolerance_used) {
            ++out.rank;
            out.smallest_retained = s;
        } else if (!out.largest_discarded) {
            out.largest_discarded = s;
        }
    }
    return out;
}

ColumnRankCheck has_full_column_rank(const Eigen::Ref<const Eigen::MatrixXd>& m, std::optional<double> tol) {
    ColumnRankCheck out;
    out.evidence = numeric_rank(m, tol);
    out.full = out.evidence.rank == m.cols();
    return out;
}

KruskalRankResult kruskal_rank(const Eigen::Ref<const Eigen::MatrixXd>& m, const KruskalOptions& options) {
    const int n = static_cast<int>(m.cols());
    if (n > options.max_cols) {
        throw CapExceeded("infeasible: " + std::to_string(n) + " columns exceed the Kruskal cap of " +
                          std::to_string(options.max_cols) + "; supply --partition or use generic check");
    }
    const RankResult whole = numeric_rank(m, options.tol);
    KruskalRankResult out;
    out.tolerance_used = whole.tolerance_used;
    out.subsets_tested = 1;
    if (whole.rank == n) {
        out.k_rank = n;
        return out;
    }

    Eigen::MatrixXd sub(m.rows(), n);
    std::vector<int> idx;
    for (int size = 1; size <= n; ++size) {
        idx.resize(static_cast<std::size_t>(size));
        for (int i = 0; i < size; ++i) idx[static_cast<std::size_t>(i)] = i;
        while (true) {
            if (out.subsets_tested >= options.max_subset_tests) {
                throw CapExceeded("Kruskal rank: subset test budget of " + std::to_string(options.max_subset_tests) +
                                  " exhausted");
            }
            ++out.subsets_tested;
            for (int i = 0; i < size; ++i) sub.col(i) = m.col(idx[static_cast<std::size_t>(i)]);
            if (numeric_rank(sub.leftCols(size), out.tolerance_used).rank < size) {
                out.k_rank = size - 1;
                out.witness = idx;
                return out;
            }
            // Next combination in lexicographic order.
            int i = size - 1;
            while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - size + i) --i;
            if (i < 0) break;
            ++idx[static_cast<std::size_t>(i)];
            for (int k = i + 1; k < size; ++k) idx[static_cast<std::size_t>(k)] = idx[static_cast<std::size_t>(k - 1)] + 1;
        }
    }
    // Unreachable in exact terms (the full set is dependent), but a subset
    // rank can exceed the whole-matrix rank near the tolerance boundary.
    out.k_rank = n;
    return out;
}

} // namespace lcmid
