#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace lcmid {

/// Numeric rank with the evidence needed to judge how sharp the cut was.
struct RankResult {
    int rank = 0;
    double tolerance_used = 0.0;
    std::optional<double> smallest_retained;
    std::optional<double> largest_discarded;
    std::vector<double> singular_values; // descending
};

/// max(rows, cols) * machine epsilon * largest singular value.
double default_rank_tolerance(Eigen::Index rows, Eigen::Index cols, double sigma_max);

/// Counts singular values strictly above the tolerance. An explicit tol is
/// absolute; otherwise the default policy applies. Throws InvalidInput on
/// non-finite entries.
RankResult numeric_rank(const Eigen::Ref<const Eigen::MatrixXd>& m, std::optional<double> tol = std::nullopt);

struct ColumnRankCheck {
    bool full = false;
    RankResult evidence;
};

ColumnRankCheck has_full_column_rank(const Eigen::Ref<const Eigen::MatrixXd>& m,
                                     std::optional<double> tol = std::nullopt);

struct KruskalOptions {
    int max_cols = 16;
    std::optional<double> tol;
    std::uint64_t max_subset_tests = std::numeric_limits<std::uint64_t>::max();
};

struct KruskalRankResult {
    int k_rank = 0;
    /// Smallest dependent column subset (lexicographically first among the
    /// smallest); empty when every column subset is independent.
    std::vector<int> witness;
    std::uint64_t subsets_tested = 0;
    double tolerance_used = 0.0;
};

/// Largest k such that every k columns are linearly independent. Subsets are
/// tested by size, then lexicographically, with the rank tolerance of the
/// whole matrix. Throws CapExceeded when the column cap or the test budget is
/// exceeded.
KruskalRankResult kruskal_rank(const Eigen::Ref<const Eigen::MatrixXd>& m, const KruskalOptions& options = {});

} // namespace lcmid
