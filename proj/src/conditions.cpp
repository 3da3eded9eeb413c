#include "lcmid/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "lcmid/error.hpp"
#include "lcmid/linalg.hpp"

namespace lcmid {

using nlohmann::json;

std::string to_string(Status s) {
    switch (s) {
    case Status::Holds: return "Holds";
    case Status::Fails: return "Fails";
    case Status::Inconclusive: return "Inconclusive";
    }
    return "?";
}

std::string to_string(ModelKind k) { return k == ModelKind::RegLCM ? "reglcm" : "regcdm"; }

ModelKind parse_model_kind(const std::string& text) {
    if (text == "reglcm") return ModelKind::RegLCM;
    if (text == "regcdm") return ModelKind::RegCDM;
    throw InvalidInput("unknown model kind '" + text + "' (expected reglcm or regcdm)");
}

int ceil_log(std::uint64_t base, std::uint64_t n) {
    if (base < 2) throw InvalidInput("ceil_log: base must be >= 2");
    int t = 0;
    std::uint64_t p = 1;
    while (p < n) {
        p = p > std::numeric_limits<std::uint64_t>::max() / base ? std::numeric_limits<std::uint64_t>::max() : p * base;
        ++t;
    }
    return t;
}

namespace {

constexpr std::uint64_t kMatrixEntryCap = std::uint64_t{1} << 25;

ConditionVerdict verdict(std::string name, Status s, json evidence = json::object()) {
    return {std::move(name), s, std::move(evidence), false};
}

ConditionVerdict capped(std::string name, json evidence) {
    evidence["capped"] = true;
    return {std::move(name), Status::Inconclusive, std::move(evidence), true};
}

json rank_json(const RankResult& r, Eigen::Index rows, Eigen::Index cols) {
    json e;
    e["rows"] = rows;
    e["cols"] = cols;
    e["rank"] = r.rank;
    e["tolerance_used"] = r.tolerance_used;
    e["smallest_retained"] = r.smallest_retained ? json(*r.smallest_retained) : json(nullptr);
    e["largest_discarded"] = r.largest_discarded ? json(*r.largest_discarded) : json(nullptr);
    return e;
}

ConditionVerdict full_rank_verdict(std::string name, const MatrixXd& m, std::optional<double> tol, json extra = {}) {
    const auto check = has_full_column_rank(m, tol);
    json e = rank_json(check.evidence, m.rows(), m.cols());
    if (extra.is_object()) e.update(extra);
    return verdict(std::move(name), check.full ? Status::Holds : Status::Fails, std::move(e));
}

bool too_many_entries(std::uint64_t rows, std::uint64_t cols) {
    return cols != 0 && rows > kMatrixEntryCap / cols;
}

json entry_cap_evidence(std::uint64_t rows, std::uint64_t cols) {
    return {{"reason", "matrix exceeds the dense entry cap"}, {"rows", rows}, {"cols", cols}, {"entry_cap", kMatrixEntryCap}};
}

} // namespace

// ---------------------------------------------------------------------------
// Regularity conditions

ConditionVerdict check_A1(const ModelSpec& spec) {
    spec.validate();
    const std::uint64_t s = spec.pattern_count();
    const std::uint64_t lhs = s == std::numeric_limits<std::uint64_t>::max() ? s : s - 1;
    const auto rhs = static_cast<std::uint64_t>(spec.free_parameter_count());
    json e{{"lhs_patterns_minus_one", lhs},
           {"rhs_free_parameters", rhs},
           {"n_classes", spec.n_classes},
           {"level_excess", spec.level_excess()},
           {"pattern_count_saturated", s == std::numeric_limits<std::uint64_t>::max()}};
    return verdict("A1", lhs >= rhs ? Status::Holds : Status::Fails, std::move(e));
}

ConditionVerdict check_A2(const RegressionParams& reg, const CovariateDesign* design) {
    json bad = json::array();
    if (!reg.beta.allFinite()) bad.push_back("beta");
    for (std::size_t j = 0; j < reg.gamma.size(); ++j) {
        if (!reg.gamma[j].allFinite()) bad.push_back("gamma[" + std::to_string(j) + "]");
    }
    for (std::size_t j = 0; j < reg.lambda.size(); ++j) {
        if (!reg.lambda[j].allFinite()) bad.push_back("lambda[" + std::to_string(j) + "]");
    }
    if (design) {
        if (!design->x.allFinite()) bad.push_back("X");
        for (std::size_t j = 0; j < design->z.size(); ++j) {
            if (!design->z[j].allFinite()) bad.push_back("Z[" + std::to_string(j) + "]");
        }
    }
    return verdict("A2", bad.empty() ? Status::Holds : Status::Fails, {{"non_finite", bad}});
}

ConditionVerdict check_A2(const CoreParams& params) {
    json bad = json::array();
    if (!params.eta.allFinite()) bad.push_back("eta");
    for (std::size_t j = 0; j < params.theta.size(); ++j) {
        if (!params.theta[j].allFinite()) bad.push_back("theta[" + std::to_string(j) + "]");
    }
    return verdict("A2", bad.empty() ? Status::Holds : Status::Fails, {{"non_finite", bad}});
}

ConditionVerdict check_A3(const CovariateDesign& design, std::optional<double> tol) {
    const Eigen::Index n = design.x.rows();
    json e;
    e["n_subjects"] = n;
    const Eigen::Index q = design.z.empty() ? 0 : design.z.front().cols();
    const Eigen::Index need = std::max(design.x.cols(), q + 1);
    if (n < need) {
        e["reason"] = "fewer subjects than columns";
        e["required_subjects"] = need;
        return verdict("A3", Status::Fails, std::move(e));
    }
    bool ok = true;
    const auto xr = has_full_column_rank(design.x, tol);
    e["X"] = rank_json(xr.evidence, design.x.rows(), design.x.cols());
    ok = ok && xr.full;
    json zs = json::array();
    for (const auto& zj : design.z) {
        MatrixXd aug(zj.rows(), zj.cols() + 1);
        aug.col(0).setOnes();
        aug.rightCols(zj.cols()) = zj;
        const auto zr = has_full_column_rank(aug, tol);
        zs.push_back(rank_json(zr.evidence, aug.rows(), aug.cols()));
        ok = ok && zr.full;
    }
    e["Z_augmented"] = std::move(zs);
    return verdict("A3", ok ? Status::Holds : Status::Fails, std::move(e));
}

ConditionVerdict check_C2(const CoreParams& params) {
    json zeros = json::array();
    for (Eigen::Index c = 0; c < params.eta.size(); ++c) {
        if (!(params.eta[c] > 0.0)) zeros.push_back("eta[" + std::to_string(c) + "]");
    }
    for (std::size_t j = 0; j < params.theta.size(); ++j) {
        const auto& th = params.theta[j];
        for (Eigen::Index c = 0; c < th.cols(); ++c) {
            for (Eigen::Index r = 0; r < th.rows(); ++r) {
                if (!(th(r, c) > 0.0)) {
                    zeros.push_back("theta[" + std::to_string(j) + "," + std::to_string(r) + "," + std::to_string(c) + "]");
                }
            }
        }
    }
    const Status s = zeros.empty() ? Status::Holds : Status::Fails;
    json e{{"non_positive_count", zeros.size()}};
    if (zeros.size() > 32) zeros.erase(zeros.begin() + 32, zeros.end());
    e["non_positive"] = std::move(zeros);
    return verdict("C2", s, std::move(e));
}

ConditionVerdict check_C3(const CoreParams& params, const PatternSpace& space, std::optional<double> tol) {
    if (too_many_entries(space.size(), static_cast<std::uint64_t>(params.n_classes()))) {
        return capped("C3", entry_cap_evidence(space.size() - 1, static_cast<std::uint64_t>(params.n_classes())));
    }
    return full_rank_verdict("C3", build_psi(params, space).values, tol, {{"matrix", "Psi"}});
}

ConditionVerdict check_A4(const std::vector<MatrixXd>& gamma, const PatternSpace& space, std::optional<double> tol) {
    const auto c_count = static_cast<std::uint64_t>(gamma.empty() ? 0 : gamma.front().cols());
    if (too_many_entries(space.size(), c_count)) return capped("A4", entry_cap_evidence(space.size() - 1, c_count));
    return full_rank_verdict("A4", build_phi(gamma, space).values, tol, {{"matrix", "Phi"}});
}

namespace {

ConditionVerdict local_verdict(const CoreParams& params, const PatternSpace& space, std::optional<double> tol,
                               const char* matrix) {
    const auto levels = params.levels();
    const auto cols = static_cast<std::uint64_t>(free_parameter_labels(params.n_classes(), levels).size());
    const std::uint64_t rows = space.size() - 1;
    if (too_many_entries(rows, cols)) return capped("local_jacobian", entry_cap_evidence(rows, cols));
    const JacobianMatrix jac = build_jacobian(params, space);
    auto v = full_rank_verdict("local_jacobian", jac.values, tol, {{"matrix", matrix}});
    v.evidence["deficiency"] = static_cast<std::int64_t>(cols) - v.evidence["rank"].get<std::int64_t>();
    return v;
}

} // namespace

ConditionVerdict check_local(const CoreParams& params, const PatternSpace& space, std::optional<double> tol) {
    params.validate();
    return local_verdict(params, space, tol, "J");
}

ConditionVerdict check_local_covariates(const RegressionParams& reg, const PatternSpace& space,
                                        std::optional<double> tol) {
    reg.validate();
    return local_verdict(zero_covariate_params(reg), space, tol, "J0");
}

// ---------------------------------------------------------------------------
// Kruskal tripartition condition

namespace {

// Restricted growth strings over {1,2,3} with all three blocks used: every
// unordered tripartition exactly once.
void for_each_tripartition(int n, const std::function<bool(const std::vector<int>&)>& visit) {
    std::vector<int> a(static_cast<std::size_t>(n), 0);
    bool stop = false;
    std::function<void(int, int)> rec = [&](int j, int used) {
        if (stop) return;
        if (n - j < 3 - used) return;
        if (j == n) {
            if (used == 3 && !visit(a)) stop = true;
            return;
        }
        for (int b = 1; b <= std::min(3, used + 1); ++b) {
            a[static_cast<std::size_t>(j)] = b;
            rec(j + 1, std::max(used, b));
            if (stop) return;
        }
    };
    rec(0, 0);
}

std::uint64_t min_c_kappa(std::uint64_t kappa, int c_count) {
    return std::min<std::uint64_t>(kappa, static_cast<std::uint64_t>(c_count));
}

} // namespace

ConditionVerdict check_C4_strict(const CoreParams& params, const CheckOptions& options) {
    params.validate();
    const int c_count = params.n_classes();
    const int n_items = params.n_items();
    const auto levels = params.levels();
    const int threshold = 2 * c_count + 2;
    json e{{"threshold", threshold}, {"n_classes", c_count}};

    if (c_count > options.kruskal_max_classes) {
        e["reason"] = "class count exceeds the Kruskal cap";
        e["kruskal_max_classes"] = options.kruskal_max_classes;
        return capped("C4", std::move(e));
    }
    if (!options.partition && n_items > options.max_exhaustive_items) {
        e["reason"] = "item count exceeds the exhaustive-partition cap; supply a partition";
        e["max_exhaustive_items"] = options.max_exhaustive_items;
        return capped("C4", std::move(e));
    }
    if (options.partition) options.partition->validate(n_items);

    std::map<std::vector<int>, KruskalRankResult> memo;
    std::uint64_t tests = 0;
    auto kruskal_of = [&](const std::vector<int>& items) -> const KruskalRankResult& {
        auto it = memo.find(items);
        if (it != memo.end()) return it->second;
        const ProbMatrix block = block_matrix(params, items, options.pattern_cap);
        KruskalOptions ko;
        ko.max_cols = c_count;
        ko.tol = options.tol;
        ko.max_subset_tests = options.kruskal_max_subset_tests - tests;
        auto res = kruskal_rank(block.values, ko);
        tests += res.subsets_tested;
        return memo.emplace(items, std::move(res)).first->second;
    };

    std::uint64_t examined = 0;
    int best_sum = -1;
    json witness;
    auto evaluate_partition = [&](const std::vector<int>& assignment) -> bool {
        Partition part{assignment};
        const auto kappa = part.kappa(levels);
        std::uint64_t bound = 0;
        for (auto k : kappa) bound += min_c_kappa(k, c_count);
        if (bound < static_cast<std::uint64_t>(threshold)) return true;
        ++examined;
        int sum = 0;
        std::uint64_t remaining = bound;
        json blocks = json::array();
        for (int t = 1; t <= 3; ++t) {
            const auto items = part.items(t);
            const auto& kr = kruskal_of(items);
            remaining -= min_c_kappa(kappa[static_cast<std::size_t>(t - 1)], c_count);
            sum += kr.k_rank;
            blocks.push_back({{"items", items},
                              {"kappa", kappa[static_cast<std::size_t>(t - 1)]},
                              {"kruskal_rank", kr.k_rank},
                              {"kruskal_rank_plus_one", kr.k_rank + 1},
                              {"dependent_witness", kr.witness}});
            if (static_cast<std::uint64_t>(sum) + remaining < static_cast<std::uint64_t>(threshold)) {
                best_sum = std::max(best_sum, sum);
                return true;
            }
        }
        best_sum = std::max(best_sum, sum);
        if (sum >= threshold) {
            witness = {{"partition", assignment}, {"blocks", std::move(blocks)}, {"sum", sum}};
            return false;
        }
        return true;
    };

    try {
        if (options.partition) {
            evaluate_partition(options.partition->assignment);
        } else {
            for_each_tripartition(n_items, evaluate_partition);
        }
    } catch (const CapExceeded& ex) {
        e["reason"] = ex.what();
        e["partitions_examined"] = examined;
        e["subset_tests"] = tests;
        return capped("C4", std::move(e));
    }
    e["partitions_examined"] = examined;
    e["subset_tests"] = tests;
    e["search"] = options.partition ? "supplied" : "exhaustive";
    if (!witness.is_null()) {
        e["witness"] = std::move(witness);
        return verdict("C4", Status::Holds, std::move(e));
    }
    e["best_sum"] = best_sum;
    e["reason"] = "no witness partition; the condition is sufficient only";
    return verdict("C4", Status::Inconclusive, std::move(e));
}

// ---------------------------------------------------------------------------
// Generic row-dimension condition

ConditionVerdict check_C4prime_generic(const ModelSpec& spec, const CheckOptions& options) {
    spec.validate();
    const int c_count = spec.n_classes;
    const int threshold = 2 * c_count + 2;
    json e{{"threshold", threshold}, {"n_classes", c_count}};

    if (spec.equal_levels()) {
        const int m = spec.levels.front();
        const int need = 2 * ceil_log(static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(c_count)) + 1;
        e["closed_form"] = {{"levels", m}, {"required_items", need}, {"holds", spec.n_items >= need}};
    }

    auto kappa_sum = [&](const Partition& part) {
        std::uint64_t s = 0;
        for (auto k : part.kappa(spec.levels)) s += min_c_kappa(k, c_count);
        return s;
    };

    if (options.partition) {
        options.partition->validate(spec.n_items);
        const auto s = kappa_sum(*options.partition);
        e["search"] = "supplied";
        e["partition"] = options.partition->assignment;
        e["kappa"] = options.partition->kappa(spec.levels);
        e["sum"] = s;
        return verdict("C4prime", s >= static_cast<std::uint64_t>(threshold) ? Status::Holds : Status::Inconclusive,
                       std::move(e));
    }

    // kappa depends only on how many items of each level count land in each
    // block, so search over those count splits.
    std::map<int, std::vector<int>> by_level;
    for (int j = 0; j < spec.n_items; ++j) by_level[spec.levels[static_cast<std::size_t>(j)]].push_back(j);
    std::vector<std::pair<int, int>> groups; // (levels, count)
    for (const auto& [m, items] : by_level) groups.emplace_back(m, static_cast<int>(items.size()));

    std::vector<std::array<int, 3>> split(groups.size());
    std::uint64_t leaves = 0;
    bool found = false, exhausted = false;
    std::uint64_t best = 0;
    std::function<void(std::size_t, std::array<std::uint64_t, 3>)> rec = [&](std::size_t g,
                                                                             std::array<std::uint64_t, 3> kappa) {
        if (found || exhausted) return;
        if (g == groups.size()) {
            if (++leaves > options.c4prime_leaf_budget) {
                exhausted = true;
                return;
            }
            for (int t = 0; t < 3; ++t) {
                int n = 0;
                for (const auto& s : split) n += s[static_cast<std::size_t>(t)];
                if (n == 0) return;
            }
            std::uint64_t s = 0;
            for (auto k : kappa) s += k;
            best = std::max(best, s);
            if (s >= static_cast<std::uint64_t>(threshold)) found = true;
            return;
        }
        const auto [m, n] = groups[g];
        for (int a = 0; a <= n && !found && !exhausted; ++a) {
            for (int b = 0; a + b <= n && !found && !exhausted; ++b) {
                split[g] = {a, b, n - a - b};
                std::array<std::uint64_t, 3> next = kappa;
                for (int t = 0; t < 3; ++t) {
                    for (int i = 0; i < split[g][static_cast<std::size_t>(t)]; ++i) {
                        next[static_cast<std::size_t>(t)] =
                            min_c_kappa(next[static_cast<std::size_t>(t)] * static_cast<std::uint64_t>(m), c_count);
                    }
                }
                rec(g + 1, next);
            }
        }
    };
    rec(0, {1, 1, 1});

    e["search"] = "exhaustive";
    e["count_splits_examined"] = leaves;
    if (exhausted) {
        e["reason"] = "search budget exhausted";
        return capped("C4prime", std::move(e));
    }
    if (!found) {
        e["best_sum"] = best;
        e["reason"] = "no witness partition; the condition is sufficient only";
        return verdict("C4prime", Status::Inconclusive, std::move(e));
    }
    Partition part;
    part.assignment.assign(static_cast<std::size_t>(spec.n_items), 0);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& items = by_level[groups[g].first];
        std::size_t i = 0;
        for (int t = 0; t < 3; ++t) {
            for (int k = 0; k < split[g][static_cast<std::size_t>(t)]; ++k) {
                part.assignment[static_cast<std::size_t>(items[i++])] = t + 1;
            }
        }
    }
    e["witness"] = {{"partition", part.assignment}, {"kappa", part.kappa(spec.levels)}, {"sum", kappa_sum(part)}};
    return verdict("C4prime", Status::Holds, std::move(e));
}

// ---------------------------------------------------------------------------
// Q-matrix conditions

namespace {

std::vector<std::vector<int>> unit_rows(const QMatrix& q) {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(q.n_attributes()));
    for (int j = 0; j < q.n_items(); ++j) {
        for (int k = 0; k < q.n_attributes(); ++k) {
            if (q.row_is_unit(j, k)) out[static_cast<std::size_t>(k)].push_back(j);
        }
    }
    return out;
}

} // namespace

ConditionVerdict check_P1(const QMatrix& q) {
    json lone = json::array();
    std::vector<int> sums;
    for (int k = 0; k < q.n_attributes(); ++k) {
        sums.push_back(q.column_sum(k));
        if (sums.back() == 1) {
            for (int j = 0; j < q.n_items(); ++j) {
                if (q(j, k) == 1) lone.push_back({{"attribute", k}, {"item", j}});
            }
        }
    }
    const bool holds = !lone.empty();
    return verdict("P1", holds ? Status::Holds : Status::Fails, {{"column_sums", sums}, {"lone", std::move(lone)}});
}

ConditionVerdict check_completeness(const QMatrix& q) {
    const auto units = unit_rows(q);
    json rows = json::array(), missing = json::array();
    for (int k = 0; k < q.n_attributes(); ++k) {
        const auto& u = units[static_cast<std::size_t>(k)];
        rows.push_back(u.empty() ? json(nullptr) : json(u.front()));
        if (u.empty()) missing.push_back(k);
    }
    const Status s = missing.empty() ? Status::Holds : Status::Fails;
    return verdict("completeness", s, {{"identity_rows", std::move(rows)}, {"missing_attributes", std::move(missing)}});
}

ConditionVerdict check_C4star(const QMatrix& q, const CoreParams& params, const CheckOptions& options) {
    const int k_count = q.n_attributes();
    const int n_items = q.n_items();
    const int c_count = params.n_classes();
    if (c_count != q.n_classes() || params.n_items() != n_items) {
        throw InvalidInput("C4*: parameters do not match the Q-matrix");
    }
    json e{{"n_items", n_items}, {"n_attributes", k_count}};
    if (n_items < 2 * k_count) {
        e["reason"] = "fewer than 2K items";
        return verdict("C4star", Status::Fails, std::move(e));
    }
    const auto units = unit_rows(q);
    json missing = json::array();
    std::vector<int> counts;
    for (int k = 0; k < k_count; ++k) {
        counts.push_back(static_cast<int>(units[static_cast<std::size_t>(k)].size()));
        if (counts.back() < 2) missing.push_back(k);
    }
    e["unit_row_counts"] = counts;
    if (!missing.empty()) {
        e["reason"] = "fewer than two rows equal to e_k";
        e["attributes_short"] = std::move(missing);
        return verdict("C4star", Status::Fails, std::move(e));
    }
    if (c_count > 1024) {
        e["reason"] = "class count too large for pairwise certificates";
        return capped("C4star", std::move(e));
    }

    // Items distinguishing each class pair, as bitsets.
    const std::size_t words = (static_cast<std::size_t>(n_items) + 63) / 64;
    std::vector<std::uint64_t> dist;
    std::vector<std::pair<int, int>> pairs;
    for (int c = 0; c < c_count; ++c) {
        for (int d = c + 1; d < c_count; ++d) {
            pairs.emplace_back(c, d);
            std::vector<std::uint64_t> bits(words, 0);
            for (int j = 0; j < n_items; ++j) {
                const auto& th = params.theta[static_cast<std::size_t>(j)];
                if ((th.col(c) - th.col(d)).cwiseAbs().maxCoeff() > options.c4star_tol) {
                    bits[static_cast<std::size_t>(j) / 64] |= std::uint64_t{1} << (j % 64);
                }
            }
            dist.insert(dist.end(), bits.begin(), bits.end());
        }
    }

    // Identity-row choices: one pair of unit rows per attribute.
    std::vector<std::vector<std::pair<int, int>>> options_per_k(static_cast<std::size_t>(k_count));
    for (int k = 0; k < k_count; ++k) {
        const auto& u = units[static_cast<std::size_t>(k)];
        for (std::size_t a = 0; a < u.size(); ++a) {
            for (std::size_t b = a + 1; b < u.size(); ++b) options_per_k[static_cast<std::size_t>(k)].emplace_back(u[a], u[b]);
        }
    }
    std::vector<std::size_t> choice(static_cast<std::size_t>(k_count), 0);
    std::uint64_t tried = 0;
    while (true) {
        if (tried++ >= options.c4star_choice_budget) {
            e["reason"] = "identity-row selection budget exhausted";
            e["choices_tried"] = tried - 1;
            return capped("C4star", std::move(e));
        }
        std::vector<std::uint64_t> keep(words, ~std::uint64_t{0});
        for (int k = 0; k < k_count; ++k) {
            const auto [a, b] = options_per_k[static_cast<std::size_t>(k)][choice[static_cast<std::size_t>(k)]];
            keep[static_cast<std::size_t>(a) / 64] &= ~(std::uint64_t{1} << (a % 64));
            keep[static_cast<std::size_t>(b) / 64] &= ~(std::uint64_t{1} << (b % 64));
        }
        std::size_t failed = pairs.size();
        for (std::size_t p = 0; p < pairs.size() && failed == pairs.size(); ++p) {
            bool any = false;
            for (std::size_t w = 0; w < words; ++w) any = any || (dist[p * words + w] & keep[w]) != 0;
            if (!any) failed = p;
        }
        if (failed == pairs.size()) {
            json first = json::array(), second = json::array(), certs = json::array();
            for (int k = 0; k < k_count; ++k) {
                const auto [a, b] = options_per_k[static_cast<std::size_t>(k)][choice[static_cast<std::size_t>(k)]];
                first.push_back(a);
                second.push_back(b);
            }
            for (std::size_t p = 0; p < pairs.size() && p < 256; ++p) {
                for (int j = 0; j < n_items; ++j) {
                    const auto w = static_cast<std::size_t>(j) / 64;
                    if ((dist[p * words + w] & keep[w] & (std::uint64_t{1} << (j % 64))) != 0) {
                        certs.push_back({pairs[p].first, pairs[p].second, j});
                        break;
                    }
                }
            }
            e["identity_blocks"] = {std::move(first), std::move(second)};
            e["certificates"] = std::move(certs);
            e["certificates_total"] = pairs.size();
            e["choices_tried"] = tried;
            return verdict("C4star", Status::Holds, std::move(e));
        }
        if (tried == 1) e["first_undistinguished_pair"] = {pairs[failed].first, pairs[failed].second};
        // Next choice, last attribute fastest.
        int k = k_count - 1;
        while (k >= 0 && ++choice[static_cast<std::size_t>(k)] == options_per_k[static_cast<std::size_t>(k)].size()) {
            choice[static_cast<std::size_t>(k)] = 0;
            --k;
        }
        if (k < 0) break;
    }
    e["reason"] = "some class pair is not distinguished by items outside the identity blocks";
    e["choices_tried"] = tried;
    return verdict("C4star", Status::Fails, std::move(e));
}

bool c4doubleprime_witness_valid(const QMatrix& q, const std::vector<int>& q1, const std::vector<int>& q2) {
    const int k_count = q.n_attributes();
    if (static_cast<int>(q1.size()) != k_count || static_cast<int>(q2.size()) != k_count) return false;
    std::vector<bool> used(static_cast<std::size_t>(q.n_items()), false);
    for (int k = 0; k < k_count; ++k) {
        for (int j : {q1[static_cast<std::size_t>(k)], q2[static_cast<std::size_t>(k)]}) {
            if (j < 0 || j >= q.n_items() || used[static_cast<std::size_t>(j)] || q(j, k) != 1) return false;
            used[static_cast<std::size_t>(j)] = true;
        }
    }
    for (int k = 0; k < k_count; ++k) {
        bool covered = false;
        for (int j = 0; j < q.n_items() && !covered; ++j) covered = !used[static_cast<std::size_t>(j)] && q(j, k) == 1;
        if (!covered) return false;
    }
    return true;
}

ConditionVerdict check_C4doubleprime(const QMatrix& q, const CheckOptions& options) {
    const int k_count = q.n_attributes();
    const int n_items = q.n_items();
    json e{{"n_items", n_items}, {"n_attributes", k_count}};
    if (n_items < 2 * k_count) {
        e["reason"] = "fewer than 2K items";
        return verdict("C4doubleprime", Status::Fails, std::move(e));
    }
    std::vector<int> sums;
    json short_attrs = json::array();
    for (int k = 0; k < k_count; ++k) {
        sums.push_back(q.column_sum(k));
        if (sums.back() < 3) short_attrs.push_back(k);
    }
    e["column_sums"] = sums;
    if (!short_attrs.empty()) {
        e["reason"] = "some attribute is required by fewer than three items";
        e["attributes_short"] = std::move(short_attrs);
        return verdict("C4doubleprime", Status::Fails, std::move(e));
    }

    std::vector<int> order(static_cast<std::size_t>(k_count));
    for (int k = 0; k < k_count; ++k) order[static_cast<std::size_t>(k)] = k;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return sums[static_cast<std::size_t>(a)] < sums[static_cast<std::size_t>(b)];
    });

    std::vector<bool> used(static_cast<std::size_t>(n_items), false);
    std::vector<bool> assigned(static_cast<std::size_t>(k_count), false);
    std::vector<int> q1(static_cast<std::size_t>(k_count), -1), q2(static_cast<std::size_t>(k_count), -1);
    std::uint64_t nodes = 0;
    bool exhausted = false;

    // Unassigned attributes need two rows for the blocks plus one left over;
    // assigned ones need one left over.
    auto feasible = [&]() {
        for (int k = 0; k < k_count; ++k) {
            int free_rows = 0;
            for (int j = 0; j < n_items; ++j) free_rows += (!used[static_cast<std::size_t>(j)] && q(j, k) == 1) ? 1 : 0;
            if (free_rows < (assigned[static_cast<std::size_t>(k)] ? 1 : 3)) return false;
        }
        return true;
    };
    std::function<bool(int)> rec = [&](int depth) -> bool {
        if (++nodes > options.c4doubleprime_node_budget) {
            exhausted = true;
            return false;
        }
        if (!feasible()) return false;
        if (depth == k_count) return true;
        const int k = order[static_cast<std::size_t>(depth)];
        std::vector<int> support;
        for (int j = 0; j < n_items; ++j) {
            if (!used[static_cast<std::size_t>(j)] && q(j, k) == 1) support.push_back(j);
        }
        assigned[static_cast<std::size_t>(k)] = true;
        for (std::size_t a = 0; a < support.size(); ++a) {
            for (std::size_t b = a + 1; b < support.size(); ++b) {
                used[static_cast<std::size_t>(support[a])] = used[static_cast<std::size_t>(support[b])] = true;
                q1[static_cast<std::size_t>(k)] = support[a];
                q2[static_cast<std::size_t>(k)] = support[b];
                if (rec(depth + 1)) return true;
                used[static_cast<std::size_t>(support[a])] = used[static_cast<std::size_t>(support[b])] = false;
                if (exhausted) return false;
            }
        }
        assigned[static_cast<std::size_t>(k)] = false;
        return false;
    };
    const bool found = rec(0);
    e["nodes"] = std::min(nodes, options.c4doubleprime_node_budget);
    if (found) {
        std::vector<int> rest;
        for (int j = 0; j < n_items; ++j) {
            if (!used[static_cast<std::size_t>(j)]) rest.push_back(j);
        }
        e["witness"] = {{"Q1_rows", q1}, {"Q2_rows", q2}, {"remaining_rows", rest}};
        return verdict("C4doubleprime", Status::Holds, std::move(e));
    }
    if (exhausted) {
        e["reason"] = "backtracking budget exhausted";
        e["node_budget"] = options.c4doubleprime_node_budget;
        return capped("C4doubleprime", std::move(e));
    }
    e["reason"] = "no assignment of two rows per attribute leaves every attribute covered";
    return verdict("C4doubleprime", Status::Fails, std::move(e));
}

// ---------------------------------------------------------------------------
// Report

const ConditionVerdict* IdentifiabilityReport::find(const std::string& name) const {
    const auto it = conditions.find(name);
    return it == conditions.end() ? nullptr : &it->second;
}

Status IdentifiabilityReport::status(const std::string& name) const {
    const auto* v = find(name);
    if (!v) throw InvalidInput("report has no condition '" + name + "'");
    return v->status;
}

bool IdentifiabilityReport::any_capped() const {
    return std::any_of(conditions.begin(), conditions.end(), [](const auto& kv) { return kv.second.capped; });
}

json IdentifiabilityReport::to_json() const {
    json out;
    out["model"] = to_string(kind);
    json conds = json::object();
    for (const auto& [name, v] : conditions) conds[name] = {{"status", to_string(v.status)}, {"evidence", v.evidence}};
    out["conditions"] = std::move(conds);
    out["summary"] = {{"local", summary.local},
                      {"strict", summary.strict},
                      {"generic", summary.generic},
                      {"internal_error", summary.internal_error},
                      {"contradictions", summary.contradictions}};
    out["caps"] = caps;
    out["tolerances"] = tolerances;
    if (!matrices.is_null()) out["matrices"] = matrices;
    return out;
}

IdentifiabilityReport assemble_report(std::map<std::string, ConditionVerdict> verdicts, ModelKind kind,
                                      const CheckOptions& options, int n_attributes, bool binary_items) {
    IdentifiabilityReport rep;
    rep.kind = kind;
    rep.conditions = std::move(verdicts);
    auto is = [&](const char* name, Status s) {
        const auto* v = rep.find(name);
        return v != nullptr && v->status == s;
    };
    auto holds = [&](const char* name) { return is(name, Status::Holds); };

    // Conditions that are not reported are treated as vacuous.
    auto holds_or_absent = [&](const char* name) { return rep.find(name) == nullptr || holds(name); };
    const bool regular = holds("A1") && holds_or_absent("A2") && holds_or_absent("A3");

    Summary& s = rep.summary;
    if (is("A1", Status::Fails) || is("A3", Status::Fails)) {
        s.local = "NotIdentifiable";
    } else if (holds("C2") && holds_or_absent("A2") && is("local_jacobian", Status::Fails)) {
        s.local = "NotIdentifiable";
    } else if (regular && holds("C2") && holds("local_jacobian")) {
        s.local = "Identifiable";
    }

    const bool strict_ok = regular && (holds("C4") || (kind == ModelKind::RegCDM && holds("C4star")));
    if (strict_ok) s.strict = "Identifiable";

    if (kind == ModelKind::RegCDM) {
        if (holds("P1")) {
            s.generic = "NotGenericallyIdentifiable";
        } else if ((regular && holds("C4doubleprime")) || strict_ok) {
            s.generic = "Identifiable";
        } else if (options.example1_necessity && n_attributes == 2 && binary_items && is("C4doubleprime", Status::Fails)) {
            s.generic = "NotGenericallyIdentifiable";
        }
    } else if ((regular && holds("C4prime")) || strict_ok) {
        s.generic = "Identifiable";
    }

    if (strict_ok && is("local_jacobian", Status::Fails)) s.contradictions.push_back("strict identifiable but Jacobian rank deficient");
    if (strict_ok && holds("P1")) s.contradictions.push_back("strict identifiable but P1 holds");
    if (strict_ok && s.generic == "NotGenericallyIdentifiable") {
        s.contradictions.push_back("strict identifiable but not generically identifiable");
    }
    s.internal_error = !s.contradictions.empty();

    rep.caps = {{"pattern_cap", options.pattern_cap},
                {"matrix_entry_cap", kMatrixEntryCap},
                {"kruskal_max_classes", options.kruskal_max_classes},
                {"kruskal_max_subset_tests", options.kruskal_max_subset_tests},
                {"max_exhaustive_items", options.max_exhaustive_items},
                {"c4doubleprime_node_budget", options.c4doubleprime_node_budget},
                {"c4prime_leaf_budget", options.c4prime_leaf_budget},
                {"c4star_choice_budget", options.c4star_choice_budget}};
    json hit = json::array();
    for (const auto& [name, v] : rep.conditions) {
        if (v.capped) hit.push_back(name);
    }
    rep.caps["hit"] = std::move(hit);
    rep.tolerances = {{"rank", options.tol ? json(*options.tol) : json("max(rows,cols)*eps*sigma_max")},
                      {"c4star_theta", options.c4star_tol},
                      {"probability_sum", 1e-9}};
    return rep;
}

namespace {

json matrix_rows(const MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

IdentifiabilityReport evaluate(const CheckInput& in, const CheckOptions& options) {
    const ModelSpec& spec = in.spec;
    spec.validate();
    if (in.kind == ModelKind::RegCDM) {
        if (!in.q) throw InvalidInput("a Q-matrix is required for regcdm");
        if (in.q->n_items() != spec.n_items) throw InvalidInput("Q-matrix rows do not match the item count");
        if (in.q->n_classes() != spec.n_classes) throw InvalidInput("regcdm requires n_classes = 2^K");
    }
    if (!in.regression && !in.core) throw InvalidInput("either core or regression parameters are required");
    if (in.regression) {
        in.regression->validate(spec);
        if ((spec.p > 0 || spec.q > 0) && !in.design) throw InvalidInput("a covariate design is required when p or q > 0");
    }
    if (in.design) in.design->validate(spec);
    if (in.core && !in.regression) in.core->validate(spec);

    std::map<std::string, ConditionVerdict> v;
    auto put = [&](ConditionVerdict c) { v[c.name] = std::move(c); };
    auto blocked = [&](const char* name, const char* why) {
        put(verdict(name, Status::Inconclusive, {{"reason", why}}));
    };

    put(check_A1(spec));
    put(in.regression ? check_A2(*in.regression, in.design ? &*in.design : nullptr) : check_A2(*in.core));
    if (in.design) {
        put(check_A3(*in.design, options.tol));
    } else {
        put(verdict("A3", Status::Holds, {{"reason", "no covariates"}}));
    }
    const bool finite = v["A2"].status == Status::Holds;

    json matrices;
    std::optional<CoreParams> core;
    if (finite) core = in.regression ? zero_covariate_params(*in.regression) : *in.core;

    if (core) {
        put(check_C2(*core));
        std::optional<PatternSpace> space;
        try {
            space.emplace(spec.levels, options.pattern_cap);
        } catch (const CapExceeded&) {
        }
        if (space) {
            put(check_C3(*core, *space, options.tol));
            if (in.regression) put(check_A4(in.regression->gamma, *space, options.tol));
            put(in.regression ? check_local_covariates(*in.regression, *space, options.tol)
                              : check_local(*core, *space, options.tol));
            if (options.dump_matrices && v["local_jacobian"].capped == false) {
                matrices["Psi"] = matrix_rows(build_psi(*core, *space).values);
                if (in.regression) matrices["Phi"] = matrix_rows(build_phi(in.regression->gamma, *space).values);
                const auto jac = build_jacobian(*core, *space);
                json labels = json::array();
                for (const auto& l : jac.columns) labels.push_back(l.str());
                matrices["jacobian"] = {{"columns", std::move(labels)}, {"values", matrix_rows(jac.values)}};
            }
        } else {
            const json ev{{"reason", "pattern space exceeds the enumeration cap"},
                          {"pattern_count", spec.pattern_count()},
                          {"pattern_cap", options.pattern_cap}};
            put(capped("C3", ev));
            if (in.regression) put(capped("A4", ev));
            put(capped("local_jacobian", ev));
        }
        put(check_C4_strict(*core, options));
    } else {
        for (const char* name : {"C2", "C3", "local_jacobian", "C4"}) blocked(name, "A2 violated");
        if (in.regression) blocked("A4", "A2 violated");
    }

    auto c4p = check_C4prime_generic(spec, options);
    if (in.kind == ModelKind::RegCDM) c4p.evidence["advisory"] = "does not apply to restricted models";
    put(std::move(c4p));

    bool binary = std::all_of(spec.levels.begin(), spec.levels.end(), [](int m) { return m == 2; });
    int n_attributes = 0;
    if (in.kind == ModelKind::RegCDM) {
        const QMatrix& q = *in.q;
        n_attributes = q.n_attributes();
        put(check_P1(q));
        auto complete = check_completeness(q);
        ConditionVerdict p2 = complete;
        p2.name = "P2";
        put(std::move(complete));
        put(std::move(p2));
        put(check_C4doubleprime(q, options));
        if (core) {
            put(check_C4star(q, *core, options));
        } else {
            blocked("C4star", "A2 violated");
        }
    }

    auto rep = assemble_report(std::move(v), in.kind, options, n_attributes, binary);
    if (options.dump_matrices) rep.matrices = matrices.is_null() ? json::object() : std::move(matrices);
    return rep;
}

} // namespace lcmid
