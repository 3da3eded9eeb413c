#include "lcmid/counterexample.hpp"

#include <cmath>

#include "lcmid/error.hpp"
#include "lcmid/prob_matrices.hpp"

namespace lcmid {

namespace {

struct Plan {
    int attribute = -1;
    std::string mode;
    std::vector<std::pair<int, int>> slices; // (class with attribute 0, item)
};

bool differs(const CoreParams& p, int j, int c0, int c1, double tol) {
    const auto& th = p.theta[static_cast<std::size_t>(j)];
    return (th.col(c0) - th.col(c1)).cwiseAbs().maxCoeff() > tol;
}

Plan plan_for(const CoreParams& params, const QMatrix& q, double tol) {
    const int k_count = q.n_attributes();
    const int c_count = q.n_classes();
    const int n_items = q.n_items();
    Plan plan;

    for (int k = 0; k < k_count && plan.attribute < 0; ++k) {
        if (q.column_sum(k) != 1) continue;
        int lone = 0;
        while (q(lone, k) != 1) ++lone;
        const int bit = 1 << (k_count - 1 - k);
        for (int c0 = 0; c0 < c_count; ++c0) {
            if (c0 & bit) continue;
            for (int j = 0; j < n_items; ++j) {
                if (j != lone && differs(params, j, c0, c0 | bit, tol)) {
                    throw InvalidInput("counterexample: item " + std::to_string(j) + " depends on attribute " +
                                       std::to_string(k) + ", which only item " + std::to_string(lone) +
                                       " requires; parameters violate the Q-matrix restriction");
                }
            }
            plan.slices.emplace_back(c0, lone);
        }
        plan.attribute = k;
        plan.mode = "lone_attribute";
    }
    if (plan.attribute >= 0) return plan;

    // Without a lone attribute, use the slices of the lowest attribute in
    // which exactly one item separates the two classes.
    for (int k = 0; k < k_count; ++k) {
        const int bit = 1 << (k_count - 1 - k);
        for (int c0 = 0; c0 < c_count; ++c0) {
            if (c0 & bit) continue;
            int found = -1, count = 0;
            for (int j = 0; j < n_items; ++j) {
                if (differs(params, j, c0, c0 | bit, tol)) {
                    found = j;
                    ++count;
                }
            }
            if (count == 1) plan.slices.emplace_back(c0, found);
        }
        if (!plan.slices.empty()) {
            plan.attribute = k;
            plan.mode = "slice";
            return plan;
        }
    }
    throw InvalidInput("counterexample: Q-matrix does not satisfy P1 and no attribute slice is separated by a single item");
}

bool open_unit(double x) { return x > 0.0 && x < 1.0; }

// Applies the construction with constant E; returns false if some
// probability leaves the open unit interval.
bool apply(const CoreParams& params, const Plan& plan, int k_count, double E, CoreParams& out) {
    out = params;
    const int bit = 1 << (k_count - 1 - plan.attribute);
    for (const auto& [c0, j] : plan.slices) {
        const int c1 = c0 | bit;
        auto& th = out.theta[static_cast<std::size_t>(j)];
        const auto& orig = params.theta[static_cast<std::size_t>(j)];
        th.col(c1) = orig.col(c1) / E + (1.0 - 1.0 / E) * orig.col(c0);
        out.eta[c0] = params.eta[c0] + (1.0 - E) * params.eta[c1];
        out.eta[c1] = E * params.eta[c1];
        for (Eigen::Index r = 0; r < th.rows(); ++r) {
            if (!open_unit(th(r, c1))) return false;
        }
        if (!open_unit(out.eta[c0]) || !open_unit(out.eta[c1])) return false;
    }
    return true;
}

} // namespace

CounterexamplePair construct_prop2_pair(const CoreParams& params, const QMatrix& q, double E,
                                        const CounterexampleOptions& options) {
    params.validate();
    if (params.n_classes() != q.n_classes() || params.n_items() != q.n_items()) {
        throw InvalidInput("counterexample: parameters do not match the Q-matrix");
    }
    if (!std::isfinite(E) || E <= 0.0) throw InvalidInput("counterexample: E must be positive and finite");
    const Plan plan = plan_for(params, q, options.tol);

    CounterexamplePair pair;
    pair.original = params;
    pair.lone_attribute = plan.attribute;
    pair.lone_item = plan.slices.front().second;
    pair.mode = plan.mode;
    pair.slices = plan.slices;
    double e = E;
    for (int h = 0;; ++h) {
        if (apply(params, plan, q.n_attributes(), e, pair.perturbed)) {
            pair.E = e;
            pair.halvings = h;
            return pair;
        }
        if (h == options.max_halvings) break;
        e = 1.0 + (e - 1.0) / 2.0;
    }
    throw InvalidInput("E out of admissible neighborhood");
}

DistributionComparison verify_distribution_equality(const CoreParams& a, const CoreParams& b, const PatternSpace& space,
                                                    double tol) {
    const VectorXd pa = response_distribution(a, space);
    const VectorXd pb = response_distribution(b, space);
    DistributionComparison out;
    out.max_deviation = (pa - pb).cwiseAbs().maxCoeff();
    out.equal = out.max_deviation <= tol;
    return out;
}

VectorXd counterexample_direction(const CoreParams& params, const QMatrix& q, double h) {
    CounterexampleOptions opts;
    opts.max_halvings = 0;
    const auto plus = construct_prop2_pair(params, q, 1.0 + h, opts);
    const auto minus = construct_prop2_pair(params, q, 1.0 - h, opts);
    return (free_parameters(plus.perturbed) - free_parameters(minus.perturbed)) / (2.0 * h);
}

double parameter_distance(const CoreParams& a, const CoreParams& b) {
    double theta = 0.0;
    for (std::size_t j = 0; j < a.theta.size(); ++j) {
        theta = std::max(theta, (a.theta[j] - b.theta.at(j)).cwiseAbs().maxCoeff());
    }
    return theta + (a.eta - b.eta).cwiseAbs().maxCoeff();
}

} // namespace lcmid
