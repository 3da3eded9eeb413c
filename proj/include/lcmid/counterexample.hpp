#pragma once

#include <string>
#include <vector>

#include "lcmid/model.hpp"

namespace lcmid {

/// Two parameter sets with the same response distribution, obtained by
/// trading mass between the classes that differ only in one attribute.
struct CounterexamplePair {
    CoreParams original;
    CoreParams perturbed;
    double E = 1.0;
    int lone_attribute = -1;
    int lone_item = -1;
    /// "lone_attribute" when Q has an attribute required by a single item;
    /// "slice" when only some attribute slices are separated by one item.
    std::string mode;
    /// Reference class (attribute value 0) of every perturbed slice, with the
    /// item perturbed in it.
    std::vector<std::pair<int, int>> slices;
    int halvings = 0;
};

struct CounterexampleOptions {
    int max_halvings = 10;
    /// Absolute per-coordinate tolerance for "theta does not depend on the
    /// attribute".
    double tol = 1e-12;
};

/// Throws InvalidInput when no attribute admits the construction, when the
/// parameters violate the required item restriction, or when no admissible
/// E is found after the allowed halvings of |E - 1|.
CounterexamplePair construct_prop2_pair(const CoreParams& params, const QMatrix& q, double E,
                                        const CounterexampleOptions& options = {});

struct DistributionComparison {
    bool equal = false;
    double max_deviation = 0.0;
};

DistributionComparison verify_distribution_equality(const CoreParams& a, const CoreParams& b, const PatternSpace& space,
                                                    double tol);

/// Derivative of the perturbed free parameters with respect to E at E = 1,
/// by central differences with step h.
VectorXd counterexample_direction(const CoreParams& params, const QMatrix& q, double h = 1e-4);

double parameter_distance(const CoreParams& a, const CoreParams& b);

} // namespace lcmid
