#pragma once

// Identifiability conditions and the three-valued report built from them.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lcmid/model.hpp"
#include "lcmid/prob_matrices.hpp"

namespace lcmid {

enum class Status { Holds, Fails, Inconclusive };
std::string to_string(Status s);

enum class ModelKind { RegLCM, RegCDM };
std::string to_string(ModelKind k);
ModelKind parse_model_kind(const std::string& text);

struct ConditionVerdict {
    std::string name;
    Status status = Status::Inconclusive;
    nlohmann::json evidence = nlohmann::json::object();
    /// Inconclusive because a search or size cap was reached.
    bool capped = false;
};

struct CheckOptions {
    std::optional<double> tol;
    std::uint64_t pattern_cap = kDefaultPatternCap;
    int kruskal_max_classes = 10;
    std::uint64_t kruskal_max_subset_tests = 200000;
    int max_exhaustive_items = 12;
    std::uint64_t c4doubleprime_node_budget = 1000000;
    std::uint64_t c4prime_leaf_budget = 1000000;
    std::uint64_t c4star_choice_budget = 10000;
    double c4star_tol = 1e-12;
    std::optional<Partition> partition;
    bool example1_necessity = false;
    bool dump_matrices = false;
};

ConditionVerdict check_A1(const ModelSpec& spec);
/// Finiteness of the coefficients and (when given) the covariates.
ConditionVerdict check_A2(const RegressionParams& reg, const CovariateDesign* design);
/// Finiteness of (eta, theta) for models without covariates.
ConditionVerdict check_A2(const CoreParams& params);
ConditionVerdict check_A3(const CovariateDesign& design, std::optional<double> tol = std::nullopt);
ConditionVerdict check_C2(const CoreParams& params);
ConditionVerdict check_C3(const CoreParams& params, const PatternSpace& space, std::optional<double> tol = std::nullopt);
ConditionVerdict check_A4(const std::vector<MatrixXd>& gamma, const PatternSpace& space,
                          std::optional<double> tol = std::nullopt);
ConditionVerdict check_local(const CoreParams& params, const PatternSpace& space,
                             std::optional<double> tol = std::nullopt);
ConditionVerdict check_local_covariates(const RegressionParams& reg, const PatternSpace& space,
                                        std::optional<double> tol = std::nullopt);
/// Kruskal-rank tripartition condition on the (zero-covariate) parameters.
ConditionVerdict check_C4_strict(const CoreParams& params, const CheckOptions& options = {});
ConditionVerdict check_C4prime_generic(const ModelSpec& spec, const CheckOptions& options = {});
ConditionVerdict check_C4star(const QMatrix& q, const CoreParams& params, const CheckOptions& options = {});
ConditionVerdict check_C4doubleprime(const QMatrix& q, const CheckOptions& options = {});
ConditionVerdict check_P1(const QMatrix& q);
ConditionVerdict check_completeness(const QMatrix& q);

/// True iff q1[k] and q2[k] are distinct rows with q(row, k) = 1 and the
/// rows outside q1 and q2 require every attribute.
bool c4doubleprime_witness_valid(const QMatrix& q, const std::vector<int>& q1, const std::vector<int>& q2);

/// Smallest t with base^t >= n, in integer arithmetic.
int ceil_log(std::uint64_t base, std::uint64_t n);

struct Summary {
    std::string local = "Inconclusive";
    std::string strict = "Inconclusive";
    std::string generic = "Inconclusive";
    bool internal_error = false;
    std::vector<std::string> contradictions;
};

struct IdentifiabilityReport {
    ModelKind kind = ModelKind::RegLCM;
    std::map<std::string, ConditionVerdict> conditions;
    Summary summary;
    nlohmann::json caps = nlohmann::json::object();
    nlohmann::json tolerances = nlohmann::json::object();
    nlohmann::json matrices; // only with dump_matrices

    const ConditionVerdict* find(const std::string& name) const;
    Status status(const std::string& name) const;
    bool any_capped() const;
    nlohmann::json to_json() const;
};

struct CheckInput {
    ModelKind kind = ModelKind::RegLCM;
    ModelSpec spec;
    std::optional<QMatrix> q;
    std::optional<CoreParams> core;
    std::optional<RegressionParams> regression;
    std::optional<CovariateDesign> design;
};

/// Folds the verdicts into the summary. extra carries model facts the rules
/// need (number of attributes, binary items).
IdentifiabilityReport assemble_report(std::map<std::string, ConditionVerdict> verdicts, ModelKind kind,
                                      const CheckOptions& options, int n_attributes = 0, bool binary_items = false);

/// Runs every applicable condition. Throws InvalidInput on inconsistent input.
IdentifiabilityReport evaluate(const CheckInput& input, const CheckOptions& options = {});

} // namespace lcmid
