#pragma once

// File formats: Q-matrix and numeric CSV, parameter / config / report JSON,
// dataset CSV. Parse failures raise ParseError with line and column.

#include <optional>
#include <string>

#include <json.hpp>

#include "lcmid/conditions.hpp"
#include "lcmid/counterexample.hpp"
#include "lcmid/model.hpp"
#include "lcmid/simulate.hpp"

namespace lcmid {

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// One row per item of comma-separated 0/1 entries. A first row containing
/// any non-numeric field is read as attribute labels.
QMatrix parse_qmatrix(const std::string& text, const std::string& source = "<q>");
std::string format_qmatrix(const QMatrix& q);
QMatrix load_qmatrix(const std::string& path);
void save_qmatrix(const QMatrix& q, const std::string& path);

/// Real-valued CSV without header.
MatrixXd parse_matrix_csv(const std::string& text, const std::string& source = "<matrix>");
MatrixXd load_matrix_csv(const std::string& path);

/// Contents of a parameter file. Regression intercepts may be given either
/// directly or as G-DINA effects (which need the Q-matrix to resolve).
struct ParamsDocument {
    ModelSpec spec;
    std::optional<CoreParams> core;
    std::optional<RegressionParams> regression;
    std::optional<GDINACoeffs> gdina;
    std::optional<CovariateDesign> design;
};

/// Parses JSON text; q is needed only when G-DINA effects are present.
ParamsDocument parse_params(const std::string& text, const QMatrix* q = nullptr, const std::string& source = "<params>");
ParamsDocument load_params(const std::string& path, const QMatrix* q = nullptr);
nlohmann::json params_to_json(const ParamsDocument& doc);
void save_params(const ParamsDocument& doc, const std::string& path);

nlohmann::json core_to_json(const CoreParams& p);
CoreParams core_from_json(const nlohmann::json& j);

SimConfig parse_sim_config(const std::string& text, const std::string& source = "<config>");

std::string format_dataset(const Dataset& d);
void save_dataset(const Dataset& d, const std::string& path);

/// Sorted keys, floats with 17 significant digits, non-finite as null.
std::string dump_canonical(const nlohmann::json& j, int indent = 2);

void save_report(const IdentifiabilityReport& report, const std::string& path);
nlohmann::json counterexample_to_json(const CounterexamplePair& pair, double max_deviation);

/// Parses JSON, mapping syntax errors to ParseError with line and column.
nlohmann::json parse_json(const std::string& text, const std::string& source);

} // namespace lcmid
