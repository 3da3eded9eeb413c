#include "lcmid/cli.hpp"

#include <algorithm>
#include <optional>

#include <CLI11.hpp>

#include "lcmid/conditions.hpp"
#include "lcmid/counterexample.hpp"
#include "lcmid/error.hpp"
#include "lcmid/fixtures.hpp"
#include "lcmid/io.hpp"
#include "lcmid/linalg.hpp"
#include "lcmid/simulate.hpp"

namespace lcmid {

namespace {

// Regression form of covariate-free parameters: log-ratio intercepts.
RegressionParams regression_from_core(const CoreParams& core) {
    const TransformedParams t = lemma1_forward(core);
    RegressionParams reg;
    reg.beta = MatrixXd(1, core.n_classes());
    reg.beta.row(0) = (t.epsilon.array() - t.epsilon[0]).matrix().transpose();
    for (const auto& w : t.omega) {
        reg.gamma.push_back(w);
        reg.lambda.emplace_back(0, w.rows());
    }
    return reg;
}

CoreParams core_of(const ParamsDocument& doc) {
    if (doc.regression) return zero_covariate_params(*doc.regression);
    return *doc.core;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Identifiability checks for latent class models with covariates", "lcmid"};
    app.require_subcommand(1);

    // check
    auto* check = app.add_subcommand("check", "Evaluate identifiability conditions and write a JSON report");
    std::string q_path, params_path, model, partition, out_path;
    std::optional<double> tol;
    int max_exhaustive = 12;
    std::uint64_t pattern_cap = kDefaultPatternCap;
    bool dump = false, strict_exit = false, example1 = false;
    check->add_option("--q", q_path, "Q-matrix CSV (required for regcdm)");
    check->add_option("--params", params_path, "Parameter JSON")->required();
    check->add_option("--model", model, "reglcm or regcdm (default: regcdm when --q is given)")
        ->check(CLI::IsMember({"reglcm", "regcdm"}));
    check->add_option("--partition", partition, "Item tripartition, comma-separated block labels 1..3");
    check->add_option("--tol", tol, "Absolute singular-value tolerance for rank decisions");
    check->add_option("--max-exhaustive", max_exhaustive, "Largest item count for the exhaustive tripartition search")
        ->capture_default_str();
    check->add_option("--pattern-cap", pattern_cap, "Largest response-pattern space that is enumerated")
        ->capture_default_str();
    check->add_flag("--dump-matrices", dump, "Embed Psi, Phi and the Jacobian in the report");
    check->add_option("--out", out_path, "Report path (default: standard output)");
    check->add_flag("--strict-exit", strict_exit, "Exit with status 3 when a cap made some condition inconclusive");
    check->add_flag("--example1-necessity", example1,
                    "Treat a failed C4'' as generic non-identifiability for K = 2 binary regcdm models");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Simulate covariates, classes and responses");
    std::string sim_params, sim_config, sim_out, sim_q;
    sim->add_option("--params", sim_params, "Parameter JSON")->required();
    sim->add_option("--config", sim_config, "Simulation config JSON")->required();
    sim->add_option("--out", sim_out, "Dataset CSV path")->required();
    sim->add_option("--q", sim_q, "Q-matrix CSV (needed for G-DINA parameters)");

    // counterexample
    auto* ce = app.add_subcommand("counterexample", "Construct two parameter sets with equal response distributions");
    std::string ce_q, ce_params, ce_out;
    double ce_E = 1.1;
    ce->add_option("--q", ce_q, "Q-matrix CSV")->required();
    ce->add_option("--params", ce_params, "Parameter JSON")->required();
    ce->add_option("--E", ce_E, "Scaling constant near 1")->capture_default_str();
    ce->add_option("--out", ce_out, "Output JSON path (default: standard output)");

    // kruskal
    auto* kr = app.add_subcommand("kruskal", "Print the Kruskal rank of a CSV matrix");
    std::string kr_matrix;
    std::optional<double> kr_tol;
    int kr_max_cols = 16;
    kr->add_option("--matrix", kr_matrix, "Matrix CSV")->required();
    kr->add_option("--tol", kr_tol, "Absolute singular-value tolerance");
    kr->add_option("--max-cols", kr_max_cols, "Largest column count searched")->capture_default_str();

    // fixtures
    auto* fx = app.add_subcommand("fixtures", "Write a bundled Q-matrix");
    std::string fx_name, fx_out;
    fx->add_option("name", fx_name, "timss_k7 or timss_k3")->required()->check(CLI::IsMember(fixture_names()));
    fx->add_option("--out", fx_out, "Output CSV path (default: standard output)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    }

    try {
        if (check->parsed()) {
            CheckInput in;
            std::optional<QMatrix> q;
            if (!q_path.empty()) q = load_qmatrix(q_path);
            in.kind = model.empty() ? (q ? ModelKind::RegCDM : ModelKind::RegLCM) : parse_model_kind(model);
            ParamsDocument doc = load_params(params_path, q ? &*q : nullptr);
            in.spec = doc.spec;
            in.q = q;
            in.core = doc.core;
            in.regression = doc.regression;
            in.design = doc.design;
            CheckOptions opts;
            opts.tol = tol;
            opts.max_exhaustive_items = max_exhaustive;
            opts.pattern_cap = pattern_cap;
            opts.dump_matrices = dump;
            opts.example1_necessity = example1;
            if (!partition.empty()) opts.partition = parse_partition(partition);
            const IdentifiabilityReport rep = evaluate(in, opts);
            const std::string text = dump_canonical(rep.to_json()) + "\n";
            if (out_path.empty()) {
                out << text;
            } else {
                write_file(out_path, text);
                out << "local=" << rep.summary.local << " strict=" << rep.summary.strict
                    << " generic=" << rep.summary.generic << "\n";
            }
            if (rep.summary.internal_error) err << "warning: contradictory evidence recorded in the report\n";
            return strict_exit && rep.any_capped() ? kExitCap : kExitOk;
        }
        if (sim->parsed()) {
            std::optional<QMatrix> q;
            if (!sim_q.empty()) q = load_qmatrix(sim_q);
            const ParamsDocument doc = load_params(sim_params, q ? &*q : nullptr);
            const RegressionParams reg = doc.regression ? *doc.regression : regression_from_core(*doc.core);
            const SimConfig cfg = parse_sim_config(read_file(sim_config), sim_config);
            ModelSpec spec = doc.spec;
            spec.p = reg.p();
            spec.q = reg.q();
            save_dataset(simulate(reg, cfg, spec), sim_out);
            return kExitOk;
        }
        if (ce->parsed()) {
            const QMatrix q = load_qmatrix(ce_q);
            const ParamsDocument doc = load_params(ce_params, &q);
            const CounterexamplePair pair = construct_prop2_pair(core_of(doc), q, ce_E);
            const PatternSpace space(pair.original.levels());
            const auto cmp = verify_distribution_equality(pair.original, pair.perturbed, space, 1e-12);
            const std::string text = dump_canonical(counterexample_to_json(pair, cmp.max_deviation)) + "\n";
            if (ce_out.empty()) {
                out << text;
            } else {
                write_file(ce_out, text);
            }
            return kExitOk;
        }
        if (kr->parsed()) {
            KruskalOptions ko;
            ko.max_cols = kr_max_cols;
            ko.tol = kr_tol;
            out << kruskal_rank(load_matrix_csv(kr_matrix), ko).k_rank << "\n";
            return kExitOk;
        }
        if (fx->parsed()) {
            const std::string text = format_qmatrix(fixture(fx_name).q);
            if (fx_out.empty()) {
                out << text;
            } else {
                write_file(fx_out, text);
            }
            return kExitOk;
        }
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const CapExceeded& e) {
        err << "error: " << e.what() << "\n";
        return kExitCap;
    }
    return kExitInput;
}

} // namespace lcmid
