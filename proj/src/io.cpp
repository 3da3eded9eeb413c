#include "lcmid/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lcmid/error.hpp"

namespace lcmid {

using nlohmann::json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw InvalidInput("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// CSV

namespace {

struct Field {
    std::string text;
    int column; // 1-based character position
};

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char ch : text) {
        if (ch == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            lines.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) {
        if (cur.back() == '\r') cur.pop_back();
        lines.push_back(std::move(cur));
    }
    return lines;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::vector<Field> split_fields(const std::string& line, const std::string& source, int line_no) {
    std::vector<Field> out;
    std::size_t i = 0;
    while (true) {
        Field f{{}, static_cast<int>(i) + 1};
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        if (i < line.size() && line[i] == '"') {
            ++i;
            bool closed = false;
            while (i < line.size()) {
                if (line[i] == '"') {
                    if (i + 1 < line.size() && line[i + 1] == '"') {
                        f.text.push_back('"');
                        i += 2;
                        continue;
                    }
                    closed = true;
                    ++i;
                    break;
                }
                f.text.push_back(line[i++]);
            }
            if (!closed) throw ParseError(source, line_no, f.column, "unterminated quoted field");
            while (i < line.size() && line[i] != ',') {
                if (line[i] != ' ' && line[i] != '\t') {
                    throw ParseError(source, line_no, static_cast<int>(i) + 1, "unexpected text after quoted field");
                }
                ++i;
            }
        } else {
            const auto start = i;
            while (i < line.size() && line[i] != ',') ++i;
            f.text = trim(line.substr(start, i - start));
        }
        out.push_back(std::move(f));
        if (i >= line.size()) break;
        ++i; // comma
    }
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

std::string format_double(double x) {
    if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out.push_back('"');
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

} // namespace

QMatrix parse_qmatrix(const std::string& text, const std::string& source) {
    const auto lines = split_lines(text);
    std::vector<std::string> labels;
    std::vector<std::vector<int>> rows;
    std::size_t width = 0;
    bool first = true;
    for (std::size_t li = 0; li < lines.size(); ++li) {
        const int line_no = static_cast<int>(li) + 1;
        if (trim(lines[li]).empty()) continue;
        const auto fields = split_fields(lines[li], source, line_no);
        if (first) {
            first = false;
            bool header = false;
            double tmp;
            for (const auto& f : fields) header = header || !parse_double(f.text, tmp);
            if (header) {
                for (const auto& f : fields) labels.push_back(f.text);
                width = fields.size();
                continue;
            }
        }
        if (width == 0) width = fields.size();
        if (fields.size() != width) {
            throw ParseError(source, line_no, 1,
                             "expected " + std::to_string(width) + " fields, found " + std::to_string(fields.size()));
        }
        std::vector<int> row;
        for (const auto& f : fields) {
            if (f.text != "0" && f.text != "1") {
                throw ParseError(source, line_no, f.column, "Q-matrix entry must be 0 or 1, found '" + f.text + "'");
            }
            row.push_back(f.text == "1" ? 1 : 0);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(source, static_cast<int>(lines.size()) + 1, 1, "Q-matrix has no rows");
    MatrixXi m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < width; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
    return QMatrix(std::move(m), std::move(labels));
}

std::string format_qmatrix(const QMatrix& q) {
    std::ostringstream os;
    if (!q.labels().empty()) {
        for (std::size_t k = 0; k < q.labels().size(); ++k) os << (k ? "," : "") << csv_escape(q.labels()[k]);
        os << '\n';
    }
    for (int j = 0; j < q.n_items(); ++j) {
        for (int k = 0; k < q.n_attributes(); ++k) os << (k ? "," : "") << q(j, k);
        os << '\n';
    }
    return os.str();
}

QMatrix load_qmatrix(const std::string& path) { return parse_qmatrix(read_file(path), path); }

void save_qmatrix(const QMatrix& q, const std::string& path) { write_file(path, format_qmatrix(q)); }

MatrixXd parse_matrix_csv(const std::string& text, const std::string& source) {
    const auto lines = split_lines(text);
    std::vector<std::vector<double>> rows;
    for (std::size_t li = 0; li < lines.size(); ++li) {
        const int line_no = static_cast<int>(li) + 1;
        if (trim(lines[li]).empty()) continue;
        const auto fields = split_fields(lines[li], source, line_no);
        if (!rows.empty() && fields.size() != rows.front().size()) {
            throw ParseError(source, line_no, 1,
                             "expected " + std::to_string(rows.front().size()) + " fields, found " +
                                 std::to_string(fields.size()));
        }
        std::vector<double> row;
        for (const auto& f : fields) {
            double x;
            if (!parse_double(f.text, x)) throw ParseError(source, line_no, f.column, "not a number: '" + f.text + "'");
            row.push_back(x);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(source, 1, 1, "matrix has no rows");
    MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < rows[i].size(); ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
    return m;
}

MatrixXd load_matrix_csv(const std::string& path) { return parse_matrix_csv(read_file(path), path); }

// ---------------------------------------------------------------------------
// JSON helpers

json parse_json(const std::string& text, const std::string& source) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        // Translate the byte offset into a line and column.
        int line = 1, col = 1;
        const std::size_t stop = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        for (std::size_t i = 0; i < stop; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::string what = e.what();
        const auto pos = what.find("parse error");
        throw ParseError(source, line, col, pos == std::string::npos ? what : what.substr(pos));
    }
}

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    throw InvalidInput("params: " + path + ": " + what);
}

const json& member(const json& j, const char* key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) bad(path, std::string("missing '") + key + "'");
    return j.at(key);
}

double number(const json& j, const std::string& path) {
    if (j.is_number()) return j.get<double>();
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    bad(path, "expected a number");
}

int integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) bad(path, "expected an integer");
    return j.get<int>();
}

const json& array(const json& j, const std::string& path) {
    if (!j.is_array()) bad(path, "expected an array");
    return j;
}

VectorXd vector_of(const json& j, const std::string& path) {
    array(j, path);
    VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(j[i], path + "/" + std::to_string(i));
    return v;
}

// Rows of equal-length arrays; cols gives the width when there are no rows.
MatrixXd rows_of(const json& j, const std::string& path, Eigen::Index cols = -1) {
    array(j, path);
    if (j.empty()) return MatrixXd(0, std::max<Eigen::Index>(cols, 0));
    MatrixXd m;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const VectorXd row = vector_of(j[i], path + "/" + std::to_string(i));
        if (i == 0) m.resize(static_cast<Eigen::Index>(j.size()), row.size());
        if (row.size() != m.cols()) bad(path + "/" + std::to_string(i), "row length differs from the first row");
        m.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    return m;
}

// Columns given as arrays: j[c] is column c.
MatrixXd columns_of(const json& j, const std::string& path) {
    return rows_of(j, path).transpose();
}

json vector_json(const Eigen::Ref<const VectorXd>& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

json rows_json(const MatrixXd& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vector_json(m.row(i).transpose()));
    return a;
}

json columns_json(const MatrixXd& m) { return rows_json(m.transpose()); }

std::string subset_key(const std::vector<int>& req, unsigned mask) {
    std::string key;
    for (std::size_t i = 0; i < req.size(); ++i) {
        if (mask & (1u << i)) key += (key.empty() ? "" : ",") + std::to_string(req[i]);
    }
    return key;
}

GDINACoeffs gdina_from_json(const json& j, const QMatrix& q) {
    array(j, "/gdina");
    if (static_cast<int>(j.size()) != q.n_items()) bad("/gdina", "expected one entry per Q-matrix row");
    GDINACoeffs b;
    for (int item = 0; item < q.n_items(); ++item) {
        const std::string ipath = "/gdina/" + std::to_string(item);
        const json& levels = array(j[static_cast<std::size_t>(item)], ipath);
        auto req = q.required(item);
        const unsigned n_sub = 1u << req.size();
        MatrixXd m = MatrixXd::Zero(static_cast<Eigen::Index>(levels.size()), n_sub);
        std::map<std::string, unsigned> key_to_mask;
        for (unsigned s = 0; s < n_sub; ++s) key_to_mask[subset_key(req, s)] = s;
        for (std::size_t r = 0; r < levels.size(); ++r) {
            const std::string rpath = ipath + "/" + std::to_string(r);
            if (!levels[r].is_object()) bad(rpath, "expected an object of attribute-subset effects");
            for (const auto& [key, val] : levels[r].items()) {
                // Normalise "1, 0" style keys to ascending comma lists.
                std::vector<int> attrs;
                std::stringstream ss(key);
                std::string tok;
                while (std::getline(ss, tok, ',')) {
                    tok = trim(tok);
                    if (tok.empty()) continue;
                    char* end = nullptr;
                    const long a = std::strtol(tok.c_str(), &end, 10);
                    if (*end != '\0') bad(rpath, "invalid attribute key '" + key + "'");
                    attrs.push_back(static_cast<int>(a));
                }
                std::sort(attrs.begin(), attrs.end());
                std::string norm;
                for (int a : attrs) norm += (norm.empty() ? "" : ",") + std::to_string(a);
                const auto it = key_to_mask.find(norm);
                if (it == key_to_mask.end()) bad(rpath, "subset '" + key + "' is not among the item's required attributes");
                m(static_cast<Eigen::Index>(r), it->second) = number(val, rpath + "/" + key);
            }
        }
        b.required.push_back(std::move(req));
        b.coeffs.push_back(std::move(m));
    }
    return b;
}

json gdina_to_json(const GDINACoeffs& b) {
    json out = json::array();
    for (std::size_t j = 0; j < b.coeffs.size(); ++j) {
        json item = json::array();
        for (Eigen::Index r = 0; r < b.coeffs[j].rows(); ++r) {
            json level = json::object();
            for (Eigen::Index s = 0; s < b.coeffs[j].cols(); ++s) {
                level[subset_key(b.required[j], static_cast<unsigned>(s))] = b.coeffs[j](r, s);
            }
            item.push_back(std::move(level));
        }
        out.push_back(std::move(item));
    }
    return out;
}

} // namespace

json core_to_json(const CoreParams& p) {
    json theta = json::array();
    for (const auto& t : p.theta) theta.push_back(columns_json(t));
    return {{"eta", vector_json(p.eta)}, {"theta", std::move(theta)}};
}

CoreParams core_from_json(const json& j) {
    CoreParams p;
    p.eta = vector_of(member(j, "eta", "/core"), "/core/eta");
    const json& theta = array(member(j, "theta", "/core"), "/core/theta");
    for (std::size_t i = 0; i < theta.size(); ++i) p.theta.push_back(columns_of(theta[i], "/core/theta/" + std::to_string(i)));
    return p;
}

ParamsDocument parse_params(const std::string& text, const QMatrix* q, const std::string& source) {
    const json root = parse_json(text, source);
    if (!root.is_object()) bad("/", "expected a JSON object");
    ParamsDocument doc;

    if (root.contains("core")) doc.core = core_from_json(root["core"]);

    if (root.contains("regression")) {
        const json& r = root["regression"];
        RegressionParams reg;
        reg.beta = rows_of(member(r, "beta", "/regression"), "/regression/beta");
        const bool has_gamma = r.contains("gamma");
        if (has_gamma == root.contains("gdina")) bad("/regression", "give exactly one of 'gamma' or top-level 'gdina'");
        if (has_gamma) {
            const json& g = array(r["gamma"], "/regression/gamma");
            for (std::size_t j = 0; j < g.size(); ++j) reg.gamma.push_back(columns_of(g[j], "/regression/gamma/" + std::to_string(j)));
        } else {
            if (!q) bad("/gdina", "G-DINA effects need a Q-matrix");
            doc.gdina = gdina_from_json(root["gdina"], *q);
            doc.gdina->validate(*q);
            std::vector<int> levels;
            for (const auto& m : doc.gdina->coeffs) levels.push_back(static_cast<int>(m.rows()) + 1);
            reg.gamma = gdina_to_gamma(*doc.gdina, *q, levels);
        }
        if (r.contains("lambda")) {
            const json& l = array(r["lambda"], "/regression/lambda");
            for (std::size_t j = 0; j < l.size(); ++j) {
                const std::string path = "/regression/lambda/" + std::to_string(j);
                MatrixXd m = columns_of(l[j], path);
                reg.lambda.push_back(std::move(m));
            }
        } else {
            for (const auto& g : reg.gamma) reg.lambda.emplace_back(0, g.rows());
        }
        doc.regression = std::move(reg);
    }
    if (!doc.core && !doc.regression) bad("/", "expected 'core' or 'regression' parameters");

    if (root.contains("design")) {
        const json& d = root["design"];
        CovariateDesign des;
        des.x = rows_of(member(d, "X", "/design"), "/design/X");
        const json& z = array(member(d, "Z", "/design"), "/design/Z");
        const Eigen::Index qdim = doc.regression ? doc.regression->q() : 0;
        for (std::size_t j = 0; j < z.size(); ++j) des.z.push_back(rows_of(z[j], "/design/Z/" + std::to_string(j), qdim));
        doc.design = std::move(des);
    }

    if (root.contains("spec")) {
        const json& s = root["spec"];
        doc.spec.n_items = integer(member(s, "n_items", "/spec"), "/spec/n_items");
        const json& lv = array(member(s, "levels", "/spec"), "/spec/levels");
        for (std::size_t i = 0; i < lv.size(); ++i) doc.spec.levels.push_back(integer(lv[i], "/spec/levels/" + std::to_string(i)));
        doc.spec.n_classes = integer(member(s, "n_classes", "/spec"), "/spec/n_classes");
        doc.spec.p = s.contains("p") ? integer(s["p"], "/spec/p") : 0;
        doc.spec.q = s.contains("q") ? integer(s["q"], "/spec/q") : 0;
    } else if (doc.regression) {
        const auto& reg = *doc.regression;
        doc.spec.n_items = reg.n_items();
        for (const auto& g : reg.gamma) doc.spec.levels.push_back(static_cast<int>(g.rows()));
        doc.spec.n_classes = reg.n_classes();
        doc.spec.p = reg.p();
        doc.spec.q = reg.q();
    } else {
        doc.spec.n_items = doc.core->n_items();
        doc.spec.levels = doc.core->levels();
        doc.spec.n_classes = doc.core->n_classes();
    }
    doc.spec.validate();
    if (doc.regression) doc.regression->validate(doc.spec);
    if (doc.core) doc.core->validate(doc.spec);
    if (doc.design) doc.design->validate(doc.spec);
    return doc;
}

ParamsDocument load_params(const std::string& path, const QMatrix* q) { return parse_params(read_file(path), q, path); }

json params_to_json(const ParamsDocument& doc) {
    json out;
    out["spec"] = {{"n_items", doc.spec.n_items},
                   {"levels", doc.spec.levels},
                   {"n_classes", doc.spec.n_classes},
                   {"p", doc.spec.p},
                   {"q", doc.spec.q}};
    if (doc.core) out["core"] = core_to_json(*doc.core);
    if (doc.regression) {
        const auto& reg = *doc.regression;
        json r;
        r["beta"] = rows_json(reg.beta);
        if (doc.gdina) {
            out["gdina"] = gdina_to_json(*doc.gdina);
        } else {
            json g = json::array();
            for (const auto& m : reg.gamma) g.push_back(columns_json(m));
            r["gamma"] = std::move(g);
        }
        json l = json::array();
        for (const auto& m : reg.lambda) l.push_back(columns_json(m));
        r["lambda"] = std::move(l);
        out["regression"] = std::move(r);
    }
    if (doc.design) {
        json z = json::array();
        for (const auto& m : doc.design->z) z.push_back(rows_json(m));
        out["design"] = {{"X", rows_json(doc.design->x)}, {"Z", std::move(z)}};
    }
    return out;
}

void save_params(const ParamsDocument& doc, const std::string& path) {
    write_file(path, dump_canonical(params_to_json(doc)) + "\n");
}

SimConfig parse_sim_config(const std::string& text, const std::string& source) {
    const json root = parse_json(text, source);
    auto fail = [&](const std::string& what) -> void { throw InvalidInput("config: " + what); };
    if (!root.is_object()) fail("expected a JSON object");
    SimConfig cfg;
    if (!root.contains("n") || !root["n"].is_number_integer()) fail("'n' must be an integer");
    cfg.n_subjects = root["n"].get<int>();
    if (root.contains("seed")) {
        if (!root["seed"].is_number_unsigned()) fail("'seed' must be a non-negative integer");
        cfg.seed = root["seed"].get<std::uint64_t>();
    }
    auto gens = [&](const char* key) {
        std::vector<CovariateGenerator> out;
        if (!root.contains(key)) return out;
        if (!root[key].is_array()) fail(std::string("'") + key + "' must be an array");
        for (const auto& g : root[key]) {
            if (!g.is_object() || !g.contains("type") || !g["type"].is_string()) fail("generator needs a 'type'");
            CovariateGenerator cg;
            const auto type = g["type"].get<std::string>();
            auto num = [&](const char* k, double dflt) {
                if (!g.contains(k)) return dflt;
                if (!g[k].is_number()) fail(std::string("generator field '") + k + "' must be a number");
                return g[k].get<double>();
            };
            if (type == "bernoulli") {
                cg.kind = CovariateGenerator::Kind::Bernoulli;
                cg.a = num("p", 0.5);
            } else if (type == "uniform") {
                cg.kind = CovariateGenerator::Kind::Uniform;
                cg.a = num("a", 0.0);
                cg.b = num("b", 1.0);
            } else if (type == "constant") {
                cg.kind = CovariateGenerator::Kind::Constant;
                cg.a = num("value", 0.0);
            } else if (type == "x_column") {
                cg.kind = CovariateGenerator::Kind::XColumn;
                cg.column = static_cast<int>(num("column", 1));
            } else {
                fail("unknown generator type '" + type + "'");
            }
            out.push_back(cg);
        }
        return out;
    };
    cfg.x = gens("x");
    cfg.z = gens("z");
    if (root.contains("z_per_item")) {
        if (!root["z_per_item"].is_boolean()) fail("'z_per_item' must be a boolean");
        cfg.z_per_item = root["z_per_item"].get<bool>();
    }
    return cfg;
}

std::string format_dataset(const Dataset& d) {
    std::ostringstream os;
    const auto n = d.responses.rows();
    const auto n_items = d.responses.cols();
    const auto p = d.design.x.cols() - 1;
    os << "subject";
    for (Eigen::Index k = 1; k <= p; ++k) os << ",x" << k;
    for (std::size_t j = 0; j < d.design.z.size(); ++j) {
        for (Eigen::Index t = 0; t < d.design.z[j].cols(); ++t) os << ",z" << j + 1 << "_" << t + 1;
    }
    os << ",latent";
    for (Eigen::Index j = 1; j <= n_items; ++j) os << ",r" << j;
    os << '\n';
    for (Eigen::Index i = 0; i < n; ++i) {
        os << i;
        for (Eigen::Index k = 1; k <= p; ++k) os << ',' << format_double(d.design.x(i, k));
        for (const auto& z : d.design.z) {
            for (Eigen::Index t = 0; t < z.cols(); ++t) os << ',' << format_double(z(i, t));
        }
        os << ',' << (d.latent.empty() ? -1 : d.latent[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < n_items; ++j) os << ',' << d.responses(i, j);
        os << '\n';
    }
    return os.str();
}

void save_dataset(const Dataset& d, const std::string& path) { write_file(path, format_dataset(d)); }

// ---------------------------------------------------------------------------
// Canonical JSON

namespace {

bool scalar(const json& j) { return !j.is_array() && !j.is_object(); }

void dump(const json& j, int indent, int depth, std::string& out) {
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
    switch (j.type()) {
    case json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (const auto& [key, val] : j.items()) {
            if (!first) out += ",\n";
            first = false;
            out += pad + json(key).dump() + ": ";
            dump(val, indent, depth + 1, out);
        }
        out += "\n" + close_pad + "}";
        return;
    }
    case json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        const bool flat = std::all_of(j.begin(), j.end(), scalar);
        if (flat) {
            out += "[";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ", ";
                dump(j[i], indent, depth + 1, out);
            }
            out += "]";
            return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) out += ",\n";
            out += pad;
            dump(j[i], indent, depth + 1, out);
        }
        out += "\n" + close_pad + "]";
        return;
    }
    case json::value_t::number_float: {
        const double x = j.get<double>();
        out += std::isfinite(x) ? format_double(x) : "null";
        return;
    }
    default: out += j.dump(); return;
    }
}

} // namespace

std::string dump_canonical(const json& j, int indent) {
    std::string out;
    dump(j, indent, 0, out);
    return out;
}

void save_report(const IdentifiabilityReport& report, const std::string& path) {
    write_file(path, dump_canonical(report.to_json()) + "\n");
}

json counterexample_to_json(const CounterexamplePair& pair, double max_deviation) {
    json slices = json::array();
    for (const auto& [c0, j] : pair.slices) slices.push_back({{"class", c0}, {"item", j}});
    return {{"E", pair.E},
            {"halvings", pair.halvings},
            {"lone_attribute", pair.lone_attribute},
            {"lone_item", pair.lone_item},
            {"mode", pair.mode},
            {"slices", std::move(slices)},
            {"original", core_to_json(pair.original)},
            {"perturbed", core_to_json(pair.perturbed)},
            {"max_deviation", max_deviation},
            {"parameter_distance", parameter_distance(pair.original, pair.perturbed)}};
}

} // namespace lcmid
