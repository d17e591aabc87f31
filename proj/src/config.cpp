#include "beamlab/config.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "beamlab/cylinder.hpp"
#include "beamlab/errors.hpp"

namespace beamlab {

namespace {

const char* kSphereOdd =
    "(2*x1/(1 + x1^2 + x2^2)) * max(0, 1 - ((x1^2 + x2^2 - 1)/(1 + x1^2 + x2^2))^2 / 0.36)^8";

std::vector<ConfigKey> build_schema() {
    using K = KeyKind;
    return {
        {"manifold", "kind", K::Enum, "disk", "chart family", {"disk", "sphere_cap", "conformal_disk"}},
        {"manifold", "radius", K::Number, "1", "chart disk radius (disk, conformal_disk)", {}},
        {"manifold", "cap_r0", K::Number, "2", "stereographic radius of the kept region (sphere_cap)", {}},
        {"manifold", "phi", K::Expr, "0", "log conformal factor in x1, x2 (conformal_disk)", {}},

        {"geodesic", "entry_angle", K::Number, "3.141592653589793", "boundary angle of the entry point", {}},
        {"geodesic", "aim_angle", K::Number, "0", "direction relative to the inward normal", {}},
        {"geodesic", "h_ode", K::Number, "1e-3", "RK4 step", {}},
        {"geodesic", "angle_tol", K::Number, "1e-3", "tangency tolerance in radians", {}},

        {"beam", "order", K::Integer, "7", "construction order N = 2K + 3", {}},
        {"beam", "K", K::Integer, "2", "target decay exponent; requires order >= 2K + 3", {}},
        {"beam", "taus", K::NumberList, "50,100,200,400", "tau sweep for the residual", {}},
        {"beam", "lambdas", K::NumberList, "0,0.5", "lambda values for mass and concentration", {}},
        {"beam", "tau_limit", K::Number, "400", "tau for mass and concentration", {}},
        {"beam", "slope_margin", K::Number, "0.3", "pass when the residual slope is <= -K + margin", {}},
        {"beam", "psi", K::ExprList, "1; x1; x1^2; exp(x2)", "test functions, ';'-separated", {}},
        {"beam", "conc_tol", K::Number, "0.05", "relative concentration tolerance", {}},
        {"beam", "conc_floor", K::Number, "0.1", "tolerance floor: tol * max(|limit|, floor)", {}},
        {"beam", "cross_taus", K::NumberList, "100,200", "tau pair for the cross-term exponent", {}},
        {"beam", "cross_exponent", K::Number, "0.3", "minimum cross-term decay exponent", {}},

        {"xray", "n_entry", K::Integer, "64", "fan entry angles", {}},
        {"xray", "n_aim", K::Integer, "32", "fan aim angles", {}},
        {"xray", "grid_n", K::Integer, "41", "inversion grid nodes per axis", {}},
        {"xray", "reg", K::Number, "1e-4", "Tikhonov weight", {}},
        {"xray", "f", K::Expr, "1 - x1^2 - x2^2", "field for forward-then-invert", {}},
        {"xray", "lambdas", K::NumberList, "-0.02,-0.01,0,0.01,0.02", "attenuation grid", {}},
        {"xray", "err_tol", K::Number, "0.05", "inversion relative L2 tolerance", {}},
        {"xray", "odd_cap_r0", K::Number, "3", "sphere_cap radius for the odd-function test", {}},
        {"xray", "odd_f", K::Expr, kSphereOdd, "antipodally odd field", {}},
        {"xray", "odd_tol", K::Number, "1e-6", "annihilation tolerance per geodesic", {}},

        {"cta", "c", K::Expr, "1", "conformal factor c(x1, x2, x3)", {}},
        {"cta", "n", K::Integer, "3", "dimension of M", {}},
        {"cta", "taus", K::NumberList, "100,200,400", "tau sweep for the pairing", {}},
        {"cta", "lambdas", K::NumberList, "0,0.5", "lambda values for the pairing", {}},
        {"cta", "limit_tol", K::Number, "0.05", "pairing relative tolerance at the largest tau", {}},
        {"cta", "fan_entry", K::Integer, "32", "recovery fan entry angles", {}},
        {"cta", "fan_aim", K::Integer, "16", "recovery fan aim angles", {}},
        {"cta", "grid_n", K::Integer, "41", "recovery grid nodes per axis", {}},
        {"cta", "reg", K::Number, "1e-4", "recovery Tikhonov weight", {}},
        {"cta", "recover_lambdas", K::NumberList, "-0.02,-0.01,0,0.01,0.02", "recovery lambda grid", {}},
        {"cta", "recover_tol", K::Number, "0.07", "recovered qhat(0) relative L2 tolerance", {}},

        {"potentials", "q1", K::Expr, "exp(-x1^2) / sqrt(pi) * (1 - x2^2 - x3^2)", "potential q1(x1, x2, x3)", {}},
        {"potentials", "q2", K::Expr, "0", "potential q2(x1, x2, x3)", {}},
        {"potentials", "x1max", K::Number, "3", "x1 truncation", {}},

        {"cylinder", "m0", K::Enum, "interval", "cross-section", {"interval", "disk"}},
        {"cylinder", "q0", K::Expr, "0", "transversal potential", {}},
        {"cylinder", "n", K::Integer, "512", "interval interior nodes", {}},
        {"cylinder", "disk_nr", K::Integer, "30", "disk radial cells", {}},
        {"cylinder", "disk_ntheta", K::Integer, "24", "disk angular cells", {}},
        {"cylinder", "disk_radius", K::Number, "1", "disk radius", {}},
        {"cylinder", "lmax", K::Integer, "15", "resolved modes", {}},
        {"cylinder", "tmax", K::Number, "20", "distance beyond the cutoff support where radiation is checked", {}},
        {"cylinder", "lambda", K::Number, "1.5", "energy inside the continuous spectrum", {}},
        {"cylinder", "k", K::Number, "2", "frequency along the cylinder", {}},
        {"cylinder", "h", K::NumberList, "1,0", "boundary data: values at x = 0, pi (interval) or (a, b) for a + b cos(theta) (disk)", {}},
        {"cylinder", "R", K::NumberList, "100,200,400", "cutoff radii for the Cesaro average", {}},
        {"cylinder", "m_s", K::Number, "2", "Sobolev order", {}},
        {"cylinder", "mu_w", K::Number, "-1", "weight exponent", {}},
        {"cylinder", "alpha", K::Text, "auto", "cutoff exponent, or auto = 0.4 (-mu_w - 1/2) / m_s", {}},
        {"cylinder", "dn_lambda", K::Number, "-1", "energy below the spectrum for the DN relation", {}},
        {"cylinder", "dn_k", K::NumberList, "0,0.5,1,1.5,2", "k values of the DN grid", {}},
        {"cylinder", "dn_h", K::VectorList, "1,0; 0,1; 1,1; 1,-1; 0.3,-0.7", "boundary data of the DN grid, same convention as h", {}},
        {"cylinder", "dn_tol_shared", K::Number, "1e-10", "direct vs mode expansion tolerance", {}},
        {"cylinder", "dn_tol_oracle", K::Number, "1e-3", "relative tolerance against the truncated cylinder", {}},
        {"cylinder", "oracle_nx", K::Integer, "64", "coarse oracle nodes across the interval", {}},
        {"cylinder", "oracle_T", K::Number, "12", "oracle half-length", {}},
        {"cylinder", "avg_ratio", K::Number, "0.7", "required error ratio between the last two radii", {}},
        {"cylinder", "avg_tol", K::Number, "1e-2", "absolute error at the largest radius", {}},
        {"cylinder", "samples", K::Integer, "40", "continuation samples mu = -1, ..., -samples", {}},
        {"cylinder", "mu_star", K::NumberList, "0.5,2.5", "continuation targets", {}},
        {"cylinder", "cont_tol", K::Number, "1e-3", "continuation relative tolerance", {}},
        {"cylinder", "radiation_tol", K::Number, "1e-6", "outgoing-condition tolerance", {}},

        {"output", "dir", K::Text, ".", "output directory when --out is not given", {}},
        {"output", "timestamp", K::Enum, "off", "timestamp line in CSV headers", {"on", "off"}},
        {"output", "precision", K::Integer, "12", "significant digits in CSV bodies", {}},
    };
}

const ConfigKey* find_key(const std::string& section, const std::string& key) {
    for (const auto& k : config_schema())
        if (k.section == section && k.key == key) return &k;
    return nullptr;
}

bool parse_number(const std::string& s, double& out) {
    const std::string t = boost::trim_copy(s);
    if (t.empty()) return false;
    std::size_t pos = 0;
    try {
        out = std::stod(t, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == t.size() && std::isfinite(out);
}

std::vector<std::string> split(const std::string& s, const char* sep) {
    std::vector<std::string> parts;
    boost::split(parts, s, boost::is_any_of(sep));
    for (auto& p : parts) boost::trim(p);
    return parts;
}

// Empty string when valid, else the problem.
std::string validate(const ConfigKey& k, const std::string& v) {
    const std::string where = "[" + k.section + "] " + k.key + " = '" + v + "': ";
    double x = 0;
    switch (k.kind) {
        case KeyKind::Number:
            return parse_number(v, x) ? "" : where + "not a number";
        case KeyKind::Integer:
            return parse_number(v, x) && x == std::floor(x) ? "" : where + "not an integer";
        case KeyKind::Expr:
            try {
                Expression::parse(v);
                return "";
            } catch (const ConfigError& e) {
                return where + e.what();
            }
        case KeyKind::ExprList:
            for (const auto& p : split(v, ";")) try {
                    Expression::parse(p);
                } catch (const ConfigError& e) {
                    return where + e.what();
                }
            return "";
        case KeyKind::NumberList:
            for (const auto& p : split(v, ","))
                if (!parse_number(p, x)) return where + "'" + p + "' is not a number";
            return "";
        case KeyKind::VectorList:
            for (const auto& vec : split(v, ";"))
                for (const auto& p : split(vec, ","))
                    if (!parse_number(p, x)) return where + "'" + p + "' is not a number";
            return "";
        case KeyKind::Enum:
            for (const auto& a : k.allowed)
                if (a == v) return "";
            return where + "expected one of " + boost::join(k.allowed, ", ");
        case KeyKind::Text:
            return "";
    }
    return "";
}

// Cross-key constraints.
void check_constraints(const RunConfig& c, std::vector<std::string>& errors) {
    try {
        const double m_s = c.number("cylinder", "m_s"), mu_w = c.number("cylinder", "mu_w");
        CutoffFamily::check_constraint(m_s, cylinder_alpha(c), mu_w);
    } catch (const ConfigError& e) {
        errors.push_back(std::string("[cylinder] ") + e.what());
    }
    auto positive = [&](const char* s, const char* k) {
        try {
            if (!(c.number(s, k) > 0)) errors.push_back(std::string("[") + s + "] " + k + " must be positive");
        } catch (const ConfigError&) {
        }
    };
    for (auto [s, k] : {std::pair{"manifold", "radius"}, {"manifold", "cap_r0"}, {"geodesic", "h_ode"},
                        {"xray", "reg"}, {"cta", "reg"}, {"potentials", "x1max"}, {"cylinder", "tmax"}})
        positive(s, k);
    try {
        if (c.integer("beam", "order") < 2 * c.integer("beam", "K") + 3)
            errors.push_back("[beam] order must satisfy N >= 2K + 3");
    } catch (const ConfigError&) {
    }
    for (auto [s, k] : {std::pair{"beam", "order"}, {"xray", "n_entry"}, {"xray", "n_aim"}, {"xray", "grid_n"},
                        {"cylinder", "n"}, {"cylinder", "lmax"}, {"cylinder", "samples"}, {"output", "precision"}})
        positive(s, k);
}

}  // namespace

const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> s = build_schema();
    return s;
}

const std::string& RunConfig::raw(const std::string& section, const std::string& key) const {
    const auto s = values_.find(section);
    if (s != values_.end()) {
        const auto k = s->second.find(key);
        if (k != s->second.end()) return k->second;
    }
    throw ConfigError("no such key [" + section + "] " + key);
}

std::string RunConfig::text(const std::string& section, const std::string& key) const { return raw(section, key); }

double RunConfig::number(const std::string& section, const std::string& key) const {
    double x = 0;
    if (!parse_number(raw(section, key), x)) throw ConfigError("[" + section + "] " + key + " is not a number");
    return x;
}

int RunConfig::integer(const std::string& section, const std::string& key) const {
    return static_cast<int>(std::lround(number(section, key)));
}

Expression RunConfig::expr(const std::string& section, const std::string& key) const {
    return Expression::parse(raw(section, key));
}

std::vector<std::string> RunConfig::items(const std::string& section, const std::string& key) const {
    return split(raw(section, key), ";");
}

std::vector<Expression> RunConfig::exprs(const std::string& section, const std::string& key) const {
    std::vector<Expression> out;
    for (const auto& p : items(section, key)) out.push_back(Expression::parse(p));
    return out;
}

std::vector<double> RunConfig::numbers(const std::string& section, const std::string& key) const {
    std::vector<double> out;
    for (const auto& p : split(raw(section, key), ",")) {
        double x = 0;
        if (!parse_number(p, x)) throw ConfigError("[" + section + "] " + key + ": '" + p + "' is not a number");
        out.push_back(x);
    }
    return out;
}

std::vector<std::vector<double>> RunConfig::vectors(const std::string& section, const std::string& key) const {
    std::vector<std::vector<double>> out;
    for (const auto& vec : split(raw(section, key), ";")) {
        out.emplace_back();
        for (const auto& p : split(vec, ",")) {
            double x = 0;
            if (!parse_number(p, x)) throw ConfigError("[" + section + "] " + key + ": '" + p + "' is not a number");
            out.back().push_back(x);
        }
    }
    return out;
}

bool RunConfig::is_default(const std::string& section, const std::string& key) const {
    const auto s = explicit_.find(section);
    return s == explicit_.end() || !s->second.count(key);
}

void RunConfig::set(const std::string& section, const std::string& key, const std::string& value) {
    const ConfigKey* k = find_key(section, key);
    if (!k) throw ConfigError("unknown key [" + section + "] " + key);
    const std::string err = validate(*k, value);
    if (!err.empty()) throw ConfigError(err);
    values_[section][key] = value;
    explicit_[section][key] = true;
    std::vector<std::string> errors;
    check_constraints(*this, errors);
    if (!errors.empty()) throw ConfigError("configuration constraint violated", errors);
}

std::string RunConfig::echo() const {
    std::string out, section;
    for (const auto& k : config_schema()) {
        if (k.section != section) {
            if (!section.empty()) out += "\n";
            section = k.section;
            out += "[" + section + "]\n";
        }
        out += k.key + " = " + raw(k.section, k.key) + "\n";
    }
    return out;
}

RunConfig default_config() {
    RunConfig c;
    for (const auto& k : config_schema()) c.values_[k.section][k.key] = k.default_value;
    return c;
}

RunConfig parse_config(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("run file syntax: " + std::string(e.what()));
    }
    RunConfig c = default_config();
    std::vector<std::string> errors;
    std::vector<std::string> sections;
    for (const auto& k : config_schema())
        if (sections.empty() || sections.back() != k.section) sections.push_back(k.section);
    for (const auto& [sname, sec] : tree) {
        if (sec.empty() && !sec.data().empty()) {
            errors.push_back("key '" + sname + "' outside any section");
            continue;
        }
        if (std::find(sections.begin(), sections.end(), sname) == sections.end()) {
            errors.push_back("unknown section [" + sname + "]; valid sections: " + boost::join(sections, ", "));
            continue;
        }
        for (const auto& [kname, node] : sec) {
            const ConfigKey* k = find_key(sname, kname);
            if (!k) {
                std::vector<std::string> valid;
                for (const auto& s : config_schema())
                    if (s.section == sname) valid.push_back(s.key);
                errors.push_back("unknown key [" + sname + "] " + kname + "; valid keys: " + boost::join(valid, ", "));
                continue;
            }
            const std::string v = boost::trim_copy(node.data());
            const std::string err = validate(*k, v);
            if (!err.empty()) {
                errors.push_back(err);
                continue;
            }
            c.values_[sname][kname] = v;
            c.explicit_[sname][kname] = true;
        }
    }
    check_constraints(c, errors);
    if (!errors.empty()) throw ConfigError("invalid run file", errors);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read run file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

double cylinder_alpha(const RunConfig& cfg) {
    const std::string a = boost::trim_copy(cfg.text("cylinder", "alpha"));
    if (a == "auto") return CutoffFamily::default_alpha(cfg.number("cylinder", "m_s"), cfg.number("cylinder", "mu_w"));
    double x = 0;
    if (!parse_number(a, x)) throw ConfigError("[cylinder] alpha = '" + a + "': expected a number or auto");
    return x;
}

}  // namespace beamlab
