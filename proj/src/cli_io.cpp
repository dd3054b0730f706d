#include "qgain/cli_io.hpp"

#include "qgain/cache.hpp"
#include "qgain/error.hpp"
#include "qgain/format.hpp"
#include "qgain/parallel.hpp"
#include "qgain/svg.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace qgain {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class Kind { integer, number, boolean, string, int_list, number_list, string_list, opt_number, opt_bool };

struct Field {
    std::string name;
    Kind kind;
    json def;              // null with required = true means the key must be given
    bool required = false;
};

const char* kind_name(Kind k) {
    switch (k) {
    case Kind::integer: return "an integer";
    case Kind::number: return "a number";
    case Kind::boolean: return "a boolean";
    case Kind::string: return "a string";
    case Kind::int_list: return "a list of integers";
    case Kind::number_list: return "a list of numbers";
    case Kind::string_list: return "a list of strings";
    case Kind::opt_number: return "a number or null";
    case Kind::opt_bool: return "a boolean or null";
    }
    return "?";
}

std::vector<Field> common_fields() {
    return {{"command", Kind::string, json(), true},
            {"seed", Kind::integer, 1},
            {"out", Kind::string, "."},
            {"cache_dir", Kind::string, ""},
            {"cache", Kind::boolean, true},
            {"workers", Kind::integer, 1}};
}

std::vector<Field> model_fields() {
    return {{"spectrum", Kind::string, "sphere"},
            {"n", Kind::integer, 10},
            {"lambda", Kind::integer, 10},
            {"scheme", Kind::string, "optimal"},
            {"mu", Kind::integer, 0},
            {"c_m", Kind::number, 1.0},
            {"sigma_bar", Kind::opt_number, json()},
            {"multiplier", Kind::number, 1.0},
            {"e2", Kind::opt_bool, json()},
            {"samples", Kind::integer, 0}};
}

const std::map<std::string, std::vector<Field>>& schema() {
    static const std::map<std::string, std::vector<Field>> s = [] {
        std::map<std::string, std::vector<Field>> m;
        m["moments"] = {{"lambda", Kind::integer, json(), true},
                        {"method", Kind::string, "quadrature"},
                        {"e2", Kind::boolean, false},
                        {"samples", Kind::integer, 0}};
        m["weights"] = {{"lambda", Kind::integer, 0},
                        {"scheme", Kind::string, "optimal"},
                        {"mu", Kind::integer, 0},
                        {"values", Kind::number_list, json::array()},
                        {"lipschitz", Kind::string, "auto"},
                        {"grid_points", Kind::integer, 2000}};
        m["theory"] = model_fields();
        for (Field f : std::vector<Field>{{"e_Ae", Kind::opt_number, json()},
                                          {"random_mean", Kind::boolean, false},
                                          {"lipschitz", Kind::string, "auto"},
                                          {"grid_points", Kind::integer, 2000},
                                          {"lambda_exact", Kind::integer, 200}}) {
            m["theory"].push_back(f);
        }
        m["simulate"] = model_fields();
        for (Field f : std::vector<Field>{{"T", Kind::integer, 10000},
                                          {"record_every", Kind::integer, 1},
                                          {"rescale", Kind::boolean, true}}) {
            m["simulate"].push_back(f);
        }
        m["figure"] = {{"name", Kind::string, json(), true},
                       {"lmax", Kind::integer, 10000},
                       {"lambdas", Kind::int_list, json::array()},
                       {"ns", Kind::int_list, json::array()},
                       {"full", Kind::boolean, false},
                       {"spectra", Kind::string_list, json::array()},
                       {"schemes", Kind::string_list, json::array()},
                       {"c_m_values", Kind::number_list, json::array()},
                       {"multipliers", Kind::number_list, json::array()},
                       {"T", Kind::integer, 10000},
                       {"replicates", Kind::integer, 11},
                       {"budget", Kind::number, 1e11},
                       {"live_e_Ae", Kind::boolean, false},
                       {"lambda", Kind::integer, 10},
                       {"scheme", Kind::string, "optimal"},
                       {"lambda_exact", Kind::integer, 200},
                       {"svg", Kind::boolean, false}};
        m["bound-check"] = {{"n", Kind::integer, 10},
                            {"lambda", Kind::integer, 4},
                            {"spectra", Kind::string_list, json::array({"sphere", "cigar:100"})},
                            {"scheme", Kind::string, "optimal"},
                            {"c_m_values", Kind::number_list, json::array({1.0, 10.0, 100.0})},
                            {"multipliers", Kind::number_list, json::array({0.25, 0.5, 1.0, 2.0})},
                            {"reps", Kind::integer, 100000},
                            {"grid_points", Kind::integer, 2000}};
        return m;
    }();
    return s;
}

bool integral(const json& v) {
    if (v.is_number_integer()) return true;
    if (!v.is_number_float()) return false;
    const double d = v.get<double>();
    return std::isfinite(d) && std::floor(d) == d && std::abs(d) < 9.0e15;
}

json check_kind(const std::string& name, Kind kind, const json& v) {
    auto fail = [&] { throw ValidationError("field '" + name + "': expected " + kind_name(kind)); };
    switch (kind) {
    case Kind::integer:
        if (!integral(v)) fail();
        return v.is_number_unsigned() ? json(v.get<std::uint64_t>()) : json(static_cast<std::int64_t>(v.get<double>()));
    case Kind::number:
        if (!v.is_number()) fail();
        return v.get<double>();
    case Kind::boolean:
        if (!v.is_boolean()) fail();
        return v;
    case Kind::string:
        if (!v.is_string()) fail();
        return v;
    case Kind::opt_number:
        if (v.is_null()) return v;
        if (!v.is_number()) fail();
        return v.get<double>();
    case Kind::opt_bool:
        if (!v.is_null() && !v.is_boolean()) fail();
        return v;
    case Kind::int_list:
    case Kind::number_list:
    case Kind::string_list: {
        if (!v.is_array()) fail();
        json out = json::array();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const json& e = v[i];
            const std::string ename = name + "[" + std::to_string(i) + "]";
            if (kind == Kind::int_list) {
                if (!integral(e)) throw ValidationError("field '" + ename + "': expected an integer");
                out.push_back(static_cast<std::int64_t>(e.get<double>()));
            } else if (kind == Kind::number_list) {
                if (!e.is_number()) throw ValidationError("field '" + ename + "': expected a number");
                out.push_back(e.get<double>());
            } else {
                if (!e.is_string()) throw ValidationError("field '" + ename + "': expected a string");
                out.push_back(e);
            }
        }
        return out;
    }
    }
    return v;
}

int as_int(const json& p, const char* key) { return static_cast<int>(p.at(key).get<std::int64_t>()); }
double as_num(const json& p, const char* key) { return p.at(key).get<double>(); }

void positive(const json& p, const char* key, bool allow_zero = false) {
    const double v = p.at(key).get<double>();
    if (allow_zero ? v < 0.0 : v <= 0.0) {
        throw ValidationError(std::string("field '") + key + "': must be " + (allow_zero ? "nonnegative" : "positive"));
    }
}

void check_scheme_name(const std::string& s, bool allow_custom) {
    static const std::set<std::string> names{"optimal", "optimal_positive", "cma_log", "truncation"};
    if (names.count(s) || (allow_custom && s == "custom")) return;
    if (s.rfind("truncation_", 0) == 0) {
        scheme_from_string(s);
        return;
    }
    throw ValidationError("field 'scheme': unknown weight scheme '" + s + "'");
}

json list_or(const json& v, json fallback) { return v.empty() ? std::move(fallback) : v; }

void validate_command(const std::string& cmd, json& p) {
    if (cmd == "moments") {
        if (as_int(p, "lambda") < 1) throw ValidationError("field 'lambda': must be at least 1");
        const MomentMethod m = moment_method_from_string(p["method"].get<std::string>());
        p["method"] = to_string(m);
        if (m == MomentMethod::monte_carlo && !p["e2"].get<bool>()) {
            throw ValidationError("field 'e2': the monte_carlo method estimates e1 and e2 together and needs e2=true");
        }
        positive(p, "samples", true);
        if (as_int(p, "samples") > 0 && as_int(p, "samples") < 10000) {
            throw ValidationError("field 'samples': at least 10000 samples are required");
        }
    } else if (cmd == "weights") {
        const std::string scheme = p["scheme"];
        check_scheme_name(scheme, true);
        if (scheme == "custom") {
            if (p["values"].empty()) throw ValidationError("field 'values': custom weights need values");
            if (as_int(p, "lambda") == 0) p["lambda"] = p["values"].size();
            if (as_int(p, "lambda") != static_cast<int>(p["values"].size())) {
                throw ValidationError("field 'lambda': does not match the number of values");
            }
        } else if (as_int(p, "lambda") < 1) {
            throw ValidationError("field 'lambda': must be at least 1");
        }
        if (as_int(p, "mu") < 0 || as_int(p, "mu") > as_int(p, "lambda")) {
            throw ValidationError("field 'mu': must lie in [0, lambda]");
        }
        const std::string lip = p["lipschitz"];
        if (lip != "auto" && lip != "grid" && lip != "analytic" && lip != "none") {
            throw ValidationError("field 'lipschitz': expected auto, grid, analytic or none");
        }
        if (as_int(p, "grid_points") < 1000) throw ValidationError("field 'grid_points': must be at least 1000");
    } else if (cmd == "theory" || cmd == "simulate") {
        spectrum_spec_from_string(p["spectrum"]);
        if (as_int(p, "n") < 1) throw ValidationError("field 'n': must be at least 1");
        if (as_int(p, "lambda") < 1) throw ValidationError("field 'lambda': must be at least 1");
        check_scheme_name(p["scheme"], false);
        if (as_int(p, "mu") < 0 || as_int(p, "mu") > as_int(p, "lambda")) {
            throw ValidationError("field 'mu': must lie in [0, lambda]");
        }
        positive(p, "c_m");
        positive(p, "multiplier");
        if (!p["sigma_bar"].is_null()) positive(p, "sigma_bar");
        positive(p, "samples", true);
        if (cmd == "theory") {
            if (!p["e_Ae"].is_null() && (as_num(p, "e_Ae") < 0.0 || as_num(p, "e_Ae") > 1.0)) {
                throw ValidationError("field 'e_Ae': must lie in [0, 1]");
            }
            const std::string lip = p["lipschitz"];
            if (lip != "auto" && lip != "grid" && lip != "analytic") {
                throw ValidationError("field 'lipschitz': expected auto, grid or analytic");
            }
            if (as_int(p, "grid_points") < 1000) throw ValidationError("field 'grid_points': must be at least 1000");
        } else {
            if (as_int(p, "T") < 0) throw ValidationError("field 'T': must be nonnegative");
            if (as_int(p, "record_every") < 0) throw ValidationError("field 'record_every': must be nonnegative");
        }
    } else if (cmd == "figure") {
        const std::string name = p["name"];
        if (name != "fig1" && name != "fig2" && name != "fig5_6") {
            throw ValidationError("field 'name': expected fig1, fig2 or fig5_6");
        }
        if (as_int(p, "lmax") < 2) throw ValidationError("field 'lmax': must be at least 2");
        for (const auto& v : p["lambdas"]) {
            if (v.get<std::int64_t>() < 1) throw ValidationError("field 'lambdas': entries must be at least 1");
        }
        for (const auto& v : p["ns"]) {
            if (v.get<std::int64_t>() < 1) throw ValidationError("field 'ns': entries must be at least 1");
        }
        for (const auto& s : p["schemes"]) check_scheme_name(s, false);
        check_scheme_name(p["scheme"], false);
        for (const auto& s : p["spectra"]) spectrum_spec_from_string(s);
        for (const auto& v : p["c_m_values"]) {
            if (v.get<double>() <= 0.0) throw ValidationError("field 'c_m_values': entries must be positive");
        }
        for (const auto& v : p["multipliers"]) {
            if (v.get<double>() <= 0.0) throw ValidationError("field 'multipliers': entries must be positive");
        }
        if (as_int(p, "T") < 2 || as_int(p, "T") % 2 != 0) throw ValidationError("field 'T': must be even and at least 2");
        if (as_int(p, "replicates") < 1) throw ValidationError("field 'replicates': must be at least 1");
        positive(p, "budget");

        json grid = json::array();
        for (int l : lambda_grid(as_int(p, "lmax"))) grid.push_back(l);
        if (name == "fig1") {
            p["lambdas"] = list_or(p["lambdas"], grid);
            p["schemes"] = list_or(p["schemes"], {"optimal", "cma_log", "truncation_4", "truncation_10"});
        } else if (name == "fig2") {
            p["lambdas"] = list_or(p["lambdas"], grid);
            p["ns"] = list_or(p["ns"], {10, 100, 1000, 10000});
            p["schemes"] = list_or(p["schemes"], {"optimal"});
        } else {
            const bool full = p["full"];
            p["ns"] = list_or(p["ns"], full ? json{10, 100, 1000} : json{10, 100});
            p["spectra"] = list_or(p["spectra"], {"sphere", "discus:1e6", "ellipsoid:1e6", "cigar:1e6"});
            p["c_m_values"] = list_or(p["c_m_values"], {1.0, 10.0});
            p["multipliers"] = list_or(p["multipliers"], {0.0625, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0});
            if (as_int(p, "lambda") < 2) throw ValidationError("field 'lambda': must be at least 2");
        }
    } else if (cmd == "bound-check") {
        if (as_int(p, "n") < 2) throw ValidationError("field 'n': must be at least 2");
        if (as_int(p, "lambda") < 2) throw ValidationError("field 'lambda': must be at least 2");
        check_scheme_name(p["scheme"], false);
        if (p["spectra"].empty()) throw ValidationError("field 'spectra': must not be empty");
        for (const auto& s : p["spectra"]) spectrum_spec_from_string(s);
        if (p["c_m_values"].empty()) throw ValidationError("field 'c_m_values': must not be empty");
        if (p["multipliers"].empty()) throw ValidationError("field 'multipliers': must not be empty");
        for (const auto& v : p["c_m_values"]) {
            if (v.get<double>() <= 0.0) throw ValidationError("field 'c_m_values': entries must be positive");
        }
        for (const auto& v : p["multipliers"]) {
            if (v.get<double>() <= 0.0) throw ValidationError("field 'multipliers': entries must be positive");
        }
        if (as_int(p, "reps") < 1000) throw ValidationError("field 'reps': must be at least 1000");
        if (as_int(p, "grid_points") < 1000) throw ValidationError("field 'grid_points': must be at least 1000");
    }
}

template <class T>
std::vector<T> vec(const json& a) {
    std::vector<T> out;
    for (const auto& v : a) out.push_back(v.get<T>());
    return out;
}

SchemeSpec scheme_spec(const std::string& s) {
    if (s == "truncation") return SchemeSpec{WeightScheme::truncation, 4.0};
    return scheme_from_string(s);
}

std::string csv_bool(bool b) { return b ? "1" : "0"; }

// Weights for weights/theory/simulate. Truncation uses an explicit μ when given.
WeightVector config_weights(const json& p, const Eigen::VectorXd& e1) {
    const std::string s = p["scheme"];
    const int lambda = static_cast<int>(e1.size());
    const int mu = as_int(p, "mu");
    if (s == "truncation" || (s.rfind("truncation_", 0) == 0 && mu > 0)) {
        const int m = mu > 0 ? mu : std::max(1, lambda / 4);
        return make_truncation(lambda, m);
    }
    const auto w = scheme_spec(s).make(e1);
    if (!w) throw ValidationError("weight scheme '" + s + "' is undefined at lambda=" + std::to_string(lambda));
    return *w;
}

json lipschitz_json(const LipschitzConstants& l) {
    return {{"l1", l.l1},
            {"l2", l.l2},
            {"l3", l.l3},
            {"method", l.method == LipschitzMethod::grid_supremum ? "grid_supremum" : "analytic_bound"}};
}

struct Context {
    const RunConfig& cfg;
    std::ostream& log;
    std::vector<fs::path> written;

    MomentTable table(int lambda, bool e2, MomentMethod method, std::int64_t samples) const {
        TableRequest req;
        req.lambda = lambda;
        req.method = method;
        req.with_e2 = e2;
        req.samples = samples;
        req.seed = cfg.seed;
        req.workers = cfg.workers;
        if (!cfg.use_cache) return build_table(req);
        bool hit = false;
        MomentTable t = MomentCache(cfg.cache_dir).get(req, &hit);
        log << (hit ? "cache hit: " : "cache store: ") << MomentCache(cfg.cache_dir).path_for(req).string() << "\n";
        return t;
    }

    MomentProvider provider() const {
        return [this](int lambda, bool e2) { return table(lambda, e2, figure_method(lambda), 0); };
    }

    void write(const std::string& name, const std::string& content) {
        const fs::path path = cfg.out_dir / name;
        write_file_atomic(path, content);
        written.push_back(path);
        log << "wrote " << path.string() << "\n";
    }

    json effective() const { return cfg.effective; }
};

void run_moments(Context& c) {
    const json& p = c.cfg.effective;
    const int lambda = as_int(p, "lambda");
    const MomentMethod method = moment_method_from_string(p["method"]);
    const MomentTable t = c.table(lambda, p["e2"].get<bool>(), method, as_int(p, "samples"));
    const std::string stem = "moments_l" + std::to_string(lambda) + "_" + to_string(method);
    c.write(stem + ".csv", config_header(p) + moment_table_to_csv(t));
    if (!c.cfg.use_cache) c.write(cache_filename(t), encode_moment_table(t));
    c.log << "lambda=" << lambda << " sum(e1)=" << format_double(t.e1.sum());
    if (t.e2) c.log << " trace(e2)=" << format_double(t.e2->trace());
    c.log << "\n";
}

LipschitzConstants choose_lipschitz(const std::string& mode, const WeightVector& w, int grid_points) {
    if (mode == "grid" || (mode == "auto" && w.lambda() <= 50)) return lipschitz_grid(w, grid_points);
    return lipschitz_bounds(w);
}

void run_weights(Context& c) {
    const json& p = c.cfg.effective;
    const int lambda = as_int(p, "lambda");
    const std::string scheme = p["scheme"];
    WeightVector w;
    json extra = json::object();
    if (scheme == "custom") {
        const CustomWeights cw = make_custom(vec<double>(p["values"]));
        w = cw.weights;
        extra["resorted"] = cw.resorted;
        extra["renormalized"] = cw.renormalized;
        if (cw.resorted) c.log << "note: custom weights were sorted into nonincreasing order\n";
        if (cw.renormalized) c.log << "note: custom weights were rescaled to unit absolute sum\n";
    } else {
        const bool needs_e1 = scheme == "optimal" || scheme == "optimal_positive";
        Eigen::VectorXd e1 = needs_e1 ? c.table(lambda, false, figure_method(lambda), 0).e1
                                      : Eigen::VectorXd::Zero(lambda);
        w = config_weights(p, e1);
    }
    const std::string stem = "weights_" + to_string(w.scheme) + "_l" + std::to_string(lambda);
    std::string csv = config_header(p) + "k,w\n";
    for (int k = 0; k < w.lambda(); ++k) csv += std::to_string(k + 1) + "," + format_double(w.w[k]) + "\n";
    c.write(stem + ".csv", csv);
    json out = {{"config", p}, {"name", w.name()}, {"lambda", w.lambda()}, {"mu_w", w.mu_w()}, {"mu", w.mu}};
    out.update(extra);
    if (p["lipschitz"] != "none") out["lipschitz"] = lipschitz_json(choose_lipschitz(p["lipschitz"], w, as_int(p, "grid_points")));
    c.write(stem + ".json", out.dump(2) + "\n");
    c.log << w.name() << " mu_w=" << format_double(w.mu_w()) << "\n";
}

QuadraticModel config_model(const json& p) {
    const SpectrumSpec s = spectrum_spec_from_string(p["spectrum"]);
    return QuadraticModel::named(s.type, as_int(p, "n"), s.alpha);
}

bool want_e2(const json& p, int lambda_exact) {
    return p["e2"].is_null() ? as_int(p, "lambda") <= lambda_exact : p["e2"].get<bool>();
}

void run_theory(Context& c) {
    const json& p = c.cfg.effective;
    const QuadraticModel model = config_model(p);
    const int lambda = as_int(p, "lambda");
    const bool e2 = want_e2(p, as_int(p, "lambda_exact"));
    const MomentTable table = c.table(lambda, e2, figure_method(lambda), as_int(p, "samples"));
    const WeightVector w = config_weights(p, table.e1);
    const double tr = model.trace();
    double e = model.dN() / tr;
    std::optional<Eigen::VectorXd> m;
    if (p["random_mean"].get<bool>()) {
        RandomStream rng(c.cfg.seed, {0x4d45414e});
        Eigen::VectorXd v(model.dim());
        rng.fill_normal(v);
        m = v;
        e = normalization_context(model, v).e_Ae;
    }
    if (!p["e_Ae"].is_null()) e = as_num(p, "e_Ae");
    const StepSizeMode mode = e2 ? StepSizeMode::exact : StepSizeMode::large_lambda;
    const double sbs = sigma_bar_star_general(w, table, e, mode);
    const double sb = p["sigma_bar"].is_null() ? as_num(p, "multiplier") * sbs : as_num(p, "sigma_bar");
    const LipschitzConstants lip = choose_lipschitz(p["lipschitz"], w, as_int(p, "grid_points"));
    const double tr2 = model.trace_sq() / (tr * tr), d1 = model.d1() / tr;
    const ErrorBound eb = error_bound({sb, as_num(p, "c_m"), tr2, d1, lambda}, lip);
    json out = {{"config", p},
                {"weights", w.name()},
                {"mu_w", w.mu_w()},
                {"e_Ae", e},
                {"tr_A2_hat", tr2},
                {"d1_hat", d1},
                {"dN_hat", model.dN() / tr},
                {"sigma_bar", sb},
                {"sigma_bar_star", sbs},
                {"step_size_mode", e2 ? "exact" : "large_lambda"},
                {"phi_inf", phi_inf(sb, w, table.e1)},
                {"phi_hat", phi_hat(sb, w, table, e, !e2)},
                {"error_bound", eb.bound},
                {"alpha", eb.alpha},
                {"G", eb.G},
                {"lipschitz", lipschitz_json(lip)}};
    if (m) out["g_m"] = normalization_context(model, *m).g_m;
    if (lambda >= 2) {
        try {
            const OptimalWeightsResult ow = optimal_weights_general(table, e, as_int(p, "lambda_exact"));
            json o = {{"sigma_bar", ow.sigma_bar}, {"optimal_value", ow.optimal_value}, {"solved", ow.solved}};
            if (ow.solved) {
                o["residual"] = ow.residual;
                o["rcond"] = ow.rcond;
            }
            if (!ow.warning.empty()) o["warning"] = ow.warning;
            o["weights"] = std::vector<double>(ow.weights.w.data(), ow.weights.w.data() + ow.weights.w.size());
            out["optimal_weights"] = o;
        } catch (const NumericError& err) {
            out["optimal_weights"] = {{"error", err.what()}};
        }
    }
    c.write("theory.json", out.dump(2) + "\n");
    c.log << "sigma_bar*=" << format_double(sbs) << " phi_hat=" << format_double(out["phi_hat"].get<double>())
          << " bound=" << format_double(eb.bound) << "\n";
}

void run_simulate(Context& c) {
    const json& p = c.cfg.effective;
    const QuadraticModel model = config_model(p);
    const int lambda = as_int(p, "lambda");
    const bool e2 = want_e2(p, 200);
    const bool need_table = p["sigma_bar"].is_null() || p["scheme"] == "optimal" || p["scheme"] == "optimal_positive";
    MomentTable table;
    if (need_table) {
        table = c.table(lambda, e2 && p["sigma_bar"].is_null(), figure_method(lambda), as_int(p, "samples"));
    } else {
        table.lambda = lambda;
        table.e1 = Eigen::VectorXd::Zero(lambda);
    }
    const WeightVector w = config_weights(p, table.e1);
    const double e = model.dN() / model.trace();
    double sb = 0.0;
    if (p["sigma_bar"].is_null()) {
        sb = as_num(p, "multiplier") *
             sigma_bar_star_general(w, table, e, table.e2 ? StepSizeMode::exact : StepSizeMode::large_lambda);
    } else {
        sb = as_num(p, "sigma_bar");
    }
    const std::int64_t T = as_int(p, "T");
    RandomStream init(c.cfg.seed, {0x494e4954});
    Eigen::VectorXd m0(model.dim());
    init.fill_normal(m0);
    EsState state(m0 + model.x_star(), 1.0, as_num(p, "c_m"), derive_seed(c.cfg.seed, {0x52554e53}));
    RunOptions opt;
    opt.record_every = as_int(p, "record_every");
    opt.rescale = p["rescale"];
    const Trajectory traj = run_scale_invariant(state, model, w, sb, T, opt);
    std::string csv = config_header(p) + "t,f,grad_norm,g_m,sigma,log2_scale\n";
    for (const auto& r : traj.records) {
        csv += std::to_string(r.t) + "," + format_double(r.f) + "," + format_double(r.grad_norm) + "," +
               format_double(r.g_m) + "," + format_double(r.sigma) + "," + std::to_string(r.log2_scale) + "\n";
    }
    c.write("trajectory.csv", csv);
    json out = {{"config", p}, {"sigma_bar", sb}, {"steps", traj.steps}, {"truncated", traj.truncated},
                {"weights", w.name()}};
    if (T >= 2 && T % 2 == 0) {
        const EmpiricalRun run = empirical_from_trajectory(traj, T);
        out["empirical_nqg"] = std::isfinite(run.value) ? json(run.value) : json();
        out["steps_used"] = run.steps_used;
        c.log << "empirical normalized quality gain " << format_double(run.value)
              << (run.truncated ? " (truncated run)" : "") << "\n";
    }
    c.write("simulate.json", out.dump(2) + "\n");
}

void run_fig1(Context& c, const json& p) {
    std::vector<SchemeSpec> schemes;
    for (const auto& s : p["schemes"]) schemes.push_back(scheme_spec(s));
    const auto rows = fig1_data(vec<int>(p["lambdas"]), schemes, c.provider());
    std::string csv = config_header(p) + "lambda";
    for (const auto& s : schemes) csv += "," + s.label();
    csv += "\n";
    std::vector<PlotSeries> series(schemes.size());
    for (std::size_t k = 0; k < schemes.size(); ++k) series[k].name = schemes[k].label();
    for (const auto& r : rows) {
        csv += std::to_string(r.lambda);
        for (std::size_t k = 0; k < r.values.size(); ++k) {
            csv += "," + (r.values[k] ? format_double(*r.values[k]) : std::string());
            series[k].x.push_back(r.lambda);
            series[k].y.push_back(r.values[k].value_or(std::nan("")));
        }
        csv += "\n";
    }
    c.write("fig1.csv", csv);
    if (p["svg"].get<bool>()) {
        c.write("fig1.svg", line_plot_svg({"normalized quality gain per candidate", "lambda",
                                           "phi_inf(sigma_bar*) / lambda", true, false},
                                          series));
    }
}

void run_fig2(Context& c, const json& p) {
    std::vector<SchemeSpec> schemes;
    for (const auto& s : p["schemes"]) schemes.push_back(scheme_spec(s));
    const auto rows = fig2_data(vec<int>(p["ns"]), vec<int>(p["lambdas"]), schemes, c.provider(),
                                as_int(p, "lambda_exact"));
    std::string csv = config_header(p) + "n,lambda,scheme,sigma_bar_star,phi_hat,exact\n";
    std::map<std::string, PlotSeries> series;
    std::vector<std::string> order;
    for (const auto& r : rows) {
        csv += std::to_string(r.n) + "," + std::to_string(r.lambda) + "," + r.scheme + "," +
               format_double(r.sigma_bar_star) + "," + format_double(r.phi_hat) + "," + csv_bool(r.exact) + "\n";
        const std::string key = r.scheme + " N=" + std::to_string(r.n);
        if (!series.count(key)) {
            order.push_back(key);
            series[key].name = key;
        }
        series[key].x.push_back(r.lambda);
        series[key].y.push_back(r.sigma_bar_star);
    }
    c.write("fig2.csv", csv);
    if (p["svg"].get<bool>()) {
        std::vector<PlotSeries> s;
        for (const auto& k : order) s.push_back(series[k]);
        c.write("fig2.svg", line_plot_svg({"optimal normalized step-size, sphere", "lambda", "sigma_bar*", true, true}, s));
    }
}

void run_fig56(Context& c, const json& p) {
    Fig56Config cfg;
    for (const auto& s : p["spectra"]) cfg.spectra.push_back(spectrum_spec_from_string(s));
    cfg.ns = vec<int>(p["ns"]);
    cfg.lambda = as_int(p, "lambda");
    cfg.scheme = scheme_spec(p["scheme"]);
    cfg.c_m_values = vec<double>(p["c_m_values"]);
    cfg.multipliers = vec<double>(p["multipliers"]);
    cfg.T = as_int(p, "T");
    cfg.replicates = as_int(p, "replicates");
    cfg.seed = c.cfg.seed;
    cfg.budget = as_num(p, "budget");
    cfg.live_e_Ae = p["live_e_Ae"];
    cfg.workers = c.cfg.workers;
    c.log << "fig5_6: " << format_double(fig56_cost(cfg)) << " work units\n";
    const auto cells = fig56_data(cfg, c.provider());
    std::string csv = config_header(p) +
                      "spectrum,n,c_m,multiplier,sigma_bar,sigma_bar_star,e_Ae,phi_hat,median,q10,q90,truncated\n";
    std::map<std::string, PlotSeries> series;
    std::vector<std::string> order;
    for (const auto& cell : cells) {
        csv += cell.spectrum + "," + std::to_string(cell.n) + "," + format_double(cell.c_m) + "," +
               format_double(cell.multiplier) + "," + format_double(cell.sigma_bar) + "," +
               format_double(cell.sigma_bar_star) + "," + format_double(cell.e_Ae) + "," +
               format_double(cell.phi_hat) + "," + format_double(cell.empirical.median) + "," +
               format_double(cell.empirical.q10) + "," + format_double(cell.empirical.q90) + "," +
               csv_bool(cell.truncated) + "\n";
        const std::string key = cell.spectrum + " N=" + std::to_string(cell.n) + " c_m=" + format_double(cell.c_m);
        if (!series.count(key)) {
            order.push_back(key);
            series[key].name = key;
        }
        series[key].x.push_back(cell.multiplier);
        series[key].y.push_back(cell.empirical.median);
    }
    c.write("fig5_6.csv", csv);
    if (p["svg"].get<bool>()) {
        std::vector<PlotSeries> s;
        for (const auto& k : order) s.push_back(series[k]);
        c.write("fig5_6.svg", line_plot_svg({"empirical normalized quality gain (median)", "sigma_bar / sigma_bar*",
                                             "normalized quality gain", true, false},
                                            s));
    }
}

void run_figure(Context& c) {
    const json& p = c.cfg.effective;
    const std::string name = p["name"];
    if (name == "fig1") run_fig1(c, p);
    else if (name == "fig2") run_fig2(c, p);
    else run_fig56(c, p);
}

void run_bound_check(Context& c) {
    const json& p = c.cfg.effective;
    BoundCheckConfig cfg;
    for (const auto& s : p["spectra"]) cfg.spectra.push_back(spectrum_spec_from_string(s));
    cfg.n = as_int(p, "n");
    cfg.lambda = as_int(p, "lambda");
    cfg.scheme = scheme_spec(p["scheme"]);
    cfg.c_m_values = vec<double>(p["c_m_values"]);
    cfg.multipliers = vec<double>(p["multipliers"]);
    cfg.reps = as_int(p, "reps");
    cfg.seed = c.cfg.seed;
    cfg.grid_points = as_int(p, "grid_points");
    cfg.workers = c.cfg.workers;
    if (cfg.n > 20 || cfg.lambda > 8) {
        c.log << "warning: Monte-Carlo error is only controlled for N <= 20 and lambda <= 8\n";
    }
    const auto cells = bound_check(cfg, c.provider());
    std::string csv = config_header(p) +
                      "spectrum,c_m,multiplier,sigma_bar,e_Ae,phi_empirical,std_err,phi_hat,lhs,rhs,alpha,G,vacuous,pass\n";
    int failures = 0;
    for (const auto& cell : cells) {
        csv += cell.spectrum + "," + format_double(cell.c_m) + "," + format_double(cell.multiplier) + "," +
               format_double(cell.sigma_bar) + "," + format_double(cell.e_Ae) + "," +
               format_double(cell.phi_empirical) + "," + format_double(cell.std_err) + "," +
               format_double(cell.phi_hat) + "," + format_double(cell.lhs) + "," + format_double(cell.rhs) + "," +
               format_double(cell.alpha) + "," + format_double(cell.G) + "," + csv_bool(cell.vacuous) + "," +
               csv_bool(cell.pass) + "\n";
        c.log << (cell.pass ? (cell.vacuous ? "VACUOUS " : "PASS    ") : "FAIL    ") << cell.spectrum
              << " c_m=" << format_double(cell.c_m) << " x" << format_double(cell.multiplier)
              << " lhs=" << format_double(cell.lhs) << " rhs=" << format_double(cell.rhs) << "\n";
        if (!cell.pass) ++failures;
    }
    c.write("bound_check.csv", csv);
    if (failures > 0) {
        throw NumericError(std::to_string(failures) + " cell(s) exceed the error bound by more than 3 standard errors");
    }
}

} // namespace

std::vector<std::string> command_names() {
    std::vector<std::string> out;
    for (const auto& [k, v] : schema()) out.push_back(k);
    return out;
}

std::vector<int> lambda_grid(int lmax) {
    require(lmax >= 2, "lmax must be at least 2");
    std::vector<int> out;
    for (int l = 2; l <= std::min(lmax, 10); ++l) out.push_back(l);
    for (int k = 11; ; ++k) {
        const double v = std::pow(10.0, k / 10.0);
        const int l = static_cast<int>(std::lround(v));
        if (l >= lmax) break;
        if (l > out.back()) out.push_back(l);
    }
    if (out.back() != lmax) out.push_back(lmax);
    return out;
}

SpectrumSpec spectrum_spec_from_string(const std::string& text) {
    SpectrumSpec s;
    const auto colon = text.find(':');
    s.type = spectrum_from_string(text.substr(0, colon));
    require(s.type != SpectrumType::custom, "custom spectra cannot be named in a config");
    const bool conditioned =
        s.type == SpectrumType::discus || s.type == SpectrumType::ellipsoid || s.type == SpectrumType::cigar;
    if (colon == std::string::npos) {
        s.alpha = conditioned ? 1e6 : 1.0;
    } else {
        require(conditioned, "spectrum '" + text + "' takes no condition number");
        s.alpha = parse_double(text.substr(colon + 1));
        require(s.alpha >= 1.0, "condition number must be at least 1");
    }
    return s;
}

json parse_json_text(const std::string& text, const std::string& source) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ValidationError(source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                              ": invalid JSON");
    }
}

RunConfig parse_config(const json& raw) {
    require(raw.is_object(), "config must be a JSON object");
    require(raw.contains("command") && raw["command"].is_string(), "field 'command': required string");
    const std::string cmd = raw["command"];
    const auto it = schema().find(cmd);
    if (it == schema().end()) throw ValidationError("field 'command': unknown command '" + cmd + "'");

    std::vector<Field> fields = common_fields();
    fields.insert(fields.end(), it->second.begin(), it->second.end());
    std::set<std::string> known;
    for (const auto& f : fields) known.insert(f.name);
    for (const auto& [k, v] : raw.items()) {
        if (!known.count(k)) throw ValidationError("field '" + k + "': unknown key for command '" + cmd + "'");
    }
    json p = json::object();
    for (const auto& f : fields) {
        if (raw.contains(f.name)) {
            p[f.name] = check_kind(f.name, f.kind, raw[f.name]);
        } else if (f.required) {
            throw ValidationError("field '" + f.name + "': required for command '" + cmd + "'");
        } else {
            p[f.name] = f.def;
        }
    }
    if (p["seed"].get<std::int64_t>() < 0) throw ValidationError("field 'seed': must be nonnegative");
    if (p["workers"].get<std::int64_t>() < 0) throw ValidationError("field 'workers': must be nonnegative");
    validate_command(cmd, p);

    RunConfig cfg;
    cfg.command = cmd;
    cfg.seed = p["seed"].get<std::uint64_t>();
    cfg.out_dir = p["out"].get<std::string>();
    const std::string cache = p["cache_dir"];
    cfg.cache_dir = cache.empty() ? default_cache_dir() : fs::path(cache);
    cfg.use_cache = p["cache"];
    const int w = static_cast<int>(p["workers"].get<std::int64_t>());
    cfg.workers = w == 0 ? default_workers() : w;
    cfg.effective = std::move(p);
    return cfg;
}

std::string config_header(const json& effective) { return "# config: " + effective.dump() + "\n"; }

std::vector<fs::path> run(const RunConfig& config, std::ostream& log) {
    Context c{config, log, {}};
    const std::string& cmd = config.command;
    c.write(cmd + ".config.json", config.effective.dump(2) + "\n");
    if (cmd == "moments") run_moments(c);
    else if (cmd == "weights") run_weights(c);
    else if (cmd == "theory") run_theory(c);
    else if (cmd == "simulate") run_simulate(c);
    else if (cmd == "figure") run_figure(c);
    else if (cmd == "bound-check") run_bound_check(c);
    else throw ValidationError("unknown command '" + cmd + "'");
    return c.written;
}

int exit_status(const std::exception& e) {
    if (dynamic_cast<const ValidationError*>(&e)) return kExitValidation;
    if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
    if (dynamic_cast<const json::exception*>(&e)) return kExitValidation;
    return 1;
}

} // namespace qgain
