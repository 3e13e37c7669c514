#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "coconut/harness.hpp"
#include "coconut/rng.hpp"

namespace coconut::harness {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const std::pair<ExperimentId, std::string_view> kIds[] = {
    {ExperimentId::fig1, "fig1"}, {ExperimentId::fig2, "fig2"},   {ExperimentId::fig3, "fig3"},
    {ExperimentId::fig4, "fig4"}, {ExperimentId::fig5, "fig5"},   {ExperimentId::fig6, "fig6"},
    {ExperimentId::fig7, "fig7"}, {ExperimentId::fig8, "fig8"},   {ExperimentId::fig9, "fig9"},
    {ExperimentId::fig10, "fig10"}, {ExperimentId::custom, "custom"},
};

enum class Kind { number, nullable_number, integer, boolean, choice, numbers, integers, scenario, scenarios };

struct Field {
    std::string name;
    Kind kind;
    double lo = -kInf;
    double hi = kInf;
    bool lo_open = false;
    std::vector<std::string> options{};
};

Field fraction(std::string name) { return {std::move(name), Kind::number, 0.0, 1.0}; }
Field finite(std::string name) { return {std::move(name), Kind::number}; }
Field positive(std::string name) { return {std::move(name), Kind::number, 0.0, kInf, true}; }
Field nonneg(std::string name) { return {std::move(name), Kind::number, 0.0, kInf}; }
Field count(std::string name, double min = 1) { return {std::move(name), Kind::integer, min}; }
Field flag(std::string name) { return {std::move(name), Kind::boolean}; }
Field choice(std::string name, std::vector<std::string> options) {
    return {std::move(name), Kind::choice, -kInf, kInf, false, std::move(options)};
}

const std::vector<std::string> kSchemes = {"IM", "AM1", "AM2"};
const std::vector<std::string> kSelfTrade = {"exclude_self", "mean_field"};
const std::vector<std::string> kKinds = {"homogeneous", "uniform", "two_point", "linear_decreasing",
                                         "gamma_dist"};

std::vector<Field> learn_fields() {
    return {count("total_steps"),
            fraction("eps0"),
            finite("v1_init"),
            finite("v0_init"),
            nonneg("exploration_amplitude"),
            {"eps_fix", Kind::nullable_number, 0.0, 1.0},
            choice("self_trade", kSelfTrade),
            count("record_stride"),
            count("replicates")};
}

std::vector<Field> grid_fields() {
    return {fraction("eps_lo"), fraction("eps_hi"), count("eps_points"), finite("c_lo"),
            finite("c_hi"),     count("c_points"),  count("runs"),       count("total_steps"),
            nonneg("exploration_amplitude"), choice("self_trade", kSelfTrade)};
}

std::vector<Field> fields_for(ExperimentId id, const std::string& task) {
    switch (id) {
    case ExperimentId::fig1:
        return {{"c_values", Kind::numbers}, count("burn_in_steps"), count("measured_steps"),
                count("replicates"), fraction("eps0"), choice("self_trade", kSelfTrade)};
    case ExperimentId::fig2:
        return {finite("c"), count("replicates"), count("total_steps"), count("burn_in_steps", 0),
                fraction("eps0")};
    case ExperimentId::fig3:
    case ExperimentId::fig4:
        return {{"scenarios", Kind::scenarios}, choice("scheme", kSchemes),
                choice("self_trade", kSelfTrade), count("total_steps"), count("burn_in_steps", 0),
                count("window"), count("replicates"), fraction("eps0")};
    case ExperimentId::fig5: {
        auto f = learn_fields();
        f.push_back({"gammas", Kind::numbers, 0.0});
        f.push_back({"eps_fix_grid", Kind::numbers, 0.0, 1.0});
        f.push_back(count("curve_points", 2));
        std::erase_if(f, [](const Field& x) {
            return x.name == "eps_fix" || x.name == "replicates" || x.name == "record_stride";
        });
        return f;
    }
    case ExperimentId::fig6: {
        auto f = learn_fields();
        f.push_back({"gammas", Kind::numbers, 0.0});
        f.push_back(positive("theory_gamma_lo"));
        f.push_back(positive("theory_gamma_hi"));
        f.push_back(count("theory_points", 2));
        f.push_back(flag("closeup"));
        std::erase_if(f, [](const Field& x) { return x.name == "eps_fix" || x.name == "record_stride"; });
        return f;
    }
    case ExperimentId::fig7: {
        auto f = learn_fields();
        f.push_back({"v1_offsets", Kind::numbers});
        std::erase_if(f, [](const Field& x) {
            return x.name == "eps_fix" || x.name == "eps0" || x.name == "v1_init" || x.name == "v0_init";
        });
        return f;
    }
    case ExperimentId::fig8: {
        auto f = learn_fields();
        f.push_back({"n_agents_list", Kind::integers, 2.0});
        f.push_back(count("steps_per_agent"));
        std::erase_if(f, [](const Field& x) {
            return x.name == "eps_fix" || x.name == "eps0" || x.name == "v1_init" ||
                   x.name == "v0_init" || x.name == "total_steps" || x.name == "record_stride";
        });
        return f;
    }
    case ExperimentId::fig9: {
        auto f = grid_fields();
        f.push_back({"gammas", Kind::numbers, 0.0});
        return f;
    }
    case ExperimentId::fig10: return grid_fields();
    case ExperimentId::custom: break;
    }
    if (task == "simulate")
        return {choice("task", custom_tasks()), choice("scheme", kSchemes),
                choice("self_trade", kSelfTrade), {"scenario", Kind::scenario},
                count("total_steps"), count("burn_in_steps", 0), fraction("eps0"),
                count("replicates")};
    if (task == "chain")
        return {choice("task", custom_tasks()), finite("c"),
                choice("variant", {"IM_chain", "AM2_chain"}),
                {"sigma_bar", Kind::nullable_number}, flag("write_matrix")};
    if (task == "ode")
        return {choice("task", custom_tasks()),
                choice("variant", {"original_2d", "adjusted_eps", "corrected_eps", "value_3d",
                                   "moment_hierarchy"}),
                finite("c"), {"init", Kind::numbers}, positive("t_end"), positive("dt"),
                count("record_every"), finite("sigma"), {"scenario", Kind::scenario},
                count("order"), flag("stop_at_steady_state")};
    if (task == "equilibria")
        return {choice("task", custom_tasks()), {"gammas", Kind::numbers, 0.0, kInf, true},
                flag("bifurcation")};
    if (task == "hetero")
        return {choice("task", custom_tasks()), {"scenario", Kind::scenario},
                choice("scheme", kSchemes), choice("self_trade", kSelfTrade),
                count("total_steps"), count("burn_in_steps", 0), count("window"),
                count("replicates"), fraction("eps0")};
    if (task == "learn") {
        auto f = learn_fields();
        f.insert(f.begin(), choice("task", custom_tasks()));
        return f;
    }
    if (task == "phase") {
        auto f = grid_fields();
        f.insert(f.begin(), choice("task", custom_tasks()));
        return f;
    }
    return {choice("task", custom_tasks())};
}

json scenario_json(std::string_view kind) {
    json s = {{"kind", kind}};
    return s;
}

json learn_defaults() {
    return {{"total_steps", 200000}, {"eps0", 0.5},          {"v1_init", 0.6},
            {"v0_init", 0.0},        {"exploration_amplitude", 0.0}, {"eps_fix", nullptr},
            {"self_trade", "exclude_self"}, {"record_stride", 100}, {"replicates", 1}};
}

json grid_defaults() {
    return {{"eps_lo", 0.0},  {"eps_hi", 1.0},  {"eps_points", 26}, {"c_lo", 0.3},
            {"c_hi", 0.5},    {"c_points", 26}, {"runs", 10},       {"total_steps", 10000},
            {"exploration_amplitude", 0.0},     {"self_trade", "exclude_self"}};
}

json steps_grid(double lo, double hi, double step) {
    json out = json::array();
    const int n = static_cast<int>(std::lround((hi - lo) / step));
    for (int k = 0; k <= n; ++k) out.push_back(std::round((lo + k * step) * 1e9) / 1e9);
    return out;
}

std::string at(std::string_view base, std::string_view key) {
    return std::string(base) + "." + std::string(key);
}

std::string index_path(const std::string& base, std::size_t k) {
    return base + "[" + std::to_string(k) + "]";
}

bool is_real(const json& v) { return v.is_number() && std::isfinite(v.get<double>()); }

std::string describe_range(const Field& f) {
    std::ostringstream os;
    os << (f.lo_open ? "(" : "[") << f.lo << ", " << f.hi << "]";
    return os.str();
}

bool in_range(double x, const Field& f) {
    if (f.lo_open ? !(x > f.lo) : !(x >= f.lo)) return false;
    return x <= f.hi;
}

void check_scenario(const json& v, const std::string& path, std::vector<ConfigIssue>& issues) {
    if (!v.is_object()) {
        issues.push_back({path, "scenario must be an object"});
        return;
    }
    if (!v.contains("kind") || !v["kind"].is_string()) {
        issues.push_back({at(path, "kind"), "scenario kind is required"});
        return;
    }
    const std::string kind = v["kind"];
    if (std::find(kKinds.begin(), kKinds.end(), kind) == kKinds.end()) {
        issues.push_back({at(path, "kind"), "unknown scenario kind '" + kind + "'"});
        return;
    }
    std::vector<std::string> allowed = {"kind"};
    if (kind == "homogeneous") allowed.push_back("c");
    if (kind == "two_point") allowed.insert(allowed.end(), {"c_a", "c_b"});
    if (kind == "gamma_dist") allowed.insert(allowed.end(), {"shape", "scale"});
    for (const auto& [key, val] : v.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            issues.push_back({at(path, key), "not a parameter of scenario '" + kind + "'"});
            continue;
        }
        if (key == "kind") continue;
        if (!is_real(val)) {
            issues.push_back({at(path, key), "must be a finite number"});
            continue;
        }
        if (key == "scale" && !(val.get<double>() > 0.0))
            issues.push_back({at(path, key), "must be positive"});
        if (key == "shape" && val.get<double>() != 1.0)
            issues.push_back({at(path, key), "only shape 1 is supported"});
    }
}

void check_field(const Field& f, const json& v, const std::string& path,
                 std::vector<ConfigIssue>& issues) {
    switch (f.kind) {
    case Kind::nullable_number:
        if (v.is_null()) return;
        [[fallthrough]];
    case Kind::number:
        if (!is_real(v))
            issues.push_back({path, "must be a finite number"});
        else if (!in_range(v.get<double>(), f))
            issues.push_back({path, "must lie in " + describe_range(f)});
        return;
    case Kind::integer:
        if (!v.is_number_integer() || (v.is_number_integer() && v.get<double>() < f.lo))
            issues.push_back({path, "must be an integer >= " + std::to_string(static_cast<long long>(f.lo))});
        return;
    case Kind::boolean:
        if (!v.is_boolean()) issues.push_back({path, "must be true or false"});
        return;
    case Kind::choice:
        if (!v.is_string() ||
            std::find(f.options.begin(), f.options.end(), v.get<std::string>()) == f.options.end()) {
            std::string opts;
            for (const auto& o : f.options) opts += (opts.empty() ? "" : ", ") + o;
            issues.push_back({path, "must be one of: " + opts});
        }
        return;
    case Kind::numbers:
    case Kind::integers:
        if (!v.is_array()) {
            issues.push_back({path, "must be an array"});
            return;
        }
        if (v.empty() && f.name != "init") issues.push_back({path, "must not be empty"});
        for (std::size_t k = 0; k < v.size(); ++k) {
            const auto& x = v[k];
            const bool ok_type = f.kind == Kind::integers ? x.is_number_integer() : is_real(x);
            if (!ok_type)
                issues.push_back({index_path(path, k),
                                  f.kind == Kind::integers ? "must be an integer" : "must be a finite number"});
            else if (!in_range(x.get<double>(), f))
                issues.push_back({index_path(path, k), "must lie in " + describe_range(f)});
        }
        return;
    case Kind::scenario:
        check_scenario(v, path, issues);
        return;
    case Kind::scenarios:
        if (!v.is_array() || v.empty()) {
            issues.push_back({path, "must be a non-empty array of scenarios"});
            return;
        }
        for (std::size_t k = 0; k < v.size(); ++k) check_scenario(v[k], index_path(path, k), issues);
        return;
    }
}

// Settings constraints that involve more than one key or the model parameters.
void cross_checks(const json& s, const json& params, std::vector<ConfigIssue>& issues) {
    const std::string base = "$.settings";
    auto num = [&](const char* key) { return s[key].get<double>(); };
    if (s.contains("burn_in_steps") && s.contains("total_steps") &&
        s["burn_in_steps"].is_number_integer() && s["total_steps"].is_number_integer() &&
        !(num("burn_in_steps") < num("total_steps")))
        issues.push_back({at(base, "burn_in_steps"),
                          "burn_in_steps must be smaller than total_steps (empty measurement window)"});
    if (s.contains("window") && s["window"].is_number_integer() && s["total_steps"].is_number_integer() &&
        s["burn_in_steps"].is_number_integer() &&
        num("total_steps") < num("burn_in_steps") + num("window"))
        issues.push_back({at(base, "window"), "total_steps must cover burn_in_steps plus window"});
    if (s.contains("eps_lo") && is_real(s["eps_lo"]) && is_real(s["eps_hi"]) && num("eps_lo") > num("eps_hi"))
        issues.push_back({at(base, "eps_hi"), "eps_hi must not be below eps_lo"});
    if (s.contains("c_lo") && is_real(s["c_lo"]) && is_real(s["c_hi"]) && num("c_lo") > num("c_hi"))
        issues.push_back({at(base, "c_hi"), "c_hi must not be below c_lo"});
    if (s.contains("theory_gamma_lo") && is_real(s["theory_gamma_lo"]) && is_real(s["theory_gamma_hi"]) &&
        num("theory_gamma_lo") > num("theory_gamma_hi"))
        issues.push_back({at(base, "theory_gamma_hi"), "theory_gamma_hi must not be below theory_gamma_lo"});

    const bool have_support = is_real(params["c_min"]) && is_real(params["c_max"]) &&
                              params["c_min"].get<double>() < params["c_max"].get<double>();
    if (!have_support) return;
    const double c_min = params["c_min"], c_max = params["c_max"];
    auto strategy_in_support = [&](const json& sc, const std::string& path) {
        if (!sc.is_object() || !sc.contains("kind") || !sc["kind"].is_string()) return;
        for (const char* key : {"c", "c_a", "c_b"}) {
            if (!sc.contains(key) || !is_real(sc[key])) continue;
            const double c = sc[key];
            if (c < c_min || c > c_max)
                issues.push_back({at(path, key), "strategy must lie in [c_min, c_max]"});
        }
    };
    if (s.contains("scenario")) strategy_in_support(s["scenario"], at(base, "scenario"));
    if (s.contains("scenarios") && s["scenarios"].is_array())
        for (std::size_t k = 0; k < s["scenarios"].size(); ++k)
            strategy_in_support(s["scenarios"][k], index_path(at(base, "scenarios"), k));
}

void check_params(const json& merged, std::vector<ConfigIssue>& issues) {
    const std::string base = "$.params";
    auto real = [&](const char* key) -> std::optional<double> {
        const auto& v = merged[key];
        if (!is_real(v)) {
            issues.push_back({at(base, key), "must be a finite number"});
            return std::nullopt;
        }
        return v.get<double>();
    };
    const auto& n = merged["n_agents"];
    if (!n.is_number_integer() || n.get<long long>() < 2)
        issues.push_back({at(base, "n_agents"), "must be an integer >= 2"});
    if (auto f = real("f"); f && !(*f >= 0.0 && *f <= 1.0))
        issues.push_back({at(base, "f"), "must lie in [0, 1]"});
    real("y");
    auto lo = real("c_min");
    auto hi = real("c_max");
    if (lo && hi && !(*lo < *hi)) issues.push_back({at(base, "c_max"), "c_min must be smaller than c_max"});
    if (auto g = real("gamma"); g && !(*g >= 0.0)) issues.push_back({at(base, "gamma"), "must be >= 0"});
    if (auto a = real("alpha"); a && !(*a > 0.0 && *a < 1.0))
        issues.push_back({at(base, "alpha"), "must lie in (0, 1)"});
    const auto& seed = merged["master_seed"];
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0))
        issues.push_back({at(base, "master_seed"), "must be an unsigned 64-bit integer"});
}

ModelParams params_from_json(const json& j) {
    ModelParams p;
    p.n_agents = j["n_agents"].get<std::size_t>();
    p.f = j["f"];
    p.y = j["y"];
    p.c_min = j["c_min"];
    p.c_max = j["c_max"];
    p.gamma = j["gamma"];
    p.alpha = j["alpha"];
    p.master_seed = j["master_seed"].get<std::uint64_t>();
    return p;
}

} // namespace

std::string_view to_string(ExperimentId id) {
    for (const auto& [k, name] : kIds)
        if (k == id) return name;
    return "?";
}

std::optional<ExperimentId> experiment_from_string(std::string_view name) {
    for (const auto& [k, n] : kIds)
        if (n == name) return k;
    return std::nullopt;
}

const std::vector<std::string>& custom_tasks() {
    static const std::vector<std::string> tasks = {"simulate", "chain", "ode",  "equilibria",
                                                   "hetero",   "learn", "phase"};
    return tasks;
}

ConfigInvalid::ConfigInvalid(std::vector<ConfigIssue> issues)
    : ConfigError([&] {
          std::string msg = "invalid configuration:";
          for (const auto& i : issues) msg += "\n  " + i.path + ": " + i.message;
          return msg;
      }()),
      issues_(std::move(issues)) {}

json params_to_json(const ModelParams& p) {
    return {{"n_agents", p.n_agents}, {"f", p.f},         {"y", p.y},
            {"c_min", p.c_min},       {"c_max", p.c_max}, {"gamma", p.gamma},
            {"alpha", p.alpha},       {"master_seed", p.master_seed}};
}

json preset_params(ExperimentId id) {
    json p = params_to_json(ModelParams{});
    switch (id) {
    case ExperimentId::fig7:
    case ExperimentId::fig8: p["alpha"] = 0.025; break;
    case ExperimentId::fig10: p["gamma"] = 0.2; break;
    default: break;
    }
    return p;
}

json preset_settings(ExperimentId id, std::string_view task, bool closeup) {
    switch (id) {
    case ExperimentId::fig1:
        return {{"c_values", steps_grid(0.30, 0.50, 0.01)}, {"burn_in_steps", 4000},
                {"measured_steps", 10000}, {"replicates", 10}, {"eps0", 0.0},
                {"self_trade", "exclude_self"}};
    case ExperimentId::fig2:
        return {{"c", 0.4}, {"replicates", 10}, {"total_steps", 100000}, {"burn_in_steps", 1000},
                {"eps0", 0.0}};
    case ExperimentId::fig3:
    case ExperimentId::fig4: {
        json scenarios = json::array();
        if (id == ExperimentId::fig3) {
            scenarios.push_back(scenario_json("uniform"));
            scenarios.push_back({{"kind", "two_point"}, {"c_a", 0.35}, {"c_b", 0.45}});
        } else {
            scenarios.push_back(scenario_json("linear_decreasing"));
            scenarios.push_back({{"kind", "gamma_dist"}, {"shape", 1.0}, {"scale", 0.2}});
        }
        return {{"scenarios", scenarios}, {"scheme", "IM"}, {"self_trade", "exclude_self"},
                {"total_steps", 14000}, {"burn_in_steps", 4000}, {"window", 2000},
                {"replicates", 10}, {"eps0", 0.0}};
    }
    case ExperimentId::fig5: {
        json s = learn_defaults();
        s.erase("eps_fix");
        s.erase("replicates");
        s.erase("record_stride");
        s["gammas"] = {0.1, 0.2, 0.3};
        s["eps_fix_grid"] = steps_grid(0.0, 1.0, 0.05);
        s["curve_points"] = 201;
        return s;
    }
    case ExperimentId::fig6: {
        json s = learn_defaults();
        s.erase("eps_fix");
        s.erase("record_stride");
        s["replicates"] = 5;
        s["closeup"] = closeup;
        if (closeup) {
            s["gammas"] = steps_grid(0.21, 0.26, 0.01);
            s["theory_gamma_lo"] = 0.21;
            s["theory_gamma_hi"] = 0.26;
        } else {
            s["gammas"] = steps_grid(0.05, 0.5, 0.05);
            s["theory_gamma_lo"] = 0.005;
            s["theory_gamma_hi"] = 0.5;
        }
        s["theory_points"] = 200;
        return s;
    }
    case ExperimentId::fig7: {
        json s = learn_defaults();
        for (const char* k : {"eps_fix", "eps0", "v1_init", "v0_init"}) s.erase(k);
        s["replicates"] = 5;
        s["record_stride"] = 1000;
        s["v1_offsets"] = {-0.001, 0.0, 0.0025, 0.005, 0.01, 0.02};
        return s;
    }
    case ExperimentId::fig8: {
        json s = learn_defaults();
        for (const char* k : {"eps_fix", "eps0", "v1_init", "v0_init", "total_steps", "record_stride"})
            s.erase(k);
        s["replicates"] = 5;
        s["exploration_amplitude"] = 0.0015;
        s["n_agents_list"] = {50, 100, 200};
        s["steps_per_agent"] = 2000;
        return s;
    }
    case ExperimentId::fig9: {
        json s = grid_defaults();
        s["gammas"] = {0.1, 0.2};
        return s;
    }
    case ExperimentId::fig10: {
        json s = grid_defaults();
        s["eps_lo"] = 0.0;
        s["eps_hi"] = 0.4;
        s["eps_points"] = 11;
        s["c_lo"] = 0.30;
        s["c_hi"] = 0.34;
        s["c_points"] = 11;
        return s;
    }
    case ExperimentId::custom: break;
    }
    json s;
    if (task == "simulate")
        s = {{"scheme", "IM"}, {"self_trade", "exclude_self"},
             {"scenario", {{"kind", "homogeneous"}, {"c", 0.4}}}, {"total_steps", 14000},
             {"burn_in_steps", 4000}, {"eps0", 0.0}, {"replicates", 1}};
    else if (task == "chain")
        s = {{"c", 0.4}, {"variant", "IM_chain"}, {"sigma_bar", nullptr}, {"write_matrix", false}};
    else if (task == "ode")
        s = {{"variant", "adjusted_eps"}, {"c", 0.4}, {"init", json::array()}, {"t_end", 50.0},
             {"dt", 1e-3}, {"record_every", 100}, {"sigma", 0.0},
             {"scenario", scenario_json("uniform")}, {"order", 3}, {"stop_at_steady_state", false}};
    else if (task == "equilibria")
        s = {{"gammas", steps_grid(0.05, 0.3, 0.05)}, {"bifurcation", true}};
    else if (task == "hetero")
        s = {{"scenario", scenario_json("uniform")}, {"scheme", "IM"}, {"self_trade", "exclude_self"},
             {"total_steps", 14000}, {"burn_in_steps", 4000}, {"window", 2000}, {"replicates", 10},
             {"eps0", 0.0}};
    else if (task == "learn")
        s = learn_defaults();
    else if (task == "phase")
        s = grid_defaults();
    else
        s = json::object();
    s["task"] = task;
    return s;
}

Validation validate_config(const json& doc) {
    Validation out;
    auto& issues = out.issues;
    if (!doc.is_object()) {
        issues.push_back({"$", "configuration must be a JSON object"});
        return out;
    }
    for (const auto& [key, val] : doc.items()) {
        (void)val;
        if (key != "experiment" && key != "params" && key != "settings" && key != "output_dir" &&
            key != "plots")
            issues.push_back({at("$", key), "unknown top-level key"});
    }

    ExperimentId id = ExperimentId::custom;
    bool id_ok = true;
    if (!doc.contains("experiment") || !doc["experiment"].is_string()) {
        issues.push_back({"$.experiment", "experiment id is required"});
        id_ok = false;
    } else if (auto parsed = experiment_from_string(doc["experiment"].get<std::string>())) {
        id = *parsed;
    } else {
        issues.push_back({"$.experiment", "unknown experiment id '" + doc["experiment"].get<std::string>() + "'"});
        id_ok = false;
    }

    json params = preset_params(id);
    if (doc.contains("params")) {
        const auto& p = doc["params"];
        if (!p.is_object()) {
            issues.push_back({"$.params", "must be an object"});
        } else {
            for (const auto& [key, val] : p.items()) {
                if (!params.contains(key))
                    issues.push_back({at("$.params", key), "unknown parameter"});
                else
                    params[key] = val;
            }
        }
    }
    check_params(params, issues);

    json overrides = json::object();
    if (doc.contains("settings")) {
        if (!doc["settings"].is_object())
            issues.push_back({"$.settings", "must be an object"});
        else
            overrides = doc["settings"];
    }
    std::string task;
    if (id == ExperimentId::custom && id_ok) {
        if (!overrides.contains("task") || !overrides["task"].is_string()) {
            issues.push_back({"$.settings.task", "custom experiments need a task: simulate, chain, "
                                                 "ode, equilibria, hetero, learn or phase"});
            id_ok = false;
        } else {
            task = overrides["task"];
            const auto& tasks = custom_tasks();
            if (std::find(tasks.begin(), tasks.end(), task) == tasks.end()) {
                issues.push_back({"$.settings.task", "unknown task '" + task + "'"});
                id_ok = false;
            }
        }
    }
    bool closeup = false;
    if (id == ExperimentId::fig6 && overrides.contains("closeup") && overrides["closeup"].is_boolean())
        closeup = overrides["closeup"];

    json settings = json::object();
    if (id_ok) {
        settings = preset_settings(id, task, closeup);
        const auto fields = fields_for(id, task);
        for (const auto& [key, val] : overrides.items()) {
            const auto it = std::find_if(fields.begin(), fields.end(),
                                         [&](const Field& f) { return f.name == key; });
            const std::string path = at("$.settings", key);
            if (it == fields.end()) {
                issues.push_back({path, "unknown setting for " + std::string(to_string(id)) +
                                            (task.empty() ? "" : "/" + task)});
                continue;
            }
            check_field(*it, val, path, issues);
            settings[key] = val;
        }
        cross_checks(settings, params, issues);
    }

    std::filesystem::path output_dir = std::filesystem::path("out") / std::string(to_string(id));
    if (doc.contains("output_dir")) {
        if (!doc["output_dir"].is_string() || doc["output_dir"].get<std::string>().empty())
            issues.push_back({"$.output_dir", "must be a non-empty string"});
        else
            output_dir = doc["output_dir"].get<std::string>();
    }
    bool plots = true;
    if (doc.contains("plots")) {
        if (!doc["plots"].is_boolean())
            issues.push_back({"$.plots", "must be true or false"});
        else
            plots = doc["plots"];
    }

    if (!issues.empty()) return out;
    ExperimentSpec spec;
    spec.id = id;
    spec.params = params_from_json(params);
    spec.settings = std::move(settings);
    spec.output_dir = std::move(output_dir);
    spec.plots = plots;
    out.spec = std::move(spec);
    return out;
}

ExperimentSpec parse_config(const json& doc) {
    Validation v = validate_config(doc);
    if (!v.ok()) throw ConfigInvalid(std::move(v.issues));
    return std::move(*v.spec);
}

json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
}

json ExperimentSpec::resolved() const {
    return {{"experiment", std::string(to_string(id))}, {"params", params_to_json(params)},
            {"settings", settings}};
}

std::string ExperimentSpec::config_hash() const {
    const std::uint64_t h = fnv1a64(resolved().dump());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace coconut::harness
