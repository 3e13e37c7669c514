#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "coconut/harness.hpp"
#include "coconut/parallel.hpp"

using nlohmann::json;
namespace h = coconut::harness;

namespace {

enum Exit { ok = 0, config_error = 2, numerical_error = 3, io_error = 4 };

// "--set key=value": value is parsed as JSON when possible, else kept as a
// string. Keys prefixed with "params." patch the model parameters.
void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw coconut::ConfigError("--set expects key=value, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    if (key.rfind("params.", 0) == 0)
        doc["params"][key.substr(7)] = value;
    else
        doc["settings"][key] = value;
}

struct Options {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out;
    unsigned threads = 0;
    bool no_plots = false;
    std::vector<std::string> sets;
    std::string figure;
    bool closeup = false;
    std::string replot_dir;
};

json build_document(const Options& o, const std::string& task) {
    json doc = o.config.empty() ? json::object() : h::load_json_file(o.config);
    if (!doc.is_object()) throw coconut::ConfigError("config document must be a JSON object");
    if (!doc.contains("settings")) doc["settings"] = json::object();
    if (!doc.contains("params")) doc["params"] = json::object();
    if (task == "figure") {
        if (doc.contains("experiment") && doc["experiment"] != o.figure)
            throw coconut::ConfigError("config names experiment " + doc["experiment"].dump() +
                                       " but the command asks for " + o.figure);
        if (!h::experiment_from_string(o.figure) || o.figure == "custom")
            throw coconut::ConfigError("unknown figure '" + o.figure + "'");
        doc["experiment"] = o.figure;
        if (o.closeup) doc["settings"]["closeup"] = true;
    } else {
        if (doc.contains("experiment") && doc["experiment"] != "custom")
            throw coconut::ConfigError("config names experiment " + doc["experiment"].dump() + "; the " + task +
                                       " command runs custom experiments");
        if (doc["settings"].is_object() && doc["settings"].contains("task") && doc["settings"]["task"] != task)
            throw coconut::ConfigError("config task " + doc["settings"]["task"].dump() + " does not match command " +
                                       task);
        doc["experiment"] = "custom";
        doc["settings"]["task"] = task;
    }
    if (o.seed_given) doc["params"]["master_seed"] = o.seed;
    if (!o.out.empty()) doc["output_dir"] = o.out;
    if (o.no_plots) doc["plots"] = false;
    for (const auto& s : o.sets) apply_override(doc, s);
    return doc;
}

int run(const Options& o, const std::string& task) {
    if (task == "replot") {
        const json manifest = h::load_json_file(std::filesystem::path(o.replot_dir) / "manifest.json");
        h::ExperimentSpec spec = h::parse_config(manifest.at("resolved_config"));
        for (const auto& f : h::render_plots(spec, o.replot_dir)) std::cout << f.string() << "\n";
        return ok;
    }
    const h::ExperimentSpec spec = h::parse_config(build_document(o, task));
    const h::ResultBundle bundle = h::run_experiment(spec);
    std::cout << bundle.summary.dump(2) << "\n";
    std::cout << "config_hash " << spec.config_hash() << "\n";
    for (const auto& f : bundle.csv_files) std::cout << f.string() << "\n";
    for (const auto& f : bundle.plot_files) std::cout << f.string() << "\n";
    std::cout << bundle.manifest.string() << "\n";
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Coconut search-equilibrium simulation lab"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--config", o.config, "JSON experiment document");
    app.add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { o.seed = s, o.seed_given = true; }, "Master seed");
    app.add_option("--out", o.out, "Output directory");
    app.add_option("--threads", o.threads, "Worker threads (0 = all hardware threads)");
    app.add_flag("--no-plots", o.no_plots, "Skip SVG emission");
    app.add_option("--set", o.sets, "Override a setting, key=value (params.<name>=value for model parameters)")
        ->allow_extra_args(false);

    for (const auto& task : h::custom_tasks()) app.add_subcommand(task, "Run a custom " + task + " experiment")
        ->fallthrough();
    auto* figure = app.add_subcommand("figure", "Run a figure preset")->fallthrough();
    figure->add_option("id", o.figure, "fig1 ... fig10")->required();
    figure->add_flag("--closeup", o.closeup, "fig6: narrow gamma window around the bifurcation");
    auto* replot = app.add_subcommand("replot", "Regenerate SVG plots from an output directory")->fallthrough();
    replot->add_option("dir", o.replot_dir)->required()->check(CLI::ExistingDirectory);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return config_error;
    }
    coconut::worker_budget() = o.threads;

    const std::string task = app.get_subcommands().front()->get_name();
    try {
        return run(o, task);
    } catch (const h::ConfigInvalid& e) {
        std::cerr << "invalid configuration:\n";
        for (const auto& issue : e.issues()) std::cerr << "  " << issue.path << ": " << issue.message << "\n";
        return config_error;
    } catch (const coconut::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return config_error;
    } catch (const coconut::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return numerical_error;
    } catch (const coconut::IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return io_error;
    } catch (const json::exception& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return config_error;
    }
}
