#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "coconut/core.hpp"
#include "coconut/errors.hpp"

namespace coconut::harness {

enum class ExperimentId { fig1, fig2, fig3, fig4, fig5, fig6, fig7, fig8, fig9, fig10, custom };

std::string_view to_string(ExperimentId id);
std::optional<ExperimentId> experiment_from_string(std::string_view name);

// Task names accepted by a custom experiment; they mirror the CLI subcommands.
const std::vector<std::string>& custom_tasks();

struct ConfigIssue {
    std::string path; // JSON path, e.g. "$.params.f"
    std::string message;
};

class ConfigInvalid : public ConfigError {
public:
    explicit ConfigInvalid(std::vector<ConfigIssue> issues);
    const std::vector<ConfigIssue>& issues() const { return issues_; }

private:
    std::vector<ConfigIssue> issues_;
};

// A fully resolved experiment: preset defaults with the document's overrides
// applied on top. `settings` holds only known keys with validated values.
struct ExperimentSpec {
    ExperimentId id = ExperimentId::custom;
    ModelParams params;
    nlohmann::json settings = nlohmann::json::object();
    std::filesystem::path output_dir = "out";
    bool plots = true;

    // Canonical form of everything that determines the CSV contents.
    nlohmann::json resolved() const;
    // FNV-1a of resolved().dump(), as 16 hex digits.
    std::string config_hash() const;
};

// Parameter and setting defaults of a preset. For custom experiments `task`
// selects the settings block.
nlohmann::json preset_params(ExperimentId id);
nlohmann::json preset_settings(ExperimentId id, std::string_view task = {},
                               bool closeup = false);

nlohmann::json params_to_json(const ModelParams& p);

struct Validation {
    std::optional<ExperimentSpec> spec;
    std::vector<ConfigIssue> issues;

    bool ok() const { return issues.empty(); }
};

// Document layout:
//   { "experiment": "fig1" | ... | "custom",
//     "params":   { n_agents, f, y, c_min, c_max, gamma, alpha, master_seed },
//     "settings": { ...preset-specific overrides... },
//     "output_dir": "out/fig1", "plots": true }
// Every violation is reported, each with its JSON path.
Validation validate_config(const nlohmann::json& doc);
// As above but throws ConfigInvalid listing all issues.
ExperimentSpec parse_config(const nlohmann::json& doc);

nlohmann::json load_json_file(const std::filesystem::path& path);

struct ResultBundle {
    std::filesystem::path output_dir;
    std::vector<std::filesystem::path> csv_files;
    std::vector<std::filesystem::path> plot_files;
    std::filesystem::path manifest;
    nlohmann::json summary = nlohmann::json::object();
    double wall_seconds = 0.0;
};

// Runs the preset (or custom task), writes its CSVs, optional SVG plots and
// manifest.json into spec.output_dir.
ResultBundle run_experiment(const ExperimentSpec& spec);

// Regenerates the SVG plots of an experiment from the CSVs in `dir`.
std::vector<std::filesystem::path> render_plots(const ExperimentSpec& spec,
                                                const std::filesystem::path& dir);

} // namespace coconut::harness
