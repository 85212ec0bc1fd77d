// Command-line front end: run scenarios, sweep parameters, validate configs.
// Exit codes: 0 success, 2 config error, 3 runtime divergence.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "swarmfield/runner.hpp"
#include "swarmfield/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitDivergence = 3;

swarmfield::json parse_value(const std::string& text) {
    // values on the command line may be bare strings; try JSON first
    auto parsed = swarmfield::json::parse(text, nullptr, false);
    if (!parsed.is_discarded()) return parsed;
    return swarmfield::json(text);
}

swarmfield::ScenarioConfig load_with_overrides(const std::string& path,
                                               const std::vector<std::string>& sets,
                                               const std::string& out_dir, long long seed) {
    std::ifstream in(path);
    if (!in.good()) throw std::invalid_argument("cannot open config file: " + path);
    swarmfield::json doc = swarmfield::json::parse(in);
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects path=value, got: " + kv);
        swarmfield::detail::set_json_path(doc, kv.substr(0, eq), parse_value(kv.substr(eq + 1)));
    }
    if (seed >= 0) doc["seed"] = static_cast<std::uint64_t>(seed);
    if (!out_dir.empty()) doc["output"]["directory"] = out_dir;
    // the environment may redirect output; it is the only env-var knob
    if (const char* env = std::getenv("SWARMFIELD_OUTPUT_DIR"); env && *env) {
        if (doc.contains("output") && doc["output"].value("directory", std::string()) != "")
            doc["output"]["directory"] =
                (std::filesystem::path(env) / doc["output"]["directory"].get<std::string>()).string();
        else
            doc["output"]["directory"] = env;
    }
    return swarmfield::parse_config(doc);
}

std::vector<swarmfield::json> split_values(const std::string& csv) {
    std::vector<swarmfield::json> values;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const auto comma = csv.find(',', start);
        const std::string tok = csv.substr(start, comma == std::string::npos ? comma : comma - start);
        if (!tok.empty()) values.push_back(parse_value(tok));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return values;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"swarmfield: multi-scale density control scenarios on the ring"};
    app.require_subcommand(1);

    std::string config_path, out_dir, param_spec;
    std::vector<std::string> sets;
    long long seed_override = -1;
    int sweep_seeds = 1;

    auto* run_cmd = app.add_subcommand("run", "run one scenario from a config file");
    run_cmd->add_option("config", config_path, "config JSON file")->required();
    run_cmd->add_option("--set", sets, "override a config field, e.g. --set control.k_p=12");
    run_cmd->add_option("--out", out_dir, "output directory (overrides output.directory)");
    run_cmd->add_option("--seed", seed_override, "override the seed");

    auto* sweep_cmd = app.add_subcommand("sweep", "run a parameter x seed sweep");
    sweep_cmd->add_option("config", config_path, "config JSON file")->required();
    sweep_cmd->add_option("--param", param_spec, "swept parameter, e.g. control.k_p=2,4,8,16")
        ->required();
    sweep_cmd->add_option("--seeds", sweep_seeds, "number of seeds per value")->default_val(1);
    sweep_cmd->add_option("--set", sets, "override a config field");
    sweep_cmd->add_option("--out", out_dir, "output directory (overrides output.directory)");

    auto* validate_cmd = app.add_subcommand("validate", "validate a config file");
    validate_cmd->add_option("config", config_path, "config JSON file")->required();

    auto* list_cmd = app.add_subcommand("list-scenarios", "list the available scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfigError;
    }

    try {
        if (list_cmd->parsed()) {
            for (const auto& [kind, name] : swarmfield::scenario_names()) {
                (void)kind;
                std::cout << name << "\n";
            }
            return kExitOk;
        }
        if (validate_cmd->parsed()) {
            const auto cfg = load_with_overrides(config_path, {}, "", -1);
            const auto violations = cfg.validate();
            if (violations.empty()) {
                std::cout << "config ok: scenario " << swarmfield::to_string(cfg.scenario) << "\n";
                return kExitOk;
            }
            std::cerr << "config invalid:\n";
            for (const auto& v : violations) std::cerr << "  - " << v << "\n";
            return kExitConfigError;
        }
        if (run_cmd->parsed()) {
            const auto cfg = load_with_overrides(config_path, sets, out_dir, seed_override);
            const auto violations = cfg.validate();
            if (!violations.empty()) {
                std::cerr << "config invalid:\n";
                for (const auto& v : violations) std::cerr << "  - " << v << "\n";
                return kExitConfigError;
            }
            const auto rec = swarmfield::run_scenario(cfg);
            std::cout << rec.summary.dump(2) << "\n";
            return kExitOk;
        }
        if (sweep_cmd->parsed()) {
            const auto eq = param_spec.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("--param expects path=v1,v2,..., got: " + param_spec);
            const std::string path = param_spec.substr(0, eq);
            const auto values = split_values(param_spec.substr(eq + 1));
            const auto cfg = load_with_overrides(config_path, sets, out_dir, seed_override);
            const auto violations = cfg.validate();
            if (!violations.empty()) {
                std::cerr << "config invalid:\n";
                for (const auto& v : violations) std::cerr << "  - " << v << "\n";
                return kExitConfigError;
            }
            const auto sweep = swarmfield::run_sweep(cfg, path, values, sweep_seeds);
            if (!cfg.output.directory.empty()) {
                const std::filesystem::path dir(cfg.output.directory);
                std::filesystem::create_directories(dir);
                swarmfield::detail::atomic_write(dir / "sweep.csv", swarmfield::sweep_csv(sweep));
                swarmfield::detail::atomic_write(dir / "sweep_summary.json",
                                                 sweep.aggregate.dump(2) + "\n");
            }
            std::cout << sweep.aggregate.dump(2) << "\n";
            return kExitOk;
        }
    } catch (const swarmfield::DivergenceError& e) {
        std::cerr << "runtime divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
    return kExitOk;
}
