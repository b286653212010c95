// Command-line front end: simulate, optimize and the table experiments.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "enduro/enduro.hpp"

namespace {

enduro::ExperimentConfig build_config(const std::string& path, const std::vector<std::string>& overrides,
                                      const std::string& out) {
    enduro::ExperimentConfig cfg = path.empty() ? enduro::ExperimentConfig{} : enduro::load_config(path);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw enduro::InputError("--set expects key=value, got '" + kv + "'");
        enduro::apply_setting(cfg, enduro::detail::trim(kv.substr(0, eq)), enduro::detail::trim(kv.substr(eq + 1)));
    }
    if (!out.empty()) cfg.output_dir = out;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distance-maximizing pacing under glycogen and nutrition dynamics"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    app.add_option("-c,--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
    app.add_option("-s,--set", overrides, "override one config key (key=value), repeatable");
    app.add_option("-o,--out", out_dir, "output directory (ENDURO_OUTPUT_DIR takes precedence)");

    auto* sim = app.add_subcommand("simulate", "integrate a force profile");
    std::string force_file;
    std::string mode = "transcription";
    sim->add_option("forces", force_file, "force profile: one value per line or CSV with an f column")->required();
    sim->add_option("--mode", mode, "transcription or refined")->check(CLI::IsMember({"transcription", "refined"}));

    auto* opt = app.add_subcommand("optimize", "solve one instance and check optimality conditions");

    auto* sweep = app.add_subcommand("sweep", "catalog strategies s0..s15");
    double sweep_t = 135.0;
    std::string sweep_vla = "average";
    sweep->add_option("--t-final", sweep_t, "race duration, min");
    sweep->add_option("--vla", sweep_vla, "good, average or bad");

    auto* vla = app.add_subcommand("vla", "VLa types with and without four 100 kcal gels");
    double vla_t = 135.0;
    vla->add_option("--t-final", vla_t, "race duration, min");

    auto* levels = app.add_subcommand("levels", "runner-level presets");

    auto* dump = app.add_subcommand("dump", "print the assembled problem summary");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : enduro::exit_input;
    }

    try {
        const auto cfg = build_config(config_path, overrides, out_dir);
        if (*sim) {
            const auto m = mode == "refined" ? enduro::SimulationMode::refined : enduro::SimulationMode::transcription;
            return enduro::cmd_simulate(cfg, force_file, m, std::cout);
        }
        if (*opt) return enduro::cmd_optimize(cfg, std::cout);
        if (*sweep) return enduro::cmd_sweep(cfg, sweep_t, enduro::parse_vla(sweep_vla), std::cout);
        if (*vla) return enduro::cmd_vla(cfg, vla_t, std::cout);
        if (*levels) return enduro::cmd_levels(cfg, std::cout);
        if (*dump) {
            cfg.validate();
            auto prob = enduro::assemble(cfg.params, cfg.resolve_strategy(), cfg.mesh(), cfg.tv_weight);
            if (cfg.min_velocity > 0.0) prob.set_min_velocity(cfg.min_velocity);
            prob.dump(std::cout);
            return enduro::exit_ok;
        }
    } catch (const enduro::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return enduro::exit_input;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return enduro::exit_input;
    }
    return enduro::exit_input;
}
