#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "eoslab/eoslab.hpp"

namespace {

int run_command(const std::string& config_path, const std::string& preset_override,
                long seed_override, const std::string& out_override, int threads_override,
                bool check) {
    using namespace eoslab;
    ExperimentConfig cfg;
    if (!config_path.empty()) {
        cfg = load_config(config_path);
        if (!preset_override.empty() && preset_override != cfg.preset) {
            ExperimentConfig base = default_config(preset_override);
            base.landscape = cfg.landscape;
            base.seed = cfg.seed;
            base.out_dir = cfg.out_dir;
            cfg = base;
        }
    } else if (!preset_override.empty()) {
        cfg = default_config(preset_override);
    } else {
        std::fprintf(stderr, "error: give a config path or --preset NAME\n");
        return 2;
    }
    if (seed_override >= 0) cfg.seed = std::uint64_t(seed_override);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (threads_override > 0) cfg.threads = threads_override;

    RunManifest man = run_preset(cfg, check);
    std::printf("%s: wrote %zu files to %s in %.2fs\n", cfg.preset.c_str(), man.outputs.size(),
                cfg.out_dir.c_str(), man.duration_seconds);
    if (check) {
        for (const auto& c : man.checks)
            std::printf("  [%s] %s (%s)\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                        c.detail.c_str());
        return man.all_checks_passed() ? 0 : 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"eoslab: edge-of-stability SGD dynamics laboratory"};
    app.require_subcommand(1);

    std::string config_path, preset, out_dir;
    long seed = -1;
    int threads = 0;
    bool check = false;

    if (const char* env = std::getenv("EOSLAB_THREADS")) threads = std::atoi(env);

    auto* run = app.add_subcommand("run", "run an experiment preset");
    run->add_option("config", config_path, "experiment config file (key = value format)");
    run->add_option("--preset", preset, "preset name, overrides the config file");
    run->add_option("--seed", seed, "seed override");
    run->add_option("--out", out_dir, "output directory override");
    run->add_option("--threads", threads, "worker threads (default: EOSLAB_THREADS or 1)");
    run->add_flag("--check", check, "evaluate preset acceptance thresholds; exit code reflects them");

    auto* presets = app.add_subcommand("presets", "list available presets");

    CLI11_PARSE(app, argc, argv);

    try {
        if (presets->parsed()) {
            for (const char* name : {"fig-sde", "decorrelation", "gd-baseline", "gap-scan-batch",
                                     "noise-scan", "coupling", "batch-sharpness"})
                std::printf("%s\n", name);
            return 0;
        }
        return run_command(config_path, preset, seed, out_dir, threads, check);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
