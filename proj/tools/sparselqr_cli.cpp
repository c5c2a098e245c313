// Command-line front end: synthesize a single controller, run a sweep over
// the cardinality budget, and post-process archives into reports.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "sparselqr/runner.hpp"

namespace {

using namespace sparselqr;

int exit_status(const SweepArchive& archive) {
    bool any_ok = false, any_bad = false;
    for (const auto& rec : archive.records) {
        (rec.converged ? any_ok : any_bad) = true;
    }
    if (!any_ok) return 1;
    return any_bad ? 2 : 0;
}

RunConfig load_config(const std::string& path, const std::string& out_override) {
    RunConfig cfg = load_run_config(path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    return cfg;
}

int cmd_synthesize(const std::string& config_path, const std::string& out_dir,
                   const std::string& solver, int s) {
    RunConfig cfg = load_config(config_path, out_dir);
    if (!solver.empty()) cfg.solvers = {solver};
    if (s >= 0) cfg.sweep = {s};
    if (cfg.solvers.size() != 1) {
        std::fprintf(stderr, "synthesize: pick exactly one solver (--solver)\n");
        return 1;
    }
    cfg.validate();
    const SystemBundle bundle = build_bundle(cfg);
    const SweepArchive archive = run_sweep(cfg, bundle);
    std::filesystem::create_directories(cfg.out_dir);
    save_archive(cfg.out_dir + "/archive.json", archive);
    emit_report(cfg, bundle, archive);
    for (const auto& rec : archive.records) {
        std::printf("%s s=%d J=%s converged=%d card_off=%d\n", rec.solver.c_str(), rec.s,
                    format_number(rec.J).c_str(), rec.converged ? 1 : 0, rec.card_off);
    }
    return exit_status(archive);
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir) {
    const RunConfig cfg = load_config(config_path, out_dir);
    const SystemBundle bundle = build_bundle(cfg);
    const SweepArchive archive = run_sweep(cfg, bundle);
    std::filesystem::create_directories(cfg.out_dir);
    save_archive(cfg.out_dir + "/archive.json", archive);
    emit_report(cfg, bundle, archive);
    std::printf("wrote %s/{archive.json,energies.csv,summary.json}\n", cfg.out_dir.c_str());
    return exit_status(archive);
}

int cmd_allocate(const std::string& config_path, const std::string& out_dir) {
    const RunConfig cfg = load_config(config_path, out_dir);
    const SweepArchive archive = load_archive(cfg.out_dir + "/archive.json");
    const auto reports = allocation_from_archive(archive, cfg.sweep);
    for (const auto& rep : reports) {
        std::printf("s=%d v_soc=%s xi=%s success=%d\n", rep.s, format_number(rep.v_soc).c_str(),
                    format_number(rep.xi).c_str(), rep.bargaining_success ? 1 : 0);
    }
    return 0;
}

int cmd_report(const std::string& config_path, const std::string& out_dir) {
    const RunConfig cfg = load_config(config_path, out_dir);
    const SystemBundle bundle = build_bundle(cfg);
    const SweepArchive archive = load_archive(cfg.out_dir + "/archive.json");
    emit_report(cfg, bundle, archive);
    std::printf("wrote reports to %s\n", cfg.out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparsity-constrained LQR synthesis and cost allocation"};
    app.require_subcommand(1);

    std::string config_path, out_dir, solver;
    int s = -1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON run configuration")->required();
        cmd->add_option("--out", out_dir, "output directory (overrides config)");
    };

    CLI::App* synth = app.add_subcommand("synthesize", "single solve at one budget");
    add_common(synth);
    synth->add_option("--solver", solver, "centralized | social-game | cne | dne");
    synth->add_option("--s", s, "off-diagonal cardinality budget");

    CLI::App* sweep = app.add_subcommand("sweep", "run all configured solvers over the sweep");
    add_common(sweep);

    CLI::App* alloc = app.add_subcommand("allocate", "cost allocation from an existing archive");
    add_common(alloc);

    CLI::App* report = app.add_subcommand("report", "re-emit reports from an existing archive");
    add_common(report);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synthesize(config_path, out_dir, solver, s);
        if (sweep->parsed()) return cmd_sweep(config_path, out_dir);
        if (alloc->parsed()) return cmd_allocate(config_path, out_dir);
        if (report->parsed()) return cmd_report(config_path, out_dir);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
