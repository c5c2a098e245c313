#pragma once

#include <string>
#include <vector>

#include "sparselqr/allocation.hpp"
#include "sparselqr/json_io.hpp"
#include "sparselqr/wac.hpp"

namespace sparselqr {

// Run configuration, parsed from a JSON file.  The system comes either from
// a specification file ("system_file") or from the synthetic generator
// ("synthetic": ring shorthand or explicit machine parameters).
struct RunConfig {
    std::string system_file;  // empty when synthetic
    bool synthetic = false;
    SwingParams swing;

    std::vector<int> agents;           // nodes per agent
    std::vector<int> sweep;            // ascending, unique
    std::vector<std::string> solvers;  // subset of {centralized, social-game, cne, dne}
    SolverOptions options;
    bool eps_polish_set = false;  // games default to 1e-3 unless overridden
    std::string out_dir = "out";

    void validate() const;
    bool has_solver(const std::string& name) const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// One (solver, s) result.  A failed solve keeps converged=false with no gain.
struct ArchiveRecord {
    std::string solver;
    int s = 0;
    double J = 0.0;                 // social J, or sum of J_agents for cne/dne
    std::vector<double> J_agents;   // per-agent selfish energies at K
    bool converged = false;
    int card_off = 0;
    double wall_seconds = 0.0;
    std::vector<std::tuple<int, int, double>> K_triplets;
    std::string error;  // diagnostic for failed solves
};

struct SweepArchive {
    std::vector<ArchiveRecord> records;

    const ArchiveRecord* find(const std::string& solver, int s) const;
    const ArchiveRecord* find_dne() const;
};

std::string archive_to_json(const SweepArchive& archive);
SweepArchive archive_from_json(const std::string& text);
void save_archive(const std::string& path, const SweepArchive& archive);
SweepArchive load_archive(const std::string& path);

// The system plus everything the solvers need, resolved from a RunConfig.
struct SystemBundle {
    LtiSystem sys;
    AgentPartition part;
    WacWeights weights;
    std::vector<int> agents;
};

SystemBundle build_bundle(const RunConfig& config);

// Runs every selected solver over the sweep (DNE once; warm-start chains for
// the others) and records each point.  Per-point failures are recorded and
// the run continues.
SweepArchive run_sweep(const RunConfig& config, const SystemBundle& bundle);

// Largest relative replay error: |J(K_stored) - J_stored| / max(1, |J_stored|)
// over all converged records.
double archive_replay_error(const SweepArchive& archive, const SystemBundle& bundle);

// Writes energies.csv, allocation.csv (when centralized+cne+dne are present)
// and summary.json into config.out_dir.  Throws MissingSolverData when a
// requested table lacks its inputs.
void emit_report(const RunConfig& config, const SystemBundle& bundle, const SweepArchive& archive);

// Allocation rows derived from an archive: monotone-corrected social curve
// against the coupled-game energies at each sweep point.
std::vector<AllocationReport> allocation_from_archive(const SweepArchive& archive,
                                                      const std::vector<int>& sweep);

}  // namespace sparselqr
