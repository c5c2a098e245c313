#include "sparselqr/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace sparselqr {

using nlohmann::json;

namespace {

const std::vector<std::string> kSolverNames = {"centralized", "social-game", "cne", "dne"};

std::vector<double> to_doubles(const json& j, const std::string& name) {
    if (!j.is_array()) throw ValidationError(name + ": expected an array");
    std::vector<double> out;
    for (const auto& v : j) out.push_back(v.get<double>());
    return out;
}

SwingParams parse_swing(const json& j) {
    SwingParams p;
    if (j.contains("generators")) {
        p = SwingParams::ring(j.at("generators").get<int>(),
                              j.value("coupling_strength", 1.0));
    }
    if (j.contains("inertia")) p.inertia = to_doubles(j.at("inertia"), "inertia");
    if (j.contains("damping")) p.damping = to_doubles(j.at("damping"), "damping");
    if (j.contains("tau")) p.tau = to_doubles(j.at("tau"), "tau");
    if (j.contains("coupling")) {
        const auto& rows = j.at("coupling");
        const int n = static_cast<int>(rows.size());
        p.coupling = MatrixXd::Zero(n, n);
        for (int r = 0; r < n; ++r) {
            const auto row = to_doubles(rows.at(r), "coupling");
            if (static_cast<int>(row.size()) != n) {
                throw ValidationError("coupling: matrix must be square");
            }
            for (int c = 0; c < n; ++c) p.coupling(r, c) = row[c];
        }
    }
    if (j.contains("grounding")) p.grounding = j.at("grounding").get<double>();
    if (j.contains("disturbance_node")) p.disturbance_node = j.at("disturbance_node").get<int>();
    p.validate();
    return p;
}

void parse_options(const json& j, RunConfig& cfg) {
    SolverOptions& o = cfg.options;
    if (j.contains("eps_abs")) o.eps_abs = j.at("eps_abs").get<double>();
    if (j.contains("eps_rel")) o.eps_rel = j.at("eps_rel").get<double>();
    if (j.contains("eps_polish")) {
        o.eps_polish = j.at("eps_polish").get<double>();
        cfg.eps_polish_set = true;
    }
    if (j.contains("max_outer_iters")) o.max_outer_iters = j.at("max_outer_iters").get<int>();
    if (j.contains("max_backtracks")) o.armijo.max_backtracks = j.at("max_backtracks").get<int>();
}

SolverOptions game_options(const RunConfig& cfg) {
    SolverOptions o = cfg.options;
    if (!cfg.eps_polish_set) o.eps_polish = 1e-3;
    return o;
}

std::vector<std::tuple<int, int, double>> gain_triplets(const MatrixXd& K) {
    std::vector<std::tuple<int, int, double>> out;
    for (int r = 0; r < K.rows(); ++r)
        for (int c = 0; c < K.cols(); ++c)
            if (std::abs(K(r, c)) > kNumericalZero) out.emplace_back(r, c, K(r, c));
    return out;
}

MatrixXd gain_from_triplets(const std::vector<std::tuple<int, int, double>>& triplets, int rows,
                            int cols) {
    MatrixXd K = MatrixXd::Zero(rows, cols);
    for (const auto& [r, c, v] : triplets) K(r, c) = v;
    return K;
}

double record_energy(const ArchiveRecord& rec, const SystemBundle& bundle, const MatrixXd& K) {
    const FeedbackGain gain(K, bundle.sys.structure);
    if (rec.solver == "cne" || rec.solver == "dne") {
        double total = 0.0;
        for (int i = 0; i < bundle.part.num_agents(); ++i) {
            total += selfish_value(bundle.sys, bundle.part, bundle.weights.agents, i, gain).value;
        }
        return total;
    }
    return social_value(bundle.sys, bundle.weights.social, gain).value;
}

std::vector<double> agent_energies(const SystemBundle& bundle, const FeedbackGain& K) {
    std::vector<double> out;
    for (int i = 0; i < bundle.part.num_agents(); ++i) {
        out.push_back(selfish_value(bundle.sys, bundle.part, bundle.weights.agents, i, K).value);
    }
    return out;
}

ArchiveRecord failed_record(const std::string& solver, int s, const std::string& what,
                            double seconds) {
    ArchiveRecord rec;
    rec.solver = solver;
    rec.s = s;
    rec.J = std::numeric_limits<double>::quiet_NaN();
    rec.converged = false;
    rec.wall_seconds = seconds;
    rec.error = what;
    return rec;
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

void RunConfig::validate() const {
    if (!synthetic && system_file.empty()) {
        throw ValidationError("system: either a file or synthetic parameters required");
    }
    if (agents.empty()) throw ValidationError("agents: at least one agent required");
    if (sweep.empty()) throw ValidationError("sweep: at least one s value required");
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        if (sweep[i] < 0) throw ValidationError("sweep: s values must be nonnegative");
        if (i > 0 && sweep[i] <= sweep[i - 1]) {
            throw ValidationError("sweep: s values must be ascending and unique");
        }
    }
    if (solvers.empty()) throw ValidationError("solvers: at least one solver required");
    for (const auto& name : solvers) {
        if (std::find(kSolverNames.begin(), kSolverNames.end(), name) == kSolverNames.end()) {
            throw ValidationError("solvers: unknown solver '" + name + "'");
        }
    }
}

bool RunConfig::has_solver(const std::string& name) const {
    return std::find(solvers.begin(), solvers.end(), name) != solvers.end();
}

RunConfig parse_run_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    RunConfig cfg;
    if (!j.contains("system")) throw ValidationError("system: missing field");
    const json& sys = j.at("system");
    if (sys.contains("file")) {
        cfg.system_file = sys.at("file").get<std::string>();
    } else if (sys.contains("synthetic")) {
        cfg.synthetic = true;
        cfg.swing = parse_swing(sys.at("synthetic"));
    } else {
        throw ValidationError("system: need 'file' or 'synthetic'");
    }
    if (j.contains("agents")) {
        for (const auto& v : j.at("agents")) cfg.agents.push_back(v.get<int>());
    }
    if (!j.contains("sweep")) throw ValidationError("sweep: missing field");
    for (const auto& v : j.at("sweep")) cfg.sweep.push_back(v.get<int>());
    if (j.contains("solvers")) {
        for (const auto& v : j.at("solvers")) cfg.solvers.push_back(v.get<std::string>());
    } else {
        cfg.solvers = kSolverNames;
    }
    if (j.contains("options")) parse_options(j.at("options"), cfg);
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

const ArchiveRecord* SweepArchive::find(const std::string& solver, int s) const {
    for (const auto& rec : records) {
        if (rec.solver == solver && rec.s == s) return &rec;
    }
    return nullptr;
}

const ArchiveRecord* SweepArchive::find_dne() const {
    for (const auto& rec : records) {
        if (rec.solver == "dne") return &rec;
    }
    return nullptr;
}

std::string archive_to_json(const SweepArchive& archive) {
    json out = json::array();
    for (const auto& rec : archive.records) {
        json r;
        r["solver"] = rec.solver;
        r["s"] = rec.s;
        r["J"] = rec.J;
        r["J_agents"] = rec.J_agents;
        r["converged"] = rec.converged;
        r["card_off"] = rec.card_off;
        r["wall_seconds"] = rec.wall_seconds;
        json trips = json::array();
        for (const auto& [row, col, v] : rec.K_triplets) {
            trips.push_back(json::array({row, col, v}));
        }
        r["K"] = std::move(trips);
        if (!rec.error.empty()) r["error"] = rec.error;
        out.push_back(std::move(r));
    }
    return out.dump(2);
}

SweepArchive archive_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("archive: ") + e.what());
    }
    SweepArchive archive;
    for (const auto& r : j) {
        ArchiveRecord rec;
        rec.solver = r.at("solver").get<std::string>();
        rec.s = r.at("s").get<int>();
        rec.J = r.at("J").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                    : r.at("J").get<double>();
        for (const auto& v : r.at("J_agents")) rec.J_agents.push_back(v.get<double>());
        rec.converged = r.at("converged").get<bool>();
        rec.card_off = r.at("card_off").get<int>();
        rec.wall_seconds = r.at("wall_seconds").get<double>();
        for (const auto& t : r.at("K")) {
            rec.K_triplets.emplace_back(t.at(0).get<int>(), t.at(1).get<int>(),
                                        t.at(2).get<double>());
        }
        if (r.contains("error")) rec.error = r.at("error").get<std::string>();
        archive.records.push_back(std::move(rec));
    }
    return archive;
}

void save_archive(const std::string& path, const SweepArchive& archive) {
    std::ofstream out(path);
    if (!out) throw ValidationError("archive: cannot write " + path);
    out << archive_to_json(archive) << "\n";
}

SweepArchive load_archive(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("archive: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return archive_from_json(ss.str());
}

SystemBundle build_bundle(const RunConfig& config) {
    SystemBundle bundle;
    if (config.synthetic) {
        bundle.sys = synth_power_system(config.swing);
        bundle.agents = config.agents;
    } else {
        SystemSpec spec = load_system_json(config.system_file);
        bundle.sys = std::move(spec.system);
        bundle.agents = config.agents.empty() ? spec.agents : config.agents;
    }
    bundle.part = AgentPartition(bundle.sys.structure, bundle.agents);
    bundle.weights = build_wac_weights(layout_of(bundle.sys.structure), bundle.part);
    return bundle;
}

SweepArchive run_sweep(const RunConfig& config, const SystemBundle& bundle) {
    SweepArchive archive;
    const SolverOptions game_opts = game_options(config);

    if (config.has_solver("dne")) {
        Stopwatch sw;
        try {
            GameResult res = decoupled_nash(bundle.sys, bundle.part, bundle.weights.agents,
                                            game_opts);
            ArchiveRecord rec;
            rec.solver = "dne";
            rec.s = 0;
            rec.J_agents = res.J_players;
            rec.J = 0.0;
            for (double v : res.J_players) rec.J += v;
            rec.converged = res.converged;
            rec.card_off = card_off(res.K);
            rec.wall_seconds = sw.seconds();
            rec.K_triplets = gain_triplets(res.K.K);
            archive.records.push_back(std::move(rec));
        } catch (const SolverError& e) {
            archive.records.push_back(failed_record("dne", 0, e.what(), sw.seconds()));
        }
    }

    if (config.has_solver("centralized")) {
        FeedbackGain warm;
        bool have_warm = false;
        for (int s : config.sweep) {
            Stopwatch sw;
            try {
                const FeedbackGain K0 =
                    have_warm ? warm : initial_gain(bundle.sys, bundle.weights.social, s);
                SolveResult res =
                    grasp_minimize(bundle.sys, bundle.weights.social, s, K0, config.options);
                if (!res.converged && have_warm) {
                    // The warm start can carry the iterate into a poor basin;
                    // retry from the budget-aware cold start and keep the better run.
                    try {
                        const SolveResult retry = grasp_minimize(
                            bundle.sys, bundle.weights.social, s,
                            initial_gain(bundle.sys, bundle.weights.social, s), config.options);
                        if (retry.converged || retry.J < res.J) res = retry;
                    } catch (const SolverError&) {
                    }
                }
                ArchiveRecord rec;
                rec.solver = "centralized";
                rec.s = s;
                rec.J = res.J;
                rec.J_agents = agent_energies(bundle, res.K);
                rec.converged = res.converged;
                rec.card_off = card_off(res.K);
                rec.wall_seconds = sw.seconds();
                rec.K_triplets = gain_triplets(res.K.K);
                archive.records.push_back(std::move(rec));
                warm = res.K;
                have_warm = true;
            } catch (const SolverError& e) {
                archive.records.push_back(failed_record("centralized", s, e.what(), sw.seconds()));
            }
        }
    }

    for (const std::string solver : {std::string("social-game"), std::string("cne")}) {
        if (!config.has_solver(solver)) continue;
        FeedbackGain warm;
        bool have_warm = false;
        for (int s : config.sweep) {
            Stopwatch sw;
            try {
                const FeedbackGain K0 =
                    have_warm ? warm : initial_gain(bundle.sys, bundle.weights.social);
                GameConfig cfg;
                cfg.mode = solver == "cne" ? GameMode::Selfish : GameMode::Social;
                cfg.s = s;
                cfg.opts = game_opts;
                GameResult res =
                    solver == "cne"
                        ? coupled_nash(bundle.sys, bundle.part, bundle.weights.agents, cfg, K0)
                        : social_game(bundle.sys, bundle.part, bundle.weights.social, cfg, K0);
                ArchiveRecord rec;
                rec.solver = solver;
                rec.s = s;
                if (solver == "cne") {
                    rec.J_agents = res.J_players;
                    rec.J = 0.0;
                    for (double v : res.J_players) rec.J += v;
                } else {
                    rec.J = res.J_social;
                    rec.J_agents = agent_energies(bundle, res.K);
                }
                rec.converged = res.converged;
                rec.card_off = card_off(res.K);
                rec.wall_seconds = sw.seconds();
                rec.K_triplets = gain_triplets(res.K.K);
                archive.records.push_back(std::move(rec));
                warm = res.K;
                have_warm = true;
            } catch (const SolverError& e) {
                archive.records.push_back(failed_record(solver, s, e.what(), sw.seconds()));
            }
        }
    }

    return archive;
}

double archive_replay_error(const SweepArchive& archive, const SystemBundle& bundle) {
    double worst = 0.0;
    for (const auto& rec : archive.records) {
        if (!rec.converged && !std::isfinite(rec.J)) continue;
        const MatrixXd K = gain_from_triplets(rec.K_triplets, bundle.sys.num_inputs(),
                                              bundle.sys.num_states());
        const double J = record_energy(rec, bundle, K);
        worst = std::max(worst, std::abs(J - rec.J) / std::max(1.0, std::abs(rec.J)));
    }
    return worst;
}

std::vector<AllocationReport> allocation_from_archive(const SweepArchive& archive,
                                                      const std::vector<int>& sweep) {
    const ArchiveRecord* dne = archive.find_dne();
    if (dne == nullptr || !dne->converged) {
        throw MissingSolverDataError("allocation requires a converged dne record");
    }
    std::vector<std::pair<int, double>> soc_series;
    std::vector<const ArchiveRecord*> cne_records;
    for (int s : sweep) {
        const ArchiveRecord* cen = archive.find("centralized", s);
        const ArchiveRecord* cne = archive.find("cne", s);
        if (cen == nullptr || cne == nullptr) {
            throw MissingSolverDataError("allocation requires centralized and cne records at s=" +
                                         std::to_string(s));
        }
        if (!cen->converged || !cne->converged) continue;  // infeasible point, excluded
        soc_series.emplace_back(s, cen->J);
        cne_records.push_back(cne);
    }
    const auto corrected = monotone_envelope(soc_series);

    std::vector<AllocationReport> out;
    for (std::size_t i = 0; i < corrected.size(); ++i) {
        SweepPoint pt;
        pt.s = corrected[i].first;
        pt.J_soc = corrected[i].second;
        pt.J_coupled = cne_records[i]->J_agents;
        pt.J_coupled_total = 0.0;
        for (double v : pt.J_coupled) pt.J_coupled_total += v;
        pt.feasible = true;
        out.push_back(allocate(dne->J_agents, pt));
    }
    return out;
}

namespace {

void write_energies_csv(const std::string& path, const RunConfig& config,
                        const SweepArchive& archive, int num_agents) {
    std::ofstream out(path);
    if (!out) throw ValidationError("report: cannot write " + path);
    out << "s,solver,agent,J,card_off,converged\n";
    for (const auto& name : kSolverNames) {
        if (!config.has_solver(name)) continue;
        for (const auto& rec : archive.records) {
            if (rec.solver != name) continue;
            out << rec.s << "," << rec.solver << ",total," << format_number(rec.J) << ","
                << rec.card_off << "," << (rec.converged ? 1 : 0) << "\n";
            for (int i = 0; i < static_cast<int>(rec.J_agents.size()) && i < num_agents; ++i) {
                out << rec.s << "," << rec.solver << "," << i << ","
                    << format_number(rec.J_agents[i]) << "," << rec.card_off << ","
                    << (rec.converged ? 1 : 0) << "\n";
            }
        }
    }
}

void write_allocation_csv(const std::string& path, const std::vector<AllocationReport>& reports,
                          int num_agents) {
    std::ofstream out(path);
    if (!out) throw ValidationError("report: cannot write " + path);
    out << "s,v_soc";
    for (int i = 0; i < num_agents; ++i) out << ",v_" << i;
    for (int i = 0; i < num_agents; ++i) out << ",alpha_" << i;
    out << ",xi";
    for (int i = 0; i < num_agents; ++i) out << ",C_" << i;
    out << ",bargaining_success\n";
    for (const auto& rep : reports) {
        out << rep.s << "," << format_number(rep.v_soc);
        for (double v : rep.v) out << "," << format_number(v);
        for (double v : rep.alpha) out << "," << format_number(v);
        out << "," << format_number(rep.xi);
        if (rep.degenerate) {
            for (int i = 0; i < num_agents; ++i) out << ",";
        } else {
            for (double v : rep.cost_fraction) out << "," << format_number(v);
        }
        out << "," << (rep.bargaining_success ? 1 : 0) << "\n";
    }
}

}  // namespace

void emit_report(const RunConfig& config, const SystemBundle& bundle,
                 const SweepArchive& archive) {
    std::filesystem::create_directories(config.out_dir);
    const int r = bundle.part.num_agents();

    write_energies_csv(config.out_dir + "/energies.csv", config, archive, r);

    const bool can_allocate = config.has_solver("centralized") && config.has_solver("cne") &&
                              config.has_solver("dne");
    if (can_allocate) {
        write_allocation_csv(config.out_dir + "/allocation.csv",
                             allocation_from_archive(archive, config.sweep), r);
    }

    json summary;
    summary["agents"] = bundle.agents;
    summary["states"] = bundle.sys.num_states();
    summary["inputs"] = bundle.sys.num_inputs();
    summary["sweep"] = config.sweep;
    summary["solvers"] = config.solvers;
    summary["allocation_emitted"] = can_allocate;
    json recs = json::array();
    double total_seconds = 0.0;
    for (const auto& rec : archive.records) {
        json r_json;
        r_json["solver"] = rec.solver;
        r_json["s"] = rec.s;
        r_json["converged"] = rec.converged;
        r_json["card_off"] = rec.card_off;
        r_json["wall_seconds"] = rec.wall_seconds;
        if (!rec.error.empty()) r_json["error"] = rec.error;
        recs.push_back(std::move(r_json));
        total_seconds += rec.wall_seconds;
    }
    summary["records"] = std::move(recs);
    summary["total_wall_seconds"] = total_seconds;

    std::ofstream out(config.out_dir + "/summary.json");
    if (!out) throw ValidationError("report: cannot write summary.json");
    out << summary.dump(2) << "\n";
}

}  // namespace sparselqr
