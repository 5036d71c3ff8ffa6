#pragma once

// Experiment registry, configuration and runners for the benchmark problems:
// offline diagnostics (1D periodic, 2D double well, t_phase spread) and
// serial-versus-ParRep exit comparisons (2D periodic, entropic maze, LJ7).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "parrep/parrep.hpp"
#include "parrep/report.hpp"
#include "parrep/stats.hpp"

namespace parrep {

enum class ExperimentKind { fv_diagnostics, independent_diagnostics, tphase_distribution, exit_comparison };

struct RegistryEntry {
    std::string name;
    ExperimentKind kind;
    std::string description;
};

const std::vector<RegistryEntry>& registry();
const RegistryEntry& registry_entry(const std::string& name); // throws ConfigError

struct ExperimentConfig {
    std::string name;

    // system
    std::string potential = "cosine";     // free | quadratic | cosine | double-well | lj7
    std::size_t dimension = 2;
    double amplitude = 1.0;               // cosine amplitude or quadratic stiffness
    std::string partition = "grid";       // grid | maze | lj7-basins | none
    std::string observables = "per2d";    // per1d | per2d | ent2d | dw2d | lj7
    double beta = 3.0;
    double dt = 1e-4;
    Position x0 = {0.5, 0.5};
    std::size_t lj7_check_interval = 1;

    // ParRep
    std::size_t replicas = 100;
    std::vector<double> tols = {0.05};
    std::uint64_t check_stride = 10;
    std::uint64_t min_checks = 10;
    bool run_serial = true;
    bool run_parrep = true;
    std::string dephasing = "fleming-viot"; // fleming-viot | rejection
    double rejection_t_phase = 0.0;

    // stopping
    std::string stop = "exit-state";        // exit-state | reach-state | leave-region | time-cap
    std::int64_t stop_target = 0;           // reach-state: maze room
    std::int64_t region_radius = 1;         // leave-region: grid cells with max(|i|,|j|) <= radius
    double time_cap = 1e9;

    // diagnostics experiments
    double t_max = 2.0;
    std::vector<double> snapshot_times;
    std::size_t histogram_bins = 40;
    std::vector<std::size_t> replica_sweep = {10, 100, 1000};

    // run control
    std::size_t realizations = 1000;
    std::uint64_t seed = 20140607;
    std::string out_dir = "out";
    bool paper_scale = false;
    std::size_t threads = 0; // 0: hardware concurrency

    void validate() const;
};

// Registry defaults for a named experiment.
ExperimentConfig defaults_for(const std::string& name);

// Reads an INI-style file (sections [experiment], [system], [parrep],
// [stopping], [diagnostics], [run]) on top of the registry defaults, or a
// manifest/config JSON written by a previous run.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config_text(const std::string& ini_text);

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);

// Switches realization counts and ensemble sizes to the published scale.
void apply_paper_scale(ExperimentConfig& cfg);

System build_system(const ExperimentConfig& cfg);
StoppingRule build_stopping(const ExperimentConfig& cfg);
std::vector<Observable> observables_for(const ExperimentConfig& cfg, const PotentialPtr& pot, const State& s);

// Serial runs use lineage 0; ParRep at tols[i] uses lineage i + 1.
StreamSeed realization_seed(const ExperimentConfig& cfg, std::size_t lineage, std::size_t realization);

// ---- exit comparisons ----

struct RealizationResult {
    std::size_t index = 0;
    bool completed = true;
    double exit_time = 0.0;
    std::string exit_label;
    double exit_coord = 0.0;  // boundary arclength for grid problems, NaN otherwise
    Phase phase = Phase::serial;
    double destination_energy = 0.0; // quenched energy for LJ7
    ParRepReport report;             // empty for serial runs
    std::vector<ExitEvent> events;
};

struct MethodResult {
    std::string method; // "serial" or "parrep"
    std::optional<double> tol;
    std::vector<RealizationResult> runs;
    SummaryRow summary;
    std::optional<KsResult> ks_time;  // against serial
    std::optional<KsResult> ks_coord; // against serial, grid problems
    std::vector<std::pair<std::string, ClopperPearsonInterval>> label_intervals;
    std::vector<std::pair<std::string, std::size_t>> label_counts;
};

struct ExitExperimentResult {
    ExperimentConfig config;
    std::vector<MethodResult> methods;
};

ExitExperimentResult run_exit_experiment(const ExperimentConfig& cfg);

// ---- offline diagnostics ----

struct EnsembleSnapshot {
    double t = 0.0;
    std::vector<double> positions; // replicas * d
};

struct DiagnosticsResult {
    ExperimentConfig config;
    std::vector<std::string> observable_names;
    std::vector<RhatSample> series;
    std::vector<EnsembleSnapshot> snapshots;
    bool extinct = false;
};

// Fleming-Viot ensemble inside the state of x0, run to t_max.
DiagnosticsResult run_fv_diagnostics(const ExperimentConfig& cfg);

// N independent trajectories with no killing (canonical sampling).
DiagnosticsResult dw2d_independent_diagnostics(const ExperimentConfig& cfg);

struct TphaseSweep {
    std::size_t replicas = 0;
    std::vector<double> t_phase; // realizations that reached stationarity
    std::size_t failures = 0;
};

struct TphaseResult {
    ExperimentConfig config;
    std::vector<TphaseSweep> sweeps;
};

TphaseResult run_tphase_distribution(const ExperimentConfig& cfg);

// ---- output ----

// Writes CSVs, summary.json and manifest.json into cfg.out_dir and returns
// the written file names.
std::vector<std::string> write_outputs(const ExitExperimentResult& r);
std::vector<std::string> write_outputs(const DiagnosticsResult& r);
std::vector<std::string> write_outputs(const TphaseResult& r);

std::string code_version();

} // namespace parrep
