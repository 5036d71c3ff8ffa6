#include "parrep/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "parrep/errors.hpp"
#include "parrep/lj7.hpp"

namespace parrep {

namespace fs = std::filesystem;
using nlohmann::json;

std::string code_version()
{
    return "parrep 1.0.0";
}

const std::vector<RegistryEntry>& registry()
{
    static const std::vector<RegistryEntry> entries = {
        {"per1d-diagnostics", ExperimentKind::fv_diagnostics,
         "Fleming-Viot Gelman-Rubin series and histograms, V=-2cos(pi x) on (-1,1)"},
        {"dw2d-pseudoconv", ExperimentKind::independent_diagnostics,
         "independent replicas in the 2D double well: pseudo-convergence of the diagnostics"},
        {"tphase-dist", ExperimentKind::tphase_distribution, "spread of t_phase against ensemble size, 1D periodic"},
        {"per2d-single", ExperimentKind::exit_comparison, "escape from (-1,1)^2, V=-cos(pi x)-cos(pi y)"},
        {"per2d-multi", ExperimentKind::exit_comparison, "escape from (-3,3)^2 across several states"},
        {"ent2d-single", ExperimentKind::exit_comparison, "Brownian escape from the middle room of the maze"},
        {"ent2d-multi", ExperimentKind::exit_comparison, "Brownian passage from room 1 to room 3"},
        {"lj7-single", ExperimentKind::exit_comparison, "first conformation change of the planar LJ7 cluster"},
    };
    return entries;
}

const RegistryEntry& registry_entry(const std::string& name)
{
    for (const auto& e : registry())
        if (e.name == name) return e;
    throw ConfigError("unknown experiment '" + name + "'");
}

void ExperimentConfig::validate() const
{
    registry_entry(name);
    if (!(beta > 0.0) || !(dt > 0.0)) throw ConfigError("beta and dt must be positive");
    if (replicas < 1) throw ConfigError("replicas must be positive");
    if (realizations < 1) throw ConfigError("realizations must be positive");
    for (double t : tols)
        if (!(t > 0.0)) throw ConfigError("TOL must be positive");
    if (check_stride < 1) throw ConfigError("check_stride must be at least 1");
    if (x0.size() != dimension) throw ConfigError("x0 does not match the dimension");
    for (double v : x0)
        if (!std::isfinite(v)) throw ConfigError("x0 must be finite");
    if (!(t_max > 0.0)) throw ConfigError("t_max must be positive");
}

ExperimentConfig defaults_for(const std::string& name)
{
    registry_entry(name);
    ExperimentConfig c;
    c.name = name;
    if (name == "per1d-diagnostics" || name == "tphase-dist") {
        c.potential = "cosine";
        c.dimension = 1;
        c.amplitude = 2.0;
        c.partition = "grid";
        c.observables = "per1d";
        c.beta = 1.0;
        c.x0 = {0.99};
        c.tols = {0.1};
        c.replicas = 10000;
        c.t_max = 2.0;
        c.snapshot_times = {0.05, 0.1, 0.2, 0.4, 1.0, 1.5};
        if (name == "tphase-dist") {
            c.realizations = 100;
            c.t_max = 20.0;
        }
    } else if (name == "dw2d-pseudoconv") {
        c.potential = "double-well";
        c.partition = "none";
        c.observables = "dw2d";
        c.beta = 5.0;
        c.x0 = {-1.0, 0.0};
        c.replicas = 2000;
        c.tols = {0.1};
        c.t_max = 50.0;
        c.snapshot_times = {20.0, 50.0};
    } else if (name == "per2d-single" || name == "per2d-multi") {
        c.potential = "cosine";
        c.amplitude = 1.0;
        c.partition = "grid";
        c.observables = "per2d";
        c.beta = 3.0;
        c.x0 = {0.5, 0.5};
        if (name == "per2d-multi") {
            c.stop = "leave-region";
            c.region_radius = 1;
            c.tols = {0.1};
        }
    } else if (name == "ent2d-single" || name == "ent2d-multi") {
        c.potential = "free";
        c.partition = "maze";
        c.observables = "ent2d";
        c.beta = 1.0;
        c.tols = {0.1};
        c.x0 = name == "ent2d-single" ? Position{5.5, 0.1} : Position{0.1, 0.1};
        if (name == "ent2d-multi") {
            c.stop = "reach-state";
            c.stop_target = 3;
            c.tols = {0.2};
        }
    } else if (name == "lj7-single") {
        c.potential = "lj7";
        c.dimension = 2 * lj7::kAtoms;
        c.partition = "lj7-basins";
        c.observables = "lj7";
        c.beta = 6.0;
        c.dt = 1e-3;
        c.x0 = lj7::hexagon();
        c.tols = {0.2};
    }
    return c;
}

void apply_paper_scale(ExperimentConfig& c)
{
    c.paper_scale = true;
    const auto kind = registry_entry(c.name).kind;
    if (kind == ExperimentKind::exit_comparison) {
        c.realizations = 100000;
        c.tols = {0.2, 0.1, 0.05, 0.01};
    } else if (kind == ExperimentKind::tphase_distribution) {
        c.realizations = 10000;
        c.replica_sweep = {10, 100, 1000, 10000};
    } else if (c.name == "dw2d-pseudoconv") {
        c.replicas = 10000;
        c.t_max = 2000.0;
        c.snapshot_times = {20.0, 500.0, 2000.0};
    } else {
        c.replicas = 10000;
    }
}

namespace {

template <class T>
std::vector<T> parse_list(const std::string& text)
{
    std::vector<std::string> parts;
    boost::split(parts, text, boost::is_any_of(", \t"), boost::token_compress_on);
    std::vector<T> out;
    for (auto& p : parts) {
        boost::trim(p);
        if (p.empty()) continue;
        std::istringstream is(p);
        T v;
        if (!(is >> v)) throw ConfigError("cannot parse list entry '" + p + "'");
        out.push_back(v);
    }
    return out;
}

void apply_ini(ExperimentConfig& c, const boost::property_tree::ptree& pt)
{
    auto get = [&](const char* key) { return pt.get_optional<std::string>(key); };
    auto num = [&](const char* key, auto& field) {
        if (auto v = get(key)) {
            std::istringstream is(*v);
            if (!(is >> field)) throw ConfigError(std::string("bad value for ") + key);
        }
    };
    if (auto v = get("experiment.seed")) c.seed = std::stoull(*v);
    num("experiment.realizations", c.realizations);
    if (auto v = get("experiment.out")) c.out_dir = *v;
    num("experiment.threads", c.threads);

    if (auto v = get("system.potential")) c.potential = *v;
    num("system.dimension", c.dimension);
    num("system.amplitude", c.amplitude);
    if (auto v = get("system.partition")) c.partition = *v;
    if (auto v = get("system.observables")) c.observables = *v;
    num("system.beta", c.beta);
    num("system.dt", c.dt);
    if (auto v = get("system.x0")) {
        c.x0 = parse_list<double>(*v);
        if (c.potential != "lj7") c.dimension = c.x0.size();
    }
    num("system.lj7_check_interval", c.lj7_check_interval);

    num("parrep.replicas", c.replicas);
    if (auto v = get("parrep.tol")) c.tols = parse_list<double>(*v);
    num("parrep.check_stride", c.check_stride);
    num("parrep.min_checks", c.min_checks);
    if (auto v = get("parrep.methods")) {
        c.run_serial = v->find("serial") != std::string::npos;
        c.run_parrep = v->find("parrep") != std::string::npos;
    }
    if (auto v = get("parrep.dephasing")) c.dephasing = *v;
    num("parrep.rejection_t_phase", c.rejection_t_phase);

    if (auto v = get("stopping.kind")) c.stop = *v;
    num("stopping.target", c.stop_target);
    num("stopping.region_radius", c.region_radius);
    num("stopping.time_cap", c.time_cap);

    num("diagnostics.t_max", c.t_max);
    if (auto v = get("diagnostics.snapshots")) c.snapshot_times = parse_list<double>(*v);
    num("diagnostics.bins", c.histogram_bins);
    if (auto v = get("diagnostics.replica_sweep")) c.replica_sweep = parse_list<std::size_t>(*v);
}

ExperimentConfig from_ptree(const boost::property_tree::ptree& pt)
{
    const auto name = pt.get_optional<std::string>("experiment.name");
    if (!name) throw ConfigError("config lacks [experiment] name");
    ExperimentConfig c = defaults_for(*name);
    apply_ini(c, pt);
    if (pt.get("experiment.paper_scale", false)) apply_paper_scale(c);
    c.validate();
    return c;
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text)
{
    boost::property_tree::ptree pt;
    std::istringstream is(text);
    try {
        boost::property_tree::ini_parser::read_ini(is, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return from_ptree(pt);
}

ExperimentConfig load_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    if (path.extension() == ".json") {
        try {
            return config_from_json(json::parse(ss.str()));
        } catch (const json::exception& e) {
            throw ConfigError(std::string("bad JSON config: ") + e.what());
        }
    }
    return parse_config_text(ss.str());
}

json to_json(const ExperimentConfig& c)
{
    return json{{"name", c.name},
                {"potential", c.potential},
                {"dimension", c.dimension},
                {"amplitude", c.amplitude},
                {"partition", c.partition},
                {"observables", c.observables},
                {"beta", c.beta},
                {"dt", c.dt},
                {"x0", c.x0},
                {"lj7_check_interval", c.lj7_check_interval},
                {"replicas", c.replicas},
                {"tols", c.tols},
                {"check_stride", c.check_stride},
                {"min_checks", c.min_checks},
                {"run_serial", c.run_serial},
                {"run_parrep", c.run_parrep},
                {"dephasing", c.dephasing},
                {"rejection_t_phase", c.rejection_t_phase},
                {"stop", c.stop},
                {"stop_target", c.stop_target},
                {"region_radius", c.region_radius},
                {"time_cap", c.time_cap},
                {"t_max", c.t_max},
                {"snapshot_times", c.snapshot_times},
                {"histogram_bins", c.histogram_bins},
                {"replica_sweep", c.replica_sweep},
                {"realizations", c.realizations},
                {"seed", c.seed},
                {"out_dir", c.out_dir},
                {"paper_scale", c.paper_scale}};
}

ExperimentConfig config_from_json(const json& in)
{
    const json& j = in.contains("config") ? in.at("config") : in;
    ExperimentConfig c = defaults_for(j.at("name").get<std::string>());
    auto opt = [&](const char* key, auto& field) {
        if (j.contains(key)) j.at(key).get_to(field);
    };
    opt("potential", c.potential);
    opt("dimension", c.dimension);
    opt("amplitude", c.amplitude);
    opt("partition", c.partition);
    opt("observables", c.observables);
    opt("beta", c.beta);
    opt("dt", c.dt);
    opt("x0", c.x0);
    opt("lj7_check_interval", c.lj7_check_interval);
    opt("replicas", c.replicas);
    opt("tols", c.tols);
    opt("check_stride", c.check_stride);
    opt("min_checks", c.min_checks);
    opt("run_serial", c.run_serial);
    opt("run_parrep", c.run_parrep);
    opt("dephasing", c.dephasing);
    opt("rejection_t_phase", c.rejection_t_phase);
    opt("stop", c.stop);
    opt("stop_target", c.stop_target);
    opt("region_radius", c.region_radius);
    opt("time_cap", c.time_cap);
    opt("t_max", c.t_max);
    opt("snapshot_times", c.snapshot_times);
    opt("histogram_bins", c.histogram_bins);
    opt("replica_sweep", c.replica_sweep);
    opt("realizations", c.realizations);
    opt("seed", c.seed);
    opt("out_dir", c.out_dir);
    opt("paper_scale", c.paper_scale);
    c.validate();
    return c;
}

// ---- system construction ----

namespace {

PotentialPtr make_potential(const ExperimentConfig& c)
{
    if (c.potential == "free") return std::make_shared<FreePotential>(c.dimension);
    if (c.potential == "quadratic") return std::make_shared<QuadraticPotential>(c.dimension, c.amplitude);
    if (c.potential == "cosine") return std::make_shared<CosinePotential>(c.dimension, c.amplitude);
    if (c.potential == "double-well") return std::make_shared<DoubleWell2D>();
    if (c.potential == "lj7") return std::make_shared<LennardJones2D>(lj7::kAtoms);
    throw ConfigError("unknown potential '" + c.potential + "'");
}

// Labels everything as one state; used for canonical sampling without exits.
class WholeSpace final : public Partition {
public:
    explicit WholeSpace(std::size_t dim) : dim_(dim) {}
    std::size_t dimension() const override { return dim_; }
    std::string kind() const override { return "none"; }
    State locate(std::span<const double> x) const override
    {
        State s;
        s.anchor.assign(dim_, 0.0);
        (void)x;
        return s;
    }
    bool contains(const State&, std::span<const double>) const override { return true; }

private:
    std::size_t dim_;
};

double center_of_mass_spread(std::span<const double> x)
{
    const std::size_t n = x.size() / 2;
    double cx = 0.0, cy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cx += x[2 * i];
        cy += x[2 * i + 1];
    }
    cx /= static_cast<double>(n);
    cy /= static_cast<double>(n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        s += (x[2 * i] - cx) * (x[2 * i] - cx) + (x[2 * i + 1] - cy) * (x[2 * i + 1] - cy);
    return s;
}

} // namespace

std::vector<Observable> observables_for(const ExperimentConfig& c, const PotentialPtr& pot, const State& s)
{
    const std::string& set = c.observables;
    if (set == "per1d") return {coordinate_observable(0, "x"), energy_observable(pot), distance_observable(s.anchor)};
    if (set == "per2d")
        return {coordinate_observable(0, "x"), coordinate_observable(1, "y"), energy_observable(pot),
                distance_observable(s.anchor)};
    if (set == "ent2d")
        return {coordinate_observable(0, "x"), coordinate_observable(1, "y"), distance_observable(s.anchor)};
    if (set == "dw2d")
        return {coordinate_observable(0, "x"), coordinate_observable(1, "y"), energy_observable(pot),
                distance_observable(Position(2, 0.0), "norm")};
    if (set == "lj7") {
        const auto ref = s.signature.empty() ? lj7::sorted_bonds(s.anchor) : s.signature;
        return {energy_observable(pot),
                {"cm_spread", [](std::span<const double> x) { return center_of_mass_spread(x); }},
                {"dist_C0", [ref](std::span<const double> x) { return lj7::bond_distance(x, ref); }}};
    }
    throw ConfigError("unknown observable set '" + set + "'");
}

System build_system(const ExperimentConfig& c)
{
    PotentialPtr pot = make_potential(c);
    if (pot->dimension() != c.dimension) throw ConfigError("potential dimension does not match x0");
    PartitionPtr part;
    ReflectingDomain domain;
    if (c.partition == "grid") {
        part = std::make_shared<GridPartition>(c.dimension);
    } else if (c.partition == "maze") {
        auto maze = std::make_shared<MazePartition>(MazeGeometry::standard());
        domain = maze->domain();
        part = maze;
    } else if (c.partition == "lj7-basins") {
        part = std::make_shared<lj7::Lj7BasinPartition>(pot, lj7::QuenchOptions{}, 0.5, c.lj7_check_interval);
    } else if (c.partition == "none") {
        part = std::make_shared<WholeSpace>(c.dimension);
    } else {
        throw ConfigError("unknown partition '" + c.partition + "'");
    }
    ObservableFactory factory = [c, pot](const State& s) { return observables_for(c, pot, s); };
    return System{Dynamics(pot, std::move(domain), c.dt, c.beta), part, factory};
}

StoppingRule build_stopping(const ExperimentConfig& c)
{
    StoppingRule r;
    if (c.stop == "exit-state") {
        r = StoppingRule::exit_state();
    } else if (c.stop == "reach-state") {
        r = StoppingRule::reach(StateId{c.stop_target, 0});
    } else if (c.stop == "leave-region") {
        const std::int64_t rad = c.region_radius;
        r = StoppingRule::leave([rad](const StateId& id) {
            return std::abs(id.major) <= rad && std::abs(id.minor) <= rad;
        });
    } else if (c.stop == "time-cap") {
        r.kind = StoppingRule::Kind::time_cap;
    } else {
        throw ConfigError("unknown stopping rule '" + c.stop + "'");
    }
    r.time_cap = c.time_cap;
    return r;
}

StreamSeed realization_seed(const ExperimentConfig& c, std::size_t lineage, std::size_t realization)
{
    return StreamSeed{c.seed, 0}.child(lineage).child(realization);
}

// ---- runners ----

namespace {

std::size_t thread_count(const ExperimentConfig& c)
{
    if (c.threads > 0) return c.threads;
    return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [0, n) on a pool; results are keyed by i so the merge
// order never depends on scheduling.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn)
{
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

std::string exit_label(const ExperimentConfig& c, const System& sys, const ExitEvent& e, double* energy)
{
    if (c.partition == "lj7-basins") {
        const auto& part = static_cast<const lj7::Lj7BasinPartition&>(*sys.partition);
        const State s = part.locate(e.position);
        if (energy) *energy = s.anchor_energy;
        return lj7::to_string(static_cast<lj7::Conformation>(s.id.major));
    }
    if (c.partition == "maze") return std::to_string(e.destination.major);
    return e.destination.str();
}

// Clockwise arclength of the exit point on the boundary of the box that was
// left, starting from the top-left corner.
double exit_coordinate(const ExperimentConfig& c, const ExitEvent& e)
{
    if (c.partition != "grid" || c.dimension != 2) return std::numeric_limits<double>::quiet_NaN();
    double cx = 0.0, cy = 0.0, half = 1.0;
    if (c.stop == "leave-region") {
        half = 2.0 * static_cast<double>(c.region_radius) + 1.0;
    } else {
        cx = 2.0 * static_cast<double>(e.source.major);
        cy = 2.0 * static_cast<double>(e.source.minor);
    }
    const double x = std::clamp(e.position[0] - cx, -half, half);
    const double y = std::clamp(e.position[1] - cy, -half, half);
    const double ox = std::abs(e.position[0] - cx) - half;
    const double oy = std::abs(e.position[1] - cy) - half;
    const double side = 2.0 * half;
    if (oy >= ox) {
        return e.position[1] - cy > 0 ? (x + half) : 2.0 * side + (half - x);
    }
    return e.position[0] - cx > 0 ? side + (half - y) : 3.0 * side + (y + half);
}

RealizationResult finish_realization(const ExperimentConfig& c, const System& sys, std::size_t index,
                                     std::vector<ExitEvent> events, bool completed)
{
    RealizationResult r;
    r.index = index;
    r.completed = completed && !events.empty();
    r.events = std::move(events);
    if (!r.events.empty()) {
        const ExitEvent& last = r.events.back();
        r.exit_time = last.time;
        r.phase = last.phase;
        r.exit_label = exit_label(c, sys, last, &r.destination_energy);
        r.exit_coord = exit_coordinate(c, last);
    }
    return r;
}

void attach_labels(MethodResult& m)
{
    std::map<std::string, std::size_t> counts;
    for (const auto& r : m.runs) ++counts[r.exit_label];
    const std::size_t n = m.runs.size();
    for (const auto& [label, k] : counts) {
        m.label_counts.emplace_back(label, k);
        m.label_intervals.emplace_back(label, clopper_pearson(k, n));
    }
}

std::vector<double> column(const MethodResult& m, double RealizationResult::*field)
{
    std::vector<double> v;
    for (const auto& r : m.runs)
        if (std::isfinite(r.*field)) v.push_back(r.*field);
    return v;
}

} // namespace

ExitExperimentResult run_exit_experiment(const ExperimentConfig& c)
{
    c.validate();
    if (registry_entry(c.name).kind != ExperimentKind::exit_comparison)
        throw ConfigError("'" + c.name + "' is not an exit-comparison experiment");
    const System sys = build_system(c);
    const StoppingRule stop = build_stopping(c);
    const std::size_t threads = thread_count(c);
    ExitExperimentResult out;
    out.config = c;

    if (c.run_serial) {
        MethodResult m;
        m.method = "serial";
        m.runs.resize(c.realizations);
        parallel_for(c.realizations, threads, [&](std::size_t i) {
            SerialRun run = run_serial(c.x0, sys, stop, realization_seed(c, 0, i));
            m.runs[i] = finish_realization(c, sys, i, std::move(run.events), run.completed);
        });
        std::vector<double> times = column(m, &RealizationResult::exit_time);
        m.summary = summarize_serial(times);
        attach_labels(m);
        out.methods.push_back(std::move(m));
    }

    if (c.run_parrep) {
        for (std::size_t ti = 0; ti < c.tols.size(); ++ti) {
            ParRepConfig pc;
            pc.replicas = c.replicas;
            pc.diagnostics = {c.tols[ti], c.check_stride, c.min_checks};
            if (c.dephasing == "rejection") {
                pc.dephasing = DephasingMode::rejection;
                pc.rejection_t_phase = c.rejection_t_phase;
            }
            MethodResult m;
            m.method = "parrep";
            m.tol = c.tols[ti];
            m.runs.resize(c.realizations);
            parallel_for(c.realizations, threads, [&](std::size_t i) {
                ParRepRun run = run_parrep(c.x0, sys, pc, stop, realization_seed(c, ti + 1, i));
                RealizationResult r = finish_realization(c, sys, i, std::move(run.events), run.report.completed);
                r.report = std::move(run.report);
                m.runs[i] = std::move(r);
            });
            std::vector<ParRepReport> reports;
            for (const auto& r : m.runs) reports.push_back(r.report);
            m.summary = summarize("parrep", c.tols[ti], reports);
            attach_labels(m);
            if (c.run_serial) {
                const MethodResult& serial = out.methods.front();
                m.ks_time = ks_two_sample(column(serial, &RealizationResult::exit_time),
                                          column(m, &RealizationResult::exit_time));
                const auto sc = column(serial, &RealizationResult::exit_coord);
                const auto pc2 = column(m, &RealizationResult::exit_coord);
                if (!sc.empty() && !pc2.empty()) m.ks_coord = ks_two_sample(sc, pc2);
            }
            out.methods.push_back(std::move(m));
        }
    }
    return out;
}

DiagnosticsResult run_fv_diagnostics(const ExperimentConfig& c)
{
    c.validate();
    const System sys = build_system(c);
    const State state = sys.partition->locate(c.x0);
    FvEnsemble ens(c.x0, c.replicas, state, realization_seed(c, 0, 0));
    DiagnosticsConfig dc{c.tols.empty() ? 0.1 : c.tols.front(), c.check_stride, c.min_checks};
    auto observables = sys.observables(state);
    DiagnosticsResult out;
    out.config = c;
    for (const auto& o : observables) out.observable_names.push_back(o.name);
    FvDephaser dephaser(ens, sys.dynamics, *sys.partition, std::move(observables), dc);

    const double dt = c.dt;
    const auto total = static_cast<std::uint64_t>(std::llround(c.t_max / dt));
    std::vector<std::uint64_t> snap_steps;
    for (double t : c.snapshot_times) snap_steps.push_back(static_cast<std::uint64_t>(std::llround(t / dt)));

    for (std::uint64_t s = 1; s <= total; ++s) {
        try {
            dephaser.step();
        } catch (const ExtinctionFault&) {
            out.extinct = true;
            break;
        }
        if (dephaser.checked_this_step()) out.series.push_back({ens.time(dt), dephaser.last_rhats()});
        if (std::find(snap_steps.begin(), snap_steps.end(), s) != snap_steps.end())
            out.snapshots.push_back({ens.time(dt), {ens.positions().begin(), ens.positions().end()}});
    }
    return out;
}

DiagnosticsResult dw2d_independent_diagnostics(const ExperimentConfig& c)
{
    c.validate();
    const System sys = build_system(c);
    const State state = sys.partition->locate(c.x0);
    auto observables = sys.observables(state);
    DiagnosticsResult out;
    out.config = c;
    for (const auto& o : observables) out.observable_names.push_back(o.name);

    const std::size_t n = c.replicas, d = c.dimension;
    std::vector<double> x(n * d);
    std::vector<NoiseStream> streams;
    streams.reserve(n);
    const StreamSeed base = realization_seed(c, 0, 0);
    for (std::size_t k = 0; k < n; ++k) {
        std::copy(c.x0.begin(), c.x0.end(), x.begin() + static_cast<std::ptrdiff_t>(k * d));
        streams.emplace_back(base.child(k));
    }
    RhatMonitor monitor(std::move(observables), n, d);
    Dynamics::Workspace ws(d);
    const double dt = c.dt;
    const auto total = static_cast<std::uint64_t>(std::llround(c.t_max / dt));
    const std::uint64_t record_every = std::max<std::uint64_t>(c.check_stride, total / 2000);
    std::vector<std::uint64_t> snap_steps;
    for (double t : c.snapshot_times) snap_steps.push_back(static_cast<std::uint64_t>(std::llround(t / dt)));

    for (std::uint64_t s = 1; s <= total; ++s) {
        monitor.update(x, dt);
        for (std::size_t k = 0; k < n; ++k) sys.dynamics.advance({x.data() + k * d, d}, streams[k], ws);
        const bool snap = std::find(snap_steps.begin(), snap_steps.end(), s) != snap_steps.end();
        if ((s >= c.min_checks && s % record_every == 0) || snap)
            out.series.push_back({static_cast<double>(s) * dt, monitor.rhats()});
        if (snap) out.snapshots.push_back({static_cast<double>(s) * dt, x});
    }
    return out;
}

TphaseResult run_tphase_distribution(const ExperimentConfig& c)
{
    c.validate();
    const System sys = build_system(c);
    const State state = sys.partition->locate(c.x0);
    DiagnosticsConfig dc{c.tols.empty() ? 0.1 : c.tols.front(), c.check_stride, c.min_checks};
    const auto cap = static_cast<std::uint64_t>(std::llround(c.t_max / c.dt));
    TphaseResult out;
    out.config = c;
    for (std::size_t si = 0; si < c.replica_sweep.size(); ++si) {
        const std::size_t n = c.replica_sweep[si];
        std::vector<std::optional<double>> samples(c.realizations);
        parallel_for(c.realizations, thread_count(c), [&](std::size_t i) {
            FvEnsemble ens(c.x0, n, state, realization_seed(c, si, i));
            try {
                auto r = run_fv_until(ens, sys.dynamics, *sys.partition, sys.observables(state), dc, cap);
                if (r.stationary) samples[i] = r.t_phase;
            } catch (const ExtinctionFault&) {
            }
        });
        TphaseSweep sw;
        sw.replicas = n;
        for (const auto& s : samples) {
            if (s) {
                sw.t_phase.push_back(*s);
            } else {
                ++sw.failures;
            }
        }
        out.sweeps.push_back(std::move(sw));
    }
    return out;
}

// ---- output ----

namespace {

json opt_json(const std::optional<double>& v)
{
    return v ? json(*v) : json(nullptr);
}

json row_json(const SummaryRow& r)
{
    return json{{"method", r.method},
                {"tol", opt_json(r.tol)},
                {"realizations", r.realizations},
                {"mean_t_phase", opt_json(r.mean_t_phase)},
                {"var_t_phase", opt_json(r.var_t_phase)},
                {"mean_T", opt_json(r.mean_exit_time)},
                {"mean_speedup", opt_json(r.mean_speedup)},
                {"pct_dephased", opt_json(r.pct_dephased)}};
}

json ks_json(const std::optional<KsResult>& k)
{
    if (!k) return nullptr;
    return json{{"D", k->statistic}, {"p", k->p_value}, {"verdict", k->pass ? "PASS" : "FAIL"}};
}

std::string method_stem(const MethodResult& m)
{
    if (!m.tol) return m.method;
    std::ostringstream os;
    os << m.method << "_tol" << *m.tol;
    return os.str();
}

std::ofstream open_out(const fs::path& p)
{
    std::ofstream f(p);
    if (!f) throw ConfigError("cannot write " + p.string());
    f << std::setprecision(17);
    return f;
}

void write_manifest(const ExperimentConfig& c, const std::vector<std::string>& files,
                    const std::vector<std::size_t>& lineages, std::size_t realizations)
{
    json seeds = json::array();
    for (std::size_t l : lineages) {
        for (std::size_t i = 0; i < realizations; ++i) {
            const StreamSeed s = realization_seed(c, l, i);
            seeds.push_back({{"lineage", l}, {"realization", i}, {"master", s.master}, {"path", s.path}});
        }
    }
    json m{{"config", to_json(c)}, {"version", code_version()}, {"seeds", seeds}, {"outputs", files}};
    auto f = open_out(fs::path(c.out_dir) / "manifest.json");
    f << m.dump(2) << '\n';
}

} // namespace

std::vector<std::string> write_outputs(const ExitExperimentResult& r)
{
    const ExperimentConfig& c = r.config;
    fs::create_directories(c.out_dir);
    std::vector<std::string> files;
    json summary{{"experiment", c.name}, {"config", to_json(c)}, {"rows", json::array()}};
    std::vector<SummaryRow> rows;
    std::vector<std::size_t> lineages;

    for (std::size_t mi = 0; mi < r.methods.size(); ++mi) {
        const MethodResult& m = r.methods[mi];
        lineages.push_back(m.tol ? static_cast<std::size_t>(std::find(c.tols.begin(), c.tols.end(), *m.tol) -
                                                            c.tols.begin()) + 1
                                 : 0);
        const std::string stem = method_stem(m);
        {
            auto f = open_out(fs::path(c.out_dir) / (stem + ".csv"));
            f << "realization,T,exit_label,phase,exit_coord,dephased,t_phase,speedup,destination_energy\n";
            for (const auto& run : m.runs) {
                const bool dephased = !run.report.visits.empty() && run.report.visits.front().dephased;
                f << run.index << ',' << run.exit_time << ',' << run.exit_label << ',' << to_string(run.phase) << ','
                  << run.exit_coord << ',' << (dephased ? 1 : 0) << ','
                  << (dephased ? run.report.visits.front().t_phase : 0.0) << ','
                  << (run.report.visits.empty() ? 1.0 : run.report.speedup) << ',' << run.destination_energy << '\n';
            }
            files.push_back(stem + ".csv");
        }
        {
            auto f = open_out(fs::path(c.out_dir) / (stem + "_events.csv"));
            f << "realization,visit,state,phase,T,exit_label\n";
            for (const auto& run : m.runs) {
                for (std::size_t v = 0; v < run.events.size(); ++v) {
                    const ExitEvent& e = run.events[v];
                    f << run.index << ',' << v << ',' << e.source.str() << ',' << to_string(e.phase) << ',' << e.time
                      << ',' << e.destination.str() << '\n';
                }
            }
            files.push_back(stem + "_events.csv");
        }
        rows.push_back(m.summary);
        json row = row_json(m.summary);
        row["ks_T"] = ks_json(m.ks_time);
        row["ks_X"] = ks_json(m.ks_coord);
        json labels = json::object();
        for (std::size_t li = 0; li < m.label_counts.size(); ++li) {
            const auto& ci = m.label_intervals[li].second;
            labels[m.label_counts[li].first] = {{"count", m.label_counts[li].second},
                                                {"ci95", {ci.lower, ci.upper}}};
        }
        row["exit_labels"] = labels;
        summary["rows"].push_back(row);
    }
    {
        auto f = open_out(fs::path(c.out_dir) / "summary.json");
        f << summary.dump(2) << '\n';
        files.push_back("summary.json");
    }
    {
        auto f = open_out(fs::path(c.out_dir) / "table.csv");
        write_table_csv(f, rows);
        files.push_back("table.csv");
    }
    {
        auto f = open_out(fs::path(c.out_dir) / "table.txt");
        write_table_text(f, rows);
        files.push_back("table.txt");
    }
    write_manifest(c, files, lineages, c.realizations);
    files.push_back("manifest.json");
    return files;
}

std::vector<std::string> write_outputs(const DiagnosticsResult& r)
{
    const ExperimentConfig& c = r.config;
    fs::create_directories(c.out_dir);
    std::vector<std::string> files;
    {
        auto f = open_out(fs::path(c.out_dir) / "rhat.csv");
        f << "t,observable,rhat\n";
        for (const auto& s : r.series)
            for (std::size_t j = 0; j < s.rhats.size(); ++j)
                f << s.t << ',' << r.observable_names[j] << ',' << s.rhats[j] << '\n';
        files.push_back("rhat.csv");
    }
    const std::size_t d = c.dimension;
    json snaps = json::array();
    for (const auto& snap : r.snapshots) {
        std::ostringstream name;
        name << "snapshot_t" << snap.t << ".csv";
        auto f = open_out(fs::path(c.out_dir) / name.str());
        f << "replica";
        for (std::size_t i = 0; i < d; ++i) f << ",x" << i;
        f << '\n';
        const std::size_t n = snap.positions.size() / d;
        std::size_t right = 0;
        for (std::size_t k = 0; k < n; ++k) {
            f << k;
            for (std::size_t i = 0; i < d; ++i) f << ',' << snap.positions[k * d + i];
            f << '\n';
            if (snap.positions[k * d] > 0.0) ++right;
        }
        files.push_back(name.str());
        snaps.push_back({{"t", snap.t}, {"file", name.str()},
                         {"fraction_x_positive", static_cast<double>(right) / static_cast<double>(n)}});
    }
    json summary{{"experiment", c.name}, {"config", to_json(c)}, {"snapshots", snaps}, {"extinct", r.extinct}};
    if (!r.series.empty()) {
        json last = json::object();
        for (std::size_t j = 0; j < r.observable_names.size(); ++j) last[r.observable_names[j]] = r.series.back().rhats[j];
        summary["final_rhat"] = last;
        summary["final_t"] = r.series.back().t;
        const double tol = c.tols.empty() ? 0.1 : c.tols.front();
        for (const auto& s : r.series) {
            if (std::all_of(s.rhats.begin(), s.rhats.end(), [&](double v) { return v < 1.0 + tol; })) {
                summary["first_stationary_t"] = s.t;
                break;
            }
        }
    }
    {
        auto f = open_out(fs::path(c.out_dir) / "summary.json");
        f << summary.dump(2) << '\n';
        files.push_back("summary.json");
    }
    write_manifest(c, files, {0}, 1);
    files.push_back("manifest.json");
    return files;
}

std::vector<std::string> write_outputs(const TphaseResult& r)
{
    const ExperimentConfig& c = r.config;
    fs::create_directories(c.out_dir);
    std::vector<std::string> files;
    json sweeps = json::array();
    {
        auto f = open_out(fs::path(c.out_dir) / "tphase.csv");
        f << "replicas,sample,t_phase\n";
        for (const auto& s : r.sweeps) {
            for (std::size_t i = 0; i < s.t_phase.size(); ++i) f << s.replicas << ',' << i << ',' << s.t_phase[i] << '\n';
            std::vector<double> sorted = s.t_phase;
            std::sort(sorted.begin(), sorted.end());
            auto q = [&](double p) {
                if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
                return sorted[static_cast<std::size_t>(p * static_cast<double>(sorted.size() - 1))];
            };
            const MeanVar mv = mean_var(s.t_phase);
            sweeps.push_back({{"replicas", s.replicas}, {"samples", s.t_phase.size()}, {"failures", s.failures},
                              {"mean", opt_json(mv.mean)}, {"variance", opt_json(mv.variance)},
                              {"q25", q(0.25)}, {"median", q(0.5)}, {"q75", q(0.75)}});
        }
        files.push_back("tphase.csv");
    }
    {
        auto f = open_out(fs::path(c.out_dir) / "summary.json");
        f << json{{"experiment", c.name}, {"config", to_json(c)}, {"sweeps", sweeps}}.dump(2) << '\n';
        files.push_back("summary.json");
    }
    std::vector<std::size_t> lineages(c.replica_sweep.size());
    for (std::size_t i = 0; i < lineages.size(); ++i) lineages[i] = i;
    write_manifest(c, files, lineages, c.realizations);
    files.push_back("manifest.json");
    return files;
}

} // namespace parrep
