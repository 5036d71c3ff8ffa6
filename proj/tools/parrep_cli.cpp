// Command-line front end: run, diagnose, oracle, compare, list.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "parrep/errors.hpp"
#include "parrep/experiments.hpp"
#include "parrep/partition.hpp"
#include "parrep/qsd_oracle.hpp"

namespace fs = std::filesystem;
using namespace parrep;

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> realizations;
    std::optional<std::size_t> threads;
    std::string out;
    bool paper_scale = false;
};

void add_common(CLI::App* app, Overrides& o)
{
    app->add_option("config,--config", o.config, "config file (.cfg or manifest .json) or registry name")->required();
    app->add_option("--seed", o.seed, "master seed");
    app->add_option("--realizations", o.realizations, "number of realizations");
    app->add_option("--out", o.out, "output directory");
    app->add_option("--threads", o.threads, "worker threads (0: all cores)");
    app->add_flag("--paper-scale", o.paper_scale, "use the published realization counts and ensemble sizes");
}

ExperimentConfig resolve(const Overrides& o)
{
    ExperimentConfig c;
    if (fs::exists(o.config)) {
        c = load_config(o.config);
    } else {
        c = defaults_for(o.config); // throws for unknown names
    }
    if (o.paper_scale) apply_paper_scale(c);
    if (o.seed) c.seed = *o.seed;
    if (o.realizations) c.realizations = *o.realizations;
    if (o.threads) c.threads = *o.threads;
    if (!o.out.empty()) c.out_dir = o.out;
    c.validate();
    return c;
}

void print_files(const ExperimentConfig& c, const std::vector<std::string>& files)
{
    for (const auto& f : files) std::cout << "wrote " << (fs::path(c.out_dir) / f).string() << '\n';
}

int do_run(const ExperimentConfig& c)
{
    switch (registry_entry(c.name).kind) {
    case ExperimentKind::exit_comparison: {
        const auto r = run_exit_experiment(c);
        std::vector<SummaryRow> rows;
        for (const auto& m : r.methods) rows.push_back(m.summary);
        write_table_text(std::cout, rows);
        for (const auto& m : r.methods) {
            if (m.ks_time)
                std::cout << "KS(T) tol=" << *m.tol << ": " << (m.ks_time->pass ? "PASS" : "FAIL")
                          << " p=" << m.ks_time->p_value << '\n';
            for (std::size_t i = 0; i < m.label_counts.size(); ++i)
                std::cout << m.method << (m.tol ? " tol=" + std::to_string(*m.tol) : std::string()) << " label "
                          << m.label_counts[i].first << ": " << m.label_counts[i].second << " ["
                          << m.label_intervals[i].second.lower << ", " << m.label_intervals[i].second.upper << "]\n";
        }
        print_files(c, write_outputs(r));
        return 0;
    }
    case ExperimentKind::fv_diagnostics:
        print_files(c, write_outputs(run_fv_diagnostics(c)));
        return 0;
    case ExperimentKind::independent_diagnostics:
        print_files(c, write_outputs(dw2d_independent_diagnostics(c)));
        return 0;
    case ExperimentKind::tphase_distribution:
        print_files(c, write_outputs(run_tphase_distribution(c)));
        return 0;
    }
    return 1;
}

int do_oracle(const ExperimentConfig& c, std::size_t grid)
{
    if (c.dimension != 1) throw ConfigError("oracle needs a one-dimensional potential");
    const System sys = build_system(c);
    const State s = sys.partition->locate(c.x0);
    const double a = s.anchor[0] - 1.0, b = s.anchor[0] + 1.0;
    const EigenSolution sol = solve_generator(sys.dynamics.potential(), c.beta, a, b, grid);
    fs::create_directories(c.out_dir);
    const fs::path csv = fs::path(c.out_dir) / "oracle.csv";
    std::ofstream f(csv);
    if (!f) throw ConfigError("cannot write " + csv.string());
    write_oracle_csv(f, sol);
    std::cout << std::setprecision(10) << "interval (" << a << ", " << b << ")\nlambda1 " << sol.lambda1
              << "\nlambda2 " << sol.lambda2 << "\nmean exit time " << sol.mean_exit_time() << "\nwrote "
              << csv.string() << '\n';
    return 0;
}

// Reads the named numeric column; rows with non-finite entries are dropped.
std::vector<double> read_column(const fs::path& path, const std::string& name, bool required)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path.string() + " is empty");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        if (required) throw ConfigError(path.string() + " has no column '" + name + "'");
        return {};
    }
    const auto col = static_cast<std::size_t>(it - header.begin());
    std::vector<double> out;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string cell;
        for (std::size_t i = 0; i <= col && std::getline(ss, cell, ','); ++i) {
        }
        char* end = nullptr;
        const double v = std::strtod(cell.c_str(), &end);
        if (end != cell.c_str() && std::isfinite(v)) out.push_back(v);
    }
    return out;
}

int do_compare(const fs::path& a, const fs::path& b, double alpha)
{
    const auto ta = read_column(a, "T", true), tb = read_column(b, "T", true);
    const KsResult k = ks_two_sample(ta, tb, alpha);
    std::cout << std::setprecision(6) << "T: n=" << ta.size() << " m=" << tb.size() << " D=" << k.statistic
              << " p=" << k.p_value << ' ' << (k.pass ? "PASS" : "FAIL") << '\n';
    bool pass = k.pass;
    const auto xa = read_column(a, "exit_coord", false), xb = read_column(b, "exit_coord", false);
    if (!xa.empty() && !xb.empty()) {
        const KsResult kx = ks_two_sample(xa, xb, alpha);
        std::cout << "exit_coord: D=" << kx.statistic << " p=" << kx.p_value << ' ' << (kx.pass ? "PASS" : "FAIL")
                  << '\n';
        pass = pass && kx.pass;
    }
    const MeanVar ma = mean_var(ta), mb = mean_var(tb);
    if (ma.mean && mb.mean) std::cout << "mean T: " << *ma.mean << " vs " << *mb.mean << '\n';
    return pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Parallel replica dynamics with Fleming-Viot dephasing"};
    app.require_subcommand(1);

    Overrides run_o, diag_o, oracle_o;
    std::size_t grid = 2000;
    std::string csv_a, csv_b;
    double alpha = 0.05;

    auto* run = app.add_subcommand("run", "execute an experiment");
    add_common(run, run_o);
    auto* diag = app.add_subcommand("diagnose", "offline Fleming-Viot / independent-ensemble diagnostics");
    add_common(diag, diag_o);
    auto* oracle = app.add_subcommand("oracle", "1D Dirichlet eigensolution for the state of x0");
    add_common(oracle, oracle_o);
    oracle->add_option("--grid", grid, "interior grid points")->check(CLI::Range(3, 10000000));
    auto* compare = app.add_subcommand("compare", "two-sample KS on exit times of two CSVs");
    compare->add_option("a", csv_a)->required();
    compare->add_option("b", csv_b)->required();
    compare->add_option("--alpha", alpha, "significance level");
    app.add_subcommand("list", "print the experiment registry");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return do_run(resolve(run_o));
        if (*diag) {
            const ExperimentConfig c = resolve(diag_o);
            if (registry_entry(c.name).kind == ExperimentKind::exit_comparison)
                throw ConfigError("'" + c.name + "' is not a diagnostics experiment");
            return do_run(c);
        }
        if (*oracle) return do_oracle(resolve(oracle_o), grid);
        if (*compare) return do_compare(csv_a, csv_b, alpha);
        for (const auto& e : registry()) std::cout << std::left << std::setw(20) << e.name << e.description << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
