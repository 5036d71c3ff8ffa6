#include "parrep/report.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>

#include "parrep/stats.hpp"

namespace parrep {

SummaryRow summarize(std::string method, std::optional<double> tol, std::span<const ParRepReport> reports)
{
    SummaryRow row;
    row.method = std::move(method);
    row.tol = tol;
    row.realizations = reports.size();
    std::vector<double> tphase, exit_times, speedups;
    for (const auto& r : reports) {
        for (const auto& v : r.visits) {
            ++row.visits;
            if (v.dephased) {
                ++row.dephased;
                tphase.push_back(v.t_phase);
            }
        }
        exit_times.push_back(r.physical_time);
        speedups.push_back(r.speedup);
    }
    const MeanVar tp = mean_var(tphase);
    row.mean_t_phase = tp.mean;
    row.var_t_phase = tp.variance;
    row.mean_exit_time = mean_var(exit_times).mean;
    row.mean_speedup = mean_var(speedups).mean;
    if (row.visits > 0) row.pct_dephased = 100.0 * static_cast<double>(row.dephased) / static_cast<double>(row.visits);
    return row;
}

SummaryRow summarize_serial(std::span<const double> exit_times)
{
    SummaryRow row;
    row.method = "serial";
    row.realizations = exit_times.size();
    row.mean_exit_time = mean_var(exit_times).mean;
    return row;
}

namespace {

std::string cell(const std::optional<double>& v, int precision = 4)
{
    if (!v) return "--";
    std::ostringstream os;
    os << std::setprecision(precision) << *v;
    return os.str();
}

} // namespace

void write_table_csv(std::ostream& os, std::span<const SummaryRow> rows)
{
    os << "method,tol,realizations,mean_t_phase,var_t_phase,mean_T,mean_speedup,pct_dephased\n";
    for (const auto& r : rows) {
        os << r.method << ',' << (r.tol ? cell(r.tol, 6) : "") << ',' << r.realizations << ','
           << (r.mean_t_phase ? cell(r.mean_t_phase, 10) : "") << ',' << (r.var_t_phase ? cell(r.var_t_phase, 10) : "")
           << ',' << (r.mean_exit_time ? cell(r.mean_exit_time, 10) : "") << ','
           << (r.mean_speedup ? cell(r.mean_speedup, 10) : "") << ','
           << (r.pct_dephased ? cell(r.pct_dephased, 10) : "") << '\n';
    }
}

void write_table_text(std::ostream& os, std::span<const SummaryRow> rows)
{
    os << std::left << std::setw(8) << "Method" << std::setw(7) << "TOL" << std::setw(11) << "<t_phase>"
       << std::setw(11) << "Var" << std::setw(9) << "<T>" << std::setw(10) << "<Speedup>" << "% Dephased\n";
    for (const auto& r : rows) {
        os << std::left << std::setw(8) << r.method << std::setw(7) << cell(r.tol) << std::setw(11)
           << cell(r.mean_t_phase) << std::setw(11) << cell(r.var_t_phase) << std::setw(9) << cell(r.mean_exit_time)
           << std::setw(10) << cell(r.mean_speedup, 3) << cell(r.pct_dephased, 3) << '\n';
    }
}

} // namespace parrep
