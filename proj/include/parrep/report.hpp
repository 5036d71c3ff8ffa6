#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "parrep/parrep.hpp"

namespace parrep {

// One row of the comparison tables. t_phase statistics cover dephased visits
// only; exit time and speedup cover every realization.
struct SummaryRow {
    std::string method;
    std::optional<double> tol;
    std::size_t realizations = 0;
    std::size_t visits = 0;
    std::size_t dephased = 0;
    std::optional<double> mean_t_phase;
    std::optional<double> var_t_phase;
    std::optional<double> mean_exit_time;
    std::optional<double> mean_speedup;
    std::optional<double> pct_dephased;
};

SummaryRow summarize(std::string method, std::optional<double> tol, std::span<const ParRepReport> reports);

// Serial runs: only exit times are meaningful.
SummaryRow summarize_serial(std::span<const double> exit_times);

void write_table_csv(std::ostream& os, std::span<const SummaryRow> rows);
void write_table_text(std::ostream& os, std::span<const SummaryRow> rows);

} // namespace parrep
