#pragma once

#include "ddenoc/stability.hpp"
#include "ddenoc/trajectory.hpp"

#include <string>
#include <vector>

namespace ddenoc {

/// Numeric table; text columns are kept by name only when written.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Doubles are written with 17 significant digits, `,` separated, LF line ends.
std::string format_double(double value);

/// `t,<states>,<inputs>,<outputs>`.
void write_trajectory_csv(const std::string& path, const Trajectory& trajectory);
/// Every numeric column other than `t` becomes a named output column.
Trajectory read_trajectory_csv(const std::string& path);

void write_table_csv(const std::string& path, const Table& table);
/// Columns whose cells do not all parse as numbers are skipped.
Table read_table_csv(const std::string& path);

/// `re,im,residual,method`.
void write_roots_csv(const std::string& path, const RootSet& roots);

/// Field values of a stability scan: `re,im,log10_abs,phase_cos,phase_sin`.
void write_field_csv(const std::string& path, const GridField& field);

}  // namespace ddenoc
