#include "ddenoc/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ddenoc {
namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) out << ',';
    out << cells[i];
  }
  out << '\n';
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& text, double& value) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\r')) --last;
  if (first == last) return false;
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, value);
  if (res.ec == std::errc() && res.ptr == last) return true;
  const std::string lowered(first, last);
  if (lowered == "inf" || lowered == "-inf" || lowered == "nan" || lowered == "-nan") {
    value = std::stod(lowered);
    return true;
  }
  return false;
}

}  // namespace

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_trajectory_csv(const std::string& path, const Trajectory& tr) {
  tr.validate();
  auto out = open_out(path);
  std::vector<std::string> header{"t"};
  for (const auto& n : tr.column_names()) header.push_back(n);
  write_row(out, header);
  std::vector<std::string> cells;
  for (int j = 0; j < tr.size(); ++j) {
    cells.clear();
    cells.push_back(format_double(tr.times[static_cast<std::size_t>(j)]));
    for (Eigen::Index c = 0; c < tr.states.cols(); ++c) cells.push_back(format_double(tr.states(j, c)));
    for (Eigen::Index c = 0; c < tr.inputs.cols(); ++c) cells.push_back(format_double(tr.inputs(j, c)));
    for (Eigen::Index c = 0; c < tr.outputs.cols(); ++c) cells.push_back(format_double(tr.outputs(j, c)));
    write_row(out, cells);
  }
  if (!out) throw Error("write failed: " + path);
}

void write_table_csv(const std::string& path, const Table& table) {
  auto out = open_out(path);
  write_row(out, table.header);
  std::vector<std::string> cells;
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw Error("table row length differs from header: " + path);
    cells.clear();
    for (double v : row) cells.push_back(format_double(v));
    write_row(out, cells);
  }
  if (!out) throw Error("write failed: " + path);
}

Table read_table_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("empty CSV: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split(line);
  std::vector<std::vector<std::string>> raw;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != header.size()) {
      throw Error(path + ": row " + std::to_string(raw.size() + 2) + " has " + std::to_string(cells.size()) +
                  " cells, header has " + std::to_string(header.size()));
    }
    raw.push_back(std::move(cells));
  }
  std::vector<bool> numeric(header.size(), true);
  std::vector<std::vector<double>> values(raw.size(), std::vector<double>(header.size(), 0.0));
  for (std::size_t r = 0; r < raw.size(); ++r) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (numeric[c] && !parse_double(raw[r][c], values[r][c])) numeric[c] = false;
    }
  }
  Table table;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (numeric[c]) table.header.push_back(header[c]);
  }
  for (const auto& row : values) {
    std::vector<double> kept;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (numeric[c]) kept.push_back(row[c]);
    }
    table.rows.push_back(std::move(kept));
  }
  return table;
}

Trajectory read_trajectory_csv(const std::string& path) {
  const Table table = read_table_csv(path);
  std::size_t tcol = table.header.size();
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (table.header[c] == "t") tcol = c;
  }
  if (tcol == table.header.size()) throw Error(path + ": no `t` column");
  Trajectory tr;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c != tcol) tr.output_names.push_back(table.header[c]);
  }
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  tr.states.resize(n, 0);
  tr.inputs.resize(n, 0);
  tr.outputs.resize(n, static_cast<Eigen::Index>(tr.output_names.size()));
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = table.rows[static_cast<std::size_t>(r)];
    tr.times.push_back(row[tcol]);
    Eigen::Index k = 0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c != tcol) tr.outputs(r, k++) = row[c];
    }
  }
  tr.validate();
  return tr;
}

void write_roots_csv(const std::string& path, const RootSet& roots) {
  auto out = open_out(path);
  write_row(out, {"re", "im", "residual", "method"});
  for (const Root& r : roots.roots) {
    write_row(out, {format_double(r.value.real()), format_double(r.value.imag()), format_double(r.residual),
                    method_name(r.method)});
  }
  if (!out) throw Error("write failed: " + path);
}

void write_field_csv(const std::string& path, const GridField& field) {
  auto out = open_out(path);
  write_row(out, {"re", "im", "log10_abs", "phase_cos", "phase_sin"});
  for (std::size_t j = 0; j < field.im.size(); ++j) {
    for (std::size_t i = 0; i < field.re.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(j);
      const auto c = static_cast<Eigen::Index>(i);
      write_row(out, {format_double(field.re[i]), format_double(field.im[j]), format_double(field.log10_abs(r, c)),
                      format_double(field.phase_cos(r, c)), format_double(field.phase_sin(r, c))});
    }
  }
  if (!out) throw Error("write failed: " + path);
}

}  // namespace ddenoc
