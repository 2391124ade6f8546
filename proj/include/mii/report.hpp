#pragma once

// Tabular report emission as CSV or JSON (array of row objects). Numbers are
// printed with 17 significant digits so reruns compare byte for byte.

#include <cstdio>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "mii/error.hpp"
#include "mii/gallery.hpp"
#include "mii/ideal_attack.hpp"
#include "mii/verify_eval.hpp"

namespace mii {

enum class ReportFormat { kCsv, kJson };

inline ReportFormat parse_format(const std::string& s) {
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "json") return ReportFormat::kJson;
  throw ContractError("unknown report format: " + s);
}

inline const char* extension(ReportFormat f) { return f == ReportFormat::kCsv ? "csv" : "json"; }

using Cell = std::variant<double, long long, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    require(row.size() == columns.size(), "report row width does not match its columns");
    rows.push_back(std::move(row));
  }
};

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (i) out += ',';
    out += t.columns[i];
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      if (const auto* d = std::get_if<double>(&row[i])) {
        out += format_number(*d);
      } else if (const auto* n = std::get_if<long long>(&row[i])) {
        out += std::to_string(*n);
      } else {
        out += std::get<std::string>(row[i]);
      }
    }
    out += '\n';
  }
  return out;
}

inline nlohmann::ordered_json to_json(const Table& t) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    nlohmann::ordered_json obj;
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::visit([&](const auto& v) { obj[t.columns[i]] = v; }, row[i]);
    }
    arr.push_back(std::move(obj));
  }
  return arr;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("failed writing " + path);
}

// Writes `<stem>.csv` or `<stem>.json`; returns the file name written.
inline std::string write_table(const std::string& dir, const std::string& stem, const Table& t,
                               ReportFormat f) {
  const std::string name = stem + "." + extension(f);
  write_text(dir + "/" + name, f == ReportFormat::kCsv ? to_csv(t) : to_json(t).dump(2) + "\n");
  return name;
}

inline Table threshold_report(const ThresholdTable& table) {
  Table t{{"far_target", "epsilon_rad", "epsilon_deg", "tar"}, {}};
  for (const auto& e : table.entries) {
    t.add({e.far_target, e.epsilon.radians(), e.epsilon.degrees(), e.tar.value_or(-1.0)});
  }
  return t;
}

inline Table histogram_report(const std::vector<HistogramBin>& bins) {
  Table t{{"bin_left_rad", "bin_right_rad", "density"}, {}};
  for (const auto& b : bins) t.add({b.left, b.right, b.density});
  return t;
}

inline Table curve_report(const std::vector<CurvePoint>& curve) {
  Table t{{"gallery_size", "success_rate_eps2", "mean_mii_dist_rad"}, {}};
  for (const auto& p : curve) {
    t.add({static_cast<long long>(p.gallery_size), p.success_rate, p.mean_mii_dist});
  }
  return t;
}

// Success-table columns eps0..eps4 hold percentages.
inline std::vector<std::string> success_columns() {
  return {"attacker", "attacked", "eps0", "eps1", "eps2", "eps3", "eps4"};
}

inline std::vector<Cell> success_row(const std::string& attacker, const std::string& attacked,
                                     std::span<const AttackOutcome> outcomes) {
  std::vector<Cell> row{attacker, attacked};
  for (std::size_t i = 0; i < kFarTargets.size(); ++i) {
    row.push_back(100.0 * success_rate(outcomes, i));
  }
  return row;
}

}  // namespace mii
