// SPDX-License-Identifier: Apache-2.0
//
// Run configuration, result tables and their CSV/JSON serialization, plus
// plain-text rendering. All number formatting goes through std::to_chars, so
// output never depends on the process locale.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "corrtrans/montecarlo.hpp"

namespace corrtrans {

enum class OutputFormat { csv, json };

inline OutputFormat parse_output_format(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  throw DomainError("unknown output format '" + s + "' (expected csv or json)");
}

/// One result line: a (cell, transform) pair with its replicate summary.
struct TableRow {
  std::string model;
  std::string transform;
  double alpha = 0.0;
  double rho = 0.0;
  long long n = 0;
  long long N = 0;
  int K = 0;
  std::uint64_t seed = 0;
  double eps_mean = 0.0;
  std::optional<double> eps_sd;
  std::optional<double> eps_se;
  double alpha_hat_mean = 0.0;

  friend bool operator==(const TableRow&, const TableRow&) = default;
};

inline std::vector<TableRow> to_rows(const GridTable& table) {
  std::vector<TableRow> rows;
  rows.reserve(table.rows.size());
  for (const auto& r : table.rows) {
    rows.push_back({to_string(table.model), to_string(r.transform), r.cell.alpha, r.cell.rho, r.cell.n, table.N,
                    table.K, table.master_seed, r.result.eps_mean, r.result.eps_sd, r.result.eps_se,
                    r.result.alpha_hat_mean});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Locale-independent number formatting and parsing

/// Shortest general form with `digits` significant digits (like %.*g).
inline std::string format_general(double v, int digits) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, std::clamp(digits, 1, 17));
  return {buf, res.ptr};
}

/// Fixed notation with `decimals` digits after the point.
inline std::string format_fixed(double v, int decimals) {
  if (!std::isfinite(v)) return format_general(v, 6);
  char buf[512];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, std::clamp(decimals, 0, 40));
  return {buf, res.ptr};
}

namespace detail {

inline double parse_double(std::string_view s, const char* field) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DomainError(std::string("table: cannot parse ") + field + " from '" + std::string(s) + "'");
  }
  return v;
}

template <typename Int>
Int parse_int(std::string_view s, const char* field) {
  Int v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DomainError(std::string("table: cannot parse ") + field + " from '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::string_view kCsvHeader =
    "model,transform,alpha,rho,n,N,K,seed,eps_mean,eps_sd,eps_se,alpha_hat_mean";

inline void write_csv(std::ostream& out, const std::vector<TableRow>& rows) {
  auto num = [](double v) { return format_general(v, 17); };
  auto opt = [&](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.model << ',' << r.transform << ',' << num(r.alpha) << ',' << num(r.rho) << ',' << r.n << ',' << r.N
        << ',' << r.K << ',' << r.seed << ',' << num(r.eps_mean) << ',' << opt(r.eps_sd) << ',' << opt(r.eps_se)
        << ',' << num(r.alpha_hat_mean) << '\n';
  }
}

inline std::vector<TableRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DomainError("table: empty CSV input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw DomainError("table: unexpected CSV header '" + line + "'");
  std::vector<TableRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_commas(line);
    if (f.size() != 12) {
      throw DomainError("table: line " + std::to_string(lineno) + " has " + std::to_string(f.size()) +
                        " fields, expected 12");
    }
    TableRow r;
    r.model = std::string(f[0]);
    r.transform = std::string(f[1]);
    r.alpha = detail::parse_double(f[2], "alpha");
    r.rho = detail::parse_double(f[3], "rho");
    r.n = detail::parse_int<long long>(f[4], "n");
    r.N = detail::parse_int<long long>(f[5], "N");
    r.K = detail::parse_int<int>(f[6], "K");
    r.seed = detail::parse_int<std::uint64_t>(f[7], "seed");
    r.eps_mean = detail::parse_double(f[8], "eps_mean");
    if (!f[9].empty()) r.eps_sd = detail::parse_double(f[9], "eps_sd");
    if (!f[10].empty()) r.eps_se = detail::parse_double(f[10], "eps_se");
    r.alpha_hat_mean = detail::parse_double(f[11], "alpha_hat_mean");
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json rows_to_json(const std::vector<TableRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j{{"model", r.model},   {"transform", r.transform}, {"alpha", r.alpha},
                     {"rho", r.rho},       {"n", r.n},                 {"N", r.N},
                     {"K", r.K},           {"seed", r.seed},           {"eps_mean", r.eps_mean},
                     {"eps_sd", nullptr},  {"eps_se", nullptr},        {"alpha_hat_mean", r.alpha_hat_mean}};
    if (r.eps_sd) j["eps_sd"] = *r.eps_sd;
    if (r.eps_se) j["eps_se"] = *r.eps_se;
    arr.push_back(std::move(j));
  }
  return arr;
}

inline std::vector<TableRow> rows_from_json(const nlohmann::json& arr) {
  if (!arr.is_array()) throw DomainError("table: JSON input must be an array of rows");
  std::vector<TableRow> rows;
  for (const auto& j : arr) {
    try {
      TableRow r;
      r.model = j.at("model").get<std::string>();
      r.transform = j.at("transform").get<std::string>();
      r.alpha = j.at("alpha").get<double>();
      r.rho = j.at("rho").get<double>();
      r.n = j.at("n").get<long long>();
      r.N = j.at("N").get<long long>();
      r.K = j.at("K").get<int>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.eps_mean = j.at("eps_mean").get<double>();
      if (j.contains("eps_sd") && !j.at("eps_sd").is_null()) r.eps_sd = j.at("eps_sd").get<double>();
      if (j.contains("eps_se") && !j.at("eps_se").is_null()) r.eps_se = j.at("eps_se").get<double>();
      r.alpha_hat_mean = j.at("alpha_hat_mean").get<double>();
      rows.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DomainError(std::string("table: malformed JSON row: ") + e.what());
    }
  }
  return rows;
}

inline void write_json(std::ostream& out, const std::vector<TableRow>& rows) {
  out << rows_to_json(rows).dump(2) << '\n';
}

inline void write_rows(std::ostream& out, const std::vector<TableRow>& rows, OutputFormat format) {
  if (format == OutputFormat::csv) {
    write_csv(out, rows);
  } else {
    write_json(out, rows);
  }
}

/// Reads a stored table, detecting JSON by a leading '[' and CSV otherwise.
inline std::vector<TableRow> read_rows(std::istream& in) {
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw DomainError(std::string("table: invalid JSON: ") + e.what());
    }
    return rows_from_json(j);
  }
  std::istringstream csv(text);
  return read_csv(csv);
}

inline std::vector<TableRow> read_rows_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open table file '" + path + "'");
  return read_rows(in);
}

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
  ExperimentGrid grid;
  std::string output_path;
  OutputFormat format = OutputFormat::csv;
  std::optional<unsigned> threads;
};

inline RunConfig parse_run_config(const nlohmann::json& j) {
  static const std::set<std::string> known{"model", "alphas", "rhos",      "ns",          "N",      "K",
                                           "master_seed", "transforms", "output_path", "format", "threads"};
  if (!j.is_object()) throw DomainError("config: top level must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw DomainError("config: unknown field '" + key + "'");
  }
  RunConfig cfg;
  try {
    cfg.grid.model = parse_model_kind(j.at("model").get<std::string>());
    cfg.grid.alphas = j.at("alphas").get<std::vector<double>>();
    cfg.grid.rhos = j.at("rhos").get<std::vector<double>>();
    cfg.grid.ns = j.at("ns").get<std::vector<long long>>();
    if (j.contains("N")) cfg.grid.N = j.at("N").get<long long>();
    if (j.contains("K")) cfg.grid.K = j.at("K").get<int>();
    if (j.contains("master_seed")) cfg.grid.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("transforms")) {
      cfg.grid.transforms.clear();
      for (const auto& t : j.at("transforms")) cfg.grid.transforms.push_back(parse_transform_kind(t.get<std::string>()));
    }
    if (j.contains("output_path")) cfg.output_path = j.at("output_path").get<std::string>();
    if (j.contains("format")) cfg.format = parse_output_format(j.at("format").get<std::string>());
    if (j.contains("threads")) {
      const long long t = j.at("threads").get<long long>();
      if (t < 1) throw DomainError("config: threads must be >= 1");
      cfg.threads = static_cast<unsigned>(t);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("config: ") + e.what());
  }
  cfg.grid.validate();
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DomainError("config '" + path + "': " + e.what());
  }
  return parse_run_config(j);
}

// ---------------------------------------------------------------------------
// Text rendering

/// Table-1-style text: one line per (model, alpha, rho, n), one "eps +- se"
/// column per transform, in first-appearance order.
inline std::string render_table(const std::vector<TableRow>& rows, int digits = 6) {
  using Key = std::tuple<std::string, double, double, long long>;
  std::vector<Key> keys;
  std::vector<std::string> transforms;
  std::map<std::pair<Key, std::string>, const TableRow*> lookup;
  for (const auto& r : rows) {
    Key k{r.model, r.alpha, r.rho, r.n};
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    if (std::find(transforms.begin(), transforms.end(), r.transform) == transforms.end()) {
      transforms.push_back(r.transform);
    }
    lookup[{k, r.transform}] = &r;
  }

  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"model", "alpha", "rho", "n"};
  for (const auto& t : transforms) header.push_back(t);
  cells.push_back(header);
  for (const auto& k : keys) {
    std::vector<std::string> line{std::get<0>(k), format_general(std::get<1>(k), digits),
                                  format_general(std::get<2>(k), digits), std::to_string(std::get<3>(k))};
    for (const auto& t : transforms) {
      const auto it = lookup.find({k, t});
      if (it == lookup.end()) {
        line.emplace_back("-");
        continue;
      }
      const TableRow& r = *it->second;
      std::string s = format_general(r.eps_mean, digits);
      s += " +- ";
      s += r.eps_se ? format_general(*r.eps_se, digits) : std::string("n/a");
      line.push_back(std::move(s));
    }
    cells.push_back(std::move(line));
  }

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells)
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  std::string out;
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c > 0) out += "  ";
      out += line[c];
      if (c + 1 < line.size()) out.append(width[c] - line[c].size(), ' ');
    }
    out += '\n';
  }
  return out;
}

/// Series for plotting eps * sqrt(n) against n, one per (model, transform, alpha, rho).
inline std::string plot_data(const std::vector<TableRow>& rows, int digits = 6) {
  std::vector<const TableRow*> sorted;
  for (const auto& r : rows) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](const TableRow* a, const TableRow* b) {
    return std::tie(a->model, a->transform, a->alpha, a->rho, a->n) <
           std::tie(b->model, b->transform, b->alpha, b->rho, b->n);
  });
  std::string out = "model,transform,alpha,rho,n,eps_sqrt_n\n";
  for (const TableRow* r : sorted) {
    out += r->model + ',' + r->transform + ',' + format_general(r->alpha, digits) + ',' +
           format_general(r->rho, digits) + ',' + std::to_string(r->n) + ',' +
           format_general(r->eps_mean * std::sqrt(static_cast<double>(r->n)), digits) + '\n';
  }
  return out;
}

}  // namespace corrtrans
