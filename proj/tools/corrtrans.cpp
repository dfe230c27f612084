// SPDX-License-Identifier: Apache-2.0
//
// corrtrans: evaluate transforms and Edgeworth terms, compute dominance
// ranges and exact SquareV rejection rates, run simulation grids and render
// stored tables.
//
// Exit codes: 0 success, 1 usage or domain error, 2 numeric failure.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include "corrtrans/corrtrans.hpp"

namespace {

using namespace corrtrans;

struct PointArgs {
  std::string model = "bvn";
  std::optional<double> alpha;
  std::optional<double> z;
  double rho = 0.0;
  int precision = 6;
};

void add_point_options(CLI::App* cmd, PointArgs& a) {
  cmd->add_option("--model", a.model, "dependence model: bvn or squarev")->capture_default_str();
  auto* alpha = cmd->add_option("--alpha", a.alpha, "significance level; z = z_alpha");
  auto* z = cmd->add_option("--z", a.z, "critical value");
  alpha->excludes(z);
  z->excludes(alpha);
  cmd->add_option("--rho", a.rho, "correlation")->required();
  cmd->add_option("--precision", a.precision, "significant digits")->capture_default_str()->check(CLI::Range(1, 17));
}

double resolve_z(const PointArgs& a) {
  if (a.z) return *a.z;
  if (a.alpha) {
    if (!(*a.alpha > 0.0 && *a.alpha < 1.0)) throw DomainError("--alpha must lie in (0, 1)");
    return normal_quantile(1.0 - *a.alpha);
  }
  throw DomainError("one of --alpha or --z is required");
}

std::string fmt(double v, int digits) { return format_general(v, digits); }

int cmd_transform(const PointArgs& a, bool numeric) {
  const DependenceModel model = make_model(parse_model_kind(a.model));
  const double z = resolve_z(a);
  const Transform t = optimal_transform(model.kind, z);
  std::cout << "z = " << fmt(z, a.precision) << '\n'
            << "exponent = " << fmt(optimal_exponent(model.kind, z), a.precision) << '\n'
            << "psi = " << fmt(t.psi(a.rho), a.precision) << '\n'
            << "dpsi = " << fmt(t.dpsi(a.rho), a.precision) << '\n';
  if (numeric) {
    const Transform tn = optimal_transform_numeric(model.moments, z);
    std::cout << "psi_numeric = " << fmt(tn.psi(a.rho), a.precision) << '\n'
              << "dpsi_numeric = " << fmt(tn.dpsi(a.rho), a.precision) << '\n';
  }
  return 0;
}

int cmd_delta(const PointArgs& a, const std::string& transform, std::optional<double> z_ref) {
  const DependenceModel model = make_model(parse_model_kind(a.model));
  const TransformKind kind = parse_transform_kind(transform);
  const double z = resolve_z(a);
  const double zr = z_ref.value_or(z);
  const Transform t = make_transform(model, kind, zr);
  if (kind != TransformKind::numeric) {
    std::cout << "closed = " << fmt(delta_closed(model, kind, z, a.rho, zr), a.precision) << '\n';
  }
  std::cout << "pipeline = " << fmt(delta_psi(model.moments, t, a.rho, z), a.precision) << '\n';
  if (kind == TransformKind::identity) {
    std::cout << "edgeworth = " << fmt(delta(assemble_statistic_model(model.moments, a.rho), z), a.precision)
              << '\n';
  }
  return 0;
}

int cmd_ranges(const std::string& model_name, std::optional<double> alpha, const std::string& vs, bool threshold,
               int decimals) {
  const ModelKind model = parse_model_kind(model_name);
  const TransformKind competitor = parse_transform_kind(vs);
  if (threshold) {
    const auto th = dominance_threshold(model, competitor);
    std::cout << (th ? format_fixed(*th, decimals) : std::string("none")) << '\n';
    return 0;
  }
  if (!alpha) throw DomainError("ranges: --alpha is required unless --threshold is given");
  const BetaInterval iv = dominance_range(model, *alpha, competitor);
  std::cout << '(' << format_fixed(iv.lo, decimals) << ", " << format_fixed(iv.hi, decimals) << ")\n";
  return 0;
}

int cmd_exact(double rho, long long n, double alpha, const std::string& transform, std::optional<double> z_ref,
              int precision) {
  const DependenceModel model = squarev_model();
  const TransformKind kind = parse_transform_kind(transform);
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("--alpha must lie in (0, 1)");
  const double zr = z_ref.value_or(normal_quantile(1.0 - alpha));
  const double p = squarev_exact_rejection(rho, n, make_transform(model, kind, zr), alpha);
  std::cout << "probability = " << fmt(p, precision) << '\n'
            << "relative_error = " << fmt(p / alpha - 1.0, precision) << '\n';
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::optional<std::string>& out_path,
                 std::optional<unsigned> threads, const std::optional<std::string>& format) {
  RunConfig cfg = load_run_config(config_path);
  if (out_path) cfg.output_path = *out_path;
  if (format) cfg.format = parse_output_format(*format);
  if (threads) cfg.threads = *threads;
  unsigned width = default_thread_count();
  if (cfg.threads && std::getenv("CORRTRANS_THREADS") == nullptr) width = *cfg.threads;

  std::ofstream file;
  if (!cfg.output_path.empty() && cfg.output_path != "-") {
    file.open(cfg.output_path, std::ios::binary);
    if (!file) throw DomainError("cannot open output file '" + cfg.output_path + "'");
  }
  const GridTable table = run_grid(cfg.grid, width);
  std::ostream& out = file.is_open() ? static_cast<std::ostream&>(file) : std::cout;
  write_rows(out, to_rows(table), cfg.format);
  out.flush();
  if (!out) throw DomainError("failed writing output");
  if (file.is_open()) {
    std::cerr << "wrote " << table.rows.size() << " rows to " << cfg.output_path << '\n';
  }
  return 0;
}

int cmd_table(const std::string& in_path, bool plot, int precision) {
  const auto rows = read_rows_file(in_path);
  std::cout << (plot ? plot_data(rows, precision) : render_table(rows, precision));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transforms of Pearson's correlation: Edgeworth terms, dominance ranges and simulation"};
  app.require_subcommand(1);

  PointArgs transform_args;
  bool numeric = false;
  auto* transform_cmd = app.add_subcommand("transform", "evaluate the optimal transform psi_z at rho");
  add_point_options(transform_cmd, transform_args);
  transform_cmd->add_flag("--numeric", numeric, "also integrate the optimality ODE numerically");

  PointArgs delta_args;
  std::string delta_transform = "identity";
  std::optional<double> delta_zref;
  auto* delta_cmd = app.add_subcommand("delta", "leading Edgeworth term of a transformed R");
  add_point_options(delta_cmd, delta_args);
  delta_cmd->add_option("--transform", delta_transform, "identity, fisher, optimal or numeric")->capture_default_str();
  delta_cmd->add_option("--z-ref", delta_zref, "reference z of the optimal transform (default: z)");

  std::string ranges_model = "bvn";
  std::optional<double> ranges_alpha;
  std::string ranges_vs = "identity";
  bool ranges_threshold = false;
  int ranges_decimals = 5;
  auto* ranges_cmd = app.add_subcommand("ranges", "beta interval where the alpha-optimal transform dominates");
  ranges_cmd->add_option("--model", ranges_model, "bvn or squarev")->capture_default_str();
  ranges_cmd->add_option("--alpha", ranges_alpha, "significance level of the optimal transform");
  ranges_cmd->add_option("--vs", ranges_vs, "competitor: identity or fisher")->capture_default_str();
  ranges_cmd->add_flag("--threshold", ranges_threshold, "print the largest alpha whose range reaches beta = 0");
  ranges_cmd->add_option("--decimals", ranges_decimals, "decimal places")->capture_default_str()->check(
      CLI::Range(0, 17));

  double exact_rho = 0.0;
  long long exact_n = 10;
  double exact_alpha = 0.05;
  std::string exact_transform = "identity";
  std::optional<double> exact_zref;
  int exact_precision = 6;
  auto* exact_cmd = app.add_subcommand("exact", "exact SquareV rejection probability by enumeration");
  exact_cmd->add_option("--rho", exact_rho, "correlation")->required();
  exact_cmd->add_option("--n", exact_n, "sample size (1..200)")->required();
  exact_cmd->add_option("--alpha", exact_alpha, "significance level")->capture_default_str();
  exact_cmd->add_option("--transform", exact_transform, "identity, fisher, optimal or numeric")->capture_default_str();
  exact_cmd->add_option("--z-ref", exact_zref, "reference z of the optimal transform (default: z_alpha)");
  exact_cmd->add_option("--precision", exact_precision, "significant digits")->capture_default_str()->check(
      CLI::Range(1, 17));

  std::string sim_config;
  std::optional<std::string> sim_out;
  std::optional<unsigned> sim_threads;
  std::optional<std::string> sim_format;
  auto* sim_cmd = app.add_subcommand("simulate", "run a Monte Carlo grid from a JSON config");
  sim_cmd->add_option("--config", sim_config, "JSON run configuration")->required();
  sim_cmd->add_option("--out", sim_out, "output path ('-' for stdout); overrides the config");
  sim_cmd->add_option("--threads", sim_threads, "worker threads; CORRTRANS_THREADS takes precedence")->check(
      CLI::PositiveNumber);
  sim_cmd->add_option("--format", sim_format, "csv or json; overrides the config");

  std::string table_in;
  bool table_plot = false;
  int table_precision = 6;
  auto* table_cmd = app.add_subcommand("table", "render a stored run as text");
  table_cmd->add_option("--in", table_in, "CSV or JSON table")->required();
  table_cmd->add_flag("--plot-data", table_plot, "emit (n, eps * sqrt(n)) series instead");
  table_cmd->add_option("--precision", table_precision, "significant digits")->capture_default_str()->check(
      CLI::Range(1, 17));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  try {
    if (*transform_cmd) return cmd_transform(transform_args, numeric);
    if (*delta_cmd) return cmd_delta(delta_args, delta_transform, delta_zref);
    if (*ranges_cmd) return cmd_ranges(ranges_model, ranges_alpha, ranges_vs, ranges_threshold, ranges_decimals);
    if (*exact_cmd) {
      return cmd_exact(exact_rho, exact_n, exact_alpha, exact_transform, exact_zref, exact_precision);
    }
    if (*sim_cmd) return cmd_simulate(sim_config, sim_out, sim_threads, sim_format);
    if (*table_cmd) return cmd_table(table_in, table_plot, table_precision);
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
