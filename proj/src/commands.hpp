#ifndef GRAPHHEAT_CLI_COMMANDS_HPP
#define GRAPHHEAT_CLI_COMMANDS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

namespace graphheat::cli {

// Exit codes shared by every subcommand.
inline constexpr int exit_ok = 0;
inline constexpr int exit_violation = 1;
inline constexpr int exit_input = 2;

struct GraphOptions {
  std::string file;                 // graph document; empty means build from family
  std::string family = "z-segment"; // z-segment | lattice | star | random
  int half_width = 20;
  int dim = 1;
  int leaves = 3;
  int vertices = 50;
  double weight = 1.0;
  double mu = 1.0;
  std::string metric;               // override; empty means document value / combinatorial
  std::string density_kind;         // override; empty means document value
  double rho0 = 1.0;
  double sigma = 1.0;
  double k = 2.0;
  std::int64_t x0 = 0;
};

struct RunInfo {
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  std::string config_hash;
};

struct SimulateOptions {
  std::string initial = "delta"; // zero | delta | random | file
  std::string initial_file;
  double amplitude = 1.0;
  double support = 3.0;
  double T = 1.0;
  double dt = 1e-3;
  std::string scheme = "implicit";
  std::size_t stride = 1;
};

struct VerifyOptions {
  std::vector<std::string> suites{"default"};
  std::vector<double> alphas{0.1, 1.0, 5.0};
  std::vector<double> sigmas{0.5, 1.0, 2.0};
  std::optional<double> gamma;
  bool exploratory = false;
  int random_graphs = 5;
  int trials = 20;
  double tol = 1e-12;
};

struct CertifyOptions {
  std::string trajectory;
  std::string energies;
  double p = 2.0;
  std::vector<double> radii;
  std::optional<double> s;
  bool not_intrinsic = false;
  bool not_one_intrinsic = false;
  double K = 0.8;
  double delta = 0.1;
  bool plot = false;
};

struct ReportOptions {
  std::vector<double> radii;
  std::string csv;
  std::string xcol = "R";
  std::vector<std::string> ycols{"E", "bound"};
  bool log_y = true;
  std::string title;
};

int run_graph_build(const GraphOptions& g, const RunInfo& run, const std::string& output);
int run_graph_validate(const GraphOptions& g, const RunInfo& run);
int run_graph_metric(const GraphOptions& g, const RunInfo& run, const std::string& output);
int run_simulate(const GraphOptions& g, const SimulateOptions& s, const RunInfo& run);
int run_verify(const GraphOptions& g, const VerifyOptions& v, const RunInfo& run);
int run_certify(const GraphOptions& g, const SimulateOptions& s, const CertifyOptions& c,
                const RunInfo& run);
int run_report_volume(const GraphOptions& g, const ReportOptions& r, const RunInfo& run);
int run_report_plot(const ReportOptions& r, const RunInfo& run);

// Builds the full command tree; `dispatch` runs the selected subcommand.
struct Cli {
  CLI::App app{"Weighted-graph heat equation: simulation, inequality verification and growth certificates",
               "graphheat"};
  GraphOptions graph;
  RunInfo run;
  SimulateOptions simulate;
  VerifyOptions verify;
  CertifyOptions certify;
  ReportOptions report;
  std::string output;

  Cli();
  int dispatch();
};

int main_entry(int argc, char** argv);

} // namespace graphheat::cli

#endif
