#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "dpnls/errors.hpp"
#include "dpnls/unstable.hpp"

using namespace dpnls;
using namespace dpnls::cli;

namespace {

constexpr const char* kVersion = "0.1.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int report_error(const std::string& kind, const std::string& message, int code) {
  const json line = {{"error", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << line.dump() << '\n';
  return code;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// key=value lines; fills options that were not given on the command line
void apply_config(CLI::App& sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot read config file '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    std::ostringstream where;
    where << path << ":" << lineno;
    if (eq == std::string::npos) {
      throw PreconditionError("config " + where.str() + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto dot = key.find('.');
    if (dot != std::string::npos) {
      if (key.substr(0, dot) != sub.get_name()) continue;  // another subcommand's key
      key = key.substr(dot + 1);
    }
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    for (char& ch : key) {
      if (ch == '_') ch = '-';
    }
    if (key == "config" || key == "seedless") {
      throw PreconditionError("config " + where.str() + ": key '" + key + "' is not allowed in a config file");
    }
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr) {
      throw PreconditionError("config " + where.str() + ": unknown key '" + key +
                              "' for subcommand " + sub.get_name());
    }
    if (opt->count() > 0) continue;  // the flag wins
    opt->add_result(value);
    try {
      opt->run_callback();
    } catch (const CLI::Error& ex) {
      throw PreconditionError("config " + where.str() + ": " + ex.what());
    }
  }
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_output(const Output& o, const Common& c, const std::vector<std::string>& argv,
                  const std::string& command, const std::string& started, double seconds) {
  const std::string body = o.is_table ? o.table.csv() : o.document.dump(2) + "\n";
  if (c.out.empty()) {
    std::cout << body;
    std::cout.flush();
    return;
  }
  {
    std::ofstream f(c.out, std::ios::binary);
    if (!f) throw PreconditionError("cannot open output file '" + c.out + "'");
    f << body;
    if (!f) throw NumericalError("failed writing '" + c.out + "'");
  }
  const json meta = {{"command", command},
                     {"argv", argv},
                     {"version", kVersion},
                     {"output", c.out},
                     {"format", o.is_table ? "csv" : "json"},
                     {"started_utc", started},
                     {"elapsed_seconds", seconds},
                     {"exit_code", o.exit_code}};
  std::ofstream m(c.out + ".meta.json", std::ios::binary);
  m << meta.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  for (int i = 1; i < argc; ++i) {
    if (args[i].rfind("--seedless=", 0) == 0) {
      return report_error("usage", "--seedless takes no value (all computations are deterministic)", 2);
    }
  }

  CLI::App app{"Numerical lab for the 1-D double-power NLS"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common common;
  std::string config_path;
  bool seedless = false;
  common.p = std::nan("");
  common.q = std::nan("");

  auto add_common = [&](CLI::App* sub, const std::string& default_format) {
    sub->add_option("--p", common.p, "lower exponent p > 1");
    sub->add_option("--q", common.q, "upper exponent q > p");
    sub->add_option("--out", common.out, "output file (default stdout); adds <out>.meta.json");
    sub->add_option("--format", common.format, "csv or json")->default_str(default_format);
    sub->add_option("--quad-tol", common.quad_tol, "relative quadrature tolerance")
        ->default_val(1e-12);
    sub->add_flag("--seedless", seedless, "accepted for compatibility; every run is deterministic");
    sub->add_option("--config", config_path, "key=value file; flags take precedence");
  };

  CLI::App* classify_cmd = app.add_subcommand("classify", "stability class at omega = 0");
  add_common(classify_cmd, "json");

  ProfileArgs profile_args;
  CLI::App* profile_cmd = app.add_subcommand("profile", "phi_omega on a symmetric grid");
  add_common(profile_cmd, "csv");
  profile_cmd->add_option("--omega", profile_args.omega, "frequency >= 0")->default_val(0.0);
  profile_cmd->add_option("--xmax", profile_args.xmax, "grid covers [-xmax, xmax]")->default_val(20.0);
  profile_cmd->add_option("--n", profile_args.n, "number of grid points")->default_val(201);

  EtaArgs eta_args;
  CLI::App* eta_cmd = app.add_subcommand("eta", "eta_0 on a symmetric grid");
  add_common(eta_cmd, "csv");
  eta_cmd->add_option("--xmax", eta_args.xmax, "grid covers [-xmax, xmax]")->default_val(50.0);
  eta_cmd->add_option("--n", eta_args.n, "number of grid points")->default_val(201);

  MassCurveArgs mass_args;
  CLI::App* mass_cmd = app.add_subcommand("mass-curve", "M(omega), M'(omega) and a central difference");
  add_common(mass_cmd, "csv");
  mass_cmd->add_option("--omega-min", mass_args.omega_min)->default_val(0.0);
  mass_cmd->add_option("--omega-max", mass_args.omega_max)->default_val(1.0);
  mass_cmd->add_option("--n", mass_args.n, "number of omega values")->default_val(11);
  mass_cmd->add_option("--fd-step", mass_args.fd_step, "central difference step")->default_val(1e-4);

  UnstableArgs unstable_args;
  CLI::App* unstable_cmd = app.add_subcommand("unstable", "convergence table of <L0 psi_R, psi_R>");
  add_common(unstable_cmd, "json");
  unstable_cmd->add_option("--R", unstable_args.R, "cutoff radii (absolute)");
  unstable_cmd->add_option("--R-ell", unstable_args.R_ell, "cutoff radii in characteristic lengths");

  EvolveArgs evolve_args;
  CLI::App* evolve_cmd = app.add_subcommand("evolve", "split-step evolution and modulation distance");
  add_common(evolve_cmd, "csv");
  evolve_cmd->add_option("--lambda", evolve_args.lambda, "perturbation size relative to ||phi||_H1")->default_val(0.01);
  evolve_cmd->add_option("--R", evolve_args.R, "cutoff radius of psi_R (0: first negative entry)")->default_val(0.0);
  evolve_cmd->add_option("--omega", evolve_args.omega, "0: around phi_0; > 0: around phi_omega")->default_val(0.0);
  evolve_cmd->add_option("--t-max", evolve_args.t_max)->default_val(10.0);
  evolve_cmd->add_option("--dt", evolve_args.dt)->default_val(1e-3);
  evolve_cmd->add_option("--L", evolve_args.L, "half width (0: 100 characteristic lengths)")->default_val(0.0);
  evolve_cmd->add_option("--n", evolve_args.n, "grid size, a power of two")->default_val(1L << 14);
  evolve_cmd->add_option("--sample-every", evolve_args.sample_every)->default_val(100);
  evolve_cmd->add_flag("--experiment", evolve_args.experiment, "run both signs and report exits");
  evolve_cmd->add_option("--threshold-factor", evolve_args.threshold_factor)->default_val(10.0);

  CLI::App* validate_cmd = app.add_subcommand("validate", "cross-check suites");
  add_common(validate_cmd, "json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    return report_error("usage", ex.what(), 2);
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (!config_path.empty()) apply_config(*sub, config_path);
    if (common.format.empty()) {
      common.format = sub->get_option("--format")->get_default_str();
    }
    if (std::isnan(common.p) || std::isnan(common.q)) {
      throw PreconditionError("--p and --q are required");
    }
    (void)seedless;
    Output out;
    if (sub == classify_cmd) out = cmd_classify(common);
    else if (sub == profile_cmd) out = cmd_profile(common, profile_args);
    else if (sub == eta_cmd) out = cmd_eta(common, eta_args);
    else if (sub == mass_cmd) out = cmd_mass_curve(common, mass_args);
    else if (sub == unstable_cmd) out = cmd_unstable(common, unstable_args);
    else if (sub == evolve_cmd) out = cmd_evolve(common, evolve_args);
    else out = cmd_validate(common);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_output(out, common, args, sub->get_name(), started, seconds);
    if (out.exit_code == 4) {
      return report_error("inconclusive", sub->get_name() + ": experiment did not reach its target", 4);
    }
    if (out.exit_code == 3) {
      return report_error("numerical", sub->get_name() + ": one or more checks failed", 3);
    }
    return out.exit_code;
  } catch (const NotApplicable& ex) {
    return report_error("not_applicable", ex.what(), 2);
  } catch (const PreconditionError& ex) {
    return report_error("precondition", ex.what(), 2);
  } catch (const NumericalError& ex) {
    return report_error("numerical", ex.what(), 3);
  } catch (const std::exception& ex) {
    return report_error("numerical", ex.what(), 3);
  }
}
