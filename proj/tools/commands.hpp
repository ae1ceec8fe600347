#pragma once

#include <string>
#include <vector>

#include "output.hpp"

namespace dpnls::cli {

struct Common {
  double p = 0.0;
  double q = 0.0;
  std::string out;
  std::string format;
  double quad_tol = 1e-12;
};

/// What a command produced: a JSON document or a table.
struct Output {
  bool is_table = false;
  json document;
  Table table;
  int exit_code = 0;
};

struct ProfileArgs {
  double omega = 0.0;
  double xmax = 20.0;
  long n = 201;
};

struct EtaArgs {
  double xmax = 50.0;
  long n = 201;
};

struct MassCurveArgs {
  double omega_min = 0.0;
  double omega_max = 1.0;
  long n = 11;
  double fd_step = 1e-4;
};

struct UnstableArgs {
  std::vector<double> R;
  std::vector<double> R_ell;
};

struct EvolveArgs {
  double lambda = 0.01;
  double R = 0.0;  // 0: first negative entry of the evolve schedule
  double omega = 0.0;
  double t_max = 10.0;
  double dt = 1e-3;
  double L = 0.0;  // 0: 100 characteristic lengths
  long n = 1L << 14;
  long sample_every = 100;
  bool experiment = false;
  double threshold_factor = 10.0;
};

Output cmd_classify(const Common& c);
Output cmd_profile(const Common& c, const ProfileArgs& a);
Output cmd_eta(const Common& c, const EtaArgs& a);
Output cmd_mass_curve(const Common& c, const MassCurveArgs& a);
Output cmd_unstable(const Common& c, const UnstableArgs& a);
Output cmd_evolve(const Common& c, const EvolveArgs& a);
Output cmd_validate(const Common& c);

}  // namespace dpnls::cli
