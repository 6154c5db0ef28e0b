#include "config.hpp"

#include "mapest/embedding.hpp"
#include "mapest/errors.hpp"
#include "mapest/prior.hpp"
#include "mapest/risk.hpp"
#include "mapest/subriemannian.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace mapest;
using namespace mapest::cli;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitTube = 4;

constexpr const char* kSignResolution =
    "L assembled as diag(kappa) - 4*Dirichlet form; alpha is its largest eigenvalue";

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool strict = false;
  bool force = false;
};

struct Run {
  ExperimentConfig cfg;
  json hashed;
  std::string hash;
  fs::path dir;
};

class TubeViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

std::vector<std::string> coord_cols(const std::string& prefix, int n) {
  std::vector<std::string> c;
  for (int i = 0; i < n; ++i) c.push_back(prefix + std::to_string(i));
  return c;
}

std::string row(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

std::string row(const Vec& v) { return row(std::vector<double>(v.data(), v.data() + v.size())); }

Run prepare(const Options& o) {
  Run r{load_config(o.config), {}, {}, {}};
  if (o.seed) {
    r.cfg.seed = *o.seed;
    r.cfg.raw["seed"] = *o.seed;
  }
  if (!o.out.empty()) r.cfg.output_dir = o.out;
  r.hashed = r.cfg.raw;
  r.hashed.erase("output");
  r.hash = config_hash(r.hashed);
  r.dir = r.cfg.output_dir;
  if (r.dir.is_relative() && o.out.empty()) r.dir = fs::path(o.config).parent_path() / r.dir;
  fs::create_directories(r.dir);
  for (const auto& entry : fs::directory_iterator(r.dir)) {
    std::string name = entry.path().filename().string();
    if (name.size() < 13 || name.substr(name.size() - 13) != "_summary.json") continue;
    std::ifstream in(entry.path());
    json prev;
    try {
      in >> prev;
    } catch (...) {
      continue;
    }
    if (prev.contains("config_hash") && prev["config_hash"] != r.hash && !o.force)
      throw ConfigError("output directory " + r.dir.string() + " holds results of a different config (hash " +
                        prev["config_hash"].get<std::string>() + "); use --force to overwrite");
  }
  return r;
}

void write_summary(const Run& r, const std::string& command, json results, double wall) {
  json s;
  s["command"] = command;
  s["config"] = r.hashed;
  s["config_hash"] = r.hash;
  s["library_version"] = MAPEST_VERSION;
  s["wall_time_s"] = wall;
  s["results"] = std::move(results);
  std::ofstream(r.dir / (command + "_summary.json")) << s.dump(2) << "\n";
}

PriorDensity read_grid_prior(const std::string& path, const QuadratureGrid& grid) {
  std::ifstream in(path);
  std::string line;
  std::vector<double> vals;
  int col = -1;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (col < 0) {
      auto it = std::find(cells.begin(), cells.end(), "lambda");
      if (it != cells.end()) {
        col = int(it - cells.begin());
        continue;
      }
      col = int(cells.size()) - 1;
    }
    try {
      vals.push_back(std::stod(cells.at(col)));
    } catch (...) {
      throw ConfigError("prior grid file " + path + " line " + std::to_string(lineno) + ": expected a number");
    }
  }
  if (vals.size() != grid.size())
    throw ConfigError("prior grid file has " + std::to_string(vals.size()) + " values, grid has " +
                      std::to_string(grid.size()));
  return prior_from_values(grid, vals);
}

std::optional<ScalarField> weight_field(const ExperimentConfig& c, const QuadratureGrid& grid) {
  if (!c.weight_amplitude) return std::nullopt;
  double amp = *c.weight_amplitude;
  int axis = c.weight_axis;
  return ScalarField::from_function(grid, [amp, axis](const Vec& x) { return std::sqrt(1 + amp * std::cos(x(axis))); });
}

struct Solved {
  EigenSolution sol;
  DiscreteOperator L;
  std::vector<double> e;
};

Solved solve_prior(const ExperimentConfig& c, const MapDescriptor& gamma, const QuadratureGrid& grid) {
  ScalarField kappa = ScalarField::from_values(kappa_field(gamma, grid));
  CometricField mu = cometric(gamma, grid);
  auto a = weight_field(c, grid);
  DiscreteOperator L = assemble_L(kappa, mu, a ? &*a : nullptr);
  EigenSolution sol = a ? solve_weighted_prior(L, *a) : solve_optimal_prior(L);
  return {std::move(sol), std::move(L), e_density_field(gamma, grid)};
}

PriorDensity prior_from_config(const ExperimentConfig& c, const MapDescriptor& gamma, const QuadratureGrid& grid) {
  switch (c.prior) {
    case PriorSource::uniform:
      return uniform_prior(grid);
    case PriorSource::cosine: {
      double amp = c.prior_amplitude;
      int axis = c.prior_axis;
      if (axis < 0 || axis >= grid.manifold.dim()) throw ConfigError("config field 'prior.axis': out of range");
      return prior_from_function(grid, [amp, axis](const Vec& x) { return 1 + amp * std::cos(x(axis)); });
    }
    case PriorSource::grid_file:
      return read_grid_prior(c.prior_path, grid);
    case PriorSource::solve_optimal:
      return solve_prior(c, gamma, grid).sol.prior;
  }
  throw ConfigError("unknown prior source");
}

json cmd_describe(const Run& r) {
  const auto& c = r.cfg;
  MapDescriptor gamma = map_from_config(c);
  QuadratureGrid grid = grid_from_config(c);
  const int m = c.manifold.dim();
  std::ofstream out(r.dir / "kappa.csv");
  auto cols = coord_cols("theta", m);
  for (std::string s : {"e_density", "hess_gamma_sq", "hess_iota_sq", "tension_iota_sq", "tension_gamma_sq",
                        "ricci_coupling", "grad_tension_coupling", "kappa"})
    cols.push_back(s);
  out << join(cols) << "\n";
  double kmin = 1e300, kmax = -1e300, kmean = 0, emean = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const ChartPoint& t = grid.nodes[i];
    CurvatureReport k = kappa_general(gamma, t);
    SecondFundamentalForm B = second_fundamental_form(t);
    double tau_iota = B.tension.squaredNorm();
    std::vector<double> v(t.coords.data(), t.coords.data() + m);
    for (double x : {k.e_density, k.hess_gamma_sq, B.norm_sq, tau_iota, k.tension_sq, k.ricci_coupling,
                     k.grad_tension_coupling, k.kappa})
      v.push_back(x);
    out << row(v) << "\n";
    kmin = std::min(kmin, k.kappa);
    kmax = std::max(kmax, k.kappa);
    kmean += grid.weights[i] * k.kappa;
    emean += grid.weights[i] * k.e_density;
  }
  double vol = grid.total_weight();
  return json{{"manifold", c.manifold.name()}, {"map", gamma.name()},        {"nodes", grid.size()},
              {"kappa_min", kmin},             {"kappa_max", kmax},          {"kappa_mean", kmean / vol},
              {"e_density_mean", emean / vol}, {"tube_radius", c.manifold.reach()}};
}

json cmd_prior_solve(const Run& r) {
  const auto& c = r.cfg;
  MapDescriptor gamma = map_from_config(c);
  QuadratureGrid grid = grid_from_config(c);
  Solved s = solve_prior(c, gamma, grid);
  const int m = c.manifold.dim();
  std::ofstream out(r.dir / "omega.csv");
  auto cols = coord_cols("theta", m);
  cols.push_back("omega");
  cols.push_back("lambda");
  out << join(cols) << "\n";
  double norm = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<double> v(grid.nodes[i].coords.data(), grid.nodes[i].coords.data() + m);
    v.push_back(s.sol.prior.omega[i]);
    v.push_back(s.sol.prior.lambda[i]);
    out << row(v) << "\n";
    norm += grid.weights[i] * s.sol.prior.lambda[i];
  }
  MinimaxReport mm = minimax_report(s.sol, s.L, s.e, c.epsilons);
  return json{{"alpha", s.sol.alpha},
              {"residual", s.sol.residual},
              {"iterations", s.sol.iterations},
              {"spectral_gap", s.sol.spectral_gap},
              {"dense_solver", s.sol.dense},
              {"weighted", c.weight_amplitude.has_value()},
              {"integrable_distribution", s.sol.integrable_distribution},
              {"normalization", norm},
              {"r_theta", mm.r_theta},
              {"r_star", mm.r_star},
              {"epsilons", mm.epsilons},
              {"alpha_eps", mm.alpha_eps},
              {"alpha_eps_affine", mm.affine},
              {"sign_resolution", kSignResolution}};
}

EstimatorKind kind_of(const std::string& s) {
  if (s == "plugin") return EstimatorKind::plugin;
  if (s == "second_order") return EstimatorKind::second_order;
  return EstimatorKind::exact_euclidean;
}

json cmd_risk(const Run& r, const Options& o) {
  const auto& c = r.cfg;
  MapDescriptor gamma = map_from_config(c);
  QuadratureGrid grid = grid_from_config(c);
  PriorDensity prior = prior_from_config(c, gamma, grid);
  std::optional<ExpansionCoefficients> closed;
  try {
    closed = expansion_coefficients(gamma, prior, grid);
  } catch (const PriorError& e) {
    std::cerr << "warning: closed-form coefficients unavailable: " << e.what() << "\n";
  }
  double reach = c.manifold.reach();
  for (double e : c.epsilons)
    if (e > reach / 6) std::cerr << "warning: epsilon " << e << " exceeds the tube-safety bound " << reach / 6 << "\n";
  MonteCarloOptions mc;
  mc.samples = c.samples;
  mc.seed = c.seed;
  mc.threads = o.threads;
  std::ofstream rc(r.dir / "risk.csv");
  rc << "estimator,epsilon,value,std_error,samples,rejected_mass,rejected_bound\n";
  std::ofstream fc(r.dir / "fit.csv");
  fc << "estimator,a2_hat,a2_se,a4_hat,a4_se,a6_hat,residual_norm,A2,A4\n";
  json fits = json::array();
  bool violation = false;
  for (const auto& name : c.estimators) {
    if (name == "exact_euclidean" && !gamma.codomain_is_ambient()) {
      std::cerr << "warning: skipping exact_euclidean (codomain is not euclidean)\n";
      continue;
    }
    EstimatorSpec spec = make_estimator(kind_of(name), gamma, prior, c.epsilons.front(), c.quadrature_resolution);
    RiskSweep sw = risk_sweep(spec, prior, c.epsilons, mc);
    for (const auto& e : sw.estimates) {
      double bound = rejected_mass_bound(reach, e.epsilon);
      if (e.rejected_mass > bound) violation = true;
      rc << name << "," << format_double(e.epsilon) << "," << format_double(e.value) << ","
         << format_double(e.std_error) << "," << e.samples << "," << format_double(e.rejected_mass) << ","
         << format_double(bound) << "\n";
    }
    double A2 = closed ? closed->A2 : std::nan(""), A4 = closed ? closed->A4 : std::nan("");
    fc << name << "," << row(std::vector<double>{sw.fit.a2_hat, sw.fit.se_a2(), sw.fit.a4_hat, sw.fit.se_a4(),
                                                 sw.fit.a6_hat, sw.fit.residual_norm, A2, A4})
       << "\n";
    json f{{"estimator", name},          {"a2_hat", sw.fit.a2_hat}, {"a2_se", sw.fit.se_a2()},
           {"a4_hat", sw.fit.a4_hat},    {"a4_se", sw.fit.se_a4()}, {"a6_hat", sw.fit.a6_hat},
           {"residual_norm", sw.fit.residual_norm}};
    if (closed) {
      f["A2"] = A2;
      f["A4"] = A4;
      f["a2_within_half_percent"] = std::abs(sw.fit.a2_hat - A2) <= 0.005 * std::abs(A2);
      if (name == "second_order")
        f["a4_within_20_percent"] = std::abs(sw.fit.a4_hat - A4) <= 0.2 * std::max(std::abs(A4), 1e-12);
    }
    fits.push_back(f);
  }
  json res{{"fits", fits}, {"samples_per_epsilon", c.samples}, {"epsilons", c.epsilons},
           {"common_random_numbers", true}};
  if (closed) {
    res["A2"] = closed->A2;
    res["A4"] = closed->A4;
    res["A4_operator"] = closed->A4_operator;
  }
  if (violation && o.strict) {
    write_summary(r, "risk", res, 0);
    throw TubeViolation("rejected mass exceeds the tube bound");
  }
  return res;
}

std::vector<Vec> read_points(const std::string& path, int dim) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read points file " + path);
  std::vector<Vec> pts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> v;
    std::stringstream ss(line);
    bool header = false;
    for (std::string cell; std::getline(ss, cell, ',');) {
      try {
        v.push_back(std::stod(cell));
      } catch (...) {
        header = true;
        break;
      }
    }
    if (header && pts.empty() && lineno == 1) continue;
    if (header || int(v.size()) != dim)
      throw ConfigError("points file " + path + " line " + std::to_string(lineno) + ": expected " +
                        std::to_string(dim) + " numbers");
    pts.push_back(Eigen::Map<Vec>(v.data(), dim));
  }
  return pts;
}

json cmd_estimate(const Run& r, const Options& o) {
  const auto& c = r.cfg;
  if (c.points_path.empty()) throw ConfigError("config field 'points': missing (required by estimate)");
  MapDescriptor gamma = map_from_config(c);
  QuadratureGrid grid = grid_from_config(c);
  PriorDensity prior = prior_from_config(c, gamma, grid);
  const int s = c.manifold.ambient_dim();
  const int n = gamma.codomain().dim();
  auto pts = read_points(c.points_path, s);
  double eps = c.epsilons.front();
  bool ambient = gamma.codomain_is_ambient();
  EstimatorSpec plug = make_estimator(EstimatorKind::plugin, gamma, prior, eps);
  EstimatorSpec second = make_estimator(EstimatorKind::second_order, gamma, prior, eps);
  std::optional<ExactBayesQuadrature> q1, q2;
  if (ambient) {
    EstimatorSpec ex = make_estimator(EstimatorKind::exact_euclidean, gamma, prior, eps, c.quadrature_resolution);
    q1.emplace(ex, c.quadrature_resolution);
    q2.emplace(ex, 2 * c.quadrature_resolution);
  }
  std::ofstream out(r.dir / "estimates.csv");
  auto cols = coord_cols("x", s);
  cols.push_back("status");
  for (auto& k : coord_cols("plugin", n)) cols.push_back(k);
  for (auto& k : coord_cols("second_order", n)) cols.push_back(k);
  if (ambient) {
    for (auto& k : coord_cols("exact", n)) cols.push_back(k);
    cols.push_back("exact_converged");
  }
  out << "index," << join(cols) << "\n";
  std::size_t outside = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    AmbientPoint x{pts[i]};
    out << i << "," << row(pts[i]) << ",";
    try {
      ChartPoint a = plugin_estimate(plug, x);
      ChartPoint b = second_order_estimate(second, x);
      out << "ok," << row(a.coords) << "," << row(b.coords);
      if (ambient) {
        Vec e1 = q1->evaluate(x), e2 = q2->evaluate(x);
        out << "," << row(e2) << "," << ((e1 - e2).norm() < 1e-10 ? 1 : 0);
      }
    } catch (const OutsideTubeError&) {
      ++outside;
      out << "outside_tube";
      for (int k = 0; k < 2 * n; ++k) out << ",";
      // the exact posterior mean needs no projection
      if (ambient) {
        try {
          Vec e1 = q1->evaluate(x), e2 = q2->evaluate(x);
          out << "," << row(e2) << "," << ((e1 - e2).norm() < 1e-10 ? 1 : 0);
        } catch (const UnderflowError&) {
          for (int k = 0; k < n + 1; ++k) out << ",";
        }
      }
    } catch (const UnderflowError&) {
      out << "underflow";
      int empty = 2 * n + (ambient ? n + 1 : 0);
      for (int k = 0; k < empty; ++k) out << ",";
    }
    out << "\n";
  }
  json res{{"points", pts.size()}, {"outside_tube", outside}, {"epsilon", eps}};
  if (outside > 0 && o.strict) {
    write_summary(r, "estimate", res, 0);
    throw TubeViolation(std::to_string(outside) + " points outside the tube");
  }
  return res;
}

int cmd_selftest() {
  int failed = 0;
  auto check = [&](const std::string& name, bool ok) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
    failed += ok ? 0 : 1;
  };
  Manifold c1 = Manifold::circle(1), s2 = Manifold::sphere(1), t2 = Manifold::flat_torus(1, 1);
  ChartPoint p = make_point(c1, {0.3});
  check("kappa circle inclusion = 1/2", std::abs(kappa_general(MapDescriptor::inclusion(c1), p).kappa - 0.5) < 1e-6);
  check("kappa sphere identity = 2/3",
        std::abs(kappa_general(MapDescriptor::identity(s2), make_point(s2, {1.0, 0.4})).kappa - 2.0 / 3) < 1e-6);
  check("kappa circle power 2 = 4",
        std::abs(kappa_general(MapDescriptor::circle_power(c1, 2), p).kappa - 4.0) < 1e-6);
  check("tension of torus projection = 0",
        jet2(MapDescriptor::torus_to_circle(t2), make_point(t2, {0.2, 1.1})).tension.norm() < 1e-6);
  ChartPoint q = make_point(s2, {1.2, 2.0});
  TangentVector v = make_tangent(q, {0.3, -0.5});
  check("exp/log roundtrip on sphere", (log_map(q, exp_map(q, v)).components - v.components).norm() < 1e-8);
  QuadratureGrid g = build_grid(c1, 64);
  auto gamma = MapDescriptor::inclusion(c1);
  auto L = assemble_L(ScalarField::from_values(kappa_field(gamma, g)), cometric(gamma, g));
  check("optimal prior alpha = 1/2 on circle", std::abs(solve_optimal_prior(L).alpha - 0.5) < 1e-8);
  auto ex = expansion_coefficients(gamma, uniform_prior(g), g);
  check("expansion coefficients (1, 1/2)", std::abs(ex.A2 - 1) < 1e-10 && std::abs(ex.A4 - 0.5) < 1e-8);
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Second-order Bayes and minimax estimation of maps between manifolds"};
  app.fallthrough();
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config, "experiment configuration (JSON)");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--seed", o.seed, "master seed override");
  app.add_option("--threads", o.threads, "worker threads for Monte Carlo")->check(CLI::PositiveNumber);
  app.add_flag("--strict", o.strict, "tube violations are errors");
  app.add_flag("--force", o.force, "overwrite results of a different config");
  std::vector<std::string> names{"describe", "prior-solve", "risk", "estimate", "selftest"};
  for (const auto& n : names) app.add_subcommand(n);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }
  std::string cmd = app.get_subcommands().front()->get_name();
  if (cmd == "selftest") return cmd_selftest();
  try {
    if (o.config.empty()) throw ConfigError("--config is required");
    Run r = prepare(o);
    auto t0 = std::chrono::steady_clock::now();
    json res;
    if (cmd == "describe") res = cmd_describe(r);
    if (cmd == "prior-solve") res = cmd_prior_solve(r);
    if (cmd == "risk") res = cmd_risk(r, o);
    if (cmd == "estimate") res = cmd_estimate(r, o);
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_summary(r, cmd, res, wall);
    std::cout << res.dump(2) << "\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const TubeViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitTube;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
