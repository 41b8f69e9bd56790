// kronsketch: command-line front end for sketching, recovery, property checks
// and the Monte-Carlo experiments.
//
// Exit codes: 0 success, 1 parameter error or unknown subcommand,
// 2 solver non-convergence.

#include "kronsketch/kronsketch.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace kronsketch;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParam = 1;
constexpr int kExitNotConverged = 2;

struct Globals {
  std::uint64_t seed = 1;
  std::string out = ".";
  std::string config;
  int delta = 0;
  bool clip_binary = false;
  int threads = 0;
  Json config_json = Json::object();

  fs::path path(const std::string& name) const { return fs::path(out) / name; }

  // Sections "solver", "trial" and "covariance" of the --config file.
  const Json* section(const char* name) const {
    return config_json.contains(name) ? &config_json.at(name) : nullptr;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  auto os = io::open_out(path);
  os << text;
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

void write_matrix(const fs::path& path, const Matrix& x) {
  auto os = io::open_out(path);
  io::write_matrix_csv(os, x);
}

Matrix load_matrix(const std::string& file) {
  auto is = io::open_in(file);
  return io::read_matrix_csv(is);
}

BipartiteGraph load_graph(const std::string& file) {
  auto is = io::open_in(file);
  return io::read_graph(is);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ParameterError("cannot parse list item '" + item + "'");
    }
  }
  return out;
}

// Options shared by the subcommands that plant a random instance.
struct InstanceFlags {
  int p = 40;
  int m = 21;
  int d = 4;
  std::string values = "gaussian(0,1)";

  void add(CLI::App* cmd) {
    cmd->add_option("--p", p, "matrix dimension")->capture_default_str();
    cmd->add_option("--m", m, "sketch dimension")->capture_default_str();
    cmd->add_option("--d", d, "distributed sparsity level")->capture_default_str();
    cmd->add_option("--values", values, "unit | uniform(a,b) | gaussian(mu,sigma)")
        ->capture_default_str();
  }
};

SolverOptions solver_options(const Globals& g, int max_iter_flag) {
  SolverOptions o;
  if (const Json* s = g.section("solver")) o = s->get<SolverOptions>();
  if (max_iter_flag > 0) o.max_iter = max_iter_flag;
  o.validate();
  return o;
}

int delta_for(const Globals& g, int p) { return g.delta > 0 ? g.delta : default_delta(p); }

void print_table(const std::vector<std::pair<std::string, std::string>>& rows) {
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.first.size());
  for (const auto& r : rows)
    std::cout << std::left << std::setw(static_cast<int>(width) + 2) << r.first << r.second
              << '\n';
}

std::string pass_fail(bool ok) { return ok ? "PASS" : "FAIL"; }

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensor-product sketching and l1 recovery of distributed-sparse matrices"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--config", g.config, "JSON config file");
  app.add_option("--delta", g.delta, "left degree (default max(2, ceil(ln p)))");
  app.add_flag("--clip-binary", g.clip_binary, "use 0/1 adjacency instead of edge counts");
  app.add_option("--threads", g.threads, "worker threads (SKETCH_THREADS overrides)");

  std::function<int()> action;
  auto command = [&](const char* name, const char* help) {
    return app.add_subcommand(name, help);
  };

  // gen-graph
  InstanceFlags gen;
  auto* gen_cmd = command("gen-graph", "write a random delta-left-regular graph");
  gen_cmd->add_option("--p", gen.p, "left vertices")->capture_default_str();
  gen_cmd->add_option("--m", gen.m, "right vertices")->capture_default_str();
  gen_cmd->callback([&] {
    action = [&] {
      const BipartiteGraph graph = gen_left_regular(gen.p, gen.m, delta_for(g, gen.p), g.seed);
      auto os = io::open_out(g.path("graph.txt"));
      io::write_graph(os, graph);
      io::write_graph(std::cout, graph);
      return kExitOk;
    };
  });

  // sketch
  InstanceFlags sk;
  std::string sk_graph, sk_x;
  auto* sk_cmd = command("sketch", "compute Y = A X A^T");
  sk.add(sk_cmd);
  sk_cmd->add_option("--graph", sk_graph, "graph file (generated if absent)");
  sk_cmd->add_option("--x", sk_x, "matrix CSV (planted if absent)");
  sk_cmd->callback([&] {
    action = [&] {
      BipartiteGraph graph = sk_graph.empty()
                                 ? gen_left_regular(sk.p, sk.m, delta_for(g, sk.p),
                                                    derive_seed(g.seed, 0))
                                 : load_graph(sk_graph);
      Matrix x;
      if (sk_x.empty()) {
        const Support s = gen_distributed_support(graph.p(), sk.d, derive_seed(g.seed, 1));
        x = gen_distributed_matrix(s, ValueSpec::parse(sk.values), derive_seed(g.seed, 2));
        write_matrix(g.path("x.csv"), x);
      } else {
        x = load_matrix(sk_x);
      }
      if (sk_graph.empty()) {
        auto os = io::open_out(g.path("graph.txt"));
        io::write_graph(os, graph);
      }
      const SketchOperator op(graph, g.clip_binary);
      write_matrix(g.path("sketch.csv"), op.forward(x));
      std::cout << "wrote " << g.path("sketch.csv").string() << '\n';
      return kExitOk;
    };
  });

  // recover
  InstanceFlags rec;
  std::string rec_graph, rec_y, rec_mode = "p1";
  double rec_lambda = 1e-3, rec_kappa = 0.0, rec_threshold = 1e-4;
  int rec_max_iter = 0;
  auto* rec_cmd = command("recover", "recover X from a sketch (planted trial if no --y)");
  rec.add(rec_cmd);
  rec_cmd->add_option("--graph", rec_graph, "graph file for a given sketch");
  rec_cmd->add_option("--y", rec_y, "sketch CSV");
  rec_cmd->add_option("--mode", rec_mode, "p1 | p2 | constrained")->capture_default_str();
  rec_cmd->add_option("--lambda", rec_lambda, "penalty for p2")->capture_default_str();
  rec_cmd->add_option("--kappa", rec_kappa, "residual bound for constrained")
      ->capture_default_str();
  rec_cmd->add_option("--threshold", rec_threshold, "success threshold (l-infinity)")
      ->capture_default_str();
  rec_cmd->add_option("--max-iter", rec_max_iter, "solver iteration cap");
  rec_cmd->callback([&] {
    action = [&] {
      const SolverOptions opts = solver_options(g, rec_max_iter);
      const RecoveryProgram mode = parse_program(rec_mode);
      if (!rec_y.empty()) {
        if (rec_graph.empty()) throw ParameterError("recover: --y needs --graph");
        const SketchOperator op(load_graph(rec_graph), g.clip_binary);
        const RecoveryResult r = recover(op, load_matrix(rec_y), mode, rec_lambda, rec_kappa, opts);
        write_matrix(g.path("x_star.csv"), r.x);
        const Json j = r;
        write_json(g.path("trial.json"), j);
        std::cout << j.dump(2) << '\n';
        return r.converged ? kExitOk : kExitNotConverged;
      }
      TrialConfig cfg;
      if (const Json* t = g.section("trial")) cfg = t->get<TrialConfig>();
      if (rec_cmd->count("--p")) cfg.p = rec.p;
      if (rec_cmd->count("--m")) cfg.m = rec.m;
      if (rec_cmd->count("--d")) cfg.d = rec.d;
      if (rec_cmd->count("--values")) cfg.values = ValueSpec::parse(rec.values);
      if (rec_cmd->count("--mode")) cfg.mode = mode;
      if (rec_cmd->count("--lambda")) cfg.lambda = rec_lambda;
      if (rec_cmd->count("--kappa")) cfg.kappa = rec_kappa;
      if (rec_cmd->count("--threshold")) cfg.success_threshold = rec_threshold;
      if (app.count("--seed") || !g.section("trial")) cfg.seed = g.seed;
      if (g.delta > 0) cfg.delta = g.delta;
      if (g.clip_binary) cfg.clip_binary = true;
      if (g.section("solver") || rec_max_iter > 0) cfg.solver = opts;
      const TrialRecord record = run_trial(cfg);
      write_matrix(g.path("x_star.csv"), record.result.x);
      const Json j = record;
      write_json(g.path("trial.json"), j);
      std::cout << j.dump(2) << '\n';
      return record.result.converged ? kExitOk : kExitNotConverged;
    };
  });

  // check-expansion
  InstanceFlags ex;
  ex.p = 100;
  ex.m = 87;
  ex.d = 3;
  double ex_eps = 0.25;
  int ex_instances = 1;
  bool ex_large = false;
  auto* ex_cmd = command("check-expansion", "test weak distributed expansion of G (x) G");
  ex.add(ex_cmd);
  ex_cmd->add_option("--eps", ex_eps, "expansion parameter in (0, 1/4]")->capture_default_str();
  ex_cmd->add_option("--instances", ex_instances, "number of (graph, support) pairs")
      ->capture_default_str();
  ex_cmd->add_flag("--allow-large", ex_large, "permit p > 300");
  ex_cmd->callback([&] {
    action = [&] {
      require(ex_instances >= 1, "check-expansion: need at least one instance");
      Json reports = Json::array();
      int passed = 0;
      for (int t = 0; t < ex_instances; ++t) {
        const TensorGraph tg(
            gen_left_regular(ex.p, ex.m, delta_for(g, ex.p), derive_seed(g.seed, t, 0)));
        const Support omega = gen_distributed_support(ex.p, ex.d, derive_seed(g.seed, t, 1));
        const ExpansionReport r = check_expansion(tg, omega, ex_eps, ex_large);
        passed += r.passed();
        reports.push_back(r);
        print_table({{"instance", std::to_string(t)},
                     {"|N(Omega)| >= bound", num(r.neighborhood_size) + " vs " + num(r.bound) +
                                                 "  " + pass_fail(r.part1)},
                     {"outside collisions", num(r.max_collision_outside) + " vs " +
                                                num(r.collision_bound) + "  " +
                                                pass_fail(r.part2)},
                     {"inside collisions", num(r.max_collision_inside) + " vs " +
                                               num(r.collision_bound) + "  " +
                                               pass_fail(r.part3)}});
      }
      std::cout << "passed " << passed << "/" << ex_instances << '\n';
      write_json(g.path("expansion.json"), Json{{"passed", passed}, {"reports", reports}});
      return kExitOk;
    };
  });

  // check-rip
  InstanceFlags rip;
  double rip_eps = 0.25;
  int rip_instances = 100;
  auto* rip_cmd = command("check-rip", "l1 restricted isometry ratios of X -> A X A^T");
  rip.add(rip_cmd);
  rip_cmd->add_option("--eps", rip_eps, "lower bound is 1 - 2 eps")->capture_default_str();
  rip_cmd->add_option("--instances", rip_instances, "random instances")->capture_default_str();
  rip_cmd->callback([&] {
    action = [&] {
      require(rip_instances >= 1, "check-rip: need at least one instance");
      const ValueSpec values = ValueSpec::parse(rip.values);
      int lower = 0, upper = 0;
      Json ratios = Json::array();
      for (int t = 0; t < rip_instances; ++t) {
        const SketchOperator op(
            gen_left_regular(rip.p, rip.m, delta_for(g, rip.p), derive_seed(g.seed, t, 0)),
            g.clip_binary);
        const Support s = gen_distributed_support(rip.p, rip.d, derive_seed(g.seed, t, 1));
        const RipReport r =
            check_rip1(op, gen_distributed_matrix(s, values, derive_seed(g.seed, t, 2)), rip_eps);
        lower += r.lower_ok;
        upper += r.upper_ok;
        ratios.push_back(r.ratio);
      }
      print_table({{"upper bound", std::to_string(upper) + "/" + std::to_string(rip_instances)},
                   {"lower bound", std::to_string(lower) + "/" + std::to_string(rip_instances)}});
      write_json(g.path("rip.json"),
                 Json{{"upper_ok", upper}, {"lower_ok", lower}, {"ratios", ratios}});
      return kExitOk;
    };
  });

  // check-nullspace
  InstanceFlags ns;
  int ns_samples = 200;
  auto* ns_cmd = command("check-nullspace", "sample kernel mass ratios on a distributed support");
  ns.add(ns_cmd);
  ns_cmd->add_option("--samples", ns_samples, "kernel samples")->capture_default_str();
  ns_cmd->callback([&] {
    action = [&] {
      const SketchOperator op(
          gen_left_regular(ns.p, ns.m, delta_for(g, ns.p), derive_seed(g.seed, 0)), g.clip_binary);
      const Support omega = gen_distributed_support(ns.p, ns.d, derive_seed(g.seed, 1));
      const NullspaceReport r = check_nullspace(op, omega, ns_samples, derive_seed(g.seed, 2));
      const Json j = r;
      write_json(g.path("nullspace.json"), j);
      print_table({{"kernel dimension", std::to_string(r.kernel_dimension)},
                   {"max mass ratio", num(r.max_ratio)},
                   {"ratio < 1", pass_fail(r.max_ratio < 1.0)}});
      return kExitOk;
    };
  });

  // phase-diagram
  int pd_trials = 40, pd_d = 4, pd_max_iter = 5000;
  std::vector<int> pd_p = {10, 60, 2}, pd_m = {2, 60, 2};
  std::string pd_values = "gaussian(0,1)";
  auto* pd_cmd = command("phase-diagram", "success rate over a (p, m) grid");
  pd_cmd->add_option("--trials", pd_trials, "trials per cell")->capture_default_str();
  pd_cmd->add_option("--d", pd_d, "distributed sparsity level")->capture_default_str();
  pd_cmd->add_option("--p-range", pd_p, "first last step")->expected(3)->capture_default_str();
  pd_cmd->add_option("--m-range", pd_m, "first last step")->expected(3)->capture_default_str();
  pd_cmd->add_option("--values", pd_values, "value distribution")->capture_default_str();
  pd_cmd->add_option("--max-iter", pd_max_iter, "solver iteration cap")->capture_default_str();
  pd_cmd->callback([&] {
    action = [&] {
      PhaseOptions opts;
      opts.delta = g.delta;
      opts.values = ValueSpec::parse(pd_values);
      opts.solver = solver_options(g, pd_max_iter);
      opts.clip_binary = g.clip_binary;
      opts.threads = g.threads;
      const PhaseGrid grid = phase_diagram(int_range(pd_p[0], pd_p[1], pd_p[2]),
                                           int_range(pd_m[0], pd_m[1], pd_m[2]), pd_trials,
                                           pd_d, g.seed, opts);
      write_text(g.path("phase.csv"), phase_csv(grid));
      write_text(g.path("phase.svg"), phase_svg(grid));
      std::cout << "p  m50  sqrt(14p)  in-band\n";
      for (std::size_t i = 0; i < grid.p_values.size(); ++i) {
        const auto m = m50(grid, i);
        const double ref = reference_m(grid.p_values[i]);
        const bool ok = m && *m >= ref / 2.0 && *m <= 2.0 * ref;
        std::cout << grid.p_values[i] << "  " << (m ? num(*m) : std::string("-")) << "  "
                  << num(ref) << "  " << pass_fail(ok) << '\n';
      }
      return kExitOk;
    };
  });

  // cov-sketch
  CovarianceConfig cov;
  std::string cov_mode;
  double cov_kappa = -1.0;
  auto* cov_cmd = command("cov-sketch", "sketch a planted covariance and recover it");
  cov_cmd->add_option("--p", cov.p)->capture_default_str();
  cov_cmd->add_option("--d", cov.d)->capture_default_str();
  cov_cmd->add_option("--n", cov.n, "samples")->capture_default_str();
  cov_cmd->add_option("--m", cov.m)->capture_default_str();
  cov_cmd->add_option("--mode", cov_mode, "exact | constrained");
  cov_cmd->add_option("--kappa", cov_kappa, "residual bound (cross-validated if absent)");
  cov_cmd->add_option("--folds", cov.folds)->capture_default_str();
  cov_cmd->callback([&] {
    action = [&] {
      CovarianceConfig cfg;
      if (const Json* c = g.section("covariance")) cfg = c->get<CovarianceConfig>();
      if (cov_cmd->count("--p")) cfg.p = cov.p;
      if (cov_cmd->count("--d")) cfg.d = cov.d;
      if (cov_cmd->count("--n")) cfg.n = cov.n;
      if (cov_cmd->count("--m")) cfg.m = cov.m;
      if (cov_cmd->count("--folds")) cfg.folds = cov.folds;
      if (cov_cmd->count("--kappa")) cfg.kappa = cov_kappa;
      if (!cov_mode.empty()) {
        require(cov_mode == "exact" || cov_mode == "constrained",
                "cov-sketch: mode must be exact or constrained");
        cfg.constrained = cov_mode == "constrained";
      }
      if (app.count("--seed") || !g.section("covariance")) cfg.seed = g.seed;
      if (g.delta > 0) cfg.delta = g.delta;
      if (g.section("solver")) cfg.solver = solver_options(g, 0);
      const CovarianceOutcome out = run_covariance_experiment(cfg);
      write_matrix(g.path("sigma.csv"), out.sigma);
      write_matrix(g.path("sigma_z.csv"), out.sketch);
      write_matrix(g.path("sigma_star.csv"), out.recovery.x);
      Json j = out;
      j["config"] = cfg;
      write_json(g.path("covariance.json"), j);
      std::cout << j.dump(2) << '\n';
      return out.recovery.converged ? kExitOk : kExitNotConverged;
    };
  });

  // graph-sketch
  std::string gs_edges, gs_partition;
  int gs_p = 40, gs_m = 21, gs_degree = 3;
  auto* gs_cmd = command("graph-sketch", "sketch a graph through a vertex partition and unsketch");
  gs_cmd->add_option("--edges", gs_edges, "edge list (random graph if absent)");
  gs_cmd->add_option("--partition", gs_partition, "partition file (random if absent)");
  gs_cmd->add_option("--p", gs_p, "vertices of the random graph")->capture_default_str();
  gs_cmd->add_option("--m", gs_m, "parts of the random partition")->capture_default_str();
  gs_cmd->add_option("--max-degree", gs_degree, "off-diagonal degree bound")
      ->capture_default_str();
  gs_cmd->callback([&] {
    action = [&] {
      Matrix adjacency;
      if (gs_edges.empty()) {
        adjacency = random_bounded_degree_graph(gs_p, gs_degree, derive_seed(g.seed, 0));
      } else {
        auto is = io::open_in(gs_edges);
        adjacency = io::read_edge_list(is);
      }
      const int p = static_cast<int>(adjacency.rows());
      std::vector<std::vector<int>> parts;
      if (gs_partition.empty()) {
        parts = random_partition(p, gs_m, delta_for(g, p), derive_seed(g.seed, 1));
        auto os = io::open_out(g.path("partition.txt"));
        io::write_partition(os, parts);
      } else {
        auto is = io::open_in(gs_partition);
        parts = io::read_partition(is);
      }
      const PartitionedGraph pg(adjacency, parts);
      const Matrix y = graph_sketch(pg);
      const UnsketchResult un = graph_unsketch(y, pg.indicator(), solver_options(g, 0));
      const bool exact = un.adjacency == adjacency;
      write_matrix(g.path("graph_sketch.csv"), y);
      write_matrix(g.path("adjacency_star.csv"), un.adjacency);
      Json j{{"result", un.recovery}, {"exact_round_trip", exact}};
      write_json(g.path("graph.json"), j);
      std::cout << j.dump(2) << '\n';
      return un.recovery.converged ? kExitOk : kExitNotConverged;
    };
  });

  // noise-sweep
  InstanceFlags nz;
  std::string nz_scales = "0,0.0125,0.025,0.05,0.1";
  int nz_trials = 20, nz_max_iter = 5000;
  auto* nz_cmd = command("noise-sweep", "recovery error against dense perturbations");
  nz.add(nz_cmd);
  nz_cmd->add_option("--scales", nz_scales, "comma-separated ||N||_1 / ||X||_1 values")
      ->capture_default_str();
  nz_cmd->add_option("--trials", nz_trials, "trials per scale")->capture_default_str();
  nz_cmd->add_option("--max-iter", nz_max_iter, "solver iteration cap")->capture_default_str();
  nz_cmd->callback([&] {
    action = [&] {
      TrialConfig cfg;
      cfg.p = nz.p;
      cfg.m = nz.m;
      cfg.d = nz.d;
      cfg.delta = g.delta;
      cfg.seed = g.seed;
      cfg.values = ValueSpec::parse(nz.values);
      cfg.clip_binary = g.clip_binary;
      cfg.solver = solver_options(g, nz_max_iter);
      const auto rows = noise_sweep(cfg, parse_list(nz_scales), nz_trials, g.threads);
      write_text(g.path("noise.csv"), noise_csv(rows));
      std::cout << noise_csv(rows);
      return kExitOk;
    };
  });

  // arrow-demo
  int ar_p = 40, ar_m = 21;
  auto* ar_cmd = command("arrow-demo", "two arrow matrices with the same sketch");
  ar_cmd->add_option("--p", ar_p)->capture_default_str();
  ar_cmd->add_option("--m", ar_m)->capture_default_str();
  ar_cmd->callback([&] {
    action = [&] {
      const SketchOperator op(gen_left_regular(ar_p, ar_m, delta_for(g, ar_p),
                                               derive_seed(g.seed, 0)),
                              g.clip_binary);
      const ArrowWitness w = arrow_ambiguity_witness(op, derive_seed(g.seed, 1));
      const RecoveryResult r = solve_p1(op, op.forward(w.x), solver_options(g, 0));
      write_matrix(g.path("arrow_x.csv"), w.x);
      write_matrix(g.path("arrow_x_tilde.csv"), w.x_tilde);
      Json j{{"sketch_residual", w.sketch_residual},
             {"difference_linf", linf_norm(w.x - w.x_tilde)},
             {"recovery_error_linf", linf_norm(r.x - w.x)},
             {"result", r}};
      write_json(g.path("arrow.json"), j);
      std::cout << j.dump(2) << '\n';
      return kExitOk;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kExitParam;
  }

  try {
    if (!g.config.empty()) {
      std::ifstream is = io::open_in(g.config);
      try {
        g.config_json = Json::parse(is);
      } catch (const Json::parse_error& e) {
        throw ParameterError(std::string("config: ") + e.what());
      }
      json_detail::check_keys(g.config_json, {"solver", "trial", "covariance"}, "config");
    }
    return action();
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParam;
  } catch (const Json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParam;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNotConverged;
  }
}
