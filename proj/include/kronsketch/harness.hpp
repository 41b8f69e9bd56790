#ifndef KRONSKETCH_HARNESS_HPP
#define KRONSKETCH_HARNESS_HPP

// Monte-Carlo experiment drivers: single recovery trials, (p, m) phase
// diagrams and noise sweeps, with CSV/SVG emitters.

#include "kronsketch/common.hpp"
#include "kronsketch/ensemble.hpp"
#include "kronsketch/operator.hpp"
#include "kronsketch/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace kronsketch {

enum class RecoveryProgram { P1, P2, Constrained };

inline std::string to_string(RecoveryProgram mode) {
  switch (mode) {
    case RecoveryProgram::P1: return "p1";
    case RecoveryProgram::P2: return "p2";
    case RecoveryProgram::Constrained: return "constrained";
  }
  return "";
}

inline RecoveryProgram parse_program(const std::string& text) {
  if (text == "p1") return RecoveryProgram::P1;
  if (text == "p2") return RecoveryProgram::P2;
  if (text == "constrained") return RecoveryProgram::Constrained;
  throw ParameterError("unknown recovery mode '" + text + "'");
}

struct TrialConfig {
  int p = 40;
  int m = 21;
  int d = 4;
  int delta = 0;  // 0 selects default_delta(p)
  std::uint64_t seed = 1;
  RecoveryProgram mode = RecoveryProgram::P1;
  double lambda = 1e-3;  // p2 mode
  double kappa = 0.0;    // constrained mode
  ValueSpec values = ValueSpec::gaussian();
  double success_threshold = 1e-4;
  bool clip_binary = false;
  SolverOptions solver;

  int effective_delta() const { return delta > 0 ? delta : default_delta(p); }

  void validate() const {
    require(p >= 1 && m >= 1 && d >= 1 && delta >= 0,
            "TrialConfig: dimensions must be positive");
    require(d <= p, "TrialConfig: d must not exceed p");
    require(success_threshold > 0.0, "TrialConfig: success threshold must be positive");
    require(lambda > 0.0, "TrialConfig: lambda must be positive");
    require(kappa >= 0.0, "TrialConfig: kappa must be non-negative");
  }
};

struct TrialRecord {
  TrialConfig config;
  bool success = false;
  double linf_error = 0.0;
  double l1_error = 0.0;
  double x_l1 = 0.0;
  RecoveryResult result;
};

// Planted instance of a trial: graph, support and matrix, each from its own
// child seed.
struct TrialInstance {
  BipartiteGraph graph;
  Support support;
  Matrix x;
};

inline TrialInstance make_instance(const TrialConfig& cfg) {
  TrialInstance inst;
  inst.graph = gen_left_regular(cfg.p, cfg.m, cfg.effective_delta(), derive_seed(cfg.seed, 0));
  inst.support = gen_distributed_support(cfg.p, cfg.d, derive_seed(cfg.seed, 1));
  inst.x = gen_distributed_matrix(inst.support, cfg.values, derive_seed(cfg.seed, 2));
  return inst;
}

inline RecoveryResult recover(const SketchOperator& op, const Matrix& y,
                              RecoveryProgram mode, double lambda, double kappa,
                              const SolverOptions& opts) {
  switch (mode) {
    case RecoveryProgram::P1: return solve_p1(op, y, opts);
    case RecoveryProgram::P2: return solve_p2(op, y, lambda, opts);
    case RecoveryProgram::Constrained: return solve_constrained(op, y, kappa, opts);
  }
  return {};
}

inline TrialRecord run_trial(const TrialConfig& cfg) {
  cfg.validate();
  const TrialInstance inst = make_instance(cfg);
  const SketchOperator op(inst.graph, cfg.clip_binary);
  TrialRecord rec;
  rec.config = cfg;
  rec.result = recover(op, op.forward(inst.x), cfg.mode, cfg.lambda, cfg.kappa, cfg.solver);
  rec.linf_error = linf_norm(rec.result.x - inst.x);
  rec.l1_error = l1_norm(rec.result.x - inst.x);
  rec.x_l1 = l1_norm(inst.x);
  rec.success = rec.result.converged && rec.linf_error <= cfg.success_threshold;
  if (!rec.result.converged) rec.result.message = "not converged: " + rec.result.message;
  return rec;
}

// Worker count: SKETCH_THREADS if set, else the request, else the hardware.
inline int resolve_threads(int requested = 0) {
  if (const char* env = std::getenv("SKETCH_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(0..n-1) on a pool of workers pulling indices from a shared counter.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  threads = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
}

struct PhaseGrid {
  std::vector<int> p_values;
  std::vector<int> m_values;
  Matrix success_rate;  // rows follow p_values, columns m_values
  int trials_per_cell = 0;
  int d = 0;
};

struct PhaseOptions {
  int delta = 0;  // 0 selects default_delta(p) per row
  ValueSpec values = ValueSpec::gaussian();
  SolverOptions solver = [] {
    SolverOptions o;
    o.max_iter = 5000;
    return o;
  }();
  double success_threshold = 1e-4;
  bool clip_binary = false;
  int threads = 0;
};

inline std::vector<int> int_range(int first, int last, int step) {
  require(step > 0 && first <= last, "int_range: need first <= last and step > 0");
  std::vector<int> out;
  for (int v = first; v <= last; v += step) out.push_back(v);
  return out;
}

// Per-trial seeds hash (master, p, m, trial), so any cell can be re-run alone.
inline PhaseGrid phase_diagram(const std::vector<int>& p_values,
                               const std::vector<int>& m_values, int trials, int d,
                               std::uint64_t master_seed, const PhaseOptions& opts = {}) {
  require(!p_values.empty() && !m_values.empty(), "phase_diagram: empty grid");
  require(std::is_sorted(p_values.begin(), p_values.end()) &&
              std::is_sorted(m_values.begin(), m_values.end()),
          "phase_diagram: value lists must be ascending");
  require(trials >= 1, "phase_diagram: need at least one trial per cell");
  PhaseGrid grid;
  grid.p_values = p_values;
  grid.m_values = m_values;
  grid.trials_per_cell = trials;
  grid.d = d;
  const std::size_t np = p_values.size(), nm = m_values.size();
  std::vector<char> outcome(np * nm * static_cast<std::size_t>(trials), 0);
  parallel_for(outcome.size(), resolve_threads(opts.threads), [&](std::size_t task) {
    const std::size_t t = task % trials;
    const std::size_t cell = task / trials;
    const int p = p_values[cell / nm];
    const int m = m_values[cell % nm];
    TrialConfig cfg;
    cfg.p = p;
    cfg.m = m;
    cfg.d = std::min(d, p);
    cfg.delta = opts.delta;
    cfg.seed = derive_seed(master_seed, static_cast<std::uint64_t>(p),
                           static_cast<std::uint64_t>(m), t);
    cfg.values = opts.values;
    cfg.success_threshold = opts.success_threshold;
    cfg.clip_binary = opts.clip_binary;
    cfg.solver = opts.solver;
    outcome[task] = run_trial(cfg).success ? 1 : 0;
  });
  grid.success_rate = Matrix::Zero(np, nm);
  for (std::size_t task = 0; task < outcome.size(); ++task)
    grid.success_rate(task / trials / nm, task / trials % nm) += outcome[task];
  grid.success_rate /= trials;
  return grid;
}

// Smallest m at which the success rate reaches 1/2, linearly interpolated
// between grid columns; empty if the row never reaches 1/2.
inline std::optional<double> m50(const PhaseGrid& grid, std::size_t p_index) {
  const auto row = grid.success_rate.row(static_cast<Eigen::Index>(p_index));
  for (Eigen::Index k = 0; k < row.size(); ++k) {
    if (row(k) < 0.5) continue;
    if (k == 0) return grid.m_values[0];
    const double r0 = row(k - 1), r1 = row(k);
    const double m0 = grid.m_values[k - 1], m1 = grid.m_values[k];
    return m0 + (0.5 - r0) / (r1 - r0) * (m1 - m0);
  }
  return std::nullopt;
}

// Reference boundary p = m^2 / 14, i.e. m = sqrt(14 p).
inline double reference_m(double p) { return std::sqrt(14.0 * p); }

inline std::string phase_csv(const PhaseGrid& grid) {
  std::ostringstream os;
  os << "p,m,rate\n";
  for (std::size_t i = 0; i < grid.p_values.size(); ++i)
    for (std::size_t j = 0; j < grid.m_values.size(); ++j)
      os << grid.p_values[i] << ',' << grid.m_values[j] << ','
         << std::setprecision(6) << grid.success_rate(i, j) << '\n';
  return os.str();
}

// Heatmap with p along x and m along y (m increasing upwards); black is
// failure in every trial, white success in every trial. The reference curve
// m = sqrt(14 p) is drawn in red.
inline std::string phase_svg(const PhaseGrid& grid, int cell = 16) {
  const int np = static_cast<int>(grid.p_values.size());
  const int nm = static_cast<int>(grid.m_values.size());
  const int margin = 48;
  const int width = 2 * margin + np * cell;
  const int height = 2 * margin + nm * cell;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
     << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"#ffffff\"/>\n";
  for (int i = 0; i < np; ++i)
    for (int j = 0; j < nm; ++j) {
      const int level = static_cast<int>(std::lround(255.0 * grid.success_rate(i, j)));
      std::ostringstream color;
      color << '#' << std::hex << std::setfill('0') << std::setw(2) << level
            << std::setw(2) << level << std::setw(2) << level;
      os << "<rect x=\"" << margin + i * cell << "\" y=\"" << margin + (nm - 1 - j) * cell
         << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"" << color.str()
         << "\"/>\n";
    }

  // Map (p, m) to pixel centres by linear interpolation over the grid values.
  auto axis = [](const std::vector<int>& values, double v) {
    if (values.size() == 1) return 0.0;
    const double lo = values.front(), hi = values.back();
    return (v - lo) / (hi - lo) * static_cast<double>(values.size() - 1);
  };
  std::ostringstream path;
  path << std::fixed << std::setprecision(2);
  const int samples = 64;
  bool first = true;
  for (int s = 0; s <= samples; ++s) {
    const double p = grid.p_values.front() +
                     (grid.p_values.back() - grid.p_values.front()) * s / double(samples);
    const double m = reference_m(p);
    if (m < grid.m_values.front() || m > grid.m_values.back()) continue;
    const double x = margin + (axis(grid.p_values, p) + 0.5) * cell;
    const double y = margin + (nm - 1 - axis(grid.m_values, m) + 0.5) * cell;
    path << (first ? "M" : " L") << x << ' ' << y;
    first = false;
  }
  if (!first)
    os << "<path d=\"" << path.str()
       << "\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
     << "\" font-size=\"14\" text-anchor=\"middle\">p</text>\n";
  os << "<text x=\"14\" y=\"" << height / 2
     << "\" font-size=\"14\" text-anchor=\"middle\">m</text>\n";
  os << "</svg>\n";
  return os.str();
}

struct NoiseRow {
  double scale = 0.0;
  int trial = 0;
  double noise_l1 = 0.0;
  double error_l1 = 0.0;
  double error_linf = 0.0;
  bool converged = false;
};

// For each scale s, X^ = X + N with dense Gaussian N rescaled so that
// ||N||_1 = s ||X||_1; X^ is sketched and recovered, and the error is
// measured against the sparse X.
inline std::vector<NoiseRow> noise_sweep(const TrialConfig& cfg,
                                         const std::vector<double>& scales, int trials,
                                         int threads = 0) {
  cfg.validate();
  require(trials >= 1, "noise_sweep: need at least one trial");
  require(std::is_sorted(scales.begin(), scales.end()), "noise_sweep: scales must ascend");
  for (double s : scales) require(s >= 0.0, "noise_sweep: scales must be non-negative");
  std::vector<NoiseRow> rows(scales.size() * static_cast<std::size_t>(trials));
  parallel_for(rows.size(), resolve_threads(threads), [&](std::size_t task) {
    const int t = static_cast<int>(task % trials);
    const double scale = scales[task / trials];
    TrialConfig trial = cfg;
    trial.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(t));
    const TrialInstance inst = make_instance(trial);
    const SketchOperator op(inst.graph, cfg.clip_binary);
    Rng rng(derive_seed(trial.seed, 3));
    Matrix noise = gaussian_matrix(cfg.p, cfg.p, rng);
    noise *= scale * l1_norm(inst.x) / l1_norm(noise);
    const RecoveryResult r = recover(op, op.forward(inst.x + noise), cfg.mode, cfg.lambda,
                                     cfg.kappa, cfg.solver);
    NoiseRow& row = rows[task];
    row.scale = scale;
    row.trial = t;
    row.noise_l1 = l1_norm(noise);
    row.error_l1 = l1_norm(r.x - inst.x);
    row.error_linf = linf_norm(r.x - inst.x);
    row.converged = r.converged;
  });
  return rows;
}

inline std::string noise_csv(const std::vector<NoiseRow>& rows) {
  std::ostringstream os;
  os << "scale,trial,noise_l1,error_l1,error_linf,converged\n" << std::setprecision(10);
  for (const auto& r : rows)
    os << r.scale << ',' << r.trial << ',' << r.noise_l1 << ',' << r.error_l1 << ','
       << r.error_linf << ',' << (r.converged ? 1 : 0) << '\n';
  return os.str();
}

}  // namespace kronsketch

#endif  // KRONSKETCH_HARNESS_HPP
