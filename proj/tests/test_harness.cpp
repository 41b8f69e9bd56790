#include "kronsketch/harness.hpp"
#include "kronsketch/serialize.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace kronsketch;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

PhaseGrid hand_grid() {
  PhaseGrid g;
  g.p_values = {10, 20, 30};
  g.m_values = {4, 8, 12, 16};
  g.trials_per_cell = 4;
  g.d = 2;
  g.success_rate.resize(3, 4);
  g.success_rate << 0.0, 0.5, 1.0, 1.0,
                    0.0, 0.25, 0.75, 1.0,
                    0.0, 0.0, 0.0, 0.25;
  return g;
}

TrialConfig small_config() {
  TrialConfig c;
  c.p = 20;
  c.m = 16;
  c.d = 2;
  c.seed = 5;
  return c;
}

}  // namespace

TEST(RecoveryProgram, ParseRoundTrip) {
  for (auto mode : {RecoveryProgram::P1, RecoveryProgram::P2, RecoveryProgram::Constrained})
    EXPECT_EQ(parse_program(to_string(mode)), mode);
  EXPECT_THROW(parse_program("cvx"), ParameterError);
}

TEST(TrialConfig, Validation) {
  TrialConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.effective_delta(), 4);
  c.d = 41;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.success_threshold = 0.0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.m = 0;
  EXPECT_THROW(run_trial(c), ParameterError);
}

TEST(RunTrial, DeterministicInSeed) {
  const TrialRecord a = run_trial(small_config());
  const TrialRecord b = run_trial(small_config());
  EXPECT_EQ(a.result.x, b.result.x);
  EXPECT_EQ(a.linf_error, b.linf_error);
  EXPECT_EQ(a.result.iterations, b.result.iterations);
  TrialConfig other = small_config();
  other.seed = 6;
  EXPECT_NE(run_trial(other).x_l1, a.x_l1);
}

TEST(RunTrial, ErrorsAgainstPlantedMatrix) {
  const TrialConfig cfg = small_config();
  const TrialRecord r = run_trial(cfg);
  const TrialInstance inst = make_instance(cfg);
  EXPECT_DOUBLE_EQ(r.x_l1, l1_norm(inst.x));
  EXPECT_DOUBLE_EQ(r.linf_error, linf_norm(r.result.x - inst.x));
  EXPECT_DOUBLE_EQ(r.l1_error, l1_norm(r.result.x - inst.x));
  EXPECT_EQ(r.success, r.result.converged && r.linf_error <= 1e-4);
}

TEST(RunTrial, FortyByTwentyOneConfigurationSucceeds) {
  TrialConfig cfg;
  cfg.p = 40;
  cfg.m = 21;
  cfg.d = 4;
  cfg.delta = 4;
  cfg.seed = 1;
  const TrialRecord r = run_trial(cfg);
  EXPECT_TRUE(r.success) << "linf error " << r.linf_error << ", " << r.result.message;
}

TEST(RunTrial, TwoMeasurementsFailAtSixty) {
  TrialConfig cfg;
  cfg.p = 60;
  cfg.m = 2;
  cfg.d = 4;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    cfg.seed = s;
    cfg.solver.max_iter = 500;
    EXPECT_FALSE(run_trial(cfg).success);
  }
}

TEST(RunTrial, SmallSanityFixtureSucceeds) {
  TrialConfig cfg;
  cfg.p = 5;
  cfg.m = 5;
  cfg.delta = 5;
  cfg.d = 1;
  int ok = 0;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    cfg.seed = s;
    const TrialRecord r = run_trial(cfg);
    const SketchOperator op(make_instance(cfg).graph);
    const RecoveryResult lp = lp_oracle(op, op.forward(make_instance(cfg).x));
    EXPECT_NEAR(r.result.objective, lp.objective, 1e-6);
    ok += r.success;
  }
  EXPECT_GE(ok, 8);
}

TEST(RunTrial, NonConvergenceIsReportedAsFailure) {
  TrialConfig cfg = small_config();
  cfg.solver.max_iter = 1;
  cfg.solver.polish = false;
  const TrialRecord r = run_trial(cfg);
  EXPECT_FALSE(r.success);
  EXPECT_EQ(r.result.message.rfind("not converged: ", 0), 0u) << r.result.message;
}

TEST(RunTrial, OtherModes) {
  TrialConfig cfg = small_config();
  cfg.mode = RecoveryProgram::P2;
  cfg.lambda = 1e-3;
  cfg.success_threshold = 1e-2;
  EXPECT_TRUE(run_trial(cfg).success);
  cfg.mode = RecoveryProgram::Constrained;
  cfg.kappa = 0.0;
  cfg.success_threshold = 1e-4;
  EXPECT_EQ(run_trial(cfg).result.x, run_trial(small_config()).result.x);
}

TEST(Threads, ResolveAndEnvironmentOverride) {
  unsetenv("SKETCH_THREADS");
  EXPECT_EQ(resolve_threads(3), 3);
  EXPECT_GE(resolve_threads(0), 1);
  setenv("SKETCH_THREADS", "2", 1);
  EXPECT_EQ(resolve_threads(7), 2);
  setenv("SKETCH_THREADS", "junk", 1);
  EXPECT_EQ(resolve_threads(7), 7);
  unsetenv("SKETCH_THREADS");
}

TEST(Threads, ParallelForVisitsEveryIndexOnce) {
  for (int threads : {1, 2, 5}) {
    std::vector<std::atomic<int>> hits(97);
    parallel_for(hits.size(), threads, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
  parallel_for(0, 4, [](std::size_t) { FAIL(); });
}

TEST(IntRange, Values) {
  EXPECT_EQ(int_range(10, 60, 10), (std::vector<int>{10, 20, 30, 40, 50, 60}));
  EXPECT_EQ(int_range(2, 7, 2), (std::vector<int>{2, 4, 6}));
  EXPECT_THROW(int_range(5, 4, 1), ParameterError);
  EXPECT_THROW(int_range(1, 4, 0), ParameterError);
}

TEST(PhaseDiagram, ShapeRangeAndDeterminism) {
  PhaseOptions opts;
  opts.solver.max_iter = 1000;
  opts.threads = 1;
  const PhaseGrid a = phase_diagram({8, 12}, {4, 8, 12}, 3, 2, 77, opts);
  ASSERT_EQ(a.success_rate.rows(), 2);
  ASSERT_EQ(a.success_rate.cols(), 3);
  EXPECT_EQ(a.trials_per_cell, 3);
  EXPECT_GE(a.success_rate.minCoeff(), 0.0);
  EXPECT_LE(a.success_rate.maxCoeff(), 1.0);
  opts.threads = 3;
  const PhaseGrid b = phase_diagram({8, 12}, {4, 8, 12}, 3, 2, 77, opts);
  EXPECT_EQ(a.success_rate, b.success_rate);
}

TEST(PhaseDiagram, CellsReproduceUnderPartialReruns) {
  PhaseOptions opts;
  opts.solver.max_iter = 1000;
  const PhaseGrid full = phase_diagram({8, 12}, {4, 8, 12}, 4, 2, 78, opts);
  const PhaseGrid cell = phase_diagram({12}, {8}, 4, 2, 78, opts);
  EXPECT_EQ(cell.success_rate(0, 0), full.success_rate(1, 1));
}

TEST(PhaseDiagram, RejectsBadLists) {
  EXPECT_THROW(phase_diagram({12, 8}, {4}, 1, 2, 1), ParameterError);
  EXPECT_THROW(phase_diagram({}, {4}, 1, 2, 1), ParameterError);
  EXPECT_THROW(phase_diagram({8}, {4}, 0, 2, 1), ParameterError);
}

TEST(M50, Interpolation) {
  const PhaseGrid g = hand_grid();
  EXPECT_DOUBLE_EQ(*m50(g, 0), 8.0);
  EXPECT_DOUBLE_EQ(*m50(g, 1), 8.0 + (0.25 / 0.5) * 4.0);
  EXPECT_FALSE(m50(g, 2).has_value());
  PhaseGrid first = g;
  first.success_rate(0, 0) = 0.6;
  EXPECT_DOUBLE_EQ(*m50(first, 0), 4.0);
  EXPECT_DOUBLE_EQ(reference_m(14.0), 14.0);
}

TEST(PhaseCsv, ExactText) {
  const std::string csv = phase_csv(hand_grid());
  EXPECT_EQ(csv.substr(0, 9), "p,m,rate\n");
  EXPECT_NE(csv.find("\n20,12,0.75\n"), std::string::npos);
  EXPECT_NE(csv.find("\n10,4,0\n"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
}

TEST(PhaseSvg, MatchesGoldenFile) {
  const std::string svg = phase_svg(hand_grid());
  EXPECT_EQ(svg, read_file(std::string(KRONSKETCH_TEST_DATA) + "/phase_small.svg"));
}

TEST(PhaseSvg, GeometryAndColours) {
  const std::string svg = phase_svg(hand_grid());
  EXPECT_NE(svg.find("width=\"144\" height=\"160\""), std::string::npos);
  // 12 cells plus the background.
  std::size_t rects = 0;
  for (std::size_t pos = svg.find("<rect"); pos != std::string::npos; pos = svg.find("<rect", pos + 1))
    ++rects;
  EXPECT_EQ(rects, 13u);
  EXPECT_NE(svg.find("fill=\"#000000\""), std::string::npos);
  EXPECT_NE(svg.find("fill=\"#808080\""), std::string::npos);
  EXPECT_NE(svg.find("fill=\"#bfbfbf\""), std::string::npos);
  EXPECT_NE(svg.find("stroke=\"#d62728\""), std::string::npos);
}

TEST(NoiseSweep, ZeroScaleIsExactRecovery) {
  TrialConfig cfg;
  cfg.d = 2;
  cfg.seed = 9;
  const auto rows = noise_sweep(cfg, {0.0}, 3, 1);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.noise_l1, 0.0);
    EXPECT_LE(r.error_linf, 1e-4);
    EXPECT_TRUE(r.converged);
  }
}

TEST(NoiseSweep, NoiseMassMatchesScaleAndThreadsAgree) {
  TrialConfig cfg = small_config();
  const auto one = noise_sweep(cfg, {0.01, 0.02}, 2, 1);
  const auto many = noise_sweep(cfg, {0.01, 0.02}, 2, 3);
  ASSERT_EQ(one.size(), 4u);
  for (std::size_t k = 0; k < one.size(); ++k) {
    EXPECT_EQ(one[k].error_l1, many[k].error_l1);
    const TrialConfig trial = [&] {
      TrialConfig t = cfg;
      t.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(one[k].trial));
      return t;
    }();
    EXPECT_NEAR(one[k].noise_l1, one[k].scale * l1_norm(make_instance(trial).x), 1e-9);
  }
  EXPECT_EQ(noise_csv(one).substr(0, 51), "scale,trial,noise_l1,error_l1,error_linf,converged\n");
  EXPECT_THROW(noise_sweep(cfg, {0.1, 0.05}, 1), ParameterError);
  EXPECT_THROW(noise_sweep(cfg, {-0.1}, 1), ParameterError);
}

TEST(Serialize, SolverOptionsRoundTrip) {
  SolverOptions o;
  o.max_iter = 77;
  o.rho = 2.5;
  o.polish = false;
  const SolverOptions back = Json(o).get<SolverOptions>();
  EXPECT_EQ(back.max_iter, 77);
  EXPECT_EQ(back.rho, 2.5);
  EXPECT_FALSE(back.polish);
  EXPECT_THROW(Json::parse(R"({"maxiter": 3})").get<SolverOptions>(), ParameterError);
  EXPECT_THROW(Json::parse(R"({"max_iter": "many"})").get<SolverOptions>(), ParameterError);
  EXPECT_THROW(Json::parse(R"({"max_iter": 0})").get<SolverOptions>(), ParameterError);
}

TEST(Serialize, TrialConfigRoundTrip) {
  TrialConfig c;
  c.p = 30;
  c.m = 17;
  c.d = 3;
  c.seed = 0xfedcba9876543210ULL;
  c.mode = RecoveryProgram::Constrained;
  c.kappa = 0.25;
  c.values = ValueSpec::parse("uniform(-2,3)");
  c.clip_binary = true;
  const Json j = c;
  const TrialConfig back = j.get<TrialConfig>();
  EXPECT_EQ(Json(back), j);
  EXPECT_EQ(back.seed, c.seed);
  EXPECT_EQ(back.mode, RecoveryProgram::Constrained);
  const TrialConfig partial = Json::parse(R"({"p": 12, "d": 2})").get<TrialConfig>();
  EXPECT_EQ(partial.p, 12);
  EXPECT_EQ(partial.m, 21);
  EXPECT_THROW(Json::parse(R"({"mode": "cvx"})").get<TrialConfig>(), ParameterError);
  EXPECT_THROW(Json::parse(R"({"p": 3, "d": 4})").get<TrialConfig>(), ParameterError);
}

TEST(Serialize, CovarianceConfigRoundTrip) {
  CovarianceConfig c;
  c.n = 500;
  c.constrained = false;
  c.kappa_grid = {0.5, 1.0};
  const Json j = c;
  EXPECT_EQ(j.at("mode"), "exact");
  EXPECT_EQ(Json(j.get<CovarianceConfig>()), j);
}

TEST(Serialize, TrialRecordFields) {
  const Json j = run_trial(small_config());
  for (const char* key : {"config", "success", "linf_error", "l1_error", "x_l1", "result"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_TRUE(j.at("result").contains("converged"));
  EXPECT_EQ(j.at("config").at("delta"), 3);
}
