#include <doctest.h>

#include <string>

#include "qeth/scenario.hpp"
#include "qeth/sweep.hpp"

using namespace qeth;

namespace {

const char* kMinimal = R"(# one switch
[topology]
user alice 02:00:00:00:00:01
user bob 02:00:00:00:00:02
switch s1 02:00:00:00:01:01
link alice s1 classical quantum d=10 pq=auto
link s1 bob classical quantum d=20 pb=1e-6 pcol=0.1

[defaults]
P_swap=0.9
n=1.468
)";

const char* kSweep = R"([chain]
rb=1e9 rq=1e6 pq=auto pcol=0.1
[experiment]
mode=sweep
D=400
l=40,50,70,100
N_q=1,100
)";

// Runs parse_scenario and returns the (line, column) of the error.
std::pair<std::size_t, std::size_t> error_at(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ScenarioError& e) {
    return {e.line(), e.column()};
  }
  FAIL("scenario was accepted");
  return {};
}

}  // namespace

TEST_CASE("minimal scenario") {
  const Scenario s = parse_scenario(kMinimal, "min");
  CHECK(s.id == "min");
  CHECK(s.nodes.size() == 3);
  CHECK(s.links.size() == 2);
  CHECK(s.defaults.p_swap == 0.9);
  CHECK(s.defaults.bits == 320);
  const auto grid = grid_points(s);
  REQUIRE(grid.size() == 1);
  CHECK(grid[0].label == "base");
  CHECK(grid_switches(s, grid[0]) == 1);
  const auto run = build_run(s, grid[0]);
  CHECK(run.params.p_swap == 0.9);
  CHECK(run.topology.link(0).params.qubit_loss_prob == doctest::Approx(1 - std::pow(10.0, -0.2)));
  CHECK(run.topology.link(1).params.collision_prob == 0.1);
}

TEST_CASE("user-user link is a semantic error on its line") {
  const std::string text = std::string(kMinimal) + "[experiment]\n";
  std::string bad = text;
  bad.replace(bad.find("link s1 bob"), 11, "link alice bob");
  CHECK(error_at(bad).first == 7);
}

TEST_CASE("dangling node reference") {
  std::string bad = kMinimal;
  bad.replace(bad.find("link s1 bob"), 11, "link s1 carol");
  CHECK(error_at(bad).first == 7);
}

TEST_CASE("sweep grid over D and l") {
  const Scenario s = parse_scenario(kSweep, "f6");
  const auto grid = grid_points(s);
  REQUIRE(grid.size() == 8);
  const std::size_t want[] = {10, 10, 8, 8, 6, 6, 4, 4};
  for (std::size_t i = 0; i < 8; ++i) CHECK(grid_switches(s, grid[i]) == want[i]);
  CHECK(grid[0].label == "D=400;l=40;N_q=1");
  CHECK(grid[7].label == "D=400;l=100;N_q=100");
  const auto run = build_run(s, grid[5]);
  CHECK(run.params.pkt.qubits == 100);
  CHECK(run.topology.switch_count() == 6);
  CHECK(run.topology.link(0).params.length_km == 70);
}

TEST_CASE("range axes") {
  const Scenario s = parse_scenario("[chain]\nrq=1e6\n[experiment]\nD=100\nl=10:100:10\nP_col=0.1,0.3\n");
  const auto g = grid_points(s);
  CHECK(g.size() == 20);
  CHECK(*g.back().link_km == 100);
  CHECK(*g.back().collision_prob == 0.3);
  CHECK(build_run(s, g[1]).topology.link(0).params.collision_prob == 0.3);
}

TEST_CASE("strict parsing reports line and column") {
  CHECK(error_at("[defaults]\nfoo=1\n") == std::pair<std::size_t, std::size_t>{2, 1});
  CHECK(error_at("[experiment]\nD=400 l=\n").first == 2);
  CHECK(error_at("[experiment]\nmode=dance\n").first == 2);
  CHECK(error_at("[topology]\nuser alice 02:00:00:00:00\n") == std::pair<std::size_t, std::size_t>{2, 12});
  CHECK(error_at("[bogus]\n").first == 1);
  CHECK(error_at("user alice 02:00:00:00:00:01\n").first == 1);
  CHECK(error_at("[chain]\nd=10\n[experiment]\nD=1\nl=1\n").first == 2);
  std::string bad = kMinimal;
  bad.replace(bad.find("pb=1e-6"), 7, "pb=2");
  CHECK(error_at(bad).first == 7);
}

TEST_CASE("whole-file semantic errors") {
  CHECK_THROWS_AS(parse_scenario("[experiment]\nD=400\n"), ScenarioError);
  CHECK_THROWS_AS(parse_scenario("[defaults]\nP_swap=0.5\n"), ScenarioError);
  CHECK_THROWS_AS(parse_scenario(std::string(kMinimal) + "[experiment]\nD=10\nl=5\n"), ScenarioError);
}

TEST_CASE("analyze rows") {
  const Scenario s = parse_scenario(kSweep, "f6");
  const std::string csv = analyze_csv(s);
  CHECK(csv.rfind("scenario_id,S,V,l_km,D_km,N_q,P_swap,t_req_s,t_tq_s,t_disc_s,t_swap_s,quantum_fraction\n", 0) == 0);
  const auto r = analyze_point(s, grid_points(s)[4]);
  CHECK(r.switches == 6);
  CHECK(r.levels == 4);
  CHECK(r.distance_km == 400);
  CHECK(r.t_disc == doctest::Approx(2 * 7 * r.t_req));
}

TEST_CASE("sweep records failing grid points and keeps going") {
  // P_col = 1 makes the classical channel unusable at that point only.
  const Scenario s = parse_scenario(
      "[chain]\nrq=1e6\n[experiment]\nmode=sweep\nD=20\nl=10\nP_col=0.5,1\nsweep_modes=analytic\n", "x");
  const std::string out = run_sweep(s);
  CHECK(out.find("x/D=20;l=10;P_col=0.5,20,10,2,1,0.5,analytic,") != std::string::npos);
  CHECK(out.find("x/D=20;l=10;P_col=1,20,10,2,1,1,error,0,,,,,") != std::string::npos);
}

TEST_CASE("sweep output does not depend on the thread count") {
  const Scenario s = parse_scenario(
      "[chain]\nrq=1e6 pcol=0.2\n[defaults]\nP_swap=0.8\n[experiment]\nn_reps=20\nD=60\nl=20,30\n"
      "N_q=1,10\nsweep_modes=analytic,proposed,model,packet,baseline\n",
      "t");
  setenv("QSWAP_THREADS", "1", 1);
  const std::string one = run_sweep(s);
  setenv("QSWAP_THREADS", "4", 1);
  const std::string four = run_sweep(s);
  unsetenv("QSWAP_THREADS");
  CHECK(one == four);
  CHECK(std::count(one.begin(), one.end(), '\n') == 1 + 4 * 5);
}
