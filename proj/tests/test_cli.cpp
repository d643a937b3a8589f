#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

Run qswap(const std::string& args) {
  const std::string cmd = std::string(QSWAP_BIN) + " " + args + " 2>&1";
  Run r{0, {}};
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch() {
  const fs::path d = fs::temp_directory_path() / ("qswap_cli_" + std::to_string(getpid()));
  fs::create_directories(d);
  return d;
}

fs::path write(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

const std::string kScn = SCENARIO_DIR;

}  // namespace

TEST_CASE("shipped scenarios validate") {
  for (const char* s : {"minimal", "fig1", "fig5", "fig6_7"}) {
    const auto r = qswap("validate " + kScn + "/" + s + ".scn");
    CAPTURE(r.out);
    CHECK(r.code == 0);
  }
}

TEST_CASE("scenario errors exit 1 and name the line") {
  const fs::path d = scratch();
  const auto p = write(d, "bad.scn", "[defaults]\nP_swap=0.5\nwhat=3\n");
  const auto r = qswap("analyze " + p.string());
  CHECK(r.code == 1);
  CHECK(r.out.find("line 3:1") != std::string::npos);
  CHECK(qswap("validate " + (d / "missing.scn").string()).code == 1);
}

TEST_CASE("runtime faults exit 2 and name the grid point") {
  const fs::path d = scratch();
  const auto p = write(d, "cap.scn", "[chain]\nrq=1e6\n[defaults]\nmax_steps=20\n[experiment]\nD=30\nl=10\n");
  const auto r = qswap("simulate " + p.string());
  CHECK(r.code == 2);
  CHECK(r.out.find("grid point cap/D=30;l=10") != std::string::npos);
}

TEST_CASE("usage errors are nonzero") {
  CHECK(qswap("").code != 0);
  CHECK(qswap("frobnicate x").code != 0);
  CHECK(qswap("--help").code == 0);
  CHECK(qswap("--help").out.find("N_b=320") != std::string::npos);
}

TEST_CASE("qstp prints the tree") {
  const auto r = qswap("qstp " + kScn + "/fig1.scn");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("root alice") != std::string::npos);
  CHECK(r.out.find("port s1 2 -> s3 blocked") != std::string::npos);
}

TEST_CASE("decode") {
  const auto ok = qswap("decode 02000000000202000000000188b50064860e811b010203040a0b0c0d151122334455667788030203");
  CHECK(ok.code == 0);
  CHECK(ok.out.find("msg=SwappingError ack=1") != std::string::npos);
  CHECK(qswap("decode 02000000000202000000000188b50064860e811b010203040a0b0c0d151122334455667788030202").code == 1);
  CHECK(qswap("decode zz").code == 1);
}

TEST_CASE("simulate is byte-identical for a fixed seed, and trace lines decode") {
  const fs::path d = scratch();
  const std::string base = "simulate " + kScn + "/minimal.scn --reps 50 --seed 9";
  REQUIRE(qswap(base + " --out " + (d / "a.csv").string() + " --trace " + (d / "a.tr").string()).code == 0);
  REQUIRE(qswap(base + " --out " + (d / "b.csv").string() + " --trace " + (d / "b.tr").string()).code == 0);
  CHECK(slurp(d / "a.csv") == slurp(d / "b.csv"));
  CHECK(slurp(d / "a.tr") == slurp(d / "b.tr"));
  CHECK(slurp(d / "a.csv").rfind("scenario_id,mode,n_reps,mean_delay_s,stderr_s,quantum_fraction,decoherence_violations\n", 0) == 0);

  std::istringstream tr(slurp(d / "a.tr"));
  std::string line;
  int decoded = 0;
  while (std::getline(tr, line) && decoded < 5)
    if (line.size() == 80 && line.find_first_not_of("0123456789abcdef") == std::string::npos) {
      CHECK(qswap("decode " + line).code == 0);
      ++decoded;
    }
  CHECK(decoded == 5);
}

TEST_CASE("compare emits proposed and baseline rows") {
  const auto r = qswap("compare " + kScn + "/minimal.scn --reps 100");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("minimal,proposed,100,") != std::string::npos);
  CHECK(r.out.find("minimal,baseline,100,") != std::string::npos);
}

TEST_CASE("sweep writes the CSV file") {
  const fs::path d = scratch();
  const auto p = write(d, "s.scn",
                       "[chain]\nrq=1e6 pcol=0.1\n[experiment]\nmode=sweep\nn_reps=10\nD=100\nl=50,100\n");
  REQUIRE(qswap("sweep " + p.string() + " --out " + (d / "s.csv").string()).code == 0);
  const std::string csv = slurp(d / "s.csv");
  CHECK(csv.rfind("scenario_id,D_km,l_km,S,N_q,P_col,mode,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  fs::remove_all(d);
}
