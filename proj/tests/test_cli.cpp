// End-to-end checks of the command line driver: it is spawned as a real
// subprocess (path injected by the build) and judged on exit codes, output
// files, and determinism of the emitted CSV.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const fs::path& scratch_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "hfem_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Runs the driver with the given arguments, capturing exit code and streams.
RunResult run_cli(const std::string& args) {
  static int counter = 0;
  fs::path out = scratch_dir() / ("stdout." + std::to_string(counter));
  fs::path err = scratch_dir() / ("stderr." + std::to_string(counter));
  ++counter;
  std::string cmd = std::string(HFEM_CLI_BINARY) + " " + args + " > " +
                    out.string() + " 2> " + err.string();
  int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::vector<std::string> data_rows(const std::string& csv) {
  std::vector<std::string> rows;
  std::istringstream ss(csv);
  std::string line;
  bool seen_header = false;
  while (std::getline(ss, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!seen_header) {
      seen_header = true;  // column header
      continue;
    }
    rows.push_back(line);
  }
  return rows;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::istringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

}  // namespace

TEST_CASE("mesh gen writes the expected structured mesh") {
  fs::path mesh = scratch_dir() / "m2.txt";
  RunResult r = run_cli("mesh gen --n 2 --out " + mesh.string());
  CHECK(r.exit_code == 0);
  std::string text = slurp(mesh);
  CHECK(text.find("vertices 9") != std::string::npos);
  CHECK(text.find("cells 8") != std::string::npos);

  RunResult c = run_cli("mesh check " + mesh.string());
  CHECK(c.exit_code == 0);
  CHECK(c.out.find("mesh ok") != std::string::npos);
  CHECK(c.out.find("hanging-node free         yes") != std::string::npos);
}

TEST_CASE("mesh check rejects corrupted input with a line diagnostic") {
  fs::path bad = scratch_dir() / "bad.txt";
  {
    std::ofstream os(bad);
    os << "hmesh 1 dim 2\nvertices 2\n0 0\nnot a vertex\n";
  }
  RunResult r = run_cli("mesh check " + bad.string());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("line 4") != std::string::npos);
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli("").exit_code == 2);
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("audit --k 1 --levels 2").exit_code == 2);  // missing --ineq
  CHECK(run_cli("audit --ineq simplex-trace --k 9 --levels 2").exit_code ==
        2);  // k out of range
  CHECK(run_cli("hdg converge --problem rough-indicator --k 1 --levels 2")
            .exit_code == 2);  // no exact solution
}

TEST_CASE("unknown identifiers exit with code 2 and list the valid ones") {
  RunResult r = run_cli("audit --ineq bogus --k 1 --levels 2 --out " +
                        (scratch_dir() / "x.csv").string());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("simplex-trace") != std::string::npos);
  CHECK(r.err.find("ph-trace-uhat") != std::string::npos);

  RunResult p = run_cli("hdg solve --problem bogus --out " +
                        (scratch_dir() / "y.csv").string());
  CHECK(p.exit_code == 2);
  CHECK(p.err.find("manufactured-sine") != std::string::npos);
}

TEST_CASE("sample mode requires an explicit seed") {
  RunResult r =
      run_cli("audit --ineq simplex-trace --k 1 --levels 2 --mode sample "
              "--samples 8 --out " +
              (scratch_dir() / "s.csv").string());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("--seed") != std::string::npos);
}

TEST_CASE("audit sweep emits one verdict-bearing row per level") {
  fs::path csv = scratch_dir() / "hp.csv";
  fs::path svg = scratch_dir() / "hp.svg";
  RunResult r =
      run_cli("audit --ineq hybrid-poincare-boundary --k 1 --levels 4 "
              "--mode eigen --out " +
              csv.string() + " --svg " + svg.string());
  CHECK(r.exit_code == 0);
  std::string text = slurp(csv);
  CHECK(text.find("# cmd: hfem audit --ineq hybrid-poincare-boundary")
        != std::string::npos);
  CHECK(text.find("# verdict: pass") != std::string::npos);
  auto rows = data_rows(text);
  REQUIRE(rows.size() == 4);
  for (const auto& row : rows) {
    auto cells = split_csv(row);
    REQUIRE(cells.size() == 11);
    CHECK(cells[0] == "hybrid-poincare-boundary");
    CHECK(cells[10] == "pass");
  }
  std::string plot = slurp(svg);
  CHECK(plot.substr(0, 4) == "<svg");
  CHECK(plot.find("</svg>") != std::string::npos);
}

TEST_CASE("identical audit invocations produce byte-identical CSV") {
  fs::path a = scratch_dir() / "det_a.csv";
  fs::path b = scratch_dir() / "det_b.csv";
  std::string args =
      "audit --ineq brenner-mean --k 1 --levels 2 --mode sample --samples 8 "
      "--seed 42 --out ";
  run_cli(args + a.string());
  run_cli(args + b.string());
  std::string ta = slurp(a);
  CHECK(!ta.empty());
  CHECK(ta == slurp(b));
}

TEST_CASE("hdg solve reproduces the affine solution to rounding") {
  fs::path csv = scratch_dir() / "affine.csv";
  RunResult r = run_cli("hdg solve --problem affine-exact --out " +
                        csv.string());
  CHECK(r.exit_code == 0);
  auto rows = data_rows(slurp(csv));
  REQUIRE(rows.size() == 1);
  auto cells = split_csv(rows[0]);
  REQUIRE(cells.size() == 11);
  CHECK(std::stod(cells[6]) <= 1e-10);   // err_u
  CHECK(std::stod(cells[10]) <= 1e-10);  // residual
}

TEST_CASE("hdg converge reports the expected final order") {
  fs::path csv = scratch_dir() / "conv.csv";
  RunResult r =
      run_cli("hdg converge --k 1 --levels 4 --problem manufactured-sine "
              "--out " +
              csv.string());
  CHECK(r.exit_code == 0);
  auto rows = data_rows(slurp(csv));
  REQUIRE(rows.size() == 4);
  auto last = split_csv(rows.back());
  REQUIRE(last.size() == 11);
  CHECK(std::stod(last[8]) >= 1.8);  // order_u on the final step
}

TEST_CASE("hdg stability passes on the rough problems") {
  for (const char* name : {"rough-indicator", "rough-dirichlet"}) {
    fs::path csv = scratch_dir() / (std::string(name) + ".csv");
    RunResult r = run_cli("hdg stability --problem " + std::string(name) +
                          " --levels 5 --out " + csv.string());
    CHECK(r.exit_code == 0);
    std::string text = slurp(csv);
    CHECK(text.find("# verdict: pass") != std::string::npos);
    CHECK(data_rows(text).size() == 5);
  }
}
