// Acceptance battery: one line per criterion, nonzero exit if any fails.
// Usage: acceptance <path-to-gnat> <scratch-dir>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gnat/cli_report.hpp"

namespace {

void line(int id, bool pass, const std::string& title, const std::string& measured, double seconds) {
  std::printf("[%s] criterion %2d  %-48s %s  (%.2f s)\n", pass ? "PASS" : "FAIL", id, title.c_str(), measured.c_str(),
              seconds);
  std::fflush(stdout);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: acceptance <gnat> <scratch-dir>\n");
    return 2;
  }
  const std::string gnat = argv[1];
  const std::filesystem::path dir = argv[2];
  std::filesystem::create_directories(dir);

  int failed = 0;
  gnat::SuiteOptions opts;  // default sample count and seed
  for (int id = 1; id <= 11; ++id) {
    const auto r = gnat::run_criterion(id, opts);
    char measured[96];
    std::snprintf(measured, sizeof measured, "value %.3g  tol %.0e", r.value, r.tolerance);
    line(id, r.pass, r.title, measured, r.seconds);
    std::printf("        %s\n", r.detail.c_str());
    failed += !r.pass;
  }

  // 12: the CLI suite on one thread, timed, run twice and compared byte for byte with a parallel run
  const auto a = dir / "suite_a.json", b = dir / "suite_b.json", c = dir / "suite_par.json";
  const auto ca = dir / "suite_a.csv", cb = dir / "suite_b.csv";
  auto run = [&](const std::filesystem::path& rep, const std::string& extra) {
    const std::string cmd = "OMP_NUM_THREADS=1 \"" + gnat + "\" suite --seed 1 --report \"" + rep.string() + "\" " +
                            extra + " > /dev/null";
    const auto t0 = std::chrono::steady_clock::now();
    const int rc = std::system(cmd.c_str());
    return std::pair{rc, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
  };
  const auto [rc1, t1] = run(a, "--serial --csv \"" + ca.string() + "\"");
  const auto [rc2, t2] = run(b, "--serial --csv \"" + cb.string() + "\"");
  const std::string par = "\"" + gnat + "\" suite --seed 1 --report \"" + c.string() + "\" > /dev/null";
  const int rc3 = std::system(par.c_str());
  const bool same = slurp(a) == slurp(b) && slurp(ca) == slurp(cb) && slurp(a) == slurp(c) && !slurp(a).empty();
  const bool pass12 = rc1 == 0 && rc2 == 0 && rc3 == 0 && same && t1 <= 60.0;
  char measured[96];
  std::snprintf(measured, sizeof measured, "single-thread %.1f s  tol 60 s  identical %s", t1, same ? "yes" : "no");
  line(12, pass12, "suite runtime and byte-determinism", measured, t1 + t2);
  std::printf("        exit codes %d %d %d; serial runs and a parallel run compared\n", rc1, rc2, rc3);
  failed += !pass12;

  std::printf("%d of 12 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
