#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "spcboot/cli.hpp"
#include "spcboot/io.hpp"

using namespace spcboot;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args, const std::string& input = {}) {
  args.insert(args.begin(), "spcboot");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::istringstream in(input);
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), in, out, err);
  return {code, out.str(), err.str()};
}

fs::path workdir(const std::string& name) {
  const fs::path dir = fs::path(SPCBOOT_TEST_TMP) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_file(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path.string();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string normal_data(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::string text = "x\n";
  for (std::size_t i = 0; i < n; ++i) text += format_double(z(rng)) + "\n";
  return text;
}

std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line.front() != '#') lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("calibrate raises the threshold and reports it reproducibly") {
  const fs::path dir = workdir("calibrate");
  const std::string data = write_file(dir / "phase1.csv", normal_data(500, 1));
  const auto a = run({"calibrate", "--data", data, "--out", (dir / "a").string(), "--seed", "3"});
  REQUIRE(a.code == 0);
  const auto b = run({"calibrate", "--data", data, "--out", (dir / "b").string(), "--seed", "3", "--workers", "2"});
  REQUIRE(b.code == 0);
  CHECK(slurp(dir / "a" / "calibration.kv") == slurp(dir / "b" / "calibration.kv"));
  CHECK(slurp(dir / "a" / "calibration.txt") == slurp(dir / "b" / "calibration.txt"));

  std::ifstream kv_in(dir / "a" / "calibration.kv");
  const KeyValues kv = read_key_values(kv_in, "kv");
  const double unadjusted = require_double(kv, "threshold_unadjusted", "kv");
  const double adjusted = require_double(kv, "threshold_adjusted", "kv");
  CHECK(adjusted > unadjusted);
  CHECK(std::abs(unadjusted - 2.84) <= 0.4);
  const double q_hat = require_double(kv, "q_hat", "kv");
  const double p_star = require_double(kv, "p_star", "kv");
  CHECK(adjusted == doctest::Approx(std::exp(q_hat - p_star)).epsilon(1e-12));
  CHECK(kv.at("measure_label") == "log(c_ARL(gamma=100))");

  const std::string header = slurp(dir / "a" / "calibration.kv");
  CHECK(header.rfind("# spcboot", 0) == 0);
  CHECK(header.find("# seed: 3") != std::string::npos);
  CHECK(header.find("# config: alpha=0.1") != std::string::npos);

  // the report drives monitoring directly
  const auto m = run({"monitor", "--calibration", (dir / "a" / "calibration.kv").string(), "--data", data});
  REQUIRE(m.code == 0);
  CHECK(m.out.find("# threshold: " + kv.at("threshold")) != std::string::npos);
}

TEST_CASE("calibrate input failures") {
  const fs::path dir = workdir("bad_input");
  const auto flat = run({"calibrate", "--data", write_file(dir / "flat.csv", "x\n2\n2\n2\n")});
  CHECK(flat.code == exit_input_error);
  CHECK(flat.err.find("DegenerateSample") != std::string::npos);

  const auto small = run({"calibrate", "--data", write_file(dir / "small.csv", "1\n2\n3\n")});
  CHECK(small.code == exit_input_error);

  const auto malformed = run({"calibrate", "--data", write_file(dir / "bad.csv", "x\n1\n2\nfoo\n")});
  CHECK(malformed.code == exit_input_error);
  CHECK(malformed.err.find("line 4") != std::string::npos);

  CHECK(run({"calibrate", "--data", (dir / "missing.csv").string()}).code == exit_input_error);
  CHECK(run({"calibrate", "--bogus"}).code == exit_input_error);
  CHECK(run({"frobnicate"}).code == exit_input_error);
  CHECK(run({"--help"}).code == exit_ok);
}

TEST_CASE("numerical failures exit with code 3") {
  const fs::path dir = workdir("numerical");
  // every increment (x - 4.5 - 5) / sigma is negative, so the chart never signals
  std::string text;
  for (int i = 0; i < 10; ++i) text += std::to_string(i) + "\n";
  const auto r = run({"evaluate", "--data", write_file(dir / "d.csv", text), "--scheme", "nonparametric", "--delta",
                      "10", "--measure", "arl", "--threshold", "3"});
  CHECK(r.code == exit_numerical_error);
  CHECK(r.err.find("NonAbsorbing") != std::string::npos);
  CHECK(r.err.find("evaluating") != std::string::npos);
}

TEST_CASE("evaluate prints the plug-in value") {
  const fs::path dir = workdir("evaluate");
  const auto r = run({"evaluate", "--data", write_file(dir / "d.csv", "-1\n0\n1\n-1\n0\n1\n-1\n0\n1\n0\n"),
                      "--chart", "shewhart", "--measure", "arl", "--threshold", "3"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("value=") != std::string::npos);
}

TEST_CASE("config files") {
  const fs::path dir = workdir("config");
  const std::string data = write_file(dir / "d.csv", normal_data(60, 2));
  const std::string good = write_file(dir / "good.cfg", "seed=5\nB=150\nalpha=0.2\n");
  const auto r = run({"calibrate", "--config", good, "--data", data, "--B", "120", "--out", dir.string()});
  REQUIRE(r.code == 0);
  const std::string kv = slurp(dir / "calibration.kv");
  CHECK(kv.find("\nB=120\n") != std::string::npos);
  CHECK(kv.find("\nseed=5\n") != std::string::npos);
  CHECK(kv.find("\nalpha=0.20000000000000001\n") != std::string::npos);

  const std::string bad = write_file(dir / "bad.cfg", "seed=5\nbogus=1\n");
  const auto e = run({"calibrate", "--config", bad, "--data", data});
  CHECK(e.code == exit_input_error);
  CHECK(e.err.find("bogus") != std::string::npos);
}

TEST_CASE("monitor") {
  const auto one = run({"monitor", "--threshold", "1", "--scaling", "unscaled", "--delta", "1", "--data", "-"}, "2\n");
  REQUIRE(one.code == 0);
  const auto lines = data_lines(one.out);
  REQUIRE(lines.size() == 2);
  CHECK(lines[1] == "1,1.5,1");

  std::string quiet;
  for (int i = 0; i < 100; ++i) quiet += "0\n";
  const auto calm = run({"monitor", "--threshold", "5", "--data", "-"}, quiet);
  REQUIRE(calm.code == 0);
  CHECK(data_lines(calm.out).size() == 101);
  CHECK(calm.out.find(",1\n") == std::string::npos);

  const auto stop = run({"monitor", "--threshold", "1", "--data", "-"}, "3\n3\n3\n");
  CHECK(data_lines(stop.out).size() == 2);
  const auto go_on = run({"monitor", "--threshold", "1", "--continue", "--data", "-"}, "3\n3\n3\n");
  CHECK(data_lines(go_on.out).size() == 4);

  const auto bad_row = run({"monitor", "--chart", "linreg", "--coef", "0,1", "--threshold", "5", "--data", "-"},
                           "y,x1\n1,2\n3,4,5\n");
  CHECK(bad_row.code == exit_input_error);
  CHECK(bad_row.err.find("line 3") != std::string::npos);

  CHECK(run({"monitor", "--data", "-"}, "1\n").code == exit_input_error);
}

TEST_CASE("experiment outputs") {
  const fs::path dir = workdir("experiment");
  const std::vector<std::string> common = {"--R", "100", "--B", "100", "--out", dir.string()};
  auto with = [&](std::vector<std::string> args) {
    args.insert(args.end(), common.begin(), common.end());
    return run(args);
  };

  REQUIRE(with({"experiment", "coverage", "--n", "20"}).code == 0);
  const auto coverage = data_lines(slurp(dir / "coverage_summary.csv"));
  CHECK(coverage.size() == 9);
  CHECK(coverage[0] == "measure,direction,coverage,covered,trials,failed");
  CHECK(data_lines(slurp(dir / "coverage_replicates.csv")).size() == 801);

  REQUIRE(with({"experiment", "conditional-arl", "--n", "50"}).code == 0);
  const auto cond = data_lines(slurp(dir / "conditional-arl_summary.csv"));
  CHECK(cond[0] == "statistic,in_unadjusted,out_unadjusted,in_adjusted,out_adjusted");
  CHECK(data_lines(slurp(dir / "conditional-arl_replicates.csv")).size() == 101);

  REQUIRE(with({"experiment", "misspecification", "--n", "30"}).code == 0);
  const auto mis = data_lines(slurp(dir / "misspecification_summary.csv"));
  std::set<std::string> blocks;
  for (std::size_t i = 1; i < mis.size(); ++i) blocks.insert(mis[i].substr(0, mis[i].find(',', mis[i].find(',') + 1)));
  CHECK(blocks.size() == 6);
  CHECK(mis.size() == 1 + 6 * 4);

  CHECK(with({"experiment", "other"}).code == exit_input_error);
}
