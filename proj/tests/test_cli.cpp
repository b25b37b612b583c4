// Drives the installed binary end to end as a subprocess: dataset synthesis,
// degradation, training, reconstruction, scoring, and export, plus the exit
// code contract (0 ok, 1 usage, 2 bad data).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mir/io.hpp"
#include "mir/tensor.hpp"

namespace fs = std::filesystem;
using namespace mir;

namespace {

struct RunResult {
  int code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(MIR_CLI_PATH) + " " + args + " 2>&1";
  std::FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  char buf[512];
  while (std::fgets(buf, sizeof(buf), pipe)) r.output += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct TempDir {
  TempDir() {
    char tmpl[] = "/tmp/mir-cli-XXXXXX";
    REQUIRE(mkdtemp(tmpl) != nullptr);
    path = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string sub(const std::string& name) const { return (fs::path(path) / name).string(); }
  std::string path;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Pulls one metric row ("mean" or "std") out of an eval report.
std::pair<double, double> report_row(const std::string& csv, const std::string& label) {
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(label + ",", 0) == 0) {
      const auto c1 = line.find(',');
      const auto c2 = line.find(',', c1 + 1);
      return {std::stod(line.substr(c1 + 1, c2 - c1 - 1)), std::stod(line.substr(c2 + 1))};
    }
  }
  FAIL("report has no '" << label << "' row");
  return {0.0, 0.0};
}

}  // namespace

TEST_CASE("help text lists the subcommands and exits cleanly") {
  const RunResult r = run_cli("--help");
  CHECK(r.code == 0);
  for (const char* name :
       {"phantom", "simulate", "train", "reconstruct", "uncertainty", "eval", "export-pgm"}) {
    CAPTURE(name);
    CHECK(r.output.find(name) != std::string::npos);
  }
}

TEST_CASE("bad invocations exit with the usage code") {
  CHECK(run_cli("").code == 1);
  CHECK(run_cli("frobnicate").code == 1);
  CHECK(run_cli("phantom").code == 1);
  CHECK(run_cli("phantom --kind cube --out /tmp/nope").code == 1);
  CHECK(run_cli("simulate").code == 1);
  CHECK(run_cli("train --config /does/not/exist.cfg --out /tmp/nope").code == 1);
  TempDir dir;
  const RunResult empty = run_cli("simulate mri --in " + dir.path + " --out " + dir.sub("o"));
  CHECK(empty.code == 1);
  CHECK(empty.output.find("no .mmir") != std::string::npos);
}

TEST_CASE("phantom generation is deterministic per seed") {
  TempDir dir;
  const std::string args = " --count 2 --size 32 --seed 7 --out ";
  CHECK(run_cli("phantom" + args + dir.sub("a")).code == 0);
  CHECK(run_cli("phantom" + args + dir.sub("b")).code == 0);
  CHECK(run_cli("phantom --count 2 --size 32 --seed 8 --out " + dir.sub("c")).code == 0);

  for (const char* name : {"phantom_000.mmir", "phantom_001.mmir"}) {
    CAPTURE(name);
    const std::string a = read_file(dir.sub("a") + "/" + name);
    CHECK(a == read_file(dir.sub("b") + "/" + name));
    CHECK(a != read_file(dir.sub("c") + "/" + name));
  }
  const Tensor<float> img = io::read_tensor(dir.sub("a") + "/phantom_000.mmir");
  CHECK(img.shape() == Shape{32, 32});
  const Tensor<float> other = io::read_tensor(dir.sub("a") + "/phantom_001.mmir");
  CHECK(img.vec() != other.vec());
}

TEST_CASE("full k-space sampling scores at the PSNR cap") {
  TempDir dir;
  REQUIRE(run_cli("phantom --count 2 --size 32 --seed 11 --out " + dir.sub("data")).code == 0);
  REQUIRE(run_cli("simulate mri --af 1 --sigma 0 --in " + dir.sub("data") + " --out " +
                  dir.sub("sim"))
              .code == 0);
  for (const char* name : {"x_000.mmir", "xu_000.mmir", "y_000.mmir", "x_001.mmir"}) {
    CAPTURE(name);
    CHECK(fs::exists(dir.sub("sim") + "/" + name));
  }
  const std::string report = dir.sub("report.csv");
  const RunResult ev =
      run_cli("eval --pred " + dir.sub("sim") + " --ref " + dir.sub("sim") + " --report " + report);
  REQUIRE(ev.code == 0);
  CHECK(ev.output.find("PSNR") != std::string::npos);

  const std::string csv = read_file(report);
  CHECK(csv.rfind("index,psnr,ssim\n", 0) == 0);
  const auto [psnr, ssim] = report_row(csv, "mean");
  CHECK(psnr == doctest::Approx(100.0));
  CHECK(ssim > 0.999);
  CHECK(report_row(csv, "std").first == doctest::Approx(0.0));
}

TEST_CASE("ct simulation writes normalized planes and sinograms") {
  TempDir dir;
  REQUIRE(run_cli("phantom --kind shepp --count 1 --size 32 --out " + dir.sub("data")).code == 0);
  REQUIRE(run_cli("simulate ct --views 10 --in " + dir.sub("data") + " --out " + dir.sub("sim"))
              .code == 0);
  const Tensor<float> x = io::read_tensor(dir.sub("sim") + "/x_000.mmir");
  CHECK(x.shape() == Shape{32, 32});
  float lo = x.data()[0], hi = x.data()[0];
  for (float v : x.vec()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo == doctest::Approx(0.0));
  CHECK(hi == doctest::Approx(1.0));
  CHECK(io::read_tensor(dir.sub("sim") + "/xu_000.mmir").shape() == Shape{32, 32});
  CHECK(io::read_tensor(dir.sub("sim") + "/y_000.mmir").shape() == Shape{10, 48});

  REQUIRE(run_cli("simulate ct --views 6 --detectors 24 --in " + dir.sub("data") + " --out " +
                  dir.sub("sim24"))
              .code == 0);
  CHECK(io::read_tensor(dir.sub("sim24") + "/y_000.mmir").shape() == Shape{6, 24});
}

TEST_CASE("train, reconstruct, score, uncertainty, and export chain together") {
  TempDir dir;
  REQUIRE(run_cli("phantom --count 3 --size 32 --seed 21 --out " + dir.sub("data")).code == 0);
  REQUIRE(run_cli("simulate mri --af 8 --seed 5 --in " + dir.sub("data") + " --out " +
                  dir.sub("sim"))
              .code == 0);

  {
    std::ofstream cfg(dir.sub("train.cfg"));
    cfg << "# held-out images come from the simulate step, not this pool\n"
        << "modality = mri\n"
        << "steps = 200\n"
        << "batch = 2\n"
        << "crop = 32\n"
        << "phantom_count = 4\n"
        << "phantom_size = 32\n"
        << "val_count = 1\n"
        << "af = 8\n"
        << "seed = 1\n"
        << "log_every = 50\n";
  }
  const RunResult tr =
      run_cli("train --config " + dir.sub("train.cfg") + " --out " + dir.sub("run"));
  REQUIRE(tr.code == 0);
  CHECK(tr.output.find("loss weights: alpha=15") != std::string::npos);
  CHECK(tr.output.find("final PSNR") != std::string::npos);
  REQUIRE(fs::exists(dir.sub("run") + "/final/config.txt"));
  CHECK(fs::exists(dir.sub("run") + "/log.csv"));

  const std::string ckpt = dir.sub("run") + "/final";
  REQUIRE(run_cli("reconstruct --ckpt " + ckpt + " --in " + dir.sub("sim") + " --out " +
                  dir.sub("rec"))
              .code == 0);
  for (const char* name : {"xhat_000.mmir", "xhat_001.mmir", "xhat_002.mmir"}) {
    CAPTURE(name);
    CHECK(fs::exists(dir.sub("rec") + "/" + name));
  }
  CHECK(io::read_tensor(dir.sub("rec") + "/xhat_000.mmir").shape() == Shape{32, 32, 2});

  // The model must beat its own input on images it never trained on.
  REQUIRE(run_cli("eval --pred " + dir.sub("sim") + " --ref " + dir.sub("sim") + " --report " +
                  dir.sub("zero.csv"))
              .code == 0);
  REQUIRE(run_cli("eval --pred " + dir.sub("rec") + " --ref " + dir.sub("sim") + " --report " +
                  dir.sub("model.csv"))
              .code == 0);
  const double zero_psnr = report_row(read_file(dir.sub("zero.csv")), "mean").first;
  const double model_psnr = report_row(read_file(dir.sub("model.csv")), "mean").first;
  CAPTURE(zero_psnr);
  CAPTURE(model_psnr);
  CHECK(model_psnr > zero_psnr);

  const RunResult un = run_cli("uncertainty --ckpt " + ckpt + " --in " +
                               dir.sub("sim") + "/xu_000.mmir --out " + dir.sub("unc") +
                               " --passes 4 --seed 9");
  REQUIRE(un.code == 0);
  const Tensor<float> stddev = io::read_tensor(dir.sub("unc") + "/std.mmir");
  CHECK(stddev.shape() == Shape{32, 32});
  double mass = 0.0;
  for (float v : stddev.vec()) {
    REQUIRE(std::isfinite(v));
    REQUIRE(v >= 0.0f);
    mass += v;
  }
  CHECK(mass > 0.0);

  REQUIRE(run_cli("export-pgm --in " + dir.sub("unc") + "/std.mmir --out " + dir.sub("std.pgm"))
              .code == 0);
  const std::string pgm = read_file(dir.sub("std.pgm"));
  CHECK(pgm.rfind("P5\n", 0) == 0);
}

TEST_CASE("data errors exit with code 2, missing inputs with code 1") {
  TempDir dir;
  CHECK(run_cli("export-pgm --in " + dir.sub("absent.mmir") + " --out " + dir.sub("o.pgm")).code ==
        1);

  REQUIRE(run_cli("phantom --count 1 --size 16 --out " + dir.sub("data")).code == 0);
  const std::string victim = dir.sub("data") + "/phantom_000.mmir";
  std::string bytes = read_file(victim);
  bytes[0] ^= 0x5a;
  {
    std::ofstream out(victim, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), (std::streamsize)bytes.size());
  }
  const RunResult r = run_cli("export-pgm --in " + victim + " --out " + dir.sub("o.pgm"));
  CHECK(r.code == 2);
  CHECK(r.output.find("error:") != std::string::npos);
}
