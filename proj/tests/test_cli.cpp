#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "plateprice/experiment.hpp"
#include "plateprice/hedonic.hpp"
#include "plateprice/rnn_model.hpp"

using namespace plateprice;
namespace fs = std::filesystem;

namespace {

const std::string kBin = PLATEPRICE_BIN;

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "plateprice_cli_test";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

struct RunResult {
  int code = -1;
  std::string output;  // stdout + stderr
};

RunResult run(const std::string& args) {
  const fs::path log = work_dir() / "run.log";
  const std::string cmd = kBin + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// results.csv lines with the wall-clock seconds column blanked
std::string mask_seconds(const std::string& csv) {
  std::stringstream out;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    const auto last = line.rfind(',');
    out << line.substr(0, last) << "\n";
  }
  return out.str();
}

std::string drop_created(const std::string& json) {
  std::stringstream out;
  std::istringstream in(json);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find("\"created\"") == std::string::npos) out << line << "\n";
  }
  return out.str();
}

const std::string kTinyKnobs =
    " --hidden-units 8 --embed-dim 4 --recurrent-layers 1 --dropout 0"
    " --epochs 2 --batch-size 64";

}  // namespace

TEST_CASE("gen-data writes the dataset, oracle and manifest") {
  const auto out = (work_dir() / "data").string();
  const RunResult r = run("gen-data --out " + out + " --n 600 --years 4 --seed 3");
  CHECK(r.code == 0);
  CHECK(fs::exists(out + "/auction.csv"));
  CHECK(fs::exists(out + "/oracle.csv"));
  CHECK(fs::exists(out + "/manifest.json"));
  CHECK(fs::exists(out + "/resolved.cfg"));
  const auto records = load_auction_csv(out + "/auction.csv");
  CHECK(records.size() == 600);
}

TEST_CASE("train emits results, checkpoint and a reproducible manifest") {
  const auto data = (work_dir() / "data/auction.csv").string();
  const auto out1 = (work_dir() / "t1").string();
  const auto out2 = (work_dir() / "t2").string();
  const std::string args = "train --data " + data + kTinyKnobs +
                           " --runs 2 --workers 2 --seed 5 --split-seed 2 --out ";
  CHECK(run(args + out1).code == 0);
  CHECK(run(args + out2).code == 0);

  const std::string results1 = slurp(out1 + "/results.csv");
  CHECK(results1.rfind("config_id,run_seed,best_epoch,", 0) == 0);
  CHECK(std::count(results1.begin(), results1.end(), '\n') == 3);  // header + 2 runs

  // identical metrics; only the wall-clock seconds column may differ
  CHECK(mask_seconds(results1) == mask_seconds(slurp(out2 + "/results.csv")));
  CHECK(drop_created(slurp(out1 + "/manifest.json")) ==
        drop_created(slurp(out2 + "/manifest.json")));
  CHECK(slurp(out1 + "/resolved.cfg") == slurp(out2 + "/resolved.cfg"));

  const Checkpoint ckpt = load_params(out1 + "/best.ckpt");
  CHECK(ckpt.params.config.hidden_units == 8);
}

TEST_CASE("evaluate scores a checkpoint") {
  const auto data = (work_dir() / "data/auction.csv").string();
  const auto model = (work_dir() / "t1/best.ckpt").string();
  const auto out = (work_dir() / "eval").string();
  const RunResult r = run("evaluate --model " + model + " --data " + data +
                          " --split test --split-seed 2 --out " + out);
  CHECK(r.code == 0);
  CHECK(r.output.find("test:") != std::string::npos);
  const std::string metrics = slurp(out + "/metrics.csv");
  CHECK(metrics.rfind("split,n,rmse,r2", 0) == 0);
  CHECK(metrics.find("test,") != std::string::npos);
}

TEST_CASE("predict prints one line per plate and validates input") {
  const auto model = (work_dir() / "t1/best.ckpt").string();
  const RunResult ok = run("predict --model " + model + " --plate XY128");
  CHECK(ok.code == 0);
  CHECK(ok.output.rfind("XY128,", 0) == 0);
  // plate, log price, HKD estimate
  CHECK(std::count(ok.output.begin(), ok.output.end(), ',') == 2);

  const RunResult bad = run("predict --model " + model + " --plate AB1Q2");
  CHECK(bad.code == 2);
  CHECK(bad.output.find('Q') != std::string::npos);
}

TEST_CASE("usage errors exit with code 1") {
  CHECK(run("train --no-such-flag").code == 1);
  CHECK(run("nonsense-subcommand").code == 1);

  const auto cfg = work_dir() / "bad.cfg";
  std::ofstream(cfg) << "hidden_units = 8\nuniverse = 42\n";
  const auto data = (work_dir() / "data/auction.csv").string();
  const RunResult r = run("train --data " + data + " --out " +
                          (work_dir() / "t3").string() + " --config " + cfg.string());
  CHECK(r.code == 1);
  CHECK(r.output.find("universe") != std::string::npos);
}

TEST_CASE("numerical failures exit with code 3") {
  const auto data = (work_dir() / "data/auction.csv").string();
  const RunResult r = run("train --data " + data + kTinyKnobs +
                          " --learning-rate 1e18 --clip 1e18 --out " +
                          (work_dir() / "t4").string());
  CHECK(r.code == 3);
}

TEST_CASE("missing files exit with code 2") {
  CHECK(run("train --data /nonexistent.csv --out " + (work_dir() / "t5").string())
            .code == 2);
  CHECK(run("evaluate --model /nonexistent.ckpt --data /nonexistent.csv").code == 2);
}

TEST_CASE("baseline and ensemble round-trip through the CLI") {
  const auto data = (work_dir() / "data/auction.csv").string();
  const auto model = (work_dir() / "t1/best.ckpt").string();
  const auto base_out = (work_dir() / "base").string();
  const auto ens_out = (work_dir() / "ens").string();

  const RunResult base = run("baseline --data " + data +
                             " --preset woo2008 --split-seed 2 --out " + base_out);
  CHECK(base.code == 0);
  CHECK_NOTHROW(load_hedonic_csv(base_out + "/baseline.csv"));

  const RunResult ens =
      run("ensemble --data " + data + " --model " + model + " --baseline " +
          base_out + "/baseline.csv --variant combined --split-seed 2 --out " +
          ens_out);
  CHECK(ens.code == 0);
  CHECK(fs::exists(ens_out + "/ensemble.csv"));
  CHECK(fs::exists(ens_out + "/metrics.csv"));

  const RunResult pred =
      run("predict --model " + model + " --hedonic " + base_out +
          "/baseline.csv --ensemble " + ens_out + "/ensemble.csv --plate XY128");
  CHECK(pred.code == 0);
  CHECK(pred.output.rfind("XY128,", 0) == 0);

  // combined_extra across the full CSV path
  const auto ens2_out = (work_dir() / "ens2").string();
  const RunResult ens2 =
      run("ensemble --data " + data + " --model " + model + " --baseline " +
          base_out + "/baseline.csv --variant combined_extra --split-seed 2 --out " +
          ens2_out);
  CHECK(ens2.code == 0);
  const RunResult pred2 =
      run("predict --model " + model + " --hedonic " + base_out +
          "/baseline.csv --ensemble " + ens2_out + "/ensemble.csv --data " + data +
          " --out " + (work_dir() / "preds.csv").string());
  CHECK(pred2.code == 0);
  CHECK(slurp(work_dir() / "preds.csv").rfind("plate,log_price,price_hkd", 0) == 0);
}

TEST_CASE("retrain-sim writes traces, summary and wilcoxon pairs deterministically") {
  const auto gen = (work_dir() / "drift").string();
  CHECK(run("gen-data --out " + gen + " --n 2500 --years 4 --seed 9 --drift 1").code == 0);
  const auto data = gen + "/auction.csv";
  const std::string args = "retrain-sim --data " + data + kTinyKnobs +
                           " --schedule all --repeats 2 --initial-years 2"
                           " --horizon-years 1 --workers 2 --seed 11 --out ";
  const auto out1 = (work_dir() / "r1").string();
  const auto out2 = (work_dir() / "r2").string();
  CHECK(run(args + out1).code == 0);
  CHECK(run(args + out2).code == 0);
  for (const char* name :
       {"trace_never.csv", "trace_yearly.csv", "trace_monthly.csv",
        "summary.csv", "wilcoxon.csv", "manifest.json"}) {
    CHECK(fs::exists(fs::path(out1) / name));
  }
  for (const char* name :
       {"trace_never.csv", "trace_yearly.csv", "trace_monthly.csv", "summary.csv",
        "wilcoxon.csv"}) {
    CHECK(slurp(fs::path(out1) / name) == slurp(fs::path(out2) / name));
  }
}

TEST_CASE("input hashes react to single-byte changes") {
  const auto f1 = work_dir() / "h1.bin";
  const auto f2 = work_dir() / "h2.bin";
  std::ofstream(f1) << "plate,price_hkd\nAB12,100\n";
  std::ofstream(f2) << "plate,price_hkd\nAB12,101\n";
  CHECK(fnv1a64_file(f1.string()) != fnv1a64_file(f2.string()));
}

TEST_CASE("subcommands leave their input files untouched") {
  const auto data = (work_dir() / "data/auction.csv").string();
  const auto before = fnv1a64_file(data);
  run("evaluate --model " + (work_dir() / "t1/best.ckpt").string() + " --data " + data);
  run("baseline --data " + data + " --preset ng2010 --out " +
      (work_dir() / "b2").string());
  CHECK(fnv1a64_file(data) == before);
}
