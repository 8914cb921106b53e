#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "support/toydata.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string bin() {
  const char* b = std::getenv("ETSAD_BIN");
  REQUIRE_MESSAGE(b != nullptr, "ETSAD_BIN must point at the CLI binary");
  return b;
}

struct RunResult {
  int exit_code;
  std::string output;  // stdout + stderr
};

RunResult run(const std::string& args) {
  const std::string out_path = testutil::scratch_dir("cli_out") + "/out.txt";
  const std::string cmd = bin() + " " + args + " > " + out_path + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(out_path);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WEXITSTATUS(status), ss.str()};
}

struct CliRig {
  testutil::ToyDataset toy;
  std::string config_path;
  std::string out_dir;
};

CliRig make_rig(const std::string& tag, int iters) {
  CliRig rig;
  const std::string dir = testutil::scratch_dir(tag);
  rig.toy = testutil::write_toy_dataset(dir, 4, 2, 2, 64, 17);
  rig.out_dir = dir + "/run";
  rig.config_path = dir + "/config.yaml";
  std::ofstream cfg(rig.config_path);
  cfg << "data:\n"
      << "  root: " << rig.toy.root << "\n"
      << "  category: " << rig.toy.category << "\n"
      << "  image_size: 64\n"
      << "model:\n"
      << "  architecture: wrn50_w4_d111_o1\n"
      << "train:\n"
      << "  batch_size: 2\n"
      << "  max_iterations: " << iters << "\n"
      << "  seed: 9\n"
      << "synthesis:\n"
      << "  texture_source: " << rig.toy.texture_dir << "\n"
      << "out_dir: " << rig.out_dir << "\n";
  return rig;
}

int count_lines(const std::string& path) {
  std::ifstream in(path);
  int n = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("train writes a checkpoint, a log with one record per iteration, and the resolved config") {
  CliRig rig = make_rig("cli_train", 10);
  RunResult r = run("train --config " + rig.config_path);
  CHECK_MESSAGE(r.exit_code == 0, r.output);
  CHECK(fs::exists(fs::path(rig.out_dir) / "model.etsc"));
  CHECK(fs::exists(fs::path(rig.out_dir) / "config.json"));
  CHECK(count_lines((fs::path(rig.out_dir) / "train_log.jsonl").string()) == 10);
}

TEST_CASE("flags override the config file") {
  CliRig rig = make_rig("cli_override", 50);
  RunResult r = run("train --config " + rig.config_path + " --max-iterations 3");
  CHECK_MESSAGE(r.exit_code == 0, r.output);
  CHECK(count_lines((fs::path(rig.out_dir) / "train_log.jsonl").string()) == 3);
}

TEST_CASE("unknown flags and unknown config keys are rejected") {
  CliRig rig = make_rig("cli_badflag", 1);
  RunResult r = run("train --config " + rig.config_path + " --frobnicate 3");
  CHECK(r.exit_code != 0);

  const std::string bad_cfg = rig.config_path + ".bad.yaml";
  {
    std::ifstream in(rig.config_path);
    std::ofstream out(bad_cfg);
    out << in.rdbuf();
    out << "typo_key: 1\ntrain2:\n  x: 2\n";
  }
  RunResult r2 = run("train --config " + bad_cfg);
  CHECK(r2.exit_code != 0);
  CHECK(r2.output.find("typo_key") != std::string::npos);
  CHECK(r2.output.find("train2") != std::string::npos);
}

TEST_CASE("missing data root surfaces the dataset-layout error") {
  CliRig rig = make_rig("cli_missing", 1);
  RunResult r = run("train --config " + rig.config_path + " --data-root /nonexistent/path");
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("dataset-layout") != std::string::npos);
}

TEST_CASE("eval emits a parseable report with all five metrics in [0,1]") {
  CliRig rig = make_rig("cli_eval", 4);
  RunResult rt = run("train --config " + rig.config_path);
  REQUIRE_MESSAGE(rt.exit_code == 0, rt.output);

  const std::string report = rig.out_dir + "/report.json";
  const std::string heat = rig.out_dir + "/heatmaps";
  RunResult re = run("eval --ckpt " + rig.out_dir + "/model.etsc --config " + rig.config_path +
                     " --report " + report + " --heatmaps " + heat);
  CHECK_MESSAGE(re.exit_code == 0, re.output);
  std::ifstream in(report);
  REQUIRE(in.good());
  json j = json::parse(in);
  for (const char* key : {"i_auc", "i_ap", "p_auc", "p_ap", "p_pro"}) {
    const double v = j["metrics"][key].get<double>();
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(j["n_images"].get<int>() == 4);
  CHECK(j.contains("config_digest"));
  // One heat map per test image plus one sidecar each.
  int pngs = 0;
  for (const auto& e : fs::directory_iterator(heat))
    if (e.path().extension() == ".png") ++pngs;
  CHECK(pngs == 4);
}

TEST_CASE("a corrupted checkpoint fails the eval with a checksum error") {
  CliRig rig = make_rig("cli_corrupt", 2);
  RunResult rt = run("train --config " + rig.config_path);
  REQUIRE_MESSAGE(rt.exit_code == 0, rt.output);
  // Flip one payload byte.
  const std::string path = rig.out_dir + "/model.etsc";
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(400);
  char c;
  f.seekg(400);
  f.get(c);
  f.seekp(400);
  f.put(static_cast<char>(c ^ 0x40));
  f.close();
  RunResult re = run("eval --ckpt " + path + " --config " + rig.config_path);
  CHECK(re.exit_code != 0);
  CHECK(re.output.find("checksum") != std::string::npos);
}

TEST_CASE("synth-preview writes deterministic triples") {
  CliRig rig = make_rig("cli_synth", 1);
  const std::string out1 = rig.out_dir + "/prev1";
  const std::string out2 = rig.out_dir + "/prev2";
  RunResult r1 = run("synth-preview --config " + rig.config_path + " --n 4 --out " + out1);
  CHECK_MESSAGE(r1.exit_code == 0, r1.output);
  int files = 0;
  for (const auto& e : fs::directory_iterator(out1)) ++files, (void)e;
  CHECK(files == 12);

  RunResult r2 = run("synth-preview --config " + rig.config_path + " --n 4 --out " + out2);
  CHECK_MESSAGE(r2.exit_code == 0, r2.output);
  for (int i = 0; i < 4; ++i) {
    for (const char* suffix : {"_normal.png", "_anomalous.png", "_mask.png"}) {
      std::ifstream a(out1 + "/" + std::to_string(i) + suffix, std::ios::binary);
      std::ifstream b(out2 + "/" + std::to_string(i) + suffix, std::ios::binary);
      std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
      std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
      CHECK(sa == sb);
      CHECK(!sa.empty());
    }
  }
}

TEST_CASE("score prints an image score and writes one heat map") {
  CliRig rig = make_rig("cli_score", 2);
  RunResult rt = run("train --config " + rig.config_path);
  REQUIRE_MESSAGE(rt.exit_code == 0, rt.output);
  const std::string img =
      (fs::path(rig.toy.root) / rig.toy.category / "test" / "defect" / "000.png").string();
  const std::string out = rig.out_dir + "/score";
  RunResult rs = run("score --ckpt " + rig.out_dir + "/model.etsc --image " + img + " --out " + out);
  CHECK_MESSAGE(rs.exit_code == 0, rs.output);
  CHECK(rs.output.find("image_score=") != std::string::npos);
  CHECK(fs::exists(fs::path(out) / "000_heatmap.png"));
  CHECK(fs::exists(fs::path(out) / "000_heatmap.json"));
}

}  // TEST_SUITE
