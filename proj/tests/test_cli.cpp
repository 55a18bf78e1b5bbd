#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "emgtl/cli.hpp"
#include "emgtl/evaluation.hpp"

using namespace emgtl;
namespace fs = std::filesystem;

namespace {

fs::path tmp_root() {
  const char* env = std::getenv("EMGTL_TMP");
  const fs::path p = env ? fs::path(env) : fs::temp_directory_path() / "emgtl_test_cli";
  fs::create_directories(p);
  return p;
}

fs::path fresh(const std::string& name) {
  const fs::path p = tmp_root() / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
  }
  return out;
}

struct Result {
  int code = 0;
  std::string out, err;
};

Result emgtl_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  const int code = cli::run(args);
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return {code, out.str(), err.str()};
}

std::string bench_config(int sessions, const std::string& extra_train = "") {
  return R"({
  "dataset": {"synth": {"num_sessions": )" + std::to_string(sessions) + R"(, "gesture_seconds": 1.0,
                        "eval_trials": 6, "eval_trial_seconds": 3.0, "seed": 3}},
  "seeds": [1, 2],
  "train": {"lr": 0.01, "batch_size": 64, "max_epochs": 2)" + extra_train + R"(},
  "model": {"channels": [4, 4]},
  "evaluation": {"orientation_min_count": 5}
})";
}

std::map<std::string, std::string> read_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    if (tab != std::string::npos) kv[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return kv;
}

// One shared benchmark run keeps the suite fast.
const fs::path& bench_dir() {
  static const fs::path dir = [] {
    const fs::path cfg = tmp_root() / "bench3.json";
    spit(cfg, bench_config(3));
    const fs::path out = fresh("bench3");
    const auto r = emgtl_run({"benchmark", "--config", cfg.string(), "--out", out.string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    return out;
  }();
  return dir;
}

}  // namespace

TEST_CASE("synth is byte-deterministic") {
  const fs::path a = fresh("synth_a"), b = fresh("synth_b");
  CHECK(emgtl_run({"synth", "--seed", "7", "--sessions", "2", "--gesture-seconds", "1", "--out", a.string()}).code == 0);
  CHECK(emgtl_run({"synth", "--seed", "7", "--sessions", "2", "--gesture-seconds", "1", "--out", b.string()}).code == 0);
  CHECK(tree(a) == tree(b));
  CHECK(tree(a).count("MANIFEST") == 1);
}

TEST_CASE("synth layout for 2 participants x 3 sessions") {
  const fs::path d = fresh("synth_2x3");
  REQUIRE(emgtl_run({"synth", "--participants", "2", "--sessions", "3", "--gesture-seconds", "1",
                     "--eval-runs", "0", "--out", d.string()})
              .code == 0);
  int sessions = 0;
  for (const auto& p : fs::directory_iterator(d)) {
    if (!p.is_directory()) continue;
    for (const auto& s : fs::directory_iterator(p.path())) sessions += s.is_directory();
  }
  CHECK(sessions == 6);
  CHECK(fs::is_directory(d / "P02" / "session_3"));
}

TEST_CASE("invalid synth spec fails and names the field") {
  const auto r = emgtl_run({"synth", "--sessions", "0", "--out", fresh("synth_bad").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("num_sessions") != std::string::npos);
}

TEST_CASE("non-empty output is refused without --force") {
  const fs::path d = fresh("synth_force");
  spit(d / "keep.txt", "x");
  const auto r = emgtl_run({"synth", "--gesture-seconds", "1", "--sessions", "1", "--out", d.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("--force") != std::string::npos);
  CHECK(fs::exists(d / "keep.txt"));
  CHECK(emgtl_run({"synth", "--gesture-seconds", "1", "--sessions", "1", "--out", d.string(), "--force"}).code == 0);
  CHECK_FALSE(fs::exists(d / "keep.txt"));
}

TEST_CASE("usage errors") {
  CHECK(emgtl_run({}).code == 1);
  CHECK(emgtl_run({"frobnicate"}).code == 1);
  CHECK(emgtl_run({"--help"}).code == 0);
  const fs::path cfg = tmp_root() / "unknown_key.json";
  spit(cfg, R"({"dataset": {"path": "x"}, "trian": {}})");
  const auto r = emgtl_run({"benchmark", "--config", cfg.string(), "--out", fresh("unk").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("trian") != std::string::npos);
  const auto d = emgtl_run({"benchmark", "--data", (tmp_root() / "no_such_dataset").string(), "--out",
                            fresh("nodata").string()});
  CHECK(d.code == 2);
}

TEST_CASE("benchmark report contents") {
  const fs::path& out = bench_dir();
  for (const char* f : {"accuracy.tsv", "summary.tsv", "comparisons.tsv", "histories.tsv", "manifest.txt",
                        "mav_msa_days.tsv", "mav_msa_tests.tsv", "figures/accuracy_offline_tadann.tsv",
                        "figures/intensity_recalibration.tsv", "figures/train_msa.tsv"}) {
    CHECK_MESSAGE(fs::exists(out / f), f);
  }
  const std::string cmp = slurp(out / "comparisons.tsv");
  std::set<std::string> sessions;
  std::istringstream in(cmp);
  std::string line;
  std::getline(in, line);
  CHECK(line == "comparison\tsession\tsplit\tn\tmean_difference\tcohens_dz\twilcoxon_w\tp_value\texact\tnote");
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string name, session, split, n;
    ls >> name >> session >> split >> n;
    CHECK(name == "tadann-recalibration");
    CHECK(n == "2");
    sessions.insert(session);
  }
  CHECK(sessions == std::set<std::string>{"2", "3"});
  const auto manifest = read_kv(slurp(out / "manifest.txt"));
  CHECK(manifest.at("status") == "complete");
  CHECK(manifest.at("dataset_checksum").size() == 64);
  CHECK(slurp(out / "accuracy.tsv").find("delayed_calibration\t3\tP01\t2\toffline") != std::string::npos);
  CHECK(fs::exists(out / "checkpoints" / "P01" / "seed_2" / "tadann" / "session_3.ckpt"));
}

TEST_CASE("benchmark rerun is byte-identical, also with parallel workers") {
  const fs::path cfg = tmp_root() / "bench3.json";
  const fs::path again = fresh("bench3_again");
  setenv("EMGTL_WORKERS", "2", 1);
  const auto r = emgtl_run({"benchmark", "--config", cfg.string(), "--out", again.string()});
  unsetenv("EMGTL_WORKERS");
  REQUIRE(r.code == 0);
  CHECK(tree(again) == tree(bench_dir()));
}

TEST_CASE("inapplicable schemes are skipped and recorded") {
  const fs::path cfg = tmp_root() / "bench2.json";
  spit(cfg, bench_config(2));
  const fs::path out = fresh("bench2");
  const auto r = emgtl_run({"benchmark", "--config", cfg.string(), "--out", out.string(), "--seeds", "1",
                            "--no-checkpoints"});
  CHECK(r.code == 0);
  CHECK(r.err.find("warning: skipped P01\tdelayed_calibration") != std::string::npos);
  CHECK(slurp(out / "manifest.txt").find("skipped\tP01\tdelayed_calibration") != std::string::npos);
  CHECK(slurp(out / "accuracy.tsv").find("delayed_calibration") == std::string::npos);
  CHECK_FALSE(fs::exists(out / "checkpoints"));
}

TEST_CASE("evaluate replays the benchmark's accuracy exactly") {
  const fs::path& bench = bench_dir();
  const fs::path cfg = tmp_root() / "bench3.json";
  AccuracyTable table;
  std::map<std::string, std::pair<std::string, std::string>> recorded;  // key -> (correct, total)
  {
    std::istringstream in(slurp(bench / "accuracy.tsv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string scheme, session, participant, seed, split, correct, total;
      ls >> scheme >> session >> participant >> seed >> split >> correct >> total;
      recorded[scheme + "/" + session + "/" + seed + "/" + split] = {correct, total};
    }
  }
  int checked = 0;
  for (const char* scheme : {"no_calibration", "recalibration", "tadann", "delayed_calibration"}) {
    const fs::path ck = bench / "checkpoints" / "P01" / "seed_1" / scheme / "session_3.ckpt";
    const fs::path out = fresh(std::string("eval_") + scheme);
    const auto r = emgtl_run({"evaluate", "--checkpoint", ck.string(), "--config", cfg.string(), "--data",
                              (bench / "dataset").string(), "--out", out.string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto kv = read_kv(slurp(out / "evaluate.tsv"));
    const auto off = recorded.at(std::string(scheme) + "/3/1/offline");
    CHECK(kv.at("offline_correct") == off.first);
    CHECK(kv.at("offline_total") == off.second);
    const auto ev = recorded.at(std::string(scheme) + "/3/1/evaluation");
    CHECK(kv.at("evaluation_correct") == ev.first);
    CHECK(kv.at("evaluation_total") == ev.second);
    ++checked;
  }
  CHECK(checked == 4);
}

TEST_CASE("evaluate: trimming, missing checkpoint, config hash") {
  const fs::path& bench = bench_dir();
  const fs::path ck = bench / "checkpoints" / "P01" / "seed_1" / "recalibration" / "session_2.ckpt";
  const std::string data = (bench / "dataset").string();
  const auto full = emgtl_run({"evaluate", "--checkpoint", ck.string(), "--data", data, "--trim-transitions", "0"});
  const auto trimmed = emgtl_run({"evaluate", "--checkpoint", ck.string(), "--data", data});
  REQUIRE(full.code == 0);
  REQUIRE(trimmed.code == 0);
  const auto a = read_kv(full.out), b = read_kv(trimmed.out);
  CHECK(a.at("evaluation_total") == a.at("evaluation_windows_before_trim"));
  // 3 s trials, 150 ms windows every 50 ms: 58 per trial, 28 of them start at or after 1.5 s
  CHECK(std::stoi(a.at("evaluation_total")) == 6 * 58);
  CHECK(std::stoi(b.at("evaluation_total")) == 6 * 28);
  CHECK(a.at("offline_correct") == b.at("offline_correct"));

  CHECK(emgtl_run({"evaluate", "--checkpoint", (bench / "nope.ckpt").string(), "--data", data}).code != 0);

  const fs::path other = tmp_root() / "other_window.json";
  spit(other, R"({"preprocess": {"window_ms": 200}})");
  const auto mismatch = emgtl_run({"evaluate", "--checkpoint", ck.string(), "--data", data, "--config", other.string()});
  CHECK(mismatch.code == 2);
  CHECK(mismatch.err.find("config hash mismatch") != std::string::npos);
}

TEST_CASE("report re-summarises a benchmark identically") {
  const fs::path& bench = bench_dir();
  const fs::path out = fresh("report");
  REQUIRE(emgtl_run({"report", "--bench", bench.string(), "--data", (bench / "dataset").string(), "--out",
                     out.string()})
              .code == 0);
  CHECK(slurp(out / "summary.tsv") == slurp(bench / "summary.tsv"));
  CHECK(slurp(out / "comparisons.tsv") == slurp(bench / "comparisons.tsv"));
  CHECK(slurp(out / "mav_msa_days.tsv") == slurp(bench / "mav_msa_days.tsv"));
}

TEST_CASE("preprocess writes windows and a summary") {
  const fs::path& bench = bench_dir();
  const fs::path out = fresh("pre");
  REQUIRE(emgtl_run({"preprocess", "--data", (bench / "dataset").string(), "--out", out.string()}).code == 0);
  CHECK(fs::file_size(out / "P01" / "session_1" / "train.f32") == 2 * 11 * 18 * 1500 * sizeof(float));
  CHECK(slurp(out / "windows.tsv").find("P01\t1\ttrain\t396") != std::string::npos);
}

TEST_CASE("benchmark never touches the input dataset") {
  const fs::path& bench = bench_dir();
  const fs::path data = bench / "dataset";
  const auto before = tree(data);
  const fs::path out = fresh("bench_from_path");
  const auto r = emgtl_run({"train", "--data", data.string(), "--out", out.string(), "--schemes", "no_calibration",
                            "--seeds", "1", "--max-epochs", "1", "--channels", "4", "--batch-size", "64"});
  CHECK(r.code == 0);
  CHECK(tree(data) == before);
  const auto inside = emgtl_run({"train", "--data", data.string(), "--out", bench.string(), "--force"});
  CHECK(inside.code == 1);
  CHECK(fs::exists(data / "MANIFEST"));
}

TEST_CASE("a numerical blow-up exits with code 3") {
  const fs::path cfg = tmp_root() / "nan.json";
  spit(cfg, bench_config(2, R"(, "anneal_patience": 100)"));
  const fs::path out = fresh("nan");
  const auto r = emgtl_run({"train", "--config", cfg.string(), "--out", out.string(), "--seeds", "1", "--lr", "1e30",
                            "--schemes", "no_calibration", "--no-checkpoints"});
  CHECK(r.code == 3);
  CHECK(slurp(out / "manifest.txt").find("status\tincomplete") != std::string::npos);
}
