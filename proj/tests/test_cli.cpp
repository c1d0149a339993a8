#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string cli() {
  const char* bin = std::getenv("RISKDEC_CLI_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "RISKDEC_CLI_BIN must point at the command-line binary");
  return bin;
}

struct RunResult {
  int exit_code;
  std::string stdout_text;
};

RunResult run(const std::string& args) {
  const auto out_file = fs::temp_directory_path() / "riskdec_cli_out.txt";
  const std::string cmd = cli() + " " + args + " > " + out_file.string() + " 2>/dev/null";
  const int raw = std::system(cmd.c_str());
  std::ifstream in(out_file);
  std::ostringstream ss;
  ss << in.rdbuf();
  fs::remove(out_file);
  return {WEXITSTATUS(raw), ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("riskdec_cli_ws_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("cli: synthetic generation then decomposition") {
  Workspace ws;
  auto gen = run("synth gen --out-dir " + ws.path("synth") +
                 " --config /dev/null --seed 4 --out " + ws.path("gen.json"));
  // /dev/null is empty, not JSON; config must be valid, so write a real one.
  std::ofstream(ws.path("task.json"))
      << R"({"n_classes": 5, "d_raw": 8, "n_pre": 100, "n_tr": 200, "n_te": 100})";
  gen = run("synth gen --out-dir " + ws.path("synth") + " --config " + ws.path("task.json") +
            " --seed 4 --out " + ws.path("gen.json"));
  REQUIRE(gen.exit_code == 0);
  CHECK(fs::exists(ws.path("synth/raw_pretrain.fvec")));
  CHECK(fs::exists(ws.path("synth/raw_train.fvec")));
  CHECK(fs::exists(ws.path("synth/raw_test.fvec")));
  auto summary = json::parse(slurp(ws.path("gen.json")));
  CHECK(summary.at("bayes_risk").get<double>() > 0.0);

  SUBCASE("decompose with the raw-train reference prints the component table") {
    auto dec = run("decompose --train " + ws.path("synth/raw_train.fvec") + " --test " +
                   ws.path("synth/raw_test.fvec") + " --raw-train " +
                   ws.path("synth/raw_train.fvec") + " --seed 4 --out " + ws.path("comps.json"));
    REQUIRE(dec.exit_code == 0);
    CHECK(dec.stdout_text.find("approx") != std::string::npos);
    CHECK(dec.stdout_text.find("usability") != std::string::npos);
    CHECK(dec.stdout_text.find("probe_gen") != std::string::npos);
    CHECK(dec.stdout_text.find("encoder_gen") != std::string::npos);
    auto comps = json::parse(slurp(ws.path("comps.json")));
    CHECK(comps.at("usability") == 0.0);  // identity reference
  }
  SUBCASE("both reference sources at once is a usage error") {
    auto bad = run("decompose --train " + ws.path("synth/raw_train.fvec") + " --test " +
                   ws.path("synth/raw_test.fvec") + " --raw-train " +
                   ws.path("synth/raw_train.fvec") + " --ref-risk 0.1");
    CHECK(bad.exit_code == 2);
  }
  SUBCASE("missing input file is a data error") {
    auto bad = run("decompose --train " + ws.path("missing.fvec") + " --test " +
                   ws.path("synth/raw_test.fvec") + " --ref-risk 0.1");
    CHECK(bad.exit_code == 3);
  }
}

TEST_CASE("cli: few-shot table") {
  Workspace ws;
  std::ofstream(ws.path("task.json"))
      << R"({"n_classes": 3, "d_raw": 6, "n_pre": 60, "n_tr": 150, "n_te": 90})";
  REQUIRE(run("synth gen --out-dir " + ws.path("s") + " --config " + ws.path("task.json")).exit_code == 0);

  auto few = run("fewshot --train " + ws.path("s/raw_train.fvec") + " --test " +
                 ws.path("s/raw_test.fvec") + " --settings full 5-shot --seeds 2 --csv " +
                 ws.path("few.csv") + " --out " + ws.path("few.json"));
  REQUIRE(few.exit_code == 0);
  auto csv = slurp(ws.path("few.csv"));
  CHECK(csv.rfind("setting,mean_risk,std_risk,seeds,feasible,accuracy_mean", 0) == 0);
  CHECK(csv.find("5-shot") != std::string::npos);

  SUBCASE("infeasible settings keep exit code zero") {
    auto inf = run("fewshot --train " + ws.path("s/raw_train.fvec") + " --test " +
                   ws.path("s/raw_test.fvec") + " --settings 9999-shot");
    CHECK(inf.exit_code == 0);
    CHECK(inf.stdout_text.find("no") != std::string::npos);
  }
  SUBCASE("unparseable settings exit with usage code") {
    auto bad = run("fewshot --train " + ws.path("s/raw_train.fvec") + " --test " +
                   ws.path("s/raw_test.fvec") + " --settings 0-shot");
    CHECK(bad.exit_code == 2);
  }
}

TEST_CASE("cli: statistics") {
  Workspace ws;
  std::ofstream(ws.path("task.json")) << R"({"n_classes": 3, "d_raw": 6, "n_pre": 60, "n_tr": 80, "n_te": 60})";
  REQUIRE(run("synth gen --out-dir " + ws.path("s") + " --config " + ws.path("task.json")).exit_code == 0);
  auto stats = run("stats --in " + ws.path("s/raw_train.fvec"));
  REQUIRE(stats.exit_code == 0);
  auto j = json::parse(stats.stdout_text);
  CHECK(j.at("effective_dim") == 6);
  CHECK(!j.contains("alignment"));

  auto paired = run("stats --in " + ws.path("s/raw_train.fvec") + " --pairs " +
                    ws.path("s/raw_train.fvec"));
  REQUIRE(paired.exit_code == 0);
  CHECK(json::parse(paired.stdout_text).at("alignment") == 0.0);
}

TEST_CASE("cli: scaling fit") {
  Workspace ws;
  json obs = json::array();
  for (int e = 0; e < 3; ++e) {
    for (double n : {100.0, 300.0, 1000.0}) {
      const double us = 0.1 + 0.02 * e;
      const double pred =
          0.01 + 0.01 + (1 - 0.51) * us + (0.51 * us + 0.12) * std::pow(1000.0 / n, 0.15);
      obs.push_back({{"encoder", "e" + std::to_string(e)},
                     {"components",
                      {{"approx", 0.01}, {"encoder_gen", 0.01}, {"usability", us}, {"probe_gen", 0.12}}},
                     {"N", 1000.0},
                     {"n", n},
                     {"observed_risk", pred}});
    }
  }
  std::ofstream(ws.path("obs.json")) << obs.dump();
  auto fit = run("scaling fit --obs " + ws.path("obs.json") + " --holdout iid");
  REQUIRE(fit.exit_code == 0);
  auto j = json::parse(fit.stdout_text);
  CHECK(std::fabs(j.at("alpha").get<double>() - 0.15) < 0.02);
  CHECK(j.at("law") == "decomposition");

  auto std_fit = run("scaling fit --obs " + ws.path("obs.json") + " --law standard");
  REQUIRE(std_fit.exit_code == 0);
  CHECK(json::parse(std_fit.stdout_text).at("beta_indeterminate") == true);
}

TEST_CASE("cli: analysis") {
  Workspace ws;
  std::ofstream(ws.path("models.csv"))
      << "dim,family,metric\n32,a,1.0\n64,a,2.0\n32,b,1.5\n64,b,2.5\n128,b,3.5\n";
  auto gla = run("analyze --table " + ws.path("models.csv") +
                 " --method gla --hparam dim --metric metric --controls family");
  REQUIRE(gla.exit_code == 0);
  CHECK(json::parse(gla.stdout_text).at("terms")[0].at("name") == "dim");

  auto ca = run("analyze --table " + ws.path("models.csv") +
                " --method ca --hparam dim --metric metric");
  REQUIRE(ca.exit_code == 0);
  CHECK(json::parse(ca.stdout_text).at("method") == "ca");
}

TEST_CASE("cli: store caching and report bundle") {
  Workspace ws;
  std::ofstream(ws.path("task.json"))
      << R"({"n_classes": 3, "d_raw": 6, "n_pre": 60, "n_tr": 120, "n_te": 60})";
  REQUIRE(run("synth gen --out-dir " + ws.path("s") + " --config " + ws.path("task.json")).exit_code == 0);

  const std::string decompose_args =
      "decompose --train " + ws.path("s/raw_train.fvec") + " --test " + ws.path("s/raw_test.fvec") +
      " --raw-train " + ws.path("s/raw_train.fvec") + " --seed 9 --name encA --store " +
      ws.path("store") + " --out " + ws.path("a.json");
  REQUIRE(run(decompose_args).exit_code == 0);
  const std::string first = slurp(ws.path("a.json"));

  // Second identical run hits the cache and reproduces the output bytes.
  REQUIRE(run(decompose_args).exit_code == 0);
  CHECK(slurp(ws.path("a.json")) == first);

  int docs = 0;
  for (const auto& entry : fs::directory_iterator(ws.path("store"))) {
    (void)entry;
    ++docs;
  }
  CHECK(docs == 1);

  REQUIRE(run("fewshot --train " + ws.path("s/raw_train.fvec") + " --test " +
              ws.path("s/raw_test.fvec") + " --settings full 3-shot --seeds 2 --name encA --store " +
              ws.path("store"))
              .exit_code == 0);

  auto report = run("report --store " + ws.path("store") + " --out-dir " + ws.path("report"));
  REQUIRE(report.exit_code == 0);
  CHECK(fs::exists(ws.path("report/components.csv")));
  CHECK(fs::exists(ws.path("report/radar.json")));
  CHECK(fs::exists(ws.path("report/scaling_obs.json")));
  CHECK(fs::exists(ws.path("report/frontier.csv")));

  SUBCASE("report without a store is a usage error") {
    auto bad = run("report --out-dir " + ws.path("r2"));
    CHECK(bad.exit_code == 2);
  }
}

TEST_CASE("cli: sweep emits the frontier table") {
  Workspace ws;
  std::ofstream(ws.path("encoders.json"))
      << R"([{"kind": "constant", "d_out": 2, "label": "constant"},
             {"kind": "identity", "label": "identity"},
             {"kind": "one_hot_train", "label": "one_hot"}])";
  std::ofstream(ws.path("task.json"))
      << R"({"n_classes": 4, "d_raw": 8, "n_pre": 80, "n_tr": 120, "n_te": 80})";
  auto sweep = run("synth sweep --encoders " + ws.path("encoders.json") + " --config " +
                   ws.path("task.json") + " --seed 2 --csv " + ws.path("frontier.csv") +
                   " --out " + ws.path("sweep.json"));
  REQUIRE(sweep.exit_code == 0);
  auto csv = slurp(ws.path("frontier.csv"));
  CHECK(csv.rfind("encoder,usability,probe_gen", 0) == 0);
  CHECK(csv.find("one_hot") != std::string::npos);
}
