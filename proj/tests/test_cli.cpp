// End-to-end runs of the gemhp binary.

#include "gemhp/stream.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kPoissonModel = R"({"schema": "gemhp/model-v1", "components": 1,
  "parameters": [{"name": "nu", "lower": 0.05, "upper": 5, "value": 1.0}],
  "baselines": [{"form": "constant", "coef": ["nu"]}]})";

const char* kHawkesModel = R"({"schema": "gemhp/model-v1", "components": 1,
  "parameters": [{"name": "nu", "lower": 0.05, "upper": 5, "value": 1.0},
                 {"name": "a", "lower": 0.01, "upper": 5, "value": 0.5},
                 {"name": "b", "lower": 0.1, "upper": 20, "value": 1.0}],
  "marks": {"space": {"kind": "continuous", "dim": 1},
            "kernels": {"family": "gaussian-ar1", "mean": 0, "coef": 0.5, "sd": 1}},
  "baselines": [{"form": "constant", "coef": ["nu"]}],
  "kernels": [{"target": 0, "source": 0, "terms": [{"poly": ["a"], "r": "b"}]}],
  "x0": [0.0]})";

const char* kQueueModel = R"({"schema": "gemhp/model-v1", "components": 3,
  "parameters": [{"name": "nuL", "lower": 0.01, "upper": 5, "value": 1.0},
                 {"name": "nuM", "lower": 0.01, "upper": 5, "value": 0.8},
                 {"name": "nuC", "lower": 0.0, "upper": 5, "value": 0.5}],
  "marks": {"space": {"kind": "discrete"},
            "kernels": [{"family": "queue-reactive-dirac", "step": 1},
                        {"family": "queue-reactive-dirac", "step": -1},
                        {"family": "queue-reactive-dirac", "step": -1}]},
  "baselines": [{"form": "constant", "coef": ["nuL"]}, {"form": "constant", "coef": ["nuM"]},
                {"form": "proportional", "coef": ["nuC", 0.01]}],
  "kernels": [{"target": 0, "source": 0, "terms": [{"poly": [0.3], "r": 1.0}]},
              {"target": 1, "source": 1, "terms": [{"poly": [0.2], "r": 1.0}]}],
  "probe": [0, 1, 10, 50], "x0": 3})";

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("gemhp_cli_") + info->name() + "_" +
                                            std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
        fs::create_directories(dir_);
        write("poisson.json", kPoissonModel);
        write("hawkes.json", kHawkesModel);
        write("queue.json", kQueueModel);
    }
    void TearDown() override {
        std::error_code ec;
        if (!HasFailure()) fs::remove_all(dir_, ec);
    }

    void write(const std::string& name, const std::string& text) {
        std::ofstream(dir_ / name) << text;
    }

    std::string read(const fs::path& p) {
        std::ifstream is(p);
        std::stringstream ss;
        ss << is.rdbuf();
        return ss.str();
    }

    json read_json(const std::string& rel) { return json::parse(read(dir_ / rel)); }

    int run(const std::string& args) {
        const std::string cmd = std::string(GEMHP_CLI_PATH) + " " + args + " > " + (dir_ / "stdout.txt").string() +
                                " 2> " + (dir_ / "stderr.txt").string();
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string err() { return read(dir_ / "stderr.txt"); }

    std::string config(const std::string& name, const json& j) {
        write(name, j.dump(2));
        return (dir_ / name).string();
    }

    fs::path dir_;
};

} // namespace

TEST_F(Cli, StabilityReportsRatio) {
    const auto cfg = config("run.json", {{"schema", "gemhp/run-v1"}, {"model", "hawkes.json"}, {"output", "out"},
                                         {"seed", 5}});
    ASSERT_EQ(run("stability --config " + cfg), 0) << err();
    const auto j = read_json("out/stability.json");
    EXPECT_TRUE(j["stability"]["ok"].get<bool>());
    EXPECT_NEAR(j["stability"]["rho_bound"].get<double>(), 0.5, 1e-12);
    EXPECT_EQ(j["seed"].get<int>(), 5);
    EXPECT_EQ(j["config_hash"].get<std::string>().size(), 16u);
    EXPECT_TRUE(fs::exists(dir_ / "out/manifest_stability.json"));
    EXPECT_FALSE(fs::exists(dir_ / "out/.gemhp.lock"));
}

TEST_F(Cli, QueueReactiveStabilityIncludesDrift) {
    const auto cfg = config("run.json", {{"schema", "gemhp/run-v1"}, {"model", "queue.json"}, {"output", "out"}});
    ASSERT_EQ(run("stability --config " + cfg), 0) << err();
    const auto j = read_json("out/stability.json");
    EXPECT_EQ(j["drift"]["x0"].get<int>(), 1);
    EXPECT_TRUE(j["drift"]["ok"].get<bool>());
}

TEST_F(Cli, SimulatePoissonAndReplicationsAreDeterministic) {
    json base = {{"schema", "gemhp/run-v1"}, {"model", "poisson.json"}, {"seed", 11},
                 {"simulate", {{"horizon", 100}, {"replications", 8}}}};
    base["output"] = "a";
    const auto a = config("a.json", base);
    base["output"] = "b";
    const auto b = config("b.json", base);
    ASSERT_EQ(run("simulate --config " + a), 0) << err();
    ASSERT_EQ(run("simulate --config " + b + " --workers 3"), 0) << err();
    for (int r = 0; r < 8; ++r) {
        const std::string name = "stream_" + std::to_string(r) + ".jsonl";
        const auto sa = read(dir_ / "a" / name);
        const auto sb = read(dir_ / "b" / name);
        // Headers differ only through the config hash (the output path differs).
        EXPECT_EQ(sa.substr(sa.find('\n')), sb.substr(sb.find('\n'))) << name;
        const auto s = gemhp::read_stream_file((dir_ / "a" / name).string());
        EXPECT_EQ(s.seed.value_or(0), 11u);
        EXPECT_NEAR(static_cast<double>(s.size()), 100.0, 4 * 10.0);
    }
    EXPECT_NE(read(dir_ / "a/stream_0.jsonl").substr(80), read(dir_ / "a/stream_1.jsonl").substr(80));
    const auto m = read_json("a/manifest_simulate.json");
    EXPECT_TRUE(m.contains("wall_seconds"));
    EXPECT_EQ(m["seed"].get<int>(), 11);
}

TEST_F(Cli, RerunReproducesOutputsBitForBit) {
    const auto cfg = config("run.json", {{"schema", "gemhp/run-v1"}, {"model", "hawkes.json"}, {"output", "out"},
                                         {"seed", 2}, {"simulate", {{"horizon", 200}}}});
    ASSERT_EQ(run("simulate --config " + cfg), 0) << err();
    const auto first = read(dir_ / "out/stream_0.jsonl");
    const auto first_report = read(dir_ / "out/simulate.json");
    ASSERT_EQ(run("simulate --config " + cfg), 0) << err();
    EXPECT_EQ(first, read(dir_ / "out/stream_0.jsonl"));
    EXPECT_EQ(first_report, read(dir_ / "out/simulate.json"));
}

TEST_F(Cli, QueueMarksStayNonnegativeIntegers) {
    const auto cfg = config("run.json", {{"schema", "gemhp/run-v1"}, {"model", "queue.json"}, {"output", "out"},
                                         {"simulate", {{"horizon", 500}}}});
    ASSERT_EQ(run("simulate --config " + cfg), 0) << err();
    std::ifstream is(dir_ / "out/stream_0.jsonl");
    std::string line;
    std::getline(is, line);
    int n = 0;
    while (std::getline(is, line)) {
        const auto j = json::parse(line);
        ASSERT_TRUE(j["x"].is_number_integer()) << line;
        EXPECT_GE(j["x"].get<long>(), 0);
        ++n;
    }
    EXPECT_GT(n, 100);
}

TEST_F(Cli, FitPoissonAndRefitIsFixedPoint) {
    const auto sim = config("sim.json", {{"schema", "gemhp/run-v1"}, {"model", "hawkes.json"}, {"output", "sim"},
                                         {"seed", 3}, {"simulate", {{"horizon", 500}}}});
    ASSERT_EQ(run("simulate --config " + sim), 0) << err();
    const auto fit = config("fit.json", {{"schema", "gemhp/run-v1"}, {"model", "hawkes.json"}, {"output", "fit1"},
                                         {"fit", {{"stream", "sim/stream_0.jsonl"}}}});
    ASSERT_EQ(run("fit --config " + fit), 0) << err();
    const auto r1 = read_json("fit1/fit.json");
    const json theta_hat = r1["fit"]["theta_hat"];
    const auto refit = config("refit.json", {{"schema", "gemhp/run-v1"}, {"model", "hawkes.json"}, {"output", "fit2"},
                                             {"fit", {{"stream", "sim/stream_0.jsonl"}, {"init", theta_hat}}}});
    ASSERT_EQ(run("fit --config " + refit), 0) << err();
    const auto r2 = read_json("fit2/fit.json");
    for (const auto& [name, v] : theta_hat.items()) {
        EXPECT_NEAR(r2["fit"]["theta_hat"][name].get<double>(), v.get<double>(), 1e-6) << name;
    }
    EXPECT_TRUE(fs::exists(dir_ / "fit1/fit.txt"));
    EXPECT_FALSE(r1["fit"]["wald_intervals"].is_null());

    const auto psim = config("psim.json", {{"schema", "gemhp/run-v1"}, {"model", "poisson.json"}, {"output", "psim"},
                                           {"simulate", {{"horizon", 400}}}});
    ASSERT_EQ(run("simulate --config " + psim), 0) << err();
    const auto pfit = config("pfit.json", {{"schema", "gemhp/run-v1"}, {"model", "poisson.json"}, {"output", "pfit"},
                                           {"fit", {{"stream", "psim/stream_0.jsonl"}}}});
    ASSERT_EQ(run("fit --config " + pfit), 0) << err();
    const auto s = gemhp::read_stream_file((dir_ / "psim/stream_0.jsonl").string());
    EXPECT_NEAR(read_json("pfit/fit.json")["fit"]["theta_hat"]["nu"].get<double>(),
                static_cast<double>(s.size()) / s.horizon, 1e-7);
}

TEST_F(Cli, DiagnoseAtTruthPassesKs) {
    const auto sim = config("sim.json", {{"schema", "gemhp/run-v1"}, {"model", "hawkes.json"}, {"output", "sim"},
                                         {"seed", 4}, {"simulate", {{"horizon", 1000}}}});
    ASSERT_EQ(run("simulate --config " + sim), 0) << err();
    const auto diag = config("diag.json", {{"schema", "gemhp/run-v1"}, {"model", "hawkes.json"}, {"output", "diag"},
                                           {"diagnose", {{"stream", "sim/stream_0.jsonl"}, {"grid_step", 0.5}, {"lan", true}}}});
    ASSERT_EQ(run("diagnose --config " + diag), 0) << err();
    const auto j = read_json("diag/diagnose.json");
    EXPECT_TRUE(j["residuals"][0]["pass_1pct"].get<bool>());
    EXPECT_TRUE(j.contains("lan"));
    EXPECT_TRUE(fs::exists(dir_ / "diag/residuals_0.dat"));
    EXPECT_TRUE(fs::exists(dir_ / "diag/mixing_acf.dat"));
}

TEST_F(Cli, BayesSmall) {
    const auto sim = config("sim.json", {{"schema", "gemhp/run-v1"}, {"model", "poisson.json"}, {"output", "sim"},
                                         {"simulate", {{"horizon", 300}}}});
    ASSERT_EQ(run("simulate --config " + sim), 0) << err();
    const auto bayes = config("bayes.json", {{"schema", "gemhp/run-v1"}, {"model", "poisson.json"}, {"output", "post"},
                                             {"bayes", {{"stream", "sim/stream_0.jsonl"}, {"draws", 4000}, {"burn_in", 1000},
                                                        {"priors", {{"nu", {{"type", "truncated-normal"}, {"mean", 1}, {"sd", 2}}}}}}}});
    ASSERT_EQ(run("bayes --config " + bayes), 0) << err();
    const auto j = read_json("post/bayes.json");
    EXPECT_NEAR(j["posterior"]["theta_tilde"]["nu"].get<double>(), 1.0, 0.25);
}

TEST_F(Cli, McstudySmokeProfile) {
    const auto cfg = config("mc.json", {{"schema", "gemhp/run-v1"}, {"model", "hawkes.json"}, {"output", "mc"},
                                        {"seed", 1},
                                        {"mcstudy", {{"horizons", {200}}, {"replications", 20}, {"reference_samples", 100000}}}});
    const auto t0 = std::chrono::steady_clock::now();
    const int code = run("mcstudy --config " + cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_TRUE(code == 0 || code == 1) << err();
    EXPECT_LT(secs, 300.0);
    const auto j = read_json("mc/mcstudy.json");
    EXPECT_EQ(j["horizons"][0]["replications"].size(), 20u);
    EXPECT_TRUE(fs::exists(dir_ / "mc/mcstudy.txt"));
}

TEST_F(Cli, InputErrorsExitTwo) {
    const auto missing = config("missing.json", {{"schema", "gemhp/run-v1"}, {"model", "nope.json"}});
    EXPECT_EQ(run("stability --config " + missing), 2);
    EXPECT_NE(err().find("nope.json"), std::string::npos) << err();

    const auto typo = config("typo.json", {{"schema", "gemhp/run-v1"}, {"model", "poisson.json"}, {"seeed", 1}});
    EXPECT_EQ(run("stability --config " + typo), 2);
    EXPECT_NE(err().find("seeed"), std::string::npos);

    EXPECT_EQ(run("stability --config " + (dir_ / "does_not_exist.json").string()), 2);
    EXPECT_EQ(run("frobnicate --config x"), 2);
    EXPECT_EQ(run("fit"), 2);

    const auto no_stream = config("ns.json", {{"schema", "gemhp/run-v1"}, {"model", "poisson.json"}, {"output", "o"},
                                              {"fit", {{"stream", "absent.jsonl"}}}});
    EXPECT_EQ(run("fit --config " + no_stream), 2);
}

TEST_F(Cli, UnstableSimulateRefusedUnlessAllowed) {
    const auto cfg = config("run.json", {{"schema", "gemhp/run-v1"}, {"model", "hawkes.json"}, {"output", "out"},
                                         {"theta", {{"a", 1.2}}},
                                         {"simulate", {{"horizon", 1e6}, {"max_events", 5000}}}});
    EXPECT_EQ(run("simulate --config " + cfg), 2);
    EXPECT_NE(err().find("rho_bound"), std::string::npos) << err();
    // Allowed, the run hits the event cap: a numerical failure.
    EXPECT_EQ(run("simulate --config " + cfg + " --allow-unstable"), 1);
}

TEST_F(Cli, LockedOutputDirectoryRefused) {
    fs::create_directories(dir_ / "out");
    write("out/.gemhp.lock", "");
    const auto cfg = config("run.json", {{"schema", "gemhp/run-v1"}, {"model", "poisson.json"}, {"output", "out"}});
    EXPECT_EQ(run("stability --config " + cfg), 2);
    EXPECT_NE(err().find("locked"), std::string::npos);
}

TEST_F(Cli, SeedOverrideRecorded) {
    const auto cfg = config("run.json", {{"schema", "gemhp/run-v1"}, {"model", "poisson.json"}, {"output", "out"},
                                         {"seed", 1}, {"simulate", {{"horizon", 50}}}});
    ASSERT_EQ(run("simulate --config " + cfg + " --seed 77"), 0) << err();
    EXPECT_EQ(read_json("out/simulate.json")["seed"].get<int>(), 77);
    EXPECT_EQ(gemhp::read_stream_file((dir_ / "out/stream_0.jsonl").string()).seed.value_or(0), 77u);
}
