#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run(const std::string& args) {
    const std::string command = std::string(ATH_CLI_PATH) + " " + args + " 2>&1";
    RunResult result;
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buffer[4096];
    while (std::size_t n = fread(buffer, 1, sizeof(buffer), pipe)) result.output.append(buffer, n);
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

} // namespace

TEST_CASE("gen-synthetic then eval reaches 100 on the oracle recipe") {
    auto dir = test::scratch_dir("cli_eval");
    auto gen = run("gen-synthetic --out " + (dir / "data").string() +
                   " --seed 3 --graphs 8 --questions-per-graph 2 --noise 0.0");
    INFO(gen.output);
    REQUIRE(gen.exit_code == 0);

    auto eval = run("eval --config " + (dir / "data" / "config.json").string() +
                    " --report-json " + (dir / "report.json").string());
    INFO(eval.output);
    CHECK(eval.exit_code == 0); // no failures recorded
    CHECK(eval.output.find("overall 100.00") != std::string::npos);
    const std::string report = slurp(dir / "report.json");
    CHECK(report.find("\"overall\": 100.0") != std::string::npos);
}

TEST_CASE("gen-synthetic is byte-deterministic across runs") {
    auto dir = test::scratch_dir("cli_determinism");
    REQUIRE(run("gen-synthetic --out " + (dir / "a").string() + " --seed 17 --graphs 5 --noise 0.3")
                .exit_code == 0);
    REQUIRE(run("gen-synthetic --out " + (dir / "b").string() + " --seed 17 --graphs 5 --noise 0.3")
                .exit_code == 0);
    for (const char* name :
         {"graphs.json", "questions.json", "detections.json", "opseqs_predicted.json"})
        CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
}

TEST_CASE("answer prints a step-by-step trace") {
    auto dir = test::scratch_dir("cli_answer");
    REQUIRE(run("gen-synthetic --out " + (dir / "data").string() + " --seed 4 --graphs 3").exit_code ==
            0);
    auto result = run("answer --config " + (dir / "data" / "config.json").string() +
                      " --question-id q0-0");
    INFO(result.output);
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("question q0-0:") != std::string::npos);
    CHECK(result.output.find("answer: ") != std::string::npos);
    CHECK(result.output.find("chosen") != std::string::npos);

    auto missing = run("answer --config " + (dir / "data" / "config.json").string() +
                       " --question-id nope");
    CHECK(missing.exit_code == 2);
    CHECK(missing.output.find("question not found") != std::string::npos);
}

TEST_CASE("configuration errors exit with code 2") {
    auto dir = test::scratch_dir("cli_errors");
    auto missing_config = run("eval --config " + (dir / "missing.json").string());
    CHECK(missing_config.exit_code == 2);

    std::ofstream bad(dir / "bad.json");
    bad << "{\"tau\": 7}";
    bad.close();
    auto bad_config = run("eval --config " + (dir / "bad.json").string());
    CHECK(bad_config.exit_code == 2);

    auto no_args = run("eval");
    CHECK(no_args.exit_code == 2);
}

TEST_CASE("calibrate writes a threshold file with achieved F1") {
    auto dir = test::scratch_dir("cli_calibrate");
    REQUIRE(run("gen-synthetic --out " + (dir / "data").string() +
                " --seed 6 --graphs 20 --questions-per-graph 3")
                .exit_code == 0);
    auto result = run("calibrate --config " + (dir / "data" / "config.json").string() +
                      " --tau-out " + (dir / "tau.json").string());
    INFO(result.output);
    REQUIRE(result.exit_code == 0);
    const std::string tau = slurp(dir / "tau.json");
    CHECK(tau.find("\"tau\"") != std::string::npos);
    CHECK(tau.find("\"f1\": 1.0") != std::string::npos); // oracle scores separate perfectly
    CHECK(tau.find("\"dev_set_id\"") != std::string::npos);
}

TEST_CASE("ablate prints a deterministic table") {
    auto dir = test::scratch_dir("cli_ablate");
    REQUIRE(run("gen-synthetic --out " + (dir / "data").string() +
                " --seed 8 --graphs 6 --questions-per-graph 2 --noise 0.25")
                .exit_code == 0);
    auto a = run("ablate --config " + (dir / "data" / "config.json").string());
    auto b = run("ablate --config " + (dir / "data" / "config.json").string());
    REQUIRE(a.exit_code == 0);
    CHECK(a.output == b.output);
    CHECK(a.output.find("gold/oracle") != std::string::npos);
    CHECK(a.output.find("predicted/pred-obj+attr+rel") != std::string::npos);
}
