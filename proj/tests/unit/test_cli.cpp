#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "common.hpp"
#include "ssm/cli.hpp"

namespace {

struct Run {
    int rc = 0;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "ssm");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Run r;
    r.rc = ssm::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("ssm_cli_test_" + name)).string();
}

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

const std::string duffing = fixtures::data("duffing_pair.json");
const std::string viscous = fixtures::data("duffing_viscous.json");

}  // namespace

TEST_CASE("check passes on the reference model and fails on the viscous one") {
    auto a = run({"check", duffing});
    CHECK(a.rc == 0);
    CHECK(a.out.find("overall: pass") != std::string::npos);
    auto b = run({"check", viscous});
    CHECK(b.rc == 1);
}

TEST_CASE("exit codes by error class") {
    CHECK(run({"check", "/nonexistent/model.json"}).rc == 3);
    CHECK(run({"expand", duffing, "--order", "1", "--eps", "0.1"}).rc == 2);
    CHECK(run({"expand", duffing, "--order", "3", "--eps", "0.9"}).rc == 1);
    CHECK(run({"expand", viscous, "--order", "3", "--eps", "0.1"}).rc == 1);
    CHECK(run({"expand", duffing, "--order", "3"}).rc == 1);
    CHECK(run({"expand", duffing, "--order", "3", "--eps", "0.1", "--jet", "1"}).rc == 1);
    CHECK(run({"check", duffing, "--bogus"}).rc == 1);
    CHECK(run({}).rc == 1);
    CHECK(run({"correct", duffing, "--order", "3", "--eps", "0.1", "--gamma", "0.1", "--grid", "x"}).rc == 1);
    CHECK(run({"correct", duffing, "--order", "3", "--eps", "0.1", "--gamma", "0.1", "--method", "nope"}).rc == 1);
    auto e = run({"expand", duffing, "--order", "3", "--eps", "0.1", "--out", "/nonexistent/dir/x.json"});
    CHECK(e.rc == 3);
    CHECK(e.err.find("error") != std::string::npos);
}

TEST_CASE("expand writes JSON with provenance") {
    auto a = run({"expand", duffing, "--order", "5", "--eps", "0.1"});
    REQUIRE(a.rc == 0);
    auto j = nlohmann::json::parse(a.out);
    CHECK(j["model_hash"].get<std::string>().size() == 16);
    CHECK(j["config"]["subcommand"] == "expand");
    CHECK(j["config"]["order"] == 5);
    auto jet = run({"expand", duffing, "--order", "3", "--jet", "2"});
    REQUIRE(jet.rc == 0);
    CHECK(nlohmann::json::parse(jet.out)["config"]["jet_degree"] == 2);
}

TEST_CASE("outputs are deterministic") {
    const std::vector<std::vector<std::string>> cmds = {
        {"expand", duffing, "--order", "5", "--eps", "0.05"},
        {"correct", duffing, "--order", "3", "--eps", "0.1", "--gamma", "0.1", "--grid", "8,4", "--method", "both"},
        {"sweep", duffing, "--order", "3", "--eps-list", "0,0.05,0.1"},
        {"backbone", duffing, "--order", "5", "--eps", "0.1", "--rmax", "0.1", "--points", "5"},
    };
    int n = 0;
    for (auto c : cmds) {
        const auto p1 = temp_path(std::to_string(n) + "a"), p2 = temp_path(std::to_string(n) + "b");
        ++n;
        auto c1 = c, c2 = c;
        c1.insert(c1.end(), {"--out", p1, "--threads", "1"});
        c2.insert(c2.end(), {"--out", p2, "--threads", "2"});
        REQUIRE(run(c1).rc == 0);
        REQUIRE(run(c2).rc == 0);
        auto s1 = slurp(p1), s2 = slurp(p2);
        CHECK(!s1.empty());
        // the thread count is recorded, everything else must match
        auto strip = [](std::string s) {
            auto k = s.find("\"threads\"");
            if (k != std::string::npos) s.erase(k, s.find_first_of(",}", k) - k);
            return s;
        };
        CHECK(strip(s1) == strip(s2));
        std::remove(p1.c_str());
        std::remove(p2.c_str());
    }
}

TEST_CASE("CSV outputs carry a provenance line") {
    auto a = run({"backbone", duffing, "--order", "5", "--eps", "0.1", "--rmax", "0.1", "--points", "3"});
    REQUIRE(a.rc == 0);
    REQUIRE(a.out.rfind("# ", 0) == 0);
    auto first = a.out.substr(2, a.out.find('\n') - 2);
    auto j = nlohmann::json::parse(first);
    CHECK(j.contains("model_hash"));
    auto rest = a.out.substr(a.out.find('\n') + 1);
    CHECK(rest.rfind("r,amplitude,frequency,decay_rate\n", 0) == 0);
}

TEST_CASE("verify report keeps timings out of the artifact") {
    auto a = run({"verify", duffing, "--order", "3", "--eps", "0.1", "-v"});
    REQUIRE(a.rc == 0);
    auto j = nlohmann::json::parse(a.out);
    CHECK(j["report"]["runtimes"].is_string());
    CHECK(a.err.find("runtimes") != std::string::npos);
}
