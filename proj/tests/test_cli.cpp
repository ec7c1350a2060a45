#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace {

std::string cli_path() {
    const char* env = std::getenv("MRISK_CLI");
    return env ? env : "./mrisk";
}
std::string g_cli = cli_path();

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream o;
    o << f.rdbuf();
    return o.str();
}

int run(const std::string& args) {
    std::string cmd = g_cli + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

const char* kSparseNoise =
    R"('{"atoms":[{"weight":0.9,"location":0}],"components":[{"kind":"gaussian","weight":0.1,"sigma":1}]}')";

}  // namespace

TEST_CASE("exit codes distinguish validation from numerical failure") {
    CHECK(run(std::string("threshold --loss '{\"kind\":\"abs\"}' --noise ") + kSparseNoise) ==
          0);
    // missing delta
    CHECK(run(std::string("solve --loss '{\"kind\":\"abs\"}' --noise ") + kSparseNoise) == 2);
    // degenerate noise
    CHECK(run("threshold --loss '{\"kind\":\"abs\"}' "
              "--noise '{\"atoms\":[{\"weight\":1,\"location\":0}]}'") == 2);
    // malformed descriptor
    CHECK(run("threshold --loss '{\"kind\":\"nope\"}' --noise '{}'") == 2);
}

TEST_CASE("reruns are byte-identical") {
    std::string base = std::string("risk-curve --loss '{\"kind\":\"abs\"}' "
                                   "--reg '{\"kind\":\"abs\"}' --noise ") +
                       R"('{"atoms":[{"weight":0.7,"location":0}],"components":[{"kind":"gaussian","weight":0.3,"sigma":1}]}')" +
                       " --signal " + kSparseNoise +
                       " --delta 1.2 --set lambda_grid='[0.5,1,2]' --out ";
    REQUIRE(run(base + "/tmp/mrisk_cli_a.csv") == 0);
    REQUIRE(run(base + "/tmp/mrisk_cli_b.csv") == 0);
    std::string a = slurp("/tmp/mrisk_cli_a.csv");
    CHECK_FALSE(a.empty());
    CHECK(a == slurp("/tmp/mrisk_cli_b.csv"));
    std::remove("/tmp/mrisk_cli_a.csv");
    std::remove("/tmp/mrisk_cli_b.csv");
}

TEST_CASE("set overrides reach the engine") {
    CHECK(run(std::string("statdim --loss '{\"kind\":\"abs\"}' --noise ") + kSparseNoise +
              " -m 100 --samples 20 --seed 4") == 0);
    CHECK(run(std::string("solve --loss '{\"kind\":\"square\"}' "
                          "--noise '{\"components\":[{\"kind\":\"gaussian\",\"weight\":1,"
                          "\"sigma\":1}]}' --delta 2 --set gh_nodes=41")) == 0);
}
