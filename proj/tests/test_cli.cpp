#include "fluxq/cli.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

using namespace fluxq;

namespace {

const std::string kCircuits = std::string(FLUXQ_SOURCE_DIR) + "/circuits/";

struct Outcome {
    int status;
    std::string out;
    std::string err;
};

Outcome call(std::vector<std::string> args) {
    args.insert(args.begin(), "fluxq");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int status = cli::main_entry(static_cast<int>(argv.size()), argv.data(), out, err);
    return {status, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> v;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) v.push_back(l);
    return v;
}

std::string value_of(const std::string& report, const std::string& key) {
    for (const auto& l : lines(report)) {
        if (l.rfind(key + " = ", 0) == 0) return l.substr(key.size() + 3);
    }
    return {};
}

// Every numeric value carries a unit: `key = <number> <unit>` or a table
// whose columns are all `name:unit`.
void check_units(const std::string& report) {
    const std::regex numeric(R"(^[^=]+ = [-+0-9.][^ ]*$)");
    for (const auto& l : lines(report)) {
        INFO(l);
        if (l.rfind("row = ", 0) == 0) continue;
        CHECK(!std::regex_match(l, numeric));
        if (l.rfind("columns = ", 0) == 0) {
            std::istringstream cols(l.substr(10));
            for (std::string c; std::getline(cols, c, ',');) {
                const bool text_column = c == "branch" || c == "kind";
                CHECK((text_column || c.find(':') != std::string::npos));
            }
        }
    }
}

}  // namespace

TEST_CASE("quantize reports the inverse-capacitance weights") {
    Outcome o = call({"quantize", kCircuits + "squid.net"});
    REQUIRE(o.status == 0);
    CHECK(value_of(o.out, "flux_weight.jl.m1") == "0.75 dimensionless");
    CHECK(value_of(o.out, "flux_weight.jr.m1") == "-0.25 dimensionless");
    CHECK(value_of(o.out, "gauge") == "irrotational");
    check_units(o.out);

    Outcome left = call({"quantize", kCircuits + "squid.net", "--gauge", "1,0"});
    REQUIRE(left.status == 0);
    CHECK(value_of(left.out, "drive_coupling.0.m1") == "0.75 dimensionless");
}

TEST_CASE("missing netlist exits 1 naming the path") {
    Outcome o = call({"quantize", "/nonexistent/circuit.net"});
    CHECK(o.status == cli::kExitValidation);
    CHECK(o.err.find("/nonexistent/circuit.net") != std::string::npos);
    CHECK(o.out.empty());

    const char* exe = std::getenv("FLUXQ_CLI");
    if (exe) {
        const std::string cmd = std::string(exe) + " quantize /nonexistent/circuit.net 2>/dev/null";
        const int raw = std::system(cmd.c_str());
        CHECK(WEXITSTATUS(raw) == 1);
    }
}

TEST_CASE("bad flags exit 1 before any work") {
    CHECK(call({"quantize"}).status == cli::kExitValidation);
    CHECK(call({"frobnicate", kCircuits + "squid.net"}).status == cli::kExitValidation);
    CHECK(call({"spectrum", kCircuits + "squid.net", "--cutoff", "3"}).status == cli::kExitValidation);
    CHECK(call({"spectrum", kCircuits + "squid.net", "--flux-sweep", "0:1"}).status == cli::kExitValidation);
    CHECK(call({"quantize", kCircuits + "squid.net", "--format", "xml"}).status == cli::kExitValidation);
    Outcome o = call({"simulate", kCircuits + "squid.net", "--trajectories", "10"});
    CHECK(o.status == cli::kExitValidation);
    CHECK(o.err.find("fluxq: ") == 0);
    // Mesh-gauge options only make sense on one loop with two branches.
    CHECK(call({"quantize", kCircuits + "two_loop.net", "--gauge", "1,0"}).status == cli::kExitValidation);
}

TEST_CASE("singular gauge exits 2 and names the operation") {
    Outcome o = call({"quantize", kCircuits + "squid.net", "--gauge", "1,1"});
    CHECK(o.status == cli::kExitNumerical);
    CHECK(o.err.find("fluxq: ") == 0);
    CHECK(o.err.find("irrotational.") != std::string::npos);
}

TEST_CASE("reports are byte-identical across runs and carry units") {
    const std::vector<std::string> runs[] = {
        {"quantize", kCircuits + "two_loop.net"},
        {"spectrum", kCircuits + "two_loop.net", "--cutoff", "10", "--flux-sweep", "m1=0:0.5:3"},
        {"rates", kCircuits + "fluxonium.net", "--osc-levels", "60", "--flux-sweep", "0.45:0.5:2"},
        {"simulate", kCircuits + "squid.net", "--trajectories", "100", "--duration", "1.5", "--threads", "2"},
    };
    for (const auto& args : runs) {
        INFO(args[0]);
        Outcome a = call(args);
        Outcome b = call(args);
        REQUIRE(a.status == 0);
        CHECK(a.out == b.out);
        check_units(a.out);
        CHECK(a.out.rfind("[config]\ncommand = " + args[0] + "\n", 0) == 0);
    }
}

TEST_CASE("simulate reports targets and z-scores") {
    Outcome o = call({"simulate", kCircuits + "squid.net", "--gauge", "1,0", "--trajectories", "100", "--duration",
                      "1.5", "--seed", "17"});
    REQUIRE(o.status == 0);
    for (const char* key : {"slope", "offset", "gamma1", "offset_finite_tc"}) {
        INFO(key);
        CHECK(o.out.find(std::string(key) + " = ") != std::string::npos);
    }
    CHECK(o.out.find("[z_scores]") != std::string::npos);
    CHECK(value_of(o.out, "seed") == "17 dimensionless");
}

TEST_CASE("output file and environment overrides") {
    const std::string path = "cli_test_report.txt";
    Outcome o = call({"quantize", kCircuits + "fluxonium.net", "-o", path});
    REQUIRE(o.status == 0);
    CHECK(o.out.empty());
    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    CHECK(value_of(buf.str(), "aux_epsilon") == "1e-08 dimensionless");

    setenv("FLUXQ_AUX_EPSILON", "1e-6", 1);
    CHECK(value_of(call({"quantize", kCircuits + "fluxonium.net"}).out, "aux_epsilon") == "1e-06 dimensionless");
    CHECK(value_of(call({"quantize", kCircuits + "fluxonium.net", "--aux-epsilon", "1e-4"}).out, "aux_epsilon") ==
          "0.0001 dimensionless");
    setenv("FLUXQ_AUX_EPSILON", "abc", 1);
    CHECK(call({"quantize", kCircuits + "fluxonium.net"}).status == cli::kExitValidation);
    unsetenv("FLUXQ_AUX_EPSILON");
}

TEST_CASE("check-gauge") {
    CHECK(call({"check-gauge", kCircuits + "two_loop.net", "--trajectories", "100"}).status == cli::kExitValidation);

    Outcome o = call({"check-gauge", kCircuits + "squid.net", "--trajectories", "300", "--duration", "3"});
    INFO(o.out);
    INFO(o.err);
    CHECK(o.status == 0);
    CHECK(o.out.find("= fail") == std::string::npos);
    for (const char* key : {"spectrum_invariance = pass", "n_ge_invariance = pass", "offset_law = pass",
                            "slope_invariance = pass", "slope_vs_golden_rule = pass", "result = pass"}) {
        INFO(key);
        CHECK(o.out.find(std::string(key)) != std::string::npos);
    }
}
