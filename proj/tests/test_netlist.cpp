#include "fluxq/errors.hpp"
#include "fluxq/netlist.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace fluxq;

namespace {

const char* kSquid = R"(circuit squid
branch jl junction EJ=10.0 C=1.0 from a to b
branch jr junction EJ=5.0  C=3.0 from a to b
mesh m1 branches +jl,-jr flux=0.25 noise sigma=0.002 tc=0.05
)";

const char* kTwoLoop = R"(# shared middle junction
circuit two_loop
branch j1 junction EJ=10 C=1 from a to b
branch j2 junction EJ=10 C=1 from a to b
branch j3 junction EJ=10 C=1 from a to b
mesh m1 branches +j1,-j2 flux=0.1
mesh m2 branches +j2,-j3 flux=0.2
)";

bool names(const std::vector<Violation>& v, const std::string& id) {
    return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.subject == id; });
}

std::size_t parse_error_line(const std::string& text) {
    try {
        parse_netlist(text);
    } catch (const ParseError& e) {
        return e.line();
    }
    return 0;
}

}  // namespace

TEST_CASE("squid text parses into two branches and one mesh") {
    CircuitNetlist n = parse_netlist(kSquid);
    CHECK(n.name == "squid");
    REQUIRE(n.branch_count() == 2);
    REQUIRE(n.mesh_count() == 1);
    const auto& jl = std::get<Junction>(n.branches[0].kind);
    CHECK(jl.ej_ghz == 10.0);
    CHECK(jl.capacitance_ff == 1.0);
    CHECK(std::get<Junction>(n.branches[1].kind).capacitance_ff == 3.0);
    const Mesh& m = n.meshes[0];
    CHECK(m.members[0].sign == 1);
    CHECK(m.members[1].sign == -1);
    CHECK(m.drive.static_phi0 == 0.25);
    REQUIRE(m.drive.noise);
    CHECK(m.drive.noise->sigma_phi0 == 0.002);
    CHECK(m.drive.noise->correlation_time_ns == 0.05);
}

TEST_CASE("two-loop text gives three branches and two meshes") {
    CircuitNetlist n = parse_netlist(kTwoLoop);
    CHECK(n.branch_count() == 3);
    CHECK(n.mesh_count() == 2);
    CHECK(n.meshes[1].members[0].branch == "j2");
    CHECK(validate(n).empty());
}

TEST_CASE("parse errors") {
    CHECK_THROWS_AS(parse_netlist("circuit c\nbranch j junction EJ=-1 C=1 from a to b\n"), ParseError);
    CHECK(parse_error_line("circuit c\nbranch j junction EJ=-1 C=1 from a to b\n") == 2);
    CHECK(parse_error_line("circuit c\n\nbranch j resistor R=1 from a to b\n") == 3);
    CHECK(parse_error_line("circuit c\nbranch j capacitor C=1 from a to b\nbranch j capacitor C=2 from b to a\n") == 3);
    CHECK(parse_error_line("circuit c\nbranch j capacitor C=1 from a to b\nmesh m branches +j,+k flux=0\n") == 3);
    CHECK_THROWS_AS(parse_netlist("branch j capacitor C=1 from a to b\n"), ParseError);
    CHECK_THROWS_AS(parse_netlist("circuit c\nbranch j junction EJ=1 from a to b\n"), ParseError);
    CHECK_THROWS_AS(parse_netlist("circuit c\nbranch j junction EJ=1x C=1 from a to b\n"), ParseError);
    CHECK_THROWS_AS(parse_netlist("circuit c\nbranch j inductor L=0 from a to b\n"), ParseError);

    try {
        parse_netlist("circuit c\nbranch j junction EJ=-1 C=1 from a to b\n");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("non-positive") != std::string::npos);
        CHECK(e.column() > 1);
    }
}

TEST_CASE("load_netlist reports missing files with the path") {
    try {
        load_netlist("/nonexistent/x.net");
        FAIL("expected an error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("/nonexistent/x.net") != std::string::npos);
    }
}

TEST_CASE("validate") {
    SUBCASE("squid is valid") { CHECK(validate(parse_netlist(kSquid)).empty()); }

    SUBCASE("two inductors in one mesh") {
        auto v = validate(parse_netlist(R"(circuit c
branch j junction EJ=1 C=1 from a to b
branch l1 inductor L=1 from b to c
branch l2 inductor L=1 from c to a
mesh m branches +j,+l1,+l2 flux=0
)"));
        // node c has no capacitive branch as well
        CHECK(names(v, "m"));
        CHECK(std::count_if(v.begin(), v.end(), [](const Violation& x) {
                  return x.message.find("inductor") != std::string::npos;
              }) == 1);
    }

    SUBCASE("open loop") {
        auto v = validate(parse_netlist(R"(circuit c
branch j1 junction EJ=1 C=1 from a to b
branch j2 junction EJ=1 C=1 from a to b
mesh m branches +j1,+j2 flux=0
)"));
        REQUIRE(v.size() == 1);
        CHECK(v[0].subject == "m");
        CHECK(v[0].message.find("m") != std::string::npos);
    }

    SUBCASE("branch outside every mesh") {
        auto v = validate(parse_netlist(R"(circuit c
branch j1 junction EJ=1 C=1 from a to b
branch j2 junction EJ=1 C=1 from a to b
branch c3 capacitor C=1 from a to b
mesh m branches +j1,-j2 flux=0
)"));
        REQUIRE(v.size() == 1);
        CHECK(v[0].subject == "c3");
    }

    SUBCASE("inductor-only node") {
        auto v = validate(parse_netlist(R"(circuit c
branch j junction EJ=1 C=1 from a to b
branch l1 inductor L=1 from b to c
branch c1 capacitor C=1 from c to a
mesh m branches +j,+l1,+c1 flux=0
)"));
        CHECK(v.empty());
        auto w = validate(parse_netlist(R"(circuit c
branch j junction EJ=1 C=1 from a to b
branch l1 inductor L=1 from b to c
branch l2 inductor L=1 from c to a
mesh m1 branches +j,+l1,+l2 flux=0
)"));
        CHECK(names(w, "c"));
    }

    SUBCASE("every message names its subject and validate is pure") {
        CircuitNetlist n = parse_netlist(R"(circuit bad
branch j1 junction EJ=1 C=1 from a to b
branch j2 junction EJ=1 C=1 from a to b
branch l1 inductor L=1 from b to c
branch l2 inductor L=1 from c to a
mesh m1 branches +j1,+j2 flux=0
mesh m2 branches +j1,+l1,+l2 flux=0
)");
        auto v1 = validate(n);
        auto v2 = validate(n);
        REQUIRE(!v1.empty());
        REQUIRE(v1.size() == v2.size());
        for (std::size_t i = 0; i < v1.size(); ++i) {
            CHECK(v1[i].subject == v2[i].subject);
            CHECK(v1[i].message == v2[i].message);
            CHECK(v1[i].message.find(v1[i].subject) != std::string::npos);
        }
        CHECK_THROWS_AS(require_valid(n), ValidationError);
    }
}

TEST_CASE("serialize then parse is the identity") {
    CHECK(parse_netlist(serialize(parse_netlist(kSquid))) == parse_netlist(kSquid));
    CHECK(parse_netlist(serialize(parse_netlist(kTwoLoop))) == parse_netlist(kTwoLoop));

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.01, 100.0);
    for (int trial = 0; trial < 200; ++trial) {
        CircuitNetlist n;
        n.name = "r" + std::to_string(trial);
        n.branches.push_back({"j", Junction{u(rng), u(rng)}, "a", "b"});
        n.branches.push_back({"c", Capacitor{u(rng)}, "b", "c"});
        n.branches.push_back({"l", Inductor{u(rng) / 7.0}, "c", "a"});
        Mesh m{"m", {{"j", 1}, {"c", 1}, {"l", -1}}, {}};
        m.drive.static_phi0 = u(rng) / 3.0 - 10.0;
        if (trial % 2) m.drive.noise = NoiseSpec{u(rng) * 1e-4, u(rng) * 1e-3, u(rng) * 1e5, trial};
        if (trial % 3 == 0) m.drive.tones.push_back({u(rng), u(rng), u(rng) - 50.0});
        n.meshes.push_back(m);
        CHECK(parse_netlist(serialize(n)) == n);
    }
}
