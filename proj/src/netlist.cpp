#include "fluxq/netlist.hpp"

#include "fluxq/errors.hpp"
#include "fluxq/units.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

namespace fluxq {

std::optional<double> Branch::capacitance() const {
    if (const auto* j = std::get_if<Junction>(&kind)) return j->capacitance_ff;
    if (const auto* c = std::get_if<Capacitor>(&kind)) return c->capacitance_ff;
    return std::nullopt;
}

double NoiseSpec::sigma_phase() const { return units::flux_to_phase(sigma_phi0); }

std::optional<std::size_t> CircuitNetlist::branch_index(std::string_view id) const {
    for (std::size_t i = 0; i < branches.size(); ++i) {
        if (branches[i].id == id) return i;
    }
    return std::nullopt;
}

std::vector<double> CircuitNetlist::static_phases() const {
    std::vector<double> out;
    out.reserve(meshes.size());
    for (const auto& m : meshes) out.push_back(units::flux_to_phase(m.drive.static_phi0));
    return out;
}

namespace {

struct Token {
    std::string_view text;
    std::size_t column;  // 1-based
};

std::vector<Token> tokenize(std::string_view line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i >= line.size() || line[i] == '#') break;
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) && line[i] != '#') ++i;
        out.push_back({line.substr(start, i - start), start + 1});
    }
    return out;
}

class LineParser {
public:
    LineParser(std::size_t line_no, std::vector<Token> tokens) : line_(line_no), tokens_(std::move(tokens)) {}

    bool done() const { return pos_ >= tokens_.size(); }

    const Token& peek() const {
        if (done()) fail_at_end("unexpected end of statement");
        return tokens_[pos_];
    }

    Token next() {
        const Token& t = peek();
        ++pos_;
        return t;
    }

    void expect(std::string_view keyword) {
        Token t = next();
        if (t.text != keyword) fail(t, "expected '" + std::string(keyword) + "', found '" + std::string(t.text) + "'");
    }

    std::string identifier(std::string_view what) {
        Token t = next();
        if (t.text.find('=') != std::string_view::npos || t.text.find(',') != std::string_view::npos) {
            fail(t, "invalid " + std::string(what) + " '" + std::string(t.text) + "'");
        }
        return std::string(t.text);
    }

    [[noreturn]] void fail(const Token& t, const std::string& msg) const { throw ParseError(line_, t.column, msg); }

    [[noreturn]] void fail_at_end(const std::string& msg) const {
        std::size_t col = 1;
        if (!tokens_.empty()) col = tokens_.back().column + tokens_.back().text.size();
        throw ParseError(line_, col, msg);
    }

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

double parse_number(const LineParser& p, const Token& t, std::string_view text) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (!text.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
        p.fail(t, "malformed number '" + std::string(text) + "'");
    }
    return value;
}

// Splits "KEY=value" and checks the key.
std::pair<std::string_view, std::string_view> split_assignment(const LineParser& p, const Token& t) {
    auto eq = t.text.find('=');
    if (eq == std::string_view::npos || eq == 0) p.fail(t, "expected key=value, found '" + std::string(t.text) + "'");
    return {t.text.substr(0, eq), t.text.substr(eq + 1)};
}

double positive(const LineParser& p, const Token& t, std::string_view key, double v) {
    if (!(v > 0.0)) p.fail(t, "non-positive parameter " + std::string(key) + "=" + std::to_string(v));
    return v;
}

double non_negative(const LineParser& p, const Token& t, std::string_view key, double v) {
    if (v < 0.0) p.fail(t, "negative parameter " + std::string(key) + "=" + std::to_string(v));
    return v;
}

// Reads key=value tokens until a token without '=' or the end of the statement.
std::map<std::string, std::pair<double, Token>, std::less<>> read_params(LineParser& p,
                                                                         std::initializer_list<std::string_view> allowed) {
    std::map<std::string, std::pair<double, Token>, std::less<>> out;
    while (!p.done() && p.peek().text.find('=') != std::string_view::npos) {
        Token t = p.next();
        auto [key, value] = split_assignment(p, t);
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            p.fail(t, "unknown parameter '" + std::string(key) + "'");
        }
        if (out.count(key)) p.fail(t, "duplicate parameter '" + std::string(key) + "'");
        out.emplace(std::string(key), std::make_pair(parse_number(p, t, value), t));
    }
    return out;
}

double required(const LineParser& p, const Token& stmt,
                const std::map<std::string, std::pair<double, Token>, std::less<>>& params, std::string_view key) {
    auto it = params.find(key);
    if (it == params.end()) p.fail(stmt, "missing parameter " + std::string(key));
    return it->second.first;
}

struct PendingMember {
    std::string branch;
    int sign;
    std::size_t line;
    std::size_t column;
};

Branch parse_branch(LineParser& p, const Token& stmt) {
    Branch b;
    b.id = p.identifier("branch id");
    Token kind = p.next();
    if (kind.text == "junction") {
        auto params = read_params(p, {"EJ", "C"});
        double ej = required(p, stmt, params, "EJ");
        double c = required(p, stmt, params, "C");
        positive(p, params.at("EJ").second, "EJ", ej);
        positive(p, params.at("C").second, "C", c);
        b.kind = Junction{ej, c};
    } else if (kind.text == "capacitor") {
        auto params = read_params(p, {"C"});
        double c = required(p, stmt, params, "C");
        positive(p, params.at("C").second, "C", c);
        b.kind = Capacitor{c};
    } else if (kind.text == "inductor") {
        auto params = read_params(p, {"L"});
        double l = required(p, stmt, params, "L");
        positive(p, params.at("L").second, "L", l);
        b.kind = Inductor{l};
    } else {
        p.fail(kind, "unknown branch kind '" + std::string(kind.text) + "'");
    }
    p.expect("from");
    b.from = p.identifier("node");
    Token to_kw = p.peek();
    p.expect("to");
    b.to = p.identifier("node");
    if (b.from == b.to) p.fail(to_kw, "branch " + b.id + " connects node " + b.from + " to itself");
    if (!p.done()) p.fail(p.peek(), "unexpected trailing token '" + std::string(p.peek().text) + "'");
    return b;
}

Mesh parse_mesh(LineParser& p, std::vector<PendingMember>& pending) {
    Mesh m;
    m.id = p.identifier("mesh id");
    p.expect("branches");
    Token list = p.next();
    std::size_t offset = 0;
    std::string_view text = list.text;
    while (offset <= text.size()) {
        auto comma = text.find(',', offset);
        auto item = text.substr(offset, comma == std::string_view::npos ? std::string_view::npos : comma - offset);
        std::size_t col = list.column + offset;
        int sign = 1;
        if (!item.empty() && (item.front() == '+' || item.front() == '-')) {
            sign = item.front() == '-' ? -1 : 1;
            item.remove_prefix(1);
        }
        if (item.empty()) throw ParseError(p.line(), col, "empty branch reference in mesh " + m.id);
        m.members.push_back({std::string(item), sign});
        pending.push_back({std::string(item), sign, p.line(), col});
        if (comma == std::string_view::npos) break;
        offset = comma + 1;
    }

    Token flux_tok = p.next();
    auto [key, value] = split_assignment(p, flux_tok);
    if (key != "flux") p.fail(flux_tok, "expected flux=<Phi0>");
    m.drive.static_phi0 = parse_number(p, flux_tok, value);

    while (!p.done()) {
        Token clause = p.next();
        if (clause.text == "noise") {
            if (m.drive.noise) p.fail(clause, "duplicate noise clause");
            auto params = read_params(p, {"sigma", "tc", "wmax", "modes"});
            NoiseSpec n{};
            n.sigma_phi0 = positive(p, clause, "sigma", required(p, clause, params, "sigma"));
            n.correlation_time_ns = positive(p, clause, "tc", required(p, clause, params, "tc"));
            if (auto it = params.find("wmax"); it != params.end()) {
                n.band_limit = positive(p, it->second.second, "wmax", it->second.first);
            }
            if (auto it = params.find("modes"); it != params.end()) {
                double v = positive(p, it->second.second, "modes", it->second.first);
                if (v != std::floor(v)) p.fail(it->second.second, "modes must be an integer");
                n.mode_count = static_cast<int>(v);
            }
            m.drive.noise = n;
        } else if (clause.text == "tone") {
            auto params = read_params(p, {"A", "w", "ph"});
            Tone t{};
            t.amplitude_phi0 = non_negative(p, clause, "A", required(p, clause, params, "A"));
            t.angular_frequency = non_negative(p, clause, "w", required(p, clause, params, "w"));
            auto ph = params.find("ph");
            t.phase = ph == params.end() ? 0.0 : ph->second.first;
            m.drive.tones.push_back(t);
        } else {
            p.fail(clause, "unknown mesh clause '" + std::string(clause.text) + "'");
        }
    }
    return m;
}

}  // namespace

CircuitNetlist parse_netlist(std::string_view text) {
    CircuitNetlist out;
    bool have_name = false;
    std::set<std::string, std::less<>> branch_ids;
    std::set<std::string, std::less<>> mesh_ids;
    std::vector<PendingMember> pending;

    std::size_t line_no = 0;
    std::size_t begin = 0;
    while (begin <= text.size()) {
        auto end = text.find('\n', begin);
        std::string_view line = text.substr(begin, end == std::string_view::npos ? std::string_view::npos : end - begin);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;

        auto tokens = tokenize(line);
        if (!tokens.empty()) {
            LineParser p(line_no, std::move(tokens));
            Token stmt = p.next();
            if (stmt.text == "circuit") {
                if (have_name) p.fail(stmt, "duplicate circuit statement");
                out.name = p.identifier("circuit name");
                have_name = true;
                if (!p.done()) p.fail(p.peek(), "unexpected trailing token '" + std::string(p.peek().text) + "'");
            } else if (stmt.text == "branch") {
                Token id_tok = p.peek();
                Branch b = parse_branch(p, stmt);
                if (!branch_ids.insert(b.id).second) p.fail(id_tok, "duplicate branch id '" + b.id + "'");
                out.branches.push_back(std::move(b));
            } else if (stmt.text == "mesh") {
                Token id_tok = p.peek();
                Mesh m = parse_mesh(p, pending);
                if (!mesh_ids.insert(m.id).second) p.fail(id_tok, "duplicate mesh id '" + m.id + "'");
                out.meshes.push_back(std::move(m));
            } else {
                p.fail(stmt, "unknown statement '" + std::string(stmt.text) + "'");
            }
        }
        if (end == std::string_view::npos) break;
        begin = end + 1;
    }

    if (!have_name) throw ParseError(1, 1, "missing 'circuit <name>' statement");
    for (const auto& m : pending) {
        if (!branch_ids.count(m.branch)) {
            throw ParseError(m.line, m.column, "unknown branch reference '" + m.branch + "'");
        }
    }
    return out;
}

CircuitNetlist load_netlist(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open netlist file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_netlist(buf.str());
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string serialize(const CircuitNetlist& netlist) {
    std::ostringstream os;
    os << "circuit " << netlist.name << '\n';
    for (const auto& b : netlist.branches) {
        os << "branch " << b.id << ' ';
        if (const auto* j = std::get_if<Junction>(&b.kind)) {
            os << "junction EJ=" << fmt(j->ej_ghz) << " C=" << fmt(j->capacitance_ff);
        } else if (const auto* c = std::get_if<Capacitor>(&b.kind)) {
            os << "capacitor C=" << fmt(c->capacitance_ff);
        } else {
            os << "inductor L=" << fmt(std::get<Inductor>(b.kind).inductance_nh);
        }
        os << " from " << b.from << " to " << b.to << '\n';
    }
    for (const auto& m : netlist.meshes) {
        os << "mesh " << m.id << " branches ";
        for (std::size_t i = 0; i < m.members.size(); ++i) {
            if (i) os << ',';
            os << (m.members[i].sign < 0 ? '-' : '+') << m.members[i].branch;
        }
        os << " flux=" << fmt(m.drive.static_phi0);
        if (const auto& n = m.drive.noise) {
            os << " noise sigma=" << fmt(n->sigma_phi0) << " tc=" << fmt(n->correlation_time_ns);
            if (n->band_limit > 0.0) os << " wmax=" << fmt(n->band_limit);
            if (n->mode_count > 0) os << " modes=" << n->mode_count;
        }
        for (const auto& t : m.drive.tones) {
            os << " tone A=" << fmt(t.amplitude_phi0) << " w=" << fmt(t.angular_frequency) << " ph=" << fmt(t.phase);
        }
        os << '\n';
    }
    return os.str();
}

namespace {

// Union-find over node names.
class Components {
public:
    std::size_t id(const std::string& node) {
        auto [it, inserted] = index_.emplace(node, parent_.size());
        if (inserted) parent_.push_back(parent_.size());
        return it->second;
    }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

private:
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::size_t> parent_;
};

void check_mesh_closure(const CircuitNetlist& netlist, const Mesh& mesh, std::vector<Violation>& out) {
    if (mesh.members.empty()) {
        out.push_back({mesh.id, "mesh " + mesh.id + " has no branches"});
        return;
    }
    std::set<std::string> seen;
    std::map<std::string, int> net_flow;
    std::map<std::string, int> degree;
    Components comp;
    for (const auto& member : mesh.members) {
        if (!seen.insert(member.branch).second) {
            out.push_back({mesh.id, "mesh " + mesh.id + " lists branch " + member.branch + " more than once"});
            return;
        }
        auto idx = netlist.branch_index(member.branch);
        if (!idx) {
            out.push_back({mesh.id, "mesh " + mesh.id + " references unknown branch " + member.branch});
            return;
        }
        if (member.sign != 1 && member.sign != -1) {
            out.push_back({mesh.id, "mesh " + mesh.id + " has invalid sign for branch " + member.branch});
            return;
        }
        const Branch& b = netlist.branches[*idx];
        const std::string& tail = member.sign > 0 ? b.from : b.to;
        const std::string& head = member.sign > 0 ? b.to : b.from;
        net_flow[tail] -= 1;
        net_flow[head] += 1;
        degree[tail] += 1;
        degree[head] += 1;
        comp.unite(comp.id(tail), comp.id(head));
    }
    for (const auto& [node, flow] : net_flow) {
        if (flow != 0 || degree[node] != 2) {
            out.push_back({mesh.id, "mesh " + mesh.id + " does not close into a loop at node " + node});
            return;
        }
    }
    std::size_t root = comp.find(comp.id(net_flow.begin()->first));
    for (const auto& [node, flow] : net_flow) {
        if (comp.find(comp.id(node)) != root) {
            out.push_back({mesh.id, "mesh " + mesh.id + " splits into disjoint loops"});
            return;
        }
    }
}

}  // namespace

std::vector<Violation> validate(const CircuitNetlist& netlist) {
    std::vector<Violation> out;
    const std::string circuit = netlist.name.empty() ? std::string("<unnamed>") : netlist.name;

    if (netlist.branches.empty()) out.push_back({circuit, "circuit " + circuit + " has no branches"});
    if (netlist.meshes.empty()) out.push_back({circuit, "circuit " + circuit + " has no meshes"});

    std::set<std::string> ids;
    for (const auto& b : netlist.branches) {
        if (!ids.insert(b.id).second) out.push_back({b.id, "duplicate branch id " + b.id});
        if (b.from == b.to) out.push_back({b.id, "branch " + b.id + " connects node " + b.from + " to itself"});
        bool ok = std::visit(
            [](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, Junction>) return k.ej_ghz > 0.0 && k.capacitance_ff > 0.0;
                else if constexpr (std::is_same_v<K, Capacitor>) return k.capacitance_ff > 0.0;
                else return k.inductance_nh > 0.0;
            },
            b.kind);
        if (!ok) out.push_back({b.id, "branch " + b.id + " has a non-positive parameter"});
    }
    std::set<std::string> mesh_ids;
    for (const auto& m : netlist.meshes) {
        if (!mesh_ids.insert(m.id).second) out.push_back({m.id, "duplicate mesh id " + m.id});
    }

    std::vector<int> membership(netlist.branches.size(), 0);
    bool meshes_well_formed = true;
    for (const auto& m : netlist.meshes) {
        std::size_t before = out.size();
        check_mesh_closure(netlist, m, out);
        if (out.size() != before) meshes_well_formed = false;

        int inductors = 0;
        for (const auto& member : m.members) {
            if (auto idx = netlist.branch_index(member.branch)) {
                membership[*idx] += 1;
                if (netlist.branches[*idx].is_inductor()) ++inductors;
            }
        }
        if (inductors > 1) {
            out.push_back({m.id, "mesh " + m.id + " contains " + std::to_string(inductors) +
                                     " inductors; at most one inductor per mesh is supported"});
        }

        if (const auto& n = m.drive.noise) {
            if (!(n->sigma_phi0 > 0.0) || !(n->correlation_time_ns > 0.0)) {
                out.push_back({m.id, "mesh " + m.id + " noise needs sigma > 0 and tc > 0"});
            } else if (n->effective_band_limit() * n->correlation_time_ns < 10.0) {
                out.push_back({m.id, "mesh " + m.id + " noise band limit times tc is below 10"});
            }
        }
        for (const auto& t : m.drive.tones) {
            if (t.amplitude_phi0 < 0.0 || t.angular_frequency < 0.0) {
                out.push_back({m.id, "mesh " + m.id + " has a tone with negative amplitude or frequency"});
            }
        }
    }

    for (std::size_t i = 0; i < netlist.branches.size(); ++i) {
        if (membership[i] == 0) {
            out.push_back({netlist.branches[i].id, "branch " + netlist.branches[i].id + " belongs to no mesh"});
        }
    }

    // Capacitive sub-network: junctions and capacitors must connect every node.
    if (!netlist.branches.empty()) {
        Components comp;
        std::vector<std::string> nodes;
        std::set<std::string> node_set;
        for (const auto& b : netlist.branches) {
            for (const auto* n : {&b.from, &b.to}) {
                if (node_set.insert(*n).second) nodes.push_back(*n);
                comp.id(*n);
            }
        }
        std::set<std::string> touched;
        for (const auto& b : netlist.branches) {
            if (b.is_inductor()) continue;
            comp.unite(comp.id(b.from), comp.id(b.to));
            touched.insert(b.from);
            touched.insert(b.to);
        }
        for (const auto& n : nodes) {
            if (!touched.count(n)) {
                out.push_back({n, "node " + n + " is not touched by any junction or capacitor"});
            }
        }
        std::set<std::size_t> roots;
        for (const auto& n : nodes) {
            if (touched.count(n)) roots.insert(comp.find(comp.id(n)));
        }
        if (roots.size() > 1) {
            out.push_back({circuit, "capacitive sub-network of circuit " + circuit + " is not connected"});
        }
    }

    // Meshes must be independent constraints.
    if (meshes_well_formed && !netlist.meshes.empty() && !netlist.branches.empty()) {
        Eigen::MatrixXd r = Eigen::MatrixXd::Zero(netlist.meshes.size(), netlist.branches.size());
        for (std::size_t i = 0; i < netlist.meshes.size(); ++i) {
            for (const auto& member : netlist.meshes[i].members) {
                r(i, *netlist.branch_index(member.branch)) = member.sign;
            }
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(r);
        if (static_cast<std::size_t>(lu.rank()) < netlist.meshes.size()) {
            out.push_back({circuit, "meshes of circuit " + circuit + " are not independent"});
        }
        if (netlist.meshes.size() >= netlist.branches.size()) {
            out.push_back({circuit, "circuit " + circuit + " has no dynamical degree of freedom"});
        }
    }
    return out;
}

void require_valid(const CircuitNetlist& netlist) {
    auto violations = validate(netlist);
    if (violations.empty()) return;
    std::string msg = "invalid netlist:";
    for (const auto& v : violations) msg += "\n  " + v.message;
    throw ValidationError(msg);
}

}  // namespace fluxq
