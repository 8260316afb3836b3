#include "escaperoom/goal_graph.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "escaperoom/errors.hpp"

namespace escaperoom {

using nlohmann::json;

std::string_view node_kind_name(NodeKind k) {
    switch (k) {
        case NodeKind::start: return "start";
        case NodeKind::key: return "key";
        case NodeKind::room: return "room";
        case NodeKind::exit: return "exit";
    }
    return "start";
}

namespace {

NodeKind kind_from_name(const std::string& name) {
    if (name == "start") return NodeKind::start;
    if (name == "key") return NodeKind::key;
    if (name == "room") return NodeKind::room;
    if (name == "exit") return NodeKind::exit;
    throw ValidationError("unknown node kind '" + name + "'");
}

// Sort order for canonical serialization: kind, then color code, then id.
int kind_rank(NodeKind k) {
    switch (k) {
        case NodeKind::start: return 0;
        case NodeKind::key: return 1;
        case NodeKind::room: return 2;
        case NodeKind::exit: return 3;
    }
    return 0;
}

bool node_less(const GoalNode& a, const GoalNode& b) {
    if (kind_rank(a.kind) != kind_rank(b.kind)) return kind_rank(a.kind) < kind_rank(b.kind);
    if (a.color != b.color) return color_code(a.color) < color_code(b.color);
    return a.id < b.id;
}

}  // namespace

bool DependencyGraph::operator==(const DependencyGraph& other) const {
    auto sorted_nodes = [](const DependencyGraph& g) {
        std::vector<GoalNode> ns = g.nodes;
        std::sort(ns.begin(), ns.end(),
                  [](const GoalNode& a, const GoalNode& b) { return a.id < b.id; });
        return ns;
    };
    auto sorted_edges = [](const DependencyGraph& g) {
        auto es = g.edges;
        std::sort(es.begin(), es.end());
        return es;
    };
    return sorted_nodes(*this) == sorted_nodes(other) &&
           sorted_edges(*this) == sorted_edges(other) && key_location == other.key_location &&
           door_host == other.door_host;
}

const GoalNode* DependencyGraph::find(const std::string& id) const {
    for (const auto& n : nodes)
        if (n.id == id) return &n;
    return nullptr;
}

const GoalNode& DependencyGraph::node(const std::string& id) const {
    if (const GoalNode* n = find(id)) return *n;
    throw ValidationError("graph has no node '" + id + "'");
}

const GoalNode& DependencyGraph::start_node() const {
    for (const auto& n : nodes)
        if (n.kind == NodeKind::start) return n;
    throw ValidationError("graph has no start node");
}

const GoalNode& DependencyGraph::exit_node() const {
    for (const auto& n : nodes)
        if (n.kind == NodeKind::exit) return n;
    throw ValidationError("graph has no exit node");
}

std::vector<std::string> DependencyGraph::successors(const std::string& id) const {
    std::vector<std::string> out;
    for (const auto& [from, to] : edges)
        if (from == id) out.push_back(to);
    return out;
}

std::vector<std::string> DependencyGraph::predecessors(const std::string& id) const {
    std::vector<std::string> in;
    for (const auto& [from, to] : edges)
        if (to == id) in.push_back(from);
    return in;
}

std::vector<std::string> DependencyGraph::room_ids() const {
    std::vector<const GoalNode*> rooms;
    for (const auto& n : nodes)
        if (n.kind == NodeKind::room) rooms.push_back(&n);
    std::sort(rooms.begin(), rooms.end(),
              [](const GoalNode* a, const GoalNode* b) { return node_less(*a, *b); });
    std::vector<std::string> ids;
    for (const auto* r : rooms) ids.push_back(r->id);
    return ids;
}

std::vector<std::string> DependencyGraph::key_ids() const {
    std::vector<const GoalNode*> keys;
    for (const auto& n : nodes)
        if (n.kind == NodeKind::key) keys.push_back(&n);
    std::sort(keys.begin(), keys.end(),
              [](const GoalNode* a, const GoalNode* b) { return node_less(*a, *b); });
    std::vector<std::string> ids;
    for (const auto* k : keys) ids.push_back(k->id);
    return ids;
}

std::string DependencyGraph::exit_room() const {
    auto preds = predecessors(exit_node().id);
    if (preds.size() != 1)
        throw ValidationError("exit must have exactly one predecessor");
    return preds.front();
}

std::string DependencyGraph::key_for_room(const std::string& room_id) const {
    const GoalNode& room = node(room_id);
    for (const auto& n : nodes)
        if (n.kind == NodeKind::key && n.color == room.color) return n.id;
    throw ValidationError("no key matches room '" + room_id + "'");
}

void validate(const DependencyGraph& g) {
    int starts = 0, exits = 0;
    std::set<std::string> ids;
    for (const auto& n : g.nodes) {
        if (n.id.empty()) throw ValidationError("node with empty id");
        if (!ids.insert(n.id).second) throw ValidationError("duplicate node id '" + n.id + "'");
        switch (n.kind) {
            case NodeKind::start:
                ++starts;
                if (n.color != Color::none)
                    throw ValidationError("start node must be colorless");
                break;
            case NodeKind::exit:
                ++exits;
                if (n.color != Color::none) throw ValidationError("exit node must be colorless");
                break;
            case NodeKind::key:
            case NodeKind::room:
                if (n.color == Color::none)
                    throw ValidationError("node '" + n.id + "' needs a color");
                break;
        }
    }
    if (starts != 1) throw ValidationError("graph must have exactly one start node");
    if (exits != 1) throw ValidationError("graph must have exactly one exit node");

    // keys and rooms pair one-to-one by color
    std::map<Color, int> key_count, room_count;
    for (const auto& n : g.nodes) {
        if (n.kind == NodeKind::key) ++key_count[n.color];
        if (n.kind == NodeKind::room) ++room_count[n.color];
    }
    if (key_count != room_count)
        throw ValidationError("keys and rooms must pair one-to-one by color");
    for (const auto& [color, count] : key_count)
        if (count != 1)
            throw ValidationError(std::string("color ") + std::string(color_name(color)) +
                                  " appears on more than one key");

    const std::string start_id = g.start_node().id;
    const std::string exit_id = g.exit_node().id;

    for (const auto& [from, to] : g.edges) {
        const GoalNode& a = g.node(from);
        const GoalNode& b = g.node(to);
        if (a.kind == NodeKind::exit) throw ValidationError("exit node has an outgoing edge");
        if (b.kind == NodeKind::start) throw ValidationError("start node has an incoming edge");
        if (a.kind == NodeKind::key && b.kind == NodeKind::room && a.color != b.color)
            throw ValidationError("key '" + from + "' unlocks a differently colored room '" +
                                  to + "'");
        if (a.kind == NodeKind::key && b.kind != NodeKind::room)
            throw ValidationError("key '" + from + "' must point at its room");
    }

    // every room is entered through its key; the exit through one room-or-start
    for (const auto& n : g.nodes) {
        if (n.kind == NodeKind::room) {
            auto preds = g.predecessors(n.id);
            if (preds.size() != 1 || g.node(preds.front()).kind != NodeKind::key)
                throw ValidationError("room '" + n.id + "' must be entered via its key only");
        }
    }
    {
        auto preds = g.predecessors(exit_id);
        if (preds.size() != 1)
            throw ValidationError("exit must have exactly one incoming edge");
        NodeKind k = g.node(preds.front()).kind;
        if (k != NodeKind::room && k != NodeKind::start)
            throw ValidationError("exit must hang off a room or the start");
    }

    // acyclicity via Kahn's algorithm
    std::map<std::string, int> indegree;
    for (const auto& n : g.nodes) indegree[n.id] = 0;
    for (const auto& [from, to] : g.edges) ++indegree[to];
    std::deque<std::string> ready;
    for (const auto& [id, d] : indegree)
        if (d == 0) ready.push_back(id);
    std::size_t visited = 0;
    while (!ready.empty()) {
        std::string id = ready.front();
        ready.pop_front();
        ++visited;
        for (const auto& next : g.successors(id))
            if (--indegree[next] == 0) ready.push_back(next);
    }
    if (visited != g.nodes.size()) throw ValidationError("dependency graph contains a cycle");

    // placement maps: total, and targeting rooms or the start
    auto check_target = [&](const std::string& owner, const std::string& target) {
        const GoalNode* t = g.find(target);
        if (!t || (t->kind != NodeKind::room && t->kind != NodeKind::start))
            throw ValidationError("placement of '" + owner + "' references '" + target +
                                  "', which is not a room or the start");
    };
    for (const auto& key : g.key_ids()) {
        auto it = g.key_location.find(key);
        if (it == g.key_location.end())
            throw ValidationError("key_location missing entry for '" + key + "'");
        check_target(key, it->second);
    }
    for (const auto& room : g.room_ids()) {
        auto it = g.door_host.find(room);
        if (it == g.door_host.end())
            throw ValidationError("door_host missing entry for '" + room + "'");
        check_target(room, it->second);
    }
    if (g.key_location.size() != g.key_ids().size())
        throw ValidationError("key_location has entries for unknown keys");
    if (g.door_host.size() != g.room_ids().size())
        throw ValidationError("door_host has entries for unknown rooms");

    // the exit is realizable: opening rooms whenever key and door are in
    // reach must eventually expose the exit room
    {
        std::set<std::string> open{start_id};
        bool progress = true;
        while (progress) {
            progress = false;
            for (const auto& room : g.room_ids()) {
                if (open.count(room)) continue;
                const std::string key = g.key_for_room(room);
                if (open.count(g.key_location.at(key)) && open.count(g.door_host.at(room))) {
                    open.insert(room);
                    progress = true;
                }
            }
        }
        if (!open.count(g.exit_room()))
            throw ValidationError("exit is unreachable under the given placements");
    }

    // graph-edge reachability start -> exit (the topological witness)
    {
        std::set<std::string> seen{start_id};
        std::deque<std::string> frontier{start_id};
        while (!frontier.empty()) {
            std::string id = frontier.front();
            frontier.pop_front();
            for (const auto& next : g.successors(id))
                if (seen.insert(next).second) frontier.push_back(next);
        }
        if (!seen.count(exit_id))
            throw ValidationError("exit is unreachable from start in the dependency graph");
    }
}

namespace {

struct TemplateSpec {
    // key/room colors in chain-or-branch order plus the edge list, written
    // with short color tags; expanded into full node ids below.
    std::vector<Color> colors;
    std::vector<std::pair<std::string, std::string>> edges;
};

std::string key_id(Color c) { return "key_" + std::string(color_name(c)); }
std::string room_id(Color c) { return "room_" + std::string(color_name(c)); }

DependencyGraph build_template(const std::vector<Color>& colors,
                               const std::vector<std::pair<std::string, std::string>>& edges) {
    DependencyGraph g;
    g.nodes.push_back({"start", NodeKind::start, Color::none});
    for (Color c : colors) {
        g.nodes.push_back({key_id(c), NodeKind::key, c});
        g.nodes.push_back({room_id(c), NodeKind::room, c});
    }
    g.nodes.push_back({"exit", NodeKind::exit, Color::none});
    g.edges = edges;

    // Placement convention: a key with a unique room-or-start predecessor
    // sits in that room; a key reachable from several rooms sits in the
    // start room. Each door is hosted where its key sits.
    for (Color c : colors) {
        auto preds = g.predecessors(key_id(c));
        g.key_location[key_id(c)] = preds.size() == 1 ? preds.front() : "start";
        g.door_host[room_id(c)] = g.key_location[key_id(c)];
    }
    validate(g);
    return g;
}

}  // namespace

DependencyGraph load_template(char letter) {
    const Color R = Color::red, B = Color::blue, P = Color::purple;
    auto k = key_id, r = room_id;
    switch (letter) {
        case 'a':
            return build_template({R}, {{"start", k(R)}, {k(R), r(R)}, {r(R), "exit"}});
        case 'b':
            return build_template({B, P}, {{"start", k(B)},
                                           {k(B), r(B)},
                                           {"start", k(P)},
                                           {k(P), r(P)},
                                           {r(B), "exit"},
                                           {r(P), k(B)}});
        case 'c':
            return build_template({B, P}, {{"start", k(B)},
                                           {k(B), r(B)},
                                           {r(B), k(P)},
                                           {k(P), r(P)},
                                           {r(P), "exit"}});
        case 'd':
            return build_template({R, B, P}, {{"start", k(R)},
                                              {k(R), r(R)},
                                              {"start", k(B)},
                                              {k(B), r(B)},
                                              {r(R), k(P)},
                                              {k(P), r(P)},
                                              {r(B), "exit"},
                                              {r(R), k(B)},
                                              {r(P), k(B)}});
        case 'e':
            // Alternative edges only run forward in the red < blue < purple
            // branch order; a blue->red alternative would close a cycle with
            // room_red -> key_blue.
            return build_template({R, B, P}, {{"start", k(R)},
                                              {k(R), r(R)},
                                              {"start", k(B)},
                                              {k(B), r(B)},
                                              {"start", k(P)},
                                              {k(P), r(P)},
                                              {r(P), "exit"},
                                              {r(R), k(B)},
                                              {r(R), k(P)},
                                              {r(B), k(P)}});
        case 'f':
            return build_template({R, B, P}, {{"start", k(R)},
                                              {k(R), r(R)},
                                              {"start", k(B)},
                                              {k(B), r(B)},
                                              {r(R), k(P)},
                                              {k(P), r(P)},
                                              {r(P), "exit"},
                                              {r(B), k(R)}});
        case 'g':
            return build_template({B, R, P}, {{"start", k(B)},
                                              {k(B), r(B)},
                                              {r(B), k(R)},
                                              {k(R), r(R)},
                                              {r(R), k(P)},
                                              {k(P), r(P)},
                                              {r(P), "exit"}});
        default:
            throw std::invalid_argument(std::string("unknown template '") + letter +
                                        "' (expected a..g)");
    }
}

namespace {

[[noreturn]] void rethrow_parse_error(const std::string& text, const json::parse_error& e) {
    // nlohmann reports a byte offset; convert to line/column
    std::size_t pos = e.byte > 0 ? e.byte - 1 : 0;
    pos = std::min(pos, text.size());
    int line = 1, col = 1;
    for (std::size_t i = 0; i < pos; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    throw ParseError(std::string("graph spec: ") + e.what(), line, col);
}

}  // namespace

DependencyGraph parse_spec(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        rethrow_parse_error(text, e);
    }
    if (!doc.is_object()) throw ValidationError("graph spec must be a JSON object");
    static const std::set<std::string> known = {"nodes", "edges", "key_location", "door_host"};
    for (const auto& [field, _] : doc.items())
        if (!known.count(field))
            throw ValidationError("graph spec has unknown field '" + field + "'");
    for (const auto& field : known)
        if (!doc.contains(field))
            throw ValidationError("graph spec is missing field '" + field + "'");

    DependencyGraph g;
    try {
        for (const auto& jn : doc.at("nodes")) {
            GoalNode n;
            n.id = jn.at("id").get<std::string>();
            n.kind = kind_from_name(jn.at("kind").get<std::string>());
            const auto& jc = jn.at("color");
            if (jc.is_null()) {
                n.color = Color::none;
            } else {
                auto c = color_from_name(jc.get<std::string>());
                if (!c || *c == Color::none)
                    throw ValidationError("unknown color '" + jc.get<std::string>() + "'");
                n.color = *c;
            }
            static const std::set<std::string> node_fields = {"id", "kind", "color"};
            for (const auto& [field, _] : jn.items())
                if (!node_fields.count(field))
                    throw ValidationError("node has unknown field '" + field + "'");
            g.nodes.push_back(std::move(n));
        }
        for (const auto& je : doc.at("edges")) {
            if (!je.is_array() || je.size() != 2)
                throw ValidationError("each edge must be a [from, to] pair");
            g.edges.emplace_back(je.at(0).get<std::string>(), je.at(1).get<std::string>());
        }
        for (const auto& [key, value] : doc.at("key_location").items())
            g.key_location[key] = value.get<std::string>();
        for (const auto& [room, value] : doc.at("door_host").items())
            g.door_host[room] = value.get<std::string>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("graph spec: ") + e.what());
    }
    validate(g);
    return g;
}

std::string serialize_spec(const DependencyGraph& graph) {
    DependencyGraph g = graph;
    std::sort(g.nodes.begin(), g.nodes.end(), node_less);
    std::sort(g.edges.begin(), g.edges.end());

    json doc;
    doc["nodes"] = json::array();
    for (const auto& n : g.nodes) {
        json jn;
        jn["id"] = n.id;
        jn["kind"] = std::string(node_kind_name(n.kind));
        if (n.color == Color::none)
            jn["color"] = nullptr;
        else
            jn["color"] = std::string(color_name(n.color));
        doc["nodes"].push_back(jn);
    }
    doc["edges"] = json::array();
    for (const auto& [from, to] : g.edges) doc["edges"].push_back(json::array({from, to}));
    doc["key_location"] = json::object();
    for (const auto& [key, loc] : g.key_location) doc["key_location"][key] = loc;
    doc["door_host"] = json::object();
    for (const auto& [room, host] : g.door_host) doc["door_host"][room] = host;
    return doc.dump(2) + "\n";
}

int exit_depth(const DependencyGraph& graph) {
    // BFS over dependency edges; depth = intermediate nodes on the shortest path
    const std::string start = graph.start_node().id;
    const std::string exit_id = graph.exit_node().id;
    std::map<std::string, int> dist{{start, 0}};
    std::deque<std::string> frontier{start};
    while (!frontier.empty()) {
        std::string id = frontier.front();
        frontier.pop_front();
        if (id == exit_id) return dist[id] - 1;
        for (const auto& next : graph.successors(id)) {
            if (!dist.count(next)) {
                dist[next] = dist[id] + 1;
                frontier.push_back(next);
            }
        }
    }
    throw ValidationError("exit unreachable from start");
}

int graph_width(const DependencyGraph& graph) {
    return static_cast<int>(graph.successors(graph.start_node().id).size());
}

GoalEncoding encode_goal(NodeKind kind, Color color) {
    GoalEncoding enc{};
    switch (kind) {
        case NodeKind::key:
            enc[kEncodingColorSlots + 0] = 1;
            break;
        case NodeKind::room:
            enc[kEncodingColorSlots + 1] = 1;
            break;
        case NodeKind::exit:
            enc[kEncodingColorSlots + 2] = 1;
            break;
        case NodeKind::start:
            throw std::invalid_argument("the start node is not a goal");
    }
    if (kind == NodeKind::exit) {
        if (color != Color::none)
            throw std::invalid_argument("the exit goal is colorless");
    } else {
        if (color == Color::none) throw std::invalid_argument("key/door goals need a color");
        enc[color_code(color) - 1] = 1;
    }
    return enc;
}

GoalEncoding encode_goal(const GoalNode& node) { return encode_goal(node.kind, node.color); }

}  // namespace escaperoom
