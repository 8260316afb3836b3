#pragma once

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "escaperoom/color.hpp"

namespace escaperoom {

enum class NodeKind { start, key, room, exit };

std::string_view node_kind_name(NodeKind k);

struct GoalNode {
    std::string id;
    NodeKind kind = NodeKind::start;
    Color color = Color::none;  // none iff kind is start or exit

    bool operator==(const GoalNode&) const = default;
};

/// Directed acyclic goal graph over start/key/room/exit nodes, plus the
/// physical placement annotations that make it realizable as a gridworld:
/// key_location says which room's floor holds each key, door_host says from
/// which room each door is entered. By convention a room's door lives in the
/// room that holds its key, and a key contested by several dependency edges
/// sits in the start room.
struct DependencyGraph {
    std::vector<GoalNode> nodes;
    std::vector<std::pair<std::string, std::string>> edges;
    std::map<std::string, std::string> key_location;  // key id -> room-or-start id
    std::map<std::string, std::string> door_host;     // room id -> room-or-start id

    const GoalNode* find(const std::string& id) const;
    const GoalNode& node(const std::string& id) const;  // throws ValidationError if absent
    const GoalNode& start_node() const;
    const GoalNode& exit_node() const;
    std::vector<std::string> successors(const std::string& id) const;
    std::vector<std::string> predecessors(const std::string& id) const;

    /// Room ids in canonical (color-code) order.
    std::vector<std::string> room_ids() const;
    std::vector<std::string> key_ids() const;

    /// The room whose opening exposes the exit (the exit's predecessor;
    /// may be the start node for a keyless graph).
    std::string exit_room() const;

    /// Key node of the same color as the given room.
    std::string key_for_room(const std::string& room_id) const;

    /// Semantic equality: same node set, edge multiset and placements,
    /// regardless of declaration order.
    bool operator==(const DependencyGraph& other) const;
};

/// Throws ValidationError unless all structural invariants hold: unique
/// start/exit, colored keys paired one-to-one with rooms, acyclicity,
/// total and well-targeted placement maps, and an exit realizable from the
/// start under the placements.
void validate(const DependencyGraph& graph);

/// Canonical graphs (a)..(g): every dependency shape with two to four rooms.
DependencyGraph load_template(char letter);

inline constexpr std::array<char, 7> kTemplateLetters = {'a', 'b', 'c', 'd', 'e', 'f', 'g'};

/// Parses a .goalgraph.json document. Unknown fields are rejected. Throws
/// ParseError for malformed text (with line/column) and ValidationError for
/// structurally invalid graphs.
DependencyGraph parse_spec(const std::string& text);

/// Canonical serialization: nodes sorted by (kind, color), edges sorted,
/// byte-deterministic. parse_spec(serialize_spec(g)) reproduces g.
std::string serialize_spec(const DependencyGraph& graph);

/// Number of intermediate goals (keys + rooms) on the shortest dependency
/// path from start to exit.
int exit_depth(const DependencyGraph& graph);

/// Out-degree of the start node: how many key branches leave the start room.
int graph_width(const DependencyGraph& graph);

/// One-hot (color, object) goal code: 6 color slots then key/door/exit.
using GoalEncoding = std::array<int, 9>;

inline constexpr int kEncodingColorSlots = 6;
inline constexpr int kEncodingObjectSlots = 3;  // key, door, exit

/// Encodes a key, room or exit node. The exit keeps all color bits zero.
/// Throws std::invalid_argument for the start node.
GoalEncoding encode_goal(const GoalNode& node);

/// Encoding for a (kind, color) pair under a display-color mapping; used
/// when the observed colors are a per-episode permutation of graph colors.
GoalEncoding encode_goal(NodeKind kind, Color color);

}  // namespace escaperoom
