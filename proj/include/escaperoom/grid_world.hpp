#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "escaperoom/color.hpp"
#include "escaperoom/goal_graph.hpp"

namespace escaperoom {

/// Primitive actions. Codes are stable for the wire protocol; drop is only
/// legal when the episode was configured with drop_enabled.
enum class Action : int {
    move_forward = 0,
    turn_left = 1,
    turn_right = 2,
    pick_up = 3,
    open = 4,
    drop = 5,
};

inline constexpr int kBaseActionCount = 5;

enum class Direction : int { north = 0, east = 1, south = 2, west = 3 };

/// Observation channel codes.
enum class ObjectId : int { unseen = 0, floor = 1, wall = 2, door = 3, key = 4, exit = 5 };

struct Cell {
    ObjectId object = ObjectId::wall;
    Color color = Color::none;  // graph color for doors and keys
    bool open = false;          // doors only

    bool operator==(const Cell&) const = default;
};

struct EnvConfig {
    DependencyGraph graph;
    std::string name = "custom";  // template letter when built from one
    std::uint64_t seed = 0;
    int max_steps = 1000;
    bool drop_enabled = false;
    int room_size = 6;  // interior cells per side

    static EnvConfig from_template(char letter, std::uint64_t seed);
    void validate() const;  // throws ValidationError
    bool operator==(const EnvConfig&) const = default;
};

/// Something the agent accomplished this step. Colors are the graph's
/// canonical colors (not the per-episode display permutation), so events
/// aggregate across episodes of the same template.
struct GoalEvent {
    enum class Kind { key_picked, door_opened, exit_reached };

    Kind kind = Kind::key_picked;
    Color color = Color::none;  // none for exit_reached
    int timestep = 0;

    /// "key:blue", "door:blue", "exit" -- the aggregation key.
    std::string goal_key() const;
    bool matches(const GoalNode& goal) const;
    bool operator==(const GoalEvent&) const = default;
};

std::string_view goal_event_kind_name(GoalEvent::Kind kind);

/// Stable goal id for a key/room/exit node: "key:blue", "door:blue", "exit".
std::string goal_key_for(const GoalNode& node);

/// 7x7 egocentric view in front of the agent, three channels per cell:
/// object id, color id, door-open flag. The agent stands at the bottom
/// center, cell [6][3]. Occluded or out-of-world cells read unseen/0/0.
struct Observation {
    static constexpr int kSize = 7;
    std::array<std::array<std::array<int, 3>, kSize>, kSize> data{};  // [row][col][ch]

    bool operator==(const Observation&) const = default;
};

struct StepResult {
    Observation obs;
    double reward = 0.0;
    bool done = false;
    bool truncated = false;
    std::vector<GoalEvent> events;
};

/// Interior rectangle of a generated room, in cell coordinates.
struct Room {
    std::string id;
    int x = 0, y = 0, w = 0, h = 0;

    bool contains(int cx, int cy) const {
        return cx >= x && cx < x + w && cy >= y && cy < y + h;
    }
    bool operator==(const Room&) const = default;
};

/// Procedurally generated EscapeRoom world. Copyable by value: a copy is a
/// deep, immutable-by-ownership snapshot of the episode state. One instance
/// has one logical owner; run parallel episodes on separate instances.
class GridWorld {
public:
    /// Builds the world for episode 0 of the config's seed stream.
    static GridWorld generate(EnvConfig config);

    /// Advances to the next episode of the seed stream and regenerates.
    Observation reset();

    /// Regenerates the current episode from an explicit episode seed
    /// (pinning); does not advance the stream.
    Observation reset(std::uint64_t pinned_episode_seed);

    /// Applies one action. Throws ContractViolation once the episode is
    /// over and std::invalid_argument for drop without drop_enabled.
    StepResult step(Action action);

    Observation observe() const;

    int width() const { return width_; }
    int height() const { return height_; }
    const Cell& cell(int x, int y) const { return grid_[index(x, y)]; }
    int agent_x() const { return agent_x_; }
    int agent_y() const { return agent_y_; }
    Direction agent_dir() const { return agent_dir_; }
    Color carried() const { return carried_; }
    int steps() const { return steps_; }
    bool done() const { return done_; }
    bool truncated() const { return truncated_; }
    bool episode_over() const { return done_ || truncated_; }
    int episode_index() const { return episode_; }
    const EnvConfig& config() const { return config_; }
    const std::vector<Room>& rooms() const { return rooms_; }
    const Room& room(const std::string& id) const;
    const Room& room_at(int x, int y) const;

    /// Display color shown in observations for a canonical graph color
    /// (per-episode random permutation).
    Color display_color(Color canonical) const;

    /// Deep snapshot (plain copy; spelled out for call-site clarity).
    GridWorld snapshot() const { return *this; }

    /// World-file serialization; reparsing reproduces an equal world.
    std::string to_world_json() const;
    static GridWorld from_world_json(const std::string& text);

    bool operator==(const GridWorld&) const = default;

private:
    GridWorld() = default;

    int index(int x, int y) const { return y * width_ + x; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width_ && y >= 0 && y < height_; }
    void regenerate(std::uint64_t ep_seed);
    bool try_layout(std::uint64_t layout_seed);
    bool place_objects(std::uint64_t place_seed);
    bool room_interior_connected(const Room& r) const;
    bool passable(int x, int y) const;

    EnvConfig config_;
    int episode_ = 0;
    int width_ = 0, height_ = 0;
    std::vector<Cell> grid_;
    std::vector<Room> rooms_;
    int agent_x_ = 0, agent_y_ = 0;
    Direction agent_dir_ = Direction::north;
    Color carried_ = Color::none;
    int steps_ = 0;
    bool done_ = false;
    bool truncated_ = false;
    std::array<Color, kColorCount + 1> display_map_{};  // canonical code -> display color
};

/// Unit offsets for a facing direction.
std::pair<int, int> direction_delta(Direction dir);

}  // namespace escaperoom
