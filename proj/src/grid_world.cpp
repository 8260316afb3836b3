#include "escaperoom/grid_world.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "escaperoom/errors.hpp"
#include "escaperoom/rng.hpp"

namespace escaperoom {

using nlohmann::json;

EnvConfig EnvConfig::from_template(char letter, std::uint64_t seed) {
    EnvConfig cfg;
    cfg.graph = load_template(letter);
    cfg.name = std::string(1, letter);
    cfg.seed = seed;
    return cfg;
}

void EnvConfig::validate() const {
    escaperoom::validate(graph);
    if (max_steps < 1) throw ValidationError("max_steps must be >= 1");
    if (room_size < 3) throw ValidationError("room_size must be >= 3");
}

std::string_view goal_event_kind_name(GoalEvent::Kind kind) {
    switch (kind) {
        case GoalEvent::Kind::key_picked: return "key_picked";
        case GoalEvent::Kind::door_opened: return "door_opened";
        case GoalEvent::Kind::exit_reached: return "exit_reached";
    }
    return "key_picked";
}

std::string GoalEvent::goal_key() const {
    switch (kind) {
        case Kind::key_picked: return "key:" + std::string(color_name(color));
        case Kind::door_opened: return "door:" + std::string(color_name(color));
        case Kind::exit_reached: return "exit";
    }
    return "";
}

bool GoalEvent::matches(const GoalNode& goal) const {
    switch (goal.kind) {
        case NodeKind::key: return kind == Kind::key_picked && color == goal.color;
        case NodeKind::room: return kind == Kind::door_opened && color == goal.color;
        case NodeKind::exit: return kind == Kind::exit_reached;
        case NodeKind::start: return false;
    }
    return false;
}

std::string goal_key_for(const GoalNode& node) {
    switch (node.kind) {
        case NodeKind::key: return "key:" + std::string(color_name(node.color));
        case NodeKind::room: return "door:" + std::string(color_name(node.color));
        case NodeKind::exit: return "exit";
        case NodeKind::start: break;
    }
    throw std::invalid_argument("the start node is not a goal");
}

std::pair<int, int> direction_delta(Direction dir) {
    switch (dir) {
        case Direction::north: return {0, -1};
        case Direction::east: return {1, 0};
        case Direction::south: return {0, 1};
        case Direction::west: return {-1, 0};
    }
    return {0, -1};
}

namespace {

struct Slot {
    int x = 0, y = 0;
    bool operator<(const Slot& o) const { return std::pair(x, y) < std::pair(o.x, o.y); }
    bool operator==(const Slot&) const = default;
};

constexpr std::array<Slot, 4> kSlotDirs = {{{0, -1}, {1, 0}, {0, 1}, {-1, 0}}};

}  // namespace

GridWorld GridWorld::generate(EnvConfig config) {
    config.validate();
    GridWorld world;
    world.config_ = std::move(config);
    world.episode_ = 0;
    world.regenerate(episode_seed(world.config_.seed, 0));
    return world;
}

Observation GridWorld::reset() {
    ++episode_;
    regenerate(episode_seed(config_.seed, static_cast<std::uint64_t>(episode_)));
    return observe();
}

Observation GridWorld::reset(std::uint64_t pinned_episode_seed) {
    regenerate(pinned_episode_seed);
    return observe();
}

void GridWorld::regenerate(std::uint64_t ep_seed) {
    const std::uint64_t layout_base = mix64(ep_seed ^ kLayoutStream * kGolden);
    const std::uint64_t place_base = mix64(ep_seed ^ kPlacementStream * kGolden);
    constexpr int kAttempts = 64;
    bool placed = false;
    for (int attempt = 0; attempt < kAttempts && !placed; ++attempt) {
        const auto salt = static_cast<std::uint64_t>(attempt);
        placed = try_layout(mix64(layout_base + salt)) && place_objects(mix64(place_base + salt));
    }
    if (!placed)
        throw GenerationError("could not realize graph '" + config_.name + "' as a world after " +
                              std::to_string(kAttempts) + " attempts");
    carried_ = Color::none;
    steps_ = 0;
    done_ = false;
    truncated_ = false;
}

bool GridWorld::try_layout(std::uint64_t layout_seed) {
    SplitMix64 rng(layout_seed);
    const DependencyGraph& g = config_.graph;
    const std::string start_id = g.start_node().id;

    // assign every room a slot on a coarse grid, breadth-first over the
    // door-host tree so each room lands next to the room its door opens from
    std::map<std::string, Slot> slot_of{{start_id, {0, 0}}};
    std::map<Slot, std::string> owner{{{0, 0}, start_id}};
    std::deque<std::string> hosts{start_id};
    std::map<std::string, std::string> door_wall;  // room -> host it shares a wall with
    while (!hosts.empty()) {
        const std::string host = hosts.front();
        hosts.pop_front();
        for (const auto& room : g.room_ids()) {
            if (g.door_host.at(room) != host) continue;
            auto dirs = kSlotDirs;
            shuffle(dirs, rng);
            const Slot base = slot_of.at(host);
            bool found = false;
            for (const Slot& d : dirs) {
                Slot cand{base.x + d.x, base.y + d.y};
                if (owner.count(cand)) continue;
                slot_of[room] = cand;
                owner[cand] = room;
                door_wall[room] = host;
                found = true;
                break;
            }
            if (!found) return false;
            hosts.push_back(room);
        }
    }
    // a room whose host chain never reaches the start cannot be laid out
    if (slot_of.size() != g.room_ids().size() + 1) return false;

    int min_x = 0, max_x = 0, min_y = 0, max_y = 0;
    for (const auto& [id, slot] : slot_of) {
        min_x = std::min(min_x, slot.x);
        max_x = std::max(max_x, slot.x);
        min_y = std::min(min_y, slot.y);
        max_y = std::max(max_y, slot.y);
    }
    const int pitch = config_.room_size + 1;
    width_ = (max_x - min_x + 1) * pitch + 1;
    height_ = (max_y - min_y + 1) * pitch + 1;
    grid_.assign(static_cast<std::size_t>(width_) * height_, Cell{});

    rooms_.clear();
    auto interior_origin = [&](const Slot& s) {
        return std::pair((s.x - min_x) * pitch + 1, (s.y - min_y) * pitch + 1);
    };
    for (const auto& [id, slot] : slot_of) {
        auto [ox, oy] = interior_origin(slot);
        rooms_.push_back({id, ox, oy, config_.room_size, config_.room_size});
        for (int y = oy; y < oy + config_.room_size; ++y)
            for (int x = ox; x < ox + config_.room_size; ++x)
                grid_[index(x, y)] = Cell{ObjectId::floor, Color::none, false};
    }
    std::sort(rooms_.begin(), rooms_.end(),
              [](const Room& a, const Room& b) { return a.id < b.id; });

    // carve one locked door per non-start room in the wall shared with its host
    for (const auto& room_id : g.room_ids()) {
        const Slot rs = slot_of.at(room_id);
        const Slot hs = slot_of.at(door_wall.at(room_id));
        auto [rx, ry] = interior_origin(rs);
        const int offset = static_cast<int>(rng.next_below(static_cast<std::uint32_t>(
            config_.room_size)));
        int door_x, door_y;
        if (hs.x < rs.x) {  // host to the west
            door_x = rx - 1;
            door_y = ry + offset;
        } else if (hs.x > rs.x) {
            door_x = rx + config_.room_size;
            door_y = ry + offset;
        } else if (hs.y < rs.y) {  // host above
            door_x = rx + offset;
            door_y = ry - 1;
        } else {
            door_x = rx + offset;
            door_y = ry + config_.room_size;
        }
        grid_[index(door_x, door_y)] = Cell{ObjectId::door, g.node(room_id).color, false};
    }
    return true;
}

bool GridWorld::place_objects(std::uint64_t place_seed) {
    SplitMix64 rng(place_seed);
    const DependencyGraph& g = config_.graph;

    // Objects keep their distance: never on or next to a doorway, the agent
    // spawn, or one another. Doors stay approachable from both sides and no
    // reachable key can ever be boxed in, so any dependency-consistent goal
    // order remains executable with one pair of hands.
    auto neighbors_clear = [&](int x, int y) {
        constexpr int dx[] = {0, 1, 0, -1, 0}, dy[] = {-1, 0, 1, 0, 0};
        for (int k = 0; k < 5; ++k) {
            const int nx = x + dx[k], ny = y + dy[k];
            if (!in_bounds(nx, ny)) continue;
            const Cell& c = grid_[index(nx, ny)];
            if (c.object == ObjectId::door || c.object == ObjectId::key ||
                c.object == ObjectId::exit)
                return false;
            if (nx == agent_x_ && ny == agent_y_) return false;
        }
        return true;
    };
    auto candidate_cells = [&](const Room& r, bool spaced) {
        std::vector<std::pair<int, int>> cells;
        for (int y = r.y; y < r.y + r.h; ++y)
            for (int x = r.x; x < r.x + r.w; ++x) {
                if (!(grid_[index(x, y)] == Cell{ObjectId::floor, Color::none, false}))
                    continue;
                if (x == agent_x_ && y == agent_y_) continue;
                if (spaced && !neighbors_clear(x, y)) continue;
                cells.emplace_back(x, y);
            }
        return cells;
    };

    agent_x_ = agent_y_ = -1;  // no stale spawn influence from a prior episode
    const Room& start = room(g.start_node().id);
    auto spawn = candidate_cells(start, false);
    if (spawn.empty()) return false;
    auto [ax, ay] = spawn[rng.next_below(static_cast<std::uint32_t>(spawn.size()))];
    agent_x_ = ax;
    agent_y_ = ay;
    agent_dir_ = static_cast<Direction>(rng.next_below(4));

    auto drop_into = [&](const Room& r, ObjectId object, Color color) {
        auto cells = candidate_cells(r, true);
        if (cells.empty()) return false;
        auto [x, y] = cells[rng.next_below(static_cast<std::uint32_t>(cells.size()))];
        grid_[index(x, y)] = Cell{object, color, false};
        return true;
    };
    for (const auto& key : g.key_ids())
        if (!drop_into(room(g.key_location.at(key)), ObjectId::key, g.node(key).color))
            return false;
    if (!drop_into(room(g.exit_room()), ObjectId::exit, Color::none)) return false;

    // Spacing alone cannot rule out a corner pocket sealed off by two
    // diagonal objects, so require each room's passable interior to stay one
    // connected region; otherwise a doorway approach could be cut off.
    for (const Room& r : rooms_)
        if (!room_interior_connected(r)) return false;

    // per-episode display permutation of the six colors
    std::array<Color, kColorCount> shuffled = all_colors();
    shuffle(shuffled, rng);
    display_map_[0] = Color::none;
    for (int code = 1; code <= kColorCount; ++code) display_map_[code] = shuffled[code - 1];
    return true;
}

bool GridWorld::room_interior_connected(const Room& r) const {
    auto open_floor = [&](int x, int y) {
        ObjectId o = grid_[index(x, y)].object;
        return o == ObjectId::floor || o == ObjectId::exit;
    };
    int total = 0;
    std::pair<int, int> first{-1, -1};
    for (int y = r.y; y < r.y + r.h; ++y)
        for (int x = r.x; x < r.x + r.w; ++x)
            if (open_floor(x, y)) {
                ++total;
                if (first.first < 0) first = {x, y};
            }
    if (total == 0) return false;
    std::vector<std::pair<int, int>> frontier{first};
    std::vector<char> seen(static_cast<std::size_t>(r.w) * r.h, 0);
    auto mark = [&](int x, int y) -> char& {
        return seen[static_cast<std::size_t>(y - r.y) * r.w + (x - r.x)];
    };
    mark(first.first, first.second) = 1;
    int reached = 0;
    while (!frontier.empty()) {
        auto [x, y] = frontier.back();
        frontier.pop_back();
        ++reached;
        constexpr int dx[] = {0, 1, 0, -1}, dy[] = {-1, 0, 1, 0};
        for (int k = 0; k < 4; ++k) {
            const int nx = x + dx[k], ny = y + dy[k];
            if (!r.contains(nx, ny) || mark(nx, ny) || !open_floor(nx, ny)) continue;
            mark(nx, ny) = 1;
            frontier.push_back({nx, ny});
        }
    }
    return reached == total;
}

const Room& GridWorld::room(const std::string& id) const {
    for (const auto& r : rooms_)
        if (r.id == id) return r;
    throw ValidationError("no room '" + id + "' in this world");
}

const Room& GridWorld::room_at(int x, int y) const {
    for (const auto& r : rooms_)
        if (r.contains(x, y)) return r;
    throw ValidationError("cell (" + std::to_string(x) + "," + std::to_string(y) +
                          ") is not inside a room");
}

Color GridWorld::display_color(Color canonical) const {
    return display_map_[static_cast<std::size_t>(color_code(canonical))];
}

bool GridWorld::passable(int x, int y) const {
    const Cell& c = grid_[index(x, y)];
    if (c.object == ObjectId::floor || c.object == ObjectId::exit) return true;
    if (c.object == ObjectId::door) return c.open;
    return false;
}

StepResult GridWorld::step(Action action) {
    if (episode_over())
        throw ContractViolation("step on a finished episode (reset first)");
    const int code = static_cast<int>(action);
    const int limit = config_.drop_enabled ? kBaseActionCount + 1 : kBaseActionCount;
    if (code < 0 || code >= limit)
        throw std::invalid_argument("action code " + std::to_string(code) +
                                    " out of range [0," + std::to_string(limit - 1) + "]");

    ++steps_;
    StepResult result;
    auto [dx, dy] = direction_delta(agent_dir_);
    const int fx = agent_x_ + dx, fy = agent_y_ + dy;
    const bool front_ok = in_bounds(fx, fy);

    switch (action) {
        case Action::move_forward:
            if (front_ok && passable(fx, fy)) {
                agent_x_ = fx;
                agent_y_ = fy;
            }
            break;
        case Action::turn_left:
            agent_dir_ = static_cast<Direction>((static_cast<int>(agent_dir_) + 3) % 4);
            break;
        case Action::turn_right:
            agent_dir_ = static_cast<Direction>((static_cast<int>(agent_dir_) + 1) % 4);
            break;
        case Action::pick_up:
            if (front_ok && carried_ == Color::none) {
                Cell& front = grid_[index(fx, fy)];
                if (front.object == ObjectId::key) {
                    carried_ = front.color;
                    front = Cell{ObjectId::floor, Color::none, false};
                    result.events.push_back(
                        {GoalEvent::Kind::key_picked, carried_, steps_});
                }
            }
            break;
        case Action::open:
            if (front_ok) {
                Cell& front = grid_[index(fx, fy)];
                if (front.object == ObjectId::door && !front.open &&
                    carried_ == front.color) {
                    front.open = true;  // stays open for the rest of the episode
                    carried_ = Color::none;  // the key stays in the lock
                    result.events.push_back(
                        {GoalEvent::Kind::door_opened, front.color, steps_});
                }
            }
            break;
        case Action::drop:
            if (carried_ != Color::none && front_ok) {
                Cell& front = grid_[index(fx, fy)];
                if (front == Cell{ObjectId::floor, Color::none, false}) {
                    front = Cell{ObjectId::key, carried_, false};
                    carried_ = Color::none;
                }
            }
            break;
    }

    if (grid_[index(agent_x_, agent_y_)].object == ObjectId::exit) {
        result.reward = 1.0;
        result.done = true;
        done_ = true;
        result.events.push_back({GoalEvent::Kind::exit_reached, Color::none, steps_});
    } else if (steps_ >= config_.max_steps) {
        result.truncated = true;
        truncated_ = true;
    }
    result.obs = observe();
    return result;
}

Observation GridWorld::observe() const {
    constexpr int N = Observation::kSize;
    constexpr int agent_row = N - 1, agent_col = N / 2;
    Observation obs;

    // window cell -> world cell, given the agent's facing
    auto world_pos = [&](int row, int col) {
        const int forward = agent_row - row;
        const int lateral = col - agent_col;
        switch (agent_dir_) {
            case Direction::north: return std::pair(agent_x_ + lateral, agent_y_ - forward);
            case Direction::east: return std::pair(agent_x_ + forward, agent_y_ + lateral);
            case Direction::south: return std::pair(agent_x_ - lateral, agent_y_ + forward);
            case Direction::west: return std::pair(agent_x_ - forward, agent_y_ - lateral);
        }
        return std::pair(agent_x_, agent_y_);
    };

    std::array<std::array<bool, N>, N> transparent{};
    std::array<std::array<bool, N>, N> visible{};
    for (int row = 0; row < N; ++row)
        for (int col = 0; col < N; ++col) {
            auto [x, y] = world_pos(row, col);
            if (!in_bounds(x, y)) continue;
            const Cell& c = grid_[index(x, y)];
            transparent[row][col] = c.object == ObjectId::floor ||
                                    c.object == ObjectId::key ||
                                    c.object == ObjectId::exit ||
                                    (c.object == ObjectId::door && c.open);
        }

    // flood outward from the agent; sight enters a cell only from a
    // strictly closer transparent neighbor, so walls and closed doors
    // block everything behind them
    visible[agent_row][agent_col] = true;
    auto dist = [&](int row, int col) {
        return std::abs(row - agent_row) + std::abs(col - agent_col);
    };
    bool changed = true;
    while (changed) {
        changed = false;
        for (int row = 0; row < N; ++row)
            for (int col = 0; col < N; ++col) {
                if (visible[row][col]) continue;
                constexpr int dr[] = {-1, 1, 0, 0};
                constexpr int dc[] = {0, 0, -1, 1};
                for (int k = 0; k < 4; ++k) {
                    const int nr = row + dr[k], nc = col + dc[k];
                    if (nr < 0 || nr >= N || nc < 0 || nc >= N) continue;
                    if (visible[nr][nc] && transparent[nr][nc] &&
                        dist(nr, nc) < dist(row, col)) {
                        visible[row][col] = true;
                        changed = true;
                        break;
                    }
                }
            }
    }

    for (int row = 0; row < N; ++row)
        for (int col = 0; col < N; ++col) {
            if (!visible[row][col]) continue;
            auto [x, y] = world_pos(row, col);
            if (!in_bounds(x, y)) continue;
            const Cell& c = grid_[index(x, y)];
            obs.data[row][col][0] = static_cast<int>(c.object);
            obs.data[row][col][1] = color_code(display_color(c.color));
            obs.data[row][col][2] = c.open ? 1 : 0;
        }
    return obs;
}

std::string GridWorld::to_world_json() const {
    json doc;
    doc["format"] = "escaperoom-world/1";
    json cfg;
    cfg["name"] = config_.name;
    cfg["graph"] = json::parse(serialize_spec(config_.graph));
    cfg["seed"] = config_.seed;
    cfg["max_steps"] = config_.max_steps;
    cfg["drop_enabled"] = config_.drop_enabled;
    cfg["room_size"] = config_.room_size;
    doc["config"] = cfg;
    doc["episode"] = episode_;
    doc["width"] = width_;
    doc["height"] = height_;
    json cells = json::array();
    for (const auto& c : grid_)
        cells.push_back(json::array(
            {static_cast<int>(c.object), color_code(c.color), c.open ? 1 : 0}));
    doc["cells"] = cells;
    json rooms = json::array();
    for (const auto& r : rooms_)
        rooms.push_back({{"id", r.id}, {"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}});
    doc["rooms"] = rooms;
    doc["agent"] = {{"x", agent_x_}, {"y", agent_y_}, {"dir", static_cast<int>(agent_dir_)}};
    doc["carried"] = color_code(carried_);
    doc["steps"] = steps_;
    doc["done"] = done_;
    doc["truncated"] = truncated_;
    json cmap = json::array();
    for (int code = 1; code <= kColorCount; ++code)
        cmap.push_back(color_code(display_map_[code]));
    doc["color_map"] = cmap;
    return doc.dump(2) + "\n";
}

GridWorld GridWorld::from_world_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("world file: ") + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != "escaperoom-world/1")
            throw ValidationError("unsupported world file format");
        GridWorld w;
        const json& cfg = doc.at("config");
        w.config_.name = cfg.at("name").get<std::string>();
        w.config_.graph = parse_spec(cfg.at("graph").dump());
        w.config_.seed = cfg.at("seed").get<std::uint64_t>();
        w.config_.max_steps = cfg.at("max_steps").get<int>();
        w.config_.drop_enabled = cfg.at("drop_enabled").get<bool>();
        w.config_.room_size = cfg.at("room_size").get<int>();
        w.episode_ = doc.at("episode").get<int>();
        w.width_ = doc.at("width").get<int>();
        w.height_ = doc.at("height").get<int>();
        const json& cells = doc.at("cells");
        if (static_cast<int>(cells.size()) != w.width_ * w.height_)
            throw ValidationError("world file cell count does not match dimensions");
        for (const auto& jc : cells) {
            Cell c;
            c.object = static_cast<ObjectId>(jc.at(0).get<int>());
            auto color = color_from_code(jc.at(1).get<int>());
            if (!color) throw ValidationError("bad color code in world file");
            c.color = *color;
            c.open = jc.at(2).get<int>() != 0;
            w.grid_.push_back(c);
        }
        for (const auto& jr : doc.at("rooms"))
            w.rooms_.push_back({jr.at("id").get<std::string>(), jr.at("x").get<int>(),
                                jr.at("y").get<int>(), jr.at("w").get<int>(),
                                jr.at("h").get<int>()});
        w.agent_x_ = doc.at("agent").at("x").get<int>();
        w.agent_y_ = doc.at("agent").at("y").get<int>();
        w.agent_dir_ = static_cast<Direction>(doc.at("agent").at("dir").get<int>());
        auto carried = color_from_code(doc.at("carried").get<int>());
        if (!carried) throw ValidationError("bad carried color code");
        w.carried_ = *carried;
        w.steps_ = doc.at("steps").get<int>();
        w.done_ = doc.at("done").get<bool>();
        w.truncated_ = doc.at("truncated").get<bool>();
        const json& cmap = doc.at("color_map");
        w.display_map_[0] = Color::none;
        for (int code = 1; code <= kColorCount; ++code) {
            auto c = color_from_code(cmap.at(code - 1).get<int>());
            if (!c) throw ValidationError("bad color code in color_map");
            w.display_map_[code] = *c;
        }
        return w;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("world file: ") + e.what());
    }
}

}  // namespace escaperoom
