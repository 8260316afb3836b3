#include "escaperoom/agents.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

#include "escaperoom/errors.hpp"
#include "escaperoom/rng.hpp"

namespace escaperoom {

namespace {

int node_index(const DependencyGraph& g, const std::string& id) {
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        if (g.nodes[i].id == id) return static_cast<int>(i);
    return -1;
}

class RandomPolicy final : public Policy {
public:
    explicit RandomPolicy(std::uint64_t seed) : rng_(stream(seed, kPolicyStream)) {}

    std::optional<Action> act(const PolicyContext& ctx) override {
        return static_cast<Action>(
            rng_.next_below(static_cast<std::uint32_t>(ctx.action_count)));
    }

private:
    SplitMix64 rng_;
};

// ---------------------------------------------------------------------------
// Oracle controller: breadth-first navigation on the full world state.

using CellPos = std::pair<int, int>;
constexpr CellPos kNowhere{-1, -1};

bool walkable(const GridWorld& w, int x, int y) {
    const Cell& c = w.cell(x, y);
    if (c.object == ObjectId::floor || c.object == ObjectId::exit) return true;
    if (c.object == ObjectId::door) return c.open;
    return false;
}

CellPos find_cell(const GridWorld& w, ObjectId object, Color color) {
    for (int y = 0; y < w.height(); ++y)
        for (int x = 0; x < w.width(); ++x) {
            const Cell& c = w.cell(x, y);
            if (c.object == object && (color == Color::none || c.color == color))
                return {x, y};
        }
    return kNowhere;
}

Direction heading(CellPos from, CellPos to) {
    if (to.second < from.second) return Direction::north;
    if (to.first > from.first) return Direction::east;
    if (to.second > from.second) return Direction::south;
    return Direction::west;
}

// Shortest path over walkable cells from `from` to any of `targets`
// (targets themselves must be walkable or equal to `from`). The returned
// path starts at `from`; empty means unreachable.
std::vector<CellPos> shortest_path(const GridWorld& w, CellPos from,
                                   const std::set<CellPos>& targets) {
    std::map<CellPos, CellPos> parent{{from, from}};
    std::deque<CellPos> frontier{from};
    auto build = [&](CellPos cell) {
        std::vector<CellPos> path{cell};
        while (cell != from) {
            cell = parent.at(cell);
            path.push_back(cell);
        }
        std::reverse(path.begin(), path.end());
        return path;
    };
    if (targets.count(from)) return build(from);
    while (!frontier.empty()) {
        auto [x, y] = frontier.front();
        frontier.pop_front();
        constexpr int dx[] = {0, 1, 0, -1}, dy[] = {-1, 0, 1, 0};
        for (int k = 0; k < 4; ++k) {
            CellPos next{x + dx[k], y + dy[k]};
            if (next.first < 0 || next.first >= w.width() || next.second < 0 ||
                next.second >= w.height())
                continue;
            if (parent.count(next)) continue;
            if (!walkable(w, next.first, next.second)) continue;
            parent[next] = {x, y};
            if (targets.count(next)) return build(next);
            frontier.push_back(next);
        }
    }
    return {};
}

// Virtual position/facing tracked while a plan is assembled.
struct Cursor {
    CellPos pos;
    Direction dir;
};

void emit_turns(std::deque<Action>& plan, Cursor& cur, Direction want) {
    int diff = (static_cast<int>(want) - static_cast<int>(cur.dir) + 4) % 4;
    if (diff == 1) plan.push_back(Action::turn_right);
    if (diff == 2) {
        plan.push_back(Action::turn_right);
        plan.push_back(Action::turn_right);
    }
    if (diff == 3) plan.push_back(Action::turn_left);
    cur.dir = want;
}

void append_path(std::deque<Action>& plan, Cursor& cur, const std::vector<CellPos>& path) {
    for (std::size_t i = 1; i < path.size(); ++i) {
        emit_turns(plan, cur, heading(path[i - 1], path[i]));
        plan.push_back(Action::move_forward);
    }
    if (!path.empty()) cur.pos = path.back();
}

// Walk adjacent to `object_cell`, face it, perform `act`.
bool plan_adjacent_act(const GridWorld& w, std::deque<Action>& plan, Cursor& cur,
                       CellPos object_cell, Action act) {
    std::set<CellPos> stand;
    constexpr int dx[] = {0, 1, 0, -1}, dy[] = {-1, 0, 1, 0};
    for (int k = 0; k < 4; ++k) {
        CellPos c{object_cell.first + dx[k], object_cell.second + dy[k]};
        if (c.first < 0 || c.first >= w.width() || c.second < 0 || c.second >= w.height())
            continue;
        if (c == cur.pos || walkable(w, c.first, c.second)) stand.insert(c);
    }
    if (stand.empty()) return false;
    auto path = shortest_path(w, cur.pos, stand);
    if (path.empty()) return false;
    append_path(plan, cur, path);
    emit_turns(plan, cur, heading(cur.pos, object_cell));
    plan.push_back(act);
    return true;
}

bool plan_walk_onto(const GridWorld& w, std::deque<Action>& plan, Cursor& cur, CellPos cell) {
    auto path = shortest_path(w, cur.pos, {cell});
    if (path.empty()) return false;
    append_path(plan, cur, path);
    return true;
}

// Face an adjacent bare floor cell and drop the carried key there,
// preferring spots that leave doorways and other objects approachable.
bool plan_drop_carried(const GridWorld& w, std::deque<Action>& plan, Cursor& cur) {
    constexpr int dx[] = {0, 1, 0, -1}, dy[] = {-1, 0, 1, 0};
    auto blocks_something = [&](int x, int y) {
        for (int k = 0; k < 4; ++k) {
            int nx = x + dx[k], ny = y + dy[k];
            if (nx < 0 || nx >= w.width() || ny < 0 || ny >= w.height()) continue;
            ObjectId o = w.cell(nx, ny).object;
            if (o == ObjectId::door || o == ObjectId::key || o == ObjectId::exit) return true;
        }
        return false;
    };
    for (bool careful : {true, false}) {
        for (int k = 0; k < 4; ++k) {
            int x = cur.pos.first + dx[k], y = cur.pos.second + dy[k];
            if (x < 0 || x >= w.width() || y < 0 || y >= w.height()) continue;
            if (!(w.cell(x, y) == Cell{ObjectId::floor, Color::none, false})) continue;
            if (careful && blocks_something(x, y)) continue;
            emit_turns(plan, cur, heading(cur.pos, {x, y}));
            plan.push_back(Action::drop);
            return true;
        }
    }
    return false;
}

class OracleController final : public Policy {
public:
    explicit OracleController(std::uint64_t seed) : seed_(seed) {}

    bool wants_full_state() const override { return true; }

    void begin_episode(const GridWorld& env) override {
        plan_.clear();
        planned_goal_.clear();
        agenda_ = dfs_goal_sequence(env.config().graph, episode_seed(seed_, episodes_));
        ++episodes_;
    }

    std::optional<Action> act(const PolicyContext& ctx) override {
        if (!ctx.full_state)
            throw ContractViolation("oracle controller needs full-state snapshots");
        const GridWorld& world = *ctx.full_state;
        const GoalNode* goal = ctx.goal ? ctx.goal : own_goal(world);
        if (!goal) return std::nullopt;
        const std::string key = goal_key_for(*goal);
        if (key != planned_goal_ || plan_.empty()) {
            plan_ = plan_for(world, *goal);
            planned_goal_ = key;
            if (plan_.empty()) return std::nullopt;  // satisfied already, or unreachable
        }
        Action next = plan_.front();
        plan_.pop_front();
        return next;
    }

private:
    const GoalNode* own_goal(const GridWorld& world) {
        const DependencyGraph& g = world.config().graph;
        for (const auto& id : agenda_) {
            const GoalNode& node = g.node(id);
            if (!satisfied(world, node)) return &node;
        }
        return nullptr;
    }

    static bool satisfied(const GridWorld& world, const GoalNode& goal) {
        switch (goal.kind) {
            case NodeKind::key:
                return world.carried() == goal.color ||
                       find_cell(world, ObjectId::key, goal.color) == kNowhere;
            case NodeKind::room: {
                CellPos door = find_cell(world, ObjectId::door, goal.color);
                return door == kNowhere || world.cell(door.first, door.second).open;
            }
            case NodeKind::exit:
                return world.done();
            case NodeKind::start:
                return true;
        }
        return true;
    }

    static std::deque<Action> plan_for(const GridWorld& world, const GoalNode& goal) {
        std::deque<Action> plan;
        Cursor cur{{world.agent_x(), world.agent_y()}, world.agent_dir()};
        if (satisfied(world, goal)) return plan;

        switch (goal.kind) {
            case NodeKind::key: {
                CellPos key_cell = find_cell(world, ObjectId::key, goal.color);
                if (world.carried() != Color::none) {
                    // free the hands and replan from the real state next call
                    if (!world.config().drop_enabled || !plan_drop_carried(world, plan, cur))
                        return {};
                    return plan;
                }
                if (!plan_adjacent_act(world, plan, cur, key_cell, Action::pick_up)) return {};
                return plan;
            }
            case NodeKind::room: {
                CellPos door = find_cell(world, ObjectId::door, goal.color);
                if (world.carried() != goal.color) {
                    if (world.carried() != Color::none) {
                        if (!world.config().drop_enabled ||
                            !plan_drop_carried(world, plan, cur))
                            return {};
                        return plan;  // drop first, then replan
                    }
                    CellPos key_cell = find_cell(world, ObjectId::key, goal.color);
                    if (key_cell == kNowhere) return {};  // key spent elsewhere
                    if (!plan_adjacent_act(world, plan, cur, key_cell, Action::pick_up))
                        return {};
                }
                if (!plan_adjacent_act(world, plan, cur, door, Action::open)) return {};
                return plan;
            }
            case NodeKind::exit: {
                CellPos exit_cell = find_cell(world, ObjectId::exit, Color::none);
                if (exit_cell == kNowhere) return {};
                if (!plan_walk_onto(world, plan, cur, exit_cell)) return {};
                return plan;
            }
            case NodeKind::start:
                return plan;
        }
        return plan;
    }

    std::uint64_t seed_;
    std::uint64_t episodes_ = 0;
    std::vector<std::string> agenda_;
    std::deque<Action> plan_;
    std::string planned_goal_;
};

// ---------------------------------------------------------------------------
// Fixed DFS meta-controller

void dfs_visit(const DependencyGraph& g, const std::string& id, std::set<std::string>& seen,
               std::vector<std::string>& out, SplitMix64& rng, bool& found_exit) {
    if (found_exit) return;
    auto children = g.successors(id);
    std::sort(children.begin(), children.end());
    shuffle(children, rng);
    for (const auto& child : children) {
        if (found_exit) return;
        if (!seen.insert(child).second) continue;
        out.push_back(child);
        if (g.node(child).kind == NodeKind::exit) {
            found_exit = true;
            return;
        }
        dfs_visit(g, child, seen, out, rng, found_exit);
    }
}

class DfsMetaController final : public MetaController {
public:
    explicit DfsMetaController(std::uint64_t seed) : seed_(seed) {}

    void begin_episode(const GridWorld& env) override {
        graph_ = env.config().graph;
        sequence_ = dfs_goal_sequence(graph_, episode_seed(seed_, episodes_));
        ++episodes_;
        cursor_ = 0;
    }

    const GoalNode* next_goal(const GridWorld&) override {
        if (sequence_.empty()) throw ContractViolation("meta asked before begin_episode");
        const std::string& id =
            cursor_ < sequence_.size() ? sequence_[cursor_++] : sequence_.back();
        return &graph_.node(id);
    }

private:
    std::uint64_t seed_;
    std::uint64_t episodes_ = 0;
    DependencyGraph graph_;
    std::vector<std::string> sequence_;
    std::size_t cursor_ = 0;
};

}  // namespace

std::unique_ptr<Policy> make_random_policy(std::uint64_t seed) {
    return std::make_unique<RandomPolicy>(seed);
}

std::unique_ptr<Policy> make_oracle_controller(std::uint64_t seed) {
    return std::make_unique<OracleController>(seed);
}

std::vector<std::string> dfs_goal_sequence(const DependencyGraph& graph, std::uint64_t seed) {
    SplitMix64 rng = stream(seed, kPolicyStream);
    std::vector<std::string> out;
    std::set<std::string> seen{graph.start_node().id};
    bool found_exit = false;
    dfs_visit(graph, graph.start_node().id, seen, out, rng, found_exit);
    if (!found_exit) throw ValidationError("dependency graph never reaches the exit");
    return out;
}

std::unique_ptr<MetaController> make_dfs_meta(std::uint64_t seed) {
    return std::make_unique<DfsMetaController>(seed);
}

Critic default_critic() {
    return [](const GridWorld&, const std::vector<GoalEvent>& events, const GoalNode& goal) {
        for (const auto& e : events)
            if (e.matches(goal)) return 1.0;
        return 0.0;
    };
}

double HippoLedger::total_extrinsic() const {
    double total = 0.0;
    for (const auto& seg : segments) total += seg.extrinsic;
    return total;
}

namespace {

EpisodeTrace trace_shell(const GridWorld& env, std::string agent, std::string mode) {
    EpisodeTrace trace;
    trace.config_name = env.config().name;
    trace.seed = env.config().seed;
    trace.episode = env.episode_index();
    trace.max_steps = env.config().max_steps;
    trace.agent = std::move(agent);
    trace.mode = std::move(mode);
    return trace;
}

void finish_trace(EpisodeTrace& trace, const GridWorld& env) {
    trace.length = env.steps();
    trace.success = env.done();
    trace.truncated = env.truncated();
}

PolicyContext make_context(const GridWorld& env, const Observation& obs, const GoalNode* goal,
                           const GoalEncoding* enc) {
    PolicyContext ctx;
    ctx.obs = &obs;
    ctx.full_state = &env;
    ctx.goal = goal;
    ctx.goal_encoding = enc;
    ctx.action_count = env.config().drop_enabled ? kBaseActionCount + 1 : kBaseActionCount;
    return ctx;
}

bool goal_already_achieved(const std::vector<GoalEvent>& events, const GoalNode& goal) {
    for (const auto& e : events)
        if (e.matches(goal)) return true;
    return false;
}

// Encoding fed to policies uses the episode's display colors so learners
// can match the goal against what they see.
GoalEncoding display_encoding(const GridWorld& env, const GoalNode& goal) {
    return encode_goal(goal.kind, goal.kind == NodeKind::exit
                                      ? Color::none
                                      : env.display_color(goal.color));
}

}  // namespace

HippoResult run_hippo_episode(GridWorld& env, MetaController& meta, Policy& controller,
                              const Critic& critic, const HippoOptions& options) {
    if (env.steps() != 0 || env.episode_over())
        throw ContractViolation("hippo episode needs a fresh environment");
    const DependencyGraph& graph = env.config().graph;
    const long long stall_budget =
        static_cast<long long>(options.stall_factor) * env.width() * env.height();

    HippoResult result;
    result.trace = trace_shell(env, "hippo", "hierarchical");
    meta.begin_episode(env);
    controller.begin_episode(env);

    Observation obs = env.observe();
    const GoalNode* goal = meta.next_goal(env);
    int idle_segments = 0;  // consecutive segments without a single step

    while (!env.episode_over()) {
        HippoSegment segment;
        segment.goal = goal_key_for(*goal);
        segment.start_step = env.steps();
        segment.end_step = segment.start_step;
        const Observation segment_start_obs = obs;
        GoalEncoding enc = display_encoding(env, *goal);

        // a goal the episode already achieved closes as a zero-length segment
        bool achieved = goal_already_achieved(result.trace.events, *goal);
        while (!achieved && !env.episode_over()) {
            PolicyContext ctx = make_context(env, obs, goal, &enc);
            std::optional<Action> action = controller.act(ctx);
            if (!action) break;  // controller declines: unachievable from here

            StepResult sr = env.step(*action);
            const double intrinsic = critic(env, sr.events, *goal);
            controller.update(
                {obs, static_cast<int>(*action), sr.obs, intrinsic});
            segment.extrinsic += sr.reward;

            result.trace.steps.push_back(
                {static_cast<int>(*action), sr.reward, intrinsic, segment.goal});
            for (const auto& e : sr.events) result.trace.events.push_back(e);

            obs = sr.obs;
            achieved = goal_already_achieved(sr.events, *goal);
            if (env.steps() - segment.start_step >= stall_budget) break;  // stalled
        }
        segment.end_step = env.steps();
        segment.achieved = achieved;
        result.ledger.segments.push_back(segment);
        meta.update({segment_start_obs, node_index(graph, goal->id), obs, segment.extrinsic});
        if (env.episode_over()) break;

        idle_segments = segment.end_step == segment.start_step ? idle_segments + 1 : 0;
        if (idle_segments > static_cast<int>(graph.nodes.size()) + 2)
            break;  // every remaining goal is declined; abandon instead of spinning
        goal = meta.next_goal(env);
    }

    finish_trace(result.trace, env);
    return result;
}

std::string_view reward_mode_name(RewardMode mode) {
    switch (mode) {
        case RewardMode::sparse: return "sparse";
        case RewardMode::bonus: return "bonus";
        case RewardMode::sketch: return "sketch";
    }
    return "sparse";
}

std::optional<RewardMode> reward_mode_from_name(std::string_view name) {
    if (name == "sparse") return RewardMode::sparse;
    if (name == "bonus") return RewardMode::bonus;
    if (name == "sketch") return RewardMode::sketch;
    return std::nullopt;
}

void validate_sketch(const DependencyGraph& graph, const std::vector<std::string>& sketch) {
    if (sketch.empty()) throw ValidationError("sketch must not be empty");
    std::set<std::string> open{graph.start_node().id};
    Color carried = Color::none;
    for (const auto& id : sketch) {
        const GoalNode& node = graph.node(id);
        switch (node.kind) {
            case NodeKind::key: {
                if (carried != Color::none)
                    throw ValidationError("sketch picks '" + id + "' with hands full");
                const std::string& at = graph.key_location.at(id);
                if (!open.count(at))
                    throw ValidationError("sketch picks '" + id + "' before reaching it");
                carried = node.color;
                break;
            }
            case NodeKind::room: {
                if (carried != node.color)
                    throw ValidationError("sketch opens '" + id + "' without its key");
                if (!open.count(graph.door_host.at(id)))
                    throw ValidationError("sketch opens '" + id + "' before its host room");
                open.insert(id);
                carried = Color::none;
                break;
            }
            case NodeKind::exit:
                if (!open.count(graph.exit_room()))
                    throw ValidationError("sketch exits before opening the exit room");
                break;
            case NodeKind::start:
                throw ValidationError("sketch may not contain the start node");
        }
    }
    if (graph.node(sketch.back()).kind != NodeKind::exit)
        throw ValidationError("sketch must end with the exit goal");
}

EpisodeTrace run_flat_episode(GridWorld& env, Policy& policy, RewardMode mode,
                              const std::vector<std::string>* sketch) {
    if (env.steps() != 0 || env.episode_over())
        throw ContractViolation("flat episode needs a fresh environment");
    if ((mode == RewardMode::sketch) != (sketch != nullptr))
        throw std::invalid_argument("a sketch is required exactly in sketch mode");
    const DependencyGraph& graph = env.config().graph;
    if (sketch) validate_sketch(graph, *sketch);

    EpisodeTrace trace = trace_shell(env, "flat", std::string(reward_mode_name(mode)));
    policy.begin_episode(env);
    Observation obs = env.observe();
    std::size_t pointer = 0;

    while (!env.episode_over()) {
        const GoalNode* goal = nullptr;
        GoalEncoding enc{};
        if (sketch) {
            const std::string& id = (*sketch)[std::min(pointer, sketch->size() - 1)];
            goal = &graph.node(id);
            enc = display_encoding(env, *goal);
        }
        PolicyContext ctx = make_context(env, obs, goal, sketch ? &enc : nullptr);
        std::optional<Action> action = policy.act(ctx);
        if (!action) break;  // policy gives up; episode recorded as-is

        StepResult sr = env.step(*action);
        double bonus = 0.0;
        if (mode == RewardMode::bonus)
            for (const auto& e : sr.events)
                if (e.kind != GoalEvent::Kind::exit_reached) bonus += 1.0;
        policy.update({obs, static_cast<int>(*action), sr.obs, sr.reward + bonus});

        trace.steps.push_back({static_cast<int>(*action), sr.reward, bonus,
                               goal ? goal_key_for(*goal) : std::string()});
        for (const auto& e : sr.events) trace.events.push_back(e);
        if (goal && goal_already_achieved(sr.events, *goal)) ++pointer;
        obs = sr.obs;
    }

    finish_trace(trace, env);
    return trace;
}

}  // namespace escaperoom
