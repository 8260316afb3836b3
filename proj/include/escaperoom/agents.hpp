#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "escaperoom/goal_graph.hpp"
#include "escaperoom/grid_world.hpp"
#include "escaperoom/metrics.hpp"

namespace escaperoom {

/// What a policy sees when asked for an action.
struct PolicyContext {
    const Observation* obs = nullptr;
    const GridWorld* full_state = nullptr;  // only for policies that want it
    const GoalNode* goal = nullptr;         // active goal, when one is assigned
    const GoalEncoding* goal_encoding = nullptr;  // display-color encoding of `goal`
    int action_count = kBaseActionCount;
};

/// Transition for the two update-hook call sites. At the controller level
/// `action_or_goal` is the primitive action code and `reward` the intrinsic
/// reward; at the meta level it is the goal's node index and the extrinsic
/// return accumulated over the segment.
struct Transition {
    Observation before;
    int action_or_goal = 0;
    Observation after;
    double reward = 0.0;
};

/// Primitive-action policy. Scripted implementations ignore update(); a
/// learner can implement both hooks without any loop changes.
class Policy {
public:
    virtual ~Policy() = default;
    virtual bool wants_full_state() const { return false; }
    virtual void begin_episode(const GridWorld& /*env*/) {}
    /// nullopt reports the active goal unachievable in the current world.
    virtual std::optional<Action> act(const PolicyContext& ctx) = 0;
    virtual void update(const Transition&) {}
};

/// Goal-level policy for the hierarchical loop. The fixed meta-controller
/// used by the toolkit is a depth-first walk over the dependency graph; any
/// implementation (including a learner) can slot in instead.
class MetaController {
public:
    virtual ~MetaController() = default;
    virtual void begin_episode(const GridWorld& env) = 0;
    /// Next goal for the controller. Never null; providers repeat the
    /// exit goal once exhausted.
    virtual const GoalNode* next_goal(const GridWorld& env) = 0;
    virtual void update(const Transition&) {}
};

/// Uniform over the legal action set; deterministic per seed.
std::unique_ptr<Policy> make_random_policy(std::uint64_t seed);

/// Full-observability navigator: breadth-first shortest paths, emitting
/// pick_up / open / drop as needed. Asked for a goal it cannot reach, it
/// declines explicitly instead of looping. Without an assigned goal it
/// follows its own dependency-consistent agenda.
std::unique_ptr<Policy> make_oracle_controller(std::uint64_t seed);

/// Goal ids along a randomized-child-order depth-first walk from the start
/// node, each key/room/exit on first visit, truncated at the exit.
std::vector<std::string> dfs_goal_sequence(const DependencyGraph& graph, std::uint64_t seed);

/// Fixed meta-controller walking a fresh randomized DFS path each episode.
std::unique_ptr<MetaController> make_dfs_meta(std::uint64_t seed);

/// Intrinsic-reward judge: paid exactly when the active goal's event
/// occurred on this step.
using Critic =
    std::function<double(const GridWorld& after, const std::vector<GoalEvent>& step_events,
                         const GoalNode& goal)>;
Critic default_critic();

struct HippoSegment {
    std::string goal;  // goal key of the active goal
    int start_step = 0;
    int end_step = 0;
    double extrinsic = 0.0;  // F accumulated inside the segment
    bool achieved = false;
};

struct HippoLedger {
    std::vector<HippoSegment> segments;
    double total_extrinsic() const;
};

struct HippoResult {
    EpisodeTrace trace;
    HippoLedger ledger;
};

struct HippoOptions {
    /// A goal making no event progress for stall_factor * width * height
    /// steps is abandoned and the meta is re-queried.
    int stall_factor = 4;
};

/// The hierarchical control loop: the meta picks a goal, the controller
/// acts on observation ++ goal encoding and collects intrinsic rewards, the
/// environment's extrinsic reward accumulates into F and is delivered to
/// the meta hook when the segment closes.
HippoResult run_hippo_episode(GridWorld& env, MetaController& meta, Policy& controller,
                              const Critic& critic, const HippoOptions& options = {});

enum class RewardMode { sparse, bonus, sketch };

std::string_view reward_mode_name(RewardMode mode);
std::optional<RewardMode> reward_mode_from_name(std::string_view name);

/// Flat episode runner. sparse: environment reward only. bonus: +1 per
/// intermediate goal event, folded into the policy's update reward and
/// recorded as intrinsic in the trace. sketch: the goal sequence is shown
/// to the policy one entry at a time (no intrinsic reward), advancing on
/// each achievement; required iff mode == sketch and validated for
/// dependency consistency.
EpisodeTrace run_flat_episode(GridWorld& env, Policy& policy, RewardMode mode,
                              const std::vector<std::string>* sketch = nullptr);

/// Checks that a goal-id sequence is physically executable in order (keys
/// before their doors, locations reachable, one key at a time). Throws
/// ValidationError otherwise.
void validate_sketch(const DependencyGraph& graph, const std::vector<std::string>& sketch);

}  // namespace escaperoom
