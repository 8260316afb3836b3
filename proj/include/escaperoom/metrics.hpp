#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "escaperoom/grid_world.hpp"

namespace escaperoom {

struct StepRecord {
    int action = 0;
    double extrinsic = 0.0;
    double intrinsic = 0.0;
    std::string goal;  // active goal key, empty when none

    bool operator==(const StepRecord&) const = default;
};

/// One episode's worth of evidence: per-step rewards and goals, the goal
/// events, and the outcome. Serialized one-per-line into .traces.jsonl logs.
struct EpisodeTrace {
    std::string config_name;  // template letter or "custom"
    std::uint64_t seed = 0;
    int episode = 0;
    int max_steps = 0;
    std::string agent;
    std::string mode;
    std::vector<StepRecord> steps;
    std::vector<GoalEvent> events;
    int length = 0;
    bool success = false;
    bool truncated = false;

    std::string to_json_line() const;
    static EpisodeTrace from_json_line(const std::string& line);
    bool operator==(const EpisodeTrace&) const = default;
};

/// Recomputes the goal events implied by a before/after snapshot pair:
/// a key leaving the floor into the hand, a door flag flipping, the agent
/// landing on the exit. Throws ContractViolation when `after` cannot be the
/// single-step successor of `before`.
std::vector<GoalEvent> detect_events(const GridWorld& before, Action action,
                                     const GridWorld& after);

struct GoalStat {
    double mean_timestep = 0.0;  // mean first-achievement step over achieving traces
    int achieved = 0;            // traces that achieved the goal at least once

    bool operator==(const GoalStat&) const = default;
};

struct MetricsSummary {
    double success_rate = 0.0;          // fraction in [0, 1]
    double avg_episode_length_pct = 0.0;  // percent of max_steps
    std::map<std::string, GoalStat> per_goal;
    int episodes = 0;
};

/// Aggregates traces from one template. Throws std::invalid_argument on an
/// empty input. Permutation-invariant.
MetricsSummary summarize(const std::vector<EpisodeTrace>& traces);

/// Sample Pearson correlation. Throws std::invalid_argument for mismatched
/// or short inputs and ValidationError when either side is constant.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// Streaming trace log helpers (newline-delimited JSON).
void append_traces(const std::string& path, const std::vector<EpisodeTrace>& traces);
std::vector<EpisodeTrace> read_traces(const std::string& path);

}  // namespace escaperoom
