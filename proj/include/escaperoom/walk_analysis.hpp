#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "escaperoom/goal_graph.hpp"
#include "escaperoom/linalg.hpp"

namespace escaperoom {

/// Stay/advance/restart probabilities of the goal-space random walk.
/// Defaults: with 80% chance nothing happens, with 19% the walk follows one
/// outgoing edge (split uniformly), with 1% it restarts at the root.
struct WalkParams {
    double stay = 0.80;
    double advance = 0.19;
    double restart = 0.01;

    void validate() const;  // throws ValidationError
};

/// One state of the augmented walk graph: the set of opened rooms plus
/// either a location (start or an opened room) or a transient
/// picked-key marker, or the absorbing exit.
struct WalkState {
    std::vector<std::string> opened;  // sorted room ids
    std::string node_id;              // location room/start id, key id, or exit id
    bool is_key = false;
    bool is_exit = false;

    std::string label() const;
};

/// Strongly connected random-walk expansion of a dependency graph.
/// Location states per opened-set level, transient key states, and one
/// absorbing exit; `edges` holds the advance moves only (stay and restart
/// edges are implied by WalkParams).
struct AugmentedGraph {
    std::vector<WalkState> states;
    std::vector<std::vector<int>> edges;
    int root_index = 0;
    int exit_index = 0;

    int n() const { return static_cast<int>(states.size()); }
};

/// Expands a dependency graph into its walk graph. With drop_key set, every
/// transient key state also gets an advance edge back to the room it was
/// picked in (the walk may put the key down again).
AugmentedGraph augment(const DependencyGraph& graph, bool drop_key);

/// Row-stochastic matrix of the walk: stay on the diagonal, restart mass to
/// the root, advance mass split uniformly over outgoing edges. The exit row
/// is the identity (absorbing). Throws ValidationError if a non-exit state
/// has no advance edge.
Matrix transition_matrix(const AugmentedGraph& aug, const WalkParams& params);

/// Variant with a live exit row (stay+advance folded into the self-loop,
/// restart mass to the root), used for first-passage times to non-exit
/// targets where absorbing at the exit would make them infinite.
Matrix transition_matrix_recurrent(const AugmentedGraph& aug, const WalkParams& params);

enum class HtMethod { absorbing, laplacian, monte_carlo };

struct HittingTimeReport {
    std::vector<double> values;  // per state; exit entry is 0
    HtMethod method = HtMethod::absorbing;
    double mc_stderr = 0.0;  // monte_carlo only
    long long walks = 0;     // monte_carlo only

    double at_root(const AugmentedGraph& aug) const { return values[aug.root_index]; }
};

/// Expected steps to absorption from every state, by first-step analysis:
/// solve (I - Q) h = 1 over the transient block. Every step, including a
/// stay step, counts one time unit; pass count_stay_steps=false to rescale
/// to the jump chain (state changes only).
HittingTimeReport hitting_time_absorbing(const AugmentedGraph& aug, const WalkParams& params,
                                         bool count_stay_steps = true);

/// Grounded-Laplacian potentials: solve L x = b with x[t] = 0, b[s] = 1,
/// b[t] = -1 on L = D - W for the symmetrized unit-weight advance
/// adjacency W = (A + A^T) / 2. x[s] is the s-t effective resistance. Kept
/// alongside the absorbing solve as the spectral route to the same graphs;
/// the two agree only for reversible walks, and the absorbing solve is the
/// authoritative hitting time.
HittingTimeReport grounded_laplacian_solve(const AugmentedGraph& aug, const WalkParams& params,
                                           int s, int t);

/// Monte-Carlo estimate. Simulates `walks` independent walks from the root
/// until absorption; per-state values are first-visit remainders (strong
/// Markov), mc_stderr is the standard error of the root estimate.
/// Deterministic for fixed (seed, walks) at any worker count.
HittingTimeReport hitting_time_mc(const AugmentedGraph& aug, const WalkParams& params,
                                  long long walks, std::uint64_t seed, int workers = 1);

/// Hard per-walk cap; hitting it indicates a broken chain and throws.
inline constexpr long long kMaxWalkSteps = 10'000'000;

struct HtRow {
    std::string name;  // template letter or "custom"
    int exit_depth = 0;
    int width = 0;
    double hitting_time = 0.0;
};

/// Root-to-exit hitting times (absorbing solve) for a set of templates.
std::vector<HtRow> ht_table(const std::vector<char>& templates, bool drop_key,
                            const WalkParams& params);

/// Number of states whose first-passage time from the root is within the
/// step budget. Targets other than the exit are measured on the recurrent
/// matrix so restarts keep every state reachable.
int expected_reachable(const AugmentedGraph& aug, const WalkParams& params, double budget);

}  // namespace escaperoom
