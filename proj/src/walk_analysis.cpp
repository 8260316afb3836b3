#include "escaperoom/walk_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <set>
#include <thread>

#include "escaperoom/errors.hpp"
#include "escaperoom/rng.hpp"

namespace escaperoom {

void WalkParams::validate() const {
    for (double p : {stay, advance, restart})
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("walk probabilities must be in [0,1]");
    if (advance <= 0.0) throw ValidationError("advance probability must be positive");
    if (std::abs(stay + advance + restart - 1.0) > 1e-12)
        throw ValidationError("walk probabilities must sum to 1");
}

std::string WalkState::label() const {
    std::string open = "{";
    for (std::size_t i = 0; i < opened.size(); ++i) {
        if (i) open += ",";
        open += opened[i];
    }
    open += "}";
    if (is_exit) return "exit";
    return (is_key ? "pick " : "at ") + node_id + " " + open;
}

namespace {

using OpenSet = std::vector<std::string>;  // sorted room ids

OpenSet with_room(OpenSet open, const std::string& room) {
    open.push_back(room);
    std::sort(open.begin(), open.end());
    return open;
}

struct LevelInfo {
    OpenSet open;
    std::vector<std::string> locations;  // start + opened rooms, canonical order
    std::vector<std::string> keys;       // keys pickable at this level
};

}  // namespace

AugmentedGraph augment(const DependencyGraph& graph, bool drop_key) {
    validate(graph);
    const std::string start = graph.start_node().id;
    const std::string exit_room = graph.exit_room();
    const auto rooms = graph.room_ids();
    const auto keys = graph.key_ids();

    auto accessible = [&](const OpenSet& open, const std::string& id) {
        return id == start || std::binary_search(open.begin(), open.end(), id);
    };
    auto room_of_key = [&](const std::string& key) {
        const GoalNode& kn = graph.node(key);
        for (const auto& r : rooms)
            if (graph.node(r).color == kn.color) return r;
        throw ValidationError("key '" + key + "' has no room");
    };
    // a key is pickable while its room is unopened and both the key and the
    // door are physically in reach
    auto pickable = [&](const OpenSet& open) {
        std::vector<std::string> out;
        for (const auto& key : keys) {
            const std::string key_room = room_of_key(key);
            if (accessible(open, key_room)) continue;
            if (accessible(open, graph.key_location.at(key)) &&
                accessible(open, graph.door_host.at(key_room)))
                out.push_back(key);
        }
        return out;
    };

    // enumerate reachable opened sets, smallest first
    std::vector<LevelInfo> levels;
    std::set<OpenSet> seen;
    std::deque<OpenSet> frontier{{}};
    while (!frontier.empty()) {
        OpenSet open = frontier.front();
        frontier.pop_front();
        if (!seen.insert(open).second) continue;
        LevelInfo level;
        level.open = open;
        level.locations.push_back(start);
        for (const auto& room : rooms)
            if (std::binary_search(open.begin(), open.end(), room))
                level.locations.push_back(room);
        level.keys = pickable(open);
        for (const auto& key : level.keys) frontier.push_back(with_room(open, room_of_key(key)));
        levels.push_back(std::move(level));
    }
    std::sort(levels.begin(), levels.end(), [](const LevelInfo& a, const LevelInfo& b) {
        if (a.open.size() != b.open.size()) return a.open.size() < b.open.size();
        return a.open < b.open;
    });

    AugmentedGraph aug;
    std::map<std::pair<OpenSet, std::string>, int> loc_index;
    std::map<std::pair<OpenSet, std::string>, int> key_index;
    for (const auto& level : levels) {
        for (const auto& loc : level.locations) {
            loc_index[{level.open, loc}] = aug.n();
            aug.states.push_back({level.open, loc, false, false});
        }
        for (const auto& key : level.keys) {
            key_index[{level.open, key}] = aug.n();
            aug.states.push_back({level.open, key, true, false});
        }
    }
    const int exit_index = aug.n();
    aug.states.push_back({{}, graph.exit_node().id, false, true});
    aug.exit_index = exit_index;
    aug.root_index = loc_index.at({{}, start});

    aug.edges.assign(aug.n(), {});
    for (const auto& level : levels) {
        // movement between each opened room and its host
        for (const auto& room : level.open) {
            int a = loc_index.at({level.open, graph.door_host.at(room)});
            int b = loc_index.at({level.open, room});
            aug.edges[a].push_back(b);
            aug.edges[b].push_back(a);
        }
        // picking a key, then opening its door into the next level
        for (const auto& key : level.keys) {
            const std::string key_room = room_of_key(key);
            int held = key_index.at({level.open, key});
            int from = loc_index.at({level.open, graph.key_location.at(key)});
            aug.edges[from].push_back(held);
            aug.edges[held].push_back(loc_index.at({with_room(level.open, key_room), key_room}));
            if (drop_key) aug.edges[held].push_back(from);
        }
        // escaping once the exit room is open
        if (exit_room == start || std::binary_search(level.open.begin(), level.open.end(),
                                                     exit_room))
            aug.edges[loc_index.at({level.open, exit_room})].push_back(exit_index);
    }

    for (int i = 0; i < aug.n(); ++i) {
        std::sort(aug.edges[i].begin(), aug.edges[i].end());
        if (i != aug.exit_index && aug.edges[i].empty())
            throw ValidationError("walk state '" + aug.states[i].label() +
                                  "' has no advance edge");
    }
    return aug;
}

namespace {

Matrix build_transition(const AugmentedGraph& aug, const WalkParams& params,
                        bool absorbing_exit) {
    params.validate();
    const int n = aug.n();
    Matrix p(n, n);
    for (int i = 0; i < n; ++i) {
        if (i == aug.exit_index) {
            if (absorbing_exit) {
                p(i, i) = 1.0;
            } else {
                p(i, i) += params.stay + params.advance;
                p(i, aug.root_index) += params.restart;
            }
            continue;
        }
        if (aug.edges[i].empty())
            throw ValidationError("walk state without advance edges: " + aug.states[i].label());
        p(i, i) += params.stay;
        p(i, aug.root_index) += params.restart;
        const double share = params.advance / static_cast<double>(aug.edges[i].size());
        for (int j : aug.edges[i]) p(i, j) += share;
    }
    return p;
}

// First-passage time to `target`: ground h[target] = 0 and solve
// h_i = 1 + sum_j P(i,j) h_j for the rest.
std::vector<double> first_passage(const Matrix& p, int target) {
    const int n = p.rows();
    std::vector<int> trans;
    trans.reserve(n - 1);
    for (int i = 0; i < n; ++i)
        if (i != target) trans.push_back(i);
    Matrix a(n - 1, n - 1);
    std::vector<double> b(n - 1, 1.0);
    for (int r = 0; r < n - 1; ++r)
        for (int c = 0; c < n - 1; ++c)
            a(r, c) = (r == c ? 1.0 : 0.0) - p(trans[r], trans[c]);
    std::vector<double> h;
    try {
        h = solve_dense(std::move(a), std::move(b));
    } catch (const NumericalError&) {
        throw NumericalError("first-passage system is singular; the walk graph is broken");
    }
    std::vector<double> full(n, 0.0);
    for (int r = 0; r < n - 1; ++r) full[trans[r]] = h[r];
    return full;
}

}  // namespace

Matrix transition_matrix(const AugmentedGraph& aug, const WalkParams& params) {
    return build_transition(aug, params, true);
}

Matrix transition_matrix_recurrent(const AugmentedGraph& aug, const WalkParams& params) {
    return build_transition(aug, params, false);
}

HittingTimeReport hitting_time_absorbing(const AugmentedGraph& aug, const WalkParams& params,
                                         bool count_stay_steps) {
    Matrix p = transition_matrix(aug, params);
    if (!count_stay_steps) {
        // embedded jump chain: count only the steps that change state
        Matrix jump(aug.n(), aug.n());
        for (int i = 0; i < aug.n(); ++i) {
            if (i == aug.exit_index) {
                jump(i, i) = 1.0;
                continue;
            }
            double leave = 1.0 - p(i, i);
            for (int j = 0; j < aug.n(); ++j)
                if (j != i) jump(i, j) = p(i, j) / leave;
        }
        p = std::move(jump);
    }
    HittingTimeReport report;
    report.method = HtMethod::absorbing;
    report.values = first_passage(p, aug.exit_index);
    return report;
}

HittingTimeReport grounded_laplacian_solve(const AugmentedGraph& aug, const WalkParams& params,
                                           int s, int t) {
    params.validate();
    if (s == t) throw std::invalid_argument("grounded solve needs distinct source and target");
    const int n = aug.n();
    if (s < 0 || s >= n || t < 0 || t >= n)
        throw std::invalid_argument("state index out of range");

    Matrix w(n, n);
    for (int i = 0; i < n; ++i)
        for (int j : aug.edges[i]) {
            w(i, j) += 0.5;
            w(j, i) += 0.5;
        }
    Matrix lap(n, n);
    for (int i = 0; i < n; ++i) {
        double degree = 0.0;
        for (int j = 0; j < n; ++j) degree += w(i, j);
        for (int j = 0; j < n; ++j) lap(i, j) = -w(i, j);
        lap(i, i) += degree;
    }

    // ground row/column t
    Matrix reduced(n - 1, n - 1);
    std::vector<double> rhs(n - 1, 0.0);
    std::vector<int> keep;
    keep.reserve(n - 1);
    for (int i = 0; i < n; ++i)
        if (i != t) keep.push_back(i);
    for (int r = 0; r < n - 1; ++r) {
        for (int c = 0; c < n - 1; ++c) reduced(r, c) = lap(keep[r], keep[c]);
        if (keep[r] == s) rhs[r] = 1.0;
    }
    std::vector<double> x;
    try {
        x = solve_dense(std::move(reduced), std::move(rhs));
    } catch (const NumericalError&) {
        throw NumericalError("grounded Laplacian system is singular");
    }

    HittingTimeReport report;
    report.method = HtMethod::laplacian;
    report.values.assign(n, 0.0);
    for (int r = 0; r < n - 1; ++r) report.values[keep[r]] = x[r];
    return report;
}

namespace {

struct WalkBlockStats {
    std::vector<double> first_visit_sum;  // per state: sum of (T - first visit)
    std::vector<long long> first_visit_count;
    double root_sum = 0.0;
    double root_sumsq = 0.0;

    explicit WalkBlockStats(int n) : first_visit_sum(n, 0.0), first_visit_count(n, 0) {}
};

void run_walk_block(const AugmentedGraph& aug, const WalkParams& params,
                    std::uint64_t walk_base, long long first_walk, long long count,
                    WalkBlockStats& stats) {
    const int n = aug.n();
    std::vector<long long> first_visit(n, -1);
    std::vector<int> touched;
    touched.reserve(n);
    for (long long w = 0; w < count; ++w) {
        // one independent stream per walk: deterministic and order-free
        SplitMix64 rng(mix64(walk_base + static_cast<std::uint64_t>(first_walk + w)));
        int state = aug.root_index;
        long long steps = 0;
        touched.clear();
        first_visit[state] = 0;
        touched.push_back(state);
        while (state != aug.exit_index) {
            if (steps >= kMaxWalkSteps)
                throw NumericalError("random walk exceeded the step cap; chain looks broken");
            double u = rng.next_double();
            if (u < params.stay) {
                // stay put
            } else if (u < params.stay + params.advance) {
                const auto& outs = aug.edges[state];
                state = outs[rng.next_below(static_cast<std::uint32_t>(outs.size()))];
            } else {
                state = aug.root_index;
            }
            ++steps;
            if (first_visit[state] < 0) {
                first_visit[state] = steps;
                touched.push_back(state);
            }
        }
        for (int s : touched) {
            stats.first_visit_sum[s] += static_cast<double>(steps - first_visit[s]);
            ++stats.first_visit_count[s];
            first_visit[s] = -1;
        }
        const double total = static_cast<double>(steps);
        stats.root_sum += total;
        stats.root_sumsq += total * total;
    }
}

}  // namespace

HittingTimeReport hitting_time_mc(const AugmentedGraph& aug, const WalkParams& params,
                                  long long walks, std::uint64_t seed, int workers) {
    params.validate();
    if (walks < 1) throw std::invalid_argument("walk count must be >= 1");
    if (workers < 1) workers = 1;

    constexpr long long kBlock = 4096;
    const long long blocks = (walks + kBlock - 1) / kBlock;
    std::vector<WalkBlockStats> block_stats(blocks, WalkBlockStats(aug.n()));
    const std::uint64_t walk_base = mix64(seed ^ kWalkStream * kGolden);

    auto run_range = [&](long long begin, long long end) {
        for (long long b = begin; b < end; ++b) {
            long long first = b * kBlock;
            long long count = std::min(kBlock, walks - first);
            run_walk_block(aug, params, walk_base, first, count, block_stats[b]);
        }
    };
    if (workers == 1 || blocks == 1) {
        run_range(0, blocks);
    } else {
        const int used = static_cast<int>(std::min<long long>(workers, blocks));
        std::vector<std::thread> pool;
        pool.reserve(used);
        for (int t = 0; t < used; ++t) {
            long long begin = blocks * t / used;
            long long end = blocks * (t + 1) / used;
            pool.emplace_back(run_range, begin, end);
        }
        for (auto& t : pool) t.join();
    }

    // deterministic reduction in block order, independent of worker count
    WalkBlockStats total(aug.n());
    for (const auto& bs : block_stats) {
        for (int i = 0; i < aug.n(); ++i) {
            total.first_visit_sum[i] += bs.first_visit_sum[i];
            total.first_visit_count[i] += bs.first_visit_count[i];
        }
        total.root_sum += bs.root_sum;
        total.root_sumsq += bs.root_sumsq;
    }

    HittingTimeReport report;
    report.method = HtMethod::monte_carlo;
    report.walks = walks;
    report.values.assign(aug.n(), 0.0);
    for (int i = 0; i < aug.n(); ++i)
        if (total.first_visit_count[i] > 0)
            report.values[i] =
                total.first_visit_sum[i] / static_cast<double>(total.first_visit_count[i]);
    report.values[aug.exit_index] = 0.0;
    const double mean = total.root_sum / static_cast<double>(walks);
    report.values[aug.root_index] = mean;
    if (walks > 1) {
        double variance =
            (total.root_sumsq - static_cast<double>(walks) * mean * mean) /
            static_cast<double>(walks - 1);
        report.mc_stderr = std::sqrt(std::max(variance, 0.0) / static_cast<double>(walks));
    }
    return report;
}

std::vector<HtRow> ht_table(const std::vector<char>& templates, bool drop_key,
                            const WalkParams& params) {
    std::vector<HtRow> rows;
    for (char letter : templates) {
        DependencyGraph graph = load_template(letter);
        AugmentedGraph aug = augment(graph, drop_key);
        HittingTimeReport ht = hitting_time_absorbing(aug, params);
        rows.push_back({std::string(1, letter), exit_depth(graph), graph_width(graph),
                        ht.at_root(aug)});
    }
    return rows;
}

int expected_reachable(const AugmentedGraph& aug, const WalkParams& params, double budget) {
    if (budget < 0) throw std::invalid_argument("budget must be nonnegative");
    Matrix absorbing = transition_matrix(aug, params);
    Matrix recurrent = transition_matrix_recurrent(aug, params);
    int count = 0;
    for (int target = 0; target < aug.n(); ++target) {
        if (target == aug.root_index) {
            ++count;  // the root is reached at time 0
            continue;
        }
        const Matrix& p = target == aug.exit_index ? absorbing : recurrent;
        std::vector<double> h = first_passage(p, target);
        if (h[aug.root_index] <= budget) ++count;
    }
    return count;
}

}  // namespace escaperoom
