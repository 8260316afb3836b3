#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "escaperoom/agents.hpp"
#include "escaperoom/errors.hpp"
#include "escaperoom/goal_graph.hpp"
#include "escaperoom/grid_world.hpp"
#include "escaperoom/metrics.hpp"
#include "escaperoom/rng.hpp"
#include "escaperoom/walk_analysis.hpp"

namespace py = pybind11;
using namespace escaperoom;

namespace {

std::vector<std::vector<std::vector<int>>> obs_to_lists(const Observation& obs) {
    std::vector<std::vector<std::vector<int>>> rows;
    for (const auto& row : obs.data) {
        std::vector<std::vector<int>> cells;
        for (const auto& cell : row) cells.push_back({cell[0], cell[1], cell[2]});
        rows.push_back(std::move(cells));
    }
    return rows;
}

py::dict event_to_dict(const GoalEvent& e) {
    py::dict d;
    d["kind"] = std::string(goal_event_kind_name(e.kind));
    d["color"] = std::string(color_name(e.color));
    d["t"] = e.timestep;
    d["goal"] = e.goal_key();
    return d;
}

py::dict report_to_dict(const HittingTimeReport& report, const AugmentedGraph& aug) {
    py::dict d;
    d["values"] = report.values;
    d["root"] = report.at_root(aug);
    switch (report.method) {
        case HtMethod::absorbing: d["method"] = "absorbing"; break;
        case HtMethod::laplacian: d["method"] = "laplacian"; break;
        case HtMethod::monte_carlo: d["method"] = "monte_carlo"; break;
    }
    if (report.method == HtMethod::monte_carlo) {
        d["stderr"] = report.mc_stderr;
        d["walks"] = report.walks;
    }
    return d;
}

WalkParams params_from(double stay, double advance, double restart) {
    WalkParams params{stay, advance, restart};
    params.validate();
    return params;
}

py::dict trace_to_dict(const EpisodeTrace& trace) {
    py::dict d;
    d["config"] = trace.config_name;
    d["seed"] = trace.seed;
    d["episode"] = trace.episode;
    d["agent"] = trace.agent;
    d["mode"] = trace.mode;
    d["length"] = trace.length;
    d["success"] = trace.success;
    d["truncated"] = trace.truncated;
    py::list events;
    for (const auto& e : trace.events) events.append(event_to_dict(e));
    d["events"] = std::move(events);
    d["json"] = trace.to_json_line();
    return d;
}

// Owns the environment plus optional scripted drivers, so Python can both
// drive primitive steps and launch whole scripted episodes.
class PyEscapeRoom {
public:
    PyEscapeRoom(const std::string& template_or_graph, std::uint64_t seed, int max_steps,
                 bool drop_enabled, int room_size) {
        EnvConfig cfg;
        if (template_or_graph.size() == 1) {
            cfg = EnvConfig::from_template(template_or_graph[0], seed);
        } else {
            cfg.graph = parse_spec(template_or_graph);
            cfg.name = "custom";
        }
        cfg.seed = seed;
        cfg.max_steps = max_steps;
        cfg.drop_enabled = drop_enabled;
        cfg.room_size = room_size;
        env_ = std::make_unique<GridWorld>(GridWorld::generate(cfg));
    }

    py::object reset(std::optional<std::uint64_t> episode_seed) {
        Observation obs =
            episode_seed ? env_->reset(*episode_seed) : env_->reset();
        return py::cast(obs_to_lists(obs));
    }

    py::tuple step(int action) {
        StepResult r = env_->step(static_cast<Action>(action));
        py::list events;
        for (const auto& e : r.events) events.append(event_to_dict(e));
        return py::make_tuple(obs_to_lists(r.obs), r.reward, r.done, r.truncated, events);
    }

    py::object observe() const { return py::cast(obs_to_lists(env_->observe())); }

    int action_count() const {
        return env_->config().drop_enabled ? kBaseActionCount + 1 : kBaseActionCount;
    }
    int steps() const { return env_->steps(); }
    bool done() const { return env_->done(); }
    bool truncated() const { return env_->truncated(); }
    int episode() const { return env_->episode_index(); }
    std::string world_json() const { return env_->to_world_json(); }
    std::string graph_json() const { return serialize_spec(env_->config().graph); }

    GridWorld& world() { return *env_; }

private:
    std::unique_ptr<GridWorld> env_;
};

py::dict summary_to_dict(const MetricsSummary& summary) {
    py::dict d;
    d["episodes"] = summary.episodes;
    d["success_rate"] = summary.success_rate;
    d["avg_episode_length_pct"] = summary.avg_episode_length_pct;
    py::dict goals;
    for (const auto& [goal, stat] : summary.per_goal) {
        py::dict gs;
        gs["mean_timestep"] = stat.mean_timestep;
        gs["achieved"] = stat.achieved;
        goals[py::str(goal)] = std::move(gs);
    }
    d["per_goal"] = std::move(goals);
    return d;
}

py::tuple rollout(const std::string& agent, const std::string& template_or_graph, int episodes,
                  const std::string& mode_name, std::uint64_t seed, bool drop_enabled,
                  int max_steps, int room_size) {
    if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
    auto mode = reward_mode_from_name(mode_name);
    if (!mode) throw std::invalid_argument("unknown mode '" + mode_name + "'");

    PyEscapeRoom wrapper(template_or_graph, seed, max_steps, drop_enabled, room_size);
    GridWorld& env = wrapper.world();
    std::unique_ptr<Policy> policy;
    std::unique_ptr<MetaController> meta;
    if (agent == "random") {
        policy = make_random_policy(seed);
    } else if (agent == "oracle") {
        policy = make_oracle_controller(seed);
    } else if (agent == "hippo-oracle") {
        policy = make_oracle_controller(seed);
        meta = make_dfs_meta(seed);
        if (*mode != RewardMode::sparse)
            throw std::invalid_argument("hippo-oracle supports sparse mode only");
    } else {
        throw std::invalid_argument("unknown agent '" + agent + "'");
    }

    std::vector<EpisodeTrace> traces;
    for (int ep = 0; ep < episodes; ++ep) {
        if (ep > 0) env.reset();
        EpisodeTrace trace;
        if (meta) {
            trace = run_hippo_episode(env, *meta, *policy, default_critic()).trace;
        } else if (*mode == RewardMode::sketch) {
            auto sketch = dfs_goal_sequence(env.config().graph,
                                            episode_seed(seed, static_cast<std::uint64_t>(ep)));
            trace = run_flat_episode(env, *policy, *mode, &sketch);
        } else {
            trace = run_flat_episode(env, *policy, *mode);
        }
        trace.agent = agent;
        traces.push_back(std::move(trace));
    }
    MetricsSummary summary = summarize(traces);
    py::list trace_list;
    for (const auto& t : traces) trace_list.append(trace_to_dict(t));
    return py::make_tuple(summary_to_dict(summary), trace_list);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "EscapeRoom gridworlds and goal-graph walk analysis";
    m.attr("__version__") = "0.1.0";
    m.attr("TEMPLATES") = std::vector<std::string>{"a", "b", "c", "d", "e", "f", "g"};

    py::register_exception<ParseError>(m, "GraphParseError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "GraphValidationError", PyExc_ValueError);
    py::register_exception<GenerationError>(m, "WorldGenerationError", PyExc_RuntimeError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_RuntimeError);

    py::class_<DependencyGraph>(m, "Graph")
        .def_static("from_template",
                    [](const std::string& letter) {
                        if (letter.size() != 1)
                            throw std::invalid_argument("template letter must be a..g");
                        return load_template(letter[0]);
                    },
                    py::arg("letter"))
        .def_static("parse", &parse_spec, py::arg("text"))
        .def("serialize", &serialize_spec)
        .def_property_readonly("exit_depth", &exit_depth)
        .def_property_readonly("width", &graph_width)
        .def_property_readonly("node_ids",
                               [](const DependencyGraph& g) {
                                   std::vector<std::string> ids;
                                   for (const auto& n : g.nodes) ids.push_back(n.id);
                                   return ids;
                               })
        .def("dfs_goal_sequence",
             [](const DependencyGraph& g, std::uint64_t seed) {
                 return dfs_goal_sequence(g, seed);
             },
             py::arg("seed") = 0)
        .def("__eq__", [](const DependencyGraph& a, const DependencyGraph& b) { return a == b; })
        .def("__repr__", [](const DependencyGraph& g) {
            return "<escaperoom.Graph nodes=" + std::to_string(g.nodes.size()) + ">";
        });

    m.def("load_template",
          [](const std::string& letter) {
              if (letter.size() != 1) throw std::invalid_argument("template letter must be a..g");
              return load_template(letter[0]);
          },
          py::arg("letter"));
    m.def("parse_graph", &parse_spec, py::arg("text"));
    m.def("serialize_graph", &serialize_spec, py::arg("graph"));
    m.def("exit_depth", &exit_depth, py::arg("graph"));
    m.def("graph_width", &graph_width, py::arg("graph"));
    m.def("encode_goal",
          [](const std::string& kind, const std::string& color) {
              NodeKind k;
              if (kind == "key")
                  k = NodeKind::key;
              else if (kind == "door" || kind == "room")
                  k = NodeKind::room;
              else if (kind == "exit")
                  k = NodeKind::exit;
              else
                  throw std::invalid_argument("goal kind must be key, door, or exit");
              Color c = Color::none;
              if (!color.empty() && color != "none") {
                  auto parsed = color_from_name(color);
                  if (!parsed) throw std::invalid_argument("unknown color '" + color + "'");
                  c = *parsed;
              }
              GoalEncoding enc = encode_goal(k, c);
              return std::vector<int>(enc.begin(), enc.end());
          },
          py::arg("kind"), py::arg("color") = "none");

    py::class_<AugmentedGraph>(m, "AugmentedGraph")
        .def_property_readonly("n", &AugmentedGraph::n)
        .def_readonly("root_index", &AugmentedGraph::root_index)
        .def_readonly("exit_index", &AugmentedGraph::exit_index)
        .def_property_readonly("labels",
                               [](const AugmentedGraph& aug) {
                                   std::vector<std::string> labels;
                                   for (const auto& s : aug.states) labels.push_back(s.label());
                                   return labels;
                               })
        .def_readonly("edges", &AugmentedGraph::edges)
        .def("__repr__", [](const AugmentedGraph& aug) {
            return "<escaperoom.AugmentedGraph n=" + std::to_string(aug.n()) + ">";
        });

    m.def("augment",
          [](const DependencyGraph& g, bool drop_key) { return augment(g, drop_key); },
          py::arg("graph"), py::arg("drop_key") = false);

    m.def("transition_matrix",
          [](const AugmentedGraph& aug, double stay, double advance, double restart) {
              Matrix p = transition_matrix(aug, params_from(stay, advance, restart));
              std::vector<std::vector<double>> rows;
              for (int i = 0; i < p.rows(); ++i) {
                  std::vector<double> row;
                  for (int j = 0; j < p.cols(); ++j) row.push_back(p(i, j));
                  rows.push_back(std::move(row));
              }
              return rows;
          },
          py::arg("aug"), py::arg("stay") = 0.80, py::arg("advance") = 0.19,
          py::arg("restart") = 0.01);

    m.def("hitting_time",
          [](const AugmentedGraph& aug, double stay, double advance, double restart,
             bool count_stay_steps) {
              return report_to_dict(
                  hitting_time_absorbing(aug, params_from(stay, advance, restart),
                                         count_stay_steps),
                  aug);
          },
          py::arg("aug"), py::arg("stay") = 0.80, py::arg("advance") = 0.19,
          py::arg("restart") = 0.01, py::arg("count_stay_steps") = true);

    m.def("hitting_time_mc",
          [](const AugmentedGraph& aug, long long walks, std::uint64_t seed, int workers,
             double stay, double advance, double restart) {
              return report_to_dict(
                  hitting_time_mc(aug, params_from(stay, advance, restart), walks, seed,
                                  workers),
                  aug);
          },
          py::arg("aug"), py::arg("walks") = 200000, py::arg("seed") = 0,
          py::arg("workers") = 1, py::arg("stay") = 0.80, py::arg("advance") = 0.19,
          py::arg("restart") = 0.01);

    m.def("grounded_laplacian_solve",
          [](const AugmentedGraph& aug, int s, int t, double stay, double advance,
             double restart) {
              return report_to_dict(
                  grounded_laplacian_solve(aug, params_from(stay, advance, restart), s, t), aug);
          },
          py::arg("aug"), py::arg("s"), py::arg("t"), py::arg("stay") = 0.80,
          py::arg("advance") = 0.19, py::arg("restart") = 0.01);

    m.def("expected_reachable",
          [](const AugmentedGraph& aug, double budget, double stay, double advance,
             double restart) {
              return expected_reachable(aug, params_from(stay, advance, restart), budget);
          },
          py::arg("aug"), py::arg("budget"), py::arg("stay") = 0.80, py::arg("advance") = 0.19,
          py::arg("restart") = 0.01);

    m.def("ht_table",
          [](const std::string& templates, bool drop_key, double stay, double advance,
             double restart) {
              std::vector<char> letters;
              for (char c : templates)
                  if (c != ',' && c != ' ') letters.push_back(c);
              auto rows = ht_table(letters, drop_key, params_from(stay, advance, restart));
              py::list out;
              for (const auto& r : rows) {
                  py::dict d;
                  d["template"] = r.name;
                  d["exit_depth"] = r.exit_depth;
                  d["width"] = r.width;
                  d["hitting_time"] = r.hitting_time;
                  out.append(std::move(d));
              }
              return out;
          },
          py::arg("templates") = "abcdefg", py::arg("drop_key") = false, py::arg("stay") = 0.80,
          py::arg("advance") = 0.19, py::arg("restart") = 0.01);

    py::class_<PyEscapeRoom>(m, "EscapeRoom")
        .def(py::init<const std::string&, std::uint64_t, int, bool, int>(),
             py::arg("template") = "a", py::arg("seed") = 0, py::arg("max_steps") = 1000,
             py::arg("drop_enabled") = false, py::arg("room_size") = 6,
             "Template letter a..g or a full .goalgraph.json document")
        .def("reset", &PyEscapeRoom::reset, py::arg("episode_seed") = std::nullopt)
        .def("step", &PyEscapeRoom::step, py::arg("action"))
        .def("observe", &PyEscapeRoom::observe)
        .def_property_readonly("action_count", &PyEscapeRoom::action_count)
        .def_property_readonly("steps", &PyEscapeRoom::steps)
        .def_property_readonly("done", &PyEscapeRoom::done)
        .def_property_readonly("truncated", &PyEscapeRoom::truncated)
        .def_property_readonly("episode", &PyEscapeRoom::episode)
        .def("world_json", &PyEscapeRoom::world_json)
        .def("graph_json", &PyEscapeRoom::graph_json);

    m.def("rollout", &rollout, py::arg("agent") = "random", py::arg("template") = "a",
          py::arg("episodes") = 100, py::arg("mode") = "sparse", py::arg("seed") = 0,
          py::arg("drop_enabled") = false, py::arg("max_steps") = 1000,
          py::arg("room_size") = 6);

    m.def("pearson",
          [](const std::vector<double>& xs, const std::vector<double>& ys) {
              return pearson(xs, ys);
          },
          py::arg("xs"), py::arg("ys"));
}
