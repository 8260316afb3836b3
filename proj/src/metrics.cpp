#include "escaperoom/metrics.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "escaperoom/errors.hpp"

namespace escaperoom {

using nlohmann::json;

std::string EpisodeTrace::to_json_line() const {
    json doc;
    doc["config"] = config_name;
    doc["seed"] = seed;
    doc["episode"] = episode;
    doc["max_steps"] = max_steps;
    doc["agent"] = agent;
    doc["mode"] = mode;
    json steps_json = json::array();
    for (const auto& s : steps) {
        json js = json::array({s.action, s.extrinsic, s.intrinsic, s.goal});
        steps_json.push_back(std::move(js));
    }
    doc["steps"] = std::move(steps_json);
    json events_json = json::array();
    for (const auto& e : events)
        events_json.push_back({{"kind", std::string(goal_event_kind_name(e.kind))},
                               {"color", std::string(color_name(e.color))},
                               {"t", e.timestep}});
    doc["events"] = std::move(events_json);
    doc["length"] = length;
    doc["success"] = success;
    doc["truncated"] = truncated;
    return doc.dump();
}

EpisodeTrace EpisodeTrace::from_json_line(const std::string& line) {
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("trace line: ") + e.what());
    }
    try {
        EpisodeTrace t;
        t.config_name = doc.at("config").get<std::string>();
        t.seed = doc.at("seed").get<std::uint64_t>();
        t.episode = doc.at("episode").get<int>();
        t.max_steps = doc.at("max_steps").get<int>();
        t.agent = doc.at("agent").get<std::string>();
        t.mode = doc.at("mode").get<std::string>();
        for (const auto& js : doc.at("steps"))
            t.steps.push_back({js.at(0).get<int>(), js.at(1).get<double>(),
                               js.at(2).get<double>(), js.at(3).get<std::string>()});
        for (const auto& je : doc.at("events")) {
            GoalEvent e;
            const std::string kind = je.at("kind").get<std::string>();
            if (kind == "key_picked")
                e.kind = GoalEvent::Kind::key_picked;
            else if (kind == "door_opened")
                e.kind = GoalEvent::Kind::door_opened;
            else if (kind == "exit_reached")
                e.kind = GoalEvent::Kind::exit_reached;
            else
                throw ValidationError("unknown event kind '" + kind + "'");
            auto color = color_from_name(je.at("color").get<std::string>());
            if (!color) throw ValidationError("unknown event color");
            e.color = *color;
            e.timestep = je.at("t").get<int>();
            t.events.push_back(e);
        }
        t.length = doc.at("length").get<int>();
        t.success = doc.at("success").get<bool>();
        t.truncated = doc.at("truncated").get<bool>();
        return t;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("trace line: ") + e.what());
    }
}

std::vector<GoalEvent> detect_events(const GridWorld& before, Action action,
                                     const GridWorld& after) {
    if (after.steps() != before.steps() + 1)
        throw ContractViolation("snapshots are not one step apart");
    if (before.width() != after.width() || before.height() != after.height())
        throw ContractViolation("snapshots come from different worlds");

    std::vector<GoalEvent> events;
    const int t = after.steps();
    if (before.carried() == Color::none && after.carried() != Color::none)
        events.push_back({GoalEvent::Kind::key_picked, after.carried(), t});
    for (int y = 0; y < before.height(); ++y)
        for (int x = 0; x < before.width(); ++x) {
            const Cell& b = before.cell(x, y);
            const Cell& a = after.cell(x, y);
            if (b.object == ObjectId::door && !b.open && a.open)
                events.push_back({GoalEvent::Kind::door_opened, a.color, t});
        }
    if (!before.done() && after.done() &&
        after.cell(after.agent_x(), after.agent_y()).object == ObjectId::exit)
        events.push_back({GoalEvent::Kind::exit_reached, Color::none, t});

    // cheap cross-checks that `after` really is a successor
    if (action == Action::turn_left || action == Action::turn_right) {
        if (!events.empty() || after.agent_x() != before.agent_x() ||
            after.agent_y() != before.agent_y())
            throw ContractViolation("turn steps cannot move or achieve goals");
    }
    return events;
}

MetricsSummary summarize(const std::vector<EpisodeTrace>& traces) {
    if (traces.empty()) throw std::invalid_argument("summarize needs at least one trace");
    for (const auto& trace : traces)
        if (trace.config_name != traces.front().config_name)
            throw std::invalid_argument("summarize mixes traces from different configs ('" +
                                        traces.front().config_name + "' vs '" +
                                        trace.config_name + "')");
    MetricsSummary summary;
    summary.episodes = static_cast<int>(traces.size());
    double successes = 0.0, length_sum = 0.0;
    std::map<std::string, std::pair<double, int>> first_steps;  // goal -> (sum, count)
    for (const auto& trace : traces) {
        if (trace.success) successes += 1.0;
        if (trace.max_steps <= 0) throw std::invalid_argument("trace lacks max_steps");
        length_sum += 100.0 * trace.length / trace.max_steps;
        std::map<std::string, int> first;
        for (const auto& event : trace.events) {
            auto [it, fresh] = first.try_emplace(event.goal_key(), event.timestep);
            if (!fresh) it->second = std::min(it->second, event.timestep);
        }
        for (const auto& [goal, step] : first) {
            auto& [sum, count] = first_steps[goal];
            sum += step;
            count += 1;
        }
    }
    summary.success_rate = successes / summary.episodes;
    summary.avg_episode_length_pct = length_sum / summary.episodes;
    for (const auto& [goal, stat] : first_steps)
        summary.per_goal[goal] = {stat.first / stat.second, stat.second};
    return summary;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size())
        throw std::invalid_argument("pearson needs columns of equal length");
    const std::size_t n = xs.size();
    if (n < 2) throw std::invalid_argument("pearson needs at least two samples");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw ValidationError("pearson is undefined for a constant column");
    return sxy / std::sqrt(sxx * syy);
}

void append_traces(const std::string& path, const std::vector<EpisodeTrace>& traces) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw Error("cannot open trace log '" + path + "' for append");
    for (const auto& trace : traces) out << trace.to_json_line() << '\n';
}

std::vector<EpisodeTrace> read_traces(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open trace log '" + path + "'");
    std::vector<EpisodeTrace> traces;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        traces.push_back(EpisodeTrace::from_json_line(line));
    }
    return traces;
}

}  // namespace escaperoom
