// escaperoom: goal-graph walk analysis, world generation, scripted rollouts,
// correlation, and the environment protocol server in one binary.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "escaperoom/agents.hpp"
#include "escaperoom/errors.hpp"
#include "escaperoom/goal_graph.hpp"
#include "escaperoom/grid_world.hpp"
#include "escaperoom/metrics.hpp"
#include "escaperoom/protocol.hpp"
#include "escaperoom/rng.hpp"
#include "escaperoom/walk_analysis.hpp"

using namespace escaperoom;
using nlohmann::json;

namespace {

std::string fmt4(double v) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.4f", v);
    return buffer;
}

// "a..g", "a,c,g" or "acg" -> template letters
std::vector<char> parse_template_list(const std::string& spec) {
    std::vector<char> letters;
    auto push = [&](char c) {
        if (c < 'a' || c > 'g')
            throw std::invalid_argument(std::string("unknown template '") + c + "'");
        letters.push_back(c);
    };
    if (spec.find("..") != std::string::npos) {
        if (spec.size() != 4) throw std::invalid_argument("range must look like a..g");
        for (char c = spec[0]; c <= spec[3]; ++c) push(c);
        return letters;
    }
    for (char c : spec)
        if (c != ',' && c != ' ') push(c);
    if (letters.empty()) throw std::invalid_argument("empty template list");
    return letters;
}

std::uint64_t default_seed_from_env() {
    if (const char* env = std::getenv("ESCAPE_GRAPH_SEED"))
        return std::strtoull(env, nullptr, 10);
    return 0;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// Output goes to --out when given, stdout otherwise.
class OutputTarget {
public:
    explicit OutputTarget(const std::string& path) {
        if (!path.empty()) {
            file_.open(path, std::ios::trunc);
            if (!file_) throw Error("cannot write '" + path + "'");
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

private:
    std::ofstream file_;
};

struct CommonFlags {
    std::string format = "tsv";
    std::string out_path;
    std::uint64_t seed = default_seed_from_env();
};

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
    CommonFlags common;
    std::string templates = "a..g";
    std::string graph_path;
    bool drop_key = false;
    bool with_mc = false;
    long long walks = 200000;
    int workers = 4;
    WalkParams params;
};

struct AnalyzeRow {
    std::string name;
    int exit_depth = 0;
    int width = 0;
    double ht_nodrop = 0.0;
    double ht_drop = 0.0;
    std::optional<double> mc_mean;
    std::optional<double> mc_stderr;
};

int cmd_analyze(const AnalyzeArgs& args) {
    try {
        args.params.validate();
    } catch (const ValidationError& e) {
        // bad probability flags are usage errors, not runtime failures
        throw std::invalid_argument(e.what());
    }
    std::vector<std::pair<std::string, DependencyGraph>> graphs;
    if (!args.graph_path.empty()) {
        graphs.emplace_back("custom", parse_spec(read_file(args.graph_path)));
    } else {
        for (char letter : parse_template_list(args.templates))
            graphs.emplace_back(std::string(1, letter), load_template(letter));
    }

    std::vector<AnalyzeRow> rows;
    for (const auto& [name, graph] : graphs) {
        AnalyzeRow row;
        row.name = name;
        row.exit_depth = exit_depth(graph);
        row.width = graph_width(graph);
        AugmentedGraph plain = augment(graph, false);
        AugmentedGraph dropped = augment(graph, true);
        row.ht_nodrop = hitting_time_absorbing(plain, args.params).at_root(plain);
        row.ht_drop = hitting_time_absorbing(dropped, args.params).at_root(dropped);
        if (args.with_mc) {
            const AugmentedGraph& target = args.drop_key ? dropped : plain;
            HittingTimeReport mc = hitting_time_mc(target, args.params, args.walks,
                                                   args.common.seed, args.workers);
            row.mc_mean = mc.at_root(target);
            row.mc_stderr = mc.mc_stderr;
        }
        rows.push_back(row);
    }

    OutputTarget target(args.common.out_path);
    std::ostream& out = target.stream();
    if (args.common.format == "json") {
        json doc;
        doc["seed"] = args.common.seed;
        doc["params"] = {{"stay", args.params.stay},
                         {"advance", args.params.advance},
                         {"restart", args.params.restart}};
        doc["mc_variant"] = args.drop_key ? "drop" : "nodrop";
        doc["rows"] = json::array();
        for (const auto& r : rows) {
            json jr = {{"template", r.name},   {"exit_depth", r.exit_depth},
                       {"width", r.width},     {"ht_nodrop", r.ht_nodrop},
                       {"ht_drop", r.ht_drop}, {"mc_mean", nullptr},
                       {"mc_stderr", nullptr}};
            if (r.mc_mean) jr["mc_mean"] = *r.mc_mean;
            if (r.mc_stderr) jr["mc_stderr"] = *r.mc_stderr;
            doc["rows"].push_back(jr);
        }
        out << doc.dump(2) << "\n";
        return 0;
    }
    out << "# seed=" << args.common.seed << " stay=" << fmt4(args.params.stay)
        << " advance=" << fmt4(args.params.advance) << " restart=" << fmt4(args.params.restart)
        << " mc_variant=" << (args.drop_key ? "drop" : "nodrop") << "\n";
    out << "template\texit_depth\twidth\tht_nodrop\tht_drop\tmc_mean\tmc_stderr\n";
    for (const auto& r : rows) {
        out << r.name << '\t' << r.exit_depth << '\t' << r.width << '\t' << fmt4(r.ht_nodrop)
            << '\t' << fmt4(r.ht_drop) << '\t' << (r.mc_mean ? fmt4(*r.mc_mean) : "-") << '\t'
            << (r.mc_stderr ? fmt4(*r.mc_stderr) : "-") << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// gen

struct GenArgs {
    CommonFlags common;
    std::string template_letter = "a";
    std::string graph_path;
    std::string dump_path;
    bool drop_enabled = false;
    int room_size = 6;
    int max_steps = 1000;
};

int cmd_gen(const GenArgs& args) {
    EnvConfig cfg;
    if (!args.graph_path.empty()) {
        cfg.graph = parse_spec(read_file(args.graph_path));
        cfg.name = "custom";
    } else {
        if (args.template_letter.size() != 1)
            throw std::invalid_argument("template must be a single letter a..g");
        cfg = EnvConfig::from_template(args.template_letter[0], 0);
    }
    cfg.seed = args.common.seed;
    cfg.drop_enabled = args.drop_enabled;
    cfg.room_size = args.room_size;
    cfg.max_steps = args.max_steps;
    GridWorld world = GridWorld::generate(cfg);

    if (!args.dump_path.empty()) {
        std::ofstream dump(args.dump_path, std::ios::trunc);
        if (!dump) throw Error("cannot write '" + args.dump_path + "'");
        dump << world.to_world_json();
    }

    int keys = 0, doors = 0;
    for (int y = 0; y < world.height(); ++y)
        for (int x = 0; x < world.width(); ++x) {
            if (world.cell(x, y).object == ObjectId::key) ++keys;
            if (world.cell(x, y).object == ObjectId::door) ++doors;
        }

    OutputTarget target(args.common.out_path);
    std::ostream& out = target.stream();
    if (args.common.format == "json") {
        json doc = {{"name", cfg.name},
                    {"seed", cfg.seed},
                    {"rooms", world.rooms().size()},
                    {"keys", keys},
                    {"doors", doors},
                    {"width", world.width()},
                    {"height", world.height()}};
        out << doc.dump(2) << "\n";
    } else {
        out << "# seed=" << cfg.seed << "\n";
        out << "name\trooms\tkeys\tdoors\twidth\theight\n";
        out << cfg.name << '\t' << world.rooms().size() << '\t' << keys << '\t' << doors << '\t'
            << world.width() << '\t' << world.height() << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// rollout

struct RolloutArgs {
    CommonFlags common;
    std::string agent = "random";
    std::string template_letter = "a";
    std::string graph_path;
    std::string mode = "sparse";
    int episodes = 100;
    std::string trace_path;
    bool drop_enabled = false;
    int max_steps = 1000;
    int room_size = 6;
};

int cmd_rollout(const RolloutArgs& args) {
    auto mode = reward_mode_from_name(args.mode);
    if (!mode) throw CLI::ValidationError("--mode", "unknown mode '" + args.mode + "'");
    if (args.agent != "random" && args.agent != "oracle" && args.agent != "hippo-oracle")
        throw CLI::ValidationError("--agent", "unknown agent '" + args.agent + "'");
    if (args.agent == "hippo-oracle" && *mode != RewardMode::sparse)
        throw CLI::ValidationError(
            "--mode", "hippo-oracle runs its own reward routing; use --mode sparse");

    EnvConfig cfg;
    if (!args.graph_path.empty()) {
        cfg.graph = parse_spec(read_file(args.graph_path));
        cfg.name = "custom";
    } else {
        if (args.template_letter.size() != 1)
            throw std::invalid_argument("template must be a single letter a..g");
        cfg = EnvConfig::from_template(args.template_letter[0], 0);
    }
    cfg.seed = args.common.seed;
    cfg.drop_enabled = args.drop_enabled;
    cfg.max_steps = args.max_steps;
    cfg.room_size = args.room_size;

    GridWorld env = GridWorld::generate(cfg);
    std::unique_ptr<Policy> policy;
    std::unique_ptr<MetaController> meta;
    if (args.agent == "random") policy = make_random_policy(args.common.seed);
    if (args.agent == "oracle") policy = make_oracle_controller(args.common.seed);
    if (args.agent == "hippo-oracle") {
        policy = make_oracle_controller(args.common.seed);
        meta = make_dfs_meta(args.common.seed);
    }

    std::vector<EpisodeTrace> traces;
    traces.reserve(static_cast<std::size_t>(args.episodes));
    for (int ep = 0; ep < args.episodes; ++ep) {
        if (ep > 0) env.reset();
        EpisodeTrace trace;
        if (meta) {
            HippoResult result = run_hippo_episode(env, *meta, *policy, default_critic());
            trace = std::move(result.trace);
        } else if (*mode == RewardMode::sketch) {
            auto sketch = dfs_goal_sequence(
                cfg.graph, episode_seed(args.common.seed, static_cast<std::uint64_t>(ep)));
            trace = run_flat_episode(env, *policy, *mode, &sketch);
        } else {
            trace = run_flat_episode(env, *policy, *mode);
        }
        trace.agent = args.agent;
        traces.push_back(std::move(trace));
    }

    if (!args.trace_path.empty()) {
        std::ofstream sink(args.trace_path, std::ios::trunc);
        if (!sink) throw Error("cannot write '" + args.trace_path + "'");
        for (const auto& t : traces) sink << t.to_json_line() << '\n';
    }

    MetricsSummary summary = summarize(traces);
    OutputTarget target(args.common.out_path);
    std::ostream& out = target.stream();
    if (args.common.format == "json") {
        json doc;
        doc["agent"] = args.agent;
        doc["template"] = cfg.name;
        doc["mode"] = args.mode;
        doc["episodes"] = summary.episodes;
        doc["seed"] = args.common.seed;
        doc["success_rate_pct"] = summary.success_rate * 100.0;
        doc["avg_episode_length_pct"] = summary.avg_episode_length_pct;
        doc["per_goal"] = json::object();
        for (const auto& [goal, stat] : summary.per_goal)
            doc["per_goal"][goal] = {{"mean_timestep", stat.mean_timestep},
                                     {"achieved", stat.achieved}};
        out << doc.dump(2) << "\n";
        return 0;
    }
    out << "# agent=" << args.agent << " template=" << cfg.name << " mode=" << args.mode
        << " episodes=" << summary.episodes << " seed=" << args.common.seed << "\n";
    out << "metric\tvalue\n";
    out << "success_rate_pct\t" << fmt4(summary.success_rate * 100.0) << "\n";
    out << "avg_episode_length_pct\t" << fmt4(summary.avg_episode_length_pct) << "\n";
    out << "goal\tmean_timestep\tachieved\n";
    for (const auto& [goal, stat] : summary.per_goal)
        out << goal << '\t' << fmt4(stat.mean_timestep) << '\t' << stat.achieved << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// correlate

struct CorrelateArgs {
    CommonFlags common;
    std::string x_spec;
    std::string y_spec;
};

std::vector<double> read_column(const std::string& spec) {
    auto colon = spec.rfind(':');
    if (colon == std::string::npos || colon + 1 == spec.size())
        throw std::invalid_argument("column spec must look like FILE:COLUMN");
    const std::string path = spec.substr(0, colon);
    const std::string column = spec.substr(colon + 1);
    std::ifstream in(path);
    if (!in) throw Error("cannot read '" + path + "'");
    std::string line;
    int column_index = -1;
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream row(line);
        std::string field;
        while (std::getline(row, field, '\t')) fields.push_back(field);
        if (column_index < 0) {
            for (std::size_t i = 0; i < fields.size(); ++i)
                if (fields[i] == column) column_index = static_cast<int>(i);
            if (column_index < 0)
                throw Error("no column '" + column + "' in '" + path + "'");
            continue;
        }
        if (column_index >= static_cast<int>(fields.size())) continue;
        try {
            values.push_back(std::stod(fields[column_index]));
        } catch (const std::exception&) {
            throw Error("non-numeric value '" + fields[column_index] + "' in column '" +
                        column + "'");
        }
    }
    return values;
}

int cmd_correlate(const CorrelateArgs& args) {
    std::vector<double> xs = read_column(args.x_spec);
    std::vector<double> ys = read_column(args.y_spec);
    double r;
    try {
        r = pearson(xs, ys);
    } catch (const std::invalid_argument& e) {
        // bad data files are runtime failures, not flag misuse
        throw Error(e.what());
    }
    OutputTarget target(args.common.out_path);
    if (args.common.format == "json")
        target.stream() << json{{"pearson_r", r}, {"n", xs.size()}}.dump() << "\n";
    else
        target.stream() << fmt4(r) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EscapeRoom gridworlds and goal-graph exploration complexity"};
    app.require_subcommand(1);

    auto add_common = [](CLI::App* cmd, CommonFlags& flags) {
        cmd->add_option("--format", flags.format, "output format")
            ->check(CLI::IsMember({"tsv", "json"}));
        cmd->add_option("--out", flags.out_path, "write output to a file instead of stdout");
        cmd->add_option("--seed", flags.seed,
                        "random seed (falls back to ESCAPE_GRAPH_SEED, then 0)");
    };

    AnalyzeArgs analyze;
    CLI::App* analyze_cmd =
        app.add_subcommand("analyze", "hitting-time complexity table for goal graphs");
    add_common(analyze_cmd, analyze.common);
    analyze_cmd->add_option("--templates", analyze.templates, "letters, list, or a..g range");
    analyze_cmd->add_option("--graph", analyze.graph_path, "analyze a .goalgraph.json file");
    analyze_cmd->add_flag("--drop-key", analyze.drop_key,
                          "Monte-Carlo column targets the drop-key walk");
    analyze_cmd->add_flag("--mc", analyze.with_mc, "add Monte-Carlo validation columns");
    analyze_cmd->add_option("--walks", analyze.walks, "Monte-Carlo walk count")
        ->check(CLI::PositiveNumber);
    analyze_cmd->add_option("--workers", analyze.workers, "Monte-Carlo worker threads")
        ->check(CLI::PositiveNumber);
    analyze_cmd->add_option("--stay", analyze.params.stay, "stay probability");
    analyze_cmd->add_option("--advance", analyze.params.advance, "advance probability");
    analyze_cmd->add_option("--restart", analyze.params.restart, "restart probability");

    GenArgs gen;
    CLI::App* gen_cmd = app.add_subcommand("gen", "generate a world and summarize or dump it");
    add_common(gen_cmd, gen.common);
    gen_cmd->add_option("--template", gen.template_letter, "template letter a..g");
    gen_cmd->add_option("--graph", gen.graph_path, "generate from a .goalgraph.json file");
    gen_cmd->add_option("--dump", gen.dump_path, "write the full world file here");
    gen_cmd->add_flag("--drop", gen.drop_enabled, "enable the drop action");
    gen_cmd->add_option("--room-size", gen.room_size, "interior cells per room side")
        ->check(CLI::Range(3, 32));
    gen_cmd->add_option("--max-steps", gen.max_steps, "episode step cap")
        ->check(CLI::PositiveNumber);

    RolloutArgs rollout;
    CLI::App* rollout_cmd =
        app.add_subcommand("rollout", "run scripted agents and print the metrics summary");
    rollout_cmd->add_option("--format", rollout.common.format, "summary format")
        ->check(CLI::IsMember({"tsv", "json"}));
    rollout_cmd->add_option("--seed", rollout.common.seed,
                            "random seed (falls back to ESCAPE_GRAPH_SEED, then 0)");
    rollout_cmd->add_option("--agent", rollout.agent, "random | oracle | hippo-oracle");
    rollout_cmd->add_option("--template", rollout.template_letter, "template letter a..g");
    rollout_cmd->add_option("--graph", rollout.graph_path, "roll out a custom graph file");
    rollout_cmd->add_option("--mode", rollout.mode, "sparse | bonus | sketch");
    rollout_cmd->add_option("--episodes", rollout.episodes, "episode count")
        ->check(CLI::PositiveNumber);
    rollout_cmd->add_option("--out", rollout.trace_path,
                            "write one trace per line (.traces.jsonl)");
    rollout_cmd->add_flag("--drop", rollout.drop_enabled, "enable the drop action");
    rollout_cmd->add_option("--max-steps", rollout.max_steps, "episode step cap")
        ->check(CLI::PositiveNumber);
    rollout_cmd->add_option("--room-size", rollout.room_size, "interior cells per room side")
        ->check(CLI::Range(3, 32));

    CorrelateArgs correlate;
    CLI::App* correlate_cmd =
        app.add_subcommand("correlate", "Pearson r between two TSV columns");
    add_common(correlate_cmd, correlate.common);
    correlate_cmd->add_option("--x", correlate.x_spec, "FILE:COLUMN")->required();
    correlate_cmd->add_option("--y", correlate.y_spec, "FILE:COLUMN")->required();

    ServerOptions serve_opts;
    CLI::App* serve_cmd =
        app.add_subcommand("serve", "serve environments over the line protocol");
    serve_cmd->add_option("--port", serve_opts.port, "TCP port (default 7341)");
    serve_cmd->add_flag("--stdio", serve_opts.stdio, "serve one session on stdin/stdout");
    serve_cmd->add_option("--seed", serve_opts.default_seed, "default seed for resets");
    serve_cmd->add_flag("--drop", serve_opts.drop_enabled, "enable the drop action");
    serve_cmd->add_option("--max-steps", serve_opts.max_steps, "episode step cap")
        ->check(CLI::PositiveNumber);
    serve_cmd->add_option("--trace", serve_opts.trace_path, "append finished episodes here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (analyze_cmd->parsed()) return cmd_analyze(analyze);
        if (gen_cmd->parsed()) return cmd_gen(gen);
        if (rollout_cmd->parsed()) return cmd_rollout(rollout);
        if (correlate_cmd->parsed()) return cmd_correlate(correlate);
        if (serve_cmd->parsed()) return serve_blocking(serve_opts);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
