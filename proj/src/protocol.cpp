#include "escaperoom/protocol.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstring>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

#include <json.hpp>

#include "escaperoom/errors.hpp"
#include "escaperoom/metrics.hpp"

namespace escaperoom {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Trace sink: line-atomic appends shared by all sessions.

class TraceSink {
public:
    explicit TraceSink(std::string path) : path_(std::move(path)) {}

    void append(const EpisodeTrace& trace) {
        std::lock_guard<std::mutex> lock(mutex_);
        std::ofstream out(path_, std::ios::app);
        if (out) out << trace.to_json_line() << '\n';
    }

private:
    std::string path_;
    std::mutex mutex_;
};

// Accumulates the wire-driven episode for the trace log.
class EpisodeRecorder {
public:
    EpisodeRecorder(const GridWorld& env, std::string agent) {
        trace_.config_name = env.config().name;
        trace_.seed = env.config().seed;
        trace_.episode = env.episode_index();
        trace_.max_steps = env.config().max_steps;
        trace_.agent = std::move(agent);
        trace_.mode = "sparse";
    }

    void record(const StepResult& result, int action) {
        trace_.steps.push_back({action, result.reward, 0.0, ""});
        for (const auto& e : result.events) trace_.events.push_back(e);
    }

    EpisodeTrace finish(const GridWorld& env) {
        trace_.length = env.steps();
        trace_.success = env.done();
        trace_.truncated = env.truncated();
        return trace_;
    }

private:
    EpisodeTrace trace_;
};

namespace {

json observation_json(const Observation& obs) {
    json rows = json::array();
    for (const auto& row : obs.data) {
        json cells = json::array();
        for (const auto& cell : row) cells.push_back(json::array({cell[0], cell[1], cell[2]}));
        rows.push_back(std::move(cells));
    }
    return rows;
}

json events_json(const std::vector<GoalEvent>& events) {
    json out = json::array();
    for (const auto& e : events)
        out.push_back({{"kind", std::string(goal_event_kind_name(e.kind))},
                       {"color", std::string(color_name(e.color))},
                       {"t", e.timestep}});
    return out;
}

std::string error_line(const std::string& code, const std::string& detail = "") {
    json doc;
    doc["ok"] = false;
    doc["error"] = code;
    if (!detail.empty()) doc["detail"] = detail;
    return doc.dump();
}

}  // namespace

// Parsed request wrapper so Session methods stay tidy.
class SessionRequest {
public:
    explicit SessionRequest(json doc) : doc_(std::move(doc)) {}
    const json& body() const { return doc_; }

private:
    json doc_;
};

Session::Session(const ServerOptions& options, std::shared_ptr<TraceSink> sink)
    : options_(options), sink_(std::move(sink)) {}

Session::~Session() { flush_episode(); }

std::string Session::handle_line(const std::string& line) {
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("cmd") ||
        !doc.at("cmd").is_string())
        return error_line("parse");
    const std::string cmd = doc.at("cmd").get<std::string>();
    SessionRequest request(std::move(doc));
    try {
        if (cmd == "hello") return cmd_hello();
        if (cmd == "reset") return cmd_reset(request);
        if (cmd == "step") return cmd_step(request);
        if (cmd == "observe") return cmd_observe();
        if (cmd == "close") return cmd_close();
    } catch (const json::exception& e) {
        return error_line("bad-request", e.what());
    } catch (const Error& e) {
        return error_line("bad-request", e.what());
    } catch (const std::invalid_argument& e) {
        return error_line("bad-request", e.what());
    }
    return error_line("unknown-cmd", cmd);
}

std::string Session::cmd_hello() {
    json actions = json::array();
    const int count = options_.drop_enabled ? kBaseActionCount + 1 : kBaseActionCount;
    for (int a = 0; a < count; ++a) actions.push_back(a);
    json doc;
    doc["ok"] = true;
    doc["protocol"] = kProtocolVersion;
    doc["actions"] = std::move(actions);
    return doc.dump();
}

std::string Session::cmd_reset(const SessionRequest& request) {
    const json& body = request.body();
    const bool fresh = body.contains("template") || body.contains("graph") ||
                       body.contains("seed") || body.contains("max_steps") ||
                       body.contains("drop") || body.contains("room_size") || !env_;
    flush_episode();
    if (fresh) {
        EnvConfig cfg;
        if (body.contains("graph")) {
            cfg.graph = parse_spec(body.at("graph").dump());
            cfg.name = "custom";
        } else {
            const std::string tmpl = body.value("template", std::string("a"));
            if (tmpl.size() != 1) return error_line("bad-request", "unknown template");
            cfg.graph = load_template(tmpl[0]);
            cfg.name = tmpl;
        }
        cfg.seed = body.value("seed", options_.default_seed);
        cfg.max_steps = body.value("max_steps", options_.max_steps);
        cfg.drop_enabled = body.value("drop", options_.drop_enabled);
        cfg.room_size = body.value("room_size", options_.room_size);
        env_ = std::make_unique<GridWorld>(GridWorld::generate(cfg));
    } else {
        env_->reset();
    }
    recorder_ = std::make_unique<EpisodeRecorder>(*env_, "external");
    json doc;
    doc["ok"] = true;
    doc["obs"] = observation_json(env_->observe());
    return doc.dump();
}

std::string Session::cmd_step(const SessionRequest& request) {
    if (!env_) return error_line("no-episode");
    if (env_->episode_over()) return error_line("episode-over");
    const json& body = request.body();
    if (!body.contains("action") || !body.at("action").is_number_integer())
        return error_line("bad-action", "missing integer action");
    const int code = body.at("action").get<int>();
    StepResult result;
    try {
        result = env_->step(static_cast<Action>(code));
    } catch (const std::invalid_argument& e) {
        return error_line("bad-action", e.what());
    }
    record_step(result, code);
    json doc;
    doc["ok"] = true;
    doc["obs"] = observation_json(result.obs);
    doc["reward"] = result.reward;
    doc["done"] = result.done;
    doc["truncated"] = result.truncated;
    doc["events"] = events_json(result.events);
    return doc.dump();
}

std::string Session::cmd_observe() {
    if (!env_) return error_line("no-episode");
    json doc;
    doc["ok"] = true;
    doc["obs"] = observation_json(env_->observe());
    return doc.dump();
}

std::string Session::cmd_close() {
    flush_episode();
    closed_ = true;
    json doc;
    doc["ok"] = true;
    return doc.dump();
}

void Session::record_step(const StepResult& result, int action) {
    if (recorder_) recorder_->record(result, action);
}

void Session::flush_episode() {
    if (recorder_ && sink_ && env_ && env_->steps() > 0)
        sink_->append(recorder_->finish(*env_));
    recorder_.reset();
}

// ---------------------------------------------------------------------------
// TCP server

struct ProtocolServer::Workers {
    struct Client {
        int fd;
        std::thread thread;
        std::shared_ptr<std::atomic<bool>> finished;
    };
    std::thread acceptor;
    std::mutex mutex;
    std::vector<Client> clients;
    std::atomic<bool> stopping{false};

    // join and close connections whose session thread has ended
    void reap() {
        std::lock_guard<std::mutex> lock(mutex);
        for (auto it = clients.begin(); it != clients.end();) {
            if (it->finished->load()) {
                if (it->thread.joinable()) it->thread.join();
                ::close(it->fd);
                it = clients.erase(it);
            } else {
                ++it;
            }
        }
    }
};

ProtocolServer::ProtocolServer(ServerOptions options)
    : options_(std::move(options)), workers_(std::make_unique<Workers>()) {
    if (!options_.trace_path.empty()) sink_ = std::make_shared<TraceSink>(options_.trace_path);
}

ProtocolServer::~ProtocolServer() { stop(); }

void ProtocolServer::start() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error("socket(): " + std::string(std::strerror(errno)));
    int reuse = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &reuse, sizeof(reuse));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(static_cast<std::uint16_t>(options_.port));
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
        const std::string why = std::strerror(errno);
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw Error("cannot bind port " + std::to_string(options_.port) + ": " + why);
    }
    if (::listen(listen_fd_, 16) < 0) {
        const std::string why = std::strerror(errno);
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw Error("listen(): " + why);
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    bound_port_ = ntohs(addr.sin_port);
    workers_->stopping = false;
    workers_->acceptor = std::thread([this] { accept_loop(); });
}

void ProtocolServer::accept_loop() {
    while (!workers_->stopping) {
        pollfd pfd{listen_fd_, POLLIN, 0};
        int ready = ::poll(&pfd, 1, 100);
        if (workers_->stopping) break;
        workers_->reap();
        if (ready <= 0) continue;
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) continue;
        auto finished = std::make_shared<std::atomic<bool>>(false);
        std::lock_guard<std::mutex> lock(workers_->mutex);
        workers_->clients.push_back({fd, std::thread([this, fd, finished] {
                                         serve_client(fd);
                                         *finished = true;
                                     }),
                                     finished});
    }
}

void ProtocolServer::serve_client(int fd) {
    Session session(options_, sink_);
    std::string buffer;
    char chunk[4096];
    while (!workers_->stopping && !session.closed()) {
        ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
        if (n <= 0) break;
        buffer.append(chunk, static_cast<std::size_t>(n));
        std::size_t pos;
        while ((pos = buffer.find('\n')) != std::string::npos) {
            std::string line = buffer.substr(0, pos);
            buffer.erase(0, pos + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            std::string reply = session.handle_line(line) + "\n";
            std::size_t sent = 0;
            while (sent < reply.size()) {
                ssize_t w = ::send(fd, reply.data() + sent, reply.size() - sent, 0);
                if (w <= 0) {
                    ::shutdown(fd, SHUT_RDWR);
                    return;
                }
                sent += static_cast<std::size_t>(w);
            }
            if (session.closed()) break;
        }
    }
    ::shutdown(fd, SHUT_RDWR);
}

void ProtocolServer::stop() {
    if (!workers_) return;
    if (workers_->stopping.exchange(true)) {
        if (workers_->acceptor.joinable()) workers_->acceptor.join();
        return;
    }
    // wake the poller, join the acceptor, and only then close the socket so
    // no thread can race the fd teardown
    if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
    if (workers_->acceptor.joinable()) workers_->acceptor.join();
    if (listen_fd_ >= 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    std::lock_guard<std::mutex> lock(workers_->mutex);
    for (auto& client : workers_->clients) {
        ::shutdown(client.fd, SHUT_RDWR);
        if (client.thread.joinable()) client.thread.join();
        ::close(client.fd);
    }
    workers_->clients.clear();
}

int serve_stdio(const ServerOptions& options) {
    std::shared_ptr<TraceSink> sink;
    if (!options.trace_path.empty()) sink = std::make_shared<TraceSink>(options.trace_path);
    Session session(options, sink);
    std::string line;
    while (!session.closed() && std::getline(std::cin, line)) {
        if (line.empty()) continue;
        std::cout << session.handle_line(line) << "\n" << std::flush;
    }
    return 0;
}

namespace {
std::atomic<bool> g_shutdown{false};
void handle_signal(int) { g_shutdown = true; }
}  // namespace

int serve_blocking(const ServerOptions& options) {
    if (options.stdio) return serve_stdio(options);
    ProtocolServer server(options);
    server.start();
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    std::cerr << "escaperoom: serving protocol v" << kProtocolVersion << " on port "
              << server.port() << "\n";
    while (!g_shutdown) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    return 0;
}

}  // namespace escaperoom
