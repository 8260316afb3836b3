#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "escaperoom/grid_world.hpp"

namespace escaperoom {

struct ServerOptions {
    int port = 7341;  // 0 picks an ephemeral port
    bool stdio = false;
    std::uint64_t default_seed = 0;
    bool drop_enabled = false;
    int max_steps = 1000;
    int room_size = 6;
    std::string trace_path;  // when set, finished episodes append here
};

inline constexpr int kProtocolVersion = 1;

class TraceSink;

/// One client's environment, driven by single-line JSON commands:
///   {"cmd":"hello"} {"cmd":"reset",...} {"cmd":"step","action":N}
///   {"cmd":"observe"} {"cmd":"close"}
/// Responses carry "ok"; errors use stable codes ("parse", "unknown-cmd",
/// "no-episode", "episode-over", "bad-action", "bad-request") and never
/// kill the session. Commands are processed strictly in order.
class Session {
public:
    explicit Session(const ServerOptions& options, std::shared_ptr<TraceSink> sink = nullptr);
    ~Session();

    /// One request line in, one response line out (without the newline).
    std::string handle_line(const std::string& line);

    bool closed() const { return closed_; }

private:
    std::string cmd_hello();
    std::string cmd_reset(const class SessionRequest& request);
    std::string cmd_step(const class SessionRequest& request);
    std::string cmd_observe();
    std::string cmd_close();
    void record_step(const StepResult& result, int action);
    void flush_episode();

    ServerOptions options_;
    std::shared_ptr<TraceSink> sink_;
    std::unique_ptr<GridWorld> env_;
    std::unique_ptr<class EpisodeRecorder> recorder_;
    bool closed_ = false;
};

/// Serves one Session per TCP connection; sessions run concurrently and
/// independently. start() binds (throwing Error on failure), stop() shuts
/// everything down and flushes the trace sink.
class ProtocolServer {
public:
    explicit ProtocolServer(ServerOptions options);
    ~ProtocolServer();

    void start();
    int port() const { return bound_port_; }
    void stop();

private:
    void accept_loop();
    void serve_client(int fd);

    ServerOptions options_;
    std::shared_ptr<TraceSink> sink_;
    int listen_fd_ = -1;
    int bound_port_ = 0;
    struct Workers;
    std::unique_ptr<Workers> workers_;
};

/// Runs a single session over stdin/stdout until EOF or close.
int serve_stdio(const ServerOptions& options);

/// CLI entry: serve on options.port until SIGINT/SIGTERM.
int serve_blocking(const ServerOptions& options);

}  // namespace escaperoom
