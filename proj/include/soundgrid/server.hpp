#pragma once

#include "soundgrid/registry.hpp"
#include "soundgrid/storage.hpp"
#include "soundgrid/wire.hpp"

#include <atomic>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <thread>

namespace soundgrid {

struct ServerConfig {
    Endpoint bind{"127.0.0.1", 7878};
    std::string data_dir;
};

struct ServerStats {
    std::uint64_t connections = 0;
    std::uint64_t stored = 0;
    std::uint64_t duplicates = 0;
    std::uint64_t rejected = 0;
    std::uint64_t protocol_errors = 0;
};

/// Ingestion server. Per connection: HELLO, then record lines; each valid
/// record is deduplicated, appended to its sensor log and ACKed.
class Server {
public:
    Server(ServerConfig config, DeploymentRegistry registry);
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds and starts accepting on a background thread.
    void start();
    /// Closes the listener and every connection, then joins all threads.
    void stop();

    std::uint16_t port() const noexcept { return port_; }
    ServerStats stats() const;
    LogStore& store() noexcept { return store_; }

    /// Observes every byte received from and sent to clients. Install
    /// before `start()`.
    void set_tap(std::function<void(std::string_view)> tap) { tap_ = std::move(tap); }

private:
    struct Connection {
        Socket socket;
        std::thread thread;
        std::atomic<bool> finished{false};
    };

    void accept_loop();
    void serve(Connection& connection);
    void reap_finished();

    ServerConfig config_;
    DeploymentRegistry registry_;
    LogStore store_;
    Socket listener_;
    std::uint16_t port_ = 0;
    std::thread acceptor_;
    std::atomic<bool> stopping_{false};
    std::mutex connections_mutex_;
    std::list<std::unique_ptr<Connection>> connections_;
    std::function<void(std::string_view)> tap_;

    std::atomic<std::uint64_t> connections_count_{0}, stored_{0}, duplicates_{0}, rejected_{0}, protocol_errors_{0};
};

} // namespace soundgrid
