#include "soundgrid/server.hpp"

#include "soundgrid/error.hpp"

#include <poll.h>
#include <sys/socket.h>

#include <iostream>

namespace soundgrid {

Server::Server(ServerConfig config, DeploymentRegistry registry)
    : config_(std::move(config)), registry_(std::move(registry)), store_(config_.data_dir) {}

Server::~Server() { stop(); }

void Server::start() {
    listener_ = listen_tcp(config_.bind);
    port_ = local_port(listener_);
    stopping_ = false;
    acceptor_ = std::thread([this] { accept_loop(); });
}

void Server::stop() {
    if (stopping_.exchange(true))
        return;
    if (acceptor_.joinable())
        acceptor_.join();
    listener_.close();
    std::list<std::unique_ptr<Connection>> connections;
    {
        std::lock_guard lock(connections_mutex_);
        connections.swap(connections_);
    }
    for (auto& c : connections)
        c->socket.shutdown();
    for (auto& c : connections)
        if (c->thread.joinable())
            c->thread.join();
}

ServerStats Server::stats() const {
    return {connections_count_.load(), stored_.load(), duplicates_.load(), rejected_.load(), protocol_errors_.load()};
}

void Server::reap_finished() {
    std::list<std::unique_ptr<Connection>> done;
    {
        std::lock_guard lock(connections_mutex_);
        for (auto it = connections_.begin(); it != connections_.end();) {
            if ((*it)->finished) {
                done.push_back(std::move(*it));
                it = connections_.erase(it);
            } else {
                ++it;
            }
        }
    }
    for (auto& c : done)
        c->thread.join();
}

void Server::accept_loop() {
    while (!stopping_) {
        pollfd p{listener_.fd(), POLLIN, 0};
        int rc = ::poll(&p, 1, 100);
        reap_finished();
        if (rc <= 0)
            continue;
        int fd = ::accept4(listener_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
        if (fd < 0)
            continue;
        ++connections_count_;
        auto connection = std::make_unique<Connection>();
        connection->socket = Socket(fd);
        Connection& ref = *connection;
        std::lock_guard lock(connections_mutex_);
        if (stopping_)
            break;
        connections_.push_back(std::move(connection));
        ref.thread = std::thread([this, &ref] { serve(ref); });
    }
}

void Server::serve(Connection& connection) {
    Socket& socket = connection.socket;
    LineReader reader(socket.fd());
    if (tap_)
        reader.set_tap(tap_);
    auto send = [&](const WireMessage& message) {
        std::string bytes = encode_message(message);
        if (tap_)
            tap_(bytes);
        socket.send_all(bytes);
    };
    auto fail = [&](const std::string& text) {
        ++protocol_errors_;
        send(ErrorMessage{"protocol", text});
    };

    std::optional<std::string> sensor;
    std::string line;
    try {
        while (!stopping_) {
            LineReader::Status status;
            try {
                status = reader.read_line(line, std::chrono::milliseconds{200});
            } catch (const ProtocolError& e) {
                fail(e.what());
                break;
            }
            if (status == LineReader::Status::timeout)
                continue;
            if (status == LineReader::Status::closed)
                break;

            WireMessage message;
            try {
                message = decode_message(line);
            } catch (const ValidationError& e) {
                if (!sensor) {
                    fail(std::string("expected HELLO: ") + e.what());
                    break;
                }
                ++rejected_;
                send(ErrorMessage{"validation", e.what()});
                continue;
            } catch (const ParseError& e) {
                if (!sensor) {
                    fail(std::string("expected HELLO: ") + e.what());
                    break;
                }
                ++rejected_;
                send(ErrorMessage{"parse", e.what()});
                continue;
            }

            if (auto* hello = std::get_if<HelloMessage>(&message)) {
                if (sensor) {
                    fail("duplicate HELLO");
                    break;
                }
                if (hello->protocol_version != kProtocolVersion) {
                    fail("unsupported protocol version " + std::to_string(hello->protocol_version));
                    break;
                }
                sensor = hello->sensor_id;
            } else if (auto* record = std::get_if<MeasurementRecord>(&message)) {
                if (!sensor) {
                    fail("RECORD before HELLO");
                    break;
                }
                if (record->sensor_id != *sensor) {
                    ++rejected_;
                    send(ErrorMessage{"validation", "sensor_id does not match HELLO"});
                    continue;
                }
                if (store_.append(*record) == LogStore::AppendResult::stored)
                    ++stored_;
                else
                    ++duplicates_;
                send(AckMessage{record->sensor_id, record->timestamp});
            } else {
                fail("unexpected message from client");
                break;
            }
        }
    } catch (const IoError& e) {
        // Peer went away mid-write or storage failed; drop the connection.
        if (!stopping_)
            std::cerr << "connection closed: " << e.what() << "\n";
    }
    socket.shutdown();
    connection.finished = true;
}

} // namespace soundgrid
