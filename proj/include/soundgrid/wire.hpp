#pragma once

#include "soundgrid/record.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace soundgrid {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kMaxLineBytes = 4096;

struct HelloMessage {
    std::string sensor_id;
    int protocol_version = kProtocolVersion;
    bool operator==(const HelloMessage&) const = default;
};

struct AckMessage {
    std::string sensor_id;
    Timestamp timestamp{};
    bool operator==(const AckMessage&) const = default;
};

struct ErrorMessage {
    std::string code; // protocol | validation | parse | storage
    std::string text;
    bool operator==(const ErrorMessage&) const = default;
};

using WireMessage = std::variant<HelloMessage, MeasurementRecord, AckMessage, ErrorMessage>;

/// One protocol line including the trailing `\n`.
std::string encode_message(const WireMessage& message);

/// Parses one line (newline already stripped). Lines that are not HELLO,
/// ACK or ERROR are decoded as records, so record errors propagate as
/// ParseError / ValidationError.
WireMessage decode_message(std::string_view line);

/// `host:port`; host may be a dotted IPv4 address or `localhost`.
struct Endpoint {
    std::string host;
    std::uint16_t port = 0;

    static Endpoint parse(std::string_view text);
    std::string to_string() const { return host + ":" + std::to_string(port); }
};

/// Owning socket descriptor.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) noexcept : fd_(fd) {}
    ~Socket();
    Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    int fd() const noexcept { return fd_; }
    bool valid() const noexcept { return fd_ >= 0; }
    void close() noexcept;
    /// Wakes any thread blocked on the socket.
    void shutdown() noexcept;

    /// Writes all of `data`; throws IoError on failure.
    void send_all(std::string_view data);

private:
    int fd_ = -1;
};

Socket connect_tcp(const Endpoint& endpoint, std::chrono::milliseconds timeout);
/// Listening socket; port 0 picks a free port (see `local_port`).
Socket listen_tcp(const Endpoint& endpoint, int backlog = 64);
std::uint16_t local_port(const Socket& socket);

/// Splits a byte stream into `\n`-terminated lines (a trailing `\r` is
/// dropped). Lines longer than the limit raise ProtocolError.
class LineReader {
public:
    explicit LineReader(int fd, std::size_t max_line = kMaxLineBytes) : fd_(fd), max_line_(max_line) {}

    enum class Status { line, closed, timeout };

    /// Blocks up to `timeout` (negative = forever) for the next line.
    Status read_line(std::string& line, std::chrono::milliseconds timeout = std::chrono::milliseconds{-1});

    /// Raw bytes observed so far are passed to this tap, if set.
    template <typename F>
    void set_tap(F&& tap) {
        tap_ = std::forward<F>(tap);
    }

private:
    bool extract(std::string& line);

    int fd_;
    std::size_t max_line_;
    std::string buffer_;
    std::function<void(std::string_view)> tap_;
};

} // namespace soundgrid
