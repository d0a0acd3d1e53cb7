#include "soundgrid/wire.hpp"

#include "soundgrid/error.hpp"
#include "soundgrid/textio.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace soundgrid {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

sockaddr_in to_sockaddr(const Endpoint& e) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(e.port);
    std::string host = e.host == "localhost" ? "127.0.0.1" : e.host;
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw ConfigError("unsupported host '" + e.host + "' (use an IPv4 address)");
    return addr;
}

std::string errno_text() { return std::strerror(errno); }

} // namespace

std::string encode_message(const WireMessage& message) {
    return std::visit(overloaded{
                          [](const HelloMessage& m) { return "HELLO " + m.sensor_id + " " + std::to_string(m.protocol_version) + "\n"; },
                          [](const MeasurementRecord& r) { return encode_record(r) + "\n"; },
                          [](const AckMessage& m) { return "ACK " + m.sensor_id + " " + format_utc(m.timestamp) + "\n"; },
                          [](const ErrorMessage& m) { return "ERROR " + m.code + " " + m.text + "\n"; },
                      },
                      message);
}

WireMessage decode_message(std::string_view line) {
    auto word = [&](std::size_t from) {
        auto sp = line.find(' ', from);
        return std::pair{line.substr(from, sp == std::string_view::npos ? std::string_view::npos : sp - from), sp};
    };
    if (line.rfind("HELLO ", 0) == 0) {
        auto [id, sp] = word(6);
        if (sp == std::string_view::npos)
            throw ParseError(line.size(), "HELLO without protocol version");
        if (!is_valid_sensor_id(id))
            throw ValidationError("sensor_id", "sensor_id invalid");
        auto version = line.substr(sp + 1);
        if (version.empty() || version.find_first_not_of("0123456789") != std::string_view::npos || version.size() > 6)
            throw ParseError(sp + 1, "bad protocol version");
        return HelloMessage{std::string(id), std::stoi(std::string(version))};
    }
    if (line.rfind("ACK ", 0) == 0) {
        auto [id, sp] = word(4);
        if (sp == std::string_view::npos)
            throw ParseError(line.size(), "ACK without timestamp");
        try {
            return AckMessage{std::string(id), parse_timestamp(line.substr(sp + 1))};
        } catch (const ParseError& e) {
            throw ParseError(sp + 1 + e.offset(), e.what());
        }
    }
    if (line.rfind("ERROR ", 0) == 0) {
        auto [code, sp] = word(6);
        return ErrorMessage{std::string(code), sp == std::string_view::npos ? std::string() : std::string(line.substr(sp + 1))};
    }
    return decode_record(line);
}

Endpoint Endpoint::parse(std::string_view text) {
    auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0)
        throw ConfigError("address '" + std::string(text) + "' must be host:port");
    auto port = parse_integer(text.substr(colon + 1), "port");
    if (port < 0 || port > 65535)
        throw ConfigError("port out of range in '" + std::string(text) + "'");
    return {std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

Socket::~Socket() { close(); }

Socket& Socket::operator=(Socket&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
}

void Socket::close() noexcept {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void Socket::shutdown() noexcept {
    if (fd_ >= 0)
        ::shutdown(fd_, SHUT_RDWR);
}

void Socket::send_all(std::string_view data) {
    while (!data.empty()) {
        auto n = ::send(fd_, data.data(), data.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw IoError("send failed: " + errno_text());
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

Socket connect_tcp(const Endpoint& endpoint, std::chrono::milliseconds timeout) {
    auto addr = to_sockaddr(endpoint);
    Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!s.valid())
        throw IoError("socket: " + errno_text());
    int flags = ::fcntl(s.fd(), F_GETFL, 0);
    ::fcntl(s.fd(), F_SETFL, flags | O_NONBLOCK);
    if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        if (errno != EINPROGRESS)
            throw IoError("connect to " + endpoint.to_string() + ": " + errno_text());
        pollfd p{s.fd(), POLLOUT, 0};
        int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
        if (rc <= 0)
            throw IoError("connect to " + endpoint.to_string() + ": timed out");
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0)
            throw IoError("connect to " + endpoint.to_string() + ": " + std::strerror(err));
    }
    ::fcntl(s.fd(), F_SETFL, flags);
    int one = 1;
    ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return s;
}

Socket listen_tcp(const Endpoint& endpoint, int backlog) {
    auto addr = to_sockaddr(endpoint);
    Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!s.valid())
        throw IoError("socket: " + errno_text());
    int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
        throw IoError("bind " + endpoint.to_string() + ": " + errno_text());
    if (::listen(s.fd(), backlog) != 0)
        throw IoError("listen: " + errno_text());
    return s;
}

std::uint16_t local_port(const Socket& socket) {
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    if (::getsockname(socket.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0)
        throw IoError("getsockname: " + errno_text());
    return ntohs(addr.sin_port);
}

bool LineReader::extract(std::string& line) {
    auto nl = buffer_.find('\n');
    if (nl == std::string::npos) {
        if (buffer_.size() > max_line_)
            throw ProtocolError("line exceeds " + std::to_string(max_line_) + " bytes");
        return false;
    }
    if (nl > max_line_)
        throw ProtocolError("line exceeds " + std::to_string(max_line_) + " bytes");
    std::size_t end = nl;
    if (end > 0 && buffer_[end - 1] == '\r')
        --end;
    line.assign(buffer_, 0, end);
    buffer_.erase(0, nl + 1);
    return true;
}

LineReader::Status LineReader::read_line(std::string& line, std::chrono::milliseconds timeout) {
    using clock = std::chrono::steady_clock;
    auto deadline = clock::now() + timeout;
    while (!extract(line)) {
        int wait = -1;
        if (timeout.count() >= 0) {
            auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
            if (left <= 0)
                return Status::timeout;
            wait = static_cast<int>(left);
        }
        pollfd p{fd_, POLLIN, 0};
        int rc = ::poll(&p, 1, wait);
        if (rc < 0) {
            if (errno == EINTR)
                continue;
            throw IoError("poll: " + errno_text());
        }
        if (rc == 0)
            return Status::timeout;
        char chunk[4096];
        auto n = ::recv(fd_, chunk, sizeof chunk, 0);
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN)
                continue;
            return Status::closed;
        }
        if (n == 0)
            return Status::closed;
        if (tap_)
            tap_(std::string_view(chunk, static_cast<std::size_t>(n)));
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
    return Status::line;
}

} // namespace soundgrid
