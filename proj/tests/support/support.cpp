#include "support.hpp"

#include "soundgrid/error.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace soundgrid::testing {

TempDir::TempDir(const std::string& prefix) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (prefix + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::vector<float> sine(double frequency_hz, double amplitude, int sample_rate, double seconds) {
    std::vector<float> out(static_cast<std::size_t>(std::llround(seconds * sample_rate)));
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<float>(amplitude *
                                    std::sin(2.0 * std::numbers::pi * frequency_hz * static_cast<double>(i) / sample_rate));
    return out;
}

double oracle_a_weight_db(double f) {
    const double f2 = f * f;
    const double c1 = 20.598997 * 20.598997, c2 = 107.65265 * 107.65265, c3 = 737.86223 * 737.86223,
                 c4 = 12194.217 * 12194.217;
    const double ra = c4 * f2 * f2 / ((f2 + c1) * std::sqrt((f2 + c2) * (f2 + c3)) * (f2 + c4));
    return 20.0 * std::log10(ra) + 2.000;
}

double oracle_energetic_mean(const std::vector<double>& levels) {
    long double sum = 0.0L;
    for (double l : levels)
        sum += std::pow(10.0L, static_cast<long double>(l) / 10.0L);
    return static_cast<double>(10.0L * std::log10(sum / static_cast<long double>(levels.size())));
}

std::vector<MeasurementRecord> random_records(const std::string& sensor_id, Timestamp start, std::size_t count,
                                              std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> level(30.0, 110.0), signed_unit(-1.0, 1.0), unit(0.0, 1.0);
    std::vector<MeasurementRecord> out;
    for (std::size_t i = 0; i < count; ++i) {
        MeasurementRecord r;
        r.sensor_id = sensor_id;
        r.timestamp = start + Seconds{3 * static_cast<long long>(i)};
        r.laeq_db = level(rng);
        r.perception = {signed_unit(rng), signed_unit(rng)};
        r.sources = {unit(rng), unit(rng), unit(rng), unit(rng)};
        out.push_back(quantize(r));
    }
    return out;
}

void write_feed(const std::string& path, const std::vector<MeasurementRecord>& records) {
    std::ofstream out(path);
    for (const auto& r : records)
        out << encode_record(r) << "\n";
}

CircularPlotSpec demo_plot_spec() {
    using namespace std::chrono;
    CircularPlotSpec spec;
    spec.title = "Demo - pleasantness";
    spec.days = {2025y / July / 6, 2025y / July / 7, 2025y / July / 8};
    spec.values.resize(3);
    for (std::size_t d = 0; d < 3; ++d)
        for (std::size_t h = 0; h < 24; ++h)
            spec.values[d][h] = static_cast<double>((h * 7 + d * 5) % 24) / 23.0;
    spec.values[1][5].reset();
    spec.values[2][17].reset();
    spec.value_range = {0.0, 1.0};
    spec.legend_label = "Pleasantness [0,1]";
    return spec;
}

FaultProxy::FaultProxy(Endpoint upstream, Script script) : upstream_(std::move(upstream)), script_(std::move(script)) {
    listener_ = listen_tcp({"127.0.0.1", 0});
    port_ = local_port(listener_);
    acceptor_ = std::thread([this] { accept_loop(); });
}

FaultProxy::~FaultProxy() {
    stopping_ = true;
    if (acceptor_.joinable())
        acceptor_.join();
    for (auto& t : relays_)
        if (t.joinable())
            t.join();
}

void FaultProxy::accept_loop() {
    while (!stopping_) {
        pollfd p{listener_.fd(), POLLIN, 0};
        if (::poll(&p, 1, 50) <= 0)
            continue;
        int fd = ::accept(listener_.fd(), nullptr, nullptr);
        if (fd < 0)
            continue;
        Socket client(fd);
        bool down;
        {
            std::lock_guard lock(mutex_);
            down = std::chrono::steady_clock::now() < down_until_;
        }
        if (down)
            continue; // closes immediately
        for (auto& t : relays_)
            if (t.joinable())
                t.join();
        relays_.clear();
        relays_.emplace_back([this, c = std::move(client)]() mutable { relay(std::move(c)); });
    }
}

void FaultProxy::relay(Socket client) {
    Socket server;
    try {
        server = connect_tcp(upstream_, std::chrono::milliseconds{2000});
    } catch (const IoError&) {
        return;
    }
    std::string pending;
    char buf[16384];
    try {
        while (!stopping_) {
            pollfd fds[2] = {{client.fd(), POLLIN, 0}, {server.fd(), POLLIN, 0}};
            if (::poll(fds, 2, 50) <= 0)
                continue;
            if (fds[1].revents & (POLLIN | POLLHUP | POLLERR)) {
                ssize_t n = ::recv(server.fd(), buf, sizeof buf, 0);
                if (n <= 0)
                    return;
                client.send_all({buf, static_cast<std::size_t>(n)});
            }
            if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
                ssize_t n = ::recv(client.fd(), buf, sizeof buf, 0);
                if (n <= 0)
                    return;
                pending.append(buf, static_cast<std::size_t>(n));
                std::size_t start = 0, nl;
                while ((nl = pending.find('\n', start)) != std::string::npos) {
                    std::string_view line(pending.data() + start, nl - start + 1);
                    start = nl + 1;
                    server.send_all(line);
                    if (line.starts_with("HELLO "))
                        continue;
                    std::size_t count = ++lines_;
                    if (script_.duplicate_every && count % script_.duplicate_every == 0) {
                        server.send_all(line);
                        ++duplicates_;
                    }
                    if (outages_ < script_.disconnect_after.size() && count >= script_.disconnect_after[outages_]) {
                        {
                            std::lock_guard lock(mutex_);
                            down_until_ = std::chrono::steady_clock::now() + script_.outage;
                        }
                        ++outages_;
                        return; // both sockets close
                    }
                }
                pending.erase(0, start);
            }
        }
    } catch (const IoError&) {
    }
}

} // namespace soundgrid::testing
