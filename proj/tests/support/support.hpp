#pragma once

#include "soundgrid/circplot.hpp"
#include "soundgrid/record.hpp"
#include "soundgrid/wire.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace soundgrid::testing {

/// Directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& prefix = "soundgrid");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

std::vector<float> sine(double frequency_hz, double amplitude, int sample_rate, double seconds);

/// A-weighting from the standard's closed form with its published 1 kHz
/// normalization constant (A1000 = -2.000 dB), independent of the library.
double oracle_a_weight_db(double frequency_hz);

/// Energetic mean summed in long double.
double oracle_energetic_mean(const std::vector<double>& levels);

/// `count` random valid records on the 3 s grid starting at `start`.
std::vector<MeasurementRecord> random_records(const std::string& sensor_id, Timestamp start, std::size_t count,
                                              std::uint64_t seed);
void write_feed(const std::string& path, const std::vector<MeasurementRecord>& records);

/// Fixed spec rendered to tests/golden/demo_plot.svg.
CircularPlotSpec demo_plot_spec();

/// TCP proxy between a node and the server that injects faults: it drops
/// the connection after scripted counts of forwarded record lines (then
/// refuses service for a while) and forwards some record lines twice.
class FaultProxy {
public:
    struct Script {
        /// Cumulative record-line counts at which the connection is cut.
        std::vector<std::size_t> disconnect_after;
        std::chrono::milliseconds outage{50};
        /// Forward every n-th record line twice (0 = never).
        std::size_t duplicate_every = 0;
    };

    FaultProxy(Endpoint upstream, Script script);
    ~FaultProxy();

    std::uint16_t port() const { return port_; }
    std::size_t outages() const { return outages_; }
    std::size_t duplicates() const { return duplicates_; }
    std::size_t lines_forwarded() const { return lines_; }

private:
    void accept_loop();
    void relay(Socket client);

    Endpoint upstream_;
    Script script_;
    Socket listener_;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread acceptor_;
    std::vector<std::thread> relays_;
    std::atomic<std::size_t> outages_{0}, duplicates_{0}, lines_{0};
    std::chrono::steady_clock::time_point down_until_{};
    std::mutex mutex_;
};

} // namespace soundgrid::testing
