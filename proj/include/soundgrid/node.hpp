#pragma once

#include "soundgrid/dsp.hpp"
#include "soundgrid/inference.hpp"
#include "soundgrid/record.hpp"
#include "soundgrid/wire.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace soundgrid {

enum class InputMode { wav_file, metric_feed };

struct NodeConfig {
    std::string sensor_id;
    InputMode input_mode = InputMode::wav_file;
    std::string input_path;
    CalibrationConfig calibration;
    /// "baseline" (or another registered estimator) for audio; "injected"
    /// for metric feeds, whose records already carry their scores.
    std::string estimator = "baseline";
    Endpoint server{"127.0.0.1", 7878};
    std::size_t buffer_capacity = 86400;
    double backoff_initial_seconds = 1.0;
    double backoff_max_seconds = 60.0;
    /// Stream start; falls back to WAV metadata or the first feed record.
    std::optional<Timestamp> epoch;
    double window_seconds = 3.0;
    /// Records in flight (sent but not yet ACKed).
    std::size_t batch_size = 100;
    /// Consecutive failed connection attempts before giving up; 0 retries forever.
    int max_connect_attempts = 0;
    double ack_timeout_seconds = 10.0;

    void validate() const;
};

/// Parses the flat `key = value` node configuration.
NodeConfig parse_node_config(std::string_view text);
NodeConfig load_node_config(const std::string& path);

struct NodeStats {
    std::uint64_t records_emitted = 0;
    std::uint64_t records_sent = 0;
    std::uint64_t records_acked = 0;
    std::uint64_t records_resent = 0;
    std::uint64_t records_dropped = 0;
    std::uint64_t records_rejected = 0;
    std::uint64_t connections = 0;
    std::uint64_t connect_failures = 0;
};

/// Instrumentation points. All are optional and called from node threads.
struct NodeHooks {
    /// Called after each window's audio has been released, with the number
    /// of audio bytes the node still holds.
    std::function<void(std::size_t retained_audio_bytes)> between_windows;
    /// Every record the measuring side emits, in order.
    std::function<void(const MeasurementRecord&)> on_record;
    /// Every byte written to the server connection.
    std::function<void(std::string_view)> wire_tap;
};

/// Produces the node's records without transmitting them. `stop` may be
/// used to abort early.
void produce_records(const NodeConfig& config, const std::function<void(MeasurementRecord)>& sink,
                     const NodeHooks& hooks = {}, const std::atomic<bool>* stop = nullptr);

/// Runs measurement and transmission until the input is exhausted and every
/// record is acknowledged (or dropped by buffer overflow).
NodeStats run_node(const NodeConfig& config, const NodeHooks& hooks = {});

} // namespace soundgrid
