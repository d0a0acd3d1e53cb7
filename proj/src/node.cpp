#include "soundgrid/node.hpp"

#include "soundgrid/error.hpp"
#include "soundgrid/record_buffer.hpp"
#include "soundgrid/textio.hpp"
#include "soundgrid/wav.hpp"

#include <cmath>
#include <deque>
#include <exception>
#include <fstream>
#include <thread>

namespace soundgrid {

namespace {

using std::chrono::milliseconds;

milliseconds to_ms(double seconds) { return milliseconds{static_cast<long long>(std::llround(seconds * 1000.0))}; }

// Tracks raw audio the node currently holds.
class AudioGauge {
public:
    void hold(std::size_t bytes) { bytes_ += bytes; }
    void release(std::size_t bytes) { bytes_ -= bytes; }
    std::size_t value() const { return bytes_; }

private:
    std::size_t bytes_ = 0;
};

Timestamp window_time(Timestamp epoch, std::uint64_t index, double window_seconds) {
    return epoch + Seconds{std::llround(static_cast<double>(index) * window_seconds)};
}

void produce_from_wav(const NodeConfig& config, const std::function<void(MeasurementRecord)>& sink, const NodeHooks& hooks,
                      const std::atomic<bool>* stop) {
    WavReader reader(config.input_path);
    const auto& info = reader.info();
    auto epoch = config.epoch ? config.epoch : info.epoch;
    if (!epoch)
        throw ConfigError("no stream epoch: set 'epoch' in the node config or embed it in the WAV file");
    const AWeightingFilter& filter = design_a_weighting_filter(info.sample_rate);
    FilterState state(filter);
    auto estimator = make_estimator(config.estimator);
    const auto window = static_cast<std::size_t>(std::llround(config.window_seconds * info.sample_rate));
    if (window == 0)
        throw ConfigError("window is shorter than one sample");

    AudioGauge gauge;
    for (std::uint64_t index = 0; !(stop && *stop); ++index) {
        std::vector<float> samples(window);
        gauge.hold(samples.size() * sizeof(float));
        std::size_t got = reader.read(samples);
        if (got < window) {
            // Partial trailing window: dropped.
            gauge.release(samples.size() * sizeof(float));
            samples = {};
            if (hooks.between_windows)
                hooks.between_windows(gauge.value());
            break;
        }
        std::vector<double> weighted(window);
        gauge.hold(weighted.size() * sizeof(double));
        state.process(samples, weighted);
        WindowFeatures features = features_from_weighted(weighted, info.sample_rate, config.calibration);

        gauge.release(samples.size() * sizeof(float) + weighted.size() * sizeof(double));
        samples = {};
        weighted = {};
        if (hooks.between_windows)
            hooks.between_windows(gauge.value());

        Estimate estimate = checked_estimate(*estimator, features);
        MeasurementRecord record{config.sensor_id, window_time(*epoch, index, config.window_seconds), features.laeq_db,
                                 estimate.perception, estimate.sources};
        record = quantize(record);
        record.validate();
        if (hooks.on_record)
            hooks.on_record(record);
        sink(std::move(record));
    }
}

void produce_from_feed(const NodeConfig& config, const std::function<void(MeasurementRecord)>& sink, const NodeHooks& hooks,
                       const std::atomic<bool>* stop) {
    std::ifstream in(config.input_path);
    if (!in)
        throw IoError("cannot read metric feed '" + config.input_path + "'");
    std::optional<Timestamp> epoch = config.epoch;
    std::optional<Timestamp> previous;
    const auto period = std::llround(config.window_seconds);
    std::string line;
    std::size_t line_no = 0;
    while (!(stop && *stop) && std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        MeasurementRecord record;
        try {
            record = decode_record(line);
        } catch (const Error& e) {
            throw ConfigError("metric feed line " + std::to_string(line_no) + ": " + e.what());
        }
        if (record.sensor_id != config.sensor_id)
            throw ConfigError("metric feed line " + std::to_string(line_no) + ": sensor '" + record.sensor_id +
                              "' does not match node sensor '" + config.sensor_id + "'");
        if (!epoch)
            epoch = record.timestamp;
        auto offset = (record.timestamp - *epoch).count();
        if (offset < 0 || offset % period != 0)
            throw ConfigError("metric feed line " + std::to_string(line_no) + ": timestamp " + format_utc(record.timestamp) +
                              " is not on the " + std::to_string(period) + " s grid");
        if (previous && record.timestamp <= *previous)
            throw ConfigError("metric feed line " + std::to_string(line_no) + ": timestamps must increase");
        previous = record.timestamp;
        if (hooks.on_record)
            hooks.on_record(record);
        sink(std::move(record));
    }
}

class Transmitter {
public:
    Transmitter(const NodeConfig& config, RecordBuffer& buffer, const NodeHooks& hooks, NodeStats& stats)
        : config_(config), buffer_(buffer), hooks_(hooks), stats_(stats) {}

    void run(const std::atomic<bool>& producer_failed) {
        auto backoff = config_.backoff_initial_seconds;
        int failures = 0;
        while (!(buffer_.exhausted() && inflight_.empty())) {
            if (producer_failed)
                return;
            Socket socket;
            try {
                socket = connect_tcp(config_.server, milliseconds{2000});
            } catch (const IoError&) {
                ++stats_.connect_failures;
                if (config_.max_connect_attempts > 0 && ++failures >= config_.max_connect_attempts)
                    throw IoError("server " + config_.server.to_string() + " unreachable after " +
                                  std::to_string(failures) + " attempts");
                std::this_thread::sleep_for(to_ms(backoff));
                backoff = std::min(backoff * 2.0, config_.backoff_max_seconds);
                continue;
            }
            failures = 0;
            ++stats_.connections;
            const auto acked_before = stats_.records_acked + stats_.records_rejected;
            try {
                session(socket);
                continue;
            } catch (const IoError&) {
                // Connection lost; unacknowledged records are resent on reconnect.
            } catch (const ProtocolError&) {
            }
            if (stats_.records_acked + stats_.records_rejected > acked_before)
                backoff = config_.backoff_initial_seconds;
            std::this_thread::sleep_for(to_ms(backoff));
            backoff = std::min(backoff * 2.0, config_.backoff_max_seconds);
        }
    }

private:
    void send(Socket& socket, const std::string& bytes) {
        if (hooks_.wire_tap)
            hooks_.wire_tap(bytes);
        socket.send_all(bytes);
    }

    void send_records(Socket& socket, const std::vector<MeasurementRecord>& records) {
        std::string bytes;
        for (const auto& r : records)
            bytes += encode_message(r);
        send(socket, bytes);
        stats_.records_sent += records.size();
    }

    void session(Socket& socket) {
        send(socket, encode_message(HelloMessage{config_.sensor_id, kProtocolVersion}));
        if (!inflight_.empty()) {
            std::vector<MeasurementRecord> again(inflight_.begin(), inflight_.end());
            send_records(socket, again);
            stats_.records_resent += again.size();
        }
        LineReader reader(socket.fd());
        const auto ack_timeout = to_ms(config_.ack_timeout_seconds);
        auto last_progress = std::chrono::steady_clock::now();
        std::string line;
        while (true) {
            if (inflight_.size() < config_.batch_size) {
                auto fresh = inflight_.empty() ? buffer_.wait_drain(config_.batch_size, milliseconds{100})
                                               : buffer_.drain(config_.batch_size - inflight_.size());
                if (!fresh.empty()) {
                    send_records(socket, fresh);
                    inflight_.insert(inflight_.end(), fresh.begin(), fresh.end());
                    last_progress = std::chrono::steady_clock::now();
                }
            }
            if (inflight_.empty()) {
                if (buffer_.exhausted())
                    return;
                continue;
            }
            auto status = reader.read_line(line, milliseconds{100});
            if (status == LineReader::Status::closed)
                throw IoError("server closed the connection");
            if (status == LineReader::Status::timeout) {
                if (std::chrono::steady_clock::now() - last_progress > ack_timeout)
                    throw IoError("timed out waiting for ACK");
                continue;
            }
            last_progress = std::chrono::steady_clock::now();
            WireMessage reply;
            try {
                reply = decode_message(line);
            } catch (const Error&) {
                throw ProtocolError("unreadable reply from server");
            }
            if (auto* ack = std::get_if<AckMessage>(&reply)) {
                acknowledge(*ack);
            } else if (auto* err = std::get_if<ErrorMessage>(&reply)) {
                if (err->code == "protocol")
                    throw ProtocolError("server reported: " + err->text);
                // Replies arrive in send order, so the rejection belongs to the oldest record.
                inflight_.pop_front();
                ++stats_.records_rejected;
            } else {
                throw ProtocolError("unexpected message from server");
            }
        }
    }

    void acknowledge(const AckMessage& ack) {
        for (auto it = inflight_.begin(); it != inflight_.end(); ++it) {
            if (it->timestamp == ack.timestamp && it->sensor_id == ack.sensor_id) {
                inflight_.erase(it);
                ++stats_.records_acked;
                return;
            }
        }
        // ACK for a record already acknowledged on an earlier connection.
    }

    const NodeConfig& config_;
    RecordBuffer& buffer_;
    const NodeHooks& hooks_;
    NodeStats& stats_;
    std::deque<MeasurementRecord> inflight_;
};

InputMode parse_mode(const std::string& v) {
    if (v == "wav-file" || v == "wav" || v == "audio")
        return InputMode::wav_file;
    if (v == "metric-feed" || v == "metric")
        return InputMode::metric_feed;
    throw ConfigError("input_mode must be wav-file or metric-feed, got '" + v + "'");
}

} // namespace

void NodeConfig::validate() const {
    if (!is_valid_sensor_id(sensor_id))
        throw ConfigError("sensor_id must be 1-32 characters of [A-Za-z0-9_-]");
    if (input_path.empty())
        throw ConfigError("input path is required");
    calibration.validate();
    if (buffer_capacity == 0)
        throw ConfigError("buffer_capacity must be positive");
    if (!(backoff_initial_seconds > 0.0) || backoff_initial_seconds > backoff_max_seconds)
        throw ConfigError("retry backoff requires 0 < initial <= max");
    if (!(window_seconds >= 1.0) || std::abs(window_seconds - std::round(window_seconds)) > 1e-9)
        throw ConfigError("window_seconds must be a whole number of seconds");
    if (batch_size == 0)
        throw ConfigError("batch_size must be positive");
    if (input_mode == InputMode::metric_feed && estimator != "injected")
        throw ConfigError("metric-feed input requires estimator = injected");
    if (input_mode == InputMode::wav_file && estimator == "injected")
        throw ConfigError("estimator 'injected' is only valid for metric-feed input");
}

NodeConfig parse_node_config(std::string_view text) {
    NodeConfig c;
    bool estimator_set = false;
    for (const auto& kv : parse_key_values(text)) {
        const auto& k = kv.key;
        const auto& v = kv.value;
        if (k == "sensor_id")
            c.sensor_id = v;
        else if (k == "input_mode")
            c.input_mode = parse_mode(v);
        else if (k == "input")
            c.input_path = v;
        else if (k == "fullscale_spl_db")
            c.calibration.fullscale_spl_db = parse_double(v, k);
        else if (k == "silence_floor_db")
            c.calibration.silence_floor_db = parse_double(v, k);
        else if (k == "estimator") {
            c.estimator = v;
            estimator_set = true;
        } else if (k == "server")
            c.server = Endpoint::parse(v);
        else if (k == "buffer_capacity")
            c.buffer_capacity = static_cast<std::size_t>(std::max(0LL, parse_integer(v, k)));
        else if (k == "retry_backoff_initial")
            c.backoff_initial_seconds = parse_double(v, k);
        else if (k == "retry_backoff_max")
            c.backoff_max_seconds = parse_double(v, k);
        else if (k == "epoch") {
            try {
                c.epoch = parse_timestamp(v);
            } catch (const ParseError& e) {
                throw ConfigError(std::string("epoch: ") + e.what());
            }
        } else if (k == "window_seconds")
            c.window_seconds = parse_double(v, k);
        else if (k == "batch_size")
            c.batch_size = static_cast<std::size_t>(std::max(0LL, parse_integer(v, k)));
        else if (k == "max_connect_attempts")
            c.max_connect_attempts = static_cast<int>(parse_integer(v, k));
        else if (k == "ack_timeout")
            c.ack_timeout_seconds = parse_double(v, k);
        else
            throw ConfigError("line " + std::to_string(kv.line) + ": unknown key '" + k + "'");
    }
    if (!estimator_set && c.input_mode == InputMode::metric_feed)
        c.estimator = "injected";
    c.validate();
    return c;
}

NodeConfig load_node_config(const std::string& path) { return parse_node_config(read_file(path)); }

void produce_records(const NodeConfig& config, const std::function<void(MeasurementRecord)>& sink, const NodeHooks& hooks,
                     const std::atomic<bool>* stop) {
    config.validate();
    if (config.input_mode == InputMode::wav_file)
        produce_from_wav(config, sink, hooks, stop);
    else
        produce_from_feed(config, sink, hooks, stop);
}

NodeStats run_node(const NodeConfig& config, const NodeHooks& hooks) {
    config.validate();
    NodeStats stats;
    RecordBuffer buffer(config.buffer_capacity);
    std::atomic<bool> stop{false};
    std::atomic<bool> producer_failed{false};
    std::exception_ptr producer_error;
    std::uint64_t emitted = 0;

    std::thread producer([&] {
        try {
            produce_records(
                config,
                [&](MeasurementRecord r) {
                    ++emitted;
                    buffer.push(std::move(r));
                },
                hooks, &stop);
        } catch (...) {
            producer_error = std::current_exception();
            producer_failed = true;
        }
        buffer.close();
    });

    std::exception_ptr transmit_error;
    try {
        Transmitter(config, buffer, hooks, stats).run(producer_failed);
    } catch (...) {
        transmit_error = std::current_exception();
        stop = true;
    }
    producer.join();
    if (producer_error)
        std::rethrow_exception(producer_error);
    if (transmit_error)
        std::rethrow_exception(transmit_error);
    stats.records_emitted = emitted;
    stats.records_dropped = buffer.dropped();
    return stats;
}

} // namespace soundgrid
