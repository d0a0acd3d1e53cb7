#include "soundgrid/storage.hpp"

#include "soundgrid/error.hpp"
#include "soundgrid/textio.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <filesystem>

namespace soundgrid {

namespace fs = std::filesystem;

std::string log_path(const std::string& directory, const std::string& sensor_id) {
    return (fs::path(directory) / (sensor_id + ".log")).string();
}

namespace {

// Complete lines only: anything after the last newline is an unfinished append.
std::string_view complete_prefix(std::string_view content) {
    auto nl = content.rfind('\n');
    return nl == std::string_view::npos ? std::string_view{} : content.substr(0, nl + 1);
}

template <typename F>
void for_each_line(std::string_view content, F&& f) {
    std::size_t pos = 0;
    while (pos < content.size()) {
        auto nl = content.find('\n', pos);
        f(content.substr(pos, nl - pos));
        pos = nl + 1;
    }
}

} // namespace

LogStore::SensorLog::~SensorLog() {
    if (fd >= 0)
        ::close(fd);
}

LogStore::LogStore(std::string directory) : directory_(std::move(directory)) {
    std::error_code ec;
    fs::create_directories(directory_, ec);
    if (!fs::is_directory(directory_))
        throw IoError("storage directory '" + directory_ + "' is not usable");
    for (const auto& entry : fs::directory_iterator(directory_)) {
        if (entry.path().extension() != ".log")
            continue;
        std::string sensor = entry.path().stem().string();
        if (!is_valid_sensor_id(sensor))
            continue;
        logs_.emplace(sensor, open_log(sensor));
    }
}

std::unique_ptr<LogStore::SensorLog> LogStore::open_log(const std::string& sensor_id) const {
    auto log = std::make_unique<SensorLog>();
    std::string path = log_path(directory_, sensor_id);
    if (fs::exists(path)) {
        std::string content = read_file(path);
        auto complete = complete_prefix(content);
        if (complete.size() != content.size())
            fs::resize_file(path, complete.size());
        for_each_line(complete, [&](std::string_view line) {
            try {
                log->timestamps.insert(decode_record(line).timestamp.time_since_epoch().count());
            } catch (const Error&) {
                // Unparseable lines stay in the file but are not indexed.
            }
        });
    }
    log->fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (log->fd < 0)
        throw IoError("cannot open '" + path + "': " + std::strerror(errno));
    return log;
}

LogStore::SensorLog& LogStore::log_for(const std::string& sensor_id) {
    {
        std::shared_lock lock(map_mutex_);
        if (auto it = logs_.find(sensor_id); it != logs_.end())
            return *it->second;
    }
    std::unique_lock lock(map_mutex_);
    auto& slot = logs_[sensor_id];
    if (!slot)
        slot = open_log(sensor_id);
    return *slot;
}

LogStore::AppendResult LogStore::append(const MeasurementRecord& record) {
    record.validate();
    SensorLog& log = log_for(record.sensor_id);
    std::lock_guard lock(log.mutex);
    auto key = record.timestamp.time_since_epoch().count();
    if (log.timestamps.contains(key))
        return AppendResult::duplicate;
    std::string line = encode_record(record) + "\n";
    std::size_t written = 0;
    while (written < line.size()) {
        auto n = ::write(log.fd, line.data() + written, line.size() - written);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw IoError("append to log of " + record.sensor_id + " failed: " + std::strerror(errno));
        }
        written += static_cast<std::size_t>(n);
    }
    log.timestamps.insert(key);
    return AppendResult::stored;
}

std::size_t LogStore::record_count(const std::string& sensor_id) const {
    std::shared_lock lock(map_mutex_);
    auto it = logs_.find(sensor_id);
    if (it == logs_.end())
        return 0;
    std::lock_guard log_lock(it->second->mutex);
    return it->second->timestamps.size();
}

std::vector<std::string> LogStore::sensors() const {
    std::shared_lock lock(map_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : logs_)
        out.push_back(id);
    return out;
}

std::vector<MeasurementRecord> read_sensor_log(const std::string& directory, const std::string& sensor_id) {
    std::string path = log_path(directory, sensor_id);
    std::vector<MeasurementRecord> out;
    if (!fs::exists(path))
        return out;
    std::string content = read_file(path);
    for_each_line(complete_prefix(content), [&](std::string_view line) {
        try {
            out.push_back(decode_record(line));
        } catch (const Error&) {
        }
    });
    return out;
}

Subject Subject::parse(std::string_view text) {
    constexpr std::string_view prefix = "spot:";
    if (text.substr(0, prefix.size()) == prefix) {
        if (text.size() == prefix.size())
            throw ConfigError("empty spot id in subject '" + std::string(text) + "'");
        return {Kind::spot, std::string(text.substr(prefix.size()))};
    }
    if (text.substr(0, 7) == "sensor:")
        text.remove_prefix(7);
    if (!is_valid_sensor_id(text))
        throw ConfigError("invalid subject '" + std::string(text) + "'");
    return {Kind::sensor, std::string(text)};
}

std::string Subject::to_string() const { return kind == Kind::spot ? "spot:" + id : id; }

std::vector<MeasurementRecord> read_records(const std::string& directory, const Subject& subject, Timestamp t0,
                                            Timestamp t1, const DeploymentRegistry& registry) {
    auto in_range = [&](const MeasurementRecord& r) { return r.timestamp >= t0 && r.timestamp < t1; };
    std::vector<MeasurementRecord> out;
    if (subject.kind == Subject::Kind::sensor) {
        if (!registry.has_sensor(subject.id) && !fs::exists(log_path(directory, subject.id)))
            throw NotFoundError("unknown sensor '" + subject.id + "'");
        for (auto& r : read_sensor_log(directory, subject.id))
            if (in_range(r))
                out.push_back(std::move(r));
    } else {
        if (!registry.has_spot(subject.id))
            throw NotFoundError("unknown spot '" + subject.id + "'");
        auto deployments = registry.deployments_of_spot(subject.id);
        std::vector<std::string> sensors;
        for (const auto& d : deployments)
            if (std::find(sensors.begin(), sensors.end(), d.sensor_id) == sensors.end())
                sensors.push_back(d.sensor_id);
        for (const auto& sensor : sensors) {
            for (auto& r : read_sensor_log(directory, sensor)) {
                if (!in_range(r))
                    continue;
                bool placed = std::any_of(deployments.begin(), deployments.end(), [&](const Deployment& d) {
                    return d.sensor_id == sensor && d.covers(r.timestamp);
                });
                if (placed)
                    out.push_back(std::move(r));
            }
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const MeasurementRecord& a, const MeasurementRecord& b) { return a.timestamp < b.timestamp; });
    return out;
}

} // namespace soundgrid
