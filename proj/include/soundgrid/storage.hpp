#pragma once

#include "soundgrid/record.hpp"
#include "soundgrid/registry.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

namespace soundgrid {

/// Append-only per-sensor logs: one `<sensor_id>.log` file per sensor in the
/// wire line format. Duplicate (sensor_id, timestamp) pairs are never stored.
///
/// On open, each log is scanned to rebuild the dedup index; a trailing
/// incomplete line left by a crash is truncated away.
///
/// Appends to one sensor are serialized; different sensors proceed in
/// parallel.
class LogStore {
public:
    explicit LogStore(std::string directory);

    enum class AppendResult { stored, duplicate };

    /// Validates, deduplicates and appends. Throws ValidationError for an
    /// invalid record and IoError when the write fails.
    AppendResult append(const MeasurementRecord& record);

    std::size_t record_count(const std::string& sensor_id) const;
    std::vector<std::string> sensors() const;
    const std::string& directory() const noexcept { return directory_; }

private:
    struct SensorLog {
        std::mutex mutex;
        int fd = -1;
        std::set<std::int64_t> timestamps;
        ~SensorLog();
    };

    SensorLog& log_for(const std::string& sensor_id);
    std::unique_ptr<SensorLog> open_log(const std::string& sensor_id) const;

    std::string directory_;
    mutable std::shared_mutex map_mutex_;
    std::map<std::string, std::unique_ptr<SensorLog>> logs_;
};

std::string log_path(const std::string& directory, const std::string& sensor_id);

/// Every complete record line of one sensor's log, in file order. A missing
/// log yields an empty list.
std::vector<MeasurementRecord> read_sensor_log(const std::string& directory, const std::string& sensor_id);

/// A query subject: a sensor id, or `spot:<id>`.
struct Subject {
    enum class Kind { sensor, spot };
    Kind kind = Kind::sensor;
    std::string id;

    static Subject parse(std::string_view text);
    std::string to_string() const;
};

/// Records of `subject` with timestamp in [t0, t1), sorted by timestamp.
/// Spot queries take each sensor's records only where the registry places
/// that sensor at the spot at the record's timestamp. Throws NotFoundError
/// for an unknown subject.
std::vector<MeasurementRecord> read_records(const std::string& directory, const Subject& subject, Timestamp t0,
                                            Timestamp t1, const DeploymentRegistry& registry);

} // namespace soundgrid
