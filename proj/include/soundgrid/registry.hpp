#pragma once

#include "soundgrid/time.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace soundgrid {

struct Spot {
    std::string id;
    std::string name;
    std::string description;
};

/// A sensor occupying a spot over the half-open interval [start, end).
struct Deployment {
    std::string sensor_id;
    std::string spot_id;
    Timestamp start{};
    std::optional<Timestamp> end;
    /// 1-based CSV line the row came from (0 when built in code).
    std::size_t line = 0;

    bool covers(Timestamp t) const { return t >= start && (!end || t < *end); }
};

/// Time-varying mapping of sensors to physical spots.
class DeploymentRegistry {
public:
    DeploymentRegistry() = default;
    DeploymentRegistry(std::vector<Deployment> deployments, std::vector<Spot> spots);

    const std::vector<Deployment>& deployments() const noexcept { return deployments_; }
    const std::vector<Spot>& spots() const noexcept { return spots_; }

    /// Throws ValidationError on overlapping intervals for one sensor,
    /// inverted intervals, or unknown spot ids.
    void validate() const;

    std::vector<std::string> sensors() const;
    bool has_sensor(std::string_view id) const;
    bool has_spot(std::string_view id) const;
    const Spot* find_spot(std::string_view id) const;

    /// Spot occupied by `sensor_id` at `t`, if any.
    std::optional<std::string> spot_of(std::string_view sensor_id, Timestamp t) const;
    std::vector<Deployment> deployments_of_spot(std::string_view spot_id) const;
    std::vector<Deployment> deployments_of_sensor(std::string_view sensor_id) const;

private:
    std::vector<Deployment> deployments_;
    std::vector<Spot> spots_;
};

/// Parses the registry CSV (`sensor_id,spot_id,start_utc,end_utc`) and the
/// spots CSV (`spot_id,name,description`) and validates the result.
DeploymentRegistry parse_registry(std::string_view registry_csv, std::string_view spots_csv);

/// Loads `path` plus `spots.csv` from the same directory (optional when the
/// registry has no rows).
DeploymentRegistry load_registry(const std::string& path);

} // namespace soundgrid
