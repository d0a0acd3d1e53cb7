#include "soundgrid/registry.hpp"

#include "soundgrid/error.hpp"
#include "soundgrid/record.hpp"
#include "soundgrid/textio.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

namespace soundgrid {

DeploymentRegistry::DeploymentRegistry(std::vector<Deployment> deployments, std::vector<Spot> spots)
    : deployments_(std::move(deployments)), spots_(std::move(spots)) {}

void DeploymentRegistry::validate() const {
    std::set<std::string_view> spot_ids;
    for (const auto& s : spots_) {
        if (s.id.empty())
            throw ValidationError("spot_id", "empty spot id");
        if (!spot_ids.insert(s.id).second)
            throw ValidationError("spot_id", "duplicate spot '" + s.id + "'");
    }
    auto row = [](const Deployment& d) { return d.line ? "row at line " + std::to_string(d.line) : "row for " + d.sensor_id; };
    for (const auto& d : deployments_) {
        if (!is_valid_sensor_id(d.sensor_id))
            throw ValidationError("sensor_id", "invalid sensor id '" + d.sensor_id + "' (" + row(d) + ")");
        if (!spot_ids.contains(d.spot_id))
            throw ValidationError("spot_id", "unknown spot '" + d.spot_id + "' (" + row(d) + ")");
        if (d.end && !(d.start < *d.end))
            throw ValidationError("end_utc", "interval start must precede its end (" + row(d) + ")");
    }
    for (std::size_t i = 0; i < deployments_.size(); ++i) {
        for (std::size_t j = i + 1; j < deployments_.size(); ++j) {
            const auto& a = deployments_[i];
            const auto& b = deployments_[j];
            if (a.sensor_id != b.sensor_id)
                continue;
            bool a_before_b = a.end && *a.end <= b.start;
            bool b_before_a = b.end && *b.end <= a.start;
            if (!a_before_b && !b_before_a)
                throw ValidationError("interval", "overlapping deployments for sensor " + a.sensor_id + ": " + row(a) +
                                                      " and " + row(b));
        }
    }
}

std::vector<std::string> DeploymentRegistry::sensors() const {
    std::vector<std::string> out;
    for (const auto& d : deployments_)
        if (std::find(out.begin(), out.end(), d.sensor_id) == out.end())
            out.push_back(d.sensor_id);
    return out;
}

bool DeploymentRegistry::has_sensor(std::string_view id) const {
    return std::any_of(deployments_.begin(), deployments_.end(), [&](const Deployment& d) { return d.sensor_id == id; });
}

bool DeploymentRegistry::has_spot(std::string_view id) const { return find_spot(id) != nullptr; }

const Spot* DeploymentRegistry::find_spot(std::string_view id) const {
    auto it = std::find_if(spots_.begin(), spots_.end(), [&](const Spot& s) { return s.id == id; });
    return it == spots_.end() ? nullptr : &*it;
}

std::optional<std::string> DeploymentRegistry::spot_of(std::string_view sensor_id, Timestamp t) const {
    for (const auto& d : deployments_)
        if (d.sensor_id == sensor_id && d.covers(t))
            return d.spot_id;
    return std::nullopt;
}

std::vector<Deployment> DeploymentRegistry::deployments_of_spot(std::string_view spot_id) const {
    std::vector<Deployment> out;
    std::copy_if(deployments_.begin(), deployments_.end(), std::back_inserter(out),
                 [&](const Deployment& d) { return d.spot_id == spot_id; });
    return out;
}

std::vector<Deployment> DeploymentRegistry::deployments_of_sensor(std::string_view sensor_id) const {
    std::vector<Deployment> out;
    std::copy_if(deployments_.begin(), deployments_.end(), std::back_inserter(out),
                 [&](const Deployment& d) { return d.sensor_id == sensor_id; });
    return out;
}

DeploymentRegistry parse_registry(std::string_view registry_csv, std::string_view spots_csv) {
    auto expect_header = [](const std::vector<CsvRow>& rows, const std::vector<std::string>& header, const char* file) {
        if (rows.empty())
            return;
        if (rows.front().fields != header)
            throw ConfigError(std::string(file) + ": expected header '" + [&] {
                std::string h;
                for (const auto& f : header)
                    h += (h.empty() ? "" : ",") + f;
                return h;
            }() + "'");
    };

    auto reg_rows = parse_csv(registry_csv);
    expect_header(reg_rows, {"sensor_id", "spot_id", "start_utc", "end_utc"}, "registry");
    std::vector<Deployment> deployments;
    for (std::size_t i = 1; i < reg_rows.size(); ++i) {
        const auto& r = reg_rows[i];
        if (r.fields.size() != 4)
            throw ConfigError("registry line " + std::to_string(r.line) + ": expected 4 fields");
        Deployment d;
        d.sensor_id = r.fields[0];
        d.spot_id = r.fields[1];
        d.line = r.line;
        try {
            d.start = parse_timestamp(r.fields[2]);
            if (!r.fields[3].empty())
                d.end = parse_timestamp(r.fields[3]);
        } catch (const ParseError& e) {
            throw ConfigError("registry line " + std::to_string(r.line) + ": " + e.what());
        }
        deployments.push_back(std::move(d));
    }

    auto spot_rows = parse_csv(spots_csv);
    expect_header(spot_rows, {"spot_id", "name", "description"}, "spots");
    std::vector<Spot> spots;
    for (std::size_t i = 1; i < spot_rows.size(); ++i) {
        const auto& r = spot_rows[i];
        if (r.fields.size() != 3)
            throw ConfigError("spots line " + std::to_string(r.line) + ": expected 3 fields");
        spots.push_back({r.fields[0], r.fields[1], r.fields[2]});
    }

    DeploymentRegistry registry(std::move(deployments), std::move(spots));
    registry.validate();
    return registry;
}

DeploymentRegistry load_registry(const std::string& path) {
    std::string registry_csv = read_file(path);
    auto spots_path = std::filesystem::path(path).parent_path() / "spots.csv";
    std::string spots_csv;
    if (std::filesystem::exists(spots_path))
        spots_csv = read_file(spots_path.string());
    return parse_registry(registry_csv, spots_csv);
}

} // namespace soundgrid
