#include "soundgrid/record_buffer.hpp"

#include "soundgrid/error.hpp"

namespace soundgrid {

RecordBuffer::RecordBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0)
        throw ConfigError("buffer capacity must be positive");
}

void RecordBuffer::push(MeasurementRecord record) {
    {
        std::lock_guard lock(mutex_);
        if (queue_.size() == capacity_) {
            queue_.pop_front();
            ++dropped_;
        }
        queue_.push_back(std::move(record));
    }
    ready_.notify_one();
}

std::vector<MeasurementRecord> RecordBuffer::drain(std::size_t max) {
    std::lock_guard lock(mutex_);
    std::vector<MeasurementRecord> out;
    while (!queue_.empty() && out.size() < max) {
        out.push_back(std::move(queue_.front()));
        queue_.pop_front();
    }
    return out;
}

std::vector<MeasurementRecord> RecordBuffer::wait_drain(std::size_t max, std::chrono::milliseconds timeout) {
    {
        std::unique_lock lock(mutex_);
        ready_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; });
    }
    return drain(max);
}

void RecordBuffer::close() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    ready_.notify_all();
}

bool RecordBuffer::closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
}

bool RecordBuffer::exhausted() const {
    std::lock_guard lock(mutex_);
    return closed_ && queue_.empty();
}

std::size_t RecordBuffer::size() const {
    std::lock_guard lock(mutex_);
    return queue_.size();
}

std::uint64_t RecordBuffer::dropped() const {
    std::lock_guard lock(mutex_);
    return dropped_;
}

} // namespace soundgrid
