#pragma once

#include "soundgrid/record.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <vector>

namespace soundgrid {

/// Bounded FIFO between the measuring and transmitting activities. When
/// full, pushing drops the oldest record and counts the drop. Safe for
/// concurrent producers and consumers.
class RecordBuffer {
public:
    explicit RecordBuffer(std::size_t capacity);

    void push(MeasurementRecord record);

    /// Removes up to `max` records from the front without waiting.
    std::vector<MeasurementRecord> drain(std::size_t max = SIZE_MAX);

    /// Waits until records are available, the buffer is closed, or the
    /// timeout passes, then drains up to `max`.
    std::vector<MeasurementRecord> wait_drain(std::size_t max, std::chrono::milliseconds timeout);

    /// Marks the end of production.
    void close();
    bool closed() const;
    /// Closed and empty.
    bool exhausted() const;

    std::size_t size() const;
    std::size_t capacity() const noexcept { return capacity_; }
    std::uint64_t dropped() const;

private:
    const std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable ready_;
    std::deque<MeasurementRecord> queue_;
    std::uint64_t dropped_ = 0;
    bool closed_ = false;
};

} // namespace soundgrid
