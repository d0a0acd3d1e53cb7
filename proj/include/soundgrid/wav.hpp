#pragma once

#include "soundgrid/time.hpp"

#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace soundgrid {

struct WavInfo {
    int sample_rate = 0;
    int channels = 0;
    int bits_per_sample = 0;
    bool is_float = false;
    std::uint64_t frames = 0;
    /// Stream start, from an `epoch=<RFC 3339>` INFO/ICMT comment if present.
    std::optional<Timestamp> epoch;
};

/// Streaming reader for mono or stereo PCM WAV (16/24-bit integer, 32-bit
/// float). Stereo is downmixed by averaging the channels.
class WavReader {
public:
    explicit WavReader(const std::string& path);

    const WavInfo& info() const noexcept { return info_; }

    /// Reads up to `out.size()` mono frames; returns the number read.
    std::size_t read(std::span<float> out);

    std::uint64_t frames_remaining() const noexcept { return info_.frames - position_; }

private:
    std::ifstream in_;
    WavInfo info_;
    std::uint64_t position_ = 0;
    std::vector<char> raw_;
};

enum class WavEncoding { pcm16, float32 };

/// Streaming mono WAV writer; sizes are patched on `close()` or destruction.
class WavWriter {
public:
    WavWriter(const std::string& path, int sample_rate, WavEncoding encoding = WavEncoding::float32,
              std::optional<Timestamp> epoch = std::nullopt);
    ~WavWriter();

    WavWriter(const WavWriter&) = delete;
    WavWriter& operator=(const WavWriter&) = delete;

    void write(std::span<const float> samples);
    void close();

private:
    std::ofstream out_;
    WavEncoding encoding_;
    std::uint64_t data_bytes_ = 0;
    std::streamoff riff_size_pos_ = 0;
    std::streamoff data_size_pos_ = 0;
    bool closed_ = false;
};

} // namespace soundgrid
