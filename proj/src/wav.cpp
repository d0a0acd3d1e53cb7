#include "soundgrid/wav.hpp"

#include "soundgrid/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>

namespace soundgrid {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t le32(const char* p) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(p[0])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(p[1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(p[2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(p[3])) << 24;
}

std::uint16_t le16(const char* p) {
    return static_cast<std::uint16_t>(static_cast<unsigned char>(p[0]) | static_cast<unsigned char>(p[1]) << 8);
}

void put32(std::ostream& out, std::uint32_t v) {
    char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
    out.write(b, 4);
}

void put16(std::ostream& out, std::uint16_t v) {
    char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
    out.write(b, 2);
}

// Pulls `epoch=...` out of a LIST/INFO chunk body.
std::optional<Timestamp> epoch_from_info(const std::vector<char>& body) {
    if (body.size() < 4 || std::memcmp(body.data(), "INFO", 4) != 0)
        return std::nullopt;
    std::size_t pos = 4;
    while (pos + 8 <= body.size()) {
        std::string id(body.data() + pos, 4);
        std::uint32_t size = le32(body.data() + pos + 4);
        pos += 8;
        if (pos + size > body.size())
            throw FormatError("LIST", "INFO sub-chunk '" + id + "' overruns its parent");
        if (id == "ICMT") {
            std::string text(body.data() + pos, size);
            text.erase(std::find(text.begin(), text.end(), '\0'), text.end());
            constexpr std::string_view key = "epoch=";
            if (text.rfind(key, 0) == 0) {
                try {
                    return parse_timestamp(std::string_view(text).substr(key.size()));
                } catch (const ParseError& e) {
                    throw FormatError("LIST", std::string("bad epoch comment: ") + e.what());
                }
            }
        }
        pos += size + (size & 1U);
    }
    return std::nullopt;
}

} // namespace

WavReader::WavReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_)
        throw IoError("cannot open '" + path + "'");
    char header[12];
    if (!in_.read(header, 12) || std::memcmp(header, "RIFF", 4) != 0 || std::memcmp(header + 8, "WAVE", 4) != 0)
        throw FormatError("RIFF", "not a RIFF/WAVE file");

    bool have_fmt = false;
    std::uint16_t format = 0, block_align = 0;
    while (true) {
        char chunk[8];
        if (!in_.read(chunk, 8))
            throw FormatError("data", "missing data chunk");
        std::string id(chunk, 4);
        std::uint32_t size = le32(chunk + 4);
        if (id == "data") {
            if (!have_fmt)
                throw FormatError("fmt ", "data chunk precedes fmt chunk");
            if (block_align == 0 || size % block_align != 0)
                throw FormatError("data", "size is not a whole number of frames");
            auto here = in_.tellg();
            in_.seekg(0, std::ios::end);
            auto available = static_cast<std::uint64_t>(in_.tellg() - here);
            in_.seekg(here);
            if (available < size)
                throw FormatError("data", "truncated: header declares " + std::to_string(size) + " bytes, file holds " +
                                              std::to_string(available));
            info_.frames = size / block_align;
            break;
        }
        std::vector<char> body(size);
        if (!in_.read(body.data(), size))
            throw FormatError(id, "truncated chunk");
        if (size & 1U)
            in_.ignore(1);
        if (id == "fmt ") {
            if (size < 16)
                throw FormatError("fmt ", "chunk too short");
            format = le16(body.data());
            info_.channels = le16(body.data() + 2);
            info_.sample_rate = static_cast<int>(le32(body.data() + 4));
            block_align = le16(body.data() + 12);
            info_.bits_per_sample = le16(body.data() + 14);
            if (format == kFormatExtensible) {
                if (size < 40)
                    throw FormatError("fmt ", "extensible format chunk too short");
                format = le16(body.data() + 24);
            }
            info_.is_float = format == kFormatFloat;
            if (format != kFormatPcm && format != kFormatFloat)
                throw FormatError("fmt ", "unsupported format tag " + std::to_string(format));
            bool ok_bits = info_.is_float ? info_.bits_per_sample == 32
                                          : (info_.bits_per_sample == 16 || info_.bits_per_sample == 24);
            if (!ok_bits)
                throw FormatError("fmt ", "unsupported sample width " + std::to_string(info_.bits_per_sample));
            if (info_.channels < 1 || info_.channels > 2)
                throw FormatError("fmt ", "unsupported channel count " + std::to_string(info_.channels));
            if (info_.sample_rate <= 0)
                throw FormatError("fmt ", "invalid sample rate");
            if (block_align != info_.channels * info_.bits_per_sample / 8)
                throw FormatError("fmt ", "inconsistent block alignment");
            have_fmt = true;
        } else if (id == "LIST") {
            if (auto epoch = epoch_from_info(body))
                info_.epoch = epoch;
        }
    }
}

std::size_t WavReader::read(std::span<float> out) {
    auto frames = static_cast<std::size_t>(std::min<std::uint64_t>(out.size(), frames_remaining()));
    const std::size_t width = static_cast<std::size_t>(info_.bits_per_sample / 8);
    const std::size_t channels = static_cast<std::size_t>(info_.channels);
    raw_.resize(frames * width * channels);
    if (!in_.read(raw_.data(), static_cast<std::streamsize>(raw_.size())))
        throw FormatError("data", "unexpected end of sample data");
    const char* p = raw_.data();
    for (std::size_t i = 0; i < frames; ++i) {
        double sum = 0.0;
        for (std::size_t c = 0; c < channels; ++c, p += width) {
            if (info_.is_float) {
                sum += std::bit_cast<float>(le32(p));
            } else if (width == 2) {
                sum += static_cast<std::int16_t>(le16(p)) / 32768.0;
            } else {
                auto v = static_cast<std::int32_t>(le32(std::array<char, 4>{0, p[0], p[1], p[2]}.data()));
                sum += (v >> 8) / 8388608.0;
            }
        }
        out[i] = static_cast<float>(sum / static_cast<double>(channels));
    }
    position_ += frames;
    return frames;
}

WavWriter::WavWriter(const std::string& path, int sample_rate, WavEncoding encoding, std::optional<Timestamp> epoch)
    : out_(path, std::ios::binary | std::ios::trunc), encoding_(encoding) {
    if (!out_)
        throw IoError("cannot create '" + path + "'");
    const std::uint16_t bits = encoding == WavEncoding::float32 ? 32 : 16;
    out_.write("RIFF", 4);
    riff_size_pos_ = out_.tellp();
    put32(out_, 0);
    out_.write("WAVE", 4);
    out_.write("fmt ", 4);
    put32(out_, 16);
    put16(out_, encoding == WavEncoding::float32 ? kFormatFloat : kFormatPcm);
    put16(out_, 1);
    put32(out_, static_cast<std::uint32_t>(sample_rate));
    put32(out_, static_cast<std::uint32_t>(sample_rate) * bits / 8);
    put16(out_, bits / 8);
    put16(out_, bits);
    if (epoch) {
        std::string comment = "epoch=" + format_utc(*epoch);
        comment.push_back('\0');
        if (comment.size() & 1U)
            comment.push_back('\0');
        out_.write("LIST", 4);
        put32(out_, static_cast<std::uint32_t>(4 + 8 + comment.size()));
        out_.write("INFO", 4);
        out_.write("ICMT", 4);
        put32(out_, static_cast<std::uint32_t>(comment.size()));
        out_.write(comment.data(), static_cast<std::streamsize>(comment.size()));
    }
    out_.write("data", 4);
    data_size_pos_ = out_.tellp();
    put32(out_, 0);
}

WavWriter::~WavWriter() {
    try {
        close();
    } catch (...) {
    }
}

void WavWriter::write(std::span<const float> samples) {
    for (float s : samples) {
        if (encoding_ == WavEncoding::float32) {
            put32(out_, std::bit_cast<std::uint32_t>(s));
            data_bytes_ += 4;
        } else {
            double clamped = std::clamp(static_cast<double>(s), -1.0, 32767.0 / 32768.0);
            put16(out_, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(clamped * 32768.0))));
            data_bytes_ += 2;
        }
    }
}

void WavWriter::close() {
    if (closed_)
        return;
    closed_ = true;
    auto end = out_.tellp();
    out_.seekp(data_size_pos_);
    put32(out_, static_cast<std::uint32_t>(data_bytes_));
    out_.seekp(riff_size_pos_);
    put32(out_, static_cast<std::uint32_t>(static_cast<std::streamoff>(end) - 8));
    out_.close();
    if (!out_)
        throw IoError("failed to finalize wav file");
}

} // namespace soundgrid
