#include "soundgrid/time.hpp"

#include "soundgrid/error.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <map>
#include <mutex>
#include <optional>

namespace soundgrid {

using namespace std::chrono;

namespace {

int read_digits(std::string_view text, std::size_t pos, std::size_t count, std::string_view what) {
    if (pos + count > text.size())
        throw ParseError(text.size(), "truncated " + std::string(what));
    int value = 0;
    for (std::size_t i = pos; i < pos + count; ++i) {
        char c = text[i];
        if (c < '0' || c > '9')
            throw ParseError(i, "expected digit in " + std::string(what));
        value = value * 10 + (c - '0');
    }
    return value;
}

void expect_char(std::string_view text, std::size_t pos, char c) {
    if (pos >= text.size() || text[pos] != c)
        throw ParseError(pos, std::string("expected '") + c + "'");
}

std::string two(int v) {
    std::string s = std::to_string(v);
    return s.size() < 2 ? "0" + s : s;
}

std::string format_offset(Seconds off) {
    auto total = off.count();
    char sign = total < 0 ? '-' : '+';
    total = std::abs(total);
    return sign + two(static_cast<int>(total / 3600)) + ":" + two(static_cast<int>(total / 60 % 60));
}

} // namespace

std::string format_date(year_month_day d) {
    return std::to_string(static_cast<int>(d.year())) + "-" + two(static_cast<int>(static_cast<unsigned>(d.month()))) + "-" +
           two(static_cast<int>(static_cast<unsigned>(d.day())));
}

std::string format_time_of_day(Seconds s) {
    auto v = s.count();
    return two(static_cast<int>(v / 3600)) + ":" + two(static_cast<int>(v / 60 % 60)) + ":" + two(static_cast<int>(v % 60));
}

std::string format_utc(Timestamp t) {
    auto day = floor<days>(t);
    return format_date(year_month_day{day}) + "T" + format_time_of_day(t - day) + "Z";
}

year_month_day parse_date(std::string_view text) {
    int y = read_digits(text, 0, 4, "year");
    expect_char(text, 4, '-');
    int m = read_digits(text, 5, 2, "month");
    expect_char(text, 7, '-');
    int d = read_digits(text, 8, 2, "day");
    if (text.size() != 10)
        throw ParseError(10, "trailing characters after date");
    year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok())
        throw ParseError(0, "invalid calendar date");
    return ymd;
}

Seconds parse_time_of_day(std::string_view text) {
    int h = read_digits(text, 0, 2, "hour");
    expect_char(text, 2, ':');
    int m = read_digits(text, 3, 2, "minute");
    int s = 0;
    if (text.size() > 5) {
        expect_char(text, 5, ':');
        s = read_digits(text, 6, 2, "second");
        if (text.size() != 8)
            throw ParseError(8, "trailing characters after time");
    }
    if (m > 59 || s > 59 || h > 24 || (h == 24 && (m != 0 || s != 0)))
        throw ParseError(0, "time of day out of range");
    return Seconds{h * 3600 + m * 60 + s};
}

Timestamp parse_timestamp(std::string_view text) {
    auto ymd = parse_date(text.substr(0, std::min<std::size_t>(10, text.size())));
    expect_char(text, 10, 'T');
    int h = read_digits(text, 11, 2, "hour");
    expect_char(text, 13, ':');
    int mi = read_digits(text, 14, 2, "minute");
    expect_char(text, 16, ':');
    int s = read_digits(text, 17, 2, "second");
    if (h > 23 || mi > 59 || s > 59)
        throw ParseError(11, "time of day out of range");
    Seconds offset{0};
    if (text.size() == 20 && text[19] == 'Z') {
    } else if (text.size() == 25 && (text[19] == '+' || text[19] == '-')) {
        int oh = read_digits(text, 20, 2, "offset hour");
        expect_char(text, 22, ':');
        int om = read_digits(text, 23, 2, "offset minute");
        offset = Seconds{(oh * 3600 + om * 60) * (text[19] == '-' ? -1 : 1)};
    } else {
        throw ParseError(19, "expected 'Z' or a +hh:mm offset");
    }
    return Timestamp{sys_days{ymd}.time_since_epoch() + hours{h} + minutes{mi} + Seconds{s} - offset};
}

// POSIX TZ rule from the TZif footer, e.g. `CET-1CEST,M3.5.0,M10.5.0/3`.
struct TimeZone::Rule {
    struct Boundary {
        unsigned month = 0, week = 0, weekday = 0;
        Seconds time{7200};
    };
    Seconds std_offset{0};
    std::optional<Seconds> dst_offset;
    Boundary start, end;

    static Rule parse(std::string_view spec);
    Seconds offset_at(Timestamp t) const;

private:
    static sys_seconds boundary_utc(int y, const Boundary& b, Seconds offset) {
        sys_days d;
        if (b.week == 5)
            d = sys_days{year{y} / month{b.month} / weekday{b.weekday}[last]};
        else
            d = sys_days{year{y} / month{b.month} / weekday{b.weekday}[b.week]};
        return sys_seconds{d} + b.time - offset;
    }
};

namespace {

struct RuleCursor {
    std::string_view s;
    std::size_t pos = 0;

    bool done() const { return pos >= s.size(); }
    char peek() const { return done() ? '\0' : s[pos]; }

    void skip_name() {
        if (peek() == '<') {
            auto close = s.find('>', pos);
            if (close == std::string_view::npos)
                throw ConfigError("bad TZ rule '" + std::string(s) + "'");
            pos = close + 1;
            return;
        }
        std::size_t start = pos;
        while (!done() && std::isalpha(static_cast<unsigned char>(peek())))
            ++pos;
        if (pos - start < 3)
            throw ConfigError("bad TZ rule '" + std::string(s) + "'");
    }

    long number() {
        std::size_t start = pos;
        while (!done() && std::isdigit(static_cast<unsigned char>(peek())))
            ++pos;
        if (start == pos)
            throw ConfigError("bad TZ rule '" + std::string(s) + "'");
        return std::strtol(std::string(s.substr(start, pos - start)).c_str(), nullptr, 10);
    }

    // [+-]hh[:mm[:ss]]
    Seconds clock() {
        int sign = 1;
        if (peek() == '+' || peek() == '-') {
            sign = peek() == '-' ? -1 : 1;
            ++pos;
        }
        long total = number() * 3600;
        if (peek() == ':') {
            ++pos;
            total += number() * 60;
            if (peek() == ':') {
                ++pos;
                total += number();
            }
        }
        return Seconds{sign * total};
    }
};

} // namespace

TimeZone::Rule TimeZone::Rule::parse(std::string_view spec) {
    RuleCursor c{spec};
    Rule rule;
    c.skip_name();
    // POSIX offsets are west-positive.
    rule.std_offset = -c.clock();
    if (c.done())
        return rule;
    c.skip_name();
    rule.dst_offset = rule.std_offset + hours{1};
    if (c.peek() != ',' && !c.done())
        rule.dst_offset = -c.clock();
    auto boundary = [&](Boundary& b) {
        if (c.peek() != ',')
            throw ConfigError("TZ rule without transition dates: '" + std::string(spec) + "'");
        ++c.pos;
        if (c.peek() != 'M')
            throw ConfigError("only M-form TZ transition rules are supported: '" + std::string(spec) + "'");
        ++c.pos;
        b.month = static_cast<unsigned>(c.number());
        ++c.pos;
        b.week = static_cast<unsigned>(c.number());
        ++c.pos;
        b.weekday = static_cast<unsigned>(c.number());
        if (c.peek() == '/') {
            ++c.pos;
            b.time = c.clock();
        }
    };
    boundary(rule.start);
    boundary(rule.end);
    return rule;
}

Seconds TimeZone::Rule::offset_at(Timestamp t) const {
    if (!dst_offset)
        return std_offset;
    int y = static_cast<int>(year_month_day{floor<days>(t + std_offset)}.year());
    auto begin = boundary_utc(y, start, std_offset);
    auto finish = boundary_utc(y, end, *dst_offset);
    bool dst = begin < finish ? (t >= begin && t < finish) : !(t >= finish && t < begin);
    return dst ? *dst_offset : std_offset;
}

struct TimeZone::Data {
    std::string name;
    std::vector<std::int64_t> transitions;
    std::vector<Seconds> offsets_after; // offset in effect from transitions[i]
    Seconds initial{0};
    std::optional<Rule> footer;
};

namespace {

std::int64_t read_be(const std::string& buf, std::size_t pos, int bytes) {
    if (pos + static_cast<std::size_t>(bytes) > buf.size())
        throw IoError("truncated TZif data");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
        v = (v << 8) | static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)]);
    if (bytes == 4)
        return static_cast<std::int32_t>(static_cast<std::uint32_t>(v));
    return static_cast<std::int64_t>(v);
}

} // namespace

TimeZone TimeZone::utc() {
    static const TimeZone zone = fixed(Seconds{0});
    return zone;
}

TimeZone TimeZone::fixed(Seconds offset) {
    auto data = std::make_shared<Data>();
    data->name = offset.count() == 0 ? "UTC" : format_offset(offset);
    data->initial = offset;
    return TimeZone{std::move(data)};
}

TimeZone TimeZone::locate(std::string_view name) {
    if (name == "UTC" || name == "Z" || name == "Etc/UTC")
        return utc();
    if (!name.empty() && (name[0] == '+' || name[0] == '-')) {
        RuleCursor c{name};
        auto off = c.clock();
        if (!c.done())
            throw ConfigError("bad fixed offset '" + std::string(name) + "'");
        return fixed(off);
    }
    if (name.find("..") != std::string_view::npos || name.empty() || name.front() == '/')
        throw ConfigError("invalid time zone name '" + std::string(name) + "'");

    static std::mutex cache_mutex;
    static std::map<std::string, std::shared_ptr<const Data>, std::less<>> cache;
    std::lock_guard lock(cache_mutex);
    if (auto it = cache.find(name); it != cache.end())
        return TimeZone{it->second};

    const char* env = std::getenv("TZDIR");
    std::string path = std::string(env && *env ? env : "/usr/share/zoneinfo") + "/" + std::string(name);
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("unknown time zone '" + std::string(name) + "'");
    std::string buf{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (buf.size() < 44 || buf.compare(0, 4, "TZif") != 0)
        throw ConfigError("'" + path + "' is not a TZif file");

    auto data = std::make_shared<Data>();
    data->name = std::string(name);

    auto parse_block = [&](std::size_t at, int time_size) -> std::size_t {
        auto isutcnt = read_be(buf, at + 20, 4), isstdcnt = read_be(buf, at + 24, 4), leapcnt = read_be(buf, at + 28, 4),
             timecnt = read_be(buf, at + 32, 4), typecnt = read_be(buf, at + 36, 4), charcnt = read_be(buf, at + 40, 4);
        std::size_t p = at + 44;
        std::vector<std::int64_t> times;
        for (std::int64_t i = 0; i < timecnt; ++i, p += static_cast<std::size_t>(time_size))
            times.push_back(read_be(buf, p, time_size));
        std::vector<int> idx;
        for (std::int64_t i = 0; i < timecnt; ++i, ++p)
            idx.push_back(static_cast<unsigned char>(buf.at(p)));
        std::vector<Seconds> type_off;
        std::vector<bool> type_dst;
        for (std::int64_t i = 0; i < typecnt; ++i, p += 6) {
            type_off.emplace_back(read_be(buf, p, 4));
            type_dst.push_back(buf.at(p + 4) != 0);
        }
        data->transitions = std::move(times);
        data->offsets_after.clear();
        for (int i : idx)
            data->offsets_after.push_back(type_off.at(static_cast<std::size_t>(i)));
        data->initial = type_off.empty() ? Seconds{0} : type_off[0];
        for (std::size_t i = 0; i < type_off.size(); ++i)
            if (!type_dst[i]) {
                data->initial = type_off[i];
                break;
            }
        p += static_cast<std::size_t>(charcnt) + static_cast<std::size_t>(leapcnt) * static_cast<std::size_t>(time_size + 4) +
             static_cast<std::size_t>(isstdcnt + isutcnt);
        return p;
    };

    std::size_t end = parse_block(0, 4);
    if (buf[4] >= '2') {
        end = parse_block(end, 8);
        if (end < buf.size() && buf[end] == '\n') {
            auto close = buf.find('\n', end + 1);
            if (close != std::string::npos && close > end + 1)
                data->footer = Rule::parse(std::string_view(buf).substr(end + 1, close - end - 1));
        }
    }
    cache.emplace(std::string(name), data);
    return TimeZone{std::move(data)};
}

const std::string& TimeZone::name() const noexcept { return data_->name; }

Seconds TimeZone::offset_at(Timestamp t) const {
    const auto& d = *data_;
    std::int64_t s = t.time_since_epoch().count();
    if (d.transitions.empty() || s < d.transitions.front())
        return d.footer && d.transitions.empty() ? d.footer->offset_at(t) : d.initial;
    if (s >= d.transitions.back() && d.footer)
        return d.footer->offset_at(t);
    auto it = std::upper_bound(d.transitions.begin(), d.transitions.end(), s);
    return d.offsets_after[static_cast<std::size_t>(std::distance(d.transitions.begin(), it) - 1)];
}

Timestamp TimeZone::to_utc(LocalTime local) const {
    Timestamp guess{local.time_since_epoch()};
    // Try the offsets in effect a day either side; pick the earliest consistent one.
    std::optional<Timestamp> best;
    for (auto probe : {guess - hours{24}, guess, guess + hours{24}}) {
        Timestamp candidate = guess - offset_at(probe);
        if (to_local(candidate) == local && (!best || candidate < *best))
            best = candidate;
    }
    if (best)
        return *best;
    return guess - offset_at(guess - hours{24});
}

std::string TimeZone::format_local(Timestamp t) const {
    auto off = offset_at(t);
    auto local = t + off;
    auto day = floor<days>(local);
    return format_date(year_month_day{day}) + "T" + format_time_of_day(local - day) + format_offset(off);
}

LocalHour local_hour(Timestamp t, const TimeZone& tz) {
    auto local = tz.to_local(t);
    auto day = floor<days>(local);
    return {year_month_day{day}, static_cast<int>(floor<hours>(local - day).count())};
}

} // namespace soundgrid
