#include "occuforge/calendar.hpp"

#include <charconv>

#include <fmt/format.h>

namespace occuforge {

namespace {

bool read_int(std::string_view text, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > text.size()) return false;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (text[i] < '0' || text[i] > '9') return false;
    }
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
    return ec == std::errc{} && ptr == text.data() + pos + len;
}

std::optional<Date> parse_date_prefix(std::string_view text) {
    int y = 0, m = 0, d = 0;
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    if (!read_int(text, 0, 4, y) || !read_int(text, 5, 2, m) || !read_int(text, 8, 2, d)) {
        return std::nullopt;
    }
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                    std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    return Date{ymd};
}

}  // namespace

std::optional<Date> parse_date(std::string_view text) {
    if (text.size() != 10) return std::nullopt;
    return parse_date_prefix(text);
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
    auto date = parse_date_prefix(text);
    if (!date) return std::nullopt;
    if (text.size() != 16 && text.size() != 19) return std::nullopt;
    if ((text[10] != 'T' && text[10] != ' ') || text[13] != ':') return std::nullopt;
    int hh = 0, mm = 0, ss = 0;
    if (!read_int(text, 11, 2, hh) || !read_int(text, 14, 2, mm)) return std::nullopt;
    if (text.size() == 19) {
        if (text[16] != ':' || !read_int(text, 17, 2, ss)) return std::nullopt;
    }
    if (hh > 23 || mm > 59 || ss > 59) return std::nullopt;
    using namespace std::chrono;
    return Timestamp{*date} + hours{hh} + minutes{mm} + seconds{ss};
}

std::string format_date(Date d) {
    std::chrono::year_month_day ymd{d};
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

std::string format_timestamp(Timestamp ts) {
    using namespace std::chrono;
    const Date d = date_of(ts);
    const auto secs = (ts - Timestamp{d}).count();
    const auto hh = secs / 3600;
    const auto mm = (secs / 60) % 60;
    const auto ss = secs % 60;
    if (ss != 0) return fmt::format("{}T{:02d}:{:02d}:{:02d}", format_date(d), hh, mm, ss);
    return fmt::format("{}T{:02d}:{:02d}", format_date(d), hh, mm);
}

int day_of_week(Date d) { return static_cast<int>(std::chrono::weekday{d}.c_encoding()); }

bool is_weekend(Date d) {
    const int dow = day_of_week(d);
    return dow == 0 || dow == 6;
}

}  // namespace occuforge
