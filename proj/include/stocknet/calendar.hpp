#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stocknet {

// Trading-session calendar: a list of [open, close) windows in minutes since
// midnight. Minute slots index the concatenated windows, so the default
// mainland session 09:30-11:30 / 13:00-15:00 yields slots 0..239.
class SessionCalendar {
public:
    struct Window {
        int open_minute;
        int close_minute;
    };

    SessionCalendar() : SessionCalendar({{9 * 60 + 30, 11 * 60 + 30}, {13 * 60, 15 * 60}}) {}

    explicit SessionCalendar(std::vector<Window> windows) : windows_(std::move(windows)) {
        int offset = 0;
        for (const auto& w : windows_) {
            if (w.close_minute <= w.open_minute) throw std::invalid_argument("session window must be non-empty");
            offsets_.push_back(offset);
            offset += w.close_minute - w.open_minute;
        }
        total_ = offset;
    }

    int session_minutes() const { return total_; }

    // Maps "HH:MM" to a session slot; nullopt when outside trading hours.
    std::optional<int> slot_of(std::string_view hhmm) const {
        if (hhmm.size() != 5 || hhmm[2] != ':') return std::nullopt;
        auto dig = [](char c) { return c >= '0' && c <= '9' ? c - '0' : -1; };
        int h1 = dig(hhmm[0]), h2 = dig(hhmm[1]), m1 = dig(hhmm[3]), m2 = dig(hhmm[4]);
        if (h1 < 0 || h2 < 0 || m1 < 0 || m2 < 0) return std::nullopt;
        int minute = (h1 * 10 + h2) * 60 + m1 * 10 + m2;
        for (std::size_t i = 0; i < windows_.size(); ++i) {
            if (minute >= windows_[i].open_minute && minute < windows_[i].close_minute)
                return offsets_[i] + (minute - windows_[i].open_minute);
        }
        return std::nullopt;
    }

    // Inverse of slot_of, for report emission.
    std::string label_of(int slot) const {
        for (std::size_t i = 0; i < windows_.size(); ++i) {
            int len = windows_[i].close_minute - windows_[i].open_minute;
            if (slot < offsets_[i] + len) {
                int minute = windows_[i].open_minute + (slot - offsets_[i]);
                char buf[6];
                buf[0] = static_cast<char>('0' + minute / 600);
                buf[1] = static_cast<char>('0' + (minute / 60) % 10);
                buf[2] = ':';
                buf[3] = static_cast<char>('0' + (minute % 60) / 10);
                buf[4] = static_cast<char>('0' + minute % 10);
                return std::string(buf, 5);
            }
        }
        throw std::out_of_range("slot outside session");
    }

private:
    std::vector<Window> windows_;
    std::vector<int> offsets_;
    int total_ = 0;
};

// Calendar dates are ISO yyyy-mm-dd strings; lexicographic order is
// chronological order, which is all the pipeline needs.
inline bool is_iso_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    auto digit = [](char c) { return c >= '0' && c <= '9'; };
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (!digit(s[i])) return false;
    int month = (s[5] - '0') * 10 + (s[6] - '0');
    int day = (s[8] - '0') * 10 + (s[9] - '0');
    return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

} // namespace stocknet
