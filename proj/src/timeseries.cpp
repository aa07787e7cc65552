#include "floodens/timeseries.hpp"

#include "floodens/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace floodens {

TimeSeries::TimeSeries(Hour start_hour, std::vector<double> values, int step_hours)
    : start_(start_hour), step_(step_hours), values_(std::move(values)) {
    if (step_ < 1) {
        throw InvalidSeries("step_hours must be >= 1, got " + std::to_string(step_));
    }
    if (values_.empty()) {
        throw InvalidSeries("time series must hold at least one value");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw InvalidSeries("non-finite value at index " + std::to_string(i));
        }
    }
}

std::optional<std::size_t> TimeSeries::index_of(Hour hour) const noexcept {
    const Hour offset = hour - start_;
    if (offset < 0 || offset % step_ != 0) {
        return std::nullopt;
    }
    const auto idx = static_cast<std::size_t>(offset / step_);
    if (idx >= values_.size()) {
        return std::nullopt;
    }
    return idx;
}

std::optional<double> TimeSeries::value_at(Hour hour) const noexcept {
    if (auto idx = index_of(hour)) {
        return values_[*idx];
    }
    return std::nullopt;
}

std::vector<AlignedPair> align(const TimeSeries& a, const TimeSeries& b) {
    if (a.step_hours() != b.step_hours()) {
        throw MismatchedStep("cannot align series with steps " + std::to_string(a.step_hours()) +
                             " and " + std::to_string(b.step_hours()));
    }
    std::vector<AlignedPair> out;
    const int step = a.step_hours();
    if ((a.start_hour() - b.start_hour()) % step != 0) {
        return out;  // grids never meet
    }
    const Hour from = std::max(a.start_hour(), b.start_hour());
    const Hour to = std::min(a.end_hour(), b.end_hour());
    for (Hour h = from; h <= to; h += step) {
        out.push_back({h, *a.value_at(h), *b.value_at(h)});
    }
    return out;
}

TimeSeries window(const TimeSeries& s, Hour from_hour, Hour to_hour) {
    if (from_hour > to_hour) {
        throw InvalidArgument("window: from_hour > to_hour");
    }
    const auto first = s.index_of(from_hour);
    const auto last = s.index_of(to_hour);
    if (!first || !last) {
        if (from_hour < s.start_hour() || to_hour > s.end_hour()) {
            throw OutOfRange("window [" + std::to_string(from_hour) + ", " + std::to_string(to_hour) +
                             "] exceeds series extent [" + std::to_string(s.start_hour()) + ", " +
                             std::to_string(s.end_hour()) + "]");
        }
        throw InvalidArgument("window bounds are not on the series grid");
    }
    auto v = s.values();
    return TimeSeries(from_hour, std::vector<double>(v.begin() + *first, v.begin() + *last + 1),
                      s.step_hours());
}

TimeSeries constant_series(Hour start_hour, std::size_t length, double value, int step_hours) {
    return TimeSeries(start_hour, std::vector<double>(length, value), step_hours);
}

}  // namespace floodens
