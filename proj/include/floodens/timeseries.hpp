#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace floodens {

/// Integer hours since the start of a run.
using Hour = std::int64_t;

/**
 * Uniformly sampled water-level series (cm).
 *
 * Sample i sits at start_hour() + i * step_hours(). Values are non-empty and
 * finite; construction throws InvalidSeries otherwise. Instances are
 * immutable.
 */
class TimeSeries {
public:
    TimeSeries(Hour start_hour, std::vector<double> values, int step_hours = 1);

    Hour start_hour() const noexcept { return start_; }
    int step_hours() const noexcept { return step_; }
    std::size_t size() const noexcept { return values_.size(); }

    /// Time of the last sample.
    Hour end_hour() const noexcept { return time_at(values_.size() - 1); }
    Hour time_at(std::size_t i) const noexcept { return start_ + static_cast<Hour>(i) * step_; }

    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    /// Index of `hour` if it lies on the grid inside the extent.
    std::optional<std::size_t> index_of(Hour hour) const noexcept;
    std::optional<double> value_at(Hour hour) const noexcept;
    bool covers(Hour hour) const noexcept { return index_of(hour).has_value(); }

    friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

private:
    Hour start_;
    int step_;
    std::vector<double> values_;
};

struct AlignedPair {
    Hour hour;
    double a;
    double b;

    friend bool operator==(const AlignedPair&, const AlignedPair&) = default;
};

/// Pairs of values at times present in both series. Throws MismatchedStep.
std::vector<AlignedPair> align(const TimeSeries& a, const TimeSeries& b);

/// Sub-series over [from_hour, to_hour]. Throws OutOfRange / InvalidArgument.
TimeSeries window(const TimeSeries& s, Hour from_hour, Hour to_hour);

/// Constant series on a given grid.
TimeSeries constant_series(Hour start_hour, std::size_t length, double value, int step_hours = 1);

}  // namespace floodens
