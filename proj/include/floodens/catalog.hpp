#pragma once

#include "floodens/timeseries.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace floodens {

/// Bounds every forecast in a catalog has to respect.
struct CatalogLimits {
    int issue_interval_hours = 6;
    int min_horizon_hours = 60;
    int max_horizon_hours = 192;

    friend bool operator==(const CatalogLimits&, const CatalogLimits&) = default;
};

/// One forecast issue of one source. The series starts at the issue hour and
/// holds horizon_hours / step samples (leads 0 .. horizon - step).
struct ForecastRecord {
    std::string source_id;
    Hour issue_hour;
    int horizon_hours;
    TimeSeries series;

    friend bool operator==(const ForecastRecord&, const ForecastRecord&) = default;
};

/// Forecasts of every catalog source at one issue; missing sources are nullopt.
struct IssueForecasts {
    Hour issue_hour = 0;
    std::vector<std::string> source_ids;
    std::vector<std::optional<TimeSeries>> series;

    std::size_t present_count() const;
    bool complete() const { return present_count() == series.size(); }
    std::optional<std::size_t> index_of(const std::string& source_id) const;
};

/**
 * Sources, their forecasts keyed by (source, issue hour), and the observed
 * record. Immutable after construction; lookups outside the observed extent
 * are misses and are never extrapolated.
 */
class SourceCatalog {
public:
    SourceCatalog(std::vector<std::string> sources, TimeSeries observations,
                  std::vector<ForecastRecord> forecasts, CatalogLimits limits = {});

    const std::vector<std::string>& sources() const noexcept { return sources_; }
    const TimeSeries& observations() const noexcept { return observations_; }
    const CatalogLimits& limits() const noexcept { return limits_; }
    std::optional<std::size_t> source_index(const std::string& id) const;

    const ForecastRecord* forecast(std::size_t source, Hour issue_hour) const;
    /// All issue hours with at least one forecast, ascending.
    std::vector<Hour> issues() const;
    IssueForecasts at_issue(Hour issue_hour) const;
    /// Every record in (source order, issue order).
    std::vector<ForecastRecord> records() const;

    /// Observed values restricted to [from_hour, to_hour]; nullopt when disjoint.
    std::optional<TimeSeries> observed(Hour from_hour, Hour to_hour) const;

    /**
     * Best-available series of a source over [from_hour, to_hour): each hour
     * takes the value from the most recent issue at or before it. Returns the
     * longest contiguous run ending at to_hour - 1, or nullopt if that hour is
     * uncovered.
     */
    std::optional<TimeSeries> stitched(std::size_t source, Hour from_hour, Hour to_hour) const;

    friend bool operator==(const SourceCatalog&, const SourceCatalog&) = default;

private:
    std::vector<std::string> sources_;
    TimeSeries observations_;
    std::vector<std::map<Hour, ForecastRecord>> by_source_;
    CatalogLimits limits_;
};

TimeSeries read_observations_csv(std::istream& in);
void write_observations_csv(std::ostream& out, const TimeSeries& obs);

struct ForecastTable {
    std::vector<std::string> sources;  // order of first appearance
    std::vector<ForecastRecord> records;
};

ForecastTable read_forecasts_csv(std::istream& in);
void write_forecasts_csv(std::ostream& out, const SourceCatalog& catalog);

SourceCatalog load_catalog(const std::filesystem::path& observations_csv,
                           const std::filesystem::path& forecasts_csv, CatalogLimits limits = {});

/// Shortest decimal text that parses back to exactly the same double.
std::string format_number(double v);
double parse_number(std::string_view text);

}  // namespace floodens
