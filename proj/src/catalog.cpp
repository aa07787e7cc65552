#include "floodens/catalog.hpp"

#include "floodens/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace floodens {

std::size_t IssueForecasts::present_count() const {
    return static_cast<std::size_t>(
        std::count_if(series.begin(), series.end(), [](const auto& s) { return s.has_value(); }));
}

std::optional<std::size_t> IssueForecasts::index_of(const std::string& source_id) const {
    auto it = std::find(source_ids.begin(), source_ids.end(), source_id);
    if (it == source_ids.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - source_ids.begin());
}

SourceCatalog::SourceCatalog(std::vector<std::string> sources, TimeSeries observations,
                             std::vector<ForecastRecord> forecasts, CatalogLimits limits)
    : sources_(std::move(sources)),
      observations_(std::move(observations)),
      by_source_(sources_.size()),
      limits_(limits) {
    if (sources_.empty()) {
        throw InvalidArgument("catalog needs at least one source");
    }
    if (std::set<std::string>(sources_.begin(), sources_.end()).size() != sources_.size()) {
        throw InvalidArgument("duplicate source id in catalog");
    }
    if (limits_.issue_interval_hours < 1) {
        throw InvalidArgument("issue interval must be >= 1 hour");
    }
    for (auto& rec : forecasts) {
        auto idx = source_index(rec.source_id);
        if (!idx) {
            throw InvalidArgument("forecast references unknown source '" + rec.source_id + "'");
        }
        if (rec.horizon_hours < limits_.min_horizon_hours || rec.horizon_hours > limits_.max_horizon_hours) {
            throw InvalidArgument("horizon " + std::to_string(rec.horizon_hours) + " h of '" + rec.source_id +
                                  "' outside configured bounds");
        }
        if (rec.issue_hour % limits_.issue_interval_hours != 0) {
            throw InvalidArgument("issue hour " + std::to_string(rec.issue_hour) +
                                  " is not a multiple of the issue interval");
        }
        const auto& s = rec.series;
        if (s.start_hour() != rec.issue_hour || s.step_hours() != observations_.step_hours() ||
            static_cast<Hour>(s.size()) * s.step_hours() != rec.horizon_hours) {
            throw InvalidArgument("forecast of '" + rec.source_id + "' at issue " +
                                  std::to_string(rec.issue_hour) + " does not cover exactly its horizon");
        }
        const Hour issue = rec.issue_hour;
        if (!by_source_[*idx].emplace(issue, std::move(rec)).second) {
            throw InvalidArgument("duplicate forecast for one source and issue");
        }
    }
}

std::optional<std::size_t> SourceCatalog::source_index(const std::string& id) const {
    auto it = std::find(sources_.begin(), sources_.end(), id);
    if (it == sources_.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - sources_.begin());
}

const ForecastRecord* SourceCatalog::forecast(std::size_t source, Hour issue_hour) const {
    const auto& m = by_source_.at(source);
    auto it = m.find(issue_hour);
    return it == m.end() ? nullptr : &it->second;
}

std::vector<Hour> SourceCatalog::issues() const {
    std::set<Hour> all;
    for (const auto& m : by_source_) {
        for (const auto& [h, _] : m) {
            all.insert(h);
        }
    }
    return {all.begin(), all.end()};
}

IssueForecasts SourceCatalog::at_issue(Hour issue_hour) const {
    IssueForecasts out;
    out.issue_hour = issue_hour;
    out.source_ids = sources_;
    for (std::size_t i = 0; i < sources_.size(); ++i) {
        const auto* rec = forecast(i, issue_hour);
        out.series.push_back(rec ? std::optional<TimeSeries>(rec->series) : std::nullopt);
    }
    return out;
}

std::vector<ForecastRecord> SourceCatalog::records() const {
    std::vector<ForecastRecord> out;
    for (const auto& m : by_source_) {
        for (const auto& [_, rec] : m) {
            out.push_back(rec);
        }
    }
    return out;
}

std::optional<TimeSeries> SourceCatalog::observed(Hour from_hour, Hour to_hour) const {
    const Hour lo = std::max(from_hour, observations_.start_hour());
    const Hour hi = std::min(to_hour, observations_.end_hour());
    if (lo > hi) {
        return std::nullopt;
    }
    return window(observations_, lo, hi);
}

std::optional<TimeSeries> SourceCatalog::stitched(std::size_t source, Hour from_hour, Hour to_hour) const {
    const auto& m = by_source_.at(source);
    const int step = observations_.step_hours();
    std::vector<double> rev;
    Hour h = to_hour - step;
    for (; h >= from_hour; h -= step) {
        // most recent issue at or before h
        auto it = m.upper_bound(h);
        std::optional<double> v;
        while (it != m.begin()) {
            --it;
            if ((v = it->second.series.value_at(h))) {
                break;
            }
        }
        if (!v) {
            break;
        }
        rev.push_back(*v);
    }
    if (rev.empty()) {
        return std::nullopt;
    }
    std::reverse(rev.begin(), rev.end());
    return TimeSeries(h + step, std::move(rev), step);
}

std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_number(std::string_view text) {
    double v = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw ParseError("not a number: '" + std::string(text) + "'");
    }
    return v;
}

namespace {

std::vector<std::string_view> split_row(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        auto comma = line.find(',', pos);
        out.push_back(line.substr(pos, comma - pos));
        if (comma == std::string_view::npos) {
            break;
        }
        pos = comma + 1;
    }
    return out;
}

Hour parse_hour(std::string_view text) {
    Hour v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw ParseError("not an integer hour: '" + std::string(text) + "'");
    }
    return v;
}

bool next_line(std::istream& in, std::string& line) {
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!line.empty()) {
            return true;
        }
    }
    return false;
}

void expect_header(std::istream& in, std::string_view header) {
    std::string line;
    if (!next_line(in, line) || line != header) {
        throw ParseError("expected CSV header '" + std::string(header) + "'");
    }
}

}  // namespace

TimeSeries read_observations_csv(std::istream& in) {
    expect_header(in, "hour,level_cm");
    std::string line;
    std::optional<Hour> start;
    Hour expected = 0;
    std::vector<double> values;
    while (next_line(in, line)) {
        auto cols = split_row(line);
        if (cols.size() != 2) {
            throw ParseError("observation row needs 2 columns: '" + line + "'");
        }
        const Hour h = parse_hour(cols[0]);
        if (start && h != expected) {
            throw DataGap("observations jump from hour " + std::to_string(expected - 1) + " to " +
                          std::to_string(h));
        }
        if (!start) {
            start = h;
        }
        expected = h + 1;
        values.push_back(parse_number(cols[1]));
    }
    if (!start) {
        throw ParseError("observation CSV has no rows");
    }
    return TimeSeries(*start, std::move(values));
}

void write_observations_csv(std::ostream& out, const TimeSeries& obs) {
    out << "hour,level_cm\n";
    for (std::size_t i = 0; i < obs.size(); ++i) {
        out << obs.time_at(i) << ',' << format_number(obs[i]) << '\n';
    }
}

ForecastTable read_forecasts_csv(std::istream& in) {
    expect_header(in, "source_id,issue_hour,lead_hour,level_cm");
    ForecastTable table;
    struct Pending {
        std::string source;
        Hour issue;
        std::vector<double> values;
    };
    std::optional<Pending> cur;
    auto flush = [&] {
        if (cur) {
            const int horizon = static_cast<int>(cur->values.size());
            table.records.push_back(
                {cur->source, cur->issue, horizon, TimeSeries(cur->issue, std::move(cur->values))});
            cur.reset();
        }
    };
    std::string line;
    while (next_line(in, line)) {
        auto cols = split_row(line);
        if (cols.size() != 4) {
            throw ParseError("forecast row needs 4 columns: '" + line + "'");
        }
        std::string source(cols[0]);
        const Hour issue = parse_hour(cols[1]);
        const Hour lead = parse_hour(cols[2]);
        const double v = parse_number(cols[3]);
        if (!cur || cur->source != source || cur->issue != issue) {
            flush();
            if (lead != 0) {
                throw ParseError("forecast of '" + source + "' at issue " + std::to_string(issue) +
                                 " does not start at lead 0");
            }
            if (std::find(table.sources.begin(), table.sources.end(), source) == table.sources.end()) {
                table.sources.push_back(source);
            }
            cur = Pending{source, issue, {}};
        } else if (lead != static_cast<Hour>(cur->values.size())) {
            throw DataGap("forecast of '" + source + "' at issue " + std::to_string(issue) +
                          " skips lead " + std::to_string(cur->values.size()));
        }
        cur->values.push_back(v);
    }
    flush();
    return table;
}

void write_forecasts_csv(std::ostream& out, const SourceCatalog& catalog) {
    out << "source_id,issue_hour,lead_hour,level_cm\n";
    for (const auto& rec : catalog.records()) {
        for (std::size_t i = 0; i < rec.series.size(); ++i) {
            out << rec.source_id << ',' << rec.issue_hour << ',' << rec.series.time_at(i) - rec.issue_hour
                << ',' << format_number(rec.series[i]) << '\n';
        }
    }
}

SourceCatalog load_catalog(const std::filesystem::path& observations_csv,
                           const std::filesystem::path& forecasts_csv, CatalogLimits limits) {
    std::ifstream obs_in(observations_csv);
    if (!obs_in) {
        throw InvalidArgument("cannot open " + observations_csv.string());
    }
    std::ifstream fc_in(forecasts_csv);
    if (!fc_in) {
        throw InvalidArgument("cannot open " + forecasts_csv.string());
    }
    auto obs = read_observations_csv(obs_in);
    auto table = read_forecasts_csv(fc_in);
    return SourceCatalog(std::move(table.sources), std::move(obs), std::move(table.records), limits);
}

}  // namespace floodens
