#pragma once

#include <stdexcept>
#include <string>

namespace floodens {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define FLOODENS_ERROR(Name)                                   \
    class Name : public Error {                                \
    public:                                                    \
        explicit Name(const std::string& what) : Error(what) {} \
    }

FLOODENS_ERROR(InvalidArgument);
FLOODENS_ERROR(InvalidSeries);
FLOODENS_ERROR(MismatchedStep);
FLOODENS_ERROR(OutOfRange);
FLOODENS_ERROR(EmptyOverlap);
FLOODENS_ERROR(EmptySeries);
FLOODENS_ERROR(InsufficientOverlap);
FLOODENS_ERROR(NoPairs);
FLOODENS_ERROR(InsufficientPairs);
FLOODENS_ERROR(InsufficientData);
FLOODENS_ERROR(DegenerateDesign);
FLOODENS_ERROR(EmptyHistory);
FLOODENS_ERROR(MissingMember);
FLOODENS_ERROR(NoForecastsAtIssue);
FLOODENS_ERROR(TooFewSources);
FLOODENS_ERROR(InsufficientCandidates);
FLOODENS_ERROR(NoStartObservations);
FLOODENS_ERROR(InsufficientArchive);
FLOODENS_ERROR(NoStartOverlap);
FLOODENS_ERROR(NoCandidates);
FLOODENS_ERROR(HistoryTooShort);
FLOODENS_ERROR(UnknownState);
FLOODENS_ERROR(MissingSourcePeak);
FLOODENS_ERROR(ShiftOutOfRange);
FLOODENS_ERROR(NoPeakInSource);
FLOODENS_ERROR(NoCombinedPeak);
FLOODENS_ERROR(UnboundVariable);
FLOODENS_ERROR(ParseError);
FLOODENS_ERROR(DataGap);

#undef FLOODENS_ERROR

}  // namespace floodens
