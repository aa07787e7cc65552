#pragma once

#include "json.hpp"

namespace floodens {

/**
 * One threshold-exceeding excursion. Times are hours from the start of the
 * series it was detected in: T is the time of the maximum, T_L / T_R the up-
 * and down-crossings of the threshold, W = T_R - T_L and D = (T - T_L) / W.
 * `partial` marks excursions cut by the series boundary.
 */
struct PeakParams {
    double H = 0.0;
    double T = 0.0;
    double T_L = 0.0;
    double T_R = 0.0;
    double W = 0.0;
    double D = 0.0;
    bool partial = false;

    friend bool operator==(const PeakParams&, const PeakParams&) = default;
};

void to_json(nlohmann::json& j, const PeakParams& p);
void from_json(const nlohmann::json& j, PeakParams& p);

}  // namespace floodens
