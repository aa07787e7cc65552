#pragma once

#include "floodens/random.hpp"
#include "floodens/scenario.hpp"
#include "floodens/timeseries.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace testutil {

inline floodens::TimeSeries ts(std::vector<double> v, floodens::Hour start = 0) {
    return floodens::TimeSeries(start, std::move(v));
}

inline std::vector<double> random_values(floodens::Rng& rng, std::size_t n, double lo = -10.0, double hi = 10.0) {
    std::vector<double> v(n);
    for (auto& x : v) {
        x = rng.uniform(lo, hi);
    }
    return v;
}

/// Small scenario with `n` noisy, mildly biased sources named s0, s1, ...
inline floodens::ScenarioConfig small_scenario(std::size_t n, int days = 14, double sigma = 2.0) {
    floodens::ScenarioConfig c;
    c.seed = 7;
    c.days = days;
    c.oscillation_cm = 15.0;
    c.noise_corr = 0.5;
    c.peak_schedule = {{150.0, 80.0, 10.0, 0.5}};
    for (std::size_t i = 0; i < n; ++i) {
        floodens::SourceCorruption s;
        s.id = "s" + std::to_string(i);
        s.bias_cm = static_cast<double>(i) - 1.0;
        s.gain = 1.0 + 0.02 * static_cast<double>(i);
        s.noise_sigma_cm = sigma;
        c.sources.push_back(s);
    }
    return c;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& name)
        : path_(std::filesystem::temp_directory_path() / ("floodens_test_" + name)) {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

}  // namespace testutil
