#include "floodens/cli.hpp"

#include "floodens/catalog.hpp"
#include "floodens/errors.hpp"
#include "floodens/metrics.hpp"
#include "floodens/peaks.hpp"
#include "floodens/pipeline.hpp"
#include "floodens/scenario.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

namespace floodens {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Raised for an output location that already holds results.
struct RefuseOverwrite : Error {
    using Error::Error;
};

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidArgument("cannot read " + path.string());
    }
    return json::parse(in);
}

void prepare_out_dir(const fs::path& dir, bool force) {
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir)) {
            throw InvalidArgument(dir.string() + " exists and is not a directory");
        }
        if (!fs::is_empty(dir) && !force) {
            throw RefuseOverwrite(dir.string() + " is not empty; pass --force to overwrite");
        }
    }
    fs::create_directories(dir);
}

int cmd_generate(const std::optional<std::string>& config_path, const std::string& out_dir, bool force,
                 std::optional<std::uint64_t> seed, std::ostream& out) {
    ScenarioConfig config = config_path ? read_json(*config_path).get<ScenarioConfig>() : standard_benchmark();
    if (seed) {
        config.seed = *seed;
    }
    validate(config);
    prepare_out_dir(out_dir, force);
    const SourceCatalog catalog = generate_catalog(config);
    {
        std::ofstream f(fs::path(out_dir) / "observations.csv");
        write_observations_csv(f, catalog.observations());
    }
    {
        std::ofstream f(fs::path(out_dir) / "forecasts.csv");
        write_forecasts_csv(f, catalog);
    }
    {
        std::ofstream f(fs::path(out_dir) / "scenario.json");
        f << json(config).dump(2) << '\n';
    }
    out << "wrote " << catalog.sources().size() << " sources, " << catalog.issues().size() << " issues to "
        << out_dir << " (scenario " << config_hash(config) << ")\n";
    return exit_code::kOk;
}

struct RunFlags {
    std::optional<std::string> config;
    std::optional<std::string> strategy;
    std::optional<double> theta;
    std::optional<double> threshold;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool force = false;
};

int cmd_run(const RunFlags& flags, std::ostream& out) {
    RunConfig config;
    if (flags.config) {
        const fs::path path(*flags.config);
        config = run_config_from_json(read_json(path), path.parent_path());
    } else {
        config.scenario = standard_benchmark();
    }
    if (flags.strategy) {
        std::optional<double> theta;
        config.strategy = parse_strategy(*flags.strategy, &theta);
        if (theta) {
            config.theta = *theta;
        }
    }
    if (flags.theta) {
        config.theta = *flags.theta;
    }
    if (flags.threshold) {
        config.threshold_cm = *flags.threshold;
    }
    if (flags.seed) {
        config.seed = *flags.seed;
    }
    config.validate();
    const SourceCatalog catalog = load_run_catalog(config);
    prepare_out_dir(flags.out, flags.force);
    const RunResult result = run_pipeline(catalog, config);
    write_run_outputs(result, catalog, config, flags.out);
    out << strategy_label(result) << ": " << result.scored_issues << " scored issues, MAE "
        << format_number(result.summary.mae) << " cm (linear_all " << format_number(result.baseline_summary.mae)
        << " cm), " << result.switches << " switches\n";
    return exit_code::kOk;
}

constexpr const char* kMetricOrder[] = {"mae", "rmse", "dtw", "wmae", "err_stdev", "h_err", "t_err"};

int cmd_compare(const std::vector<std::string>& reports, const std::string& baseline,
                const std::optional<std::string>& out_dir, bool force, std::ostream& out) {
    std::optional<std::string> fingerprint;
    std::vector<std::string> order;
    std::map<std::string, json> summaries;
    for (const auto& path : reports) {
        const json report = read_json(path);
        if (report.value("schema", 0) != 1) {
            throw InvalidArgument(path + " is not a schema 1 report");
        }
        const auto fp = report.at("fingerprint").get<std::string>();
        if (fingerprint && *fingerprint != fp) {
            throw InvalidArgument(path + " was produced from a different scenario");
        }
        fingerprint = fp;
        for (const auto& [name, summary] : report.at("summaries").items()) {
            if (summaries.emplace(name, summary).second) {
                order.push_back(name);
            }
        }
    }
    if (!summaries.contains(baseline)) {
        throw InvalidArgument("no report holds the baseline '" + baseline + "'");
    }
    const json& base = summaries.at(baseline);

    json improvements = json::object();
    for (const auto& name : order) {
        json row = json::object();
        for (const char* metric : kMetricOrder) {
            const json& cand = summaries.at(name);
            if (!base.contains(metric) || !cand.contains(metric)) {
                continue;
            }
            const double b = base.at(metric).get<double>();
            const double c = cand.at(metric).get<double>();
            if (b == 0.0) {
                if (c == 0.0) {
                    row[metric] = 0.0;
                }
                continue;
            }
            row[metric] = (b - c) / b * 100.0;
        }
        improvements[name] = std::move(row);
    }

    out << "improvement vs " << baseline << " (%)\n";
    out << std::left << std::setw(12) << "metric";
    for (const auto& name : order) {
        out << std::right << std::setw(22) << name;
    }
    out << '\n';
    for (const char* metric : kMetricOrder) {
        const bool any = std::any_of(order.begin(), order.end(),
                                     [&](const std::string& n) { return improvements[n].contains(metric); });
        if (!any) {
            continue;
        }
        out << std::left << std::setw(12) << metric;
        for (const auto& name : order) {
            out << std::right << std::setw(22);
            if (improvements[name].contains(metric)) {
                std::ostringstream cell;
                cell << std::fixed << std::setprecision(2) << improvements[name][metric].get<double>();
                out << cell.str();
            } else {
                out << "-";
            }
        }
        out << '\n';
    }

    const json result{{"baseline", baseline},
                      {"fingerprint", *fingerprint},
                      {"improvement_pct", improvements},
                      {"summaries", summaries}};
    if (out_dir) {
        const fs::path target = fs::path(*out_dir) / "comparison.json";
        if (fs::exists(target) && !force) {
            throw RefuseOverwrite(target.string() + " exists; pass --force to overwrite");
        }
        fs::create_directories(*out_dir);
        std::ofstream f(target);
        f << result.dump(2) << '\n';
    }
    return exit_code::kOk;
}

int cmd_peaks(const std::string& csv, double threshold, const std::optional<std::string>& out_dir, bool force,
              std::ostream& out) {
    if (!(threshold > 0.0)) {
        throw InvalidArgument("threshold must be > 0");
    }
    std::ifstream in(csv);
    if (!in) {
        throw InvalidArgument("cannot read " + csv);
    }
    const TimeSeries series = read_observations_csv(in);
    json peaks = json::array();
    for (const auto& p : detect_peaks(series, threshold)) {
        json jp = p;
        jp["start_hour"] = series.start_hour();
        peaks.push_back(std::move(jp));
    }
    const std::string text = peaks.dump(2);
    out << text << '\n';
    if (out_dir) {
        const fs::path target = fs::path(*out_dir) / "peaks.json";
        if (fs::exists(target) && !force) {
            throw RefuseOverwrite(target.string() + " exists; pass --force to overwrite");
        }
        fs::create_directories(*out_dir);
        std::ofstream f(target);
        f << text << '\n';
    }
    return exit_code::kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Combinatorial ensemble building, selection and verification for water level forecasts",
                 "floodens"};
    app.require_subcommand(1);

    std::optional<std::string> gen_config;
    std::string gen_out;
    bool gen_force = false;
    std::optional<std::uint64_t> gen_seed;
    auto* generate = app.add_subcommand("generate", "Write a synthetic scenario as observation and forecast CSVs");
    generate->add_option("--config", gen_config, "Scenario JSON (standard benchmark if omitted)");
    generate->add_option("--out", gen_out, "Output directory")->required();
    generate->add_flag("--force", gen_force, "Overwrite a non-empty output directory");
    generate->add_option("--seed", gen_seed, "Override the scenario seed");

    RunFlags run_flags;
    auto* run = app.add_subcommand("run", "Build, select and verify forecasts issue by issue");
    run->add_option("--config", run_flags.config, "Run configuration JSON (standard benchmark if omitted)");
    run->add_option("--strategy", run_flags.strategy,
                    "linear_all | basic_rules | subset_skill | conservative[(theta)] | symreg_markov | "
                    "peak_transform");
    run->add_option("--theta", run_flags.theta, "Relative improvement needed to switch (conservative)");
    run->add_option("--threshold", run_flags.threshold, "Flood threshold in cm");
    run->add_option("--seed", run_flags.seed, "Seed for stochastic parts of the strategies");
    run->add_option("--out", run_flags.out, "Output directory")->required();
    run->add_flag("--force", run_flags.force, "Overwrite a non-empty output directory");

    std::vector<std::string> cmp_reports;
    std::string cmp_baseline = strategy_name(Strategy::LinearAll);
    std::optional<std::string> cmp_out;
    bool cmp_force = false;
    auto* compare = app.add_subcommand("compare", "Percentage improvement of strategies over a baseline");
    compare->add_option("reports", cmp_reports, "report.json files")->required();
    compare->add_option("--baseline", cmp_baseline, "Strategy to compare against");
    compare->add_option("--out", cmp_out, "Directory for comparison.json");
    compare->add_flag("--force", cmp_force, "Overwrite an existing comparison.json");

    std::string peaks_csv;
    double peaks_threshold = kFloodThresholdCm;
    std::optional<std::string> peaks_out;
    bool peaks_force = false;
    auto* peaks = app.add_subcommand("peaks", "Detect threshold-exceeding peaks in an hour,level_cm CSV");
    peaks->add_option("csv", peaks_csv, "Series CSV")->required();
    peaks->add_option("--threshold", peaks_threshold, "Detection threshold in cm");
    peaks->add_option("--out", peaks_out, "Directory for peaks.json");
    peaks->add_flag("--force", peaks_force, "Overwrite an existing peaks.json");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_code::kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::kConfig;
    }

    try {
        if (generate->parsed()) {
            return cmd_generate(gen_config, gen_out, gen_force, gen_seed, out);
        }
        if (run->parsed()) {
            return cmd_run(run_flags, out);
        }
        if (compare->parsed()) {
            return cmd_compare(cmp_reports, cmp_baseline, cmp_out, cmp_force, out);
        }
        return cmd_peaks(peaks_csv, peaks_threshold, peaks_out, peaks_force, out);
    } catch (const RefuseOverwrite& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::kRefuseOverwrite;
    } catch (const DataGap& e) {
        err << "error: data gap: " << e.what() << '\n';
        return exit_code::kDataGap;
    } catch (const InvalidArgument& e) {
        err << "error: invalid configuration: " << e.what() << '\n';
        return exit_code::kConfig;
    } catch (const ParseError& e) {
        err << "error: unreadable input: " << e.what() << '\n';
        return exit_code::kConfig;
    } catch (const json::exception& e) {
        err << "error: invalid configuration: " << e.what() << '\n';
        return exit_code::kConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::kFailure;
    }
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace floodens
