#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "wptsched/simulator.hpp"

namespace wpt {

/// A sweep over node counts, slot lengths and E-QAT designs. Slot lengths are
/// given in mini-slots; arrivals keep their own period (arrival_minislots),
/// so a longer slot collects more arrival opportunities.
///
/// The strategy name "ehmdp" resolves per grid point to ehmdp-exact when the
/// joint space fits the state budget and to ehmdp-approx otherwise.
struct ExperimentSpec {
    Scenario base;
    std::vector<std::size_t> n_values{4, 6, 8, 10};
    std::vector<int> slot_minislots{10};
    double minislot = 1e-3;  // seconds
    int arrival_minislots = 10;
    std::vector<TxProbDesign> designs{TxProbDesign::exponential(0.5)};
    std::vector<std::string> strategies{"ehmdp", "fq", "rs", "eqat", "dfq", "rc"};
    std::uint64_t slots = 10'000;
    /// When nonzero, every grid point covers this many mini-slots, so the
    /// slot count is horizon_minislots / slot_minislots.
    std::uint64_t horizon_minislots = 0;
    std::vector<std::uint64_t> seeds = default_seeds();
    std::uint64_t state_budget = kDefaultStateBudget;
    std::filesystem::path out = "results";
    bool trace = false;

    static std::vector<std::uint64_t> default_seeds();

    friend bool operator==(const ExperimentSpec&, const ExperimentSpec&) = default;
};

/// Throws ValidationError listing every problem with the grid.
void require_valid(const ExperimentSpec& spec);

/// Network parameters of one grid point before gains are drawn.
Scenario scenario_at(const ExperimentSpec& spec, std::size_t n_nodes, int slot_minislots);

/// Slot count for one grid point.
std::uint64_t slots_at(const ExperimentSpec& spec, int slot_minislots);

/// INI-style configuration (sections [network], [channel], [eqat],
/// [baselines], [solver], [experiment]); unknown keys are errors.
ExperimentSpec parse_config(std::istream& in);
/// Reads an INI file, or a manifest when the path ends in .json.
ExperimentSpec load_config(const std::filesystem::path& path);

/// Manifest JSON: the full specification plus every resolved NetworkParams.
std::string manifest_json(const ExperimentSpec& spec);
ExperimentSpec parse_manifest(std::string_view json);

/// "1-5,8,10" -> {1, 2, 3, 4, 5, 8, 10}.
std::vector<std::uint64_t> parse_seed_list(std::string_view text);
std::vector<std::string> split_list(std::string_view text);

/// One row of raw.csv.
struct RunRecord {
    std::size_t n_nodes = 0;
    int slot_minislots = 0;
    std::string design;    // "-" for strategies that do not use one
    std::string strategy;  // resolved name
    std::uint64_t seed = 0;
    RunMetrics metrics;
};

struct PointFailure {
    std::size_t n_nodes = 0;
    int slot_minislots = 0;
    std::string strategy;
    std::string message;
};

struct ExperimentResult {
    std::vector<RunRecord> records;
    std::vector<PointFailure> failures;
    std::vector<std::string> notices;
    bool ok() const { return failures.empty(); }
};

using LogSink = std::function<void(std::string_view)>;

/// Runs the grid and writes raw.csv, aggregate.csv and manifest.json (and
/// trace.csv when tracing) into spec.out. Infeasible grid points are recorded
/// in the result and the rest of the grid still runs. Throws IoError when the
/// output directory cannot be written.
ExperimentResult run_experiment(const ExperimentSpec& spec, const LogSink& log = {});

inline constexpr std::string_view kRawHeader =
    "n_nodes,slot_minislots,design,strategy,seed,slots,generated,delivered,dropped,in_queue,"
    "collisions,throughput_pps,loss_rate";
inline constexpr std::string_view kAggregateHeader =
    "n_nodes,slot_minislots,design,strategy,runs,slots,throughput_pps_mean,throughput_pps_stderr,"
    "loss_rate_mean,loss_rate_stderr,delivered_mean,delivered_stderr,generated_mean,dropped_mean";

struct AggregateRow {
    std::size_t n_nodes = 0;
    int slot_minislots = 0;
    std::string design;
    std::string strategy;
    std::size_t runs = 0;
    std::uint64_t slots = 0;
    MetricSummary throughput_pps;
    MetricSummary loss_rate;
    MetricSummary delivered;
    double generated = 0.0;
    double dropped = 0.0;

    /// Strategy name, with the design appended for E-QAT rows.
    std::string label() const;
};

std::vector<AggregateRow> aggregate_records(std::span<const RunRecord> records);
void write_raw_csv(std::ostream& out, std::span<const RunRecord> records);
void write_aggregate_csv(std::ostream& out, std::span<const AggregateRow> rows);
/// Throws ValidationError on a header or field mismatch.
std::vector<AggregateRow> read_aggregate_csv(std::istream& in);

enum class Order { greater, less, tie };

/// a versus b: separated when the gap is at least one combined standard error
/// sqrt(se_a^2 + se_b^2), a tie otherwise.
Order compare(const MetricSummary& a, const MetricSummary& b);

/// Spearman rank correlation with average ranks for ties; 0 when either
/// series is constant.
double spearman(std::span<const double> x, std::span<const double> y);

struct RankEntry {
    std::string label;
    MetricSummary value;
    bool tied_with_previous = false;
};

struct PointRanking {
    std::size_t n_nodes = 0;
    int slot_minislots = 0;
    std::vector<RankEntry> by_throughput;  // best first
    std::vector<RankEntry> by_loss;        // best (lowest) first
};

/// Trend of one series over slot length. Throughput is compared per
/// mini-slot (delivered per slot / slot_minislots) so that grid points with
/// different slot lengths cover the same time.
struct TrendFlag {
    std::size_t n_nodes = 0;
    std::string label;
    std::vector<int> slot_minislots;
    double throughput_rho = 0.0;
    double loss_rho = 0.0;
    bool throughput_non_increasing = false;
    bool loss_non_decreasing = false;
};

struct Report {
    std::vector<PointRanking> rankings;
    std::vector<TrendFlag> trends;  // only for series with two or more slot lengths
};

Report make_report(std::span<const AggregateRow> rows);
void write_report(std::ostream& out, const Report& report);

}  // namespace wpt
