#include "wptsched/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "parallel.hpp"
#include "wptsched/errors.hpp"

namespace wpt {

namespace {

std::string num(double x) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, end);
}

std::string fixed(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

struct Job {
    std::size_t n_nodes;
    int slot_minislots;
    std::string design;
    std::optional<TxProbDesign> design_value;
    StrategyKind kind;
    std::uint64_t seed;
};

struct JobResult {
    std::optional<RunMetrics> metrics;
    std::string error;
    std::string trace;
};

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << content;
    if (!out.flush()) throw IoError("failed writing '" + path.string() + "'");
}

std::string trace_row(const Job& job, std::string_view strategy, const SlotTrace& t) {
    std::ostringstream row;
    row << job.n_nodes << ',' << job.slot_minislots << ',' << job.design << ',' << strategy << ','
        << job.seed << ',' << t.slot << ',' << to_string(t.outcome) << ',';
    for (std::size_t i = 0; i < t.transmitters.size(); ++i)
        row << (i ? ";" : "") << t.transmitters[i];
    row << ',';
    if (t.recipient) row << *t.recipient;
    row << ',' << t.energy_levels << ',';
    for (std::size_t i = 0; i < t.nodes.size(); ++i)
        row << (i ? ";" : "") << t.nodes[i].battery << ':' << t.nodes[i].queue;
    row << '\n';
    return row.str();
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

template <class T>
T field(const std::string& text, std::size_t line_no) {
    T value{};
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || end != text.data() + text.size())
        throw ValidationError("aggregate CSV line " + std::to_string(line_no) + ": bad field '" +
                              text + "'");
    return value;
}

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> rank(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
        i = j + 1;
    }
    return rank;
}

}  // namespace

void require_valid(const ExperimentSpec& spec) {
    std::vector<std::string> problems;
    auto check = [&](bool ok, std::string message) {
        if (!ok) problems.push_back(std::move(message));
    };
    check(!spec.n_values.empty(), "the n_nodes grid is empty");
    for (const auto n : spec.n_values) check(n >= 1, "n_nodes values must be at least 1");
    check(!spec.slot_minislots.empty(), "the slot_minislots grid is empty");
    for (const int t : spec.slot_minislots) check(t >= 1, "slot_minislots values must be at least 1");
    check(spec.minislot > 0.0, "minislot must be positive");
    check(spec.arrival_minislots >= 1, "arrival_minislots must be at least 1");
    check(!spec.designs.empty(), "the design list is empty");
    check(!spec.strategies.empty(), "the strategy list is empty");
    check(!spec.seeds.empty(), "at least one seed is required");
    check(spec.horizon_minislots > 0 || spec.slots >= 1, "slots must be at least 1");
    for (const auto& name : spec.strategies) {
        if (name == "ehmdp") continue;
        try {
            parse_strategy(name);
        } catch (const ValidationError& e) {
            problems.push_back(e.what());
        }
    }
    for (const auto& d : spec.designs) {
        try {
            require_valid(d);
        } catch (const ValidationError& e) {
            problems.push_back(e.what());
        }
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));
}

Scenario scenario_at(const ExperimentSpec& spec, std::size_t n_nodes, int slot_minislots) {
    Scenario s = spec.base;
    s.network.n_nodes = n_nodes;
    s.network.slot_len = slot_minislots * spec.minislot;
    s.network.arrival_period = spec.arrival_minislots * spec.minislot;
    s.network.battery_capacity = s.network.battery_levels * s.network.battery_quantum;
    return s;
}

std::uint64_t slots_at(const ExperimentSpec& spec, int slot_minislots) {
    if (spec.horizon_minislots == 0) return spec.slots;
    return spec.horizon_minislots / static_cast<std::uint64_t>(std::max(1, slot_minislots));
}

std::string AggregateRow::label() const {
    return design == "-" ? strategy : strategy + "[" + design + "]";
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const LogSink& log) {
    require_valid(spec);
    ExperimentResult result;
    auto notice = [&](std::string message) {
        if (log) log(message);
        result.notices.push_back(std::move(message));
    };

    std::error_code ec;
    std::filesystem::create_directories(spec.out, ec);
    if (ec || !std::filesystem::is_directory(spec.out))
        throw IoError("cannot create output directory '" + spec.out.string() + "'");

    std::vector<Job> jobs;
    for (const auto n : spec.n_values) {
        for (const int t : spec.slot_minislots) {
            const Scenario scenario = scenario_at(spec, n, t);
            for (const auto& name : spec.strategies) {
                StrategyKind kind;
                if (name == "ehmdp") {
                    const auto states = joint_state_count(scenario.network);
                    if (states <= spec.state_budget) {
                        kind = StrategyKind::ehmdp_exact;
                    } else {
                        kind = StrategyKind::ehmdp_approx;
                        notice("n_nodes=" + std::to_string(n) + " slot_minislots=" +
                               std::to_string(t) + ": " + std::to_string(states) +
                               " joint states exceed the budget of " +
                               std::to_string(spec.state_budget) + "; using ehmdp-approx");
                    }
                } else {
                    kind = parse_strategy(name);
                }
                if (kind == StrategyKind::eqat) {
                    for (const auto& d : spec.designs)
                        for (const auto seed : spec.seeds)
                            jobs.push_back({n, t, d.label(), d, kind, seed});
                } else {
                    for (const auto seed : spec.seeds)
                        jobs.push_back({n, t, "-", std::nullopt, kind, seed});
                }
            }
        }
    }

    std::vector<JobResult> results(jobs.size());
    detail::parallel_chunks(
        jobs.size(),
        [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const auto& job = jobs[i];
                auto& out = results[i];
                try {
                    Strategy strategy;
                    strategy.kind = job.kind;
                    strategy.design = job.design_value;
                    TraceSink sink;
                    std::string buffer;
                    const auto name = to_string(job.kind);
                    if (spec.trace)
                        sink = [&](const SlotTrace& t) { buffer += trace_row(job, name, t); };
                    out.metrics = run_once(scenario_at(spec, job.n_nodes, job.slot_minislots),
                                           strategy, job.seed, slots_at(spec, job.slot_minislots),
                                           spec.state_budget, sink);
                    out.trace = std::move(buffer);
                } catch (const Error& e) {
                    out.error = e.what();
                }
            }
        },
        1);

    std::set<std::tuple<std::size_t, int, std::string, std::string>> reported;
    std::string trace;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto& job = jobs[i];
        const std::string name(to_string(job.kind));
        if (!results[i].metrics) {
            if (reported.emplace(job.n_nodes, job.slot_minislots, name, results[i].error).second) {
                result.failures.push_back({job.n_nodes, job.slot_minislots, name, results[i].error});
                notice("grid point n_nodes=" + std::to_string(job.n_nodes) + " slot_minislots=" +
                       std::to_string(job.slot_minislots) + " strategy=" + name +
                       " failed: " + results[i].error);
            }
            continue;
        }
        result.records.push_back({job.n_nodes, job.slot_minislots, job.design, name, job.seed,
                                  *results[i].metrics});
        trace += results[i].trace;
    }

    std::ostringstream raw;
    write_raw_csv(raw, result.records);
    std::ostringstream agg;
    write_aggregate_csv(agg, aggregate_records(result.records));
    write_file(spec.out / "raw.csv", raw.str());
    write_file(spec.out / "aggregate.csv", agg.str());
    write_file(spec.out / "manifest.json", manifest_json(spec));
    if (spec.trace)
        write_file(spec.out / "trace.csv",
                   "n_nodes,slot_minislots,design,strategy,seed,slot,outcome,transmitters,"
                   "recipient,energy_levels,state\n" +
                       trace);
    return result;
}

void write_raw_csv(std::ostream& out, std::span<const RunRecord> records) {
    out << kRawHeader << '\n';
    for (const auto& r : records) {
        const auto& m = r.metrics;
        out << r.n_nodes << ',' << r.slot_minislots << ',' << r.design << ',' << r.strategy << ','
            << r.seed << ',' << m.slots << ',' << m.generated << ',' << m.delivered << ','
            << m.dropped() << ',' << m.in_queue_final << ',' << m.collisions << ','
            << num(m.throughput_pps()) << ',' << num(m.loss_rate()) << '\n';
    }
}

std::vector<AggregateRow> aggregate_records(std::span<const RunRecord> records) {
    using Key = std::tuple<std::size_t, int, std::string, std::string>;
    std::vector<Key> order;
    std::map<Key, std::vector<RunMetrics>> groups;
    std::map<Key, std::uint64_t> slots;
    for (const auto& r : records) {
        Key key{r.n_nodes, r.slot_minislots, r.design, r.strategy};
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) {
            order.push_back(key);
            slots[key] = r.metrics.slots;
        }
        it->second.push_back(r.metrics);
    }
    std::vector<AggregateRow> rows;
    for (const auto& key : order) {
        const auto agg = aggregate(groups[key]);
        AggregateRow row;
        std::tie(row.n_nodes, row.slot_minislots, row.design, row.strategy) = key;
        row.runs = agg.runs.size();
        row.slots = slots[key];
        row.throughput_pps = agg.throughput_pps;
        row.loss_rate = agg.loss_rate;
        row.delivered = agg.delivered;
        row.generated = agg.generated.mean;
        row.dropped = agg.dropped.mean;
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_aggregate_csv(std::ostream& out, std::span<const AggregateRow> rows) {
    out << kAggregateHeader << '\n';
    for (const auto& r : rows) {
        out << r.n_nodes << ',' << r.slot_minislots << ',' << r.design << ',' << r.strategy << ','
            << r.runs << ',' << r.slots << ',' << num(r.throughput_pps.mean) << ','
            << num(r.throughput_pps.std_error) << ',' << num(r.loss_rate.mean) << ','
            << num(r.loss_rate.std_error) << ',' << num(r.delivered.mean) << ','
            << num(r.delivered.std_error) << ',' << num(r.generated) << ',' << num(r.dropped)
            << '\n';
    }
}

std::vector<AggregateRow> read_aggregate_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("aggregate CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kAggregateHeader)
        throw ValidationError("aggregate CSV header mismatch: expected '" +
                              std::string(kAggregateHeader) + "'");
    std::vector<AggregateRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_fields(line);
        if (f.size() != 14)
            throw ValidationError("aggregate CSV line " + std::to_string(line_no) + ": expected 14 fields, got " +
                                  std::to_string(f.size()));
        AggregateRow r;
        r.n_nodes = field<std::size_t>(f[0], line_no);
        r.slot_minislots = field<int>(f[1], line_no);
        r.design = f[2];
        r.strategy = f[3];
        r.runs = field<std::size_t>(f[4], line_no);
        r.slots = field<std::uint64_t>(f[5], line_no);
        r.throughput_pps = {field<double>(f[6], line_no), field<double>(f[7], line_no)};
        r.loss_rate = {field<double>(f[8], line_no), field<double>(f[9], line_no)};
        r.delivered = {field<double>(f[10], line_no), field<double>(f[11], line_no)};
        r.generated = field<double>(f[12], line_no);
        r.dropped = field<double>(f[13], line_no);
        rows.push_back(std::move(r));
    }
    return rows;
}

Order compare(const MetricSummary& a, const MetricSummary& b) {
    const double se = std::hypot(a.std_error, b.std_error);
    const double diff = a.mean - b.mean;
    if (diff == 0.0 || std::abs(diff) < se) return Order::tie;
    return diff > 0.0 ? Order::greater : Order::less;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ValidationError("spearman: series differ in length");
    if (x.size() < 2) return 0.0;
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

Report make_report(std::span<const AggregateRow> rows) {
    Report report;
    std::vector<std::pair<std::size_t, int>> points;
    for (const auto& r : rows) {
        const std::pair key{r.n_nodes, r.slot_minislots};
        if (std::find(points.begin(), points.end(), key) == points.end()) points.push_back(key);
    }
    for (const auto& [n, t] : points) {
        PointRanking ranking{n, t, {}, {}};
        for (const auto& r : rows) {
            if (r.n_nodes != n || r.slot_minislots != t) continue;
            ranking.by_throughput.push_back({r.label(), r.throughput_pps, false});
            ranking.by_loss.push_back({r.label(), r.loss_rate, false});
        }
        std::stable_sort(ranking.by_throughput.begin(), ranking.by_throughput.end(),
                         [](const auto& a, const auto& b) { return a.value.mean > b.value.mean; });
        std::stable_sort(ranking.by_loss.begin(), ranking.by_loss.end(),
                         [](const auto& a, const auto& b) { return a.value.mean < b.value.mean; });
        for (auto* list : {&ranking.by_throughput, &ranking.by_loss})
            for (std::size_t i = 1; i < list->size(); ++i)
                (*list)[i].tied_with_previous =
                    compare((*list)[i - 1].value, (*list)[i].value) == Order::tie;
        report.rankings.push_back(std::move(ranking));
    }

    std::vector<std::pair<std::size_t, std::string>> series;
    for (const auto& r : rows) {
        const std::pair key{r.n_nodes, r.label()};
        if (std::find(series.begin(), series.end(), key) == series.end()) series.push_back(key);
    }
    for (const auto& [n, label] : series) {
        std::vector<const AggregateRow*> pts;
        for (const auto& r : rows)
            if (r.n_nodes == n && r.label() == label) pts.push_back(&r);
        if (pts.size() < 2) continue;
        std::stable_sort(pts.begin(), pts.end(),
                         [](auto a, auto b) { return a->slot_minislots < b->slot_minislots; });
        TrendFlag flag;
        flag.n_nodes = n;
        flag.label = label;
        std::vector<double> t, thr, loss;
        for (const auto* p : pts) {
            flag.slot_minislots.push_back(p->slot_minislots);
            t.push_back(p->slot_minislots);
            thr.push_back(p->throughput_pps.mean / p->slot_minislots);
            loss.push_back(p->loss_rate.mean);
        }
        flag.throughput_rho = spearman(t, thr);
        flag.loss_rho = spearman(t, loss);
        flag.throughput_non_increasing = flag.throughput_rho <= 0.0;
        flag.loss_non_decreasing = flag.loss_rho >= 0.0;
        report.trends.push_back(std::move(flag));
    }
    return report;
}

void write_report(std::ostream& out, const Report& report) {
    auto chain = [&](const std::vector<RankEntry>& list, const char* sep) {
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (i) out << (list[i].tied_with_previous ? " ~ " : sep);
            out << list[i].label << ' ' << fixed(list[i].value.mean, 4) << " ("
                << fixed(list[i].value.std_error, 4) << ')';
        }
        out << '\n';
    };
    out << "ordering per grid point ('~' marks a tie within one combined standard error)\n";
    for (const auto& r : report.rankings) {
        out << "n_nodes=" << r.n_nodes << " slot_minislots=" << r.slot_minislots << '\n';
        out << "  throughput: ";
        chain(r.by_throughput, " > ");
        out << "  loss rate:  ";
        chain(r.by_loss, " < ");
    }
    if (report.trends.empty()) return;
    out << "\ntrend over slot length (Spearman rank correlation; throughput per mini-slot)\n";
    for (const auto& f : report.trends) {
        out << "n_nodes=" << f.n_nodes << ' ' << f.label << " slot_minislots=";
        for (std::size_t i = 0; i < f.slot_minislots.size(); ++i)
            out << (i ? "," : "") << f.slot_minislots[i];
        out << "  throughput rho=" << fixed(f.throughput_rho, 3)
            << (f.throughput_non_increasing ? " non-increasing" : " INCREASING")
            << "  loss rho=" << fixed(f.loss_rho, 3)
            << (f.loss_non_decreasing ? " non-decreasing" : " DECREASING") << '\n';
    }
}

}  // namespace wpt
