#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "wptsched/errors.hpp"
#include "wptsched/experiment.hpp"

namespace wpt {

namespace {

using boost::property_tree::ptree;
using nlohmann::json;

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

template <class T>
T parse_as(std::string_view text, std::string_view key) {
    const std::string t = trim(text);
    T value{};
    auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (t.empty() || ec != std::errc{} || end != t.data() + t.size())
        throw ValidationError("key '" + std::string(key) + "': cannot parse '" + t + "'");
    return value;
}

bool parse_bool(std::string_view text, std::string_view key) {
    std::string t = trim(text);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw ValidationError("key '" + std::string(key) + "': expected a boolean, got '" + t + "'");
}

template <class T>
std::vector<T> parse_list(std::string_view text, std::string_view key) {
    std::vector<T> out;
    for (const auto& item : split_list(text)) out.push_back(parse_as<T>(item, key));
    return out;
}

// Applies one key of a section; returns false for unknown keys.
bool apply_key(ExperimentSpec& spec, bool& designs_given, const std::string& section,
               const std::string& key, const std::string& value) {
    auto& net = spec.base.network;
    auto& ch = spec.base.channel;
    const std::string full = section + "." + key;
    if (section == "network") {
        if (key == "packet_bits") net.packet_bits = parse_as<int>(value, full);
        else if (key == "ber_target") net.ber_target = parse_as<double>(value, full);
        else if (key == "kappa1") net.kappa1 = parse_as<double>(value, full);
        else if (key == "kappa2") net.kappa2 = parse_as<double>(value, full);
        else if (key == "bs_power") net.bs_power = parse_as<double>(value, full);
        else if (key == "transfer_efficiency") net.transfer_efficiency = parse_as<double>(value, full);
        else if (key == "bandwidth") net.bandwidth = parse_as<double>(value, full);
        else if (key == "arrival_prob") net.arrival_prob = parse_as<double>(value, full);
        else if (key == "battery_levels") net.battery_levels = parse_as<int>(value, full);
        else if (key == "battery_quantum") net.battery_quantum = parse_as<double>(value, full);
        else if (key == "queue_cap") net.queue_cap = parse_as<int>(value, full);
        else if (key == "max_modulation") net.max_modulation = parse_as<int>(value, full);
        else if (key == "channel_gain") net.channel_gain = parse_list<double>(value, full);
        else if (key == "discount") net.discount = parse_as<double>(value, full);
        else if (key == "vi_tol") net.vi_tol = parse_as<double>(value, full);
        else return false;
    } else if (section == "channel") {
        if (key == "ref_gain") ch.ref_gain = parse_as<double>(value, full);
        else if (key == "ref_distance") ch.ref_distance = parse_as<double>(value, full);
        else if (key == "path_loss_exp") ch.path_loss_exp = parse_as<double>(value, full);
        else if (key == "min_distance") ch.min_distance = parse_as<double>(value, full);
        else if (key == "max_distance") ch.max_distance = parse_as<double>(value, full);
        else if (key == "fading") ch.fading = parse_bool(value, full);
        else return false;
    } else if (section == "eqat") {
        auto& eq = spec.base.eqat;
        if (key == "design") eq.design = TxProbDesign::parse(trim(value));
        else if (key == "alpha") eq.alpha = parse_as<double>(value, full);
        else if (key == "threshold") eq.threshold = parse_as<double>(value, full);
        else if (key == "backoff_window") eq.backoff_window = parse_as<int>(value, full);
        else return false;
    } else if (section == "baselines") {
        if (key == "p_rc") spec.base.p_rc = parse_as<double>(value, full);
        else return false;
    } else if (section == "solver") {
        if (key == "budget") spec.state_budget = parse_as<std::uint64_t>(value, full);
        else return false;
    } else if (section == "experiment") {
        if (key == "n_nodes") spec.n_values = parse_list<std::size_t>(value, full);
        else if (key == "slot_minislots") spec.slot_minislots = parse_list<int>(value, full);
        else if (key == "minislot") spec.minislot = parse_as<double>(value, full);
        else if (key == "arrival_minislots") spec.arrival_minislots = parse_as<int>(value, full);
        else if (key == "designs") {
            spec.designs.clear();
            for (const auto& d : split_list(value)) spec.designs.push_back(TxProbDesign::parse(d));
            designs_given = true;
        } else if (key == "strategies") spec.strategies = split_list(value);
        else if (key == "slots") spec.slots = parse_as<std::uint64_t>(value, full);
        else if (key == "horizon_minislots") spec.horizon_minislots = parse_as<std::uint64_t>(value, full);
        else if (key == "seeds") spec.seeds = parse_seed_list(value);
        else if (key == "out") spec.out = trim(value);
        else if (key == "trace") spec.trace = parse_bool(value, full);
        else if (key == "initial_battery") spec.base.initial_battery = parse_as<int>(value, full);
        else if (key == "initial_queue") spec.base.initial_queue = parse_as<int>(value, full);
        else return false;
    } else {
        return false;
    }
    return true;
}

void finish(ExperimentSpec& spec) {
    auto& net = spec.base.network;
    net.battery_capacity = net.battery_levels * net.battery_quantum;
    if (!spec.n_values.empty()) net.n_nodes = spec.n_values.front();
    if (!spec.slot_minislots.empty()) net.slot_len = spec.slot_minislots.front() * spec.minislot;
    net.arrival_period = spec.arrival_minislots * spec.minislot;
}

json to_json(const NetworkParams& p) {
    return json{{"n_nodes", p.n_nodes},
                {"packet_bits", p.packet_bits},
                {"ber_target", p.ber_target},
                {"kappa1", p.kappa1},
                {"kappa2", p.kappa2},
                {"bs_power", p.bs_power},
                {"transfer_efficiency", p.transfer_efficiency},
                {"bandwidth", p.bandwidth},
                {"slot_len", p.slot_len},
                {"arrival_period", p.arrival_period},
                {"arrival_prob", p.arrival_prob},
                {"battery_levels", p.battery_levels},
                {"battery_quantum", p.battery_quantum},
                {"battery_capacity", p.battery_capacity},
                {"queue_cap", p.queue_cap},
                {"max_modulation", p.max_modulation},
                {"channel_gain", p.channel_gain},
                {"discount", p.discount},
                {"vi_tol", p.vi_tol}};
}

NetworkParams network_from_json(const json& j) {
    NetworkParams p;
    j.at("n_nodes").get_to(p.n_nodes);
    j.at("packet_bits").get_to(p.packet_bits);
    j.at("ber_target").get_to(p.ber_target);
    j.at("kappa1").get_to(p.kappa1);
    j.at("kappa2").get_to(p.kappa2);
    j.at("bs_power").get_to(p.bs_power);
    j.at("transfer_efficiency").get_to(p.transfer_efficiency);
    j.at("bandwidth").get_to(p.bandwidth);
    j.at("slot_len").get_to(p.slot_len);
    j.at("arrival_period").get_to(p.arrival_period);
    j.at("arrival_prob").get_to(p.arrival_prob);
    j.at("battery_levels").get_to(p.battery_levels);
    j.at("battery_quantum").get_to(p.battery_quantum);
    j.at("battery_capacity").get_to(p.battery_capacity);
    j.at("queue_cap").get_to(p.queue_cap);
    j.at("max_modulation").get_to(p.max_modulation);
    j.at("channel_gain").get_to(p.channel_gain);
    j.at("discount").get_to(p.discount);
    j.at("vi_tol").get_to(p.vi_tol);
    return p;
}

std::vector<std::string> design_labels(const std::vector<TxProbDesign>& designs) {
    std::vector<std::string> out;
    for (const auto& d : designs) out.push_back(d.label());
    return out;
}

}  // namespace

std::vector<std::uint64_t> ExperimentSpec::default_seeds() {
    std::vector<std::uint64_t> seeds(20);
    for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = i + 1;
    return seeds;
}

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto pos = text.find(',', start);
        if (pos == std::string_view::npos) pos = text.size();
        auto item = trim(text.substr(start, pos - start));
        if (!item.empty()) out.push_back(std::move(item));
        start = pos + 1;
    }
    return out;
}

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
    std::vector<std::uint64_t> seeds;
    for (const auto& item : split_list(text)) {
        const auto dash = item.find('-');
        if (dash == std::string::npos) {
            seeds.push_back(parse_as<std::uint64_t>(item, "seeds"));
            continue;
        }
        const auto lo = parse_as<std::uint64_t>(item.substr(0, dash), "seeds");
        const auto hi = parse_as<std::uint64_t>(item.substr(dash + 1), "seeds");
        if (hi < lo) throw ValidationError("seed range '" + item + "' is descending");
        if (hi - lo >= 1'000'000) throw ValidationError("seed range '" + item + "' is too long");
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    }
    if (seeds.empty()) throw ValidationError("seed list is empty");
    return seeds;
}

ExperimentSpec parse_config(std::istream& in) {
    ptree tree;
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    ExperimentSpec spec;
    bool designs_given = false;
    std::vector<std::string> problems;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) {
            problems.push_back("key '" + section + "' appears outside a section");
            continue;
        }
        for (const auto& [key, value] : body) {
            try {
                if (!apply_key(spec, designs_given, section, key, value.data()))
                    problems.push_back("unknown key '" + key + "' in section [" + section + "]");
            } catch (const ValidationError& e) {
                problems.push_back(e.what());
            }
        }
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));
    if (!designs_given) spec.designs = {spec.base.eqat.design};
    finish(spec);
    require_valid(spec);
    return spec;
}

ExperimentSpec load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    if (path.extension() == ".json") {
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse_manifest(buf.str());
    }
    return parse_config(in);
}

std::string manifest_json(const ExperimentSpec& spec) {
    const auto& s = spec.base;
    json network = to_json(s.network);
    json j;
    j["format"] = "wptsched-manifest";
    j["version"] = 1;
    j["spec"] = {
        {"network", network},
        {"channel",
         {{"ref_gain", s.channel.ref_gain},
          {"ref_distance", s.channel.ref_distance},
          {"path_loss_exp", s.channel.path_loss_exp},
          {"min_distance", s.channel.min_distance},
          {"max_distance", s.channel.max_distance},
          {"fading", s.channel.fading}}},
        {"eqat",
         {{"design", s.eqat.design.label()},
          {"alpha", s.eqat.alpha},
          {"threshold", s.eqat.threshold},
          {"backoff_window", s.eqat.backoff_window}}},
        {"baselines", {{"p_rc", s.p_rc}}},
        {"solver", {{"budget", spec.state_budget}}},
        {"experiment",
         {{"n_nodes", spec.n_values},
          {"slot_minislots", spec.slot_minislots},
          {"minislot", spec.minislot},
          {"arrival_minislots", spec.arrival_minislots},
          {"designs", design_labels(spec.designs)},
          {"strategies", spec.strategies},
          {"slots", spec.slots},
          {"horizon_minislots", spec.horizon_minislots},
          {"seeds", spec.seeds},
          {"out", spec.out.generic_string()},
          {"trace", spec.trace},
          {"initial_battery", s.initial_battery},
          {"initial_queue", s.initial_queue}}}};

    json resolved = json::array();
    for (const auto n : spec.n_values) {
        for (const int t : spec.slot_minislots) {
            const Scenario scenario = scenario_at(spec, n, t);
            for (const auto seed : spec.seeds) {
                json entry{{"n_nodes", n}, {"slot_minislots", t}, {"seed", seed},
                           {"slots", slots_at(spec, t)}};
                try {
                    entry["params"] = to_json(resolve(scenario, seed));
                } catch (const Error& e) {
                    entry["error"] = e.what();
                }
                resolved.push_back(std::move(entry));
            }
        }
    }
    j["resolved"] = std::move(resolved);
    return j.dump(2) + "\n";
}

ExperimentSpec parse_manifest(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("manifest: ") + e.what());
    }
    try {
        if (j.at("format") != "wptsched-manifest" || j.at("version") != 1)
            throw ValidationError("manifest: unsupported format or version");
        const auto& s = j.at("spec");
        ExperimentSpec spec;
        spec.base.network = network_from_json(s.at("network"));
        const auto& ch = s.at("channel");
        ch.at("ref_gain").get_to(spec.base.channel.ref_gain);
        ch.at("ref_distance").get_to(spec.base.channel.ref_distance);
        ch.at("path_loss_exp").get_to(spec.base.channel.path_loss_exp);
        ch.at("min_distance").get_to(spec.base.channel.min_distance);
        ch.at("max_distance").get_to(spec.base.channel.max_distance);
        ch.at("fading").get_to(spec.base.channel.fading);
        const auto& eq = s.at("eqat");
        spec.base.eqat.design = TxProbDesign::parse(eq.at("design").get<std::string>());
        eq.at("alpha").get_to(spec.base.eqat.alpha);
        eq.at("threshold").get_to(spec.base.eqat.threshold);
        eq.at("backoff_window").get_to(spec.base.eqat.backoff_window);
        s.at("baselines").at("p_rc").get_to(spec.base.p_rc);
        s.at("solver").at("budget").get_to(spec.state_budget);
        const auto& ex = s.at("experiment");
        ex.at("n_nodes").get_to(spec.n_values);
        ex.at("slot_minislots").get_to(spec.slot_minislots);
        ex.at("minislot").get_to(spec.minislot);
        ex.at("arrival_minislots").get_to(spec.arrival_minislots);
        spec.designs.clear();
        for (const auto& d : ex.at("designs")) spec.designs.push_back(TxProbDesign::parse(d.get<std::string>()));
        ex.at("strategies").get_to(spec.strategies);
        ex.at("slots").get_to(spec.slots);
        ex.at("horizon_minislots").get_to(spec.horizon_minislots);
        ex.at("seeds").get_to(spec.seeds);
        spec.out = ex.at("out").get<std::string>();
        ex.at("trace").get_to(spec.trace);
        ex.at("initial_battery").get_to(spec.base.initial_battery);
        ex.at("initial_queue").get_to(spec.base.initial_queue);
        return spec;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("manifest: ") + e.what());
    }
}

}  // namespace wpt
