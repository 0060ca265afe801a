#include "wptsched/eqat.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "wptsched/errors.hpp"

namespace wpt {

namespace {

std::string format_number(double x) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, end);
}

double parse_number(std::string_view text, std::string_view context) {
    double value = 0.0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size())
        throw ValidationError("bad number '" + std::string(text) + "' in design '" +
                              std::string(context) + "'");
    return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        parts.push_back(text.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

void add_mass(NodeDistribution& dist, NodeState next, double prob, double drops) {
    if (prob <= 0.0) return;
    for (auto& o : dist) {
        if (o.next == next) {
            o.prob += prob;
            o.drop_mass += prob * drops;
            return;
        }
    }
    dist.push_back({next, prob, prob * drops});
}

double no_collision_prob(std::size_t k, std::span<const double> p) {
    double product = 1.0;
    for (std::size_t n = 0; n < p.size(); ++n) {
        if (n == k) continue;
        if (!(p[n] >= 0.0 && p[n] <= 1.0))
            throw ValidationError("transmission probability " + format_number(p[n]) +
                                  " outside [0, 1]");
        product *= 1.0 - p[n];
    }
    return product;
}

}  // namespace

TxProbDesign TxProbDesign::parse(std::string_view text) {
    const auto parts = split(text, ':');
    const auto kind = parts.front();
    if ((kind == "exp" || kind == "exponential") && (parts.size() == 2 || parts.size() == 3)) {
        const double kq = parse_number(parts[1], text);
        const double ke = parts.size() == 3 ? parse_number(parts[2], text) : kq;
        TxProbDesign d{DesignKind::exponential, kq, ke};
        require_valid(d);
        return d;
    }
    if (kind == "sigmoid" && parts.size() == 1) return sigmoid();
    if (kind == "gamma" && (parts.size() == 1 || parts.size() == 3)) {
        TxProbDesign d = gamma(2.0, 1.0);
        if (parts.size() == 3) {
            d.shape = parse_number(parts[1], text);
            d.scale = parse_number(parts[2], text);
        }
        require_valid(d);
        return d;
    }
    throw ValidationError("unknown transmission-probability design '" + std::string(text) +
                          "' (expected exp:RATE[:RATE_E], sigmoid or gamma[:SHAPE:SCALE])");
}

std::string TxProbDesign::label() const {
    switch (kind) {
        case DesignKind::exponential:
            if (kappa_q == kappa_e) return "exp:" + format_number(kappa_q);
            return "exp:" + format_number(kappa_q) + ":" + format_number(kappa_e);
        case DesignKind::sigmoid:
            return "sigmoid";
        case DesignKind::gamma:
            return "gamma:" + format_number(shape) + ":" + format_number(scale);
    }
    return "?";
}

void require_valid(const TxProbDesign& design) {
    switch (design.kind) {
        case DesignKind::exponential:
            if (!(design.kappa_q > 0.0 && design.kappa_e > 0.0))
                throw ValidationError("exponential design rates must be positive");
            break;
        case DesignKind::gamma:
            if (!(design.shape > 0.0 && design.scale > 0.0))
                throw ValidationError("gamma design shape and scale must be positive");
            break;
        case DesignKind::sigmoid:
            break;
    }
}

double tx_prob(const TxProbDesign& design, int e, int q, const NetworkParams& params) {
    if (e < 0 || e > params.battery_levels || q < 0 || q > params.queue_cap)
        throw ValidationError("design evaluated outside the state grid");
    require_valid(design);
    if (q == 0) return 0.0;
    switch (design.kind) {
        case DesignKind::exponential:
            return (1.0 - std::exp(-design.kappa_q * q)) * std::exp(-design.kappa_e * e);
        case DesignKind::sigmoid: {
            constexpr double half_pi = std::numbers::pi / 2.0;
            const double p = std::sin(half_pi * q / params.queue_cap) *
                             std::cos(half_pi * e / params.battery_levels);
            return std::clamp(p, 0.0, 1.0);
        }
        case DesignKind::gamma:
            // q / (scale e) diverges at e = 0, where the regularized gamma tends to 1.
            if (e == 0) return 1.0;
            return boost::math::gamma_p(design.shape, q / (design.scale * e));
    }
    return 0.0;
}

double collision_prob(std::size_t k, std::span<const double> p) {
    return 1.0 - no_collision_prob(k, p);
}

double delivery_mass(std::size_t k, std::span<const double> p, const NetworkParams& params) {
    return packet_success_prob(params) * no_collision_prob(k, p);
}

NodeDistribution collided_transition(NodeState s, std::size_t k, std::span<const double> p,
                                     const EnergyProfile& energy, const NetworkParams& params,
                                     bool normalize) {
    if (!is_valid(s, params)) throw ValidationError("node state out of range");
    const double lambda = params.arrival_prob;
    const int cap = params.queue_cap;
    NodeDistribution dist;
    if (s.queue == 0) {
        add_mass(dist, {s.battery, 1}, lambda, 0.0);
        add_mass(dist, s, 1.0 - lambda, 0.0);
        return dist;
    }

    const double success = packet_success_prob(params);
    const double clear = no_collision_prob(k, p);
    const double collided = 1.0 - clear;
    const int harvested = std::clamp(s.battery + energy.harvest_delta, 0, params.battery_levels);
    const int burned = std::clamp(s.battery - energy.collision_loss, 0, params.battery_levels);
    const int up = std::min(s.queue + 1, cap);
    const double overflow = s.queue == cap ? 1.0 : 0.0;
    const double unchanged = (1.0 - success) * (1.0 - lambda) + success * lambda;

    add_mass(dist, {harvested, up}, (1.0 - success) * lambda * clear, overflow);
    add_mass(dist, {harvested, s.queue - 1}, success * (1.0 - lambda) * clear, 0.0);
    add_mass(dist, {harvested, s.queue}, unchanged * clear, 0.0);
    add_mass(dist, {burned, s.queue}, unchanged * collided, 0.0);
    add_mass(dist, {burned, s.queue - 1}, success * (1.0 - lambda) * collided, 0.0);
    if (normalize) add_mass(dist, {burned, up}, (1.0 - success) * lambda * collided, overflow);
    return dist;
}

void require_valid(const EqatConfig& config) {
    require_valid(config.design);
    if (!(config.alpha > 0.0)) throw ValidationError("eqat alpha must be positive");
    if (!(config.threshold >= 0.0 && config.threshold <= 1.0))
        throw ValidationError("eqat threshold must lie in [0, 1]");
    if (config.backoff_window < 1) throw ValidationError("eqat backoff window must be at least 1");
}

double EqatNodeCtl::effective_p(double alpha) const {
    if (base_p <= 0.0) return 0.0;
    return std::min(1.0, std::pow(1.0 + alpha, fail_count) * base_p);
}

EqatDecision eqat_decide(EqatNodeCtl& ctl, std::size_t k, std::span<const double> beacon,
                         bool sampled, const EqatConfig& config, const EnergyProfile& energy,
                         const NetworkParams& params) {
    EqatDecision d;
    d.modulation = energy.modulation.order;
    ctl.holding = false;
    if (ctl.backoff > 0) {
        --ctl.backoff;
        d.action = EqatAction::backing_off;
        return d;
    }
    if (!sampled) return d;
    d.gate_mass = delivery_mass(k, beacon, params);
    if (d.gate_mass < config.threshold) {
        ++ctl.fail_count;
        ctl.holding = true;
        d.action = EqatAction::hold;
        return d;
    }
    d.action = EqatAction::transmit;
    return d;
}

void eqat_on_collision(EqatNodeCtl& ctl, const EqatConfig& config, std::mt19937_64& rng) {
    ++ctl.fail_count;
    ctl.backoff = 1 + static_cast<int>(
                          uniform_index(rng, static_cast<std::size_t>(config.backoff_window)));
}

void eqat_on_delivery(EqatNodeCtl& ctl) { ctl.fail_count = 0; }

void eqat_refresh(EqatNodeCtl& ctl, NodeState s, const EqatConfig& config,
                  const NetworkParams& params) {
    ctl.base_p = tx_prob(config.design, s.battery, s.queue, params);
}

}  // namespace wpt
