#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asac/rng.hpp"
#include "asac/tape.hpp"

namespace asac {

// Selector probabilities are kept away from {0,1} so decision log-likelihoods
// stay bounded.
inline constexpr double kProbClampLo = 1e-6;
inline constexpr double kProbClampHi = 1.0 - 1e-6;

/// Per-step measurement choice: bits[i] = 1 means feature i is measured now.
struct SensingDecision {
    std::vector<std::uint8_t> bits;

    SensingDecision() = default;
    explicit SensingDecision(std::vector<std::uint8_t> b) : bits(std::move(b)) {}
    static SensingDecision zeros(std::size_t d) { return SensingDecision(std::vector<std::uint8_t>(d, 0)); }
    static SensingDecision ones(std::size_t d) { return SensingDecision(std::vector<std::uint8_t>(d, 1)); }

    std::size_t dim() const { return bits.size(); }
    std::size_t count() const {
        std::size_t n = 0;
        for (auto b : bits) n += b;
        return n;
    }
};

/// What the networks see at one step. values[i] is the sentinel 0 wherever
/// mask[i] = 0; the mask bit is what disambiguates a sentinel from a measured
/// zero. missing[i] = 1 marks a feature that was selected but absent from the
/// source data (it is presented as unobserved).
struct ObservedVector {
    std::vector<double> values;
    std::vector<std::uint8_t> mask;
    std::vector<std::uint8_t> missing;

    static ObservedVector unobserved(std::size_t d) {
        ObservedVector o;
        o.values.assign(d, 0.0);
        o.mask.assign(d, 0);
        o.missing.assign(d, 0);
        return o;
    }

    std::size_t dim() const { return values.size(); }
};

/// Measurement pricing: per-feature cost c, trade-off weight lambda, the
/// label-dependent multiplier eta (applied when the label indicates the
/// adverse state, y = 1), and per-feature reporting delays tau.
struct CostModel {
    std::vector<double> cost;
    double lambda = 0.0;
    double eta = 1.0;
    std::vector<std::size_t> delay;

    void validate(std::size_t d) const {
        if (cost.size() != d) throw Error("cost model: expected " + std::to_string(d) + " feature costs");
        for (double c : cost)
            if (!(c >= 0.0)) throw Error("cost model: negative feature cost");
        if (!(lambda >= 0.0)) throw Error("cost model: lambda must be nonnegative");
        if (!(eta >= 0.0 && eta <= 1.0)) throw Error("cost model: eta must lie in [0,1]");
        if (!delay.empty() && delay.size() != d)
            throw Error("cost model: delay vector length mismatch");
    }

    std::size_t delay_of(std::size_t i) const { return delay.empty() ? 0 : delay[i]; }
    bool has_delays() const {
        for (auto t : delay)
            if (t != 0) return true;
        return false;
    }
};

/// One subject's stream: features, labels and source-data availability
/// (availability[t][i] = 0 means the value is absent from the data).
struct Episode {
    std::vector<std::vector<double>> features;
    std::vector<double> labels;
    std::vector<std::vector<std::uint8_t>> availability;

    std::size_t length() const { return features.size(); }
    std::size_t dim() const { return features.empty() ? 0 : features.front().size(); }

    void validate() const {
        if (features.empty()) throw Error("episode: length must be at least 1");
        if (labels.size() != features.size() || availability.size() != features.size())
            throw Error("episode: features, labels and availability must share one length");
        std::size_t d = features.front().size();
        for (std::size_t t = 0; t < features.size(); ++t)
            if (features[t].size() != d || availability[t].size() != d)
                throw Error("episode: ragged feature row at step " + std::to_string(t + 1));
    }

    static Episode fully_available(std::vector<std::vector<double>> feats, std::vector<double> labels) {
        Episode e;
        std::size_t d = feats.empty() ? 0 : feats.front().size();
        e.availability.assign(feats.size(), std::vector<std::uint8_t>(d, 1));
        e.features = std::move(feats);
        e.labels = std::move(labels);
        return e;
    }
};

/// Everything recorded about one rollout step. `decision` is the effective
/// measurement set (in static mode the nested, cumulative one); `sampled` is
/// the raw Bernoulli draw the policy made, which the selector update scores.
struct TrajectoryStep {
    SensingDecision decision;
    SensingDecision sampled;
    std::vector<double> probs;
    ObservedVector observed;
    std::vector<double> prediction;
    double label = 0.0;
    double loss = 0.0;
    double cost = 0.0;
    /// Bits set where a feature was selected this step but unavailable in the
    /// source data at the sampling time (no cost, no selector gradient).
    std::vector<std::uint8_t> missing_at_order;
};

struct SensingTrajectory {
    std::vector<TrajectoryStep> steps;

    std::size_t length() const { return steps.size(); }
    double total_loss() const {
        double s = 0.0;
        for (const auto& st : steps) s += st.loss;
        return s;
    }
    double total_cost() const {
        double s = 0.0;
        for (const auto& st : steps) s += st.cost;
        return s;
    }
};

/// Keeps x[i] where s[i] = 1, sentinel 0 elsewhere.
inline ObservedVector apply_mask(std::span<const double> x, const SensingDecision& s) {
    if (x.size() != s.dim()) throw Error("apply_mask: dimension mismatch");
    ObservedVector o = ObservedVector::unobserved(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        if (s.bits[i]) {
            o.values[i] = x[i];
            o.mask[i] = 1;
        }
    return o;
}

/// Missing-aware variant: a selected feature whose value is absent from the
/// source data stays unobserved and is flagged in `missing`.
inline ObservedVector apply_mask(std::span<const double> x, const SensingDecision& s,
                                 std::span<const std::uint8_t> availability) {
    if (x.size() != s.dim() || availability.size() != x.size())
        throw Error("apply_mask: dimension mismatch");
    ObservedVector o = ObservedVector::unobserved(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!s.bits[i]) continue;
        if (availability[i]) {
            o.values[i] = x[i];
            o.mask[i] = 1;
        } else {
            o.missing[i] = 1;
        }
    }
    return o;
}

/// Observation visible at step t (1-based, t = decisions.size()) under
/// per-feature reporting delays: feature i appears now iff it was selected
/// tau_i steps ago, carrying the value sampled back then. Ordering times
/// before the episode start are simply unobserved.
inline ObservedVector apply_delayed_mask(const std::vector<std::vector<double>>& history,
                                         const std::vector<SensingDecision>& decisions,
                                         std::span<const std::size_t> tau,
                                         const std::vector<std::vector<std::uint8_t>>* availability = nullptr) {
    if (history.size() != decisions.size() || history.empty())
        throw Error("apply_delayed_mask: history and decisions must share length >= 1");
    std::size_t t = history.size();  // current step, 1-based
    std::size_t d = history.front().size();
    if (!tau.empty() && tau.size() != d) throw Error("apply_delayed_mask: delay vector length mismatch");

    ObservedVector o = ObservedVector::unobserved(d);
    for (std::size_t i = 0; i < d; ++i) {
        std::size_t delay = tau.empty() ? 0 : tau[i];
        if (delay + 1 > t) continue;  // ordered before the episode start
        std::size_t u = t - delay;    // 1-based ordering step
        if (!decisions[u - 1].bits[i]) continue;
        bool avail = availability ? (*availability)[u - 1][i] != 0 : true;
        if (avail) {
            o.values[i] = history[u - 1][i];
            o.mask[i] = 1;
        } else {
            o.missing[i] = 1;
        }
    }
    return o;
}

/// Static-setting constraint: once measured, always measured (elementwise OR).
inline SensingDecision enforce_static_nesting(const SensingDecision& prev, const SensingDecision& next) {
    if (prev.dim() != next.dim()) throw Error("enforce_static_nesting: dimension mismatch");
    SensingDecision out = prev;
    for (std::size_t i = 0; i < out.dim(); ++i) out.bits[i] = out.bits[i] | next.bits[i];
    return out;
}

/// Independent Bernoulli draw per feature. Always consumes exactly d uniforms.
inline SensingDecision sample_decision(std::span<const double> probs, Rng& rng) {
    SensingDecision s = SensingDecision::zeros(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) s.bits[i] = rng.uniform() < probs[i] ? 1 : 0;
    return s;
}

/// log pi(s | probs) = sum_i [ s_i log p_i + (1 - s_i) log(1 - p_i) ].
inline double decision_log_prob(std::span<const double> probs, const SensingDecision& s) {
    if (probs.size() != s.dim()) throw Error("decision_log_prob: dimension mismatch");
    double lp = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i)
        lp += s.bits[i] ? std::log(probs[i]) : std::log(1.0 - probs[i]);
    return lp;
}

/// Tape form of the decision log-probability, differentiable with respect to
/// the probability node. Coordinates where `include` is 0 are left out of the
/// sum entirely (used to drop selected-but-missing features).
inline NodeId decision_log_prob(Tape& tape, NodeId probs, const SensingDecision& s,
                                const std::vector<std::uint8_t>* include = nullptr) {
    std::size_t d = tape.value(probs).size();
    if (s.dim() != d) throw Error("decision_log_prob: dimension mismatch");
    std::vector<double> sel(d, 0.0), uns(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        if (include && !(*include)[i]) continue;
        (s.bits[i] ? sel[i] : uns[i]) = 1.0;
    }
    NodeId log_p = tape.log(probs);
    NodeId one_minus = tape.add(tape.constant(RealArray::full({d}, 1.0)), tape.negate(probs));
    NodeId log_q = tape.log(one_minus);
    NodeId picked = tape.add(tape.mul(tape.constant(RealArray::vec(std::move(sel))), log_p),
                             tape.mul(tape.constant(RealArray::vec(std::move(uns))), log_q));
    return tape.sum(picked);
}

/// lambda * m(y) * sum_i c_i s_i with m(y) = eta when the label indicates the
/// adverse state (y = 1) and 1 otherwise. Features flagged missing contribute
/// nothing.
inline double step_cost(const SensingDecision& s, const CostModel& cm, double y,
                        const std::vector<std::uint8_t>* missing = nullptr) {
    if (s.dim() != cm.cost.size()) throw Error("step_cost: dimension mismatch");
    double m = (y == 1.0) ? cm.eta : 1.0;
    double total = 0.0;
    for (std::size_t i = 0; i < s.dim(); ++i) {
        if (!s.bits[i]) continue;
        if (missing && (*missing)[i]) continue;
        total += cm.cost[i];
    }
    return cm.lambda * m * total;
}

}  // namespace asac
