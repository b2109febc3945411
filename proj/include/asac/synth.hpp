#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "asac/rng.hpp"
#include "asac/sensing.hpp"

namespace asac {

/// Auto-regressive Gaussian feature process:
///   X_1 = Z_1,   X_t = phi ⊙ X_{t-1} + (1 - phi) ⊙ Z_t,   Z_t ~ N(0, I).
/// A larger phi^i means feature i depends more on its past.
struct ArProcessSpec {
    std::vector<double> phi;
    std::size_t horizon = 10;   // T
    std::size_t episodes = 1;   // N
    std::uint64_t seed = 0;

    void validate() const {
        if (phi.empty()) throw Error("ar spec: phi must be non-empty");
        for (double p : phi)
            if (!(p >= 0.0 && p <= 1.0)) throw Error("ar spec: phi entries must lie in [0,1]");
        if (horizon < 1 || episodes < 1) throw Error("ar spec: horizon and episode count must be >= 1");
    }
};

inline std::vector<Episode> gen_ar_gaussian(const ArProcessSpec& spec) {
    spec.validate();
    std::size_t d = spec.phi.size();
    std::vector<Episode> out;
    out.reserve(spec.episodes);
    for (std::size_t n = 0; n < spec.episodes; ++n) {
        Rng rng(derive_seed(spec.seed, 0x6172u, n));
        std::vector<std::vector<double>> feats(spec.horizon, std::vector<double>(d, 0.0));
        for (std::size_t i = 0; i < d; ++i) feats[0][i] = rng.normal();
        for (std::size_t t = 1; t < spec.horizon; ++t)
            for (std::size_t i = 0; i < d; ++i)
                feats[t][i] = spec.phi[i] * feats[t - 1][i] + (1.0 - spec.phi[i]) * rng.normal();
        out.push_back(Episode::fully_available(std::move(feats), std::vector<double>(spec.horizon, 0.0)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Label mechanisms. All noise parameters are variances; a preset that wants
// the "N(0, v) means std" reading passes v^2.
// ---------------------------------------------------------------------------

/// Y_t = exp(-0.1 * |sum_i X_t^i|) + eps,  eps ~ N(0, variance).
inline std::vector<double> label_exp_sum(const std::vector<std::vector<double>>& features, double variance,
                                         Rng& rng) {
    double sd = std::sqrt(variance);
    std::vector<double> labels(features.size(), 0.0);
    for (std::size_t t = 0; t < features.size(); ++t) {
        double s = 0.0;
        for (double v : features[t]) s += v;
        labels[t] = std::exp(-0.1 * std::abs(s)) + rng.normal(0.0, sd);
    }
    return labels;
}

/// Y_t = exp(-|0.1 X^1 + 0.2 X^2 + 0.3 X^3 + 0.4 X^4|) + eps. Features beyond
/// the fourth carry zero weight.
inline std::vector<double> label_weighted(const std::vector<std::vector<double>>& features, double variance,
                                          Rng& rng) {
    static constexpr double kCoeff[4] = {0.1, 0.2, 0.3, 0.4};
    double sd = std::sqrt(variance);
    std::vector<double> labels(features.size(), 0.0);
    for (std::size_t t = 0; t < features.size(); ++t) {
        if (features[t].size() < 4) throw Error("label_weighted: needs at least 4 features");
        double s = 0.0;
        for (std::size_t i = 0; i < 4; ++i) s += kCoeff[i] * features[t][i];
        labels[t] = std::exp(-std::abs(s)) + rng.normal(0.0, sd);
    }
    return labels;
}

/// Binary label: Y_t = 1 with probability exp(-0.1 * |sum_i X_t^i + eps - 2|),
/// eps ~ N(0, variance). The exponent is nonpositive so the probability needs
/// no extra clamping.
inline std::vector<double> label_binary_ydep(const std::vector<std::vector<double>>& features,
                                             double variance, Rng& rng) {
    double sd = std::sqrt(variance);
    std::vector<double> labels(features.size(), 0.0);
    for (std::size_t t = 0; t < features.size(); ++t) {
        double s = 0.0;
        for (double v : features[t]) s += v;
        double p = std::exp(-0.1 * std::abs(s + rng.normal(0.0, sd) - 2.0));
        labels[t] = rng.uniform() < p ? 1.0 : 0.0;
    }
    return labels;
}

enum class LabelKind { exp_sum, weighted, binary_ydep };

inline LabelKind label_kind_from_string(const std::string& s) {
    if (s == "exp-sum") return LabelKind::exp_sum;
    if (s == "weighted") return LabelKind::weighted;
    if (s == "binary-ydep") return LabelKind::binary_ydep;
    throw ConfigError("unknown label kind '" + s + "'");
}

/// Fills labels for every episode from its (true) features. Noise streams are
/// derived per episode so the result is independent of processing order.
inline void apply_labels(std::vector<Episode>& episodes, LabelKind kind, double variance,
                         std::uint64_t seed) {
    for (std::size_t n = 0; n < episodes.size(); ++n) {
        Rng rng(derive_seed(seed, 0x6c61u, n));
        switch (kind) {
            case LabelKind::exp_sum: episodes[n].labels = label_exp_sum(episodes[n].features, variance, rng); break;
            case LabelKind::weighted: episodes[n].labels = label_weighted(episodes[n].features, variance, rng); break;
            case LabelKind::binary_ydep:
                episodes[n].labels = label_binary_ydep(episodes[n].features, variance, rng);
                break;
        }
    }
}

/// Appends a noisy duplicate of every column: X_hat = X + delta with
/// delta ~ N(0, gamma) drawn per (episode, step, feature). Column layout
/// becomes [X_1..X_d, X_hat_1..X_hat_d].
inline void add_noisy_features(std::vector<Episode>& episodes, double gamma, std::uint64_t seed) {
    if (!(gamma > 0.0)) throw Error("add_noisy_features: gamma must be positive");
    double sd = std::sqrt(gamma);
    for (std::size_t n = 0; n < episodes.size(); ++n) {
        Rng rng(derive_seed(seed, 0x6e6fu, n));
        Episode& e = episodes[n];
        std::size_t d = e.dim();
        for (std::size_t t = 0; t < e.length(); ++t) {
            e.features[t].reserve(2 * d);
            for (std::size_t i = 0; i < d; ++i) e.features[t].push_back(e.features[t][i] + rng.normal(0.0, sd));
            e.availability[t].resize(2 * d, 1);
            for (std::size_t i = 0; i < d; ++i) e.availability[t][d + i] = e.availability[t][i];
        }
    }
}

/// Marks a uniform fraction of (step, feature) cells as absent from the
/// source data.
inline void inject_missing(std::vector<Episode>& episodes, double rate, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw Error("inject_missing: rate must lie in [0,1]");
    if (rate == 0.0) return;
    for (std::size_t n = 0; n < episodes.size(); ++n) {
        Rng rng(derive_seed(seed, 0x6d69u, n));
        for (auto& row : episodes[n].availability)
            for (auto& bit : row)
                if (rng.uniform() < rate) bit = 0;
    }
}

}  // namespace asac
