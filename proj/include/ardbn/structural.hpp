#pragma once

// Walking-Distance monitoring and the three structural operators of the
// adaptive learning method: neuron generation, neuron annihilation and
// layer generation.
//
// Walking Distance (WD) of a hidden neuron is the exponentially weighted
// variance of the updates applied to it: one tracker for the hidden-bias
// update, one for the norm of its weight-column update. Visible biases are
// not monitored.

#include "ardbn/errors.hpp"
#include "ardbn/numeric.hpp"
#include "ardbn/rbm.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ardbn {

template <typename Scalar>
struct WdMonitor {
    Scalar gamma = Scalar(0.9);
    Vector<Scalar> wd_c;   ///< smoothed variance of hidden-bias updates
    Vector<Scalar> wd_W;   ///< smoothed variance of weight-column update norms
    Vector<Scalar> ewma_c; ///< smoothed mean of hidden-bias updates
    Vector<Scalar> ewma_W; ///< smoothed mean of weight-column update norms
    std::uint64_t steps_observed = 0;

    WdMonitor() = default;

    WdMonitor(Index n_hidden, Scalar decay)
        : gamma(decay)
        , wd_c(Vector<Scalar>::Zero(n_hidden))
        , wd_W(Vector<Scalar>::Zero(n_hidden))
        , ewma_c(Vector<Scalar>::Zero(n_hidden))
        , ewma_W(Vector<Scalar>::Zero(n_hidden))
    {
        detail::require(decay > Scalar(0) && decay < Scalar(1), "WdMonitor: gamma must lie in (0,1)");
    }

    Index size() const { return wd_c.size(); }

    bool consistent() const
    {
        return wd_W.size() == wd_c.size() && ewma_c.size() == wd_c.size() && ewma_W.size() == wd_c.size();
    }

    /// Sum over neurons of wd_c + wd_W.
    Scalar total() const { return wd_c.sum() + wd_W.sum(); }
};

/// Thresholds and caps of the structural operators.
///
/// `theta_wd_layer`, `theta_energy_layer` and `min_steps_before_gen` are
/// optional; when unset they resolve to 0.01 * n_hidden, 0.1 * n_visible
/// and two epochs' worth of updates respectively.
struct AdaptationConfig {
    double gamma = 0.9;
    double theta_gen = 1e-10;
    double theta_ann = 0.01;
    std::optional<double> theta_wd_layer;
    std::optional<double> theta_energy_layer;
    std::optional<std::uint64_t> min_steps_before_gen;
    Index max_hidden = 512;
    Index max_layers = 5;
    double noise_scale = 0.01;

    void validate(Index initial_hidden = 0) const
    {
        if (!(gamma > 0.0 && gamma < 1.0))
            throw ConfigError("gamma must lie in (0,1)");
        if (!(theta_gen > 0.0))
            throw ConfigError("theta_gen must be > 0");
        if (!(theta_ann > 0.0 && theta_ann < 1.0))
            throw ConfigError("theta_ann must lie in (0,1)");
        if (theta_wd_layer && !(*theta_wd_layer > 0.0))
            throw ConfigError("theta_wd_layer must be > 0");
        if (theta_energy_layer && !(*theta_energy_layer > 0.0))
            throw ConfigError("theta_energy_layer must be > 0");
        if (!(noise_scale >= 0.0))
            throw ConfigError("noise_scale must be >= 0");
        if (max_layers < 1)
            throw ConfigError("max_layers must be >= 1");
        if (max_hidden < 1 || max_hidden < initial_hidden)
            throw ConfigError("max_hidden must be >= the initial hidden count");
    }
};

/// Layer-generation thresholds resolved for a concrete layer.
struct LayerThresholds {
    double wd;
    double energy;
    Index max_layers;

    static LayerThresholds resolve(const AdaptationConfig& cfg, Index n_visible, Index n_hidden)
    {
        return {cfg.theta_wd_layer.value_or(0.01 * static_cast<double>(n_hidden)),
                cfg.theta_energy_layer.value_or(0.1 * static_cast<double>(n_visible)), cfg.max_layers};
    }
};

enum class EventKind { NeuronGeneration, NeuronAnnihilation, LayerGeneration };

inline const char* to_string(EventKind k)
{
    switch (k) {
    case EventKind::NeuronGeneration: return "neuron_generation";
    case EventKind::NeuronAnnihilation: return "neuron_annihilation";
    case EventKind::LayerGeneration: return "layer_generation";
    }
    return "unknown";
}

/// One entry of the adaptation trace. For neuron events `neuron` is the
/// parent (generation) or removed index (annihilation) before the event;
/// for layer generation it is the new layer's index, `wd_c` holds the
/// layer's total WD and `energy` its mean free energy.
struct AdaptationEvent {
    EventKind kind;
    Index layer = 0;
    std::uint64_t step = 0;
    Index epoch = 0;
    Index neuron = 0;
    double wd_c = 0.0;
    double wd_W = 0.0;
    double energy = 0.0;

    bool operator==(const AdaptationEvent&) const = default;
};

// ---------------------------------------------------------------------------
// WD monitoring

/// Folds one round of applied updates (lr * gradient) into the monitor.
/// The first observation seeds the running means so a constant stream has
/// exactly zero variance.
template <typename Scalar>
WdMonitor<Scalar> wd_update(WdMonitor<Scalar> monitor, const GradientSet<Scalar>& grads, Scalar lr)
{
    const Index n = monitor.size();
    detail::require(monitor.consistent(), "wd_update: inconsistent monitor");
    detail::require(grads.dc.size() == n && grads.dW.cols() == n,
                    "wd_update: gradient has " + std::to_string(grads.dc.size()) + " hidden units, monitor "
                        + std::to_string(n));
    const Scalar g = monitor.gamma;
    const bool first = monitor.steps_observed == 0;
    for (Index j = 0; j < n; ++j) {
        const Scalar dc = lr * grads.dc(j);
        const Scalar dw = lr * grads.dW.col(j).norm();
        if (first) {
            monitor.ewma_c(j) = dc;
            monitor.ewma_W(j) = dw;
            continue;
        }
        const Scalar diff_c = dc - monitor.ewma_c(j);
        const Scalar diff_w = dw - monitor.ewma_W(j);
        monitor.ewma_c(j) += (Scalar(1) - g) * diff_c;
        monitor.ewma_W(j) += (Scalar(1) - g) * diff_w;
        monitor.wd_c(j) = g * (monitor.wd_c(j) + (Scalar(1) - g) * diff_c * diff_c);
        monitor.wd_W(j) = g * (monitor.wd_W(j) + (Scalar(1) - g) * diff_w * diff_w);
    }
    ++monitor.steps_observed;
    return monitor;
}

// ---------------------------------------------------------------------------
// Neuron generation

/// Parents whose WD product exceeds theta_gen, largest product first, cut
/// so the layer never grows past max_hidden.
template <typename Scalar>
std::vector<Index> check_neuron_generation(const WdMonitor<Scalar>& monitor, const AdaptationConfig& cfg)
{
    std::vector<Index> parents;
    if (monitor.steps_observed < cfg.min_steps_before_gen.value_or(0))
        return parents;
    std::vector<std::pair<Scalar, Index>> scored;
    for (Index j = 0; j < monitor.size(); ++j) {
        const Scalar product = monitor.wd_c(j) * monitor.wd_W(j);
        if (product > static_cast<Scalar>(cfg.theta_gen))
            scored.emplace_back(product, j);
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    const Index room = std::max<Index>(0, cfg.max_hidden - monitor.size());
    for (const auto& [product, j] : scored) {
        if (static_cast<Index>(parents.size()) >= room)
            break;
        parents.push_back(j);
    }
    return parents;
}

/// Inserts a child right after `parent`, copying its hidden bias and its
/// weight column plus N(0, noise_scale^2) noise. Everything else is left
/// untouched; the monitor gains a zeroed entry for the child.
template <typename Scalar>
std::pair<RbmParams<Scalar>, WdMonitor<Scalar>> generate_neuron(const RbmParams<Scalar>& params,
                                                                 const WdMonitor<Scalar>& monitor, Index parent,
                                                                 double noise_scale, Rng& rng,
                                                                 Index max_hidden = std::numeric_limits<Index>::max())
{
    detail::check_params(params);
    const Index n = params.n_hidden();
    detail::require(monitor.size() == n && monitor.consistent(), "generate_neuron: monitor/params size mismatch");
    detail::require(parent >= 0 && parent < n, "generate_neuron: parent index out of range");
    detail::require(n + 1 <= max_hidden, "generate_neuron: max_hidden exceeded");
    const Index at = parent + 1;

    RbmParams<Scalar> out(params.n_visible(), n + 1);
    out.b = params.b;
    out.c << params.c.head(at), params.c(parent), params.c.tail(n - at);
    out.W.leftCols(at) = params.W.leftCols(at);
    out.W.rightCols(n - at) = params.W.rightCols(n - at);
    for (Index i = 0; i < params.n_visible(); ++i)
        out.W(i, at) = params.W(i, parent) + static_cast<Scalar>(noise_scale > 0.0 ? gaussian(rng, 0.0, noise_scale) : 0.0);

    auto grow = [&](const Vector<Scalar>& v) {
        Vector<Scalar> r(n + 1);
        r << v.head(at), Scalar(0), v.tail(n - at);
        return r;
    };
    WdMonitor<Scalar> m = monitor;
    m.wd_c = grow(monitor.wd_c);
    m.wd_W = grow(monitor.wd_W);
    m.ewma_c = grow(monitor.ewma_c);
    m.ewma_W = grow(monitor.ewma_W);
    return {std::move(out), std::move(m)};
}

// ---------------------------------------------------------------------------
// Neuron annihilation

/// Per-neuron mean hidden activation over a batch (columns = samples).
template <typename Scalar, typename DV>
Vector<Scalar> mean_activations(const RbmParams<Scalar>& params, const Eigen::MatrixBase<DV>& data)
{
    detail::require(data.cols() >= 1, "mean_activations: empty batch");
    return hidden_probs(params, data).rowwise().mean();
}

/// Neurons that are almost always off or almost always on. At least one
/// neuron always survives: the one whose activation is closest to 0.5.
template <typename Scalar>
std::vector<Index> check_neuron_annihilation(const Vector<Scalar>& acts, const AdaptationConfig& cfg)
{
    const Scalar lo = static_cast<Scalar>(cfg.theta_ann);
    const Scalar hi = Scalar(1) - lo;
    std::vector<Index> idxs;
    for (Index j = 0; j < acts.size(); ++j)
        if (acts(j) < lo || acts(j) > hi)
            idxs.push_back(j);
    if (!idxs.empty() && static_cast<Index>(idxs.size()) == acts.size()) {
        const auto keep = std::min_element(idxs.begin(), idxs.end(), [&](Index a, Index b) {
            return std::abs(acts(a) - Scalar(0.5)) < std::abs(acts(b) - Scalar(0.5));
        });
        idxs.erase(keep);
    }
    return idxs;
}

namespace detail {

inline std::vector<Index> kept_indices(Index n, std::vector<Index> idxs)
{
    std::sort(idxs.begin(), idxs.end());
    idxs.erase(std::unique(idxs.begin(), idxs.end()), idxs.end());
    for (Index j : idxs)
        require(j >= 0 && j < n, "annihilate_neurons: index " + std::to_string(j) + " out of range");
    require(static_cast<Index>(idxs.size()) < n, "annihilate_neurons: cannot remove every hidden neuron");
    std::vector<Index> keep;
    keep.reserve(static_cast<std::size_t>(n));
    auto it = idxs.begin();
    for (Index j = 0; j < n; ++j) {
        if (it != idxs.end() && *it == j)
            ++it;
        else
            keep.push_back(j);
    }
    return keep;
}

template <typename Scalar>
Vector<Scalar> select_rows(const Vector<Scalar>& v, const std::vector<Index>& keep)
{
    Vector<Scalar> r(static_cast<Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i)
        r(static_cast<Index>(i)) = v(keep[i]);
    return r;
}

} // namespace detail

/// Removes the listed hidden neurons, preserving the order of the rest.
template <typename Scalar>
std::pair<RbmParams<Scalar>, WdMonitor<Scalar>> annihilate_neurons(const RbmParams<Scalar>& params,
                                                                   const WdMonitor<Scalar>& monitor,
                                                                   const std::vector<Index>& idxs)
{
    detail::check_params(params);
    detail::require(monitor.size() == params.n_hidden() && monitor.consistent(),
                    "annihilate_neurons: monitor/params size mismatch");
    const auto keep = detail::kept_indices(params.n_hidden(), idxs);
    RbmParams<Scalar> out;
    out.b = params.b;
    out.c = detail::select_rows(params.c, keep);
    out.W = params.W(Eigen::all, keep);
    WdMonitor<Scalar> m = monitor;
    m.wd_c = detail::select_rows(monitor.wd_c, keep);
    m.wd_W = detail::select_rows(monitor.wd_W, keep);
    m.ewma_c = detail::select_rows(monitor.ewma_c, keep);
    m.ewma_W = detail::select_rows(monitor.ewma_W, keep);
    return {std::move(out), std::move(m)};
}

// ---------------------------------------------------------------------------
// Layer generation

/// True when both the total WD and the magnitude of the mean free energy
/// stay above their thresholds and the stack still has room.
inline bool check_layer_generation(double total_wd, double mean_energy, Index depth, const LayerThresholds& t)
{
    return total_wd > t.wd && std::abs(mean_energy) > t.energy && depth < t.max_layers;
}

} // namespace ardbn
