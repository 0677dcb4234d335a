#include "ardbn/dbn.hpp"

#include "ardbn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace ardbn {

namespace {

constexpr Index kMonitorFrames = 1024;

std::vector<Index> shuffled(Index n, Rng& rng)
{
    std::vector<Index> idx(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        idx[static_cast<std::size_t>(i)] = i;
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[static_cast<std::size_t>(uniform_index(rng, i))]);
    return idx;
}

/// Fixed subsample of whole sequences holding at most kMonitorFrames frames.
std::vector<Index> monitor_subsample(const SequenceBatch& data)
{
    const Index max_seqs = std::max<Index>(1, kMonitorFrames / std::max<Index>(1, data.T));
    const Index count = std::min(data.n, max_seqs);
    std::vector<Index> idx;
    idx.reserve(static_cast<std::size_t>(count));
    // Evenly strided so the subsample covers the whole batch.
    for (Index k = 0; k < count; ++k)
        idx.push_back(k * data.n / count);
    return idx;
}

void check_layer_input(const RnnRbmParams<double>& layer, const SequenceBatch& data, const char* op)
{
    detail::require(data.consistent(), std::string(op) + ": inconsistent sequence batch");
    detail::require(data.dim == layer.n_visible(), std::string(op) + ": frames have " + std::to_string(data.dim)
                                                       + " entries, layer expects " + std::to_string(layer.n_visible()));
}

} // namespace

void TrainConfig::validate() const
{
    if (!(lr > 0.0) || !std::isfinite(lr))
        throw ConfigError("lr must be > 0");
    if (epochs_per_layer < 0)
        throw ConfigError("epochs_per_layer must be >= 0");
    if (cd_k < 1)
        throw ConfigError("cd_k must be >= 1");
    if (batch_size < 1)
        throw ConfigError("batch_size must be >= 1");
    if (!(init_std >= 0.0))
        throw ConfigError("init_std must be >= 0");
    if (initial_hidden && *initial_hidden < 1)
        throw ConfigError("initial_hidden must be >= 1");
    if (n_context && *n_context < 1)
        throw ConfigError("n_context must be >= 1");
}

Index default_hidden_count(Index n_visible)
{
    return std::max<Index>(8, n_visible / 2);
}

SequenceBatch lift_sequences(const RnnRbmParams<double>& layer, const SequenceBatch& data)
{
    check_layer_input(layer, data, "lift_sequences");
    SequenceBatch out(data.n, data.T, layer.n_hidden());
    if (data.n == 0 || data.T == 0)
        return out;
    const auto tm = data.time_major();
    const auto state = unroll(layer, tm);
    for (Index t = 0; t < data.T; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        const Eigen::MatrixXd h = hidden_probs_with(layer.rbm.W, state.c_t[ts], tm[ts]);
        for (Index i = 0; i < data.n; ++i)
            out.frame(i, t) = h.col(i);
    }
    return out;
}

double mean_free_energy(const RnnRbmParams<double>& layer, const SequenceBatch& data)
{
    check_layer_input(layer, data, "mean_free_energy");
    detail::require(data.n >= 1 && data.T >= 1, "mean_free_energy: empty batch");
    const auto tm = data.time_major();
    const auto state = unroll(layer, tm);
    double total = 0.0;
    for (std::size_t t = 0; t < tm.size(); ++t)
        total += free_energies_with(layer.rbm.W, state.b_t[t], state.c_t[t], tm[t]).sum();
    return total / static_cast<double>(data.n * data.T);
}

Eigen::VectorXd mean_activations(const RnnRbmParams<double>& layer, const SequenceBatch& data)
{
    detail::require(data.n >= 1 && data.T >= 1, "mean_activations: empty batch");
    const SequenceBatch lifted = lift_sequences(layer, data);
    return lifted.frames.rowwise().mean();
}

LayerResult train_layer(RnnRbmParams<double> layer, WdMonitor<double> monitor, const SequenceBatch& data,
                        const TrainConfig& cfg, const AdaptationConfig& adapt, Index layer_index, Rng& rng,
                        std::uint64_t& step, const EpochObserver& observer)
{
    cfg.validate();
    adapt.validate();
    check_layer_input(layer, data, "train_layer");
    detail::require(layer.consistent(), "train_layer: inconsistent layer");
    detail::require(monitor.size() == layer.n_hidden(), "train_layer: monitor/layer size mismatch");
    if (!layer.finite())
        throw NumericFailure("non-finite parameters in layer " + std::to_string(layer_index) + " before training");

    LayerResult result;
    if (cfg.epochs_per_layer == 0 || data.n == 0) {
        result.layer = std::move(layer);
        result.monitor = std::move(monitor);
        return result;
    }
    detail::require(data.T >= 1, "train_layer: empty sequences");

    const Index batches_per_epoch = (data.n + cfg.batch_size - 1) / cfg.batch_size;
    AdaptationConfig resolved = adapt;
    if (!resolved.min_steps_before_gen)
        resolved.min_steps_before_gen = static_cast<std::uint64_t>(2 * batches_per_epoch);
    const auto monitor_idx = monitor_subsample(data);
    const SequenceBatch monitor_data = data.select(monitor_idx);
    const auto monitor_tm = monitor_data.time_major();

    for (Index epoch = 0; epoch < cfg.epochs_per_layer; ++epoch) {
        const auto order = shuffled(data.n, rng);
        for (Index start = 0; start < data.n; start += cfg.batch_size) {
            const Index stop = std::min(data.n, start + cfg.batch_size);
            const std::vector<Index> batch(order.begin() + start, order.begin() + stop);
            auto grad = sequence_loss_gradient(layer, data.time_major(batch, 0, data.T), cfg.cd_k, rng);
            clip_gradient(grad, cfg.clip_norm);
            if (!grad.finite()) {
                std::ostringstream msg;
                msg << "non-finite gradient in layer " << layer_index << ", epoch " << epoch << ", step " << step;
                throw NumericFailure(msg.str());
            }
            apply_update(layer, grad, cfg.lr);
            if (!layer.finite()) {
                std::ostringstream msg;
                msg << "non-finite parameters in layer " << layer_index << ", epoch " << epoch << ", step " << step;
                throw NumericFailure(msg.str());
            }
            monitor = wd_update(std::move(monitor), grad.rbm, cfg.lr);
            ++step;
        }

        const double loss = negative_log_likelihood_proxy(layer, monitor_tm)
            / static_cast<double>(monitor_data.n * monitor_data.T);
        if (!std::isfinite(loss) || !layer.finite()) {
            std::ostringstream msg;
            msg << "non-finite surrogate loss in layer " << layer_index << " after epoch " << epoch;
            throw NumericFailure(msg.str());
        }

        // Generation: insert children from the highest parent index down so
        // earlier indices stay valid.
        auto parents = check_neuron_generation(monitor, resolved);
        std::sort(parents.begin(), parents.end(), std::greater<>());
        for (Index parent : parents) {
            result.events.push_back({EventKind::NeuronGeneration, layer_index, step, epoch, parent,
                                     monitor.wd_c(parent), monitor.wd_W(parent)});
            std::tie(layer, monitor) = generate_neuron(layer, monitor, parent, adapt.noise_scale, rng, adapt.max_hidden);
        }

        const auto acts = mean_activations(layer, monitor_data);
        const auto dead = check_neuron_annihilation(acts, adapt);
        if (!dead.empty()) {
            for (Index j : dead)
                result.events.push_back(
                    {EventKind::NeuronAnnihilation, layer_index, step, epoch, j, monitor.wd_c(j), monitor.wd_W(j)});
            std::tie(layer, monitor) = annihilate_neurons(layer, monitor, dead);
        }

        EpochRecord rec;
        rec.layer = layer_index;
        rec.epoch = epoch;
        rec.surrogate_loss = loss;
        rec.mean_free_energy = mean_free_energy(layer, monitor_data);
        rec.total_wd = monitor.total();
        rec.n_hidden = layer.n_hidden();
        result.stats.epochs.push_back(rec);
        if (observer)
            observer(rec);
    }
    result.stats.mean_free_energy = result.stats.epochs.back().mean_free_energy;
    result.stats.total_wd = result.stats.epochs.back().total_wd;
    result.layer = std::move(layer);
    result.monitor = std::move(monitor);
    return result;
}

bool DbnModel::dimension_chain_ok() const
{
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (!layers[l].consistent())
            return false;
        if (l > 0 && layers[l].n_visible() != layers[l - 1].n_hidden())
            return false;
    }
    return !layers.empty();
}

DbnModel train_dbn(const SequenceBatch& data, const TrainConfig& cfg, const AdaptationConfig& adapt,
                   const EpochObserver& observer)
{
    cfg.validate();
    detail::require(data.n >= 1 && data.T >= 1 && data.dim >= 1, "train_dbn: empty data");
    const Index first_hidden = cfg.initial_hidden.value_or(default_hidden_count(data.dim));
    adapt.validate(first_hidden);

    DbnModel model;
    model.adaptation = adapt;
    model.train = cfg;
    Rng rng(cfg.seed);
    std::uint64_t step = 0;
    SequenceBatch current = data;
    for (Index l = 0;; ++l) {
        const Index n_visible = current.dim;
        const Index n_hidden = l == 0 ? first_hidden : std::min(default_hidden_count(n_visible), adapt.max_hidden);
        const Index n_context = cfg.n_context.value_or(n_hidden);
        auto layer = RnnRbmParams<double>::random(n_visible, n_hidden, n_context, cfg.init_std, rng, cfg.activation);
        WdMonitor<double> monitor(n_hidden, adapt.gamma);
        auto trained = train_layer(std::move(layer), std::move(monitor), current, cfg, adapt, l, rng, step, observer);
        model.adaptation_log.insert(model.adaptation_log.end(), trained.events.begin(), trained.events.end());
        model.layers.push_back(std::move(trained.layer));

        const auto& top = model.layers.back();
        const auto thresholds = LayerThresholds::resolve(adapt, top.n_visible(), top.n_hidden());
        if (trained.stats.empty()
            || !check_layer_generation(trained.stats.total_wd, trained.stats.mean_free_energy, model.depth(), thresholds))
            break;
        model.adaptation_log.push_back({EventKind::LayerGeneration, l + 1, step, cfg.epochs_per_layer, l + 1,
                                        trained.stats.total_wd, 0.0, trained.stats.mean_free_energy});
        current = lift_sequences(top, current);
    }
    return model;
}

std::vector<Eigen::MatrixXd> dbn_predict_batch(const DbnModel& model, const std::vector<Eigen::MatrixXd>& prime,
                                               Index n_pred, int k_gen, Rng& rng)
{
    detail::require(model.depth() >= 1, "dbn_predict: model has no layers");
    detail::require(!prime.empty(), "dbn_predict: empty prime");
    detail::require(n_pred >= 0, "dbn_predict: n_pred must be >= 0");
    const Index m = prime.front().cols();
    for (const auto& f : prime)
        detail::require(f.rows() == model.layers.front().n_visible() && f.cols() == m,
                        "dbn_predict: prime frame dimension mismatch");

    std::vector<Eigen::MatrixXd> contexts;
    for (const auto& layer : model.layers)
        contexts.push_back(layer.u0.rowwise().replicate(m));

    // Advances layers 2..L with the bottom input `x`, whose layer-1 context
    // has not been stepped yet.
    // All lifts use the contexts from before this step, as in lift_sequences.
    auto advance_upper = [&](const Eigen::MatrixXd& x) {
        std::vector<Eigen::MatrixXd> inputs{x};
        for (std::size_t l = 0; l + 1 < model.layers.size(); ++l) {
            const auto& layer = model.layers[l];
            const auto c_t = time_biases(layer, contexts[l]).second;
            inputs.push_back(hidden_probs_with(layer.rbm.W, c_t, inputs.back()));
        }
        for (std::size_t l = 1; l < model.layers.size(); ++l)
            contexts[l] = context_step(model.layers[l], contexts[l], inputs[l]);
    };

    const auto& bottom = model.layers.front();
    for (std::size_t t = 0; t + 1 < prime.size(); ++t) {
        advance_upper(prime[t]);
        contexts[0] = context_step(bottom, contexts[0], prime[t]);
    }

    std::vector<Eigen::MatrixXd> out;
    out.reserve(static_cast<std::size_t>(n_pred));
    Eigen::MatrixXd input = prime.back();
    for (Index s = 0; s < n_pred; ++s) {
        advance_upper(input);
        auto [v_pred, u_next] = predict_next_frame(bottom, contexts[0], input, k_gen, rng);
        contexts[0] = std::move(u_next);
        out.push_back(v_pred);
        input = std::move(v_pred);
    }
    return out;
}

Eigen::MatrixXd dbn_predict_sequence(const DbnModel& model, const Eigen::MatrixXd& prime, Index n_pred, int k_gen,
                                     Rng& rng)
{
    const auto frames = dbn_predict_batch(model, time_major(prime), n_pred, k_gen, rng);
    Eigen::MatrixXd out(prime.rows(), n_pred);
    for (Index s = 0; s < n_pred; ++s)
        out.col(s) = frames[static_cast<std::size_t>(s)];
    return out;
}

} // namespace ardbn
