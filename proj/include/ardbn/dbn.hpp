#pragma once

// Greedy construction of the adaptive recurrent DBN. Each layer is an
// RnnRbm trained with CD/BPTT while its hidden width is adapted; when the
// layer-generation condition holds its hidden activations become the
// training sequences of a new layer on top.

#include "ardbn/rnn_rbm.hpp"
#include "ardbn/sequence.hpp"
#include "ardbn/structural.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace ardbn {

struct TrainConfig {
    double lr = 0.05;
    Index epochs_per_layer = 10;
    int cd_k = 1;
    Index batch_size = 20;
    std::uint64_t seed = 1;
    double clip_norm = 5.0;              ///< <= 0 disables clipping
    double init_std = 0.01;
    std::optional<Index> initial_hidden; ///< first layer only; default n_visible/2 (min 8)
    std::optional<Index> n_context;      ///< default: the layer's initial n_hidden
    Activation activation = Activation::Tanh;

    void validate() const;
};

/// Per-epoch progress of one layer.
struct EpochRecord {
    Index layer = 0;
    Index epoch = 0;
    double surrogate_loss = 0.0; ///< proxy per frame on the monitoring subsample
    double mean_free_energy = 0.0;
    double total_wd = 0.0;
    Index n_hidden = 0;
};

struct LayerStats {
    std::vector<EpochRecord> epochs;
    double mean_free_energy = 0.0;
    double total_wd = 0.0;

    bool empty() const { return epochs.empty(); }
};

struct LayerResult {
    RnnRbmParams<double> layer;
    WdMonitor<double> monitor;
    LayerStats stats;
    std::vector<AdaptationEvent> events;
};

using EpochObserver = std::function<void(const EpochRecord&)>;

/// Trains one layer for cfg.epochs_per_layer epochs of shuffled mini-batch
/// updates. After every epoch the neuron-generation check runs first,
/// then annihilation on mean activations over the monitoring subsample.
/// `step` is the global update counter used to stamp events; it is
/// advanced by the number of updates performed.
LayerResult train_layer(RnnRbmParams<double> layer, WdMonitor<double> monitor, const SequenceBatch& data,
                        const TrainConfig& cfg, const AdaptationConfig& adapt, Index layer_index, Rng& rng,
                        std::uint64_t& step, const EpochObserver& observer = {});

/// Replaces every frame by the hidden probabilities of `layer` under its
/// time-dependent hidden bias.
SequenceBatch lift_sequences(const RnnRbmParams<double>& layer, const SequenceBatch& data);

/// Mean over frames of the free energy under the time-dependent biases.
double mean_free_energy(const RnnRbmParams<double>& layer, const SequenceBatch& data);

/// Mean over frames of the hidden probabilities under time-dependent biases.
Eigen::VectorXd mean_activations(const RnnRbmParams<double>& layer, const SequenceBatch& data);

struct DbnModel {
    std::vector<RnnRbmParams<double>> layers;
    std::vector<AdaptationEvent> adaptation_log;
    AdaptationConfig adaptation;
    TrainConfig train;

    Index depth() const { return static_cast<Index>(layers.size()); }

    /// Layer l+1 reads layer l's hidden units and every layer is consistent.
    bool dimension_chain_ok() const;
};

/// Initial width of a fresh layer: n_visible/2, at least 8.
Index default_hidden_count(Index n_visible);

DbnModel train_dbn(const SequenceBatch& data, const TrainConfig& cfg, const AdaptationConfig& adapt,
                   const EpochObserver& observer = {});

/// Primes every layer with `prime` (time-major, one column per sequence)
/// and then rolls out `n_pred` frames, feeding each prediction back as the
/// next bottom-layer input. Only the prime frames are visible here.
std::vector<Eigen::MatrixXd> dbn_predict_batch(const DbnModel& model, const std::vector<Eigen::MatrixXd>& prime,
                                               Index n_pred, int k_gen, Rng& rng);

/// Single-sequence form: `prime` is dim x n_prime, result dim x n_pred.
Eigen::MatrixXd dbn_predict_sequence(const DbnModel& model, const Eigen::MatrixXd& prime, Index n_pred, int k_gen,
                                     Rng& rng);

} // namespace ardbn
