#pragma once

// Future-frame prediction protocol: prime with the first frames of each
// test sequence, roll out the rest autoregressively, and score the rollout
// against the held-back ground truth.
//
// Conventions (stated in every emitted report):
//   cross entropy  sum over predicted frames and pixels of
//                  -[y ln p + (1-y) ln(1-p)], p clipped to [1e-7, 1-1e-7]
//   squared error  sum over predicted frames and pixels of (y - p)^2
//   accuracy       fraction of pixels with (p > threshold) == (y > threshold)
// Sums are taken per sequence, then averaged over sequences.

#include "ardbn/dbn.hpp"
#include "ardbn/sequence.hpp"

#include <string>
#include <vector>

namespace ardbn {

inline constexpr double kProbabilityClip = 1e-7;

struct EvalReport {
    std::string name;
    Index n_sequences = 0;
    double cross_entropy = 0.0;
    double squared_error = 0.0;
    double accuracy = 0.0;
    std::vector<double> per_frame_accuracy;
    std::vector<EvalReport> baselines;
};

/// Scores predictions against truth; both are time-major lists of
/// dim x m matrices of equal shape, one column per sequence.
EvalReport score_predictions(const std::string& name, const std::vector<Eigen::MatrixXd>& predicted,
                             const std::vector<Eigen::MatrixXd>& truth, double threshold);

/// Runs the rollout on every test sequence (prime frames 1..n_prime) and
/// scores frames n_prime+1..n_prime+n_pred. The persistence and uniform
/// baselines are attached to the returned report.
EvalReport evaluate(const DbnModel& model, const SequenceBatch& test, Index n_prime, Index n_pred, double threshold,
                    int k_gen, Rng& rng);

/// Repeats frame n_prime for every predicted step.
EvalReport persistence_baseline(const SequenceBatch& test, Index n_prime, Index n_pred, double threshold);

/// Predicts 0.5 everywhere.
EvalReport uniform_baseline(const SequenceBatch& test, Index n_prime, Index n_pred, double threshold);

/// Per-frame accuracy rows, one column per predicted frame numbered from
/// first_frame (1-based, e.g. 11..20 for the 10/10 protocol).
std::string per_frame_table(const std::vector<EvalReport>& reports, Index first_frame);

/// Cross-entropy table and squared-error/accuracy table followed by the
/// per-frame table, with the metric conventions in a header.
std::string format_report_text(const EvalReport& report, Index n_prime, Index dim);

/// CSV with header `configuration,metric,value`: one row per metric for
/// the model and each baseline (metrics cross_entropy, squared_error,
/// accuracy, accuracy_frame_<k>).
std::string format_report_csv(const EvalReport& report, Index n_prime);

} // namespace ardbn
