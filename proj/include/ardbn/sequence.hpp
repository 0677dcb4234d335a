#pragma once

#include "ardbn/errors.hpp"
#include "ardbn/numeric.hpp"

#include <string>
#include <vector>

namespace ardbn {

/// n sequences of T frames, each frame a flattened vector of `dim` pixels
/// in [0,1]. Stored as one dim x (n*T) matrix; sequence i occupies the
/// contiguous columns [i*T, (i+1)*T).
struct SequenceBatch {
    Index n = 0;
    Index T = 0;
    Index dim = 0;
    Eigen::MatrixXd frames;

    SequenceBatch() = default;

    SequenceBatch(Index n_sequences, Index length, Index frame_dim)
        : n(n_sequences)
        , T(length)
        , dim(frame_dim)
        , frames(Eigen::MatrixXd::Zero(frame_dim, n_sequences * length))
    {
    }

    bool empty() const { return n == 0; }

    auto sequence(Index i) { return frames.middleCols(i * T, T); }
    auto sequence(Index i) const { return frames.middleCols(i * T, T); }

    auto frame(Index i, Index t) { return frames.col(i * T + t); }
    auto frame(Index i, Index t) const { return frames.col(i * T + t); }

    bool consistent() const { return frames.rows() == dim && frames.cols() == n * T; }

    bool in_unit_interval() const
    {
        return frames.size() == 0 || (frames.minCoeff() >= 0.0 && frames.maxCoeff() <= 1.0);
    }

    /// Frames [t0, t0+len) of the selected sequences, time-major: one
    /// dim x |seqs| matrix per time step.
    std::vector<Eigen::MatrixXd> time_major(const std::vector<Index>& seqs, Index t0, Index len) const
    {
        detail::require(t0 >= 0 && len >= 0 && t0 + len <= T, "SequenceBatch::time_major: time range out of bounds");
        std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(len),
                                         Eigen::MatrixXd(dim, static_cast<Index>(seqs.size())));
        for (std::size_t j = 0; j < seqs.size(); ++j) {
            detail::require(seqs[j] >= 0 && seqs[j] < n, "SequenceBatch::time_major: sequence index out of range");
            for (Index t = 0; t < len; ++t)
                out[static_cast<std::size_t>(t)].col(static_cast<Index>(j)) = frame(seqs[j], t0 + t);
        }
        return out;
    }

    std::vector<Eigen::MatrixXd> time_major() const { return time_major(all_indices(), 0, T); }

    std::vector<Index> all_indices() const
    {
        std::vector<Index> idx(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i)
            idx[static_cast<std::size_t>(i)] = i;
        return idx;
    }

    SequenceBatch select(const std::vector<Index>& seqs) const
    {
        SequenceBatch out(static_cast<Index>(seqs.size()), T, dim);
        for (std::size_t j = 0; j < seqs.size(); ++j) {
            detail::require(seqs[j] >= 0 && seqs[j] < n, "SequenceBatch::select: index out of range");
            out.sequence(static_cast<Index>(j)) = sequence(seqs[j]);
        }
        return out;
    }

    /// Rebuilds a batch from time-major frames.
    static SequenceBatch from_time_major(const std::vector<Eigen::MatrixXd>& tm)
    {
        detail::require(!tm.empty(), "SequenceBatch::from_time_major: no frames");
        SequenceBatch out(tm.front().cols(), static_cast<Index>(tm.size()), tm.front().rows());
        for (Index t = 0; t < out.T; ++t)
            for (Index i = 0; i < out.n; ++i)
                out.frame(i, t) = tm[static_cast<std::size_t>(t)].col(i);
        return out;
    }
};

} // namespace ardbn
