#pragma once

#include "ardbn/errors.hpp"
#include "ardbn/numeric.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace ardbn {

/// Parameters of one Bernoulli-Bernoulli RBM layer.
///
/// Batches are passed as matrices whose columns are samples, so
/// `hidden_probs(p, V)` with V of shape n_visible x m yields n_hidden x m.
template <typename Scalar>
struct RbmParams {
    Vector<Scalar> b; ///< visible bias
    Vector<Scalar> c; ///< hidden bias
    Matrix<Scalar> W; ///< n_visible x n_hidden

    RbmParams() = default;

    RbmParams(Index n_visible, Index n_hidden)
        : b(Vector<Scalar>::Zero(n_visible))
        , c(Vector<Scalar>::Zero(n_hidden))
        , W(Matrix<Scalar>::Zero(n_visible, n_hidden))
    {
    }

    /// Zero biases, Gaussian weights.
    static RbmParams random(Index n_visible, Index n_hidden, double weight_std, Rng& rng)
    {
        RbmParams p(n_visible, n_hidden);
        p.W = random_gaussian<Scalar>(n_visible, n_hidden, weight_std, rng);
        return p;
    }

    Index n_visible() const { return b.size(); }
    Index n_hidden() const { return c.size(); }

    bool consistent() const { return W.rows() == b.size() && W.cols() == c.size(); }

    bool finite() const { return b.allFinite() && c.allFinite() && W.allFinite(); }
};

/// Carrier for gradients of (b, c, W); ascent direction on log-likelihood.
template <typename Scalar>
struct GradientSet {
    Vector<Scalar> db;
    Vector<Scalar> dc;
    Matrix<Scalar> dW;

    static GradientSet zeros_like(const RbmParams<Scalar>& p)
    {
        return {Vector<Scalar>::Zero(p.n_visible()), Vector<Scalar>::Zero(p.n_hidden()),
                Matrix<Scalar>::Zero(p.n_visible(), p.n_hidden())};
    }

    Scalar squared_norm() const { return db.squaredNorm() + dc.squaredNorm() + dW.squaredNorm(); }

    /// Flattened view in the order db, dc, dW (column-major).
    Vector<Scalar> flatten() const
    {
        Vector<Scalar> out(db.size() + dc.size() + dW.size());
        out << db, dc, dW.reshaped();
        return out;
    }

    GradientSet& operator+=(const GradientSet& o)
    {
        db += o.db;
        dc += o.dc;
        dW += o.dW;
        return *this;
    }

    GradientSet& operator*=(Scalar s)
    {
        db *= s;
        dc *= s;
        dW *= s;
        return *this;
    }
};

namespace detail {

template <typename Scalar>
void check_params(const RbmParams<Scalar>& p)
{
    require(p.consistent(), "RbmParams: W must be n_visible x n_hidden");
}

inline std::string dims(Index r, Index c)
{
    return std::to_string(r) + "x" + std::to_string(c);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Conditionals

/// sigmoid(c + W^T v) for every column of `v`; the bias may be a single
/// column (broadcast) or one column per sample.
template <typename Scalar, typename DV, typename DC>
Matrix<Scalar> hidden_probs_with(const Matrix<Scalar>& W, const Eigen::MatrixBase<DC>& c,
                                 const Eigen::MatrixBase<DV>& v)
{
    detail::require(v.rows() == W.rows(), "hidden_probs: v has " + std::to_string(v.rows())
                                               + " rows, expected " + std::to_string(W.rows()));
    detail::require(c.rows() == W.cols() && (c.cols() == 1 || c.cols() == v.cols()),
                    "hidden_probs: hidden bias is " + detail::dims(c.rows(), c.cols()));
    Matrix<Scalar> pre = W.transpose() * v;
    if (c.cols() == 1)
        pre.colwise() += c.col(0);
    else
        pre += c;
    return sigmoid(pre);
}

template <typename Scalar, typename DH, typename DB>
Matrix<Scalar> visible_probs_with(const Matrix<Scalar>& W, const Eigen::MatrixBase<DB>& b,
                                  const Eigen::MatrixBase<DH>& h)
{
    detail::require(h.rows() == W.cols(), "visible_probs: h has " + std::to_string(h.rows())
                                               + " rows, expected " + std::to_string(W.cols()));
    detail::require(b.rows() == W.rows() && (b.cols() == 1 || b.cols() == h.cols()),
                    "visible_probs: visible bias is " + detail::dims(b.rows(), b.cols()));
    Matrix<Scalar> pre = W * h;
    if (b.cols() == 1)
        pre.colwise() += b.col(0);
    else
        pre += b;
    return sigmoid(pre);
}

template <typename Scalar, typename DV>
Matrix<Scalar> hidden_probs(const RbmParams<Scalar>& p, const Eigen::MatrixBase<DV>& v)
{
    detail::check_params(p);
    return hidden_probs_with(p.W, p.c, v);
}

template <typename Scalar, typename DH>
Matrix<Scalar> visible_probs(const RbmParams<Scalar>& p, const Eigen::MatrixBase<DH>& h)
{
    detail::check_params(p);
    return visible_probs_with(p.W, p.b, h);
}

/// Independent Bernoulli draws, one engine output per entry in
/// column-major order regardless of the probability value.
template <typename Derived>
Matrix<typename Derived::Scalar> sample_bernoulli(const Eigen::MatrixBase<Derived>& p, Rng& rng)
{
    using Scalar = typename Derived::Scalar;
    Matrix<Scalar> out(p.rows(), p.cols());
    for (Index j = 0; j < p.cols(); ++j) {
        for (Index i = 0; i < p.rows(); ++i) {
            const Scalar pi = p(i, j);
            detail::require(pi >= Scalar(0) && pi <= Scalar(1),
                            "sample_bernoulli: probability outside [0,1]");
            out(i, j) = uniform01(rng) < static_cast<double>(pi) ? Scalar(1) : Scalar(0);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Energies

template <typename Scalar, typename DV, typename DH>
Scalar energy(const RbmParams<Scalar>& p, const Eigen::MatrixBase<DV>& v, const Eigen::MatrixBase<DH>& h)
{
    detail::check_params(p);
    detail::require(v.size() == p.n_visible() && h.size() == p.n_hidden(), "energy: dimension mismatch");
    return -p.b.dot(v.derived().reshaped()) - p.c.dot(h.derived().reshaped())
        - (v.derived().reshaped().transpose() * p.W * h.derived().reshaped()).value();
}

/// F(v) = -b.v - sum_j softplus(c_j + W_j^T v), one value per column.
template <typename Scalar, typename DV, typename DB, typename DC>
Vector<Scalar> free_energies_with(const Matrix<Scalar>& W, const Eigen::MatrixBase<DB>& b,
                                  const Eigen::MatrixBase<DC>& c, const Eigen::MatrixBase<DV>& v)
{
    detail::require(v.rows() == W.rows(), "free_energy: dimension mismatch");
    detail::require(b.rows() == W.rows() && (b.cols() == 1 || b.cols() == v.cols()),
                    "free_energy: visible bias shape");
    detail::require(c.rows() == W.cols() && (c.cols() == 1 || c.cols() == v.cols()),
                    "free_energy: hidden bias shape");
    Matrix<Scalar> pre = W.transpose() * v;
    if (c.cols() == 1)
        pre.colwise() += c.col(0);
    else
        pre += c;
    Vector<Scalar> out(v.cols());
    for (Index j = 0; j < v.cols(); ++j) {
        const Scalar visible_term = b.cols() == 1 ? b.col(0).dot(v.col(j)) : b.col(j).dot(v.col(j));
        out(j) = -visible_term - softplus(pre.col(j)).sum();
    }
    return out;
}

template <typename Scalar, typename DV>
Vector<Scalar> free_energies(const RbmParams<Scalar>& p, const Eigen::MatrixBase<DV>& v)
{
    detail::check_params(p);
    return free_energies_with(p.W, p.b, p.c, v);
}

template <typename Scalar, typename DV>
Scalar free_energy(const RbmParams<Scalar>& p, const Eigen::MatrixBase<DV>& v)
{
    detail::require(v.cols() == 1, "free_energy: expects a single vector");
    return free_energies(p, v)(0);
}

// ---------------------------------------------------------------------------
// Contrastive divergence

/// Raw per-sample CD-k statistics. `db`/`dc` keep one column per sample so
/// a recurrent caller can route them into time-dependent biases; `dW` is
/// already summed over samples.
template <typename Scalar>
struct CdStatistics {
    Matrix<Scalar> db; ///< n_visible x m
    Matrix<Scalar> dc; ///< n_hidden x m
    Matrix<Scalar> dW; ///< n_visible x n_hidden, summed over samples
};

/// CD-k against visible data `v` under (possibly per-sample) biases.
///
/// Positive phase uses hidden probabilities on the data. Hidden states are
/// sampled on every Gibbs step. The negative visible statistic is the
/// probability vector of the last reconstruction, paired with the hidden
/// sample that produced it; the negative hidden statistic is the hidden
/// probability of a final sampled reconstruction.
template <typename Scalar, typename DV, typename DB, typename DC>
CdStatistics<Scalar> cd_k_statistics(const Matrix<Scalar>& W, const Eigen::MatrixBase<DB>& b,
                                     const Eigen::MatrixBase<DC>& c, const Eigen::MatrixBase<DV>& v,
                                     int k, Rng& rng)
{
    detail::require(k >= 1, "cd_k: k must be >= 1");
    detail::require(v.cols() >= 1, "cd_k: empty batch");
    const Matrix<Scalar> data = v;
    const Matrix<Scalar> ph0 = hidden_probs_with(W, c, data);
    Matrix<Scalar> h = sample_bernoulli(ph0, rng);
    Matrix<Scalar> pv;
    Matrix<Scalar> ph;
    for (int step = 1; step <= k; ++step) {
        pv = visible_probs_with(W, b, h);
        const Matrix<Scalar> vs = sample_bernoulli(pv, rng);
        ph = hidden_probs_with(W, c, vs);
        if (step < k)
            h = sample_bernoulli(ph, rng);
    }
    CdStatistics<Scalar> s;
    s.db = data - pv;
    s.dc = ph0 - ph;
    s.dW = data * ph0.transpose() - pv * h.transpose();
    return s;
}

/// Batch-averaged CD-k gradient of a static RBM.
template <typename Scalar, typename DV>
GradientSet<Scalar> cd_k_gradient(const RbmParams<Scalar>& p, const Eigen::MatrixBase<DV>& v_batch, int k,
                                  Rng& rng)
{
    detail::check_params(p);
    detail::require(v_batch.cols() >= 1, "cd_k_gradient: empty batch");
    const auto stats = cd_k_statistics(p.W, p.b, p.c, v_batch, k, rng);
    const Scalar inv_m = Scalar(1) / static_cast<Scalar>(v_batch.cols());
    GradientSet<Scalar> g;
    g.db = stats.db.rowwise().sum() * inv_m;
    g.dc = stats.dc.rowwise().sum() * inv_m;
    g.dW = stats.dW * inv_m;
    return g;
}

// ---------------------------------------------------------------------------
// Exact enumeration (tiny models only)

inline constexpr Index kMaxEnumeratedUnits = 24;

namespace detail {

/// All binary vectors of length n as columns, in counting order.
template <typename Scalar>
Matrix<Scalar> binary_states(Index n)
{
    require(n <= kMaxEnumeratedUnits, "enumeration: too many units");
    const Index count = Index(1) << n;
    Matrix<Scalar> out(n, count);
    for (Index s = 0; s < count; ++s)
        for (Index i = 0; i < n; ++i)
            out(i, s) = ((s >> i) & 1) ? Scalar(1) : Scalar(0);
    return out;
}

template <typename Scalar>
Scalar log_sum_exp(const Vector<Scalar>& x)
{
    const Scalar m = x.maxCoeff();
    return m + std::log((x.array() - m).exp().sum());
}

/// Model expectations E[v], E[h], E[v h^T] and log Z by summing out the
/// smaller layer analytically and enumerating the other.
template <typename Scalar>
struct ModelMoments {
    Vector<Scalar> v;
    Vector<Scalar> h;
    Matrix<Scalar> vh;
    Scalar log_z;
};

template <typename Scalar>
ModelMoments<Scalar> model_moments(const RbmParams<Scalar>& p, bool enumerate_visible)
{
    ModelMoments<Scalar> m;
    if (enumerate_visible) {
        const Matrix<Scalar> states = binary_states<Scalar>(p.n_visible());
        const Vector<Scalar> neg_f = -free_energies(p, states);
        m.log_z = log_sum_exp(neg_f);
        const Vector<Scalar> w = (neg_f.array() - m.log_z).exp();
        const Matrix<Scalar> hp = hidden_probs(p, states);
        m.v = states * w;
        m.h = hp * w;
        m.vh = states * w.asDiagonal() * hp.transpose();
    } else {
        // Free energy of h with v summed out: -c.h - sum_i softplus(b_i + W_i h).
        const Matrix<Scalar> states = binary_states<Scalar>(p.n_hidden());
        Matrix<Scalar> pre = p.W * states;
        pre.colwise() += p.b;
        Vector<Scalar> neg_f(states.cols());
        for (Index s = 0; s < states.cols(); ++s)
            neg_f(s) = p.c.dot(states.col(s)) + softplus(pre.col(s)).sum();
        m.log_z = log_sum_exp(neg_f);
        const Vector<Scalar> w = (neg_f.array() - m.log_z).exp();
        const Matrix<Scalar> vp = sigmoid(pre);
        m.h = states * w;
        m.v = vp * w;
        m.vh = vp * w.asDiagonal() * states.transpose();
    }
    return m;
}

template <typename Scalar>
void check_enumerable(const RbmParams<Scalar>& p)
{
    check_params(p);
    require(p.n_visible() + p.n_hidden() <= kMaxEnumeratedUnits,
            "exact enumeration limited to " + std::to_string(kMaxEnumeratedUnits) + " total units");
}

} // namespace detail

/// ln Z by exhaustive enumeration over the smaller layer.
template <typename Scalar>
Scalar log_partition(const RbmParams<Scalar>& p)
{
    detail::check_enumerable(p);
    return detail::model_moments(p, p.n_visible() <= p.n_hidden()).log_z;
}

/// Mean over columns of ln p(v).
template <typename Scalar, typename DV>
Scalar exact_mean_log_likelihood(const RbmParams<Scalar>& p, const Eigen::MatrixBase<DV>& v_batch)
{
    detail::require(v_batch.cols() >= 1, "exact_mean_log_likelihood: empty batch");
    const Scalar log_z = log_partition(p);
    return -free_energies(p, v_batch).mean() - log_z;
}

/// Exact gradient of the mean log-likelihood. `enumerate_visible` selects
/// which layer is enumerated; both give the same answer and the default
/// picks the cheaper one.
template <typename Scalar, typename DV>
GradientSet<Scalar> exact_log_likelihood_gradient(const RbmParams<Scalar>& p,
                                                  const Eigen::MatrixBase<DV>& v_batch,
                                                  std::optional<bool> enumerate_visible = std::nullopt)
{
    detail::check_enumerable(p);
    detail::require(v_batch.cols() >= 1, "exact_log_likelihood_gradient: empty batch");
    const Matrix<Scalar> data = v_batch;
    const Scalar inv_m = Scalar(1) / static_cast<Scalar>(data.cols());
    const Matrix<Scalar> hp = hidden_probs(p, data);
    const auto model = detail::model_moments(p, enumerate_visible.value_or(p.n_visible() <= p.n_hidden()));
    GradientSet<Scalar> g;
    g.db = data.rowwise().sum() * inv_m - model.v;
    g.dc = hp.rowwise().sum() * inv_m - model.h;
    g.dW = data * hp.transpose() * inv_m - model.vh;
    return g;
}

} // namespace ardbn
