#pragma once

// Recurrent RBM. A deterministic context u(t) carries history; at every
// step it sets the biases of a conditional RBM over frame v(t):
//
//   b(t) = b + W_uv u(t-1)
//   c(t) = c + W_uh u(t-1)
//   u(t) = act(u_bias + W_uu u(t-1) + W_vu v(t))
//
// The shared parameter set is {b, c, W, u_bias, W_uv, W_uh, W_vu, W_uu}
// plus the learned initial context u(0).
//
// Sequences are handled time-major: a batch of m sequences of length T is
// a vector of T matrices, each n_visible x m.

#include "ardbn/errors.hpp"
#include "ardbn/numeric.hpp"
#include "ardbn/rbm.hpp"
#include "ardbn/structural.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace ardbn {

enum class Activation { Tanh, Sigmoid };

inline const char* to_string(Activation a)
{
    return a == Activation::Tanh ? "tanh" : "sigmoid";
}

template <typename Scalar>
using TimeMajor = std::vector<Matrix<Scalar>>;

template <typename Scalar>
struct RnnRbmParams {
    RbmParams<Scalar> rbm;
    Vector<Scalar> u0;
    Vector<Scalar> u_bias;
    Matrix<Scalar> W_uv; ///< n_visible x n_context
    Matrix<Scalar> W_uh; ///< n_hidden x n_context
    Matrix<Scalar> W_vu; ///< n_context x n_visible
    Matrix<Scalar> W_uu; ///< n_context x n_context
    Activation activation = Activation::Tanh;

    RnnRbmParams() = default;

    /// All-zero parameters.
    RnnRbmParams(Index n_visible, Index n_hidden, Index n_context, Activation act = Activation::Tanh)
        : rbm(n_visible, n_hidden)
        , u0(Vector<Scalar>::Zero(n_context))
        , u_bias(Vector<Scalar>::Zero(n_context))
        , W_uv(Matrix<Scalar>::Zero(n_visible, n_context))
        , W_uh(Matrix<Scalar>::Zero(n_hidden, n_context))
        , W_vu(Matrix<Scalar>::Zero(n_context, n_visible))
        , W_uu(Matrix<Scalar>::Zero(n_context, n_context))
        , activation(act)
    {
    }

    /// Zero biases; Gaussian(0, std) for W, u0 and every recurrent matrix.
    static RnnRbmParams random(Index n_visible, Index n_hidden, Index n_context, double stddev, Rng& rng,
                               Activation act = Activation::Tanh)
    {
        RnnRbmParams p(n_visible, n_hidden, n_context, act);
        p.rbm.W = random_gaussian<Scalar>(n_visible, n_hidden, stddev, rng);
        p.u0 = random_gaussian<Scalar>(n_context, 1, stddev, rng);
        p.W_uv = random_gaussian<Scalar>(n_visible, n_context, stddev, rng);
        p.W_uh = random_gaussian<Scalar>(n_hidden, n_context, stddev, rng);
        p.W_vu = random_gaussian<Scalar>(n_context, n_visible, stddev, rng);
        p.W_uu = random_gaussian<Scalar>(n_context, n_context, stddev, rng);
        return p;
    }

    Index n_visible() const { return rbm.n_visible(); }
    Index n_hidden() const { return rbm.n_hidden(); }
    Index n_context() const { return u0.size(); }

    bool consistent() const
    {
        const Index nv = n_visible(), nh = n_hidden(), nu = n_context();
        return rbm.consistent() && u_bias.size() == nu && W_uv.rows() == nv && W_uv.cols() == nu
            && W_uh.rows() == nh && W_uh.cols() == nu && W_vu.rows() == nu && W_vu.cols() == nv
            && W_uu.rows() == nu && W_uu.cols() == nu;
    }

    bool finite() const
    {
        return rbm.finite() && u0.allFinite() && u_bias.allFinite() && W_uv.allFinite() && W_uh.allFinite()
            && W_vu.allFinite() && W_uu.allFinite();
    }
};

/// Gradient over every parameter group of an RnnRbmParams.
template <typename Scalar>
struct RnnGradient {
    GradientSet<Scalar> rbm;
    Vector<Scalar> du0;
    Vector<Scalar> du_bias;
    Matrix<Scalar> dW_uv;
    Matrix<Scalar> dW_uh;
    Matrix<Scalar> dW_vu;
    Matrix<Scalar> dW_uu;

    static RnnGradient zeros_like(const RnnRbmParams<Scalar>& p)
    {
        RnnGradient g;
        g.rbm = GradientSet<Scalar>::zeros_like(p.rbm);
        g.du0 = Vector<Scalar>::Zero(p.n_context());
        g.du_bias = Vector<Scalar>::Zero(p.n_context());
        g.dW_uv = Matrix<Scalar>::Zero(p.W_uv.rows(), p.W_uv.cols());
        g.dW_uh = Matrix<Scalar>::Zero(p.W_uh.rows(), p.W_uh.cols());
        g.dW_vu = Matrix<Scalar>::Zero(p.W_vu.rows(), p.W_vu.cols());
        g.dW_uu = Matrix<Scalar>::Zero(p.W_uu.rows(), p.W_uu.cols());
        return g;
    }

    Scalar squared_norm() const
    {
        return rbm.squared_norm() + du0.squaredNorm() + du_bias.squaredNorm() + dW_uv.squaredNorm()
            + dW_uh.squaredNorm() + dW_vu.squaredNorm() + dW_uu.squaredNorm();
    }

    Scalar norm() const { return std::sqrt(squared_norm()); }

    RnnGradient& operator*=(Scalar s)
    {
        rbm *= s;
        du0 *= s;
        du_bias *= s;
        dW_uv *= s;
        dW_uh *= s;
        dW_vu *= s;
        dW_uu *= s;
        return *this;
    }

    bool finite() const
    {
        return rbm.db.allFinite() && rbm.dc.allFinite() && rbm.dW.allFinite() && du0.allFinite()
            && du_bias.allFinite() && dW_uv.allFinite() && dW_uh.allFinite() && dW_vu.allFinite()
            && dW_uu.allFinite();
    }
};

/// Parameter groups in checkpoint/declaration order.
enum class ParamGroup { b, c, W, u0, u_bias, W_uv, W_uh, W_vu, W_uu };

inline constexpr ParamGroup kAllParamGroups[] = {ParamGroup::b,    ParamGroup::c,      ParamGroup::W,
                                                 ParamGroup::u0,   ParamGroup::u_bias, ParamGroup::W_uv,
                                                 ParamGroup::W_uh, ParamGroup::W_vu,   ParamGroup::W_uu};

inline const char* to_string(ParamGroup g)
{
    switch (g) {
    case ParamGroup::b: return "b";
    case ParamGroup::c: return "c";
    case ParamGroup::W: return "W";
    case ParamGroup::u0: return "u0";
    case ParamGroup::u_bias: return "u_bias";
    case ParamGroup::W_uv: return "W_uv";
    case ParamGroup::W_uh: return "W_uh";
    case ParamGroup::W_vu: return "W_vu";
    case ParamGroup::W_uu: return "W_uu";
    }
    return "?";
}

/// Mutable access to one parameter group as a flat column-major view.
template <typename Scalar>
Eigen::Map<Vector<Scalar>> group_view(RnnRbmParams<Scalar>& p, ParamGroup g)
{
    auto map = [](auto& m) { return Eigen::Map<Vector<Scalar>>(m.data(), m.size()); };
    switch (g) {
    case ParamGroup::b: return map(p.rbm.b);
    case ParamGroup::c: return map(p.rbm.c);
    case ParamGroup::W: return map(p.rbm.W);
    case ParamGroup::u0: return map(p.u0);
    case ParamGroup::u_bias: return map(p.u_bias);
    case ParamGroup::W_uv: return map(p.W_uv);
    case ParamGroup::W_uh: return map(p.W_uh);
    case ParamGroup::W_vu: return map(p.W_vu);
    case ParamGroup::W_uu: return map(p.W_uu);
    }
    throw ContractViolation("group_view: unknown group");
}

template <typename Scalar>
Eigen::Map<Vector<Scalar>> group_view(RnnGradient<Scalar>& d, ParamGroup g)
{
    auto map = [](auto& m) { return Eigen::Map<Vector<Scalar>>(m.data(), m.size()); };
    switch (g) {
    case ParamGroup::b: return map(d.rbm.db);
    case ParamGroup::c: return map(d.rbm.dc);
    case ParamGroup::W: return map(d.rbm.dW);
    case ParamGroup::u0: return map(d.du0);
    case ParamGroup::u_bias: return map(d.du_bias);
    case ParamGroup::W_uv: return map(d.dW_uv);
    case ParamGroup::W_uh: return map(d.dW_uh);
    case ParamGroup::W_vu: return map(d.dW_vu);
    case ParamGroup::W_uu: return map(d.dW_uu);
    }
    throw ContractViolation("group_view: unknown group");
}

/// params += step * grad
template <typename Scalar>
void apply_update(RnnRbmParams<Scalar>& p, const RnnGradient<Scalar>& g, Scalar step)
{
    p.rbm.b += step * g.rbm.db;
    p.rbm.c += step * g.rbm.dc;
    p.rbm.W += step * g.rbm.dW;
    p.u0 += step * g.du0;
    p.u_bias += step * g.du_bias;
    p.W_uv += step * g.dW_uv;
    p.W_uh += step * g.dW_uh;
    p.W_vu += step * g.dW_vu;
    p.W_uu += step * g.dW_uu;
}

/// Rescales `g` so its global norm is at most `max_norm`; a non-positive
/// `max_norm` disables clipping. Returns the norm before clipping.
template <typename Scalar>
Scalar clip_gradient(RnnGradient<Scalar>& g, Scalar max_norm)
{
    const Scalar n = g.norm();
    if (max_norm > Scalar(0) && n > max_norm)
        g *= max_norm / n;
    return n;
}

namespace detail {

template <typename Scalar>
void check_params(const RnnRbmParams<Scalar>& p)
{
    require(p.consistent(), "RnnRbmParams: inconsistent dimensions");
}

template <typename Scalar>
Matrix<Scalar> activate(const Matrix<Scalar>& pre, Activation a)
{
    if (a == Activation::Tanh)
        return pre.array().tanh().matrix();
    return sigmoid(pre);
}

/// Derivative of the activation expressed through its output.
template <typename Scalar>
Matrix<Scalar> activation_slope(const Matrix<Scalar>& out, Activation a)
{
    if (a == Activation::Tanh)
        return (Scalar(1) - out.array().square()).matrix();
    return (out.array() * (Scalar(1) - out.array())).matrix();
}

template <typename Scalar>
Matrix<Scalar> broadcast(const Vector<Scalar>& v, Index m)
{
    return v.rowwise().replicate(m);
}

template <typename Scalar>
void check_frames(const RnnRbmParams<Scalar>& p, const TimeMajor<Scalar>& frames)
{
    require(!frames.empty(), "empty sequence");
    const Index m = frames.front().cols();
    require(m >= 1, "sequence batch has no sequences");
    for (const auto& f : frames)
        require(f.rows() == p.n_visible() && f.cols() == m,
                "frame is " + dims(f.rows(), f.cols()) + ", expected " + dims(p.n_visible(), m));
}

} // namespace detail

/// Splits one sequence (n_visible x T, columns are frames) into time-major form.
template <typename Derived>
TimeMajor<typename Derived::Scalar> time_major(const Eigen::MatrixBase<Derived>& sequence)
{
    TimeMajor<typename Derived::Scalar> out;
    out.reserve(static_cast<std::size_t>(sequence.cols()));
    for (Index t = 0; t < sequence.cols(); ++t)
        out.emplace_back(sequence.col(t));
    return out;
}

// ---------------------------------------------------------------------------
// Forward recurrence

/// Time-dependent biases given the previous context; `u_prev` may hold one
/// column per sequence.
template <typename Scalar, typename DU>
std::pair<Matrix<Scalar>, Matrix<Scalar>> time_biases(const RnnRbmParams<Scalar>& p,
                                                      const Eigen::MatrixBase<DU>& u_prev)
{
    detail::check_params(p);
    detail::require(u_prev.rows() == p.n_context(), "time_biases: u_prev has " + std::to_string(u_prev.rows())
                                                        + " rows, expected " + std::to_string(p.n_context()));
    Matrix<Scalar> b_t = p.W_uv * u_prev;
    b_t.colwise() += p.rbm.b;
    Matrix<Scalar> c_t = p.W_uh * u_prev;
    c_t.colwise() += p.rbm.c;
    return {std::move(b_t), std::move(c_t)};
}

template <typename Scalar, typename DU, typename DV>
Matrix<Scalar> context_pre_activation(const RnnRbmParams<Scalar>& p, const Eigen::MatrixBase<DU>& u_prev,
                                      const Eigen::MatrixBase<DV>& v_t)
{
    detail::check_params(p);
    detail::require(u_prev.rows() == p.n_context() && v_t.rows() == p.n_visible() && u_prev.cols() == v_t.cols(),
                    "context_step: dimension mismatch");
    Matrix<Scalar> a = p.W_uu * u_prev + p.W_vu * v_t;
    a.colwise() += p.u_bias;
    return a;
}

template <typename Scalar, typename DU, typename DV>
Matrix<Scalar> context_step(const RnnRbmParams<Scalar>& p, const Eigen::MatrixBase<DU>& u_prev,
                            const Eigen::MatrixBase<DV>& v_t)
{
    return detail::activate(context_pre_activation(p, u_prev, v_t), p.activation);
}

/// Cached forward pass. Index t of each list corresponds to frame t+1;
/// `contexts[t]` is the context after consuming that frame, while
/// `b_t[t]`/`c_t[t]` are the biases used for it.
template <typename Scalar>
struct UnrolledState {
    Matrix<Scalar> u_initial; ///< u(0) broadcast over the batch
    TimeMajor<Scalar> contexts;
    TimeMajor<Scalar> b_t;
    TimeMajor<Scalar> c_t;
    TimeMajor<Scalar> pre_activations;

    Index length() const { return static_cast<Index>(contexts.size()); }

    /// Context that produced the biases of frame t (0-based).
    const Matrix<Scalar>& previous_context(Index t) const
    {
        return t == 0 ? u_initial : contexts[static_cast<std::size_t>(t - 1)];
    }
};

template <typename Scalar>
UnrolledState<Scalar> unroll(const RnnRbmParams<Scalar>& p, const TimeMajor<Scalar>& frames)
{
    detail::check_params(p);
    detail::check_frames(p, frames);
    const Index m = frames.front().cols();
    UnrolledState<Scalar> s;
    s.u_initial = detail::broadcast(p.u0, m);
    const std::size_t T = frames.size();
    s.contexts.reserve(T);
    s.b_t.reserve(T);
    s.c_t.reserve(T);
    s.pre_activations.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
        const Matrix<Scalar>& u_prev = t == 0 ? s.u_initial : s.contexts.back();
        auto [b, c] = time_biases(p, u_prev);
        s.b_t.push_back(std::move(b));
        s.c_t.push_back(std::move(c));
        s.pre_activations.push_back(context_pre_activation(p, u_prev, frames[t]));
        s.contexts.push_back(detail::activate(s.pre_activations.back(), p.activation));
    }
    return s;
}

template <typename Scalar, typename Derived>
UnrolledState<Scalar> unroll(const RnnRbmParams<Scalar>& p, const Eigen::MatrixBase<Derived>& sequence)
{
    return unroll(p, time_major(sequence));
}

// ---------------------------------------------------------------------------
// Gradients

enum class GradientMode {
    ContrastiveDivergence, ///< CD-k statistics per step (training path)
    Surrogate,             ///< exact gradient of the mean-field reconstruction loss
};

/// Deterministic surrogate: sum over frames and sequences of the
/// cross entropy between v(t) and one mean-field reconstruction under the
/// biases b(t), c(t).
template <typename Scalar>
Scalar negative_log_likelihood_proxy(const RnnRbmParams<Scalar>& p, const TimeMajor<Scalar>& frames)
{
    const auto s = unroll(p, frames);
    Scalar total = 0;
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const Matrix<Scalar> h = hidden_probs_with(p.rbm.W, s.c_t[t], frames[t]);
        Matrix<Scalar> pre = p.rbm.W * h + s.b_t[t];
        // CE(v, sigmoid(x)) = softplus(x) - v x
        total += (softplus(pre).array() - frames[t].array() * pre.array()).sum();
    }
    return total;
}

template <typename Scalar, typename Derived>
Scalar negative_log_likelihood_proxy(const RnnRbmParams<Scalar>& p, const Eigen::MatrixBase<Derived>& sequence)
{
    return negative_log_likelihood_proxy(p, time_major(sequence));
}

/// Gradient over the full parameter set, averaged over all T*m frames.
///
/// Pass 1 unrolls the recurrence and, at each step, computes signals for
/// W and for the conditional biases b(t), c(t): CD-k statistics in
/// training mode, or the exact derivative of the surrogate in Surrogate
/// mode (whose result is then -grad(proxy)/(T*m)). Pass 2 runs from T down
/// to 1, routing the bias signals through the recurrence into u_bias,
/// W_uv, W_uh, W_vu, W_uu and u(0). Ascent direction. `rng` is consumed
/// only in CD mode.
template <typename Scalar>
RnnGradient<Scalar> sequence_loss_gradient(const RnnRbmParams<Scalar>& p, const TimeMajor<Scalar>& frames, int k,
                                           Rng& rng, GradientMode mode = GradientMode::ContrastiveDivergence)
{
    detail::require(k >= 1, "sequence_loss_gradient: k must be >= 1");
    const auto s = unroll(p, frames);
    const std::size_t T = frames.size();
    const Index m = frames.front().cols();
    const Matrix<Scalar>& W = p.rbm.W;

    RnnGradient<Scalar> g = RnnGradient<Scalar>::zeros_like(p);
    TimeMajor<Scalar> gb(T), gc(T);
    for (std::size_t t = 0; t < T; ++t) {
        if (mode == GradientMode::ContrastiveDivergence) {
            auto stats = cd_k_statistics(W, s.b_t[t], s.c_t[t], frames[t], k, rng);
            g.rbm.dW += stats.dW;
            gb[t] = std::move(stats.db);
            gc[t] = std::move(stats.dc);
        } else {
            const Matrix<Scalar> h = hidden_probs_with(W, s.c_t[t], frames[t]);
            const Matrix<Scalar> r = visible_probs_with(W, s.b_t[t], h);
            gb[t] = frames[t] - r;
            gc[t] = ((W.transpose() * gb[t]).array() * h.array() * (Scalar(1) - h.array())).matrix();
            g.rbm.dW += gb[t] * h.transpose() + frames[t] * gc[t].transpose();
        }
        g.rbm.db += gb[t].rowwise().sum();
        g.rbm.dc += gc[t].rowwise().sum();
        const Matrix<Scalar>& u_prev = s.previous_context(static_cast<Index>(t));
        g.dW_uv += gb[t] * u_prev.transpose();
        g.dW_uh += gc[t] * u_prev.transpose();
    }

    // Backward through the context recurrence. The final context feeds
    // nothing, so its pre-activation gradient is zero.
    Matrix<Scalar> delta_next = Matrix<Scalar>::Zero(p.n_context(), m);
    for (std::size_t t = T; t-- > 0;) {
        if (t + 1 < T) {
            const Matrix<Scalar> grad_u = p.W_uv.transpose() * gb[t + 1] + p.W_uh.transpose() * gc[t + 1]
                + p.W_uu.transpose() * delta_next;
            const Matrix<Scalar> delta =
                (grad_u.array() * detail::activation_slope(s.contexts[t], p.activation).array()).matrix();
            g.du_bias += delta.rowwise().sum();
            g.dW_uu += delta * s.previous_context(static_cast<Index>(t)).transpose();
            g.dW_vu += delta * frames[t].transpose();
            delta_next = delta;
        } else {
            delta_next.setZero();
        }
    }
    const Matrix<Scalar> grad_u0 =
        p.W_uv.transpose() * gb[0] + p.W_uh.transpose() * gc[0] + p.W_uu.transpose() * delta_next;
    g.du0 = grad_u0.rowwise().sum();

    g *= Scalar(1) / static_cast<Scalar>(static_cast<Index>(T) * m);
    return g;
}

template <typename Scalar, typename Derived>
RnnGradient<Scalar> sequence_loss_gradient(const RnnRbmParams<Scalar>& p, const Eigen::MatrixBase<Derived>& sequence,
                                           int k, Rng& rng, GradientMode mode = GradientMode::ContrastiveDivergence)
{
    return sequence_loss_gradient(p, time_major(sequence), k, rng, mode);
}

// ---------------------------------------------------------------------------
// Prediction

/// Advances the context with the observed frame, then runs k_gen Gibbs
/// steps of the resulting conditional RBM starting from that frame.
/// Returns the final visible probabilities (not a sample) and the new
/// context. Columns are independent sequences.
template <typename Scalar, typename DU, typename DV>
std::pair<Matrix<Scalar>, Matrix<Scalar>> predict_next_frame(const RnnRbmParams<Scalar>& p,
                                                             const Eigen::MatrixBase<DU>& u_prev,
                                                             const Eigen::MatrixBase<DV>& v_t, int k_gen, Rng& rng)
{
    detail::require(k_gen >= 1, "predict_next_frame: k_gen must be >= 1");
    Matrix<Scalar> u_t = context_step(p, u_prev, v_t);
    const auto [b_next, c_next] = time_biases(p, u_t);
    Matrix<Scalar> v = v_t;
    Matrix<Scalar> pv;
    for (int step = 0; step < k_gen; ++step) {
        const Matrix<Scalar> h = sample_bernoulli(hidden_probs_with(p.rbm.W, c_next, v), rng);
        pv = visible_probs_with(p.rbm.W, b_next, h);
        if (step + 1 < k_gen)
            v = sample_bernoulli(pv, rng);
    }
    return {std::move(pv), std::move(u_t)};
}

/// The conditional RBM that models the first frame of a sequence.
template <typename Scalar>
RbmParams<Scalar> first_step_rbm(const RnnRbmParams<Scalar>& p)
{
    auto [b, c] = time_biases(p, p.u0);
    RbmParams<Scalar> r;
    r.b = b.col(0);
    r.c = c.col(0);
    r.W = p.rbm.W;
    return r;
}

// ---------------------------------------------------------------------------
// Structural operators lifted to the recurrent layer. The child's W_uh row
// starts at zero; removal drops the matching W_uh rows.

template <typename Scalar>
std::pair<RnnRbmParams<Scalar>, WdMonitor<Scalar>>
generate_neuron(const RnnRbmParams<Scalar>& params, const WdMonitor<Scalar>& monitor, Index parent,
                double noise_scale, Rng& rng, Index max_hidden = std::numeric_limits<Index>::max())
{
    detail::check_params(params);
    auto [core, m] = generate_neuron(params.rbm, monitor, parent, noise_scale, rng, max_hidden);
    RnnRbmParams<Scalar> out = params;
    out.rbm = std::move(core);
    const Index n = params.n_hidden(), at = parent + 1;
    out.W_uh.resize(n + 1, params.n_context());
    out.W_uh.topRows(at) = params.W_uh.topRows(at);
    out.W_uh.row(at).setZero();
    out.W_uh.bottomRows(n - at) = params.W_uh.bottomRows(n - at);
    return {std::move(out), std::move(m)};
}

template <typename Scalar>
std::pair<RnnRbmParams<Scalar>, WdMonitor<Scalar>>
annihilate_neurons(const RnnRbmParams<Scalar>& params, const WdMonitor<Scalar>& monitor, const std::vector<Index>& idxs)
{
    detail::check_params(params);
    auto [core, m] = annihilate_neurons(params.rbm, monitor, idxs);
    const auto keep = detail::kept_indices(params.n_hidden(), idxs);
    RnnRbmParams<Scalar> out = params;
    out.rbm = std::move(core);
    out.W_uh = params.W_uh(keep, Eigen::all);
    return {std::move(out), std::move(m)};
}

} // namespace ardbn
