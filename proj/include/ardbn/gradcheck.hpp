#pragma once

// Central finite-difference checks of the analytic gradients: the exact
// log-likelihood gradient of a static RBM and the BPTT gradient of the
// recurrent surrogate loss.

#include "ardbn/rbm.hpp"
#include "ardbn/rnn_rbm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace ardbn {

/// |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose true
/// gradient is essentially zero from dominating the report.
inline double relative_error(double analytic, double numeric, double floor)
{
    const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / scale;
}

struct GroupError {
    std::string group;
    Index count = 0;
    double max_abs = 0.0;
    double max_rel = 0.0;
};

struct GradCheckReport {
    std::vector<GroupError> groups;

    double max_rel() const
    {
        double m = 0.0;
        for (const auto& g : groups)
            m = std::max(m, g.max_rel);
        return m;
    }
};

inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kRelativeErrorFloor = 1e-8;

namespace detail {

/// Compares analytic entries with central differences of `f` along each
/// coordinate of `theta`. `sign` converts the derivative of f into the
/// analytic convention.
template <typename F>
GroupError fd_compare(const std::string& name, Eigen::Map<Vector<double>> theta, const Vector<double>& analytic,
                      const F& f, double sign, double h, double floor)
{
    GroupError e{name, theta.size(), 0.0, 0.0};
    for (Index i = 0; i < theta.size(); ++i) {
        const double saved = theta(i);
        theta(i) = saved + h;
        const double up = f();
        theta(i) = saved - h;
        const double down = f();
        theta(i) = saved;
        const double numeric = sign * (up - down) / (2.0 * h);
        e.max_abs = std::max(e.max_abs, std::abs(analytic(i) - numeric));
        e.max_rel = std::max(e.max_rel, relative_error(analytic(i), numeric, floor));
    }
    return e;
}

inline Eigen::Map<Vector<double>> as_vector(Vector<double>& v) { return {v.data(), v.size()}; }
inline Eigen::Map<Vector<double>> as_vector(Matrix<double>& m) { return {m.data(), m.size()}; }

} // namespace detail

using RbmTamper = std::function<void(GradientSet<double>&)>;
using RnnTamper = std::function<void(RnnGradient<double>&)>;

/// exact_log_likelihood_gradient against differences of the exact mean
/// log-likelihood, per group b, c, W.
inline GradCheckReport check_rbm_gradient(RbmParams<double> p, const Matrix<double>& data,
                                          double h = kFiniteDifferenceStep, double floor = kRelativeErrorFloor,
                                          const RbmTamper& tamper = {})
{
    auto g = exact_log_likelihood_gradient(p, data);
    if (tamper)
        tamper(g);
    auto f = [&] { return exact_mean_log_likelihood(p, data); };
    GradCheckReport r;
    r.groups.push_back(detail::fd_compare("b", detail::as_vector(p.b), g.db, f, 1.0, h, floor));
    r.groups.push_back(detail::fd_compare("c", detail::as_vector(p.c), g.dc, f, 1.0, h, floor));
    const Vector<double> dW = g.dW.reshaped();
    r.groups.push_back(detail::fd_compare("W", detail::as_vector(p.W), dW, f, 1.0, h, floor));
    return r;
}

/// Surrogate-mode BPTT gradient against differences of the surrogate loss
/// over every parameter group.
inline GradCheckReport check_rnn_gradient(RnnRbmParams<double> p, const TimeMajor<double>& frames,
                                          double h = kFiniteDifferenceStep, double floor = kRelativeErrorFloor,
                                          const RnnTamper& tamper = {})
{
    Rng unused(0);
    auto g = sequence_loss_gradient(p, frames, 1, unused, GradientMode::Surrogate);
    if (tamper)
        tamper(g);
    const double n_frames = static_cast<double>(frames.size()) * static_cast<double>(frames.front().cols());
    auto f = [&] { return negative_log_likelihood_proxy(p, frames); };
    GradCheckReport r;
    for (ParamGroup group : kAllParamGroups) {
        const Vector<double> analytic = group_view(g, group);
        r.groups.push_back(
            detail::fd_compare(to_string(group), group_view(p, group), analytic, f, -1.0 / n_frames, h, floor));
    }
    return r;
}

// Seeded problem instances shared by the CLI and the tests.

struct RbmCheckCase {
    RbmParams<double> params;
    Matrix<double> data;
};

struct RnnCheckCase {
    RnnRbmParams<double> params;
    TimeMajor<double> frames;
};

inline Matrix<double> random_binary(Index rows, Index cols, Rng& rng)
{
    Matrix<double> m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i)
            m(i, j) = uniform01(rng) < 0.5 ? 0.0 : 1.0;
    return m;
}

/// 4x3 RBM with 8 binary data vectors; `small` is 8x6 with 16 vectors.
inline RbmCheckCase make_rbm_check_case(bool small, std::uint64_t seed)
{
    Rng rng(seed);
    const Index nv = small ? 8 : 4, nh = small ? 6 : 3, m = small ? 16 : 8;
    RbmCheckCase c{RbmParams<double>::random(nv, nh, 0.5, rng), {}};
    c.params.b = random_gaussian<double>(nv, 1, 0.5, rng);
    c.params.c = random_gaussian<double>(nh, 1, 0.5, rng);
    c.data = random_binary(nv, m, rng);
    return c;
}

/// T=5, 6 visible, 4 hidden, 3 context, two sequences; `small` is T=8,
/// 10 visible, 8 hidden, 5 context, three sequences.
inline RnnCheckCase make_rnn_check_case(bool small, std::uint64_t seed)
{
    Rng rng(seed);
    const Index T = small ? 8 : 5, nv = small ? 10 : 6, nh = small ? 8 : 4, nu = small ? 5 : 3, m = small ? 3 : 2;
    RnnCheckCase c{RnnRbmParams<double>::random(nv, nh, nu, 0.5, rng), {}};
    c.params.rbm.b = random_gaussian<double>(nv, 1, 0.5, rng);
    c.params.rbm.c = random_gaussian<double>(nh, 1, 0.5, rng);
    c.params.u_bias = random_gaussian<double>(nu, 1, 0.5, rng);
    for (Index t = 0; t < T; ++t)
        c.frames.push_back(random_binary(nv, m, rng));
    return c;
}

} // namespace ardbn
