#include "ardbn/dataio.hpp"
#include "ardbn/eval.hpp"
#include "ardbn/gradcheck.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace ardbn;

namespace {

SequenceBatch moving_sprites(std::uint64_t seed, Index n, double speed)
{
    SpriteSequenceConfig cfg;
    cfg.seed = seed;
    cfg.speed_min = cfg.speed_max = speed;
    return generate_dataset(cfg, n);
}

std::vector<Eigen::MatrixXd> future(const SequenceBatch& b, Index n_prime, Index n_pred)
{
    return b.time_major(b.all_indices(), n_prime, n_pred);
}

} // namespace

TEST(Score, PerfectPrediction)
{
    const auto data = moving_sprites(1, 6, 1.5);
    const auto truth = future(data, 10, 10);
    const auto r = score_predictions("oracle", truth, truth, 0.5);
    EXPECT_EQ(r.squared_error, 0.0);
    EXPECT_EQ(r.accuracy, 1.0);
    EXPECT_GE(r.cross_entropy, 0.0);
    EXPECT_LE(r.cross_entropy, 10 * 256 * std::log(1.0 / (1.0 - kProbabilityClip)) * (1 + 1e-12));
    EXPECT_EQ(r.per_frame_accuracy, std::vector<double>(10, 1.0));
}

TEST(Score, UniformClosedForm)
{
    const auto data = moving_sprites(2, 5, 1.5);
    const auto r = uniform_baseline(data, 10, 10, 0.5);
    EXPECT_NEAR(r.cross_entropy, 10 * 256 * std::numbers::ln2, 1e-9);
    EXPECT_NEAR(r.squared_error, 0.25 * 10 * 256, 1e-9);
    EXPECT_EQ(r.name, "uniform-0.5");
}

TEST(Score, NonnegativeAndFiniteWithExtremeProbabilities)
{
    const auto data = moving_sprites(3, 4, 1.0);
    const auto truth = future(data, 10, 10);
    std::vector<Eigen::MatrixXd> inverted;
    for (const auto& f : truth)
        inverted.push_back(1.0 - f.array());
    const auto r = score_predictions("worst", inverted, truth, 0.5);
    EXPECT_TRUE(std::isfinite(r.cross_entropy));
    EXPECT_GT(r.cross_entropy, 0.0);
    EXPECT_EQ(r.accuracy, 0.0);
    EXPECT_NEAR(r.squared_error, 10 * 256, 1e-12);
}

TEST(Score, PermutationInvariantAndAdditive)
{
    const auto data = moving_sprites(4, 8, 2.0);
    Rng rng(5);
    std::vector<Eigen::MatrixXd> pred;
    for (Index t = 0; t < 10; ++t)
        pred.push_back(Eigen::MatrixXd::NullaryExpr(256, 8, [&] { return uniform01(rng); }));
    const auto truth = future(data, 10, 10);
    const auto base = score_predictions("x", pred, truth, 0.5);

    std::vector<Index> perm{5, 2, 7, 0, 3, 6, 1, 4};
    std::vector<Eigen::MatrixXd> pp, tp;
    for (Index t = 0; t < 10; ++t) {
        pp.push_back(pred[t](Eigen::all, perm));
        tp.push_back(truth[t](Eigen::all, perm));
    }
    const auto shuffled = score_predictions("x", pp, tp, 0.5);
    EXPECT_NEAR(shuffled.cross_entropy, base.cross_entropy, 1e-12 * base.cross_entropy);
    EXPECT_NEAR(shuffled.squared_error, base.squared_error, 1e-12 * base.squared_error);
    EXPECT_NEAR(shuffled.accuracy, base.accuracy, 1e-12);

    // Two halves averaged give the whole.
    std::vector<Eigen::MatrixXd> p1, p2, t1, t2;
    for (Index t = 0; t < 10; ++t) {
        p1.push_back(pred[t].leftCols(4));
        p2.push_back(pred[t].rightCols(4));
        t1.push_back(truth[t].leftCols(4));
        t2.push_back(truth[t].rightCols(4));
    }
    const auto a = score_predictions("x", p1, t1, 0.5), b = score_predictions("x", p2, t2, 0.5);
    EXPECT_NEAR(0.5 * (a.cross_entropy + b.cross_entropy), base.cross_entropy, 1e-10);
    EXPECT_NEAR(0.5 * (a.squared_error + b.squared_error), base.squared_error, 1e-10);
}

TEST(Score, ShapeErrors)
{
    std::vector<Eigen::MatrixXd> a(3, Eigen::MatrixXd::Zero(4, 2)), b(2, Eigen::MatrixXd::Zero(4, 2));
    EXPECT_THROW(score_predictions("x", a, b, 0.5), ContractViolation);
    std::vector<Eigen::MatrixXd> c(3, Eigen::MatrixXd::Zero(4, 3));
    EXPECT_THROW(score_predictions("x", a, c, 0.5), ContractViolation);
}

TEST(Persistence, ExactOnStaticSequences)
{
    const auto data = moving_sprites(6, 5, 0.0);
    const auto r = persistence_baseline(data, 10, 10, 0.5);
    EXPECT_EQ(r.accuracy, 1.0);
    EXPECT_EQ(r.squared_error, 0.0);
}

TEST(Persistence, ImperfectOnMovingSequences)
{
    const auto data = moving_sprites(7, 5, 1.5);
    const auto r = persistence_baseline(data, 10, 10, 0.5);
    EXPECT_LT(r.accuracy, 1.0);
    EXPECT_GT(r.squared_error, 0.0);
    EXPECT_EQ(r.name, "persistence");
}

TEST(Protocol, Errors)
{
    const auto data = moving_sprites(8, 2, 1.0);
    EXPECT_THROW(persistence_baseline(data, 15, 10, 0.5), ContractViolation);
    EXPECT_THROW(uniform_baseline(data, 10, 10, 1.0), ContractViolation);
    EXPECT_THROW(uniform_baseline(data, 0, 10, 0.5), ContractViolation);
}

TEST(Evaluate, ZeroModelMatchesUniform)
{
    DbnModel model;
    model.layers.emplace_back(256, 8, 8);
    const auto data = moving_sprites(9, 4, 1.5);
    Rng rng(1);
    const auto r = evaluate(model, data, 10, 10, 0.5, 1, rng);
    ASSERT_EQ(r.baselines.size(), 2u);
    EXPECT_EQ(r.baselines[0].name, "persistence");
    EXPECT_EQ(r.baselines[1].name, "uniform-0.5");
    EXPECT_NEAR(r.cross_entropy, 10 * 256 * std::numbers::ln2, 1e-9);
    EXPECT_NEAR(r.cross_entropy, r.baselines[1].cross_entropy, 1e-9);
    EXPECT_EQ(r.per_frame_accuracy.size(), 10u);
}

TEST(Evaluate, NeverReadsFutureFrames)
{
    Rng init(2);
    DbnModel model;
    model.layers.push_back(RnnRbmParams<double>::random(256, 8, 8, 0.3, init));
    const auto data = moving_sprites(10, 4, 1.5);
    auto corrupted = data;
    for (Index i = 0; i < corrupted.n; ++i)
        corrupted.sequence(i).rightCols(10).setConstant(1.0);

    // Predictions come only from the prime slice, so the model's scores on the
    // corrupted set equal scores of the clean predictions against corrupted truth.
    Rng a(3), b(3);
    const auto prime = data.time_major(data.all_indices(), 0, 10);
    const auto clean_pred = dbn_predict_batch(model, prime, 10, 1, a);
    const auto r = evaluate(model, corrupted, 10, 10, 0.5, 1, b);
    const auto expected = score_predictions("adaptive-rnn-dbn", clean_pred, future(corrupted, 10, 10), 0.5);
    EXPECT_EQ(r.cross_entropy, expected.cross_entropy);
    EXPECT_EQ(r.squared_error, expected.squared_error);
}

TEST(Tables, PerFrameLayout)
{
    EvalReport r;
    r.name = "constant";
    r.per_frame_accuracy.assign(10, 0.925);
    const auto table = per_frame_table({r}, 11);
    EXPECT_NE(table.find("    11"), std::string::npos);
    EXPECT_NE(table.find("    20"), std::string::npos);
    EXPECT_EQ(table.find("    21"), std::string::npos);
    std::size_t count = 0;
    for (std::size_t pos = table.find("92.5%"); pos != std::string::npos; pos = table.find("92.5%", pos + 1))
        ++count;
    EXPECT_EQ(count, 10u);
    EvalReport shorter = r;
    shorter.per_frame_accuracy.pop_back();
    EXPECT_THROW(per_frame_table({r, shorter}, 11), ContractViolation);
    EXPECT_THROW(per_frame_table({}, 11), ContractViolation);
}

TEST(Tables, TextAndCsv)
{
    const auto data = moving_sprites(11, 3, 1.5);
    DbnModel model;
    model.layers.emplace_back(256, 8, 8);
    Rng rng(1);
    const auto r = evaluate(model, data, 10, 10, 0.5, 1, rng);

    const auto text = format_report_text(r, 10, 256);
    for (const char* needle : {"cross entropy", "squared error", "clipped", "adaptive-rnn-dbn", "persistence",
                               "uniform-0.5", "134.0", "Prediction accuracy for each frame"})
        EXPECT_NE(text.find(needle), std::string::npos) << needle;

    const auto csv = format_report_csv(r, 10);
    EXPECT_TRUE(csv.starts_with("configuration,metric,value\n"));
    EXPECT_NE(csv.find("adaptive-rnn-dbn,accuracy_frame_11,"), std::string::npos);
    EXPECT_NE(csv.find("uniform-0.5,accuracy_frame_20,"), std::string::npos);
    EXPECT_EQ(csv.find("accuracy_frame_21"), std::string::npos);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 3 * 13);
}
