#include "ardbn/checkpoint.hpp"
#include "ardbn/config.hpp"
#include "ardbn/gradcheck.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <sstream>

using namespace ardbn;

namespace {

SequenceBatch random_batch(Index n, Index T, Index dim, std::uint64_t seed)
{
    Rng rng(seed);
    SequenceBatch b(n, T, dim);
    b.frames = random_binary(dim, n * T, rng);
    return b;
}

/// Two layers, neuron events and a layer event.
DbnModel eventful_model()
{
    TrainConfig cfg;
    cfg.lr = 0.1;
    cfg.epochs_per_layer = 3;
    cfg.batch_size = 5;
    cfg.seed = 17;
    cfg.initial_hidden = 5;
    AdaptationConfig adapt;
    adapt.theta_gen = 1e-30;
    adapt.min_steps_before_gen = 1;
    adapt.max_hidden = 9;
    adapt.theta_wd_layer = 1e-30;
    adapt.theta_energy_layer = 1e-30;
    adapt.max_layers = 2;
    return train_dbn(random_batch(10, 4, 12, 3), cfg, adapt);
}

std::string header_of(const std::vector<std::uint8_t>& bytes)
{
    const std::uint32_t len = bytes[8] | (bytes[9] << 8) | (bytes[10] << 16) | (static_cast<std::uint32_t>(bytes[11]) << 24);
    return std::string(bytes.begin() + 12, bytes.begin() + 12 + len);
}

void expect_bitwise_same(const DbnModel& a, const DbnModel& b)
{
    ASSERT_EQ(a.depth(), b.depth());
    for (Index l = 0; l < a.depth(); ++l) {
        auto x = a.layers[l], y = b.layers[l];
        EXPECT_EQ(x.activation, y.activation);
        for (ParamGroup g : kAllParamGroups) {
            const auto gx = group_view(x, g), gy = group_view(y, g);
            ASSERT_EQ(gx.size(), gy.size());
            EXPECT_TRUE(bitwise_equal(gx, gy)) << to_string(g);
        }
    }
    EXPECT_EQ(a.adaptation_log, b.adaptation_log);
}

} // namespace

TEST(Config, ExampleFileLoads)
{
    const auto cfg = load_config(ARDBN_EXAMPLE_CONFIG);
    EXPECT_EQ(cfg.data.patch, 16);
    EXPECT_EQ(cfg.data.n_frames, 20);
    EXPECT_DOUBLE_EQ(cfg.train.lr, 0.05);
    EXPECT_FALSE(cfg.train.initial_hidden.has_value());
    EXPECT_FALSE(cfg.adapt.theta_wd_layer.has_value());
    EXPECT_EQ(cfg.n_prime, 10);
    EXPECT_EQ(cfg.n_pred, 10);
    EXPECT_NO_THROW(cfg.data.validate());
    EXPECT_NO_THROW(cfg.train.validate());
    EXPECT_NO_THROW(cfg.adapt.validate());
}

TEST(Config, ValuesAndComments)
{
    const auto cfg = parse_config("lr = 0.001   # smallest grid value\n\n"
                                  "theta_wd_layer = inf\nmin_steps_before_gen = 40\nactivation = sigmoid\n"
                                  "bounce = false\ninitial_hidden = 12\n");
    EXPECT_DOUBLE_EQ(cfg.train.lr, 0.001);
    EXPECT_TRUE(std::isinf(*cfg.adapt.theta_wd_layer));
    EXPECT_EQ(*cfg.adapt.min_steps_before_gen, 40u);
    EXPECT_EQ(cfg.train.activation, Activation::Sigmoid);
    EXPECT_FALSE(cfg.data.bounce);
    EXPECT_EQ(*cfg.train.initial_hidden, 12);
    const auto back = parse_config("initial_hidden = auto\n");
    EXPECT_FALSE(back.train.initial_hidden.has_value());
}

TEST(Config, PaperLearningRatesParse)
{
    for (const char* lr : {"0.010", "0.050", "0.001"}) {
        const auto cfg = parse_config(std::string("lr = ") + lr);
        EXPECT_DOUBLE_EQ(cfg.train.lr, std::stod(lr));
        EXPECT_NO_THROW(cfg.train.validate());
    }
}

TEST(Config, Errors)
{
    EXPECT_THROW(parse_config("no_such_key = 1"), ConfigError);
    EXPECT_THROW(parse_config("lr 0.1"), ConfigError);
    EXPECT_THROW(parse_config("lr = fast"), ConfigError);
    EXPECT_THROW(parse_config("batch_size = 2.5"), ConfigError);
    EXPECT_THROW(parse_config("bounce = maybe"), ConfigError);
    EXPECT_THROW(parse_config("activation = relu"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/ardbn.cfg"), ConfigError);
    EXPECT_THROW(parse_config("lr = -1").train.validate(), ConfigError);
    try {
        parse_config("lr = 0.1\nnot a pair\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(Config, CanonicalTextRoundTrips)
{
    auto cfg = parse_config("lr = 0.1\ntheta_gen = 3e-11\ntheta_wd_layer = inf\nseed = 18446744073709551615\n"
                            "noise_scale = 0.30000000000000004\n");
    const auto text = to_config_text(cfg);
    const auto again = parse_config(text);
    EXPECT_EQ(to_config_text(again), text);
    EXPECT_EQ(again.adapt.noise_scale, 0.30000000000000004);
    EXPECT_EQ(again.train.seed, std::numeric_limits<std::uint64_t>::max());
    for (double v : {0.1, 1e-10, 5e-324, 1.0 / 3.0, -2.5e300})
        EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
}

TEST(Checkpoint, BitwiseRoundTrip)
{
    const auto model = eventful_model();
    ASSERT_EQ(model.depth(), 2);
    ASSERT_FALSE(model.adaptation_log.empty());
    const auto bytes = serialize_checkpoint(model);
    const auto back = deserialize_checkpoint(bytes);
    expect_bitwise_same(model, back);
    EXPECT_EQ(serialize_checkpoint(back), bytes);
    EXPECT_EQ(back.train.seed, 17u);
    EXPECT_EQ(back.train.lr, 0.1);
    EXPECT_EQ(*back.adaptation.min_steps_before_gen, 1u);
    EXPECT_EQ(*back.adaptation.theta_wd_layer, 1e-30);
    EXPECT_FALSE(back.adaptation.theta_ann != model.adaptation.theta_ann);
    EXPECT_TRUE(back.dimension_chain_ok());
}

TEST(Checkpoint, LayoutIsLittleEndianRowMajor)
{
    DbnModel model;
    model.layers.emplace_back(2, 3, 1);
    model.layers[0].rbm.W << 1, 2, 3, 4, 5, 6;
    const auto bytes = serialize_checkpoint(model);
    ASSERT_TRUE(std::equal(bytes.begin(), bytes.begin() + 8, "ARDBNCKP"));
    const std::string header = header_of(bytes);
    EXPECT_TRUE(header.starts_with("format_version = 1\n"));
    EXPECT_NE(header.find("layer = 2 3 1 tanh\n"), std::string::npos);
    EXPECT_NE(header.find("events = 0\n"), std::string::npos);

    // Blocks b (2), c (3), then W: count 6 followed by 1, 2, 3, 4, 5, 6.
    std::size_t pos = 12 + header.size() + (8 + 2 * 8) + (8 + 3 * 8);
    std::uint64_t count = 0;
    for (int i = 7; i >= 0; --i)
        count = (count << 8) | bytes[pos + static_cast<std::size_t>(i)];
    EXPECT_EQ(count, 6u);
    for (int k = 0; k < 6; ++k) {
        std::uint64_t raw = 0;
        for (int i = 7; i >= 0; --i)
            raw = (raw << 8) | bytes[pos + 8 + 8 * static_cast<std::size_t>(k) + static_cast<std::size_t>(i)];
        EXPECT_EQ(std::bit_cast<double>(raw), static_cast<double>(k + 1));
    }
}

TEST(Checkpoint, UntrainedModelLoads)
{
    TrainConfig cfg;
    cfg.epochs_per_layer = 0;
    const auto model = train_dbn(random_batch(4, 3, 16, 1), cfg, {});
    const auto path = std::filesystem::temp_directory_path() / "ardbn_test_untrained.ckpt";
    save_checkpoint(model, path);
    const auto back = load_checkpoint(path);
    EXPECT_EQ(back.depth(), 1);
    EXPECT_TRUE(back.adaptation_log.empty());
    EXPECT_EQ(back.layers[0].n_hidden(), 8);
    expect_bitwise_same(model, back);
    std::filesystem::remove(path);
}

TEST(Checkpoint, VersionMismatchIsRejected)
{
    auto bytes = serialize_checkpoint(eventful_model());
    const std::string needle = "format_version = 1";
    const auto it = std::search(bytes.begin(), bytes.end(), needle.begin(), needle.end());
    ASSERT_NE(it, bytes.end());
    *(it + static_cast<std::ptrdiff_t>(needle.size()) - 1) = '7';
    try {
        deserialize_checkpoint(bytes);
        FAIL() << "accepted a future version";
    } catch (const CheckpointError& e) {
        EXPECT_NE(std::string(e.what()).find("version 7"), std::string::npos) << e.what();
    }
}

TEST(Checkpoint, CorruptionIsDiagnosed)
{
    const auto good = serialize_checkpoint(eventful_model());
    for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{11}, std::size_t{40}, good.size() / 2,
                            good.size() - 1}) {
        const std::vector<std::uint8_t> truncated(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut));
        EXPECT_THROW(deserialize_checkpoint(truncated), CheckpointError) << "cut at " << cut;
    }
    auto magic = good;
    magic[0] = 'X';
    EXPECT_THROW(deserialize_checkpoint(magic), CheckpointError);
    auto trailing = good;
    trailing.push_back(0);
    EXPECT_THROW(deserialize_checkpoint(trailing), CheckpointError);
    EXPECT_THROW(load_checkpoint("/nonexistent/model.ckpt"), CheckpointError);
}

TEST(Checkpoint, BrokenHeaderValues)
{
    const auto good = serialize_checkpoint(eventful_model());
    auto rewrite = [&](const std::string& from, const std::string& to) {
        std::string header = header_of(good);
        const auto at = header.find(from);
        EXPECT_NE(at, std::string::npos) << from;
        header.replace(at, from.size(), to);
        std::vector<std::uint8_t> out(good.begin(), good.begin() + 8);
        const auto len = static_cast<std::uint32_t>(header.size());
        for (int i = 0; i < 4; ++i)
            out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
        out.insert(out.end(), header.begin(), header.end());
        out.insert(out.end(), good.begin() + 12 + static_cast<std::ptrdiff_t>(header_of(good).size()), good.end());
        return out;
    };
    EXPECT_NO_THROW(deserialize_checkpoint(rewrite("depth = 2", "depth = 2")));
    EXPECT_THROW(deserialize_checkpoint(rewrite("depth = 2", "depth = 3")), CheckpointError);
    EXPECT_THROW(deserialize_checkpoint(rewrite("lr = 0.10000000000000001", "lr = fast")), CheckpointError);
    EXPECT_THROW(deserialize_checkpoint(rewrite("lr = ", "learning_rate = ")), CheckpointError);
    EXPECT_THROW(deserialize_checkpoint(rewrite("event = neuron", "event = mystery")), CheckpointError);
}

TEST(Checkpoint, EventsAsJsonLines)
{
    const auto model = eventful_model();
    const auto text = events_to_jsonl(model.adaptation_log);
    std::istringstream in(text);
    std::size_t n = 0;
    bool saw_layer = false, saw_neuron = false;
    for (std::string line; std::getline(in, line); ++n) {
        const auto j = nlohmann::json::parse(line);
        const auto& e = model.adaptation_log[n];
        EXPECT_EQ(j.at("step").get<std::uint64_t>(), e.step);
        EXPECT_EQ(j.at("kind").get<std::string>(), to_string(e.kind));
        EXPECT_EQ(j.at("layer").get<Index>(), e.layer);
        EXPECT_EQ(j.at("index").get<Index>(), e.neuron);
        if (e.kind == EventKind::LayerGeneration) {
            saw_layer = true;
            EXPECT_EQ(j.at("total_wd").get<double>(), e.wd_c);
            EXPECT_EQ(j.at("mean_free_energy").get<double>(), e.energy);
        } else {
            saw_neuron = true;
            EXPECT_EQ(j.at("wd_c").get<double>(), e.wd_c);
            EXPECT_EQ(j.at("wd_W").get<double>(), e.wd_W);
        }
    }
    EXPECT_EQ(n, model.adaptation_log.size());
    EXPECT_TRUE(saw_layer);
    EXPECT_TRUE(saw_neuron);
    EXPECT_EQ(events_to_jsonl({}), "");
}
