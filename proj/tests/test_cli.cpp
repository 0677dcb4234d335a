#include "ardbn/checkpoint.hpp"
#include "ardbn/npy.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace ardbn;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("ardbn_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path path(const std::string& name) const { return dir_ / name; }

    /// Runs the CLI with `args`; stdout and stderr land in `last_output_`.
    int run(const std::string& args)
    {
        const auto log = path("last.log");
        const std::string cmd = std::string("\"") + ARDBN_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
        const int status = std::system(cmd.c_str());
        last_output_ = slurp(log);
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    static std::string slurp(const fs::path& p)
    {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }

    /// A config file: the example settings plus overrides.
    fs::path config(const std::string& overrides, const std::string& name = "run.cfg")
    {
        const auto p = path(name);
        std::ofstream(p) << slurp(ARDBN_EXAMPLE_CONFIG) << '\n' << overrides;
        return p;
    }

    std::string q(const fs::path& p) const { return "\"" + p.string() + "\""; }

    fs::path dir_;
    std::string last_output_;
};

double csv_value(const std::string& csv, const std::string& key)
{
    const auto at = csv.find(key);
    if (at == std::string::npos)
        return std::nan("");
    return std::stod(csv.substr(at + key.size()));
}

} // namespace

TEST_F(Cli, UsageErrors)
{
    EXPECT_EQ(run(""), 1);
    EXPECT_EQ(run("no-such-command"), 1);
    EXPECT_EQ(run("gen-data --n 3"), 1);
    EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, GenDataWritesNpyAndManifest)
{
    const auto cfg = config("");
    ASSERT_EQ(run("gen-data --config " + q(cfg) + " --n 10 --out " + q(path("a.npy"))), 0) << last_output_;
    const auto batch = read_npy(path("a.npy"));
    EXPECT_EQ(batch.n, 10);
    EXPECT_EQ(batch.T, 20);
    EXPECT_EQ(batch.dim, 256);
    const auto manifest = slurp(path("a.npy.manifest"));
    EXPECT_NE(manifest.find("(20, 10, 16, 16)"), std::string::npos) << manifest;
    EXPECT_NE(manifest.find("data_seed = 7"), std::string::npos);

    ASSERT_EQ(run("gen-data --config " + q(cfg) + " --n 10 --out " + q(path("b.npy"))), 0);
    EXPECT_EQ(read_file_bytes(path("a.npy")), read_file_bytes(path("b.npy")));
    ASSERT_EQ(run("gen-data --config " + q(cfg) + " --n 10 --seed 8 --out " + q(path("c.npy"))), 0);
    EXPECT_NE(read_file_bytes(path("a.npy")), read_file_bytes(path("c.npy")));
}

TEST_F(Cli, GenDataRejectsPatchSmallerThanSprite)
{
    const auto cfg = config("patch = 4\n");
    EXPECT_NE(run("gen-data --config " + q(cfg) + " --n 2 --out " + q(path("x.npy"))), 0);
    EXPECT_FALSE(last_output_.empty());
    EXPECT_NE(run("gen-data --config " + q(path("missing.cfg")) + " --n 2 --out " + q(path("x.npy"))), 0);
}

TEST_F(Cli, TrainZeroEpochsGivesLoadableCheckpoint)
{
    const auto cfg = config("epochs_per_layer = 0\n");
    ASSERT_EQ(run("gen-data --config " + q(cfg) + " --n 4 --out " + q(path("d.npy"))), 0);
    ASSERT_EQ(run("train --quiet --data " + q(path("d.npy")) + " --config " + q(cfg) + " --out " + q(path("m.ckpt"))),
              0)
        << last_output_;
    const auto model = load_checkpoint(path("m.ckpt"));
    EXPECT_EQ(model.depth(), 1);
    EXPECT_EQ(model.layers[0].n_visible(), 256);
    EXPECT_TRUE(fs::exists(path("m.ckpt.events.jsonl")));
    EXPECT_EQ(slurp(path("m.ckpt.epochs.csv")), "epoch,layer,surrogate_loss,mean_free_energy,total_wd,n_hidden\n");
}

TEST_F(Cli, TrainAcceptsLearningRateGridAndIsReproducible)
{
    const auto data_cfg = config("");
    ASSERT_EQ(run("gen-data --config " + q(data_cfg) + " --n 6 --out " + q(path("d.npy"))), 0);
    for (const char* lr : {"0.010", "0.050", "0.001"}) {
        const auto cfg = config(std::string("epochs_per_layer = 1\nbatch_size = 3\nlr = ") + lr + "\n", "lr.cfg");
        EXPECT_EQ(run("train --quiet --data " + q(path("d.npy")) + " --config " + q(cfg) + " --out "
                      + q(path(std::string("m") + lr + ".ckpt"))),
                  0)
            << lr << ": " << last_output_;
    }
    const auto cfg = config("epochs_per_layer = 2\nbatch_size = 3\n", "rep.cfg");
    for (const char* name : {"r1.ckpt", "r2.ckpt"})
        ASSERT_EQ(run("train --quiet --data " + q(path("d.npy")) + " --config " + q(cfg) + " --out " + q(path(name))), 0);
    EXPECT_EQ(read_file_bytes(path("r1.ckpt")), read_file_bytes(path("r2.ckpt")));
    EXPECT_EQ(slurp(path("r1.ckpt.epochs.csv")), slurp(path("r2.ckpt.epochs.csv")));
    EXPECT_EQ(slurp(path("r1.ckpt.events.jsonl")), slurp(path("r2.ckpt.events.jsonl")));
}

TEST_F(Cli, TrainRejectsBadInputs)
{
    const auto cfg = config("epochs_per_layer = 0\n");
    EXPECT_EQ(run("train --data " + q(path("missing.npy")) + " --config " + q(cfg) + " --out " + q(path("m.ckpt"))), 2);
    ASSERT_EQ(run("gen-data --config " + q(cfg) + " --n 2 --out " + q(path("d.npy"))), 0);
    const auto bad = config("lr = -0.5\n", "bad.cfg");
    EXPECT_EQ(run("train --data " + q(path("d.npy")) + " --config " + q(bad) + " --out " + q(path("m.ckpt"))), 2);
    EXPECT_NE(last_output_.find("lr"), std::string::npos) << last_output_;
}

TEST_F(Cli, EvalZeroModelMatchesUniform)
{
    const auto cfg = config("epochs_per_layer = 0\ninit_std = 0\n");
    ASSERT_EQ(run("gen-data --config " + q(cfg) + " --n 5 --seed 99 --out " + q(path("test.npy"))), 0);
    ASSERT_EQ(run("train --quiet --data " + q(path("test.npy")) + " --config " + q(cfg) + " --out " + q(path("m.ckpt"))),
              0);
    ASSERT_EQ(run("eval --checkpoint " + q(path("m.ckpt")) + " --data " + q(path("test.npy")) + " --out "
                  + q(path("report"))),
              0)
        << last_output_;
    const auto csv = slurp(path("report.csv"));
    const double expected = 10 * 256 * std::numbers::ln2;
    EXPECT_NEAR(csv_value(csv, "adaptive-rnn-dbn,cross_entropy,"), expected, 1e-9);
    EXPECT_NEAR(csv_value(csv, "uniform-0.5,cross_entropy,"), expected, 1e-9);
    EXPECT_FALSE(std::isnan(csv_value(csv, "persistence,cross_entropy,")));
    for (int frame = 11; frame <= 20; ++frame)
        EXPECT_NE(csv.find("adaptive-rnn-dbn,accuracy_frame_" + std::to_string(frame) + ","), std::string::npos);
    EXPECT_EQ(csv.find("accuracy_frame_21"), std::string::npos);
    EXPECT_EQ(slurp(path("report.txt")), last_output_);
}

TEST_F(Cli, EvalRejectsMismatchedData)
{
    const auto cfg = config("epochs_per_layer = 0\n");
    const auto small = config("patch = 12\n", "small.cfg");
    ASSERT_EQ(run("gen-data --config " + q(cfg) + " --n 2 --out " + q(path("d.npy"))), 0);
    ASSERT_EQ(run("gen-data --config " + q(small) + " --n 2 --out " + q(path("s.npy"))), 0);
    ASSERT_EQ(run("train --quiet --data " + q(path("d.npy")) + " --config " + q(cfg) + " --out " + q(path("m.ckpt"))),
              0);
    EXPECT_EQ(run("eval --checkpoint " + q(path("m.ckpt")) + " --data " + q(path("s.npy")) + " --out " + q(path("r"))),
              2);
    EXPECT_EQ(run("eval --checkpoint " + q(path("m.ckpt")) + " --data " + q(path("d.npy")) + " --prime 15 --out "
                  + q(path("r"))),
              2);
}

TEST_F(Cli, GradCheck)
{
    ASSERT_EQ(run("grad-check"), 0) << last_output_;
    const auto first = last_output_;
    EXPECT_NE(first.find("grad-check passed"), std::string::npos);
    ASSERT_EQ(run("grad-check"), 0);
    EXPECT_EQ(last_output_, first);
    EXPECT_EQ(run("grad-check --corrupt-gradient"), 3);
    EXPECT_NE(last_output_.find("FAIL"), std::string::npos);
    EXPECT_EQ(run("grad-check --size huge"), 1);
}

TEST_F(Cli, InspectListsStructureAndEvents)
{
    const auto fresh = config("epochs_per_layer = 0\n");
    ASSERT_EQ(run("gen-data --config " + q(fresh) + " --n 4 --out " + q(path("d.npy"))), 0);
    ASSERT_EQ(run("train --quiet --data " + q(path("d.npy")) + " --config " + q(fresh) + " --out " + q(path("f.ckpt"))),
              0);
    ASSERT_EQ(run("inspect --checkpoint " + q(path("f.ckpt"))), 0);
    EXPECT_NE(last_output_.find("depth 1\n"), std::string::npos) << last_output_;
    EXPECT_NE(last_output_.find("adaptation events: 0\n"), std::string::npos);

    // Thresholds forced low enough that a neuron and a layer are generated.
    const auto forced = config("epochs_per_layer = 1\nbatch_size = 2\ninitial_hidden = 4\ntheta_gen = 1e-300\n"
                               "min_steps_before_gen = 1\ntheta_wd_layer = 1e-300\ntheta_energy_layer = 1e-300\n"
                               "max_layers = 2\n",
                               "forced.cfg");
    ASSERT_EQ(run("train --quiet --data " + q(path("d.npy")) + " --config " + q(forced) + " --out "
                  + q(path("e.ckpt"))),
              0)
        << last_output_;
    ASSERT_EQ(run("inspect --checkpoint " + q(path("e.ckpt"))), 0);
    EXPECT_NE(last_output_.find("depth 2\n"), std::string::npos) << last_output_;
    EXPECT_NE(last_output_.find("neuron_generation"), std::string::npos);
    EXPECT_NE(last_output_.find("layer_generation"), std::string::npos);
    const auto model = load_checkpoint(path("e.ckpt"));
    const auto& ev = model.adaptation_log.front();
    EXPECT_NE(last_output_.find("step " + std::string(8 - std::to_string(ev.step).size(), ' ') + std::to_string(ev.step)),
              std::string::npos);

    auto bytes = read_file_bytes(path("e.ckpt"));
    bytes.resize(bytes.size() / 2);
    write_file_bytes(path("broken.ckpt"), bytes);
    EXPECT_EQ(run("inspect --checkpoint " + q(path("broken.ckpt"))), 2);
    EXPECT_NE(last_output_.find("truncated"), std::string::npos) << last_output_;
}
