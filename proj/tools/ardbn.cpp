// ardbn: data generation, training, evaluation, gradient checks and model
// inspection for the adaptive recurrent DBN.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include "ardbn/checkpoint.hpp"
#include "ardbn/config.hpp"
#include "ardbn/dataio.hpp"
#include "ardbn/eval.hpp"
#include "ardbn/gradcheck.hpp"
#include "ardbn/npy.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using namespace ardbn;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out)
        throw ConfigError("failed writing " + path.string());
}

std::filesystem::path with_suffix(const std::filesystem::path& p, const std::string& suffix)
{
    return std::filesystem::path(p.string() + suffix);
}

std::string shape_text(const NpyArray& a)
{
    std::ostringstream s;
    s << '(';
    for (std::size_t i = 0; i < a.shape.size(); ++i)
        s << (i ? ", " : "") << a.shape[i];
    s << ')';
    return s.str();
}

// --- gen-data ---------------------------------------------------------------

struct GenDataArgs {
    std::string config;
    std::string out;
    Index n = 0;
    std::optional<std::uint64_t> seed;
    std::string dtype = "u8";
};

int run_gen_data(const GenDataArgs& a)
{
    RunConfig cfg = load_config(a.config);
    if (a.seed)
        cfg.data.seed = *a.seed;
    cfg.data.validate();
    const SequenceBatch batch = generate_dataset(cfg.data, a.n);
    const auto array = npy_from_batch(batch, a.dtype == "f8" ? NpyDtype::F64 : NpyDtype::U8);
    write_file_bytes(a.out, serialize_npy(array));

    std::ostringstream manifest;
    manifest << "# dataset " << std::filesystem::path(a.out).filename().string() << ": n = " << batch.n
             << ", shape = " << shape_text(array) << ", dtype = " << (a.dtype == "f8" ? "<f8" : "|u1") << '\n'
             << to_config_text(cfg);
    write_text(with_suffix(a.out, ".manifest"), manifest.str());
    std::cout << "wrote " << a.out << ": " << batch.n << " sequences, T = " << batch.T << ", dim = " << batch.dim
              << '\n';
    return 0;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> events;
    std::optional<std::string> epochs_csv;
    bool quiet = false;
};

int run_train(const TrainArgs& a)
{
    RunConfig cfg = load_config(a.config);
    if (a.seed)
        cfg.train.seed = *a.seed;
    const SequenceBatch data = read_npy(a.data);

    std::ostringstream csv;
    csv << "epoch,layer,surrogate_loss,mean_free_energy,total_wd,n_hidden\n";
    auto observer = [&](const EpochRecord& r) {
        csv << r.epoch << ',' << r.layer << ',' << format_double(r.surrogate_loss) << ','
            << format_double(r.mean_free_energy) << ',' << format_double(r.total_wd) << ',' << r.n_hidden << '\n';
        if (!a.quiet) {
            std::printf("layer %lld epoch %lld: loss/frame %.6f, free energy %.4f, total WD %.3e, hidden %lld\n",
                        static_cast<long long>(r.layer), static_cast<long long>(r.epoch), r.surrogate_loss,
                        r.mean_free_energy, r.total_wd, static_cast<long long>(r.n_hidden));
            std::fflush(stdout);
        }
    };
    const DbnModel model = train_dbn(data, cfg.train, cfg.adapt, observer);

    save_checkpoint(model, a.out);
    write_text(a.events.value_or(a.out + ".events.jsonl"), events_to_jsonl(model.adaptation_log));
    write_text(a.epochs_csv.value_or(a.out + ".epochs.csv"), csv.str());
    std::cout << "wrote " << a.out << ": depth " << model.depth() << ", " << model.adaptation_log.size()
              << " adaptation events\n";
    return 0;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    Index prime = 10;
    Index pred = 10;
    std::string out;
    std::optional<std::uint64_t> seed;
    int k_gen = 1;
    double threshold = 0.5;
};

int run_eval(const EvalArgs& a)
{
    const DbnModel model = load_checkpoint(a.checkpoint);
    const SequenceBatch test = read_npy(a.data);
    if (model.depth() < 1 || test.dim != model.layers.front().n_visible())
        throw ConfigError("eval: data frames have " + std::to_string(test.dim) + " pixels but the model expects "
                          + std::to_string(model.depth() ? model.layers.front().n_visible() : 0));
    if (a.prime < 1 || a.pred < 1 || a.prime + a.pred > test.T)
        throw ConfigError("eval: --prime " + std::to_string(a.prime) + " plus --pred " + std::to_string(a.pred)
                          + " does not fit sequences of length " + std::to_string(test.T));
    Rng rng(a.seed.value_or(model.train.seed));
    const EvalReport report = evaluate(model, test, a.prime, a.pred, a.threshold, a.k_gen, rng);
    const std::string text = format_report_text(report, a.prime, test.dim);
    write_text(a.out + ".csv", format_report_csv(report, a.prime));
    write_text(a.out + ".txt", text);
    std::cout << text;
    return 0;
}

// --- grad-check -------------------------------------------------------------

struct GradCheckArgs {
    std::string size = "tiny";
    std::uint64_t seed = 1;
    bool corrupt = false;
};

constexpr double kRbmTolerance = 1e-6;
constexpr double kRnnTolerance = 1e-4;

void print_report(const char* title, const GradCheckReport& r, double tol)
{
    std::printf("%s (tolerance %.0e)\n", title, tol);
    for (const auto& g : r.groups)
        std::printf("  %-7s %4lld coords  max abs err %.3e  max rel err %.3e\n", g.group.c_str(),
                    static_cast<long long>(g.count), g.max_abs, g.max_rel);
    std::printf("  max rel err %.3e: %s\n", r.max_rel(), r.max_rel() < tol ? "ok" : "FAIL");
}

int run_grad_check(const GradCheckArgs& a)
{
    const bool small = a.size == "small";
    RbmTamper rbm_tamper;
    RnnTamper rnn_tamper;
    if (a.corrupt) {
        // Test hook: scale one coordinate so the check must fail.
        rbm_tamper = [](GradientSet<double>& g) { g.dW(0, 0) = 1.5 * g.dW(0, 0) + 1e-3; };
        rnn_tamper = [](RnnGradient<double>& g) { g.dW_uu(0, 0) = 1.5 * g.dW_uu(0, 0) + 1e-3; };
    }
    const auto rc = make_rbm_check_case(small, a.seed);
    const auto rr = check_rbm_gradient(rc.params, rc.data, kFiniteDifferenceStep, kRelativeErrorFloor, rbm_tamper);
    char title[128];
    std::snprintf(title, sizeof title, "rbm exact log-likelihood gradient, %lldx%lld, %lld vectors",
                  static_cast<long long>(rc.params.n_visible()), static_cast<long long>(rc.params.n_hidden()),
                  static_cast<long long>(rc.data.cols()));
    print_report(title, rr, kRbmTolerance);

    const auto nc = make_rnn_check_case(small, a.seed);
    const auto nr = check_rnn_gradient(nc.params, nc.frames, kFiniteDifferenceStep, kRelativeErrorFloor, rnn_tamper);
    std::snprintf(title, sizeof title, "rnn-rbm surrogate BPTT gradient, T=%zu, %lld/%lld/%lld units",
                  nc.frames.size(), static_cast<long long>(nc.params.n_visible()),
                  static_cast<long long>(nc.params.n_hidden()), static_cast<long long>(nc.params.n_context()));
    print_report(title, nr, kRnnTolerance);

    const bool ok = rr.max_rel() < kRbmTolerance && nr.max_rel() < kRnnTolerance;
    std::printf("grad-check %s\n", ok ? "passed" : "FAILED");
    return ok ? 0 : kExitNumeric;
}

// --- inspect ----------------------------------------------------------------

int run_inspect(const std::string& path)
{
    const DbnModel model = load_checkpoint(path);
    std::printf("checkpoint %s (format version %d)\n", path.c_str(), kCheckpointVersion);
    std::printf("seed %llu, lr %g, epochs per layer %lld\n", static_cast<unsigned long long>(model.train.seed),
                model.train.lr, static_cast<long long>(model.train.epochs_per_layer));
    std::printf("depth %lld\n", static_cast<long long>(model.depth()));
    for (Index l = 0; l < model.depth(); ++l) {
        const auto& layer = model.layers[static_cast<std::size_t>(l)];
        std::printf("  layer %lld: n_visible %lld, n_hidden %lld, n_context %lld, activation %s\n",
                    static_cast<long long>(l), static_cast<long long>(layer.n_visible()),
                    static_cast<long long>(layer.n_hidden()), static_cast<long long>(layer.n_context()),
                    to_string(layer.activation));
    }
    std::printf("adaptation events: %zu\n", model.adaptation_log.size());
    for (const auto& e : model.adaptation_log) {
        if (e.kind == EventKind::LayerGeneration)
            std::printf("  step %8llu  layer %lld  epoch %lld  %-19s total WD %.3e, mean free energy %.4f\n",
                        static_cast<unsigned long long>(e.step), static_cast<long long>(e.layer),
                        static_cast<long long>(e.epoch), to_string(e.kind), e.wd_c, e.energy);
        else
            std::printf("  step %8llu  layer %lld  epoch %lld  %-19s neuron %lld, wd_c %.3e, wd_W %.3e\n",
                        static_cast<unsigned long long>(e.step), static_cast<long long>(e.layer),
                        static_cast<long long>(e.epoch), to_string(e.kind), static_cast<long long>(e.neuron),
                        e.wd_c, e.wd_W);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Adaptive recurrent deep belief network: train, evaluate and inspect future-frame predictors"};
    app.require_subcommand(1);
    app.footer("Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.");

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a moving-sprite dataset as an NPY file");
    gen_cmd->add_option("--config", gen.config, "Config file (data geometry keys)")->required();
    gen_cmd->add_option("--out", gen.out, "Output .npy path; a <out>.manifest sidecar echoes the config")->required();
    gen_cmd->add_option("--n", gen.n, "Number of sequences")->required()->check(CLI::PositiveNumber);
    gen_cmd->add_option("--seed", gen.seed, "Override data_seed");
    gen_cmd->add_option("--dtype", gen.dtype, "Payload type: u8 (default) or f8")->check(CLI::IsMember({"u8", "f8"}));

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train an adaptive RNN-DBN");
    train_cmd->add_option("--data", train.data, "Training sequences (.npy)")->required();
    train_cmd->add_option("--config", train.config, "Config file (training and adaptation keys)")->required();
    train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
    train_cmd->add_option("--seed", train.seed, "Override the training seed");
    train_cmd->add_option("--events", train.events, "Adaptation event log, JSON lines (default <out>.events.jsonl)");
    train_cmd->add_option("--epochs-csv", train.epochs_csv, "Per-epoch CSV (default <out>.epochs.csv)");
    train_cmd->add_flag("--quiet", train.quiet, "Do not print per-epoch progress");
    train_cmd->footer("Per-epoch CSV columns: epoch, layer, surrogate_loss (mean-field reconstruction cross entropy\n"
                      "per frame on the monitoring subsample), mean_free_energy (per frame, time-dependent biases),\n"
                      "total_wd (sum of per-neuron bias and weight WD), n_hidden (after the epoch's structural events).\n"
                      "Event log fields: step, kind, layer, epoch, index, and wd_c/wd_W or total_wd/mean_free_energy.");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Prime/predict evaluation with baselines");
    eval_cmd->add_option("--checkpoint", ev.checkpoint, "Trained checkpoint")->required();
    eval_cmd->add_option("--data", ev.data, "Test sequences (.npy)")->required();
    eval_cmd->add_option("--prime", ev.prime, "Number of ground-truth frames fed to the model")->capture_default_str();
    eval_cmd->add_option("--pred", ev.pred, "Number of frames rolled out")->capture_default_str();
    eval_cmd->add_option("--out", ev.out, "Report prefix; writes <out>.csv and <out>.txt")->required();
    eval_cmd->add_option("--seed", ev.seed, "Sampling seed (default: the checkpoint's training seed)");
    eval_cmd->add_option("--k-gen", ev.k_gen, "Gibbs steps per predicted frame")->capture_default_str()->check(
        CLI::PositiveNumber);
    eval_cmd->add_option("--threshold", ev.threshold, "Binarization threshold for accuracy")->capture_default_str();
    eval_cmd->footer("Report CSV columns: configuration (adaptive-rnn-dbn, persistence, uniform-0.5), metric\n"
                     "(cross_entropy, squared_error, accuracy, accuracy_frame_<k>), value. Cross entropy and\n"
                     "squared error are per-sequence sums over predicted frames and pixels, averaged over sequences.");

    GradCheckArgs gc;
    auto* gc_cmd = app.add_subcommand("grad-check", "Finite-difference checks of the RBM and BPTT gradients");
    gc_cmd->add_option("--size", gc.size, "Problem size")->check(CLI::IsMember({"tiny", "small"}))->capture_default_str();
    gc_cmd->add_option("--seed", gc.seed, "Problem seed")->capture_default_str();
    gc_cmd->add_flag("--corrupt-gradient", gc.corrupt, "Test hook: perturb the analytic gradient")->group("");

    std::string inspect_path;
    auto* inspect_cmd = app.add_subcommand("inspect", "Summarize a checkpoint's structure and adaptation history");
    inspect_cmd->add_option("--checkpoint", inspect_path, "Checkpoint path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*gen_cmd)
            return run_gen_data(gen);
        if (*train_cmd)
            return run_train(train);
        if (*eval_cmd)
            return run_eval(ev);
        if (*gc_cmd)
            return run_grad_check(gc);
        if (*inspect_cmd)
            return run_inspect(inspect_path);
    } catch (const NumericFailure& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const CheckpointError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const NpyError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const ContractViolation& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
