#include "ardbn/checkpoint.hpp"

#include "ardbn/config.hpp"
#include "ardbn/npy.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <sstream>

namespace ardbn {

namespace {

constexpr char kMagic[8] = {'A', 'R', 'D', 'B', 'N', 'C', 'K', 'P'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename Derived>
void put_block(std::vector<std::uint8_t>& out, const Eigen::DenseBase<Derived>& m)
{
    put_u64(out, static_cast<std::uint64_t>(m.size()));
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c)
            put_u64(out, std::bit_cast<std::uint64_t>(static_cast<double>(m(r, c))));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes)
        : bytes_(bytes)
    {
    }

    std::uint64_t u64()
    {
        need(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i)
            v = (v << 8) | bytes_[pos_ + static_cast<std::size_t>(i)];
        pos_ += 8;
        return v;
    }

    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i)
            v = (v << 8) | bytes_[pos_ + static_cast<std::size_t>(i)];
        pos_ += 4;
        return v;
    }

    std::string text(std::size_t n)
    {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    /// Fills a matrix from a row-major block, checking its element count.
    void block(Eigen::MatrixXd& m, Index rows, Index cols, const char* name)
    {
        const auto count = u64();
        if (count != static_cast<std::uint64_t>(rows * cols))
            throw CheckpointError(std::string("checkpoint: block ") + name + " has " + std::to_string(count)
                                  + " entries, expected " + std::to_string(rows * cols));
        m.resize(rows, cols);
        for (Index r = 0; r < rows; ++r)
            for (Index c = 0; c < cols; ++c)
                m(r, c) = std::bit_cast<double>(u64());
    }

    void block(Eigen::VectorXd& v, Index n, const char* name)
    {
        Eigen::MatrixXd m;
        block(m, n, 1, name);
        v = m.col(0);
    }

    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const
    {
        if (pos_ + n > bytes_.size())
            throw CheckpointError("checkpoint: truncated file");
    }

    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

EventKind parse_kind(const std::string& s)
{
    if (s == "neuron_generation") return EventKind::NeuronGeneration;
    if (s == "neuron_annihilation") return EventKind::NeuronAnnihilation;
    if (s == "layer_generation") return EventKind::LayerGeneration;
    throw CheckpointError("checkpoint: unknown event kind '" + s + "'");
}

double parse_exact(const std::string& s)
{
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size())
        throw CheckpointError("checkpoint: bad number '" + s + "'");
    return v;
}

} // namespace

std::vector<std::uint8_t> serialize_checkpoint(const DbnModel& model)
{
    std::ostringstream header;
    header << "format_version = " << kCheckpointVersion << '\n';
    header << training_config_text(model.train, model.adaptation);
    header << "depth = " << model.depth() << '\n';
    for (const auto& l : model.layers)
        header << "layer = " << l.n_visible() << ' ' << l.n_hidden() << ' ' << l.n_context() << ' '
               << to_string(l.activation) << '\n';
    header << "events = " << model.adaptation_log.size() << '\n';
    for (const auto& e : model.adaptation_log)
        header << "event = " << to_string(e.kind) << ' ' << e.layer << ' ' << e.step << ' ' << e.epoch << ' '
               << e.neuron << ' ' << format_double(e.wd_c) << ' ' << format_double(e.wd_W) << ' '
               << format_double(e.energy) << '\n';
    const std::string h = header.str();

    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    const auto len = static_cast<std::uint32_t>(h.size());
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
    out.insert(out.end(), h.begin(), h.end());
    for (const auto& l : model.layers) {
        put_block(out, l.rbm.b);
        put_block(out, l.rbm.c);
        put_block(out, l.rbm.W);
        put_block(out, l.u0);
        put_block(out, l.u_bias);
        put_block(out, l.W_uv);
        put_block(out, l.W_uh);
        put_block(out, l.W_vu);
        put_block(out, l.W_uu);
    }
    return out;
}

DbnModel deserialize_checkpoint(const std::vector<std::uint8_t>& bytes)
{
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0)
        throw CheckpointError("checkpoint: not a checkpoint file (bad magic)");
    Reader in(bytes);
    in.text(8);
    const std::string header = in.text(in.u32());

    RunConfig cfg;
    DbnModel model;
    struct Dims {
        Index nv, nh, nu;
        Activation act;
    };
    std::vector<Dims> dims;
    std::optional<int> version;
    std::optional<std::size_t> depth, n_events;
    std::istringstream lines(header);
    for (std::string line; std::getline(lines, line);) {
        const auto eq = line.find(" = ");
        if (eq == std::string::npos)
            throw CheckpointError("checkpoint: malformed header line '" + line + "'");
        const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
        std::istringstream vs(value);
        if (key == "format_version") {
            version = std::stoi(value);
            if (*version != kCheckpointVersion)
                throw CheckpointError("checkpoint: format version " + value + " is not supported (expected "
                                      + std::to_string(kCheckpointVersion) + ")");
        } else if (!version) {
            throw CheckpointError("checkpoint: header must start with format_version");
        } else if (key == "depth") {
            depth = std::stoul(value);
        } else if (key == "layer") {
            Dims d{};
            std::string act;
            if (!(vs >> d.nv >> d.nh >> d.nu >> act))
                throw CheckpointError("checkpoint: malformed layer line");
            d.act = act == "tanh" ? Activation::Tanh : Activation::Sigmoid;
            dims.push_back(d);
        } else if (key == "events") {
            n_events = std::stoul(value);
        } else if (key == "event") {
            AdaptationEvent e{};
            std::string kind, wd_c, wd_W, energy;
            if (!(vs >> kind >> e.layer >> e.step >> e.epoch >> e.neuron >> wd_c >> wd_W >> energy))
                throw CheckpointError("checkpoint: malformed event line");
            e.kind = parse_kind(kind);
            e.wd_c = parse_exact(wd_c);
            e.wd_W = parse_exact(wd_W);
            e.energy = parse_exact(energy);
            model.adaptation_log.push_back(e);
        } else {
            try {
                apply_config_key(cfg, key, value);
            } catch (const ConfigError& err) {
                throw CheckpointError(std::string("checkpoint: ") + err.what());
            }
        }
    }
    if (!version)
        throw CheckpointError("checkpoint: missing format_version");
    if (!depth || *depth != dims.size())
        throw CheckpointError("checkpoint: depth does not match layer lines");
    if (!n_events || *n_events != model.adaptation_log.size())
        throw CheckpointError("checkpoint: event count does not match");
    model.train = cfg.train;
    model.adaptation = cfg.adapt;

    for (const auto& d : dims) {
        RnnRbmParams<double> l(d.nv, d.nh, d.nu, d.act);
        in.block(l.rbm.b, d.nv, "b");
        in.block(l.rbm.c, d.nh, "c");
        in.block(l.rbm.W, d.nv, d.nh, "W");
        in.block(l.u0, d.nu, "u0");
        in.block(l.u_bias, d.nu, "u_bias");
        in.block(l.W_uv, d.nv, d.nu, "W_uv");
        in.block(l.W_uh, d.nh, d.nu, "W_uh");
        in.block(l.W_vu, d.nu, d.nv, "W_vu");
        in.block(l.W_uu, d.nu, d.nu, "W_uu");
        model.layers.push_back(std::move(l));
    }
    if (!in.at_end())
        throw CheckpointError("checkpoint: trailing bytes after the last layer");
    if (!model.layers.empty() && !model.dimension_chain_ok())
        throw CheckpointError("checkpoint: layer dimensions do not chain");
    return model;
}

void save_checkpoint(const DbnModel& model, const std::filesystem::path& path)
{
    write_file_bytes(path, serialize_checkpoint(model));
}

DbnModel load_checkpoint(const std::filesystem::path& path)
{
    std::vector<std::uint8_t> bytes;
    try {
        bytes = read_file_bytes(path);
    } catch (const NpyError& e) {
        throw CheckpointError(std::string("checkpoint: ") + e.what());
    }
    return deserialize_checkpoint(bytes);
}

std::string events_to_jsonl(const std::vector<AdaptationEvent>& events)
{
    std::string out;
    for (const auto& e : events) {
        nlohmann::ordered_json j;
        j["step"] = e.step;
        j["kind"] = to_string(e.kind);
        j["layer"] = e.layer;
        j["epoch"] = e.epoch;
        j["index"] = e.neuron;
        if (e.kind == EventKind::LayerGeneration) {
            j["total_wd"] = e.wd_c;
            j["mean_free_energy"] = e.energy;
        } else {
            j["wd_c"] = e.wd_c;
            j["wd_W"] = e.wd_W;
        }
        out += j.dump();
        out += '\n';
    }
    return out;
}

} // namespace ardbn
