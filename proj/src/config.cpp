#include "ardbn/config.hpp"

#include "ardbn/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace ardbn {

namespace {

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& value)
{
    if (value == "inf" || value == "infinity")
        return std::numeric_limits<double>::infinity();
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size())
        throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
    return v;
}

long long parse_integer(const std::string& key, const std::string& value)
{
    long long v = 0;
    const auto* begin = value.data();
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (value.empty() || ec != std::errc() || ptr != end)
        throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
    return v;
}

Index parse_count(const std::string& key, const std::string& value)
{
    const auto v = parse_integer(key, value);
    if (v < 0)
        throw ConfigError("config key '" + key + "': must be >= 0");
    return static_cast<Index>(v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value)
{
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (value.empty() || ec != std::errc() || ptr != value.data() + value.size())
        throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" + value + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& value)
{
    if (value == "true" || value == "1" || value == "yes")
        return true;
    if (value == "false" || value == "0" || value == "no")
        return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value)
{
    std::vector<std::string> out;
    std::stringstream ss(value);
    for (std::string item; std::getline(ss, item, ';');) {
        item = trim(item);
        if (!item.empty())
            out.push_back(item);
    }
    return out;
}

template <typename T>
std::string optional_text(const std::optional<T>& v)
{
    if (!v)
        return "auto";
    if constexpr (std::is_floating_point_v<T>)
        return format_double(*v);
    else
        return std::to_string(*v);
}

} // namespace

std::string format_double(double v)
{
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value)
{
    auto& d = cfg.data;
    auto& t = cfg.train;
    auto& a = cfg.adapt;
    const bool is_auto = value == "auto";
    if (key == "patch") d.patch = parse_count(key, value);
    else if (key == "n_frames") d.n_frames = parse_count(key, value);
    else if (key == "n_sprites") d.n_sprites = parse_count(key, value);
    else if (key == "speed_min") d.speed_min = parse_double(key, value);
    else if (key == "speed_max") d.speed_max = parse_double(key, value);
    else if (key == "bounce") d.bounce = parse_bool(key, value);
    else if (key == "data_seed") d.seed = parse_u64(key, value);
    else if (key == "glyph_files") cfg.glyph_files = split_list(value);
    else if (key == "lr") t.lr = parse_double(key, value);
    else if (key == "epochs_per_layer") t.epochs_per_layer = parse_count(key, value);
    else if (key == "cd_k") t.cd_k = static_cast<int>(parse_count(key, value));
    else if (key == "batch_size") t.batch_size = parse_count(key, value);
    else if (key == "seed") t.seed = parse_u64(key, value);
    else if (key == "clip_norm") t.clip_norm = parse_double(key, value);
    else if (key == "init_std") t.init_std = parse_double(key, value);
    else if (key == "initial_hidden") t.initial_hidden = is_auto ? std::nullopt : std::optional<Index>(parse_count(key, value));
    else if (key == "n_context") t.n_context = is_auto ? std::nullopt : std::optional<Index>(parse_count(key, value));
    else if (key == "activation") {
        if (value == "tanh") t.activation = Activation::Tanh;
        else if (value == "sigmoid") t.activation = Activation::Sigmoid;
        else throw ConfigError("config key 'activation': expected tanh or sigmoid, got '" + value + "'");
    }
    else if (key == "gamma") a.gamma = parse_double(key, value);
    else if (key == "theta_gen") a.theta_gen = parse_double(key, value);
    else if (key == "theta_ann") a.theta_ann = parse_double(key, value);
    else if (key == "theta_wd_layer") a.theta_wd_layer = is_auto ? std::nullopt : std::optional<double>(parse_double(key, value));
    else if (key == "theta_energy_layer") a.theta_energy_layer = is_auto ? std::nullopt : std::optional<double>(parse_double(key, value));
    else if (key == "min_steps_before_gen") a.min_steps_before_gen = is_auto ? std::nullopt : std::optional<std::uint64_t>(parse_u64(key, value));
    else if (key == "max_hidden") a.max_hidden = parse_count(key, value);
    else if (key == "max_layers") a.max_layers = parse_count(key, value);
    else if (key == "noise_scale") a.noise_scale = parse_double(key, value);
    else if (key == "n_prime") cfg.n_prime = parse_count(key, value);
    else if (key == "n_pred") cfg.n_pred = parse_count(key, value);
    else if (key == "k_gen") cfg.k_gen = static_cast<int>(parse_count(key, value));
    else if (key == "threshold") cfg.threshold = parse_double(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config(const std::string& text)
{
    RunConfig cfg;
    std::istringstream in(text);
    int line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        apply_config_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    RunConfig cfg = parse_config(ss.str());
    if (!cfg.glyph_files.empty()) {
        cfg.data.sprite_set.clear();
        for (const auto& f : cfg.glyph_files) {
            std::filesystem::path p(f);
            if (p.is_relative())
                p = path.parent_path() / p;
            cfg.data.sprite_set.push_back(read_pbm(p));
        }
    }
    return cfg;
}

std::string training_config_text(const TrainConfig& t, const AdaptationConfig& a)
{
    std::ostringstream out;
    out << "lr = " << format_double(t.lr) << '\n'
        << "epochs_per_layer = " << t.epochs_per_layer << '\n'
        << "cd_k = " << t.cd_k << '\n'
        << "batch_size = " << t.batch_size << '\n'
        << "seed = " << t.seed << '\n'
        << "clip_norm = " << format_double(t.clip_norm) << '\n'
        << "init_std = " << format_double(t.init_std) << '\n'
        << "initial_hidden = " << optional_text(t.initial_hidden) << '\n'
        << "n_context = " << optional_text(t.n_context) << '\n'
        << "activation = " << to_string(t.activation) << '\n'
        << "gamma = " << format_double(a.gamma) << '\n'
        << "theta_gen = " << format_double(a.theta_gen) << '\n'
        << "theta_ann = " << format_double(a.theta_ann) << '\n'
        << "theta_wd_layer = " << optional_text(a.theta_wd_layer) << '\n'
        << "theta_energy_layer = " << optional_text(a.theta_energy_layer) << '\n'
        << "min_steps_before_gen = " << optional_text(a.min_steps_before_gen) << '\n'
        << "max_hidden = " << a.max_hidden << '\n'
        << "max_layers = " << a.max_layers << '\n'
        << "noise_scale = " << format_double(a.noise_scale) << '\n';
    return out.str();
}

std::string to_config_text(const RunConfig& cfg)
{
    std::ostringstream out;
    const auto& d = cfg.data;
    out << "patch = " << d.patch << '\n'
        << "n_frames = " << d.n_frames << '\n'
        << "n_sprites = " << d.n_sprites << '\n'
        << "speed_min = " << format_double(d.speed_min) << '\n'
        << "speed_max = " << format_double(d.speed_max) << '\n'
        << "bounce = " << (d.bounce ? "true" : "false") << '\n'
        << "data_seed = " << d.seed << '\n';
    if (!cfg.glyph_files.empty()) {
        out << "glyph_files = ";
        for (std::size_t i = 0; i < cfg.glyph_files.size(); ++i)
            out << (i ? ";" : "") << cfg.glyph_files[i];
        out << '\n';
    }
    out << training_config_text(cfg.train, cfg.adapt)
        << "n_prime = " << cfg.n_prime << '\n'
        << "n_pred = " << cfg.n_pred << '\n'
        << "k_gen = " << cfg.k_gen << '\n'
        << "threshold = " << format_double(cfg.threshold) << '\n';
    return out.str();
}

} // namespace ardbn
