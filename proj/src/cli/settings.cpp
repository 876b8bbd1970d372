#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gatead/cli.hpp"
#include "gatead/errors.hpp"

namespace gatead::cli {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

double parse_double(std::string_view text, std::string_view origin) {
    const std::string s = trim(text);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw ConfigError(std::string(origin) + ": expected a number, got '" + s + "'");
    }
    return value;
}

std::uint64_t parse_count(std::string_view text, std::string_view origin) {
    const std::string s = trim(text);
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw ConfigError(std::string(origin) + ": expected a non-negative integer, got '" + s + "'");
    }
    return value;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

const std::vector<std::string>& setting_keys() {
    static const std::vector<std::string> keys = {
        "lr",        "max_epochs", "patience",   "min_delta",    "seed",      "layers",    "hidden_dim",
        "mask_ratio", "dropout",   "aggregation", "leaky_slope", "latent_dim", "gamma",     "g_hidden_dim",
        "objective", "top_ratio",  "pooling",    "sigma",        "out_rows",  "out_cols"};
    return keys;
}

void apply_setting(RunSettings& settings, std::string_view key_in, std::string_view value, std::string_view origin) {
    const std::string key = trim(key_in);
    auto& t = settings.train;
    auto& s = settings.score;
    auto fail = [&](const std::string& why) { throw ConfigError(std::string(origin) + ": " + why); };
    auto count = [&] { return parse_count(value, origin); };
    auto number = [&] { return parse_double(value, origin); };

    if (key == "lr") {
        t.lr = number();
        if (!(t.lr > 0.0)) fail("learning rate must be > 0");
    } else if (key == "max_epochs") {
        t.max_epochs = count();
        if (t.max_epochs < 1) fail("max_epochs must be >= 1");
    } else if (key == "patience") {
        t.patience = count();
        if (t.patience < 1) fail("patience must be >= 1");
    } else if (key == "min_delta") {
        t.min_delta = number();
        if (!(t.min_delta >= 0.0)) fail("min_delta must be >= 0");
    } else if (key == "seed") {
        t.seed = count();
    } else if (key == "layers") {
        t.encoder.num_layers = count();
        if (t.encoder.num_layers < 1) fail("layer count must be >= 1");
    } else if (key == "hidden_dim") {
        t.encoder.hidden_dim = count();
        if (t.encoder.hidden_dim < 1) fail("hidden_dim must be >= 1");
    } else if (key == "mask_ratio") {
        t.encoder.mask_ratio = number();
        if (!(t.encoder.mask_ratio >= 0.0 && t.encoder.mask_ratio < 1.0)) fail("mask ratio must be in [0, 1)");
    } else if (key == "dropout") {
        t.encoder.dropout_rate = number();
        if (!(t.encoder.dropout_rate >= 0.0 && t.encoder.dropout_rate < 1.0)) fail("dropout rate must be in [0, 1)");
    } else if (key == "aggregation") {
        const auto v = lower(trim(value));
        if (v == "gat") t.encoder.aggregation = Aggregation::GAT;
        else if (v == "gcn") t.encoder.aggregation = Aggregation::GCN;
        else fail("aggregation must be gat or gcn");
    } else if (key == "leaky_slope") {
        t.encoder.leaky_slope = number();
        if (!(t.encoder.leaky_slope > 0.0 && t.encoder.leaky_slope < 1.0)) fail("leaky slope must be in (0, 1)");
    } else if (key == "latent_dim") {
        t.align.latent_dim = count();
        if (t.align.latent_dim < 1) fail("latent_dim must be >= 1");
    } else if (key == "gamma") {
        t.align.gamma = number();
        if (!(t.align.gamma >= 1.0)) fail("gamma must be >= 1");
    } else if (key == "g_hidden_dim") {
        t.align.g_hidden_dim = count();
        if (t.align.g_hidden_dim < 1) fail("g_hidden_dim must be >= 1");
    } else if (key == "objective") {
        const auto v = lower(trim(value));
        if (v == "sce") t.align.objective = Objective::SCE;
        else if (v == "mse") t.align.objective = Objective::MSE;
        else if (v == "cosine") t.align.objective = Objective::COSINE;
        else fail("objective must be sce, mse or cosine");
    } else if (key == "top_ratio") {
        s.top_ratio = number();
        if (!(s.top_ratio > 0.0 && s.top_ratio <= 1.0)) fail("top ratio must be in (0, 1]");
    } else if (key == "pooling") {
        const auto v = lower(trim(value));
        if (v == "topk") s.pooling = Pooling::TopKMean;
        else if (v == "max") s.pooling = Pooling::Max;
        else fail("pooling must be topk or max");
    } else if (key == "sigma") {
        s.blur_sigma = number();
        if (!(s.blur_sigma >= 0.0)) fail("sigma must be >= 0");
    } else if (key == "out_rows") {
        s.output_rows = static_cast<std::uint32_t>(count());
    } else if (key == "out_cols") {
        s.output_cols = static_cast<std::uint32_t>(count());
    } else {
        fail("unknown setting '" + key + "'");
    }
}

std::string setting_value(const RunSettings& settings, std::string_view key) {
    const auto& t = settings.train;
    const auto& s = settings.score;
    if (key == "lr") return format_double(t.lr);
    if (key == "max_epochs") return std::to_string(t.max_epochs);
    if (key == "patience") return std::to_string(t.patience);
    if (key == "min_delta") return format_double(t.min_delta);
    if (key == "seed") return std::to_string(t.seed);
    if (key == "layers") return std::to_string(t.encoder.num_layers);
    if (key == "hidden_dim") return std::to_string(t.encoder.hidden_dim);
    if (key == "mask_ratio") return format_double(t.encoder.mask_ratio);
    if (key == "dropout") return format_double(t.encoder.dropout_rate);
    if (key == "aggregation") return t.encoder.aggregation == Aggregation::GCN ? "gcn" : "gat";
    if (key == "leaky_slope") return format_double(t.encoder.leaky_slope);
    if (key == "latent_dim") return std::to_string(t.align.latent_dim);
    if (key == "gamma") return format_double(t.align.gamma);
    if (key == "g_hidden_dim") return std::to_string(t.align.g_hidden_dim);
    if (key == "objective") {
        switch (t.align.objective) {
            case Objective::MSE: return "mse";
            case Objective::COSINE: return "cosine";
            default: return "sce";
        }
    }
    if (key == "top_ratio") return format_double(s.top_ratio);
    if (key == "pooling") return s.pooling == Pooling::Max ? "max" : "topk";
    if (key == "sigma") return format_double(s.blur_sigma);
    if (key == "out_rows") return std::to_string(s.output_rows);
    if (key == "out_cols") return std::to_string(s.output_cols);
    throw ConfigError("unknown setting '" + std::string(key) + "'");
}

std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        entries.emplace_back(trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)));
    }
    return entries;
}

std::vector<std::pair<std::string, std::string>> parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::vector<std::pair<std::string, std::vector<std::string>>> parse_grid_text(std::string_view text) {
    std::vector<std::pair<std::string, std::vector<std::string>>> grid;
    for (auto& [key, raw] : parse_config_text(text)) {
        std::vector<std::string> values;
        std::string_view rest = raw;
        while (true) {
            const auto comma = rest.find(',');
            values.push_back(trim(rest.substr(0, comma)));
            if (values.back().empty()) throw ConfigError("grid key " + key + ": empty value");
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (std::any_of(grid.begin(), grid.end(), [&](const auto& e) { return e.first == key; })) {
            throw ConfigError("grid key " + key + " appears twice");
        }
        grid.emplace_back(key, std::move(values));
    }
    return grid;
}

}  // namespace gatead::cli
