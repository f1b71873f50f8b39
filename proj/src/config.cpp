#include "nst/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "nst/errors.hpp"

namespace nst {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what) {
    throw ParseError(source + ":" + std::to_string(line) + ": " + what, line);
}

struct Field {
    std::function<void(RunConfig&, std::string_view, const std::string&, std::size_t)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T>
T parse_unsigned(std::string_view v, const std::string& source, std::size_t line) {
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        fail(source, line, "expected a non-negative integer, got '" + std::string(v) + "'");
    }
    return out;
}

double parse_double(std::string_view v, const std::string& source, std::size_t line) {
    const std::string s(v);
    char* end = nullptr;
    const double out = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || s.empty()) {
        fail(source, line, "expected a number, got '" + s + "'");
    }
    return out;
}

bool parse_bool(std::string_view v, const std::string& source, std::size_t line) {
    if (v == "true") return true;
    if (v == "false") return false;
    fail(source, line, "expected true or false, got '" + std::string(v) + "'");
}

std::vector<std::size_t> parse_size_list(std::string_view v, const std::string& source, std::size_t line) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    const std::string s(v);
    while (start <= s.size()) {
        std::size_t comma = s.find(',', start);
        if (comma == std::string::npos) comma = s.size();
        const std::string_view item = trim(std::string_view(s).substr(start, comma - start));
        if (item.empty()) fail(source, line, "empty entry in list '" + s + "'");
        out.push_back(parse_unsigned<std::size_t>(item, source, line));
        start = comma + 1;
        if (comma == s.size()) break;
    }
    return out;
}

std::string size_list_str(const std::vector<std::size_t>& xs) {
    std::ostringstream os;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) os << ',';
        os << xs[i];
    }
    return os.str();
}

// Field table; serialization order follows kOrder below.
const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table = [] {
        std::map<std::string, Field> f;
        auto str = [&f](const std::string& key, std::string RunConfig::* member) {
            f[key] = Field{[member](RunConfig& c, std::string_view v, const std::string&, std::size_t) {
                               c.*member = std::string(v);
                           },
                           [member](const RunConfig& c) { return c.*member; }};
        };
        auto u64 = [&f](const std::string& key, std::uint64_t RunConfig::* member) {
            f[key] = Field{[member](RunConfig& c, std::string_view v, const std::string& s, std::size_t l) {
                               c.*member = parse_unsigned<std::uint64_t>(v, s, l);
                           },
                           [member](const RunConfig& c) { return std::to_string(c.*member); }};
        };
        auto sz = [&f](const std::string& key, std::size_t RunConfig::* member) {
            f[key] = Field{[member](RunConfig& c, std::string_view v, const std::string& s, std::size_t l) {
                               c.*member = parse_unsigned<std::size_t>(v, s, l);
                           },
                           [member](const RunConfig& c) { return std::to_string(c.*member); }};
        };
        auto dbl = [&f](const std::string& key, double RunConfig::* member) {
            f[key] = Field{[member](RunConfig& c, std::string_view v, const std::string& s, std::size_t l) {
                               c.*member = parse_double(v, s, l);
                           },
                           [member](const RunConfig& c) { return format_double(c.*member); }};
        };
        auto bl = [&f](const std::string& key, bool RunConfig::* member) {
            f[key] = Field{[member](RunConfig& c, std::string_view v, const std::string& s, std::size_t l) {
                               c.*member = parse_bool(v, s, l);
                           },
                           [member](const RunConfig& c) { return c.*member ? "true" : "false"; }};
        };
        auto lst = [&f](const std::string& key, std::vector<std::size_t> RunConfig::* member) {
            f[key] = Field{[member](RunConfig& c, std::string_view v, const std::string& s, std::size_t l) {
                               c.*member = parse_size_list(v, s, l);
                           },
                           [member](const RunConfig& c) { return size_list_str(c.*member); }};
        };

        str("arch_scale", &RunConfig::arch_scale);
        str("precision", &RunConfig::precision);
        str("model_kind", &RunConfig::model_kind);
        u64("seed", &RunConfig::seed);
        dbl("lambda_s", &RunConfig::lambda_s);
        u64("budget", &RunConfig::budget);
        sz("batch_size", &RunConfig::batch_size);
        str("content_dir", &RunConfig::content_dir);
        str("style_dir", &RunConfig::style_dir);
        lst("transfer_channels", &RunConfig::transfer_channels);
        sz("residual_blocks", &RunConfig::residual_blocks);
        lst("pred_backbone_channels", &RunConfig::pred_backbone_channels);
        sz("pred_bottleneck_dim", &RunConfig::pred_bottleneck_dim);
        u64("loss_net_seed", &RunConfig::loss_net_seed);
        dbl("init_sigma", &RunConfig::init_sigma);
        dbl("adam_alpha", &RunConfig::adam_alpha);
        dbl("adam_beta1", &RunConfig::adam_beta1);
        dbl("adam_beta2", &RunConfig::adam_beta2);
        dbl("adam_eps", &RunConfig::adam_eps);
        bl("augment", &RunConfig::augment);
        dbl("aug_flip_prob", &RunConfig::aug_flip_prob);
        dbl("aug_rescale_min", &RunConfig::aug_rescale_min);
        dbl("aug_rescale_max", &RunConfig::aug_rescale_max);
        dbl("aug_hue_max_rad", &RunConfig::aug_hue_max_rad);
        dbl("aug_contrast_min", &RunConfig::aug_contrast_min);
        dbl("aug_contrast_max", &RunConfig::aug_contrast_max);
        dbl("pixel_lr", &RunConfig::pixel_lr);
        sz("optimize_steps", &RunConfig::optimize_steps);
        sz("study_photo_count", &RunConfig::study_photo_count);
        dbl("tsne_perplexity", &RunConfig::tsne_perplexity);
        sz("tsne_iters", &RunConfig::tsne_iters);
        u64("trace_every", &RunConfig::trace_every);
        str("style_corpus_hashes", &RunConfig::style_corpus_hashes);
        return f;
    }();
    return table;
}

const std::vector<std::string>& field_order() {
    static const std::vector<std::string> order = {
        "arch_scale", "precision", "model_kind", "seed", "lambda_s", "budget", "batch_size", "content_dir",
        "style_dir", "transfer_channels", "residual_blocks", "pred_backbone_channels", "pred_bottleneck_dim",
        "loss_net_seed", "init_sigma", "adam_alpha", "adam_beta1", "adam_beta2", "adam_eps", "augment",
        "aug_flip_prob", "aug_rescale_min", "aug_rescale_max", "aug_hue_max_rad", "aug_contrast_min",
        "aug_contrast_max", "pixel_lr", "optimize_steps", "study_photo_count", "tsne_perplexity", "tsne_iters",
        "trace_every", "style_corpus_hashes"};
    return order;
}

void apply_arch_preset(RunConfig& cfg, const std::string& scale, const std::string& source, std::size_t line) {
    if (scale == "desk") return;  // struct defaults
    if (scale == "full") {
        cfg.transfer_channels = {32, 64, 128};
        cfg.residual_blocks = 5;
        cfg.pred_backbone_channels = {48, 192, 768};
        cfg.pred_bottleneck_dim = 100;
        cfg.batch_size = 8;
        cfg.budget = 4000000;
        return;
    }
    fail(source, line, "unknown arch_scale '" + scale + "' (expected desk or full)");
}

}  // namespace

void RunConfig::validate() const {
    if (precision != "f64" && precision != "f32") {
        throw std::invalid_argument("precision must be f64 or f32, got '" + precision + "'");
    }
    if (model_kind != "joint" && model_kind != "adain") {
        throw std::invalid_argument("model_kind must be joint or adain, got '" + model_kind + "'");
    }
    if (budget < 1) throw std::invalid_argument("budget must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(lambda_s > 0.0)) throw std::invalid_argument("lambda_s must be positive");
    if (aug_rescale_min > aug_rescale_max || aug_rescale_min <= 0.0) {
        throw std::invalid_argument("invalid augmentation rescale range");
    }
    if (aug_contrast_min > aug_contrast_max) throw std::invalid_argument("invalid augmentation contrast range");
    if (aug_flip_prob < 0.0 || aug_flip_prob > 1.0) throw std::invalid_argument("aug_flip_prob must lie in [0,1]");
}

RunConfig parse_config(std::string_view text, const std::string& source_name) {
    struct Entry {
        std::string key;
        std::string value;
        std::size_t line;
    };
    std::vector<Entry> entries;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        ++line_no;
        std::string_view line = trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        if (line.empty() || line.front() == '#') {
            if (eol == text.size()) break;
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            fail(source_name, line_no, "expected 'key = value', got '" + std::string(line) + "'");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) fail(source_name, line_no, "empty key");
        if (!fields().contains(key)) fail(source_name, line_no, "unknown config key '" + key + "'");
        entries.push_back(Entry{key, value, line_no});
        if (eol == text.size()) break;
    }

    RunConfig cfg;
    // The scale preset applies first so explicit keys override it.
    for (const Entry& e : entries) {
        if (e.key == "arch_scale") {
            apply_arch_preset(cfg, e.value, source_name, e.line);
            cfg.arch_scale = e.value;
        }
    }
    for (const Entry& e : entries) {
        if (e.key == "arch_scale") continue;
        fields().at(e.key).set(cfg, e.value, source_name, e.line);
    }
    return cfg;
}

RunConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config file " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return parse_config(os.str(), path.string());
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream os;
    for (const std::string& key : field_order()) {
        os << key << " = " << fields().at(key).get(cfg) << '\n';
    }
    return os.str();
}

}  // namespace nst
