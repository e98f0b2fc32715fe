#include "onenet/config.hpp"

#include <fstream>
#include <sstream>

namespace onenet {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::onenet_e: return "onenet_e";
        case Variant::onenet_ed: return "onenet_ed";
        case Variant::unet_baseline: return "unet_baseline";
    }
    throw ConfigError("unknown variant enum value");
}

Variant parse_variant(const std::string& name) {
    if (name == "onenet_e") return Variant::onenet_e;
    if (name == "onenet_ed") return Variant::onenet_ed;
    if (name == "unet_baseline") return Variant::unet_baseline;
    throw ConfigError("unknown variant '" + name +
                      "' (expected onenet_e, onenet_ed, or unet_baseline)");
}

void ModelConfig::validate() const {
    if (layers < 1) throw ConfigError("layers must be >= 1");
    if (layers > 8) throw ConfigError("layers must be <= 8");
    if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
    if (scale < 1) throw ConfigError("scale must be >= 1");
    if (scale != 2 && variant != Variant::unet_baseline)
        throw ConfigError("onenet variants are defined for scale 2");
    if (spatial_kernel < 1 || spatial_kernel % 2 == 0)
        throw ConfigError("spatial_kernel must be odd and positive");
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (input_channels < 1) throw ConfigError("input_channels must be >= 1");
    if (variant != Variant::unet_baseline && base_channels % 2 != 0)
        throw ConfigError("onenet variants need an even base_channels");
}

i64 ModelConfig::required_divisor() const {
    i64 d = 1;
    const i64 downs = variant == Variant::unet_baseline ? layers : layers + 1;
    for (i64 i = 0; i < downs; ++i) d *= 2;
    return d;
}

i64 ModelConfig::bottleneck_channels() const {
    i64 c = base_channels;
    for (i64 i = 0; i < layers; ++i) c *= 2;
    return c;
}

std::string ModelConfig::canonical_text() const {
    std::ostringstream os;
    os << "variant=" << variant_name(variant) << '\n'
       << "layers=" << layers << '\n'
       << "base_channels=" << base_channels << '\n'
       << "scale=" << scale << '\n'
       << "use_spatial=" << (use_spatial ? 1 : 0) << '\n'
       << "spatial_kernel=" << spatial_kernel << '\n'
       << "num_classes=" << num_classes << '\n'
       << "input_channels=" << input_channels << '\n';
    return os.str();
}

namespace {

i64 parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return static_cast<i64>(v);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected integer, got '" + value + "'");
    }
}

double parse_float(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "on") return true;
    if (value == "0" || value == "false" || value == "off") return false;
    throw ConfigError("key '" + key + "': expected boolean, got '" + value + "'");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

bool is_model_config_key(const std::string& key) {
    return key == "variant" || key == "layers" || key == "base_channels" || key == "scale" ||
           key == "use_spatial" || key == "spatial_kernel" || key == "num_classes" ||
           key == "input_channels";
}

void apply_model_override(ModelConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "variant")
        cfg.variant = parse_variant(value);
    else if (key == "layers")
        cfg.layers = parse_int(key, value);
    else if (key == "base_channels")
        cfg.base_channels = parse_int(key, value);
    else if (key == "scale")
        cfg.scale = parse_int(key, value);
    else if (key == "use_spatial")
        cfg.use_spatial = parse_bool(key, value);
    else if (key == "spatial_kernel")
        cfg.spatial_kernel = parse_int(key, value);
    else if (key == "num_classes")
        cfg.num_classes = parse_int(key, value);
    else if (key == "input_channels")
        cfg.input_channels = parse_int(key, value);
    else
        throw ConfigError("unknown model config key '" + key + "'");
}

void TrainSettings::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (lr <= 0) throw ConfigError("learning_rate must be positive");
    if (lr_decay <= 0 || lr_decay > 1) throw ConfigError("lr_decay must be in (0, 1]");
    if (lr_decay_every < 1) throw ConfigError("lr_decay_every must be >= 1");
    if (lr_decay_start < 0) throw ConfigError("lr_decay_start must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (background_weight <= 0) throw ConfigError("background_weight must be positive");
    if (samples < 1) throw ConfigError("samples must be >= 1");
    if (image_size < 4) throw ConfigError("image_size must be >= 4");
}

std::string TrainSettings::canonical_text() const {
    std::ostringstream os;
    os << "epochs=" << epochs << '\n'
       << "learning_rate=" << lr << '\n'
       << "lr_decay=" << lr_decay << '\n'
       << "lr_decay_every=" << lr_decay_every << '\n'
       << "lr_decay_start=" << lr_decay_start << '\n'
       << "batch_size=" << batch_size << '\n'
       << "background_weight=" << background_weight << '\n'
       << "seed=" << seed << '\n'
       << "samples=" << samples << '\n'
       << "image_size=" << image_size << '\n';
    return os.str();
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (is_model_config_key(key)) {
        apply_model_override(cfg.model, key, value);
        return;
    }
    auto& t = cfg.train;
    if (key == "epochs")
        t.epochs = parse_int(key, value);
    else if (key == "learning_rate")
        t.lr = parse_float(key, value);
    else if (key == "lr_decay")
        t.lr_decay = parse_float(key, value);
    else if (key == "lr_decay_every")
        t.lr_decay_every = parse_int(key, value);
    else if (key == "lr_decay_start")
        t.lr_decay_start = parse_int(key, value);
    else if (key == "batch_size")
        t.batch_size = parse_int(key, value);
    else if (key == "background_weight")
        t.background_weight = parse_float(key, value);
    else if (key == "seed")
        t.seed = static_cast<u64>(parse_int(key, value));
    else if (key == "samples")
        t.samples = parse_int(key, value);
    else if (key == "image_size")
        t.image_size = parse_int(key, value);
    else
        throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key=value, got '" +
                              line + "'");
        apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

ModelConfig parse_model_config(const std::string& text) {
    return parse_run_config(text).model;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return parse_run_config(os.str());
}

}  // namespace onenet
