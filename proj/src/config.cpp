#include "q3r/config.hpp"

#include "q3r/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace q3r {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos)
        return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream stream(s);
    while (std::getline(stream, item, sep))
        out.push_back(trim(item));
    if (!s.empty() && s.back() == sep)
        out.push_back("");
    return out;
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double out = std::stod(value, &used);
        if (used != value.size())
            throw std::invalid_argument(value);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + key + ": " + value);
    }
}

long to_long(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long out = std::stol(value, &used);
        if (used != value.size())
            throw std::invalid_argument(value);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("bad integer value for " + key + ": " + value);
    }
}

std::uint64_t to_seed(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const unsigned long long out = std::stoull(value, &used);
        if (used != value.size())
            throw std::invalid_argument(value);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("bad integer value for " + key + ": " + value);
    }
}

std::vector<LayerSpec> parse_layers(const std::string& value) {
    std::vector<LayerSpec> out;
    for (const std::string& part : split(value, ',')) {
        if (part.empty())
            throw ConfigError("empty layer entry");
        const std::vector<std::string> bits = split(part, ':');
        const std::string& kind = bits[0];
        if (kind == "dense" && bits.size() == 3) {
            out.push_back(LayerSpec::dense(to_long("layers", bits[1]),
                                           to_long("layers", bits[2])));
        } else if (kind == "factorized" && bits.size() == 4) {
            out.push_back(LayerSpec::factorized(to_long("layers", bits[1]),
                                                to_long("layers", bits[2]),
                                                to_long("layers", bits[3])));
        } else if (kind == "relu" && bits.size() == 1) {
            out.push_back(LayerSpec::relu());
        } else if (kind == "attn" && bits.size() == 2) {
            out.push_back(LayerSpec::attention(to_long("layers", bits[1])));
        } else {
            throw ConfigError("bad layer entry: " + part);
        }
    }
    if (out.empty())
        throw ConfigError("net needs at least one layer");
    return out;
}

RankTarget parse_target(const std::string& value) {
    const std::vector<std::string> bits = split(value, ':');
    if (bits.size() == 2 && bits[0] == "rank")
        return RankTarget::absolute(to_long("target_rank", bits[1]));
    if (bits.size() == 2 && bits[0] == "retention")
        return RankTarget::retention(to_double("target_rank", bits[1]));
    throw ConfigError("bad target_rank (want rank:<r> or retention:<p>): " + value);
}

std::vector<double> parse_retentions(const std::string& value) {
    std::vector<double> out;
    for (const std::string& part : split(value, ',')) {
        const double p = to_double("retentions", part);
        if (p <= 0.0 || p > 1.0)
            throw ConfigError("retention must be in (0, 1]");
        out.push_back(p);
    }
    return out;
}

TruncationTargets parse_trunc_targets(const std::string& value) {
    if (value == "dense")
        return TruncationTargets::Dense;
    if (value == "attention")
        return TruncationTargets::Attention;
    if (value == "dense_attention")
        return TruncationTargets::DenseAndAttention;
    throw ConfigError("bad truncation targets: " + value);
}

} // namespace

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

ExperimentConfig parse_config_text(const std::string& text) {
    struct Entry {
        std::string key, value;
        int line;
    };
    std::vector<Entry> entries;
    std::string section;
    std::istringstream stream(text);
    std::string line;
    int lineno = 0;
    while (std::getline(stream, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#')
            continue;
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty())
                throw ConfigError("empty section name at line " + std::to_string(lineno));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key = value at line " + std::to_string(lineno));
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError("empty key at line " + std::to_string(lineno));
        if (section.empty())
            throw ConfigError("key outside any section at line " + std::to_string(lineno));
        entries.push_back({section + "." + key, value, lineno});
    }

    ExperimentConfig cfg;
    cfg.retentions = {0.05, 0.10, 0.15, 0.20, 0.30, 0.40};
    bool seed_seen = false;

    // processed in file order, so later occurrences of a key win
    for (const auto& [key, value, entry_line] : entries) {
        if (key == "experiment.task") {
            if (value == "teacher_classify")
                cfg.task = TaskKind::TeacherClassify;
            else if (value == "matrix_recover")
                cfg.task = TaskKind::MatrixRecover;
            else if (value == "attention_toy")
                cfg.task = TaskKind::AttentionToy;
            else
                throw ConfigError("unknown task: " + value);
        } else if (key == "experiment.seed") {
            cfg.seed = to_seed(key, value);
            seed_seen = true;
        } else if (key == "experiment.output_dir") {
            cfg.output_dir = value;
        } else if (key == "data.input_dim") {
            cfg.data.input_dim = to_long(key, value);
        } else if (key == "data.hidden_dim") {
            cfg.data.hidden_dim = to_long(key, value);
        } else if (key == "data.num_classes") {
            cfg.data.num_classes = to_long(key, value);
        } else if (key == "data.teacher_rank") {
            cfg.data.teacher_rank = to_long(key, value);
        } else if (key == "data.samples") {
            cfg.data.samples = to_long(key, value);
        } else if (key == "data.seq_len") {
            cfg.data.seq_len = to_long(key, value);
        } else if (key == "data.noise_rate") {
            cfg.data.noise_rate = to_double(key, value);
        } else if (key == "net.layers") {
            cfg.net = parse_layers(value);
        } else if (key == "optimizer.kind") {
            if (value == "adamq3r")
                cfg.optimizer = OptimizerKind::AdamQ3R;
            else if (value == "adam")
                cfg.optimizer = OptimizerKind::Adam;
            else if (value == "adam_q3r_in_loss")
                cfg.optimizer = OptimizerKind::AdamQ3RInLoss;
            else
                throw ConfigError("unknown optimizer kind: " + value);
        } else if (key == "optimizer.alpha") {
            cfg.opt.alpha = to_double(key, value);
        } else if (key == "optimizer.beta1") {
            cfg.opt.beta1 = to_double(key, value);
        } else if (key == "optimizer.beta2") {
            cfg.opt.beta2 = to_double(key, value);
        } else if (key == "optimizer.delta") {
            cfg.opt.delta = to_double(key, value);
        } else if (key == "optimizer.eta") {
            cfg.opt.eta = to_double(key, value);
        } else if (key == "optimizer.lambda") {
            cfg.opt.lambda = to_double(key, value);
        } else if (key == "optimizer.period") {
            cfg.opt.period = to_long(key, value);
        } else if (key == "optimizer.eps_floor") {
            cfg.opt.eps_floor = to_double(key, value);
        } else if (key == "optimizer.clip_norm") {
            cfg.opt.clip_norm = to_double(key, value);
        } else if (key == "optimizer.target_rank") {
            cfg.target = parse_target(value);
        } else if (key == "q3r.apply_to") {
            if (value == "none")
                cfg.apply_to = ApplyTo::None;
            else if (value == "dense")
                cfg.apply_to = ApplyTo::Dense;
            else if (value == "attention")
                cfg.apply_to = ApplyTo::Attention;
            else if (value == "dense_attention")
                cfg.apply_to = ApplyTo::DenseAndAttention;
            else
                throw ConfigError("bad apply_to: " + value);
        } else if (key == "train.epochs") {
            cfg.epochs = static_cast<int>(to_long(key, value));
        } else if (key == "train.batch_size") {
            cfg.batch_size = to_long(key, value);
        } else if (key == "truncate.retentions") {
            cfg.retentions = parse_retentions(value);
        } else if (key == "truncate.targets") {
            cfg.trunc_targets = parse_trunc_targets(value);
        } else if (key == "recover.d1") {
            cfg.recover.d1 = to_long(key, value);
        } else if (key == "recover.d2") {
            cfg.recover.d2 = to_long(key, value);
        } else if (key == "recover.rank") {
            cfg.recover.rank = to_long(key, value);
        } else if (key == "recover.oversampling") {
            cfg.recover.oversampling = to_double(key, value);
        } else if (key == "recover.iters") {
            cfg.recover.iters = to_long(key, value);
        } else {
            throw ConfigError("unknown config key at line " + std::to_string(entry_line) +
                              ": " + key);
        }
    }

    if (!seed_seen)
        throw ConfigError("experiment.seed is required");
    if (cfg.task != TaskKind::MatrixRecover && cfg.net.empty())
        throw ConfigError("net.layers is required");
    if (cfg.epochs < 1)
        throw ConfigError("epochs must be positive");
    if (cfg.batch_size < 1)
        throw ConfigError("batch size must be positive");
    cfg.opt.validate();
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    return parse_config_text(read_text_file(path));
}

std::vector<SweepCell> expand_grid(const std::string& grid) {
    struct Axis {
        std::string key;
        std::vector<std::string> values;
    };
    std::vector<Axis> axes;
    for (const std::string& part : split(grid, ';')) {
        if (part.empty())
            continue;
        const auto eq = part.find('=');
        if (eq == std::string::npos)
            throw ConfigError("bad grid axis (want key=v1,v2,...): " + part);
        Axis axis;
        axis.key = trim(part.substr(0, eq));
        if (axis.key != "lambda" && axis.key != "period")
            throw ConfigError("unsupported grid axis: " + axis.key);
        for (const std::string& v : split(part.substr(eq + 1), ',')) {
            if (v.empty())
                throw ConfigError("empty grid value in axis " + axis.key);
            axis.values.push_back(v);
        }
        axes.push_back(std::move(axis));
    }
    if (axes.empty())
        throw ConfigError("empty sweep grid");

    std::vector<SweepCell> cells;
    std::vector<std::size_t> idx(axes.size(), 0);
    while (true) {
        SweepCell cell;
        std::ostringstream label, overrides;
        overrides << "\n[optimizer]\n";
        cell.lambda = -1.0;
        cell.period = -1;
        for (std::size_t a = 0; a < axes.size(); ++a) {
            const std::string& value = axes[a].values[idx[a]];
            if (a > 0)
                label << " ";
            label << axes[a].key << "=" << value;
            overrides << axes[a].key << " = " << value << "\n";
            if (axes[a].key == "lambda")
                cell.lambda = to_double("lambda", value);
            else
                cell.period = to_long("period", value);
        }
        cell.label = label.str();
        cell.overrides = overrides.str();
        cells.push_back(std::move(cell));

        std::size_t a = 0;
        for (; a < axes.size(); ++a) {
            if (++idx[a] < axes[a].values.size())
                break;
            idx[a] = 0;
        }
        if (a == axes.size())
            break;
    }
    return cells;
}

} // namespace q3r
