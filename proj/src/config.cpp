#include "skelact/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace skelact {

namespace {

// shortest representation that parses back to the same bits
std::string fmt_double(double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::stod(buf) == v) break;
    }
    return buf;
}

std::string fmt_ints(const std::vector<int64_t>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    return s;
}

std::vector<int64_t> parse_ints(const std::string& s, const std::string& key) {
    std::vector<int64_t> out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        if (tok.empty()) continue;
        try {
            out.push_back(std::stoll(tok));
        } catch (const std::exception&) {
            throw std::runtime_error("config key '" + key +
                                     "' has a non-integer entry '" + tok + "'");
        }
    }
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string serialize_config(const ModelConfig& cfg) {
    std::ostringstream os;
    os << "# model\n";
    os << "num_classes = " << cfg.num_classes << "\n";
    os << "frames = " << cfg.frames << "\n";
    os << "joints = " << cfg.joints << "\n";
    os << "entities = " << cfg.entities << "\n";
    os << "window = " << cfg.window.t_w << "," << cfg.window.v_w << ","
       << cfg.window.m_w << "\n";
    os << "tf_blocks = " << cfg.tf_blocks << "\n";
    os << "tf_heads = " << cfg.tf_heads << "\n";
    os << "tf_dim = " << cfg.tf_dim << "\n";
    os << "tf_qkv = " << cfg.tf_qkv << "\n";
    os << "cnn_point = " << cfg.cnn_point << "\n";
    os << "cnn_post1 = " << cfg.cnn_post1 << "\n";
    os << "cnn_post2 = " << cfg.cnn_post2 << "\n";
    os << "cnn_fusion = " << cfg.cnn_fusion << "\n";
    os << "cnn_hidden = " << cfg.cnn_hidden << "\n";
    os << "fusion_weight = " << fmt_double(cfg.fusion_weight) << "\n";
    os << "fusion_space = " << cfg.fusion_space << "\n";
    os << "normalize = " << (cfg.normalize ? 1 : 0) << "\n";
    os << "permute_mode = " << cfg.permute_mode << "\n";
    os << "# training\n";
    os << "lr = " << fmt_double(cfg.train.lr) << "\n";
    os << "lr_decay = " << fmt_double(cfg.train.lr_decay) << "\n";
    os << "milestones = " << fmt_ints(cfg.train.milestones) << "\n";
    os << "momentum = " << fmt_double(cfg.train.momentum) << "\n";
    os << "nesterov = " << (cfg.train.nesterov ? 1 : 0) << "\n";
    os << "batch = " << cfg.train.batch << "\n";
    os << "epochs = " << cfg.train.epochs << "\n";
    os << "label_smoothing = " << fmt_double(cfg.train.label_smoothing)
       << "\n";
    os << "temperature = " << fmt_double(cfg.train.temperature) << "\n";
    os << "seed = " << cfg.train.seed << "\n";
    os << "# run\n";
    os << "data_dir = " << cfg.data_dir << "\n";
    os << "out_dir = " << cfg.out_dir << "\n";
    os << "per_class = " << cfg.per_class << "\n";
    os << "noise = " << fmt_double(cfg.noise) << "\n";
    os << "sweep_fusion = " << (cfg.sweep_fusion ? 1 : 0) << "\n";
    os << "resume = " << cfg.resume << "\n";
    os << "inject_fault = " << cfg.inject_fault << "\n";
    return os.str();
}

ModelConfig parse_config_text(const std::string& text) {
    ModelConfig cfg;
    std::map<std::string, std::function<void(const std::string&)>> setters;

    auto set_i64 = [](int64_t& field) {
        return [&field](const std::string& v) { field = std::stoll(v); };
    };
    auto set_dbl = [](double& field) {
        return [&field](const std::string& v) { field = std::stod(v); };
    };
    auto set_bool = [](bool& field) {
        return [&field](const std::string& v) {
            if (v == "1" || v == "true")
                field = true;
            else if (v == "0" || v == "false")
                field = false;
            else
                throw std::runtime_error("expected 0/1, got '" + v + "'");
        };
    };
    auto set_str = [](std::string& field) {
        return [&field](const std::string& v) { field = v; };
    };

    setters["num_classes"] = set_i64(cfg.num_classes);
    setters["frames"] = set_i64(cfg.frames);
    setters["joints"] = set_i64(cfg.joints);
    setters["entities"] = set_i64(cfg.entities);
    setters["window"] = [&cfg](const std::string& v) {
        auto dims = parse_ints(v, "window");
        check(dims.size() == 3, "window must be three comma-separated sizes");
        cfg.window.t_w = dims[0];
        cfg.window.v_w = dims[1];
        cfg.window.m_w = dims[2];
    };
    setters["tf_blocks"] = set_i64(cfg.tf_blocks);
    setters["tf_heads"] = set_i64(cfg.tf_heads);
    setters["tf_dim"] = set_i64(cfg.tf_dim);
    setters["tf_qkv"] = set_i64(cfg.tf_qkv);
    setters["cnn_point"] = set_i64(cfg.cnn_point);
    setters["cnn_post1"] = set_i64(cfg.cnn_post1);
    setters["cnn_post2"] = set_i64(cfg.cnn_post2);
    setters["cnn_fusion"] = set_i64(cfg.cnn_fusion);
    setters["cnn_hidden"] = set_i64(cfg.cnn_hidden);
    setters["fusion_weight"] = set_dbl(cfg.fusion_weight);
    setters["fusion_space"] = set_str(cfg.fusion_space);
    setters["normalize"] = set_bool(cfg.normalize);
    setters["permute_mode"] = set_str(cfg.permute_mode);
    setters["lr"] = set_dbl(cfg.train.lr);
    setters["lr_decay"] = set_dbl(cfg.train.lr_decay);
    setters["milestones"] = [&cfg](const std::string& v) {
        cfg.train.milestones = parse_ints(v, "milestones");
    };
    setters["momentum"] = set_dbl(cfg.train.momentum);
    setters["nesterov"] = set_bool(cfg.train.nesterov);
    setters["batch"] = set_i64(cfg.train.batch);
    setters["epochs"] = set_i64(cfg.train.epochs);
    setters["label_smoothing"] = set_dbl(cfg.train.label_smoothing);
    setters["temperature"] = set_dbl(cfg.train.temperature);
    setters["seed"] = [&cfg](const std::string& v) {
        cfg.train.seed = std::stoull(v);
    };
    setters["data_dir"] = set_str(cfg.data_dir);
    setters["out_dir"] = set_str(cfg.out_dir);
    setters["per_class"] = set_i64(cfg.per_class);
    setters["noise"] = set_dbl(cfg.noise);
    setters["sweep_fusion"] = set_bool(cfg.sweep_fusion);
    setters["resume"] = set_str(cfg.resume);
    setters["inject_fault"] = set_str(cfg.inject_fault);

    std::istringstream is(text);
    std::string line;
    int64_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     " is not 'key = value': " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        auto it = setters.find(key);
        if (it == setters.end())
            throw std::runtime_error("unknown config key '" + key +
                                     "' at line " + std::to_string(line_no));
        try {
            it->second(val);
        } catch (const std::exception& e) {
            throw std::runtime_error("config key '" + key + "' at line " +
                                     std::to_string(line_no) + ": " +
                                     e.what());
        }
    }
    return cfg;
}

ModelConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return parse_config_text(os.str());
}

}  // namespace skelact
