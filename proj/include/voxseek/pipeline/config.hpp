#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "voxseek/dqn/search.hpp"
#include "voxseek/error.hpp"

namespace voxseek::pipeline {

/// Pipeline configuration: class list, voxelization, both training loops and
/// the search. Loaded from a line-oriented `key = value` file; CLI flags
/// override file values.
struct Config {
    // classes; the implicit extra output class "other" has id classes.size()
    std::vector<std::string> classes{"ceiling", "floor", "wall", "table", "chair"};
    std::vector<std::string> easy_classes{"ceiling", "floor", "wall"};

    double unit_size = 0.05;
    int feature_dim = 16;
    long long unit_budget = voxel::kDefaultUnitBudget;

    dqn::SearchConfig search;
    float qnet_optimism = 1.0f; // initial value-stream bias

    int cnn_epochs = 200;
    float cnn_lr = 0.01f;
    int cnn_examples = 50; // mined windows per class per scene

    int rnn_epochs = 300;
    float rnn_lr = 0.02f;
    int rnn_chunk = 256;
    float dropout = 0.5f;
    int rnn_hidden = 128;

    // synthetic scenes
    double room_w = 4.0, room_d = 4.0, room_h = 2.5;
    double density = 400.0; // points per square meter
    double color_noise = 8.0;
    int objects_per_class = 1;
    double obj_min_size = 0.5, obj_max_size = 1.1; // meters per axis

    uint64_t seed = 0;

    int class_id(const std::string& name) const {
        for (size_t i = 0; i < classes.size(); ++i)
            if (classes[i] == name) return static_cast<int>(i);
        return -1;
    }

    int other_id() const { return static_cast<int>(classes.size()); }
    int num_output_classes() const { return static_cast<int>(classes.size()) + 1; }

    bool is_easy(const std::string& name) const {
        return std::find(easy_classes.begin(), easy_classes.end(), name) != easy_classes.end();
    }

    std::vector<std::string> hard_classes() const {
        std::vector<std::string> out;
        for (const auto& c : classes)
            if (!is_easy(c)) out.push_back(c);
        return out;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::string t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

template <class T>
T parse_num(const std::string& key, const std::string& value) {
    std::istringstream ss(value);
    T v{};
    if (!(ss >> v)) throw ConfigError("config: bad numeric value for '" + key + "': " + value);
    std::string rest;
    if (ss >> rest) throw ConfigError("config: trailing content for '" + key + "': " + value);
    return v;
}

} // namespace detail

inline void apply_config_entry(Config& cfg, const std::string& key, const std::string& value) {
    using detail::parse_num;
    if (key == "classes") cfg.classes = detail::split_csv(value);
    else if (key == "easy_classes") cfg.easy_classes = detail::split_csv(value);
    else if (key == "unit_size") cfg.unit_size = parse_num<double>(key, value);
    else if (key == "feature_dim") cfg.feature_dim = parse_num<int>(key, value);
    else if (key == "unit_budget") cfg.unit_budget = parse_num<long long>(key, value);
    else if (key == "mis") cfg.search.mis = parse_num<int>(key, value);
    else if (key == "mrs") cfg.search.mrs = parse_num<int>(key, value);
    else if (key == "mss") cfg.search.mss = parse_num<int>(key, value);
    else if (key == "k") cfg.search.k = parse_num<int>(key, value);
    else if (key == "lambda") cfg.search.lambda = parse_num<double>(key, value);
    else if (key == "eta") cfg.search.eta = parse_num<float>(key, value);
    else if (key == "mth") cfg.search.mth = parse_num<double>(key, value);
    else if (key == "patience") cfg.search.patience = parse_num<int>(key, value);
    else if (key == "winner_replay") cfg.search.winner_replay = parse_num<int>(key, value) != 0;
    else if (key == "qnet_optimism") cfg.qnet_optimism = parse_num<float>(key, value);
    else if (key == "cnn_epochs") cfg.cnn_epochs = parse_num<int>(key, value);
    else if (key == "cnn_lr") cfg.cnn_lr = parse_num<float>(key, value);
    else if (key == "cnn_examples") cfg.cnn_examples = parse_num<int>(key, value);
    else if (key == "rnn_epochs") cfg.rnn_epochs = parse_num<int>(key, value);
    else if (key == "rnn_lr") cfg.rnn_lr = parse_num<float>(key, value);
    else if (key == "rnn_chunk") cfg.rnn_chunk = parse_num<int>(key, value);
    else if (key == "rnn_hidden") cfg.rnn_hidden = parse_num<int>(key, value);
    else if (key == "dropout") cfg.dropout = parse_num<float>(key, value);
    else if (key == "room_w") cfg.room_w = parse_num<double>(key, value);
    else if (key == "room_d") cfg.room_d = parse_num<double>(key, value);
    else if (key == "room_h") cfg.room_h = parse_num<double>(key, value);
    else if (key == "density") cfg.density = parse_num<double>(key, value);
    else if (key == "color_noise") cfg.color_noise = parse_num<double>(key, value);
    else if (key == "objects_per_class") cfg.objects_per_class = parse_num<int>(key, value);
    else if (key == "obj_min_size") cfg.obj_min_size = parse_num<double>(key, value);
    else if (key == "obj_max_size") cfg.obj_max_size = parse_num<double>(key, value);
    else if (key == "seed") cfg.seed = parse_num<uint64_t>(key, value);
    else throw ConfigError("config: unknown key '" + key + "'");
}

inline void read_config(std::istream& in, Config& cfg, const std::string& source = "<config>") {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected `key = value`");
        std::string key = detail::trim(t.substr(0, eq));
        std::string value = detail::trim(t.substr(eq + 1));
        if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
        apply_config_entry(cfg, key, value);
    }
}

inline Config load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot open config file: " + path);
    Config cfg;
    read_config(f, cfg, path);
    return cfg;
}

} // namespace voxseek::pipeline
