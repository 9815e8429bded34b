#pragma once

#include <functional>

#include "stsg/losses.hpp"
#include "stsg/data.hpp"
#include "stsg/model.hpp"
#include "stsg/metrics.hpp"

namespace stsg {

// Flat key=value run configuration: model, loss, synthetic-data and
// optimizer settings. Unknown keys are rejected.
struct RunConfig {
    uint64_t seed = 1;

    ModelConfig model;
    LossWeights loss;
    SyntheticConfig synth;

    double lr = 1e-3;
    double weight_decay = 0.0;
    int steps = 500;

    double iou_threshold = 0.5;
    bool constraint_per_group = false;

    // keeps dependent fields consistent before use
    void finalize() {
        synth.seed = seed;
        model.feature_channels = synth.objects;
        model.object_classes = synth.objects;
        model.group_sizes = synth.group_sizes;
        model.validate();
        loss.validate();
        synth.validate();
    }

    Vocabulary vocabulary() const { return Vocabulary::make(synth.objects, synth.group_sizes); }
};

namespace detail {

struct ConfigKey {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

inline std::string bool_str(bool b) { return b ? "true" : "false"; }

inline bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("expected true/false, got '" + v + "'");
}

inline const std::map<std::string, ConfigKey>& config_keys() {
    static const std::map<std::string, ConfigKey> keys = [] {
        std::map<std::string, ConfigKey> k;
        auto num = [&k](const std::string& name, auto member) {
            k[name] = {[member](RunConfig& c, const std::string& v) {
                           using T = std::decay_t<decltype(c.*member)>;
                           try {
                               if constexpr (std::is_same_v<T, double>)
                                   c.*member = std::stod(v);
                               else if constexpr (std::is_same_v<T, uint64_t>)
                                   c.*member = std::stoull(v);
                               else
                                   c.*member = std::stoi(v);
                           } catch (const std::exception&) {
                               throw ConfigError("bad numeric value '" + v + "'");
                           }
                       },
                       [member](const RunConfig& c) {
                           using T = std::decay_t<decltype(c.*member)>;
                           if constexpr (std::is_same_v<T, double>)
                               return detail::fmt(c.*member);
                           else
                               return std::to_string(c.*member);
                       }};
        };
        num("seed", &RunConfig::seed);
        num("lr", &RunConfig::lr);
        num("weight_decay", &RunConfig::weight_decay);
        num("steps", &RunConfig::steps);
        num("iou_threshold", &RunConfig::iou_threshold);

        auto model_num = [&k](const std::string& name, auto member) {
            k[name] = {[member](RunConfig& c, const std::string& v) {
                           try {
                               c.model.*member = std::stoi(v);
                           } catch (const std::exception&) {
                               throw ConfigError("bad numeric value '" + v + "'");
                           }
                       },
                       [member](const RunConfig& c) { return std::to_string(c.model.*member); }};
        };
        model_num("n_queries", &ModelConfig::n_queries);
        model_num("model_dim", &ModelConfig::model_dim);
        model_num("embed_dim", &ModelConfig::embed_dim);
        model_num("layers", &ModelConfig::layers);
        model_num("heads", &ModelConfig::heads);
        model_num("n_ref", &ModelConfig::n_ref);

        auto loss_num = [&k](const std::string& name, auto member) {
            k[name] = {[member](RunConfig& c, const std::string& v) {
                           try {
                               c.loss.*member = std::stod(v);
                           } catch (const std::exception&) {
                               throw ConfigError("bad numeric value '" + v + "'");
                           }
                       },
                       [member](const RunConfig& c) { return detail::fmt(c.loss.*member); }};
        };
        loss_num("alpha_s", &LossWeights::alpha_s);
        loss_num("alpha_o", &LossWeights::alpha_o);
        loss_num("alpha_p", &LossWeights::alpha_p);
        loss_num("beta", &LossWeights::beta);
        loss_num("lambda_l1", &LossWeights::lambda_l1);
        loss_num("lambda_giou", &LossWeights::lambda_giou);
        loss_num("focal_gamma", &LossWeights::focal_gamma);
        loss_num("focal_alpha", &LossWeights::focal_alpha);
        loss_num("no_object_weight", &LossWeights::no_object_weight);

        auto synth_int = [&k](const std::string& name, auto member) {
            k[name] = {[member](RunConfig& c, const std::string& v) {
                           try {
                               c.synth.*member = std::stoi(v);
                           } catch (const std::exception&) {
                               throw ConfigError("bad numeric value '" + v + "'");
                           }
                       },
                       [member](const RunConfig& c) { return std::to_string(c.synth.*member); }};
        };
        synth_int("frames", &SyntheticConfig::frames);
        synth_int("frames_per_video", &SyntheticConfig::frames_per_video);
        synth_int("grid", &SyntheticConfig::grid);
        synth_int("objects", &SyntheticConfig::objects);
        synth_int("max_predicates_per_pair", &SyntheticConfig::max_predicates_per_pair);
        k["zipf_exponent"] = {[](RunConfig& c, const std::string& v) { c.synth.zipf_exponent = std::stod(v); },
                              [](const RunConfig& c) { return detail::fmt(c.synth.zipf_exponent); }};
        k["cue_noise"] = {[](RunConfig& c, const std::string& v) { c.synth.cue_noise = std::stod(v); },
                          [](const RunConfig& c) { return detail::fmt(c.synth.cue_noise); }};

        for (int g = 0; g < 3; ++g) {
            std::string name = std::string("pred_") + Vocabulary::group_names()[g];
            k[name] = {[g](RunConfig& c, const std::string& v) {
                           try {
                               c.synth.group_sizes.at(g) = std::stoi(v);
                           } catch (const std::exception&) {
                               throw ConfigError("bad numeric value '" + v + "'");
                           }
                       },
                       [g](const RunConfig& c) { return std::to_string(c.synth.group_sizes.at(g)); }};
        }

        k["content_source"] = {
            [](RunConfig& c, const std::string& v) {
                if (v == "vlm")
                    c.model.content_source = ContentSource::vlm;
                else if (v == "zero")
                    c.model.content_source = ContentSource::zero;
                else
                    throw ConfigError("content_source must be vlm or zero, got '" + v + "'");
            },
            [](const RunConfig& c) {
                return std::string(c.model.content_source == ContentSource::vlm ? "vlm" : "zero");
            }};
        k["predicate_memory"] = {
            [](RunConfig& c, const std::string& v) {
                if (v == "bank")
                    c.model.predicate_memory = PredicateMemory::bank;
                else if (v == "image")
                    c.model.predicate_memory = PredicateMemory::image;
                else
                    throw ConfigError("predicate_memory must be bank or image, got '" + v + "'");
            },
            [](const RunConfig& c) {
                return std::string(c.model.predicate_memory == PredicateMemory::bank ? "bank"
                                                                                     : "image");
            }};
        k["constraint_scope"] = {
            [](RunConfig& c, const std::string& v) {
                if (v == "global")
                    c.constraint_per_group = false;
                else if (v == "per_group")
                    c.constraint_per_group = true;
                else
                    throw ConfigError("constraint_scope must be global or per_group");
            },
            [](const RunConfig& c) {
                return std::string(c.constraint_per_group ? "per_group" : "global");
            }};
        return k;
    }();
    return keys;
}

}  // namespace detail

inline void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto& keys = detail::config_keys();
    auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError("unknown config key: " + key);
    it->second.set(cfg, value);
}

inline std::vector<std::string> config_key_names() {
    std::vector<std::string> names;
    for (const auto& [k, _] : detail::config_keys()) names.push_back(k);
    return names;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    RunConfig cfg;
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key=value in config", ln);
        try {
            set_config_key(cfg, line.substr(0, eq), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ParseError(e.what(), ln);
        }
    }
    cfg.finalize();
    return cfg;
}

// Deterministic echo of every key, used for provenance in output files.
inline std::string dump_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& [name, key] : detail::config_keys())
        out += name + "=" + key.get(cfg) + "\n";
    return out;
}

inline void save_config(const std::string& path, const RunConfig& cfg) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << dump_config(cfg);
}

}  // namespace stsg
