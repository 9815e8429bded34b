#pragma once

#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include "stsg/geometry.hpp"
#include "stsg/tensor.hpp"

namespace stsg {

struct ParseError : std::runtime_error {
    int line;
    ParseError(const std::string& msg, int line_no)
        : std::runtime_error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
};

struct VocabularyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Object and predicate label spaces. Predicates are grouped (attention /
// spatial / contacting style); global predicate ids are contiguous per group.
struct Vocabulary {
    std::vector<std::string> objects;     // objects[0] is always "person"
    std::vector<int> group_sizes;
    std::vector<std::string> predicates;  // global id order, group-contiguous

    static const std::vector<std::string>& group_names() {
        static const std::vector<std::string> names = {"attention", "spatial", "contacting"};
        return names;
    }

    static Vocabulary make(int n_objects, std::vector<int> group_sizes) {
        if (n_objects < 2) throw std::invalid_argument("vocabulary needs at least 2 object classes");
        if (group_sizes.size() != group_names().size())
            throw std::invalid_argument("vocabulary needs exactly 3 predicate groups");
        Vocabulary v;
        v.objects.push_back("person");
        for (int i = 1; i < n_objects; ++i) v.objects.push_back("object_" + std::to_string(i));
        v.group_sizes = group_sizes;
        for (size_t g = 0; g < group_sizes.size(); ++g) {
            if (group_sizes[g] < 1) throw std::invalid_argument("empty predicate group");
            for (int i = 0; i < group_sizes[g]; ++i)
                v.predicates.push_back(group_names()[g] + "_" + std::to_string(i));
        }
        return v;
    }

    int n_objects() const { return static_cast<int>(objects.size()); }
    int n_predicates() const { return static_cast<int>(predicates.size()); }
    int n_groups() const { return static_cast<int>(group_sizes.size()); }

    int group_offset(int g) const {
        int off = 0;
        for (int i = 0; i < g; ++i) off += group_sizes[i];
        return off;
    }
    int group_of(int pred) const {
        int off = 0;
        for (int g = 0; g < n_groups(); ++g) {
            off += group_sizes[g];
            if (pred < off) return g;
        }
        throw std::out_of_range("predicate id out of range: " + std::to_string(pred));
    }

    int object_id(const std::string& label) const {
        for (int i = 0; i < n_objects(); ++i)
            if (objects[i] == label) return i;
        throw VocabularyError("unknown object label: " + label);
    }
    int predicate_id(const std::string& label) const {
        for (int i = 0; i < n_predicates(); ++i)
            if (predicates[i] == label) return i;
        throw VocabularyError("unknown predicate label: " + label);
    }
};

struct Entity {
    int class_id = 0;
    BoundingBox box;
    bool operator==(const Entity&) const = default;
};

// Subject/object entity indices plus global predicate ids (sorted).
struct Triplet {
    int subject = 0;
    int object = 0;
    std::vector<int> predicates;
    bool operator==(const Triplet&) const = default;
};

struct FrameAnnotation {
    int video = 0;
    int frame = 0;
    std::vector<Entity> entities;
    std::vector<Triplet> triplets;
    bool operator==(const FrameAnnotation&) const = default;
};

struct Cue {
    std::string subject;
    std::string object;
    std::vector<std::string> predicates;
    BoundingBox sub_box;
    BoundingBox obj_box;
    double confidence = 1.0;
    bool operator==(const Cue&) const = default;
};

struct FrameCues {
    int video = 0;
    int frame = 0;
    std::vector<Cue> cues;
    bool operator==(const FrameCues&) const = default;
};
using CueSet = FrameCues;

struct FrameFeatures {
    int video = 0;
    int frame = 0;
    Tensor feats;  // L x C occupancy grid
};

// ---------------------------------------------------------------------------
// Deterministic embedding provider standing in for external text/vision
// encoders. Hash mode expands (label, kind, quantized box) into a seeded
// pseudo-random unit vector; table mode serves externally supplied vectors.

enum class EmbedKind { text, visual };

namespace detail {

inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 14695981039346656037ull) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace detail

struct MissingEmbeddingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class EmbeddingProvider {
  public:
    EmbeddingProvider(uint64_t seed, int d_l) : seed_(seed), d_l_(d_l) {}

    void use_table(std::map<std::string, std::vector<double>> table) {
        table_ = std::move(table);
        table_mode_ = true;
    }
    bool table_mode() const { return table_mode_; }
    int dim() const { return d_l_; }

    // Unit vector of length d_l, a pure function of the arguments.
    std::vector<double> embed(const std::string& label, EmbedKind kind,
                              const BoundingBox* box = nullptr) const {
        if (label.empty()) throw std::invalid_argument("embed: empty label");
        if (table_mode_) {
            auto it = table_.find(label);
            if (it == table_.end())
                throw MissingEmbeddingError("no table embedding for label: " + label);
            if (static_cast<int>(it->second.size()) != d_l_)
                throw DimensionError("table embedding for " + label + " has wrong dimension");
            return normalized(it->second);
        }
        uint64_t h = detail::fnv1a(label.data(), label.size());
        unsigned char k = kind == EmbedKind::text ? 0 : 1;
        h = detail::fnv1a(&k, 1, h);
        if (box) {
            // quantize to a 16x16 grid so nearby boxes share an embedding
            int q[4] = {quant(box->x1), quant(box->y1), quant(box->x2), quant(box->y2)};
            h = detail::fnv1a(q, sizeof q, h);
        }
        uint64_t state = h ^ seed_;
        std::vector<double> v(d_l_);
        for (double& x : v) {
            uint64_t r = detail::splitmix64(state);
            x = 2.0 * (static_cast<double>(r >> 11) * 0x1.0p-53) - 1.0;
        }
        return normalized(v);
    }

  private:
    static int quant(double x) { return std::clamp(static_cast<int>(x * 16.0), 0, 15); }

    static std::vector<double> normalized(std::vector<double> v) {
        double n = 0;
        for (double x : v) n += x * x;
        n = std::sqrt(n);
        if (n == 0) throw NumericError("embed: zero vector cannot be normalized");
        for (double& x : v) x /= n;
        return v;
    }

    uint64_t seed_;
    int d_l_;
    bool table_mode_ = false;
    std::map<std::string, std::vector<double>> table_;
};

// ---------------------------------------------------------------------------
// Text serialization. All files are line-delimited, one frame per record,
// '#' lines are comments. Doubles print with %.17g so reload is exact.

namespace detail {

inline std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline double parse_double(const std::string& s, int line) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || s.empty())
        throw ParseError("malformed number '" + s + "'", line);
    return v;
}

inline int parse_int(const std::string& s, int line) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw ParseError("malformed integer '" + s + "'", line);
    return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else
            cur.push_back(c);
    }
    out.push_back(cur);
    return out;
}

// "key=value" field with a fixed expected key.
inline std::string field(const std::string& tok, const std::string& key, int line) {
    if (tok.rfind(key + "=", 0) != 0)
        throw ParseError("expected field '" + key + "=', got '" + tok + "'", line);
    return tok.substr(key.size() + 1);
}

inline std::string fmt_box(const BoundingBox& b) {
    return fmt(b.x1) + "," + fmt(b.y1) + "," + fmt(b.x2) + "," + fmt(b.y2);
}

inline BoundingBox parse_box(const std::string& s, int line) {
    auto parts = split(s, ',');
    if (parts.size() != 4) throw ParseError("box needs 4 coordinates, got '" + s + "'", line);
    BoundingBox b{parse_double(parts[0], line), parse_double(parts[1], line),
                  parse_double(parts[2], line), parse_double(parts[3], line)};
    if (!b.valid()) throw ParseError("invalid box '" + s + "'", line);
    return b;
}

}  // namespace detail

inline void save_annotations(const std::string& path, const std::vector<FrameAnnotation>& frames,
                             const Vocabulary& vocab) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "# stsg annotations v1\n";
    for (const auto& fa : frames) {
        out << "frame v=" << fa.video << " f=" << fa.frame << " ents=";
        for (size_t i = 0; i < fa.entities.size(); ++i) {
            if (i) out << ";";
            out << vocab.objects.at(fa.entities[i].class_id) << ":"
                << detail::fmt_box(fa.entities[i].box);
        }
        out << " rels=";
        for (size_t i = 0; i < fa.triplets.size(); ++i) {
            if (i) out << ";";
            const Triplet& t = fa.triplets[i];
            out << t.subject << "-" << t.object << ":";
            for (size_t p = 0; p < t.predicates.size(); ++p) {
                if (p) out << "+";
                out << vocab.predicates.at(t.predicates[p]);
            }
        }
        out << "\n";
    }
}

inline std::vector<FrameAnnotation> load_annotations(const std::string& path,
                                                     const Vocabulary& vocab) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::vector<FrameAnnotation> frames;
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (line.empty() || line[0] == '#') continue;
        auto toks = detail::split(line, ' ');
        if (toks.size() != 5 || toks[0] != "frame")
            throw ParseError("expected 'frame v=.. f=.. ents=.. rels=..'", ln);
        FrameAnnotation fa;
        fa.video = detail::parse_int(detail::field(toks[1], "v", ln), ln);
        fa.frame = detail::parse_int(detail::field(toks[2], "f", ln), ln);
        std::string ents = detail::field(toks[3], "ents", ln);
        if (!ents.empty())
            for (const std::string& e : detail::split(ents, ';')) {
                auto colon = e.find(':');
                if (colon == std::string::npos)
                    throw ParseError("entity needs 'label:box', got '" + e + "'", ln);
                Entity ent;
                try {
                    ent.class_id = vocab.object_id(e.substr(0, colon));
                } catch (const VocabularyError& ve) {
                    throw ParseError(ve.what(), ln);
                }
                ent.box = detail::parse_box(e.substr(colon + 1), ln);
                fa.entities.push_back(ent);
            }
        std::string rels = detail::field(toks[4], "rels", ln);
        if (!rels.empty())
            for (const std::string& r : detail::split(rels, ';')) {
                auto colon = r.find(':');
                auto dash = r.find('-');
                if (colon == std::string::npos || dash == std::string::npos || dash > colon)
                    throw ParseError("relation needs 's-o:preds', got '" + r + "'", ln);
                Triplet t;
                t.subject = detail::parse_int(r.substr(0, dash), ln);
                t.object = detail::parse_int(r.substr(dash + 1, colon - dash - 1), ln);
                if (t.subject < 0 || t.subject >= static_cast<int>(fa.entities.size()) ||
                    t.object < 0 || t.object >= static_cast<int>(fa.entities.size()))
                    throw ParseError("relation entity index out of range in '" + r + "'", ln);
                for (const std::string& p : detail::split(r.substr(colon + 1), '+')) {
                    try {
                        t.predicates.push_back(vocab.predicate_id(p));
                    } catch (const VocabularyError& ve) {
                        throw ParseError(ve.what(), ln);
                    }
                }
                std::sort(t.predicates.begin(), t.predicates.end());
                fa.triplets.push_back(t);
            }
        if (fa.triplets.empty())
            throw ParseError("annotated frame carries no triplets", ln);
        frames.push_back(std::move(fa));
    }
    return frames;
}

inline void save_cues(const std::string& path, const std::vector<FrameCues>& frames) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "# stsg cues v1\n";
    for (const auto& fc : frames) {
        out << "cues v=" << fc.video << " f=" << fc.frame << " items=";
        for (size_t i = 0; i < fc.cues.size(); ++i) {
            if (i) out << ";";
            const Cue& c = fc.cues[i];
            out << c.subject << "|" << c.object << "|";
            for (size_t p = 0; p < c.predicates.size(); ++p) {
                if (p) out << "+";
                out << c.predicates[p];
            }
            out << "|" << detail::fmt_box(c.sub_box) << "|" << detail::fmt_box(c.obj_box) << "|"
                << detail::fmt(c.confidence);
        }
        out << "\n";
    }
}

namespace detail {

inline FrameCues parse_cue_record(const std::string& line, int ln) {
    auto toks = split(line, ' ');
    if (toks.size() != 4 || toks[0] != "cues")
        throw ParseError("expected 'cues v=.. f=.. items=..'", ln);
    FrameCues fc;
    fc.video = parse_int(field(toks[1], "v", ln), ln);
    fc.frame = parse_int(field(toks[2], "f", ln), ln);
    std::string items = field(toks[3], "items", ln);
    if (!items.empty())
        for (const std::string& item : split(items, ';')) {
            auto parts = split(item, '|');
            if (parts.size() != 6)
                throw ParseError("cue needs 6 '|' fields, got '" + item + "'", ln);
            Cue c;
            c.subject = parts[0];
            c.object = parts[1];
            if (c.subject.empty() || c.object.empty())
                throw ParseError("cue with empty subject/object label", ln);
            if (!parts[2].empty()) c.predicates = split(parts[2], '+');
            c.sub_box = parse_box(parts[3], ln);
            c.obj_box = parse_box(parts[4], ln);
            c.confidence = parse_double(parts[5], ln);
            fc.cues.push_back(std::move(c));
        }
    return fc;
}

}  // namespace detail

inline std::vector<FrameCues> load_cues(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::vector<FrameCues> frames;
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (line.empty() || line[0] == '#') continue;
        frames.push_back(detail::parse_cue_record(line, ln));
    }
    return frames;
}

inline void save_features(const std::string& path, const std::vector<FrameFeatures>& frames) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "# stsg frame features v1\n";
    for (const auto& ff : frames) {
        out << "feat v=" << ff.video << " f=" << ff.frame << " rows=" << ff.feats.rows
            << " cols=" << ff.feats.cols << " data=";
        for (size_t i = 0; i < ff.feats.size(); ++i) {
            if (i) out << ",";
            out << detail::fmt(ff.feats.v[i]);
        }
        out << "\n";
    }
}

inline std::vector<FrameFeatures> load_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::vector<FrameFeatures> frames;
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (line.empty() || line[0] == '#') continue;
        auto toks = detail::split(line, ' ');
        if (toks.size() != 6 || toks[0] != "feat")
            throw ParseError("expected 'feat v=.. f=.. rows=.. cols=.. data=..'", ln);
        FrameFeatures ff;
        ff.video = detail::parse_int(detail::field(toks[1], "v", ln), ln);
        ff.frame = detail::parse_int(detail::field(toks[2], "f", ln), ln);
        int rows = detail::parse_int(detail::field(toks[3], "rows", ln), ln);
        int cols = detail::parse_int(detail::field(toks[4], "cols", ln), ln);
        std::string data = detail::field(toks[5], "data", ln);
        std::vector<double> vals;
        if (!data.empty())
            for (const std::string& s : detail::split(data, ',')) vals.push_back(detail::parse_double(s, ln));
        if (static_cast<int>(vals.size()) != rows * cols)
            throw ParseError("feature record has " + std::to_string(vals.size()) +
                                 " values for shape " + std::to_string(rows) + "x" +
                                 std::to_string(cols),
                             ln);
        ff.feats = Tensor(rows, cols, std::move(vals));
        frames.push_back(std::move(ff));
    }
    return frames;
}

// Embedding table file: one '<label> v,v,...' line per label.
inline std::map<std::string, std::vector<double>> load_embedding_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::map<std::string, std::vector<double>> table;
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (line.empty() || line[0] == '#') continue;
        auto sp = line.find(' ');
        if (sp == std::string::npos) throw ParseError("expected '<label> v,v,...'", ln);
        std::vector<double> vals;
        for (const std::string& s : detail::split(line.substr(sp + 1), ','))
            vals.push_back(detail::parse_double(s, ln));
        table[line.substr(0, sp)] = std::move(vals);
    }
    return table;
}

// ---------------------------------------------------------------------------
// Synthetic video scenes: a handful of entities with coherent motion, a
// Zipf-distributed predicate assignment per subject-object pair, an occupancy
// grid as the frame feature source, and oracle cues derived from the truth.

struct SyntheticConfig {
    uint64_t seed = 1;
    int frames = 30;
    int frames_per_video = 5;
    int grid = 4;             // L = grid*grid feature tokens
    int objects = 6;
    std::vector<int> group_sizes = {3, 4, 5};
    double zipf_exponent = 1.0;
    double cue_noise = 0.0;
    int max_predicates_per_pair = 2;

    void validate() const {
        if (zipf_exponent < 0) throw std::invalid_argument("zipf exponent must be >= 0");
        if (cue_noise < 0 || cue_noise > 1) throw std::invalid_argument("noise rate must be in [0,1]");
        if (frames < 0 || frames_per_video < 1 || grid < 1)
            throw std::invalid_argument("invalid synthetic sizes");
        if (max_predicates_per_pair < 1) throw std::invalid_argument("need >= 1 predicate per pair");
    }

    Vocabulary vocabulary() const { return Vocabulary::make(objects, group_sizes); }
};

struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SyntheticData {
    std::vector<FrameFeatures> features;
    std::vector<FrameAnnotation> annotations;
    std::vector<FrameCues> cues;
};

namespace detail {

inline BoundingBox sample_box(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> center(0.25, 0.75), size(0.15, 0.35);
    for (int tries = 0; tries < 100; ++tries) {
        double cx = center(rng), cy = center(rng);
        double w = size(rng), h = size(rng);
        BoundingBox b{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
        b.x1 = std::max(0.0, b.x1);
        b.y1 = std::max(0.0, b.y1);
        b.x2 = std::min(1.0, b.x2);
        b.y2 = std::min(1.0, b.y2);
        if (b.width() >= 0.05 && b.height() >= 0.05) return b;
    }
    throw GenerationError("could not place an entity after bounded retries");
}

// Reflect the box off the frame borders, preserving size.
inline void advance(BoundingBox& b, double& vx, double& vy) {
    double w = b.width(), h = b.height();
    double x = b.x1 + vx, y = b.y1 + vy;
    if (x < 0) { x = -x; vx = -vx; }
    if (x + w > 1) { x = 2 * (1 - w) - x; vx = -vx; }
    if (y < 0) { y = -y; vy = -vy; }
    if (y + h > 1) { y = 2 * (1 - h) - y; vy = -vy; }
    b = {std::clamp(x, 0.0, 1.0), std::clamp(y, 0.0, 1.0), std::clamp(x + w, 0.0, 1.0),
         std::clamp(y + h, 0.0, 1.0)};
}

}  // namespace detail

inline SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    Vocabulary vocab = cfg.vocabulary();
    std::mt19937_64 rng(cfg.seed);
    SyntheticData out;

    // Zipf weights over the global predicate vocabulary.
    std::vector<double> zipf(vocab.n_predicates());
    for (int i = 0; i < vocab.n_predicates(); ++i)
        zipf[i] = std::pow(static_cast<double>(i + 1), -cfg.zipf_exponent);
    std::discrete_distribution<int> pred_dist(zipf.begin(), zipf.end());

    int video = 0;
    int produced = 0;
    while (produced < cfg.frames) {
        int in_video = std::min(cfg.frames_per_video, cfg.frames - produced);
        std::uniform_int_distribution<int> n_ents_dist(2, 4);
        int n_ents = n_ents_dist(rng);
        std::vector<Entity> ents(n_ents);
        std::vector<double> vx(n_ents), vy(n_ents);
        std::uniform_real_distribution<double> vel(-0.03, 0.03);
        std::uniform_int_distribution<int> cls(1, vocab.n_objects() - 1);
        for (int e = 0; e < n_ents; ++e) {
            ents[e].class_id = e == 0 ? 0 : cls(rng);
            ents[e].box = detail::sample_box(rng);
            vx[e] = vel(rng);
            vy[e] = vel(rng);
        }
        // one persistent predicate set per person->entity pair for the video
        std::vector<Triplet> rels;
        std::uniform_int_distribution<int> n_preds_dist(1, cfg.max_predicates_per_pair);
        for (int e = 1; e < n_ents; ++e) {
            Triplet t{0, e, {}};
            int k = n_preds_dist(rng);
            while (static_cast<int>(t.predicates.size()) < k) {
                int p = pred_dist(rng);
                if (std::find(t.predicates.begin(), t.predicates.end(), p) == t.predicates.end())
                    t.predicates.push_back(p);
            }
            std::sort(t.predicates.begin(), t.predicates.end());
            rels.push_back(std::move(t));
        }

        for (int fi = 0; fi < in_video; ++fi) {
            if (fi > 0)
                for (int e = 0; e < n_ents; ++e) detail::advance(ents[e].box, vx[e], vy[e]);

            FrameAnnotation fa;
            fa.video = video;
            fa.frame = fi;
            fa.entities = ents;
            fa.triplets = rels;

            // occupancy grid: per cell, per object class, coverage fraction
            Tensor grid(cfg.grid * cfg.grid, vocab.n_objects());
            double cell = 1.0 / cfg.grid;
            for (const Entity& e : ents)
                for (int gy = 0; gy < cfg.grid; ++gy)
                    for (int gx = 0; gx < cfg.grid; ++gx) {
                        double ox = std::max(0.0, std::min(e.box.x2, (gx + 1) * cell) -
                                                      std::max(e.box.x1, gx * cell));
                        double oy = std::max(0.0, std::min(e.box.y2, (gy + 1) * cell) -
                                                      std::max(e.box.y1, gy * cell));
                        grid.at(gy * cfg.grid + gx, e.class_id) += ox * oy / (cell * cell);
                    }
            out.features.push_back({video, fi, std::move(grid)});

            // oracle cues: the truth, perturbed at the configured rate
            FrameCues fc;
            fc.video = video;
            fc.frame = fi;
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            std::uniform_real_distribution<double> conf(0.5, 1.0);
            std::uniform_real_distribution<double> jitter(-0.05, 0.05);
            for (const Triplet& t : rels) {
                Cue c;
                c.subject = vocab.objects[ents[t.subject].class_id];
                c.object = vocab.objects[ents[t.object].class_id];
                for (int p : t.predicates) c.predicates.push_back(vocab.predicates[p]);
                c.sub_box = ents[t.subject].box;
                c.obj_box = ents[t.object].box;
                c.confidence = conf(rng);
                if (unit(rng) < cfg.cue_noise) {
                    // corrupt the object label
                    c.object = vocab.objects[cls(rng)];
                }
                if (unit(rng) < cfg.cue_noise) {
                    // swap one predicate for a random one
                    int slot = static_cast<int>(unit(rng) * c.predicates.size());
                    slot = std::min<int>(slot, static_cast<int>(c.predicates.size()) - 1);
                    c.predicates[slot] = vocab.predicates[pred_dist(rng)];
                }
                if (unit(rng) < cfg.cue_noise) {
                    auto wobble = [&](BoundingBox& b) {
                        b.x1 = std::clamp(b.x1 + jitter(rng), 0.0, 1.0);
                        b.y1 = std::clamp(b.y1 + jitter(rng), 0.0, 1.0);
                        b.x2 = std::clamp(b.x2 + jitter(rng), b.x1, 1.0);
                        b.y2 = std::clamp(b.y2 + jitter(rng), b.y1, 1.0);
                    };
                    wobble(c.sub_box);
                    wobble(c.obj_box);
                }
                fc.cues.push_back(std::move(c));
            }
            std::stable_sort(fc.cues.begin(), fc.cues.end(),
                             [](const Cue& a, const Cue& b) { return a.confidence > b.confidence; });
            out.cues.push_back(std::move(fc));
            out.annotations.push_back(std::move(fa));
            ++produced;
        }
        ++video;
    }
    return out;
}

}  // namespace stsg
