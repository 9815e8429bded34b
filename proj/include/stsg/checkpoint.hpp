#pragma once

#include <bit>
#include <cstring>
#include <fstream>

#include "stsg/nn.hpp"

namespace stsg {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Text header listing (name, rows, cols) per parameter, then little-endian
// 64-bit floats in header order.
inline void save_checkpoint(const std::string& path, const ParamStore& ps) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "stsg-checkpoint v1\n" << ps.size() << "\n";
    for (const auto& e : ps.entries())
        out << e.name << " " << e.value.rows << " " << e.value.cols << "\n";
    for (const auto& e : ps.entries())
        for (double x : e.value.v) {
            uint64_t bits;
            std::memcpy(&bits, &x, sizeof bits);
            if constexpr (std::endian::native == std::endian::big) {
                uint64_t r = 0;
                for (int b = 0; b < 8; ++b) r = (r << 8) | ((bits >> (8 * b)) & 0xff);
                bits = r;
            }
            out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
        }
}

// Loads values into an already-declared store; shapes must match. Names in
// the file that the store does not declare, or vice versa, are errors.
inline void load_checkpoint(const std::string& path, ParamStore& ps) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string magic;
    std::getline(in, magic);
    if (magic != "stsg-checkpoint v1") throw CheckpointError("not a checkpoint file: " + path);
    size_t n = 0;
    in >> n;
    if (!in || n != ps.size())
        throw CheckpointError("checkpoint declares " + std::to_string(n) + " parameters, model has " +
                              std::to_string(ps.size()));
    struct Rec {
        std::string name;
        int rows, cols;
    };
    std::vector<Rec> recs(n);
    for (auto& r : recs) {
        in >> r.name >> r.rows >> r.cols;
        if (!in) throw CheckpointError("truncated checkpoint header");
        if (!ps.has(r.name)) throw CheckpointError("checkpoint parameter not in model: " + r.name);
        const Tensor& v = ps.at(r.name).value;
        if (v.rows != r.rows || v.cols != r.cols)
            throw CheckpointError("shape mismatch for parameter " + r.name + ": checkpoint " +
                                  std::to_string(r.rows) + "x" + std::to_string(r.cols) +
                                  ", model " + shape_str(v));
    }
    in.ignore(1);  // newline after the last header line
    for (const auto& r : recs) {
        Tensor& v = ps.at(r.name).value;
        for (double& x : v.v) {
            uint64_t bits;
            in.read(reinterpret_cast<char*>(&bits), sizeof bits);
            if (!in) throw CheckpointError("truncated checkpoint payload at parameter " + r.name);
            if constexpr (std::endian::native == std::endian::big) {
                uint64_t rr = 0;
                for (int b = 0; b < 8; ++b) rr = (rr << 8) | ((bits >> (8 * b)) & 0xff);
                bits = rr;
            }
            std::memcpy(&x, &bits, sizeof x);
        }
    }
}

}  // namespace stsg
