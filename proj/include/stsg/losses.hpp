#pragma once

#include "stsg/geometry.hpp"

namespace stsg {

// Weights of the composite matching cost / training loss.
struct LossWeights {
    double alpha_s = 1.0;
    double alpha_o = 1.0;
    double alpha_p = 1.0;
    double beta = 1.0;
    double lambda_l1 = 5.0;
    double lambda_giou = 2.0;
    double focal_gamma = 2.0;
    double focal_alpha = 0.25;
    double no_object_weight = 0.1;

    void validate() const {
        for (double w : {alpha_s, alpha_o, alpha_p, beta, lambda_l1, lambda_giou, focal_gamma,
                         focal_alpha, no_object_weight})
            if (w < 0) throw std::invalid_argument("loss weights must be nonnegative");
    }
};

constexpr double kProbEps = 1e-12;

// -w * log softmax(logits)[target]
inline double cross_entropy(const std::vector<double>& logits, int target,
                            const std::vector<double>* class_weights = nullptr) {
    if (logits.size() < 2) throw std::invalid_argument("cross_entropy: need at least 2 classes");
    if (target < 0 || target >= static_cast<int>(logits.size()))
        throw std::out_of_range("cross_entropy: target class " + std::to_string(target) +
                                " out of range");
    double mx = *std::max_element(logits.begin(), logits.end());
    double s = 0;
    for (double z : logits) s += std::exp(z - mx);
    double w = class_weights ? (*class_weights)[target] : 1.0;
    return -w * (logits[target] - mx - std::log(s));
}

// Multi-label focal term: sum over classes of -alpha (1-p_t)^gamma log(p_t),
// p_t = p for positives and 1-p for negatives. Probabilities, not logits.
inline double focal_loss(const std::vector<double>& probs, const std::vector<bool>& positive,
                         double gamma, double alpha) {
    if (probs.size() != positive.size())
        throw std::invalid_argument("focal_loss: probs/target length mismatch");
    double total = 0;
    for (size_t i = 0; i < probs.size(); ++i) {
        double pt = positive[i] ? probs[i] : 1.0 - probs[i];
        pt = std::clamp(pt, kProbEps, 1.0 - kProbEps);
        total += -alpha * std::pow(1.0 - pt, gamma) * std::log(pt);
    }
    return total;
}

namespace ad_loss {

// Differentiable CE on one logits row of a larger matrix.
inline Var cross_entropy_row(const Var& logits, int row, int target, double weight = 1.0) {
    Var r = ad::slice_rows(logits, row, row + 1);
    Var logp = ad::sub(ad::pick(r, 0, target), ad::pick(ad::logsumexp_rows(r), 0, 0));
    return ad::scale(logp, -weight);
}

// Differentiable focal term on a 1xC probability row against a multi-hot
// target. pt = p for positives, 1-p for negatives.
inline Var focal_row(const Var& probs, const std::vector<bool>& positive, double gamma,
                     double alpha) {
    if (probs.rows() != 1 || probs.cols() != static_cast<int>(positive.size()))
        throw DimensionError("focal_row: target length mismatch");
    Tensor sign(1, probs.cols()), off(1, probs.cols());
    for (int j = 0; j < probs.cols(); ++j) {
        sign.at(0, j) = positive[j] ? 1.0 : -1.0;
        off.at(0, j) = positive[j] ? 0.0 : 1.0;
    }
    Tape& t = *probs.tape;
    // pt = off + sign*p
    Var pt = ad::add(ad::mul(probs, ad::constant(t, sign)), ad::constant(t, off));
    pt = ad::clamp(pt, kProbEps, 1.0 - kProbEps);
    Var one_minus = ad::scale(ad::add_scalar(ad::scale(pt, -1.0), 1.0), 1.0);
    Var term = ad::mul(ad::powc(one_minus, gamma), ad::log(pt));
    return ad::scale(ad::sum_all(term), -alpha);
}

}  // namespace ad_loss
}  // namespace stsg
