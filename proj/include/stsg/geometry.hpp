#pragma once

#include <algorithm>
#include <cmath>

#include "stsg/autodiff.hpp"

namespace stsg {

// Corner-form box, normalized coordinates.
struct BoundingBox {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    double cx() const { return 0.5 * (x1 + x2); }
    double cy() const { return 0.5 * (y1 + y2); }

    bool valid() const { return x1 <= x2 && y1 <= y2; }
    bool normalized() const {
        return valid() && x1 >= 0 && y1 >= 0 && x2 <= 1 && y2 <= 1;
    }

    bool operator==(const BoundingBox& o) const = default;
};

inline double iou(const BoundingBox& a, const BoundingBox& b) {
    double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    double inter = ix * iy;
    double uni = a.area() + b.area() - inter;
    if (uni <= 0) return 1.0;  // both boxes degenerate to the same point
    return inter / uni;
}

// GIoU = IoU - (hull - union)/hull, in (-1, 1].
inline double giou(const BoundingBox& a, const BoundingBox& b) {
    double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    double inter = ix * iy;
    double uni = a.area() + b.area() - inter;
    double hx = std::max(a.x2, b.x2) - std::min(a.x1, b.x1);
    double hy = std::max(a.y2, b.y2) - std::min(a.y1, b.y1);
    double hull = hx * hy;
    if (hull <= 0) return 1.0;  // zero-area hull: both boxes are the same point
    double i = uni <= 0 ? 1.0 : inter / uni;
    return i - (hull - uni) / hull;
}

inline double giou_loss(const BoundingBox& a, const BoundingBox& b) { return 1.0 - giou(a, b); }

// Mean absolute difference over the four coordinates.
inline double l1_box(const BoundingBox& a, const BoundingBox& b) {
    return (std::fabs(a.x1 - b.x1) + std::fabs(a.y1 - b.y1) + std::fabs(a.x2 - b.x2) +
            std::fabs(a.y2 - b.y2)) /
           4.0;
}

inline BoundingBox union_box(const BoundingBox& a, const BoundingBox& b) {
    return {std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2),
            std::max(a.y2, b.y2)};
}

namespace ad_geom {

// Differentiable variants over 1x4 corner-form rows [x1,y1,x2,y2].

inline Var coord(const Var& box, int j) { return ad::pick(box, 0, j); }

inline Var box_area(const Var& box) {
    Var w = ad::sub(coord(box, 2), coord(box, 0));
    Var h = ad::sub(coord(box, 3), coord(box, 1));
    return ad::mul(w, h);
}

inline Var l1_box(const Var& a, const Var& b) {
    return ad::scale(ad::sum_all(ad::abs_(ad::sub(a, b))), 0.25);
}

inline Var giou_loss(const Var& a, const Var& b) {
    Var ix = ad::relu0(ad::sub(ad::emin(coord(a, 2), coord(b, 2)), ad::emax(coord(a, 0), coord(b, 0))));
    Var iy = ad::relu0(ad::sub(ad::emin(coord(a, 3), coord(b, 3)), ad::emax(coord(a, 1), coord(b, 1))));
    Var inter = ad::mul(ix, iy);
    Var uni = ad::sub(ad::add(box_area(a), box_area(b)), inter);
    Var hx = ad::sub(ad::emax(coord(a, 2), coord(b, 2)), ad::emin(coord(a, 0), coord(b, 0)));
    Var hy = ad::sub(ad::emax(coord(a, 3), coord(b, 3)), ad::emin(coord(a, 1), coord(b, 1)));
    Var hull = ad::mul(hx, hy);
    Var i = ad::div(inter, uni);
    Var penalty = ad::div(ad::sub(hull, uni), hull);
    // 1 - (IoU - penalty)
    return ad::add_scalar(ad::sub(penalty, i), 1.0);
}

}  // namespace ad_geom
}  // namespace stsg
