#include "finflow/ad/ops.hpp"

#include <cmath>
#include <cstring>

namespace finflow::ad {

namespace {

const kern::Ops& K() { return kern::ops(); }

enum class BinMode { Same, ScalarA, ScalarB, WBcastB, HBcastB };

BinMode bin_mode(const Shape& a, const Shape& b, const char* op) {
    if (a == b) return BinMode::Same;
    if (b.count() == 1) return BinMode::ScalarB;
    if (a.count() == 1) return BinMode::ScalarA;
    if (b.c == a.c && b.h == a.h && b.w == 1) return BinMode::WBcastB;
    if (b.c == a.c && b.h == 1 && b.w == a.w) return BinMode::HBcastB;
    throw SimError(std::string(op) + ": incompatible shapes " + a.str() + " vs " + b.str());
}

// reduce a full-shaped gradient onto a broadcast operand
Tensor reduce_to_scalar(const Tensor& g) { return Tensor::scalar(K().sum(g.data(), g.size())); }

Tensor reduce_to_wb(const Tensor& g) { // (c,h,w) -> (c,h,1) by row sums
    Tensor out = Tensor::uninit({g.c(), g.h(), 1});
    double* o = out.raw();
    const int rows = g.c() * g.h(), w = g.w();
    for (int r = 0; r < rows; ++r) o[r] = K().sum(g.data() + std::size_t(r) * w, std::size_t(w));
    return out;
}

Tensor reduce_to_hb(const Tensor& g) { // (c,h,w) -> (c,1,w) by column sums per channel
    Tensor out = Tensor::zeros({g.c(), 1, g.w()});
    double* o = out.raw();
    const int w = g.w();
    for (int c = 0; c < g.c(); ++c)
        for (int j = 0; j < g.h(); ++j)
            K().axpy(1.0, g.data() + (std::size_t(c) * g.h() + j) * w, o + std::size_t(c) * w, std::size_t(w));
    return out;
}

} // namespace

DiffVar add(Tape& t, const DiffVar& a, const DiffVar& b) {
    BinMode m = bin_mode(a.shape(), b.shape(), "add");
    check(m == BinMode::Same || m == BinMode::ScalarA || m == BinMode::ScalarB,
          "add: broadcast limited to scalars");
    const DiffVar& big = (m == BinMode::ScalarA) ? b : a;
    Tensor out = Tensor::uninit(big.shape());
    if (m == BinMode::Same) {
        K().add(a.val.data(), b.val.data(), out.raw(), out.size());
    } else {
        double s = (m == BinMode::ScalarA) ? a.val.scalar_value() : b.val.scalar_value();
        const Tensor& f = (m == BinMode::ScalarA) ? b.val : a.val;
        double* o = out.raw();
        for (std::size_t i = 0; i < out.size(); ++i) o[i] = f.data()[i] + s;
    }
    int an = a.node, bn = b.node;
    if (an < 0 && bn < 0) return constant(std::move(out));
    return t.record(std::move(out), "add", [an, bn, m](const Tensor& g, GradStore& gs) {
        if (an >= 0) gs.accum(an, m == BinMode::ScalarA ? reduce_to_scalar(g) : g);
        if (bn >= 0) gs.accum(bn, m == BinMode::ScalarB ? reduce_to_scalar(g) : g);
    });
}

DiffVar sub(Tape& t, const DiffVar& a, const DiffVar& b) {
    BinMode m = bin_mode(a.shape(), b.shape(), "sub");
    check(m == BinMode::Same || m == BinMode::ScalarA || m == BinMode::ScalarB,
          "sub: broadcast limited to scalars");
    Shape os = (m == BinMode::ScalarA) ? b.shape() : a.shape();
    Tensor out = Tensor::uninit(os);
    double* o = out.raw();
    if (m == BinMode::Same) {
        K().sub(a.val.data(), b.val.data(), o, out.size());
    } else if (m == BinMode::ScalarB) {
        double s = b.val.scalar_value();
        for (std::size_t i = 0; i < out.size(); ++i) o[i] = a.val.data()[i] - s;
    } else {
        double s = a.val.scalar_value();
        for (std::size_t i = 0; i < out.size(); ++i) o[i] = s - b.val.data()[i];
    }
    int an = a.node, bn = b.node;
    if (an < 0 && bn < 0) return constant(std::move(out));
    return t.record(std::move(out), "sub", [an, bn, m](const Tensor& g, GradStore& gs) {
        if (an >= 0) gs.accum(an, m == BinMode::ScalarA ? reduce_to_scalar(g) : g);
        if (bn >= 0) {
            Tensor ng = Tensor::uninit(g.shape());
            K().scale(-1.0, g.data(), ng.raw(), g.size());
            gs.accum(bn, m == BinMode::ScalarB ? reduce_to_scalar(ng) : ng);
        }
    });
}

DiffVar mul(Tape& t, const DiffVar& a, const DiffVar& b) {
    BinMode m = bin_mode(a.shape(), b.shape(), "mul");
    Shape os = (m == BinMode::ScalarA) ? b.shape() : a.shape();
    Tensor out = Tensor::uninit(os);
    double* o = out.raw();
    const int w = a.shape().w, rows = a.shape().c * a.shape().h;
    switch (m) {
        case BinMode::Same:
            K().mul(a.val.data(), b.val.data(), o, out.size());
            break;
        case BinMode::ScalarA:
            K().scale(a.val.scalar_value(), b.val.data(), o, out.size());
            break;
        case BinMode::ScalarB:
            K().scale(b.val.scalar_value(), a.val.data(), o, out.size());
            break;
        case BinMode::WBcastB:
            for (int r = 0; r < rows; ++r)
                K().scale(b.val.data()[r], a.val.data() + std::size_t(r) * w, o + std::size_t(r) * w,
                          std::size_t(w));
            break;
        case BinMode::HBcastB:
            for (int c = 0; c < a.shape().c; ++c)
                for (int j = 0; j < a.shape().h; ++j) {
                    std::size_t off = (std::size_t(c) * a.shape().h + j) * w;
                    K().mul(a.val.data() + off, b.val.data() + std::size_t(c) * w, o + off, std::size_t(w));
                }
            break;
    }
    int an = a.node, bn = b.node;
    if (an < 0 && bn < 0) return constant(std::move(out));
    DiffVar ac = a, bc = b; // keep values alive for the backward pass
    return t.record(std::move(out), "mul", [an, bn, m, ac, bc](const Tensor& g, GradStore& gs) {
        const int w = ac.shape().w, rows = ac.shape().c * ac.shape().h;
        if (an >= 0) {
            switch (m) {
                case BinMode::Same: {
                    Tensor ga = Tensor::uninit(g.shape());
                    K().mul(g.data(), bc.val.data(), ga.raw(), g.size());
                    gs.accum(an, ga);
                    break;
                }
                case BinMode::ScalarA:
                    gs.accum(an, Tensor::scalar(K().dot(g.data(), bc.val.data(), g.size())));
                    break;
                case BinMode::ScalarB: {
                    Tensor ga = Tensor::uninit(g.shape());
                    K().scale(bc.val.scalar_value(), g.data(), ga.raw(), g.size());
                    gs.accum(an, ga);
                    break;
                }
                case BinMode::WBcastB: {
                    Tensor ga = Tensor::uninit(ac.shape());
                    double* p = ga.raw();
                    for (int r = 0; r < rows; ++r)
                        K().scale(bc.val.data()[r], g.data() + std::size_t(r) * w, p + std::size_t(r) * w,
                                  std::size_t(w));
                    gs.accum(an, ga);
                    break;
                }
                case BinMode::HBcastB: {
                    Tensor ga = Tensor::uninit(ac.shape());
                    double* p = ga.raw();
                    for (int c = 0; c < ac.shape().c; ++c)
                        for (int j = 0; j < ac.shape().h; ++j) {
                            std::size_t off = (std::size_t(c) * ac.shape().h + j) * w;
                            K().mul(g.data() + off, bc.val.data() + std::size_t(c) * w, p + off,
                                    std::size_t(w));
                        }
                    gs.accum(an, ga);
                    break;
                }
            }
        }
        if (bn >= 0) {
            switch (m) {
                case BinMode::Same: {
                    Tensor gb = Tensor::uninit(g.shape());
                    K().mul(g.data(), ac.val.data(), gb.raw(), g.size());
                    gs.accum(bn, gb);
                    break;
                }
                case BinMode::ScalarB:
                    gs.accum(bn, Tensor::scalar(K().dot(g.data(), ac.val.data(), g.size())));
                    break;
                case BinMode::ScalarA: {
                    Tensor gb = Tensor::uninit(g.shape());
                    K().scale(ac.val.scalar_value(), g.data(), gb.raw(), g.size());
                    gs.accum(bn, gb);
                    break;
                }
                case BinMode::WBcastB: {
                    Tensor tmp = Tensor::uninit(g.shape());
                    K().mul(g.data(), ac.val.data(), tmp.raw(), g.size());
                    gs.accum(bn, reduce_to_wb(tmp));
                    break;
                }
                case BinMode::HBcastB: {
                    Tensor tmp = Tensor::uninit(g.shape());
                    K().mul(g.data(), ac.val.data(), tmp.raw(), g.size());
                    gs.accum(bn, reduce_to_hb(tmp));
                    break;
                }
            }
        }
    });
}

DiffVar div(Tape& t, const DiffVar& a, const DiffVar& b) {
    BinMode m = bin_mode(a.shape(), b.shape(), "div");
    check(m != BinMode::HBcastB, "div: h-broadcast divisor unsupported");
    Shape os = (m == BinMode::ScalarA) ? b.shape() : a.shape();
    Tensor out = Tensor::uninit(os);
    double* o = out.raw();
    const int w = a.shape().w, rows = a.shape().c * a.shape().h;
    switch (m) {
        case BinMode::Same:
            K().div(a.val.data(), b.val.data(), o, out.size());
            break;
        case BinMode::ScalarB:
            K().scale(1.0 / b.val.scalar_value(), a.val.data(), o, out.size());
            break;
        case BinMode::ScalarA: {
            double s = a.val.scalar_value();
            for (std::size_t i = 0; i < out.size(); ++i) o[i] = s / b.val.data()[i];
            break;
        }
        case BinMode::WBcastB:
            for (int r = 0; r < rows; ++r)
                K().scale(1.0 / b.val.data()[r], a.val.data() + std::size_t(r) * w,
                          o + std::size_t(r) * w, std::size_t(w));
            break;
        default:
            break;
    }
    int an = a.node, bn = b.node;
    if (an < 0 && bn < 0) return constant(std::move(out));
    DiffVar ac = a, bc = b;
    Tensor oc = out;
    return t.record(std::move(out), "div", [an, bn, m, ac, bc, oc](const Tensor& g, GradStore& gs) {
        const int w = ac.shape().w, rows = ac.shape().c * ac.shape().h;
        if (an >= 0) {
            switch (m) {
                case BinMode::Same: {
                    Tensor ga = Tensor::uninit(g.shape());
                    K().div(g.data(), bc.val.data(), ga.raw(), g.size());
                    gs.accum(an, ga);
                    break;
                }
                case BinMode::ScalarB: {
                    Tensor ga = Tensor::uninit(g.shape());
                    K().scale(1.0 / bc.val.scalar_value(), g.data(), ga.raw(), g.size());
                    gs.accum(an, ga);
                    break;
                }
                case BinMode::ScalarA: {
                    Tensor inv = Tensor::uninit(g.shape());
                    double* p = inv.raw();
                    for (std::size_t i = 0; i < g.size(); ++i) p[i] = 1.0 / bc.val.data()[i];
                    gs.accum(an, Tensor::scalar(K().dot(g.data(), inv.data(), g.size())));
                    break;
                }
                case BinMode::WBcastB: {
                    Tensor ga = Tensor::uninit(ac.shape());
                    double* p = ga.raw();
                    for (int r = 0; r < rows; ++r)
                        K().scale(1.0 / bc.val.data()[r], g.data() + std::size_t(r) * w,
                                  p + std::size_t(r) * w, std::size_t(w));
                    gs.accum(an, ga);
                    break;
                }
                default:
                    break;
            }
        }
        if (bn >= 0) {
            // d/db (a/b) = -out/b
            Tensor tmp = Tensor::uninit(g.shape());
            K().mul(g.data(), oc.data(), tmp.raw(), g.size());
            switch (m) {
                case BinMode::Same: {
                    Tensor gb = Tensor::uninit(g.shape());
                    K().div(tmp.data(), bc.val.data(), gb.raw(), g.size());
                    K().scale(-1.0, gb.data(), gb.raw(), g.size());
                    gs.accum(bn, gb);
                    break;
                }
                case BinMode::ScalarB:
                    gs.accum(bn, Tensor::scalar(-K().sum(tmp.data(), tmp.size()) / bc.val.scalar_value()));
                    break;
                case BinMode::ScalarA: {
                    Tensor gb = Tensor::uninit(g.shape());
                    K().div(tmp.data(), bc.val.data(), gb.raw(), g.size());
                    K().scale(-1.0, gb.data(), gb.raw(), g.size());
                    gs.accum(bn, gb);
                    break;
                }
                case BinMode::WBcastB: {
                    Tensor r = reduce_to_wb(tmp);
                    double* p = r.raw();
                    for (int q = 0; q < rows; ++q) p[q] = -p[q] / bc.val.data()[q];
                    gs.accum(bn, r);
                    break;
                }
                default:
                    break;
            }
        }
    });
}

DiffVar scale(Tape& t, const DiffVar& a, double s) {
    Tensor out = Tensor::uninit(a.shape());
    K().scale(s, a.val.data(), out.raw(), out.size());
    int an = a.node;
    if (an < 0) return constant(std::move(out));
    return t.record(std::move(out), "scale", [an, s](const Tensor& g, GradStore& gs) {
        Tensor ga = Tensor::uninit(g.shape());
        K().scale(s, g.data(), ga.raw(), g.size());
        gs.accum(an, ga);
    });
}

DiffVar add_scalar(Tape& t, const DiffVar& a, double s) {
    Tensor out = Tensor::uninit(a.shape());
    double* o = out.raw();
    for (std::size_t i = 0; i < out.size(); ++i) o[i] = a.val.data()[i] + s;
    int an = a.node;
    if (an < 0) return constant(std::move(out));
    return t.record(std::move(out), "add_scalar",
                    [an](const Tensor& g, GradStore& gs) { gs.accum(an, g); });
}

DiffVar neg(Tape& t, const DiffVar& a) { return scale(t, a, -1.0); }

DiffVar vexp(Tape& t, const DiffVar& a) {
    Tensor out = Tensor::uninit(a.shape());
    K().vexp(a.val.data(), out.raw(), out.size());
    int an = a.node;
    if (an < 0) return constant(std::move(out));
    Tensor oc = out;
    return t.record(std::move(out), "exp", [an, oc](const Tensor& g, GradStore& gs) {
        Tensor ga = Tensor::uninit(g.shape());
        K().mul(g.data(), oc.data(), ga.raw(), g.size());
        gs.accum(an, ga);
    });
}

DiffVar vsqrt(Tape& t, const DiffVar& a) {
    Tensor out = Tensor::uninit(a.shape());
    K().vsqrt(a.val.data(), out.raw(), out.size());
    int an = a.node;
    if (an < 0) return constant(std::move(out));
    Tensor oc = out;
    return t.record(std::move(out), "sqrt", [an, oc](const Tensor& g, GradStore& gs) {
        Tensor ga = Tensor::uninit(g.shape());
        double* p = ga.raw();
        for (std::size_t i = 0; i < g.size(); ++i) p[i] = 0.5 * g.data()[i] / oc.data()[i];
        gs.accum(an, ga);
    });
}

DiffVar vsigmoid(Tape& t, const DiffVar& a) {
    Tensor out = Tensor::uninit(a.shape());
    K().vsigmoid(a.val.data(), out.raw(), out.size());
    int an = a.node;
    if (an < 0) return constant(std::move(out));
    Tensor oc = out;
    return t.record(std::move(out), "sigmoid", [an, oc](const Tensor& g, GradStore& gs) {
        Tensor ga = Tensor::uninit(g.shape());
        double* p = ga.raw();
        for (std::size_t i = 0; i < g.size(); ++i) {
            double y = oc.data()[i];
            p[i] = g.data()[i] * y * (1.0 - y);
        }
        gs.accum(an, ga);
    });
}

DiffVar vsin(Tape& t, const DiffVar& a) {
    Tensor out = Tensor::uninit(a.shape());
    double* o = out.raw();
    for (std::size_t i = 0; i < out.size(); ++i) o[i] = std::sin(a.val.data()[i]);
    int an = a.node;
    if (an < 0) return constant(std::move(out));
    DiffVar ac = a;
    return t.record(std::move(out), "sin", [an, ac](const Tensor& g, GradStore& gs) {
        Tensor ga = Tensor::uninit(g.shape());
        double* p = ga.raw();
        for (std::size_t i = 0; i < g.size(); ++i) p[i] = g.data()[i] * std::cos(ac.val.data()[i]);
        gs.accum(an, ga);
    });
}

DiffVar vcos(Tape& t, const DiffVar& a) {
    Tensor out = Tensor::uninit(a.shape());
    double* o = out.raw();
    for (std::size_t i = 0; i < out.size(); ++i) o[i] = std::cos(a.val.data()[i]);
    int an = a.node;
    if (an < 0) return constant(std::move(out));
    DiffVar ac = a;
    return t.record(std::move(out), "cos", [an, ac](const Tensor& g, GradStore& gs) {
        Tensor ga = Tensor::uninit(g.shape());
        double* p = ga.raw();
        for (std::size_t i = 0; i < g.size(); ++i) p[i] = -g.data()[i] * std::sin(ac.val.data()[i]);
        gs.accum(an, ga);
    });
}

DiffVar vatan2(Tape& t, const DiffVar& y, const DiffVar& x) {
    check(y.shape() == x.shape(), "atan2: shape mismatch");
    Tensor out = Tensor::uninit(y.shape());
    double* o = out.raw();
    for (std::size_t i = 0; i < out.size(); ++i) o[i] = std::atan2(y.val.data()[i], x.val.data()[i]);
    int yn = y.node, xn = x.node;
    if (yn < 0 && xn < 0) return constant(std::move(out));
    DiffVar yc = y, xc = x;
    return t.record(std::move(out), "atan2", [yn, xn, yc, xc](const Tensor& g, GradStore& gs) {
        const std::size_t n = g.size();
        if (yn >= 0) {
            Tensor gy = Tensor::uninit(g.shape());
            double* p = gy.raw();
            for (std::size_t i = 0; i < n; ++i) {
                double yy = yc.val.data()[i], xx = xc.val.data()[i];
                p[i] = g.data()[i] * xx / (xx * xx + yy * yy);
            }
            gs.accum(yn, gy);
        }
        if (xn >= 0) {
            Tensor gx = Tensor::uninit(g.shape());
            double* p = gx.raw();
            for (std::size_t i = 0; i < n; ++i) {
                double yy = yc.val.data()[i], xx = xc.val.data()[i];
                p[i] = -g.data()[i] * yy / (xx * xx + yy * yy);
            }
            gs.accum(xn, gx);
        }
    });
}

DiffVar silu(Tape& t, const DiffVar& a) { return mul(t, a, vsigmoid(t, a)); }

DiffVar reduce_sum(Tape& t, const DiffVar& a) {
    Tensor out = Tensor::scalar(K().sum(a.val.data(), a.val.size()));
    int an = a.node;
    Shape as = a.shape();
    if (an < 0) return constant(std::move(out));
    return t.record(std::move(out), "reduce_sum", [an, as](const Tensor& g, GradStore& gs) {
        gs.accum(an, Tensor::full(as, g.scalar_value()));
    });
}

DiffVar reduce_mean(Tape& t, const DiffVar& a) {
    return scale(t, reduce_sum(t, a), 1.0 / double(a.val.size()));
}

DiffVar rowsum_w(Tape& t, const DiffVar& a) {
    const int rows = a.shape().c * a.shape().h, w = a.shape().w;
    Tensor out = Tensor::uninit({a.shape().c, a.shape().h, 1});
    double* o = out.raw();
    for (int r = 0; r < rows; ++r) o[r] = K().sum(a.val.data() + std::size_t(r) * w, std::size_t(w));
    int an = a.node;
    Shape as = a.shape();
    if (an < 0) return constant(std::move(out));
    return t.record(std::move(out), "rowsum_w", [an, as](const Tensor& g, GradStore& gs) {
        Tensor ga = Tensor::uninit(as);
        double* p = ga.raw();
        const int rows = as.c * as.h, w = as.w;
        for (int r = 0; r < rows; ++r)
            for (int i = 0; i < w; ++i) p[std::size_t(r) * w + i] = g.data()[r];
        gs.accum(an, ga);
    });
}

DiffVar reduce_rows_sum(Tape& t, const DiffVar& a) {
    check(a.shape().c == 1, "reduce_rows_sum expects (1,h,w)");
    const int h = a.shape().h, w = a.shape().w;
    Tensor out = Tensor::zeros({1, 1, w});
    double* o = out.raw();
    for (int j = 0; j < h; ++j) K().axpy(1.0, a.val.data() + std::size_t(j) * w, o, std::size_t(w));
    int an = a.node;
    if (an < 0) return constant(std::move(out));
    return t.record(std::move(out), "reduce_rows_sum", [an, h, w](const Tensor& g, GradStore& gs) {
        Tensor ga = Tensor::uninit({1, h, w});
        double* p = ga.raw();
        for (int j = 0; j < h; ++j) std::memcpy(p + std::size_t(j) * w, g.data(), sizeof(double) * w);
        gs.accum(an, ga);
    });
}

DiffVar broadcast_rows(Tape& t, const DiffVar& a, int h) {
    check(a.shape().c == 1 && a.shape().h == 1, "broadcast_rows expects (1,1,w)");
    const int w = a.shape().w;
    Tensor out = Tensor::uninit({1, h, w});
    double* o = out.raw();
    for (int j = 0; j < h; ++j) std::memcpy(o + std::size_t(j) * w, a.val.data(), sizeof(double) * w);
    int an = a.node;
    if (an < 0) return constant(std::move(out));
    return t.record(std::move(out), "broadcast_rows", [an, h, w](const Tensor& g, GradStore& gs) {
        Tensor ga = Tensor::zeros({1, 1, w});
        double* p = ga.raw();
        for (int j = 0; j < h; ++j) K().axpy(1.0, g.data() + std::size_t(j) * w, p, std::size_t(w));
        gs.accum(an, ga);
    });
}

DiffVar reshape(Tape& t, const DiffVar& a, Shape s) {
    check(s.count() == a.val.size(), "reshape: element count mismatch");
    Tensor out = Tensor::from(s, std::vector<double>(a.val.data(), a.val.data() + a.val.size()));
    int an = a.node;
    Shape as = a.shape();
    if (an < 0) return constant(std::move(out));
    return t.record(std::move(out), "reshape", [an, as](const Tensor& g, GradStore& gs) {
        gs.accum(an, Tensor::from(as, std::vector<double>(g.data(), g.data() + g.size())));
    });
}

DiffVar crop(Tape& t, const DiffVar& a, int c0, int cn, int j0, int jn, int i0, int in) {
    const Shape as = a.shape();
    check(c0 >= 0 && c0 + cn <= as.c && j0 >= 0 && j0 + jn <= as.h && i0 >= 0 && i0 + in <= as.w,
          "crop: window out of range");
    Tensor out = Tensor::uninit({cn, jn, in});
    double* o = out.raw();
    for (int c = 0; c < cn; ++c)
        for (int j = 0; j < jn; ++j)
            std::memcpy(o + (std::size_t(c) * jn + j) * in,
                        a.val.plane(c0 + c) + std::size_t(j0 + j) * as.w + i0, sizeof(double) * in);
    int an = a.node;
    if (an < 0) return constant(std::move(out));
    return t.record(std::move(out), "crop", [an, as, c0, cn, j0, jn, i0, in](const Tensor& g, GradStore& gs) {
        Tensor ga = Tensor::zeros(as);
        double* p = ga.raw();
        for (int c = 0; c < cn; ++c)
            for (int j = 0; j < jn; ++j)
                std::memcpy(p + (std::size_t(c0 + c) * as.h + (j0 + j)) * as.w + i0,
                            g.plane(c) + std::size_t(j) * in, sizeof(double) * in);
        gs.accum(an, ga);
    });
}

DiffVar pad2d(Tape& t, const DiffVar& a, int top, int bottom, int left, int right) {
    const Shape as = a.shape();
    Shape os{as.c, as.h + top + bottom, as.w + left + right};
    Tensor out = Tensor::zeros(os);
    double* o = out.raw();
    for (int c = 0; c < as.c; ++c)
        for (int j = 0; j < as.h; ++j)
            std::memcpy(o + (std::size_t(c) * os.h + (j + top)) * os.w + left,
                        a.val.plane(c) + std::size_t(j) * as.w, sizeof(double) * as.w);
    int an = a.node;
    if (an < 0) return constant(std::move(out));
    return t.record(std::move(out), "pad2d", [an, as, os, top, left](const Tensor& g, GradStore& gs) {
        Tensor ga = Tensor::uninit(as);
        double* p = ga.raw();
        for (int c = 0; c < as.c; ++c)
            for (int j = 0; j < as.h; ++j)
                std::memcpy(p + (std::size_t(c) * as.h + j) * as.w,
                            g.plane(c) + std::size_t(j + top) * os.w + left, sizeof(double) * as.w);
        gs.accum(an, ga);
    });
}

DiffVar concat_ch(Tape& t, const DiffVar& a, const DiffVar& b) {
    const Shape as = a.shape(), bs = b.shape();
    check(as.h == bs.h && as.w == bs.w, "concat_ch: spatial shape mismatch");
    Tensor out = Tensor::uninit({as.c + bs.c, as.h, as.w});
    std::memcpy(out.raw(), a.val.data(), sizeof(double) * a.val.size());
    std::memcpy(out.raw() + a.val.size(), b.val.data(), sizeof(double) * b.val.size());
    int an = a.node, bn = b.node;
    if (an < 0 && bn < 0) return constant(std::move(out));
    return t.record(std::move(out), "concat_ch", [an, bn, as, bs](const Tensor& g, GradStore& gs) {
        if (an >= 0) {
            Tensor ga = Tensor::from(as, std::vector<double>(g.data(), g.data() + as.count()));
            gs.accum(an, ga);
        }
        if (bn >= 0) {
            Tensor gb = Tensor::from(bs,
                                     std::vector<double>(g.data() + as.count(), g.data() + g.size()));
            gs.accum(bn, gb);
        }
    });
}

DiffVar concat_w(Tape& t, const DiffVar& a, const DiffVar& b) {
    const Shape as = a.shape(), bs = b.shape();
    check(as.c == bs.c && as.h == bs.h, "concat_w: row shape mismatch");
    Shape os{as.c, as.h, as.w + bs.w};
    Tensor out = Tensor::uninit(os);
    double* o = out.raw();
    const int rows = as.c * as.h;
    for (int r = 0; r < rows; ++r) {
        std::memcpy(o + std::size_t(r) * os.w, a.val.data() + std::size_t(r) * as.w,
                    sizeof(double) * as.w);
        std::memcpy(o + std::size_t(r) * os.w + as.w, b.val.data() + std::size_t(r) * bs.w,
                    sizeof(double) * bs.w);
    }
    int an = a.node, bn = b.node;
    if (an < 0 && bn < 0) return constant(std::move(out));
    return t.record(std::move(out), "concat_w", [an, bn, as, bs, os](const Tensor& g, GradStore& gs) {
        const int rows = as.c * as.h;
        if (an >= 0) {
            Tensor ga = Tensor::uninit(as);
            double* p = ga.raw();
            for (int r = 0; r < rows; ++r)
                std::memcpy(p + std::size_t(r) * as.w, g.data() + std::size_t(r) * os.w,
                            sizeof(double) * as.w);
            gs.accum(an, ga);
        }
        if (bn >= 0) {
            Tensor gb = Tensor::uninit(bs);
            double* p = gb.raw();
            for (int r = 0; r < rows; ++r)
                std::memcpy(p + std::size_t(r) * bs.w, g.data() + std::size_t(r) * os.w + as.w,
                            sizeof(double) * bs.w);
            gs.accum(bn, gb);
        }
    });
}

DiffVar gather_rows(Tape& t, const DiffVar& a, std::vector<int> idx) {
    const Shape as = a.shape();
    check(as.c == 1, "gather_rows expects (1,n,w)");
    const int w = as.w;
    Tensor out = Tensor::uninit({1, int(idx.size()), w});
    double* o = out.raw();
    for (std::size_t r = 0; r < idx.size(); ++r) {
        check(idx[r] >= 0 && idx[r] < as.h, "gather_rows: index out of range");
        std::memcpy(o + r * w, a.val.data() + std::size_t(idx[r]) * w, sizeof(double) * w);
    }
    int an = a.node;
    if (an < 0) return constant(std::move(out));
    return t.record(std::move(out), "gather_rows",
                    [an, as, idx = std::move(idx)](const Tensor& g, GradStore& gs) {
                        Tensor ga = Tensor::zeros(as);
                        double* p = ga.raw();
                        const int w = as.w;
                        for (std::size_t r = 0; r < idx.size(); ++r)
                            K().axpy(1.0, g.data() + r * w, p + std::size_t(idx[r]) * w, std::size_t(w));
                        gs.accum(an, ga);
                    });
}

DiffVar scatter_add_rows(Tape& t, const DiffVar& a, std::vector<int> idx, int n) {
    const Shape as = a.shape();
    check(as.c == 1 && as.h == int(idx.size()), "scatter_add_rows: index count mismatch");
    const int w = as.w;
    Tensor out = Tensor::zeros({1, n, w});
    double* o = out.raw();
    for (std::size_t r = 0; r < idx.size(); ++r) {
        check(idx[r] >= 0 && idx[r] < n, "scatter_add_rows: index out of range");
        K().axpy(1.0, a.val.data() + r * w, o + std::size_t(idx[r]) * w, std::size_t(w));
    }
    int an = a.node;
    if (an < 0) return constant(std::move(out));
    return t.record(std::move(out), "scatter_add_rows",
                    [an, as, idx = std::move(idx)](const Tensor& g, GradStore& gs) {
                        Tensor ga = Tensor::uninit(as);
                        double* p = ga.raw();
                        const int w = as.w;
                        for (std::size_t r = 0; r < idx.size(); ++r)
                            std::memcpy(p + r * w, g.data() + std::size_t(idx[r]) * w, sizeof(double) * w);
                        gs.accum(an, ga);
                    });
}

DiffVar softmin_rows(Tape& t, const DiffVar& d, double temp) {
    check(temp > 0.0, "softmin_rows: temperature must be positive");
    const Shape ds = d.shape();
    const int rows = ds.c * ds.h, w = ds.w;
    Tensor out = Tensor::uninit(ds);
    double* o = out.raw();
    for (int r = 0; r < rows; ++r) {
        const double* row = d.val.data() + std::size_t(r) * w;
        double* orow = o + std::size_t(r) * w;
        double m = row[0];
        for (int i = 1; i < w; ++i) m = std::min(m, row[i]);
        for (int i = 0; i < w; ++i) orow[i] = (m - row[i]) / temp;
        K().vexp(orow, orow, std::size_t(w));
        double s = K().sum(orow, std::size_t(w));
        K().scale(1.0 / s, orow, orow, std::size_t(w));
    }
    int dn = d.node;
    if (dn < 0) return constant(std::move(out));
    Tensor oc = out;
    return t.record(std::move(out), "softmin_rows", [dn, oc, temp](const Tensor& g, GradStore& gs) {
        const int rows = oc.c() * oc.h(), w = oc.w();
        Tensor gd = Tensor::uninit(oc.shape());
        double* p = gd.raw();
        for (int r = 0; r < rows; ++r) {
            const double* wrow = oc.data() + std::size_t(r) * w;
            const double* grow = g.data() + std::size_t(r) * w;
            double dot = K().dot(wrow, grow, std::size_t(w));
            double* prow = p + std::size_t(r) * w;
            for (int i = 0; i < w; ++i) prow[i] = wrow[i] * (dot - grow[i]) / temp;
        }
        gs.accum(dn, gd);
    });
}

DiffVar sqdist_points_rows(Tape& t, const Tensor& pts, const DiffVar& q) {
    check(pts.w() == 2 && q.shape().w == 2 && q.shape().c == 1, "sqdist: expects (*,2) layouts");
    const int m = pts.h(), k = q.shape().h;
    Tensor out = Tensor::uninit({1, m, k});
    double* o = out.raw();
    for (int i = 0; i < m; ++i) {
        const double px = pts.data()[2 * i], py = pts.data()[2 * i + 1];
        double* orow = o + std::size_t(i) * k;
        for (int j = 0; j < k; ++j) {
            double dx = px - q.val.data()[2 * j];
            double dy = py - q.val.data()[2 * j + 1];
            orow[j] = dx * dx + dy * dy;
        }
    }
    int qn = q.node;
    if (qn < 0) return constant(std::move(out));
    DiffVar qc = q;
    Tensor pc = pts;
    return t.record(std::move(out), "sqdist_pr", [qn, qc, pc, m, k](const Tensor& g, GradStore& gs) {
        Tensor gq = Tensor::zeros({1, k, 2});
        double* p = gq.raw();
        for (int i = 0; i < m; ++i) {
            const double px = pc.data()[2 * i], py = pc.data()[2 * i + 1];
            const double* grow = g.data() + std::size_t(i) * k;
            for (int j = 0; j < k; ++j) {
                double gv = grow[j];
                p[2 * j] += gv * 2.0 * (qc.val.data()[2 * j] - px);
                p[2 * j + 1] += gv * 2.0 * (qc.val.data()[2 * j + 1] - py);
            }
        }
        gs.accum(qn, gq);
    });
}

DiffVar sqdist_rows_points(Tape& t, const DiffVar& q, const Tensor& pts) {
    check(pts.w() == 2 && q.shape().w == 2 && q.shape().c == 1, "sqdist: expects (*,2) layouts");
    const int m = pts.h(), k = q.shape().h;
    Tensor out = Tensor::uninit({1, k, m});
    double* o = out.raw();
    for (int j = 0; j < k; ++j) {
        const double qx = q.val.data()[2 * j], qy = q.val.data()[2 * j + 1];
        double* orow = o + std::size_t(j) * m;
        for (int i = 0; i < m; ++i) {
            double dx = qx - pts.data()[2 * i];
            double dy = qy - pts.data()[2 * i + 1];
            orow[i] = dx * dx + dy * dy;
        }
    }
    int qn = q.node;
    if (qn < 0) return constant(std::move(out));
    DiffVar qc = q;
    Tensor pc = pts;
    return t.record(std::move(out), "sqdist_rp", [qn, qc, pc, m, k](const Tensor& g, GradStore& gs) {
        Tensor gq = Tensor::zeros({1, k, 2});
        double* p = gq.raw();
        for (int j = 0; j < k; ++j) {
            const double qx = qc.val.data()[2 * j], qy = qc.val.data()[2 * j + 1];
            const double* grow = g.data() + std::size_t(j) * m;
            double ax = 0, ay = 0;
            for (int i = 0; i < m; ++i) {
                ax += grow[i] * 2.0 * (qx - pc.data()[2 * i]);
                ay += grow[i] * 2.0 * (qy - pc.data()[2 * i + 1]);
            }
            p[2 * j] = ax;
            p[2 * j + 1] = ay;
        }
        gs.accum(qn, gq);
    });
}

namespace {
inline void flip9(const double* k, double* f) {
    for (int i = 0; i < 9; ++i) f[i] = k[8 - i];
}
} // namespace

DiffVar conv3x3(Tape& t, const DiffVar& x, const DiffVar& w, const DiffVar& bias, kern::Pad pad) {
    const Shape xs = x.shape(), ws = w.shape();
    check(ws.c >= 1 && ws.h == xs.c && ws.w == 9, "conv3x3: weight shape must be (O,C,9)");
    const int C = xs.c, H = xs.h, W = xs.w, O = ws.c;
    const bool has_bias = bias.val.defined();
    if (has_bias) check(bias.shape().c == O && bias.shape().plane() == 1, "conv3x3: bias shape");
    Tensor out = Tensor::uninit({O, H, W});
    double* o = out.raw();
    for (int oc = 0; oc < O; ++oc) {
        for (int c = 0; c < C; ++c)
            K().corr3x3(x.val.plane(c), H, W, w.val.data() + (std::size_t(oc) * C + c) * 9,
                        o + std::size_t(oc) * H * W, pad, c > 0);
        if (has_bias) {
            double b = bias.val.data()[oc];
            double* pl = o + std::size_t(oc) * H * W;
            for (std::size_t i = 0; i < std::size_t(H) * W; ++i) pl[i] += b;
        }
    }
    int xn = x.node, wn = w.node, bn = bias.val.defined() ? bias.node : -1;
    if (xn < 0 && wn < 0 && bn < 0) return constant(std::move(out));
    DiffVar xc = x, wc = w;
    return t.record(std::move(out), "conv3x3", [xn, wn, bn, xc, wc, pad, C, H, W, O](const Tensor& g,
                                                                                     GradStore& gs) {
        if (xn >= 0) {
            Tensor gx = Tensor::uninit({C, H, W});
            double* p = gx.raw();
            double f9[9];
            for (int c = 0; c < C; ++c)
                for (int oc = 0; oc < O; ++oc) {
                    flip9(wc.val.data() + (std::size_t(oc) * C + c) * 9, f9);
                    K().corr3x3(g.plane(oc), H, W, f9, p + std::size_t(c) * H * W, pad, oc > 0);
                }
            gs.accum(xn, gx);
        }
        if (wn >= 0) {
            Tensor gw = Tensor::zeros({O, C, 9});
            double* p = gw.raw();
            for (int oc = 0; oc < O; ++oc)
                for (int c = 0; c < C; ++c)
                    K().corr3x3_wgrad(xc.val.plane(c), g.plane(oc), H, W, pad,
                                      p + (std::size_t(oc) * C + c) * 9);
            gs.accum(wn, gw);
        }
        if (bn >= 0) {
            Tensor gb = Tensor::uninit({O, 1, 1});
            double* p = gb.raw();
            for (int oc = 0; oc < O; ++oc) p[oc] = K().sum(g.plane(oc), std::size_t(H) * W);
            gs.accum(bn, gb);
        }
    });
}

DiffVar avgpool2(Tape& t, const DiffVar& x) {
    const Shape xs = x.shape();
    check(xs.h % 2 == 0 && xs.w % 2 == 0, "avgpool2: spatial dims must be even");
    const int C = xs.c, H = xs.h, W = xs.w, oh = H / 2, ow = W / 2;
    Tensor out = Tensor::uninit({C, oh, ow});
    double* o = out.raw();
    for (int c = 0; c < C; ++c) {
        const double* in = x.val.plane(c);
        double* op = o + std::size_t(c) * oh * ow;
        for (int j = 0; j < oh; ++j)
            for (int i = 0; i < ow; ++i) {
                const double* r0 = in + std::size_t(2 * j) * W + 2 * i;
                const double* r1 = r0 + W;
                op[std::size_t(j) * ow + i] = 0.25 * ((r0[0] + r0[1]) + (r1[0] + r1[1]));
            }
    }
    int xn = x.node;
    if (xn < 0) return constant(std::move(out));
    return t.record(std::move(out), "avgpool2", [xn, C, H, W, oh, ow](const Tensor& g, GradStore& gs) {
        Tensor gx = Tensor::uninit({C, H, W});
        double* p = gx.raw();
        for (int c = 0; c < C; ++c) {
            const double* gp = g.plane(c);
            double* xp = p + std::size_t(c) * H * W;
            for (int j = 0; j < oh; ++j)
                for (int i = 0; i < ow; ++i) {
                    double v = 0.25 * gp[std::size_t(j) * ow + i];
                    double* r0 = xp + std::size_t(2 * j) * W + 2 * i;
                    r0[0] = v;
                    r0[1] = v;
                    r0[W] = v;
                    r0[W + 1] = v;
                }
        }
        gs.accum(xn, gx);
    });
}

namespace {

// separable half-pixel bilinear x2: out[2i] = 0.75 in[i] + 0.25 in[i-1],
// out[2i+1] = 0.75 in[i] + 0.25 in[i+1]; ends clamp or wrap per pad mode
inline void up2_src(int o, int n, kern::Pad pad, int& s0, int& s1, double& w0, double& w1) {
    int i = o / 2;
    if (o % 2 == 0) {
        s0 = i;
        s1 = i > 0 ? i - 1 : (pad == kern::Pad::Periodic ? n - 1 : 0);
    } else {
        s0 = i;
        s1 = i + 1 < n ? i + 1 : (pad == kern::Pad::Periodic ? 0 : n - 1);
    }
    w0 = 0.75;
    w1 = 0.25;
}

} // namespace

DiffVar upsample2(Tape& t, const DiffVar& x, kern::Pad pad) {
    const Shape xs = x.shape();
    const int C = xs.c, H = xs.h, W = xs.w, oh = 2 * H, ow = 2 * W;
    Tensor out = Tensor::uninit({C, oh, ow});
    double* o = out.raw();
    int s0, s1;
    double w0, w1;
    // rows pass into scratch, then cols
    std::vector<double> tmp(std::size_t(oh) * W);
    for (int c = 0; c < C; ++c) {
        const double* in = x.val.plane(c);
        for (int j = 0; j < oh; ++j) {
            up2_src(j, H, pad, s0, s1, w0, w1);
            const double* a = in + std::size_t(s0) * W;
            const double* b = in + std::size_t(s1) * W;
            double* r = tmp.data() + std::size_t(j) * W;
            for (int i = 0; i < W; ++i) r[i] = w0 * a[i] + w1 * b[i];
        }
        double* op = o + std::size_t(c) * oh * ow;
        for (int j = 0; j < oh; ++j) {
            const double* r = tmp.data() + std::size_t(j) * W;
            double* orow = op + std::size_t(j) * ow;
            for (int i = 0; i < ow; ++i) {
                up2_src(i, W, pad, s0, s1, w0, w1);
                orow[i] = w0 * r[s0] + w1 * r[s1];
            }
        }
    }
    int xn = x.node;
    if (xn < 0) return constant(std::move(out));
    return t.record(std::move(out), "upsample2", [xn, pad, C, H, W, oh, ow](const Tensor& g, GradStore& gs) {
        Tensor gx = Tensor::zeros({C, H, W});
        double* p = gx.raw();
        int s0, s1;
        double w0, w1;
        std::vector<double> tmp(std::size_t(oh) * W);
        for (int c = 0; c < C; ++c) {
            std::fill(tmp.begin(), tmp.end(), 0.0);
            const double* gp = g.plane(c);
            // adjoint of cols pass
            for (int j = 0; j < oh; ++j) {
                const double* grow = gp + std::size_t(j) * ow;
                double* r = tmp.data() + std::size_t(j) * W;
                for (int i = 0; i < ow; ++i) {
                    up2_src(i, W, pad, s0, s1, w0, w1);
                    r[s0] += w0 * grow[i];
                    r[s1] += w1 * grow[i];
                }
            }
            // adjoint of rows pass
            double* xp = p + std::size_t(c) * H * W;
            for (int j = 0; j < oh; ++j) {
                up2_src(j, H, pad, s0, s1, w0, w1);
                const double* r = tmp.data() + std::size_t(j) * W;
                K().axpy(w0, r, xp + std::size_t(s0) * W, std::size_t(W));
                K().axpy(w1, r, xp + std::size_t(s1) * W, std::size_t(W));
            }
        }
        gs.accum(xn, gx);
    });
}

DiffVar center_to_facex(Tape& t, const DiffVar& a) {
    const Shape as = a.shape();
    check(as.c == 1, "center_to_facex expects (1,ny,nx)");
    const int ny = as.h, nx = as.w;
    Tensor out = Tensor::uninit({1, ny, nx + 1});
    double* o = out.raw();
    for (int j = 0; j < ny; ++j) {
        const double* r = a.val.data() + std::size_t(j) * nx;
        double* orow = o + std::size_t(j) * (nx + 1);
        orow[0] = r[0];
        for (int i = 1; i < nx; ++i) orow[i] = 0.5 * (r[i - 1] + r[i]);
        orow[nx] = r[nx - 1];
    }
    int an = a.node;
    if (an < 0) return constant(std::move(out));
    return t.record(std::move(out), "center_to_facex", [an, ny, nx](const Tensor& g, GradStore& gs) {
        Tensor ga = Tensor::zeros({1, ny, nx});
        double* p = ga.raw();
        for (int j = 0; j < ny; ++j) {
            const double* grow = g.data() + std::size_t(j) * (nx + 1);
            double* prow = p + std::size_t(j) * nx;
            prow[0] += grow[0];
            for (int i = 1; i < nx; ++i) {
                prow[i - 1] += 0.5 * grow[i];
                prow[i] += 0.5 * grow[i];
            }
            prow[nx - 1] += grow[nx];
        }
        gs.accum(an, ga);
    });
}

DiffVar center_to_facey(Tape& t, const DiffVar& a) {
    const Shape as = a.shape();
    check(as.c == 1, "center_to_facey expects (1,ny,nx)");
    const int ny = as.h, nx = as.w;
    Tensor out = Tensor::uninit({1, ny + 1, nx});
    double* o = out.raw();
    std::memcpy(o, a.val.data(), sizeof(double) * nx);
    for (int j = 1; j < ny; ++j) {
        const double* r0 = a.val.data() + std::size_t(j - 1) * nx;
        const double* r1 = a.val.data() + std::size_t(j) * nx;
        double* orow = o + std::size_t(j) * nx;
        for (int i = 0; i < nx; ++i) orow[i] = 0.5 * (r0[i] + r1[i]);
    }
    std::memcpy(o + std::size_t(ny) * nx, a.val.data() + std::size_t(ny - 1) * nx, sizeof(double) * nx);
    int an = a.node;
    if (an < 0) return constant(std::move(out));
    return t.record(std::move(out), "center_to_facey", [an, ny, nx](const Tensor& g, GradStore& gs) {
        Tensor ga = Tensor::zeros({1, ny, nx});
        double* p = ga.raw();
        K().axpy(1.0, g.data(), p, std::size_t(nx));
        for (int j = 1; j < ny; ++j) {
            K().axpy(0.5, g.data() + std::size_t(j) * nx, p + std::size_t(j - 1) * nx, std::size_t(nx));
            K().axpy(0.5, g.data() + std::size_t(j) * nx, p + std::size_t(j) * nx, std::size_t(nx));
        }
        K().axpy(1.0, g.data() + std::size_t(ny) * nx, p + std::size_t(ny - 1) * nx, std::size_t(nx));
        gs.accum(an, ga);
    });
}

DiffVar solve_spd(Tape& t, const Chol& chol, const DiffVar& rhs) {
    check(int(rhs.val.size()) == chol.dim(), "solve_spd: rhs size mismatch");
    Tensor out = Tensor::uninit(rhs.shape());
    chol.solve(rhs.val.data(), out.raw());
    int rn = rhs.node;
    if (rn < 0) return constant(std::move(out));
    const Chol* cp = &chol; // factor outlives the tape (owned by the episode/solver)
    return t.record(std::move(out), "solve_spd", [rn, cp](const Tensor& g, GradStore& gs) {
        Tensor gr = Tensor::uninit(g.shape());
        cp->solve(g.data(), gr.raw());
        gs.accum(rn, gr);
    });
}

DiffVar detach(const DiffVar& a) { return constant(a.val); }

DiffVar round_f32(Tape& t, const DiffVar& a) {
    Tensor out = Tensor::uninit(a.shape());
    double* o = out.raw();
    for (std::size_t i = 0; i < out.size(); ++i) o[i] = double(float(a.val.data()[i]));
    int an = a.node;
    if (an < 0) return constant(std::move(out));
    return t.record(std::move(out), "round_f32",
                    [an](const Tensor& g, GradStore& gs) { gs.accum(an, g); });
}

} // namespace finflow::ad
