#include "nst/autodiff.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace nst {

namespace {

Tape* common_tape(std::initializer_list<Var> vars) {
    Tape* t = nullptr;
    for (Var v : vars) {
        if (v.tape == nullptr) continue;
        if (t != nullptr && t != v.tape) {
            throw std::invalid_argument("operands belong to different tapes");
        }
        t = v.tape;
    }
    if (t == nullptr) throw std::invalid_argument("operation requires at least one tape variable");
    return t;
}

// Accumulates `g` into the gradient of `parent`, reducing to a scalar when
// the parent was broadcast.
void accumulate(Tape& t, int parent, const Tensor& g) {
    Tensor& buf = t.grad_buffer(parent);
    if (buf.same_shape(g)) {
        buf += g;
        return;
    }
    if (buf.size() == 1) {
        double s = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) s += g[i];
        buf[0] += s;
        return;
    }
    throw std::logic_error("gradient shape mismatch: " + shape_str(buf.shape()) + " vs " + shape_str(g.shape()));
}

}  // namespace

std::size_t Tape::check(Var v) const {
    if (v.tape != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
        throw std::invalid_argument("variable does not belong to this tape");
    }
    return static_cast<std::size_t>(v.id);
}

Var Tape::leaf(Tensor value) {
    nodes_.push_back(Node{std::move(value), Tensor{}, {-1, -1, -1, -1}, nullptr});
    return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::emit(Tensor value, std::initializer_list<Var> parents, BackFn back) {
    if (parents.size() > 4) throw std::logic_error("too many parents for tape node");
    Node node{std::move(value), Tensor{}, {-1, -1, -1, -1}, std::move(back)};
    std::size_t i = 0;
    for (Var p : parents) {
        check(p);
        node.parents[i++] = p.id;
    }
    nodes_.push_back(std::move(node));
    return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Tensor& Tape::grad_buffer(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty() && n.value.size() > 0) {
        n.grad = Tensor(n.value.shape());
    }
    return n.grad;
}

const Tensor& Tape::grad(Var v) {
    const std::size_t i = check(v);
    if (nodes_[i].grad.empty()) {
        nodes_[i].grad = Tensor(nodes_[i].value.shape());
    }
    return nodes_[i].grad;
}

void Tape::backward(Var root) {
    const std::size_t r = check(root);
    if (nodes_[r].value.size() != 1) {
        throw std::invalid_argument("backward root must be a size-1 node, got " +
                                    shape_str(nodes_[r].value.shape()));
    }
    for (Node& n : nodes_) n.grad = Tensor{};
    nodes_[r].grad = Tensor(nodes_[r].value.shape(), 1.0);
    for (std::size_t i = r + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.grad.empty() || !n.back) continue;
        n.back(*this, static_cast<int>(i));
    }
}

Var conv2d(Var input, Var kernel, Var bias, std::size_t stride, Padding padding) {
    Tape* t = common_tape({input, kernel, bias});
    if (padding == Padding::kSameReflect) {
        const Tensor& k = t->value(kernel);
        const std::size_t kh = k.extent(2), kw = k.extent(3);
        if (kh % 2 == 0 || kw % 2 == 0) {
            throw std::invalid_argument("same-reflect conv2d requires odd kernel extents, got " + shape_str(k.shape()));
        }
        Var padded = reflect_pad(input, (kh - 1) / 2, (kh - 1) / 2, (kw - 1) / 2, (kw - 1) / 2);
        return conv2d(padded, kernel, bias, stride, Padding::kValid);
    }
    Tensor out = conv2d_valid(t->value(input), t->value(kernel), bias.tape ? t->value(bias) : Tensor{}, stride);
    const bool has_bias = bias.tape != nullptr;
    auto back = [stride, has_bias](Tape& tp, int self) {
        const auto& par = tp.parents(self);
        const Tensor& x = tp.node_value(par[0]);
        const Tensor& k = tp.node_value(par[1]);
        conv2d_valid_backward(x, k, stride, tp.grad_buffer(self), &tp.grad_buffer(par[0]), &tp.grad_buffer(par[1]),
                              has_bias ? &tp.grad_buffer(par[2]) : nullptr);
    };
    if (has_bias) return t->emit(std::move(out), {input, kernel, bias}, back);
    return t->emit(std::move(out), {input, kernel}, back);
}

Var conv2d(Var input, Var kernel, std::size_t stride, Padding padding) {
    return conv2d(input, kernel, Var{}, stride, padding);
}

Var reflect_pad(Var input, std::size_t top, std::size_t bottom, std::size_t left, std::size_t right) {
    Tape* t = common_tape({input});
    Tensor out = reflect_pad(t->value(input), top, bottom, left, right);
    auto back = [top, bottom, left, right](Tape& tp, int self) {
        const int p = tp.parents(self)[0];
        reflect_pad_backward(tp.node_value(p).shape(), top, bottom, left, right, tp.grad_buffer(self),
                             &tp.grad_buffer(p));
    };
    return t->emit(std::move(out), {input}, back);
}

Var upsample_nearest(Var input, std::size_t factor) {
    Tape* t = common_tape({input});
    Tensor out = upsample_nearest(t->value(input), factor);
    auto back = [factor](Tape& tp, int self) {
        const int p = tp.parents(self)[0];
        upsample_nearest_backward(tp.node_value(p).shape(), factor, tp.grad_buffer(self), &tp.grad_buffer(p));
    };
    return t->emit(std::move(out), {input}, back);
}

Var relu(Var x) {
    Tape* t = common_tape({x});
    Tensor out = relu(t->value(x));
    auto back = [](Tape& tp, int self) {
        const int p = tp.parents(self)[0];
        const Tensor& xin = tp.node_value(p);
        const Tensor& g = tp.grad_buffer(self);
        Tensor& gx = tp.grad_buffer(p);
        for (std::size_t i = 0; i < gx.size(); ++i) {
            if (xin[i] > 0.0) gx[i] += g[i];
        }
    };
    return t->emit(std::move(out), {x}, back);
}

Var sigmoid(Var x) {
    Tape* t = common_tape({x});
    Tensor out = sigmoid(t->value(x));
    auto back = [](Tape& tp, int self) {
        const Tensor& y = tp.node_value(self);
        const Tensor& g = tp.grad_buffer(self);
        Tensor& gx = tp.grad_buffer(tp.parents(self)[0]);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
    };
    return t->emit(std::move(out), {x}, back);
}

Var add(Var a, Var b) {
    Tape* t = common_tape({a, b});
    Tensor out = add(t->value(a), t->value(b));
    auto back = [](Tape& tp, int self) {
        const Tensor& g = tp.grad_buffer(self);
        accumulate(tp, tp.parents(self)[0], g);
        accumulate(tp, tp.parents(self)[1], g);
    };
    return t->emit(std::move(out), {a, b}, back);
}

Var sub(Var a, Var b) {
    Tape* t = common_tape({a, b});
    Tensor out = sub(t->value(a), t->value(b));
    auto back = [](Tape& tp, int self) {
        const Tensor& g = tp.grad_buffer(self);
        accumulate(tp, tp.parents(self)[0], g);
        Tensor neg = g;
        neg *= -1.0;
        accumulate(tp, tp.parents(self)[1], neg);
    };
    return t->emit(std::move(out), {a, b}, back);
}

Var mul(Var a, Var b) {
    Tape* t = common_tape({a, b});
    Tensor out = mul(t->value(a), t->value(b));
    auto back = [](Tape& tp, int self) {
        const auto& par = tp.parents(self);
        const Tensor& av = tp.node_value(par[0]);
        const Tensor& bv = tp.node_value(par[1]);
        const Tensor& g = tp.grad_buffer(self);
        accumulate(tp, par[0], mul(g, bv));
        accumulate(tp, par[1], mul(g, av));
    };
    return t->emit(std::move(out), {a, b}, back);
}

Var scale(Var a, double s) {
    Tape* t = common_tape({a});
    Tensor out = scale(t->value(a), s);
    auto back = [s](Tape& tp, int self) {
        const Tensor& g = tp.grad_buffer(self);
        Tensor& ga = tp.grad_buffer(tp.parents(self)[0]);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s * g[i];
    };
    return t->emit(std::move(out), {a}, back);
}

Var add_scalar(Var a, double s) {
    Tape* t = common_tape({a});
    Tensor out = add_scalar(t->value(a), s);
    auto back = [](Tape& tp, int self) {
        accumulate(tp, tp.parents(self)[0], tp.grad_buffer(self));
    };
    return t->emit(std::move(out), {a}, back);
}

Var spatial_mean(Var x) {
    Tape* t = common_tape({x});
    Tensor out = spatial_mean(t->value(x));
    auto back = [](Tape& tp, int self) {
        const int p = tp.parents(self)[0];
        const Tensor& g = tp.grad_buffer(self);
        Tensor& gx = tp.grad_buffer(p);
        const std::size_t n = gx.extent(0), c = gx.extent(1), h = gx.extent(2), w = gx.extent(3);
        const double inv = 1.0 / static_cast<double>(h * w);
        for (std::size_t in_ = 0; in_ < n; ++in_) {
            for (std::size_t ic = 0; ic < c; ++ic) {
                const double gv = g.at2(in_, ic) * inv;
                double* plane = gx.data() + (in_ * c + ic) * h * w;
                for (std::size_t i = 0; i < h * w; ++i) plane[i] += gv;
            }
        }
    };
    return t->emit(std::move(out), {x}, back);
}

Var broadcast_spatial(Var nc, std::size_t h, std::size_t w) {
    Tape* t = common_tape({nc});
    const Tensor& v = t->value(nc);
    if (v.rank() != 2) throw std::invalid_argument("broadcast_spatial expects [N,C], got " + shape_str(v.shape()));
    const std::size_t n = v.extent(0), c = v.extent(1);
    Tensor out(Shape{n, c, h, w});
    for (std::size_t in_ = 0; in_ < n; ++in_) {
        for (std::size_t ic = 0; ic < c; ++ic) {
            double* plane = out.data() + (in_ * c + ic) * h * w;
            const double val = v.at2(in_, ic);
            for (std::size_t i = 0; i < h * w; ++i) plane[i] = val;
        }
    }
    auto back = [h, w](Tape& tp, int self) {
        const int p = tp.parents(self)[0];
        const Tensor& g = tp.grad_buffer(self);
        Tensor& gp = tp.grad_buffer(p);
        const std::size_t n = gp.extent(0), c = gp.extent(1);
        for (std::size_t in_ = 0; in_ < n; ++in_) {
            for (std::size_t ic = 0; ic < c; ++ic) {
                const double* plane = g.data() + (in_ * c + ic) * h * w;
                double s = 0.0;
                for (std::size_t i = 0; i < h * w; ++i) s += plane[i];
                gp.at2(in_, ic) += s;
            }
        }
    };
    return t->emit(std::move(out), {nc}, back);
}

Var broadcast_channels(Var cvec, std::size_t n, std::size_t h, std::size_t w) {
    Tape* t = common_tape({cvec});
    const Tensor& v = t->value(cvec);
    if (v.rank() != 1) throw std::invalid_argument("broadcast_channels expects [C], got " + shape_str(v.shape()));
    const std::size_t c = v.extent(0);
    Tensor out(Shape{n, c, h, w});
    for (std::size_t in_ = 0; in_ < n; ++in_) {
        for (std::size_t ic = 0; ic < c; ++ic) {
            double* plane = out.data() + (in_ * c + ic) * h * w;
            for (std::size_t i = 0; i < h * w; ++i) plane[i] = v[ic];
        }
    }
    auto back = [n, h, w](Tape& tp, int self) {
        const int p = tp.parents(self)[0];
        const Tensor& g = tp.grad_buffer(self);
        Tensor& gp = tp.grad_buffer(p);
        const std::size_t c = gp.extent(0);
        for (std::size_t in_ = 0; in_ < n; ++in_) {
            for (std::size_t ic = 0; ic < c; ++ic) {
                const double* plane = g.data() + (in_ * c + ic) * h * w;
                double s = 0.0;
                for (std::size_t i = 0; i < h * w; ++i) s += plane[i];
                gp[ic] += s;
            }
        }
    };
    return t->emit(std::move(out), {cvec}, back);
}

Var rsqrt(Var x) {
    Tape* t = common_tape({x});
    const Tensor& v = t->value(x);
    Tensor out = v;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / std::sqrt(out[i]);
    auto back = [](Tape& tp, int self) {
        const Tensor& y = tp.node_value(self);
        const Tensor& g = tp.grad_buffer(self);
        Tensor& gx = tp.grad_buffer(tp.parents(self)[0]);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += -0.5 * y[i] * y[i] * y[i] * g[i];
    };
    return t->emit(std::move(out), {x}, back);
}

Var sum(Var x) {
    Tape* t = common_tape({x});
    const Tensor& v = t->value(x);
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += v[i];
    auto back = [](Tape& tp, int self) {
        const double g = tp.grad_buffer(self)[0];
        Tensor& gx = tp.grad_buffer(tp.parents(self)[0]);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    };
    return t->emit(Tensor::scalar(s), {x}, back);
}

Var matvec(Var weight, Var x, Var bias) {
    Tape* t = common_tape({weight, x, bias});
    const Tensor& wv = t->value(weight);
    const Tensor& xv = t->value(x);
    const Tensor& bv = t->value(bias);
    if (wv.rank() != 2 || xv.rank() != 1 || bv.rank() != 1 || wv.extent(1) != xv.extent(0) ||
        wv.extent(0) != bv.extent(0)) {
        throw std::invalid_argument("matvec shape mismatch: " + shape_str(wv.shape()) + " x " + shape_str(xv.shape()) +
                                    " + " + shape_str(bv.shape()));
    }
    const std::size_t o = wv.extent(0), in = wv.extent(1);
    Tensor out(Shape{o});
    for (std::size_t r = 0; r < o; ++r) {
        double s = bv[r];
        const double* row = wv.data() + r * in;
        for (std::size_t j = 0; j < in; ++j) s += row[j] * xv[j];
        out[r] = s;
    }
    auto back = [o, in](Tape& tp, int self) {
        const auto& par = tp.parents(self);
        const Tensor& wv = tp.node_value(par[0]);
        const Tensor& xv = tp.node_value(par[1]);
        const Tensor& g = tp.grad_buffer(self);
        Tensor& gw = tp.grad_buffer(par[0]);
        Tensor& gx = tp.grad_buffer(par[1]);
        Tensor& gb = tp.grad_buffer(par[2]);
        for (std::size_t r = 0; r < o; ++r) {
            const double gr = g[r];
            gb[r] += gr;
            const double* row = wv.data() + r * in;
            double* grow = gw.data() + r * in;
            for (std::size_t j = 0; j < in; ++j) {
                grow[j] += gr * xv[j];
                gx[j] += gr * row[j];
            }
        }
    };
    return t->emit(std::move(out), {weight, x, bias}, back);
}

Var reshape(Var x, Shape shape) {
    Tape* t = common_tape({x});
    const Tensor& v = t->value(x);
    if (shape_size(shape) != v.size()) {
        throw std::invalid_argument("reshape to " + shape_str(shape) + " incompatible with " + shape_str(v.shape()));
    }
    Tensor out(std::move(shape), std::vector<double>(v.values().begin(), v.values().end()));
    auto back = [](Tape& tp, int self) {
        const Tensor& g = tp.grad_buffer(self);
        Tensor& gx = tp.grad_buffer(tp.parents(self)[0]);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
    };
    return t->emit(std::move(out), {x}, back);
}

Var slice1d(Var x, std::size_t offset, std::size_t len) {
    Tape* t = common_tape({x});
    const Tensor& v = t->value(x);
    if (v.rank() != 1 || offset + len > v.size()) {
        throw std::invalid_argument("slice1d [" + std::to_string(offset) + ", " + std::to_string(offset + len) +
                                    ") out of range for " + shape_str(v.shape()));
    }
    Tensor out(Shape{len});
    for (std::size_t i = 0; i < len; ++i) out[i] = v[offset + i];
    auto back = [offset, len](Tape& tp, int self) {
        const Tensor& g = tp.grad_buffer(self);
        Tensor& gx = tp.grad_buffer(tp.parents(self)[0]);
        for (std::size_t i = 0; i < len; ++i) gx[offset + i] += g[i];
    };
    return t->emit(std::move(out), {x}, back);
}

GradCheckReport grad_check(const ScalarFn& f, std::vector<Tensor> params, double h) {
    if (!(h >= 1e-7 && h <= 1e-3)) {
        throw std::invalid_argument("grad_check step h must lie in [1e-7, 1e-3]");
    }
    GradCheckReport report;

    std::vector<Tensor> analytic;
    {
        Tape tape;
        std::vector<Var> leaves;
        leaves.reserve(params.size());
        for (const Tensor& p : params) leaves.push_back(tape.leaf(p));
        Var out = f(tape, leaves);
        if (tape.value(out).size() != 1) {
            throw std::invalid_argument("grad_check function must return a scalar");
        }
        tape.backward(out);
        for (Var l : leaves) analytic.push_back(tape.grad(l));
    }

    auto eval = [&f, &params]() {
        Tape tape;
        std::vector<Var> leaves;
        leaves.reserve(params.size());
        for (const Tensor& p : params) leaves.push_back(tape.leaf(p));
        return tape.value(f(tape, leaves)).item();
    };

    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t i = 0; i < params[p].size(); ++i) {
            const double orig = params[p][i];
            params[p][i] = orig + h;
            const double fp = eval();
            params[p][i] = orig - h;
            const double fm = eval();
            params[p][i] = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm)) {
                report.all_finite = false;
                report.worst_param = p;
                report.worst_index = i;
                report.note = "non-finite value perturbing param " + std::to_string(p) + " element " +
                              std::to_string(i);
                report.max_rel_err = std::numeric_limits<double>::infinity();
                return report;
            }
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[p][i];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = p;
                report.worst_index = i;
            }
        }
    }
    return report;
}

}  // namespace nst
