#include "varibad/tape.hpp"

#include <algorithm>
#include <cmath>

namespace varibad {

Param& ParamStore::add(const std::string& name, int rows, int cols) {
    if (has(name)) throw std::invalid_argument("ParamStore: duplicate param " + name);
    params_.push_back(std::make_unique<Param>(name, rows, cols));
    return *params_.back();
}

Param& ParamStore::get(const std::string& name) {
    for (auto& p : params_)
        if (p->name == name) return *p;
    throw std::invalid_argument("ParamStore: no param " + name);
}

const Param& ParamStore::get(const std::string& name) const {
    for (auto& p : params_)
        if (p->name == name) return *p;
    throw std::invalid_argument("ParamStore: no param " + name);
}

bool ParamStore::has(const std::string& name) const {
    for (auto& p : params_)
        if (p->name == name) return true;
    return false;
}

void ParamStore::zero_grads() {
    for (auto& p : params_) p->grad.fill(0.0);
}

std::vector<Param*> ParamStore::all() {
    std::vector<Param*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
}

std::vector<const Param*> ParamStore::all() const {
    std::vector<const Param*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
}

// ---- Tape -----------------------------------------------------------------

namespace {

void check_finite(const Tensor& t, const char* op) {
    if (!t.all_finite()) throw std::runtime_error(std::string("non-finite output in op ") + op);
}

double softplus_s(double x) {
    // log(1+exp(x)) without overflow
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

}  // namespace

Var Tape::push(Node n) {
    if (ran_backward_) throw std::runtime_error("Tape: cannot record after backward");
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::g(int id) {
    if (grads_.size() < nodes_.size()) {
        grads_.resize(nodes_.size());
        has_grad_.resize(nodes_.size(), 0);
    }
    if (!has_grad_[id]) {
        grads_[id] = Tensor(nodes_[id].val.rows, nodes_[id].val.cols);
        has_grad_[id] = 1;
    }
    return grads_[id];
}

const Tensor& Tape::grad(Var v) const {
    if (!ran_backward_) throw std::runtime_error("Tape: grad before backward");
    if (v.id < 0 || static_cast<size_t>(v.id) >= grads_.size() || !has_grad_[v.id])
        throw std::runtime_error("Tape: node has no gradient");
    return grads_[v.id];
}

Var Tape::constant(Tensor t) {
    check_finite(t, "constant");
    Node n;
    n.op = Op::Constant;
    n.val = std::move(t);
    return push(std::move(n));
}

Var Tape::param(Param& p) {
    Node n;
    n.op = Op::ParamRef;
    n.p = &p;
    n.val = p.value;
    check_finite(n.val, "param");
    return push(std::move(n));
}

Var Tape::affine(Var x, Var w, Var b) {
    const Tensor& xv = nodes_[x.id].val;
    const Tensor& wv = nodes_[w.id].val;
    const Tensor& bv = nodes_[b.id].val;
    if (xv.cols != wv.cols || bv.rows != 1 || bv.cols != wv.rows)
        throw std::invalid_argument("affine: shape mismatch " + xv.shape_str() + " " + wv.shape_str() + " " +
                                    bv.shape_str());
    Node n;
    n.op = Op::Affine;
    n.a = x.id;
    n.b = w.id;
    n.c = b.id;
    n.val = Tensor(xv.rows, wv.rows);
    for (int i = 0; i < xv.rows; ++i) {
        const double* xr = &xv.v[static_cast<size_t>(i) * xv.cols];
        double* yr = &n.val.v[static_cast<size_t>(i) * wv.rows];
        for (int o = 0; o < wv.rows; ++o) {
            const double* wr = &wv.v[static_cast<size_t>(o) * wv.cols];
            double acc = bv.v[o];
            for (int k = 0; k < xv.cols; ++k) acc += xr[k] * wr[k];
            yr[o] = acc;
        }
    }
    check_finite(n.val, "affine");
    return push(std::move(n));
}

#define UNARY_OP(NAME, OPCODE, FWD)                       \
    Var Tape::NAME(Var x) {                               \
        Node n;                                           \
        n.op = OPCODE;                                    \
        n.a = x.id;                                       \
        n.val = nodes_[x.id].val;                         \
        for (double& e : n.val.v) e = (FWD);              \
        check_finite(n.val, #NAME);                       \
        return push(std::move(n));                        \
    }

UNARY_OP(tanh, Op::Tanh, std::tanh(e))
UNARY_OP(sigmoid, Op::Sigmoid, 1.0 / (1.0 + std::exp(-e)))
UNARY_OP(relu, Op::Relu, e > 0.0 ? e : 0.0)
UNARY_OP(exp, Op::Exp, std::exp(e))
UNARY_OP(softplus, Op::Softplus, softplus_s(e))
UNARY_OP(square, Op::Square, e* e)

#undef UNARY_OP

#define BINARY_OP(NAME, OPCODE, FWD)                                                         \
    Var Tape::NAME(Var a, Var b) {                                                           \
        const Tensor& av = nodes_[a.id].val;                                                 \
        const Tensor& bv = nodes_[b.id].val;                                                 \
        if (!av.same_shape(bv))                                                              \
            throw std::invalid_argument(#NAME ": shape mismatch " + av.shape_str() + " " +   \
                                        bv.shape_str());                                     \
        Node n;                                                                              \
        n.op = OPCODE;                                                                       \
        n.a = a.id;                                                                          \
        n.b = b.id;                                                                          \
        n.val = Tensor(av.rows, av.cols);                                                    \
        for (size_t i = 0; i < av.size(); ++i) {                                             \
            double x = av.v[i], y = bv.v[i];                                                 \
            n.val.v[i] = (FWD);                                                              \
        }                                                                                    \
        check_finite(n.val, #NAME);                                                          \
        return push(std::move(n));                                                           \
    }

BINARY_OP(add, Op::Add, x + y)
BINARY_OP(sub, Op::Sub, x - y)
BINARY_OP(mul, Op::Mul, x* y)
BINARY_OP(div, Op::Div, x / y)

#undef BINARY_OP

Var Tape::add_scalar(Var a, double s) {
    Node n;
    n.op = Op::AddScalar;
    n.a = a.id;
    n.d0 = s;
    n.val = nodes_[a.id].val;
    for (double& e : n.val.v) e += s;
    check_finite(n.val, "add_scalar");
    return push(std::move(n));
}

Var Tape::mul_scalar(Var a, double s) {
    Node n;
    n.op = Op::MulScalar;
    n.a = a.id;
    n.d0 = s;
    n.val = nodes_[a.id].val;
    for (double& e : n.val.v) e *= s;
    check_finite(n.val, "mul_scalar");
    return push(std::move(n));
}

Var Tape::concat_cols(Var a, Var b) {
    const Tensor& av = nodes_[a.id].val;
    const Tensor& bv = nodes_[b.id].val;
    if (av.rows != bv.rows) throw std::invalid_argument("concat_cols: row mismatch");
    Node n;
    n.op = Op::ConcatCols;
    n.a = a.id;
    n.b = b.id;
    n.i0 = av.cols;
    n.val = Tensor(av.rows, av.cols + bv.cols);
    for (int i = 0; i < av.rows; ++i) {
        std::copy_n(&av.v[static_cast<size_t>(i) * av.cols], av.cols,
                    &n.val.v[static_cast<size_t>(i) * n.val.cols]);
        std::copy_n(&bv.v[static_cast<size_t>(i) * bv.cols], bv.cols,
                    &n.val.v[static_cast<size_t>(i) * n.val.cols + av.cols]);
    }
    return push(std::move(n));
}

Var Tape::slice_cols(Var a, int start, int len) {
    const Tensor& av = nodes_[a.id].val;
    if (start < 0 || len < 0 || start + len > av.cols) throw std::invalid_argument("slice_cols: out of range");
    Node n;
    n.op = Op::SliceCols;
    n.a = a.id;
    n.i0 = start;
    n.i1 = len;
    n.val = Tensor(av.rows, len);
    for (int i = 0; i < av.rows; ++i)
        std::copy_n(&av.v[static_cast<size_t>(i) * av.cols + start], len,
                    &n.val.v[static_cast<size_t>(i) * len]);
    return push(std::move(n));
}

Var Tape::row_sum(Var a) {
    const Tensor& av = nodes_[a.id].val;
    Node n;
    n.op = Op::RowSum;
    n.a = a.id;
    n.val = Tensor(av.rows, 1);
    for (int i = 0; i < av.rows; ++i) {
        double acc = 0.0;
        for (int j = 0; j < av.cols; ++j) acc += av.at(i, j);
        n.val.v[i] = acc;
    }
    check_finite(n.val, "row_sum");
    return push(std::move(n));
}

Var Tape::sum_all(Var a) {
    const Tensor& av = nodes_[a.id].val;
    Node n;
    n.op = Op::SumAll;
    n.a = a.id;
    double acc = 0.0;
    for (double e : av.v) acc += e;
    n.val = Tensor::scalar(acc);
    check_finite(n.val, "sum_all");
    return push(std::move(n));
}

Var Tape::mean_all(Var a) {
    const Tensor& av = nodes_[a.id].val;
    if (av.size() == 0) throw std::invalid_argument("mean_all: empty tensor");
    Node n;
    n.op = Op::MeanAll;
    n.a = a.id;
    double acc = 0.0;
    for (double e : av.v) acc += e;
    n.val = Tensor::scalar(acc / static_cast<double>(av.size()));
    check_finite(n.val, "mean_all");
    return push(std::move(n));
}

Var Tape::log_softmax(Var a) {
    const Tensor& av = nodes_[a.id].val;
    Node n;
    n.op = Op::LogSoftmax;
    n.a = a.id;
    n.val = Tensor(av.rows, av.cols);
    for (int i = 0; i < av.rows; ++i) {
        double mx = -1e300;
        for (int j = 0; j < av.cols; ++j) mx = std::max(mx, av.at(i, j));
        double lse = 0.0;
        for (int j = 0; j < av.cols; ++j) lse += std::exp(av.at(i, j) - mx);
        lse = mx + std::log(lse);
        for (int j = 0; j < av.cols; ++j) n.val.at(i, j) = av.at(i, j) - lse;
    }
    check_finite(n.val, "log_softmax");
    return push(std::move(n));
}

Var Tape::gather_cols(Var a, std::vector<int> idx) {
    const Tensor& av = nodes_[a.id].val;
    if (static_cast<int>(idx.size()) != av.rows) throw std::invalid_argument("gather_cols: index count != rows");
    Node n;
    n.op = Op::GatherCols;
    n.a = a.id;
    n.val = Tensor(av.rows, 1);
    for (int i = 0; i < av.rows; ++i) {
        if (idx[i] < 0 || idx[i] >= av.cols) throw std::invalid_argument("gather_cols: index out of range");
        n.val.v[i] = av.at(i, idx[i]);
    }
    n.idx = std::move(idx);
    return push(std::move(n));
}

Var Tape::stop_gradient(Var a) {
    Node n;
    n.op = Op::StopGrad;
    n.a = a.id;
    n.val = nodes_[a.id].val;
    return push(std::move(n));
}

void Tape::backward(Var loss) {
    if (ran_backward_) throw std::runtime_error("Tape: backward called twice");
    const Tensor& lv = nodes_[loss.id].val;
    if (lv.rows != 1 || lv.cols != 1) throw std::invalid_argument("backward: loss must be scalar");
    ran_backward_ = true;
    grads_.resize(nodes_.size());
    has_grad_.assign(nodes_.size(), 0);
    g(loss.id).v[0] = 1.0;

    for (int id = loss.id; id >= 0; --id) {
        if (!has_grad_[id]) continue;
        const Node& n = nodes_[id];
        const Tensor& go = grads_[id];
        switch (n.op) {
            case Op::Constant:
                break;
            case Op::ParamRef:
                for (size_t i = 0; i < go.size(); ++i) n.p->grad.v[i] += go.v[i];
                break;
            case Op::Affine: {
                const Tensor& xv = nodes_[n.a].val;
                const Tensor& wv = nodes_[n.b].val;
                Tensor& gx = g(n.a);
                Tensor& gw = g(n.b);
                Tensor& gb = g(n.c);
                // gx += go * W ; gW += go^T * x ; gb += colsum(go)
                for (int i = 0; i < xv.rows; ++i) {
                    const double* gor = &go.v[static_cast<size_t>(i) * wv.rows];
                    const double* xr = &xv.v[static_cast<size_t>(i) * xv.cols];
                    double* gxr = &gx.v[static_cast<size_t>(i) * xv.cols];
                    for (int o = 0; o < wv.rows; ++o) {
                        double gd = gor[o];
                        if (gd == 0.0) continue;
                        const double* wr = &wv.v[static_cast<size_t>(o) * wv.cols];
                        double* gwr = &gw.v[static_cast<size_t>(o) * wv.cols];
                        for (int k = 0; k < xv.cols; ++k) {
                            gxr[k] += gd * wr[k];
                            gwr[k] += gd * xr[k];
                        }
                        gb.v[o] += gd;
                    }
                }
                break;
            }
            case Op::Tanh: {
                Tensor& ga = g(n.a);
                for (size_t i = 0; i < go.size(); ++i) ga.v[i] += go.v[i] * (1.0 - n.val.v[i] * n.val.v[i]);
                break;
            }
            case Op::Sigmoid: {
                Tensor& ga = g(n.a);
                for (size_t i = 0; i < go.size(); ++i) ga.v[i] += go.v[i] * n.val.v[i] * (1.0 - n.val.v[i]);
                break;
            }
            case Op::Relu: {
                const Tensor& xv = nodes_[n.a].val;
                Tensor& ga = g(n.a);
                for (size_t i = 0; i < go.size(); ++i)
                    if (xv.v[i] > 0.0) ga.v[i] += go.v[i];
                break;
            }
            case Op::Exp: {
                Tensor& ga = g(n.a);
                for (size_t i = 0; i < go.size(); ++i) ga.v[i] += go.v[i] * n.val.v[i];
                break;
            }
            case Op::Softplus: {
                const Tensor& xv = nodes_[n.a].val;
                Tensor& ga = g(n.a);
                for (size_t i = 0; i < go.size(); ++i) ga.v[i] += go.v[i] / (1.0 + std::exp(-xv.v[i]));
                break;
            }
            case Op::Square: {
                const Tensor& xv = nodes_[n.a].val;
                Tensor& ga = g(n.a);
                for (size_t i = 0; i < go.size(); ++i) ga.v[i] += go.v[i] * 2.0 * xv.v[i];
                break;
            }
            case Op::Add: {
                Tensor& ga = g(n.a);
                Tensor& gb = g(n.b);
                for (size_t i = 0; i < go.size(); ++i) {
                    ga.v[i] += go.v[i];
                    gb.v[i] += go.v[i];
                }
                break;
            }
            case Op::Sub: {
                Tensor& ga = g(n.a);
                Tensor& gb = g(n.b);
                for (size_t i = 0; i < go.size(); ++i) {
                    ga.v[i] += go.v[i];
                    gb.v[i] -= go.v[i];
                }
                break;
            }
            case Op::Mul: {
                const Tensor& av = nodes_[n.a].val;
                const Tensor& bv = nodes_[n.b].val;
                Tensor& ga = g(n.a);
                Tensor& gb = g(n.b);
                for (size_t i = 0; i < go.size(); ++i) {
                    ga.v[i] += go.v[i] * bv.v[i];
                    gb.v[i] += go.v[i] * av.v[i];
                }
                break;
            }
            case Op::Div: {
                const Tensor& av = nodes_[n.a].val;
                const Tensor& bv = nodes_[n.b].val;
                Tensor& ga = g(n.a);
                Tensor& gb = g(n.b);
                for (size_t i = 0; i < go.size(); ++i) {
                    ga.v[i] += go.v[i] / bv.v[i];
                    gb.v[i] -= go.v[i] * av.v[i] / (bv.v[i] * bv.v[i]);
                }
                break;
            }
            case Op::AddScalar: {
                Tensor& ga = g(n.a);
                for (size_t i = 0; i < go.size(); ++i) ga.v[i] += go.v[i];
                break;
            }
            case Op::MulScalar: {
                Tensor& ga = g(n.a);
                for (size_t i = 0; i < go.size(); ++i) ga.v[i] += go.v[i] * n.d0;
                break;
            }
            case Op::ConcatCols: {
                Tensor& ga = g(n.a);
                Tensor& gb = g(n.b);
                int ca = n.i0;
                int cb = n.val.cols - ca;
                for (int i = 0; i < n.val.rows; ++i) {
                    for (int j = 0; j < ca; ++j) ga.at(i, j) += go.at(i, j);
                    for (int j = 0; j < cb; ++j) gb.at(i, j) += go.at(i, ca + j);
                }
                break;
            }
            case Op::SliceCols: {
                Tensor& ga = g(n.a);
                for (int i = 0; i < n.val.rows; ++i)
                    for (int j = 0; j < n.i1; ++j) ga.at(i, n.i0 + j) += go.at(i, j);
                break;
            }
            case Op::RowSum: {
                Tensor& ga = g(n.a);
                for (int i = 0; i < ga.rows; ++i)
                    for (int j = 0; j < ga.cols; ++j) ga.at(i, j) += go.v[i];
                break;
            }
            case Op::SumAll: {
                Tensor& ga = g(n.a);
                for (double& e : ga.v) e += go.v[0];
                break;
            }
            case Op::MeanAll: {
                Tensor& ga = g(n.a);
                double s = go.v[0] / static_cast<double>(ga.size());
                for (double& e : ga.v) e += s;
                break;
            }
            case Op::LogSoftmax: {
                Tensor& ga = g(n.a);
                for (int i = 0; i < n.val.rows; ++i) {
                    double gs = 0.0;
                    for (int j = 0; j < n.val.cols; ++j) gs += go.at(i, j);
                    for (int j = 0; j < n.val.cols; ++j)
                        ga.at(i, j) += go.at(i, j) - std::exp(n.val.at(i, j)) * gs;
                }
                break;
            }
            case Op::GatherCols: {
                Tensor& ga = g(n.a);
                for (int i = 0; i < n.val.rows; ++i) ga.at(i, n.idx[i]) += go.v[i];
                break;
            }
            case Op::StopGrad:
                break;
        }
    }
}

// ---- composed operations --------------------------------------------------

Var gru_cell(Tape& tp, Var x, Var h, const GruParams& gp) {
    Var xh = tp.concat_cols(x, h);
    Var z = tp.sigmoid(tp.affine(xh, tp.param(*gp.wz), tp.param(*gp.bz)));
    Var r = tp.sigmoid(tp.affine(xh, tp.param(*gp.wr), tp.param(*gp.br)));
    Var xrh = tp.concat_cols(x, tp.mul(r, h));
    Var hcand = tp.tanh(tp.affine(xrh, tp.param(*gp.wh), tp.param(*gp.bh)));
    // h' = (1-z).h + z.hcand
    Var one_minus_z = tp.add_scalar(tp.neg(z), 1.0);
    return tp.add(tp.mul(one_minus_z, h), tp.mul(z, hcand));
}

Var gaussian_kl(Tape& tp, Var mu1, Var logsigma1, Var mu2, Var logsigma2) {
    // sum_d [ ls2 - ls1 + (exp(2 ls1) + (mu1-mu2)^2) / (2 exp(2 ls2)) - 1/2 ]
    Var var1 = tp.square(tp.exp(logsigma1));
    Var var2 = tp.square(tp.exp(logsigma2));
    Var diff2 = tp.square(tp.sub(mu1, mu2));
    Var ratio = tp.div(tp.add(var1, diff2), tp.mul_scalar(var2, 2.0));
    Var term = tp.add_scalar(tp.add(tp.sub(logsigma2, logsigma1), ratio), -0.5);
    return tp.row_sum(term);
}

Var gaussian_log_prob(Tape& tp, Var x, Var mu, Var logsigma) {
    constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5*log(2*pi)
    Var z = tp.div(tp.sub(x, mu), tp.exp(logsigma));
    Var term = tp.add_scalar(tp.add(tp.mul_scalar(tp.square(z), 0.5), logsigma), kHalfLog2Pi);
    return tp.neg(tp.row_sum(term));
}

Var gaussian_reparam(Tape& tp, Var mu, Var logsigma, Var eps) {
    return tp.add(mu, tp.mul(tp.exp(logsigma), eps));
}

Var bce_with_logits(Tape& tp, Var logits, Var targets) {
    // softplus(l) - l*t  ==  -[t log sig(l) + (1-t) log(1-sig(l))]
    return tp.sub(tp.softplus(logits), tp.mul(logits, targets));
}

Var mse(Tape& tp, Var pred, Var target) { return tp.mean_all(tp.square(tp.sub(pred, target))); }

Var categorical_log_prob(Tape& tp, Var logits, const std::vector<int>& actions) {
    return tp.gather_cols(tp.log_softmax(logits), actions);
}

Var categorical_entropy(Tape& tp, Var logits) {
    Var ls = tp.log_softmax(logits);
    return tp.neg(tp.row_sum(tp.mul(tp.exp(ls), ls)));
}

}  // namespace varibad
