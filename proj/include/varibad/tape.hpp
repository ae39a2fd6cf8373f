#pragma once

#include <memory>
#include <string>
#include <vector>

#include "varibad/tensor.hpp"

namespace varibad {

// A named trainable tensor with gradient and Adam accumulators.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor adam_m;
    Tensor adam_v;

    Param(std::string n, int rows, int cols)
        : name(std::move(n)), value(rows, cols), grad(rows, cols), adam_m(rows, cols), adam_v(rows, cols) {}
};

class ParamStore {
  public:
    Param& add(const std::string& name, int rows, int cols);
    Param& get(const std::string& name);
    const Param& get(const std::string& name) const;
    bool has(const std::string& name) const;
    void zero_grads();
    std::vector<Param*> all();
    std::vector<const Param*> all() const;
    size_t count() const { return params_.size(); }

  private:
    std::vector<std::unique_ptr<Param>> params_;
};

struct Var {
    int id = -1;
};

enum class Op : uint8_t {
    Constant,
    ParamRef,
    Affine,
    Tanh,
    Sigmoid,
    Relu,
    Exp,
    Softplus,
    Square,
    Add,
    Sub,
    Mul,
    Div,
    AddScalar,
    MulScalar,
    ConcatCols,
    SliceCols,
    RowSum,
    SumAll,
    MeanAll,
    LogSoftmax,
    GatherCols,
    StopGrad,
};

// Records forward ops on tensors; backward() runs exact reverse accumulation
// into Param::grad. Single-threaded builder, nodes are append-only.
class Tape {
  public:
    Var constant(Tensor t);
    Var constant_scalar(double x) { return constant(Tensor::scalar(x)); }
    Var param(Param& p);

    Var affine(Var x, Var w, Var b);  // y = x * w^T + b ; w is {out,in}, b {1,out}
    Var tanh(Var x);
    Var sigmoid(Var x);
    Var relu(Var x);
    Var exp(Var x);
    Var softplus(Var x);
    Var square(Var x);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var div(Var a, Var b);
    Var add_scalar(Var a, double s);
    Var mul_scalar(Var a, double s);
    Var neg(Var a) { return mul_scalar(a, -1.0); }
    Var concat_cols(Var a, Var b);
    Var slice_cols(Var a, int start, int len);
    Var row_sum(Var a);   // {n,k} -> {n,1}
    Var sum_all(Var a);   // -> {1,1}
    Var mean_all(Var a);  // -> {1,1}
    Var log_softmax(Var a);
    Var gather_cols(Var a, std::vector<int> idx);  // {n,k} + [n] -> {n,1}
    Var stop_gradient(Var a);

    const Tensor& value(Var v) const { return nodes_[v.id].val; }
    const Tensor& grad(Var v) const;

    // loss must be scalar; accumulates parameter gradients into Param::grad.
    void backward(Var loss);

    size_t num_nodes() const { return nodes_.size(); }
    void reserve(size_t n) { nodes_.reserve(n); }

  private:
    struct Node {
        Op op;
        int a = -1, b = -1, c = -1;
        int i0 = 0, i1 = 0;
        double d0 = 0.0;
        Param* p = nullptr;
        std::vector<int> idx;
        Tensor val;
    };

    Var push(Node n);
    Tensor& g(int id);

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    std::vector<char> has_grad_;
    bool ran_backward_ = false;
};

// ---- composed operations --------------------------------------------------

// Standard GRU cell: z = sig(Wz[x,h]+bz), r = sig(Wr[x,h]+br),
// hcand = tanh(Wh[x, r.h]+bh), h' = (1-z).h + z.hcand.
struct GruParams {
    Param* wz;
    Param* bz;
    Param* wr;
    Param* br;
    Param* wh;
    Param* bh;
};

Var gru_cell(Tape& tp, Var x, Var h, const GruParams& gp);

// Diagonal Gaussian utilities; all inputs {n,d}, results {n,1} (summed over d).
Var gaussian_kl(Tape& tp, Var mu1, Var logsigma1, Var mu2, Var logsigma2);
Var gaussian_log_prob(Tape& tp, Var x, Var mu, Var logsigma);
Var gaussian_reparam(Tape& tp, Var mu, Var logsigma, Var eps);  // mu + exp(logsigma).eps

// Elementwise -[t*log(sig(l)) + (1-t)*log(1-sig(l))], numerically stable.
Var bce_with_logits(Tape& tp, Var logits, Var targets);

Var mse(Tape& tp, Var pred, Var target);  // mean of squared error, scalar

// Categorical over the last dimension of a logits matrix {n,k}.
Var categorical_log_prob(Tape& tp, Var logits, const std::vector<int>& actions);  // {n,1}
Var categorical_entropy(Tape& tp, Var logits);                                    // {n,1}

}  // namespace varibad
