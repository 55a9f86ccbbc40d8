#pragma once

#include <vector>

#include "fairrep/tensor.hpp"

namespace fairrep {

/// Reverse-mode autodiff over a flat record of primitive operations.
///
/// The tape is rebuilt for every minibatch: leaves are pushed first
/// (parameters and batch constants), then ops reference earlier nodes by
/// index, so topological order holds by construction. backward() walks the
/// record once in reverse and returns one gradient tensor per node; callers
/// read the entries of the leaves they intend to update and ignore the rest
/// (that is how the frozen-player side of the adversarial objectives is
/// realized).
class Tape {
public:
    enum class Op {
        Leaf,
        MatMul,        // a(BxN) @ b(NxM)
        Add,           // elementwise
        Sub,
        Mul,
        AddRowVec,     // a(BxD) + broadcast b(1xD)
        ConcatCols,    // [a | b]
        Softplus,
        Sigmoid,
        Exp,
        Scale,         // c * a
        AddConst,      // a + c elementwise
        LogSumExpRows, // (BxK) -> (Bx1)
        GatherCols,    // (BxK), per-row column index -> (Bx1)
        MulConstT,     // a .* fixed tensor (no gradient into the constant)
        SumAll,        // -> 1x1
    };

    /// Push a leaf (parameter or batch constant). Returns its node id.
    int leaf(Tensor t);

    int matmul(int a, int b);
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int add_rowvec(int a, int b);
    int concat_cols(int a, int b);
    int softplus(int a);
    int sigmoid(int a);
    int exp(int a);
    int scale(int a, double c);
    int add_const(int a, double c);
    int log_sum_exp_rows(int a);
    int gather_cols(int a, std::vector<int> idx);
    int mul_const(int a, Tensor c);
    int sum_all(int a);

    /// mean over all entries = sum_all scaled by 1/size
    int mean_all(int a);

    const Tensor& value(int id) const { return nodes_[id].val; }
    int num_nodes() const { return static_cast<int>(nodes_.size()); }

    /// Gradient of a scalar loss node w.r.t. every node; unreachable leaves
    /// get zero gradients of matching shape.
    std::vector<Tensor> backward(int loss) const;

private:
    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        double c = 0.0;
        Tensor val;
        Tensor cval;            // MulConstT
        std::vector<int> idx;   // GatherCols
    };

    int push(Node n);
    const Tensor& v(int id) const { return nodes_[id].val; }

    std::vector<Node> nodes_;
};

}  // namespace fairrep
