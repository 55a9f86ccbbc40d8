#include "fairrep/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "fairrep/activations.hpp"

namespace fairrep {

namespace {

Tensor matmul_vals(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
    Tensor out(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int k = 0; k < a.cols(); ++k) {
            double aik = a.at(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.data() + static_cast<size_t>(k) * b.cols();
            double* orow = out.data() + static_cast<size_t>(i) * out.cols();
            for (int j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

// out += a^T b
void matmul_at_b_acc(const Tensor& a, const Tensor& b, Tensor& out) {
    for (int k = 0; k < a.rows(); ++k) {
        const double* arow = a.data() + static_cast<size_t>(k) * a.cols();
        const double* brow = b.data() + static_cast<size_t>(k) * b.cols();
        for (int i = 0; i < a.cols(); ++i) {
            double aki = arow[i];
            if (aki == 0.0) continue;
            double* orow = out.data() + static_cast<size_t>(i) * out.cols();
            for (int j = 0; j < b.cols(); ++j) orow[j] += aki * brow[j];
        }
    }
}

// out += a b^T
void matmul_a_bt_acc(const Tensor& a, const Tensor& b, Tensor& out) {
    for (int i = 0; i < a.rows(); ++i) {
        const double* arow = a.data() + static_cast<size_t>(i) * a.cols();
        double* orow = out.data() + static_cast<size_t>(i) * out.cols();
        for (int j = 0; j < b.rows(); ++j) {
            const double* brow = b.data() + static_cast<size_t>(j) * b.cols();
            double s = 0.0;
            for (int k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
            orow[j] += s;
        }
    }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Tensor t) {
    Node n;
    n.op = Op::Leaf;
    n.val = std::move(t);
    return push(std::move(n));
}

int Tape::matmul(int a, int b) {
    Node n;
    n.op = Op::MatMul;
    n.a = a;
    n.b = b;
    n.val = matmul_vals(v(a), v(b));
    return push(std::move(n));
}

int Tape::add(int a, int b) {
    check_same_shape(v(a), v(b), "add");
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.val = v(a);
    for (size_t i = 0; i < n.val.size(); ++i) n.val[i] += v(b)[i];
    return push(std::move(n));
}

int Tape::sub(int a, int b) {
    check_same_shape(v(a), v(b), "sub");
    Node n;
    n.op = Op::Sub;
    n.a = a;
    n.b = b;
    n.val = v(a);
    for (size_t i = 0; i < n.val.size(); ++i) n.val[i] -= v(b)[i];
    return push(std::move(n));
}

int Tape::mul(int a, int b) {
    check_same_shape(v(a), v(b), "mul");
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    n.val = v(a);
    for (size_t i = 0; i < n.val.size(); ++i) n.val[i] *= v(b)[i];
    return push(std::move(n));
}

int Tape::add_rowvec(int a, int b) {
    if (v(b).rows() != 1 || v(b).cols() != v(a).cols())
        throw std::invalid_argument("add_rowvec: expected 1xD bias matching columns");
    Node n;
    n.op = Op::AddRowVec;
    n.a = a;
    n.b = b;
    n.val = v(a);
    for (int r = 0; r < n.val.rows(); ++r)
        for (int c = 0; c < n.val.cols(); ++c) n.val.at(r, c) += v(b).at(0, c);
    return push(std::move(n));
}

int Tape::concat_cols(int a, int b) {
    if (v(a).rows() != v(b).rows()) throw std::invalid_argument("concat_cols: row counts differ");
    Node n;
    n.op = Op::ConcatCols;
    n.a = a;
    n.b = b;
    const Tensor& A = v(a);
    const Tensor& B = v(b);
    Tensor out(A.rows(), A.cols() + B.cols());
    for (int r = 0; r < A.rows(); ++r) {
        for (int c = 0; c < A.cols(); ++c) out.at(r, c) = A.at(r, c);
        for (int c = 0; c < B.cols(); ++c) out.at(r, A.cols() + c) = B.at(r, c);
    }
    n.val = std::move(out);
    return push(std::move(n));
}

int Tape::softplus(int a) {
    Node n;
    n.op = Op::Softplus;
    n.a = a;
    n.val = v(a);
    for (size_t i = 0; i < n.val.size(); ++i) n.val[i] = fairrep::softplus(n.val[i]);
    return push(std::move(n));
}

int Tape::sigmoid(int a) {
    Node n;
    n.op = Op::Sigmoid;
    n.a = a;
    n.val = v(a);
    for (size_t i = 0; i < n.val.size(); ++i) n.val[i] = fairrep::sigmoid(n.val[i]);
    return push(std::move(n));
}

int Tape::exp(int a) {
    Node n;
    n.op = Op::Exp;
    n.a = a;
    n.val = v(a);
    for (size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::exp(n.val[i]);
    return push(std::move(n));
}

int Tape::scale(int a, double c) {
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.c = c;
    n.val = v(a);
    for (size_t i = 0; i < n.val.size(); ++i) n.val[i] *= c;
    return push(std::move(n));
}

int Tape::add_const(int a, double c) {
    Node n;
    n.op = Op::AddConst;
    n.a = a;
    n.c = c;
    n.val = v(a);
    for (size_t i = 0; i < n.val.size(); ++i) n.val[i] += c;
    return push(std::move(n));
}

int Tape::log_sum_exp_rows(int a) {
    Node n;
    n.op = Op::LogSumExpRows;
    n.a = a;
    const Tensor& A = v(a);
    Tensor out(A.rows(), 1);
    for (int r = 0; r < A.rows(); ++r)
        out.at(r, 0) = log_sum_exp(std::span<const double>(A.data() + static_cast<size_t>(r) * A.cols(), A.cols()));
    n.val = std::move(out);
    return push(std::move(n));
}

int Tape::gather_cols(int a, std::vector<int> idx) {
    const Tensor& A = v(a);
    if (static_cast<int>(idx.size()) != A.rows())
        throw std::invalid_argument("gather_cols: need one column index per row");
    Node n;
    n.op = Op::GatherCols;
    n.a = a;
    Tensor out(A.rows(), 1);
    for (int r = 0; r < A.rows(); ++r) {
        if (idx[r] < 0 || idx[r] >= A.cols()) throw std::invalid_argument("gather_cols: index out of range");
        out.at(r, 0) = A.at(r, idx[r]);
    }
    n.idx = std::move(idx);
    n.val = std::move(out);
    return push(std::move(n));
}

int Tape::mul_const(int a, Tensor c) {
    check_same_shape(v(a), c, "mul_const");
    Node n;
    n.op = Op::MulConstT;
    n.a = a;
    n.val = v(a);
    for (size_t i = 0; i < n.val.size(); ++i) n.val[i] *= c[i];
    n.cval = std::move(c);
    return push(std::move(n));
}

int Tape::sum_all(int a) {
    Node n;
    n.op = Op::SumAll;
    n.a = a;
    double s = 0.0;
    for (size_t i = 0; i < v(a).size(); ++i) s += v(a)[i];
    n.val = Tensor::scalar(s);
    return push(std::move(n));
}

int Tape::mean_all(int a) {
    return scale(sum_all(a), 1.0 / static_cast<double>(v(a).size()));
}

std::vector<Tensor> Tape::backward(int loss) const {
    if (loss < 0 || loss >= num_nodes()) throw std::invalid_argument("backward: bad loss node");
    if (v(loss).size() != 1) throw std::invalid_argument("backward: loss node must be scalar");

    std::vector<Tensor> g(nodes_.size());
    for (size_t i = 0; i < nodes_.size(); ++i) g[i] = Tensor(nodes_[i].val.rows(), nodes_[i].val.cols());
    g[loss][0] = 1.0;

    for (int i = loss; i >= 0; --i) {
        const Node& n = nodes_[i];
        const Tensor& go = g[i];
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::MatMul:
                matmul_a_bt_acc(go, v(n.b), g[n.a]);
                matmul_at_b_acc(v(n.a), go, g[n.b]);
                break;
            case Op::Add:
                for (size_t k = 0; k < go.size(); ++k) {
                    g[n.a][k] += go[k];
                    g[n.b][k] += go[k];
                }
                break;
            case Op::Sub:
                for (size_t k = 0; k < go.size(); ++k) {
                    g[n.a][k] += go[k];
                    g[n.b][k] -= go[k];
                }
                break;
            case Op::Mul:
                for (size_t k = 0; k < go.size(); ++k) {
                    g[n.a][k] += go[k] * v(n.b)[k];
                    g[n.b][k] += go[k] * v(n.a)[k];
                }
                break;
            case Op::AddRowVec:
                for (size_t k = 0; k < go.size(); ++k) g[n.a][k] += go[k];
                for (int r = 0; r < go.rows(); ++r)
                    for (int c = 0; c < go.cols(); ++c) g[n.b].at(0, c) += go.at(r, c);
                break;
            case Op::ConcatCols: {
                int ca = v(n.a).cols();
                for (int r = 0; r < go.rows(); ++r) {
                    for (int c = 0; c < ca; ++c) g[n.a].at(r, c) += go.at(r, c);
                    for (int c = 0; c < v(n.b).cols(); ++c) g[n.b].at(r, c) += go.at(r, ca + c);
                }
                break;
            }
            case Op::Softplus:
                for (size_t k = 0; k < go.size(); ++k) g[n.a][k] += go[k] * fairrep::sigmoid(v(n.a)[k]);
                break;
            case Op::Sigmoid:
                for (size_t k = 0; k < go.size(); ++k) {
                    double y = n.val[k];
                    g[n.a][k] += go[k] * y * (1.0 - y);
                }
                break;
            case Op::Exp:
                for (size_t k = 0; k < go.size(); ++k) g[n.a][k] += go[k] * n.val[k];
                break;
            case Op::Scale:
                for (size_t k = 0; k < go.size(); ++k) g[n.a][k] += go[k] * n.c;
                break;
            case Op::AddConst:
                for (size_t k = 0; k < go.size(); ++k) g[n.a][k] += go[k];
                break;
            case Op::LogSumExpRows: {
                const Tensor& A = v(n.a);
                for (int r = 0; r < A.rows(); ++r) {
                    double lse = n.val.at(r, 0);
                    double gr = go.at(r, 0);
                    if (gr == 0.0) continue;
                    for (int c = 0; c < A.cols(); ++c)
                        g[n.a].at(r, c) += gr * std::exp(A.at(r, c) - lse);
                }
                break;
            }
            case Op::GatherCols:
                for (int r = 0; r < go.rows(); ++r) g[n.a].at(r, n.idx[r]) += go.at(r, 0);
                break;
            case Op::MulConstT:
                for (size_t k = 0; k < go.size(); ++k) g[n.a][k] += go[k] * n.cval[k];
                break;
            case Op::SumAll: {
                double gs = go[0];
                for (size_t k = 0; k < g[n.a].size(); ++k) g[n.a][k] += gs;
                break;
            }
        }
    }
    return g;
}

}  // namespace fairrep
