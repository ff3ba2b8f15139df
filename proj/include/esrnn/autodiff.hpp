#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

#include "esrnn/errors.hpp"
#include "esrnn/fastmath.hpp"
#include "esrnn/matrix.hpp"

namespace esrnn::ad {

enum class OpKind : std::uint8_t {
    Leaf,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    MatMul,
    Logistic,
    Tanh,
    Exp,
    Log,
    PowConst,
    ConcatCols,
    SliceCols,
    Sum,
    Mean,
    BroadcastRow,
    BroadcastCol,
    BroadcastScalar,
    StackCols,
    Gather,
    PinballMaskedMean,
};

struct Node {
    OpKind op = OpKind::Const;
    int a = -1;
    int b = -1;
    Matrix val;
    Matrix grad;
    bool grad_live = false;     // some adjoint has been accumulated
    double scalar = 0.0;        // PowConst exponent / Pinball tau / Pinball 1/M
    int i0 = 0;                 // SliceCols offset, Broadcast target size
    std::vector<int> many;      // StackCols inputs
    std::vector<int> idx_row;   // Gather source rows, row-major over output
    std::vector<int> idx_col;   // Gather source cols
    Matrix aux;                 // Pinball mask
};

class Tape;

/// Handle to one recorded array on a tape; value is available immediately
/// (forward runs eagerly), gradient after backward().
struct DiffArray {
    Tape* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    const Matrix& value() const;
    const Matrix& grad() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
};

/// Append-only recording of a forward computation. Nodes are stored in
/// topological order by construction; backward() walks them once in reverse,
/// adding chain-rule contributions (gradients sum across fan-out).
class Tape {
public:
    /// Drop all nodes, recycling pool-originated buffers for the next
    /// recording. Leaf/Const values and aux matrices are caller-provided and
    /// simply freed, so pool classes stay balanced with take().
    void clear() {
        for (Node& n : nodes_) {
            if (n.op != OpKind::Leaf && n.op != OpKind::Const) recycle(n.val);
            recycle(n.grad);
        }
        nodes_.clear();
    }
    std::size_t size() const { return nodes_.size(); }

    /// Zero-filled matrix, reusing a recycled buffer of the same size when
    /// one is available.
    Matrix take(std::size_t rows, std::size_t cols) {
        auto it = pool_.find(rows * cols);
        if (it != pool_.end() && !it->second.empty()) {
            std::vector<double> buf = std::move(it->second.back());
            it->second.pop_back();
            std::fill(buf.begin(), buf.end(), 0.0);
            return Matrix::adopt(rows, cols, std::move(buf));
        }
        return Matrix(rows, cols);
    }

    int emit(Node&& n) {
        if (nodes_.capacity() == nodes_.size()) nodes_.reserve(nodes_.empty() ? 1024 : 2 * nodes_.size());
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    const Matrix& val(int id) const { return nodes_[static_cast<std::size_t>(id)].val; }
    const Matrix& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

    void backward(int loss_id);

    bool all_finite() const {
        for (const Node& n : nodes_) {
            if (!n.val.all_finite()) return false;
            if (!n.grad.empty() && !n.grad.all_finite()) return false;
        }
        return true;
    }

private:
    void recycle(Matrix& m) {
        if (!m.empty()) pool_[m.size()].push_back(m.release());
    }

    std::vector<Node> nodes_;
    std::unordered_map<std::size_t, std::vector<std::vector<double>>> pool_;
};

inline const Matrix& DiffArray::value() const { return tape->val(id); }
inline const Matrix& DiffArray::grad() const { return tape->grad(id); }

inline DiffArray wrap(Tape& t, int id) { return DiffArray{&t, id}; }

inline DiffArray leaf(Tape& t, Matrix v) {
    Node n;
    n.op = OpKind::Leaf;
    n.val = std::move(v);
    return wrap(t, t.emit(std::move(n)));
}

inline DiffArray constant(Tape& t, Matrix v) {
    Node n;
    n.op = OpKind::Const;
    n.val = std::move(v);
    return wrap(t, t.emit(std::move(n)));
}

namespace detail {

inline DiffArray binary(OpKind op, DiffArray x, DiffArray y, const char* name) {
    require_same_shape(x.value(), y.value(), name);
    Node n;
    n.op = op;
    n.a = x.id;
    n.b = y.id;
    const Matrix& a = x.value();
    const Matrix& b = y.value();
    n.val = x.tape->take(a.rows(), a.cols());
    const std::size_t sz = a.size();
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pv = n.val.data().data();
    switch (op) {
        case OpKind::Add: for (std::size_t i = 0; i < sz; ++i) pv[i] = pa[i] + pb[i]; break;
        case OpKind::Sub: for (std::size_t i = 0; i < sz; ++i) pv[i] = pa[i] - pb[i]; break;
        case OpKind::Mul: for (std::size_t i = 0; i < sz; ++i) pv[i] = pa[i] * pb[i]; break;
        case OpKind::Div: for (std::size_t i = 0; i < sz; ++i) pv[i] = pa[i] / pb[i]; break;
        default: throw ContractError("binary: bad op");
    }
    return wrap(*x.tape, x.tape->emit(std::move(n)));
}

inline DiffArray unary(OpKind op, DiffArray x, double scalar = 0.0) {
    Node n;
    n.op = op;
    n.a = x.id;
    n.scalar = scalar;
    const Matrix& a = x.value();
    n.val = x.tape->take(a.rows(), a.cols());
    const std::size_t sz = a.size();
    const double* pa = a.data().data();
    double* pv = n.val.data().data();
    switch (op) {
        case OpKind::Logistic: for (std::size_t i = 0; i < sz; ++i) pv[i] = fastmath::logistic(pa[i]); break;
        case OpKind::Tanh:     for (std::size_t i = 0; i < sz; ++i) pv[i] = fastmath::tanh(pa[i]); break;
        case OpKind::Exp:      for (std::size_t i = 0; i < sz; ++i) pv[i] = fastmath::exp(pa[i]); break;
        case OpKind::Log:      for (std::size_t i = 0; i < sz; ++i) pv[i] = std::log(pa[i]); break;
        case OpKind::PowConst: for (std::size_t i = 0; i < sz; ++i) pv[i] = std::pow(pa[i], scalar); break;
        default: throw ContractError("unary: bad op");
    }
    return wrap(*x.tape, x.tape->emit(std::move(n)));
}

} // namespace detail

inline DiffArray add(DiffArray x, DiffArray y) { return detail::binary(OpKind::Add, x, y, "add"); }
inline DiffArray sub(DiffArray x, DiffArray y) { return detail::binary(OpKind::Sub, x, y, "sub"); }
inline DiffArray mul(DiffArray x, DiffArray y) { return detail::binary(OpKind::Mul, x, y, "mul"); }
inline DiffArray div(DiffArray x, DiffArray y) { return detail::binary(OpKind::Div, x, y, "div"); }

inline DiffArray operator+(DiffArray x, DiffArray y) { return add(x, y); }
inline DiffArray operator-(DiffArray x, DiffArray y) { return sub(x, y); }
inline DiffArray operator*(DiffArray x, DiffArray y) { return mul(x, y); }
inline DiffArray operator/(DiffArray x, DiffArray y) { return div(x, y); }

inline DiffArray logistic(DiffArray x) { return detail::unary(OpKind::Logistic, x); }
inline DiffArray tanh(DiffArray x) { return detail::unary(OpKind::Tanh, x); }
inline DiffArray exp(DiffArray x) { return detail::unary(OpKind::Exp, x); }
inline DiffArray log(DiffArray x) { return detail::unary(OpKind::Log, x); }
inline DiffArray pow_const(DiffArray x, double exponent) { return detail::unary(OpKind::PowConst, x, exponent); }

inline DiffArray matmul(DiffArray x, DiffArray y) {
    Node n;
    n.op = OpKind::MatMul;
    n.a = x.id;
    n.b = y.id;
    if (x.value().cols() != y.value().rows())
        throw ShapeError("matmul: inner dimensions " + x.value().shape_str() + " vs " +
                         y.value().shape_str());
    n.val = x.tape->take(x.value().rows(), y.value().cols());
    matmul_accum(n.val, x.value(), y.value());
    return wrap(*x.tape, x.tape->emit(std::move(n)));
}

inline DiffArray concat_cols(DiffArray x, DiffArray y) {
    const Matrix& a = x.value();
    const Matrix& b = y.value();
    if (a.rows() != b.rows())
        throw ShapeError("concat_cols: row mismatch " + a.shape_str() + " vs " + b.shape_str());
    Node n;
    n.op = OpKind::ConcatCols;
    n.a = x.id;
    n.b = y.id;
    n.i0 = static_cast<int>(a.cols());
    n.val = x.tape->take(a.rows(), a.cols() + b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        double* out = n.val.row(r);
        const double* pa = a.row(r);
        const double* pb = b.row(r);
        for (std::size_t c = 0; c < a.cols(); ++c) out[c] = pa[c];
        for (std::size_t c = 0; c < b.cols(); ++c) out[a.cols() + c] = pb[c];
    }
    return wrap(*x.tape, x.tape->emit(std::move(n)));
}

inline DiffArray slice_cols(DiffArray x, std::size_t offset, std::size_t count) {
    const Matrix& a = x.value();
    if (offset + count > a.cols())
        throw ShapeError("slice_cols: range out of bounds for " + a.shape_str());
    Node n;
    n.op = OpKind::SliceCols;
    n.a = x.id;
    n.i0 = static_cast<int>(offset);
    n.val = x.tape->take(a.rows(), count);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double* pa = a.row(r) + offset;
        double* out = n.val.row(r);
        for (std::size_t c = 0; c < count; ++c) out[c] = pa[c];
    }
    return wrap(*x.tape, x.tape->emit(std::move(n)));
}

inline DiffArray sum(DiffArray x) {
    Node n;
    n.op = OpKind::Sum;
    n.a = x.id;
    double acc = 0.0;
    for (double v : x.value().data()) acc += v;
    n.val = x.tape->take(1, 1);
    n.val(0, 0) = acc;
    return wrap(*x.tape, x.tape->emit(std::move(n)));
}

inline DiffArray mean(DiffArray x) {
    if (x.value().size() == 0) throw ContractError("mean: empty operand");
    Node n;
    n.op = OpKind::Mean;
    n.a = x.id;
    double acc = 0.0;
    for (double v : x.value().data()) acc += v;
    n.val = x.tape->take(1, 1);
    n.val(0, 0) = acc / static_cast<double>(x.value().size());
    return wrap(*x.tape, x.tape->emit(std::move(n)));
}

/// (1, n) -> (rows, n), every row a copy.
inline DiffArray broadcast_row(DiffArray x, std::size_t rows) {
    const Matrix& a = x.value();
    if (a.rows() != 1) throw ShapeError("broadcast_row: operand must be (1, n), got " + a.shape_str());
    Node n;
    n.op = OpKind::BroadcastRow;
    n.a = x.id;
    n.i0 = static_cast<int>(rows);
    n.val = x.tape->take(rows, a.cols());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) n.val(r, c) = a(0, c);
    return wrap(*x.tape, x.tape->emit(std::move(n)));
}

/// (m, 1) -> (m, cols), every column a copy.
inline DiffArray broadcast_col(DiffArray x, std::size_t cols) {
    const Matrix& a = x.value();
    if (a.cols() != 1) throw ShapeError("broadcast_col: operand must be (m, 1), got " + a.shape_str());
    Node n;
    n.op = OpKind::BroadcastCol;
    n.a = x.id;
    n.i0 = static_cast<int>(cols);
    n.val = x.tape->take(a.rows(), cols);
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < cols; ++c) n.val(r, c) = a(r, 0);
    return wrap(*x.tape, x.tape->emit(std::move(n)));
}

/// (1, 1) -> (rows, cols).
inline DiffArray broadcast_scalar(DiffArray x, std::size_t rows, std::size_t cols) {
    const Matrix& a = x.value();
    if (a.size() != 1) throw ShapeError("broadcast_scalar: operand must be (1, 1), got " + a.shape_str());
    Node n;
    n.op = OpKind::BroadcastScalar;
    n.a = x.id;
    n.val = x.tape->take(rows, cols);
    n.val.fill(a(0, 0));
    return wrap(*x.tape, x.tape->emit(std::move(n)));
}

/// Stack k column vectors (m, 1) into an (m, k) matrix.
inline DiffArray stack_cols(Tape& t, const std::vector<DiffArray>& cols) {
    if (cols.empty()) throw ContractError("stack_cols: no operands");
    const std::size_t m = cols.front().rows();
    Node n;
    n.op = OpKind::StackCols;
    n.many.reserve(cols.size());
    n.val = t.take(m, cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
        const Matrix& c = cols[j].value();
        if (c.rows() != m || c.cols() != 1)
            throw ShapeError("stack_cols: operand " + std::to_string(j) + " has shape " + c.shape_str());
        n.many.push_back(cols[j].id);
        for (std::size_t r = 0; r < m; ++r) n.val(r, j) = c(r, 0);
    }
    return wrap(t, t.emit(std::move(n)));
}

/// out[e] = src(rows[e], cols[e]) with e running row-major over the
/// (out_rows, out_cols) output. Adjoint scatter-adds back into src.
inline DiffArray gather(DiffArray src, std::vector<int> rows, std::vector<int> cols,
                        std::size_t out_rows, std::size_t out_cols) {
    if (rows.size() != out_rows * out_cols || cols.size() != rows.size())
        throw ShapeError("gather: index count does not match output size");
    const Matrix& s = src.value();
    Node n;
    n.op = OpKind::Gather;
    n.a = src.id;
    n.val = src.tape->take(out_rows, out_cols);
    for (std::size_t e = 0; e < rows.size(); ++e) {
        const int r = rows[e], c = cols[e];
        if (r < 0 || c < 0 || static_cast<std::size_t>(r) >= s.rows() || static_cast<std::size_t>(c) >= s.cols())
            throw ShapeError("gather: index (" + std::to_string(r) + ", " + std::to_string(c) +
                             ") out of bounds for " + s.shape_str());
        n.val.data()[e] = s(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    }
    n.idx_row = std::move(rows);
    n.idx_col = std::move(cols);
    return wrap(*src.tape, src.tape->emit(std::move(n)));
}

/// Masked-mean pinball loss between prediction and actual, both on tape.
/// Entries with mask 0 contribute nothing to the value or to any gradient.
inline DiffArray pinball(DiffArray predicted, DiffArray actual, double tau, const Matrix& mask) {
    require_same_shape(predicted.value(), actual.value(), "pinball");
    require_same_shape(predicted.value(), mask, "pinball mask");
    if (!(tau > 0.0 && tau < 1.0)) throw ContractError("pinball: tau must be in (0, 1)");
    double count = 0.0;
    for (double m : mask.data()) count += (m != 0.0) ? 1.0 : 0.0;
    if (count == 0.0) throw ContractError("pinball: all-zero mask, mean undefined");
    Node n;
    n.op = OpKind::PinballMaskedMean;
    n.a = predicted.id;
    n.b = actual.id;
    n.scalar = tau;
    n.aux = mask;
    const Matrix& p = predicted.value();
    const Matrix& t = actual.value();
    double acc = 0.0;
    for (std::size_t e = 0; e < p.size(); ++e) {
        if (mask.data()[e] == 0.0) continue;
        const double d = t.data()[e] - p.data()[e];
        acc += (d >= 0.0) ? tau * d : (tau - 1.0) * d;
    }
    n.val = predicted.tape->take(1, 1);
    n.val(0, 0) = acc / count;
    n.i0 = static_cast<int>(count);
    return wrap(*predicted.tape, predicted.tape->emit(std::move(n)));
}

inline void Tape::backward(int loss_id) {
    if (loss_id < 0 || static_cast<std::size_t>(loss_id) >= nodes_.size())
        throw ContractError("backward: loss is not on this tape");
    if (nodes_[static_cast<std::size_t>(loss_id)].val.size() != 1)
        throw ContractError("backward: loss must be scalar, got " +
                            nodes_[static_cast<std::size_t>(loss_id)].val.shape_str());
    for (Node& n : nodes_) {
        if (n.grad.same_shape(n.val) && !n.grad.empty()) n.grad.fill(0.0);
        else n.grad = take(n.val.rows(), n.val.cols());
        n.grad_live = false;
    }
    Node& seed = nodes_[static_cast<std::size_t>(loss_id)];
    seed.grad(0, 0) = 1.0;
    seed.grad_live = true;

    // Constants take no adjoints; a scratch sink absorbs their contributions
    // where skipping would complicate an op's adjoint.
    for (int id = loss_id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.grad_live) continue;
        const Matrix& g = n.grad;
        auto is_const = [&](int in) { return nodes_[static_cast<std::size_t>(in)].op == OpKind::Const; };
        auto touch = [&](int in) -> Matrix& {
            Node& src = nodes_[static_cast<std::size_t>(in)];
            src.grad_live = true;
            return src.grad;
        };
        switch (n.op) {
            case OpKind::Leaf:
            case OpKind::Const:
                break;
            case OpKind::Add: {
                if (!is_const(n.a)) {
                    Matrix& ga = touch(n.a);
                    for (std::size_t e = 0; e < g.size(); ++e) ga.data()[e] += g.data()[e];
                }
                if (!is_const(n.b)) {
                    Matrix& gb = touch(n.b);
                    for (std::size_t e = 0; e < g.size(); ++e) gb.data()[e] += g.data()[e];
                }
                break;
            }
            case OpKind::Sub: {
                if (!is_const(n.a)) {
                    Matrix& ga = touch(n.a);
                    for (std::size_t e = 0; e < g.size(); ++e) ga.data()[e] += g.data()[e];
                }
                if (!is_const(n.b)) {
                    Matrix& gb = touch(n.b);
                    for (std::size_t e = 0; e < g.size(); ++e) gb.data()[e] -= g.data()[e];
                }
                break;
            }
            case OpKind::Mul: {
                if (!is_const(n.a)) {
                    Matrix& ga = touch(n.a);
                    const Matrix& vb = nodes_[static_cast<std::size_t>(n.b)].val;
                    for (std::size_t e = 0; e < g.size(); ++e) ga.data()[e] += g.data()[e] * vb.data()[e];
                }
                if (!is_const(n.b)) {
                    Matrix& gb = touch(n.b);
                    const Matrix& va = nodes_[static_cast<std::size_t>(n.a)].val;
                    for (std::size_t e = 0; e < g.size(); ++e) gb.data()[e] += g.data()[e] * va.data()[e];
                }
                break;
            }
            case OpKind::Div: {
                const Matrix& vb = nodes_[static_cast<std::size_t>(n.b)].val;
                if (!is_const(n.a)) {
                    Matrix& ga = touch(n.a);
                    for (std::size_t e = 0; e < g.size(); ++e) ga.data()[e] += g.data()[e] / vb.data()[e];
                }
                if (!is_const(n.b)) {
                    Matrix& gb = touch(n.b);
                    for (std::size_t e = 0; e < g.size(); ++e)
                        gb.data()[e] -= g.data()[e] * n.val.data()[e] / vb.data()[e];
                }
                break;
            }
            case OpKind::MatMul: {
                if (!is_const(n.a))
                    matmul_nt_accum(touch(n.a), g, nodes_[static_cast<std::size_t>(n.b)].val);
                if (!is_const(n.b))
                    matmul_tn_accum(touch(n.b), nodes_[static_cast<std::size_t>(n.a)].val, g);
                break;
            }
            case OpKind::Logistic: {
                if (is_const(n.a)) break;
                Matrix& ga = touch(n.a);
                for (std::size_t e = 0; e < g.size(); ++e) {
                    const double y = n.val.data()[e];
                    ga.data()[e] += g.data()[e] * y * (1.0 - y);
                }
                break;
            }
            case OpKind::Tanh: {
                if (is_const(n.a)) break;
                Matrix& ga = touch(n.a);
                for (std::size_t e = 0; e < g.size(); ++e) {
                    const double y = n.val.data()[e];
                    ga.data()[e] += g.data()[e] * (1.0 - y * y);
                }
                break;
            }
            case OpKind::Exp: {
                if (is_const(n.a)) break;
                Matrix& ga = touch(n.a);
                for (std::size_t e = 0; e < g.size(); ++e)
                    ga.data()[e] += g.data()[e] * n.val.data()[e];
                break;
            }
            case OpKind::Log: {
                if (is_const(n.a)) break;
                Matrix& ga = touch(n.a);
                const Matrix& va = nodes_[static_cast<std::size_t>(n.a)].val;
                for (std::size_t e = 0; e < g.size(); ++e)
                    ga.data()[e] += g.data()[e] / va.data()[e];
                break;
            }
            case OpKind::PowConst: {
                if (is_const(n.a)) break;
                Matrix& ga = touch(n.a);
                const Matrix& va = nodes_[static_cast<std::size_t>(n.a)].val;
                for (std::size_t e = 0; e < g.size(); ++e)
                    ga.data()[e] += g.data()[e] * n.scalar * std::pow(va.data()[e], n.scalar - 1.0);
                break;
            }
            case OpKind::ConcatCols: {
                const std::size_t ca = static_cast<std::size_t>(n.i0);
                if (!is_const(n.a)) {
                    Matrix& ga = touch(n.a);
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                        const double* gr = g.row(r);
                        double* par = ga.row(r);
                        for (std::size_t c = 0; c < ca; ++c) par[c] += gr[c];
                    }
                }
                if (!is_const(n.b)) {
                    Matrix& gb = touch(n.b);
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                        const double* gr = g.row(r);
                        double* pbr = gb.row(r);
                        for (std::size_t c = 0; c < gb.cols(); ++c) pbr[c] += gr[ca + c];
                    }
                }
                break;
            }
            case OpKind::SliceCols: {
                if (is_const(n.a)) break;
                Matrix& ga = touch(n.a);
                const std::size_t ofs = static_cast<std::size_t>(n.i0);
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    const double* gr = g.row(r);
                    double* par = ga.row(r) + ofs;
                    for (std::size_t c = 0; c < g.cols(); ++c) par[c] += gr[c];
                }
                break;
            }
            case OpKind::Sum: {
                if (is_const(n.a)) break;
                Matrix& ga = touch(n.a);
                const double gs = g(0, 0);
                for (double& v : ga.data()) v += gs;
                break;
            }
            case OpKind::Mean: {
                if (is_const(n.a)) break;
                Matrix& ga = touch(n.a);
                const double gs = g(0, 0) / static_cast<double>(ga.size());
                for (double& v : ga.data()) v += gs;
                break;
            }
            case OpKind::BroadcastRow: {
                if (is_const(n.a)) break;
                Matrix& ga = touch(n.a);
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < g.cols(); ++c) ga(0, c) += g(r, c);
                break;
            }
            case OpKind::BroadcastCol: {
                if (is_const(n.a)) break;
                Matrix& ga = touch(n.a);
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    const double* gr = g.row(r);
                    double acc = 0.0;
                    for (std::size_t c = 0; c < g.cols(); ++c) acc += gr[c];
                    ga(r, 0) += acc;
                }
                break;
            }
            case OpKind::BroadcastScalar: {
                if (is_const(n.a)) break;
                Matrix& ga = touch(n.a);
                double acc = 0.0;
                for (double v : g.data()) acc += v;
                ga(0, 0) += acc;
                break;
            }
            case OpKind::StackCols: {
                for (std::size_t j = 0; j < n.many.size(); ++j) {
                    if (is_const(n.many[j])) continue;
                    Matrix& gj = touch(n.many[j]);
                    for (std::size_t r = 0; r < g.rows(); ++r) gj(r, 0) += g(r, j);
                }
                break;
            }
            case OpKind::Gather: {
                if (is_const(n.a)) break;
                Matrix& ga = touch(n.a);
                for (std::size_t e = 0; e < n.idx_row.size(); ++e)
                    ga(static_cast<std::size_t>(n.idx_row[e]), static_cast<std::size_t>(n.idx_col[e])) +=
                        g.data()[e];
                break;
            }
            case OpKind::PinballMaskedMean: {
                const Matrix& p = nodes_[static_cast<std::size_t>(n.a)].val;
                const Matrix& t = nodes_[static_cast<std::size_t>(n.b)].val;
                const double gscale = g(0, 0) / static_cast<double>(n.i0);
                const double tau = n.scalar;
                const bool want_a = !is_const(n.a);
                const bool want_b = !is_const(n.b);
                Matrix* gp = want_a ? &touch(n.a) : nullptr;
                Matrix* gt = want_b ? &touch(n.b) : nullptr;
                for (std::size_t e = 0; e < p.size(); ++e) {
                    const double m = n.aux.data()[e];
                    if (m == 0.0) continue;
                    const bool under = t.data()[e] >= p.data()[e];
                    if (gp) gp->data()[e] += gscale * (under ? -tau : (1.0 - tau));
                    if (gt) gt->data()[e] += gscale * (under ? tau : -(1.0 - tau));
                }
                break;
            }
        }
    }
}

inline void backward(DiffArray loss) { loss.tape->backward(loss.id); }

} // namespace esrnn::ad
