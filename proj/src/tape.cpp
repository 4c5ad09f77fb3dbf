#include "lqg/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace lqg {

const Matrix& Node::value() const { return tape_->value(id_); }

Node Tape::leaf(Matrix value) {
    Record r;
    r.op = Op::leaf;
    r.needs_grad = true;
    r.value = std::move(value);
    records_.push_back(std::move(r));
    return Node(this, static_cast<int>(records_.size()) - 1);
}

Node Tape::constant(Matrix value) {
    Record r;
    r.op = Op::leaf;
    r.needs_grad = false;
    r.value = std::move(value);
    records_.push_back(std::move(r));
    return Node(this, static_cast<int>(records_.size()) - 1);
}

Node Tape::emit(Op op, const Node& a, const Node& b, double aux0, double aux1) {
    Record r;
    r.op = op;
    r.a = a.id();
    r.b = b.id();
    r.aux0 = aux0;
    r.aux1 = aux1;
    r.needs_grad = records_[r.a].needs_grad || records_[r.b].needs_grad;
    r.value = compute(r);
    records_.push_back(std::move(r));
    return Node(this, static_cast<int>(records_.size()) - 1);
}

Node Tape::emit(Op op, const Node& a, double aux0, double aux1) {
    Record r;
    r.op = op;
    r.a = a.id();
    r.aux0 = aux0;
    r.aux1 = aux1;
    r.needs_grad = records_[r.a].needs_grad;
    r.value = compute(r);
    records_.push_back(std::move(r));
    return Node(this, static_cast<int>(records_.size()) - 1);
}

Matrix Tape::compute(const Record& r) const {
    const Matrix& va = records_[r.a].value;
    switch (r.op) {
        case Op::add: return lqg::add(va, records_[r.b].value);
        case Op::sub: return lqg::sub(va, records_[r.b].value);
        case Op::neg: return lqg::neg(va);
        case Op::matmul: return lqg::matmul(va, records_[r.b].value);
        case Op::transpose: return lqg::transpose(va);
        case Op::scale: return lqg::scale(va, r.aux0);
        case Op::solve_spd: return lqg::solve_spd(va, records_[r.b].value);
        case Op::sigmoid: return lqg::sigmoid(va);
        case Op::tanh_e: return lqg::tanh(va);
        case Op::relu: return lqg::relu(va);
        case Op::hadamard: return lqg::hadamard(va, records_[r.b].value);
        case Op::elem_div: return lqg::elem_div(va, records_[r.b].value);
        case Op::concat_rows: return lqg::concat_rows(va, records_[r.b].value);
        case Op::reshape:
            return lqg::reshape(va, static_cast<int>(r.aux0), static_cast<int>(r.aux1));
        case Op::sum_squares: return lqg::sum_squares(va);
        case Op::trace: return lqg::trace(va);
        case Op::rms_floor: return lqg::rms_floor(va, r.aux0, r.aux1);
        case Op::leaf: break;
    }
    throw std::logic_error("Tape::compute: leaf has no producing operation");
}

void Tape::replay() {
    for (auto& r : records_) {
        if (r.op != Op::leaf) r.value = compute(r);
    }
}

GradientMap backward(const Node& loss, std::span<const int> leaves) {
    const Tape& tape = *loss.tape();
    const Matrix& lv = loss.value();
    if (lv.rows() != 1 || lv.cols() != 1) {
        throw std::invalid_argument("backward: loss must be 1x1, got " + lv.shape_string());
    }

    std::vector<Matrix> grads(static_cast<size_t>(loss.id()) + 1);
    grads[loss.id()] = Matrix(1, 1, {1.0});

    auto accumulate = [&](int pid, Matrix delta) {
        if (pid < 0 || !tape.record(pid).needs_grad) return;
        Matrix& g = grads[pid];
        if (g.empty()) {
            g = std::move(delta);
        } else {
            for (int i = 0; i < g.size(); ++i) g[i] += delta[i];
        }
    };

    for (int id = loss.id(); id >= 0; --id) {
        const Tape::Record& r = tape.record(id);
        const Matrix& g = grads[id];
        if (g.empty() || !r.needs_grad || r.op == Tape::Op::leaf) continue;
        const Matrix& v = r.value;
        const Matrix& va = tape.value(r.a);
        switch (r.op) {
            case Tape::Op::add:
                accumulate(r.a, g);
                accumulate(r.b, g);
                break;
            case Tape::Op::sub:
                accumulate(r.a, g);
                accumulate(r.b, neg(g));
                break;
            case Tape::Op::neg:
                accumulate(r.a, neg(g));
                break;
            case Tape::Op::matmul: {
                const Matrix& vb = tape.value(r.b);
                accumulate(r.a, matmul(g, transpose(vb)));
                accumulate(r.b, matmul(transpose(va), g));
                break;
            }
            case Tape::Op::transpose:
                accumulate(r.a, transpose(g));
                break;
            case Tape::Op::scale:
                accumulate(r.a, scale(g, r.aux0));
                break;
            case Tape::Op::solve_spd: {
                // x = M^{-1} b with M = (a + a^T)/2; grad_b = M^{-1} g,
                // grad_M = -grad_b x^T, grad_a = sym(grad_M).
                const Matrix gb = solve_spd(symmetrize(va), g);
                accumulate(r.b, gb);
                accumulate(r.a, symmetrize(neg(matmul(gb, transpose(v)))));
                break;
            }
            case Tape::Op::sigmoid: {
                Matrix d = g;
                for (int i = 0; i < d.size(); ++i) d[i] *= v[i] * (1.0 - v[i]);
                accumulate(r.a, std::move(d));
                break;
            }
            case Tape::Op::tanh_e: {
                Matrix d = g;
                for (int i = 0; i < d.size(); ++i) d[i] *= 1.0 - v[i] * v[i];
                accumulate(r.a, std::move(d));
                break;
            }
            case Tape::Op::relu: {
                Matrix d = g;
                for (int i = 0; i < d.size(); ++i) d[i] = va[i] > 0.0 ? d[i] : 0.0;
                accumulate(r.a, std::move(d));
                break;
            }
            case Tape::Op::hadamard: {
                const Matrix& vb = tape.value(r.b);
                accumulate(r.a, hadamard(g, vb));
                accumulate(r.b, hadamard(g, va));
                break;
            }
            case Tape::Op::elem_div: {
                const Matrix& vb = tape.value(r.b);
                accumulate(r.a, elem_div(g, vb));
                Matrix d = g;
                for (int i = 0; i < d.size(); ++i) d[i] *= -v[i] / vb[i];
                accumulate(r.b, std::move(d));
                break;
            }
            case Tape::Op::concat_rows: {
                const Matrix& vb = tape.value(r.b);
                Matrix ga(va.rows(), va.cols());
                Matrix gbm(vb.rows(), vb.cols());
                std::copy(g.data().begin(), g.data().begin() + va.size(), ga.data().begin());
                std::copy(g.data().begin() + va.size(), g.data().end(), gbm.data().begin());
                accumulate(r.a, std::move(ga));
                accumulate(r.b, std::move(gbm));
                break;
            }
            case Tape::Op::reshape:
                accumulate(r.a, reshape(g, va.rows(), va.cols()));
                break;
            case Tape::Op::sum_squares:
                accumulate(r.a, scale(va, 2.0 * g[0]));
                break;
            case Tape::Op::trace:
                accumulate(r.a, Matrix::diagonal(va.rows(), g[0]));
                break;
            case Tape::Op::rms_floor: {
                Matrix d = g;
                for (int i = 0; i < d.size(); ++i) {
                    d[i] = v[i] > r.aux1 ? d[i] * r.aux0 / (2.0 * v[i]) : 0.0;
                }
                accumulate(r.a, std::move(d));
                break;
            }
            case Tape::Op::leaf: break;
        }
    }

    GradientMap out;
    for (int id : leaves) {
        const Matrix& g = grads[id];
        const Matrix& v = tape.value(id);
        out.emplace(id, g.empty() ? Matrix(v.rows(), v.cols()) : g);
    }
    return out;
}

namespace {

void require_same_tape(const Node& a, const Node& b, const char* op) {
    if (a.tape() != b.tape()) {
        throw std::invalid_argument(std::string(op) + ": nodes belong to different tapes");
    }
}

}  // namespace

Node add(const Node& a, const Node& b) {
    require_same_tape(a, b, "add");
    return a.tape()->emit(Tape::Op::add, a, b);
}
Node sub(const Node& a, const Node& b) {
    require_same_tape(a, b, "sub");
    return a.tape()->emit(Tape::Op::sub, a, b);
}
Node neg(const Node& a) { return a.tape()->emit(Tape::Op::neg, a); }
Node matmul(const Node& a, const Node& b) {
    require_same_tape(a, b, "matmul");
    return a.tape()->emit(Tape::Op::matmul, a, b);
}
Node scale(const Node& a, double s) { return a.tape()->emit(Tape::Op::scale, a, s); }
Node transpose(const Node& a) { return a.tape()->emit(Tape::Op::transpose, a); }
Node hadamard(const Node& a, const Node& b) {
    require_same_tape(a, b, "hadamard");
    return a.tape()->emit(Tape::Op::hadamard, a, b);
}
Node elem_div(const Node& a, const Node& b) {
    require_same_tape(a, b, "elem_div");
    return a.tape()->emit(Tape::Op::elem_div, a, b);
}
Node sigmoid(const Node& a) { return a.tape()->emit(Tape::Op::sigmoid, a); }
Node tanh(const Node& a) { return a.tape()->emit(Tape::Op::tanh_e, a); }
Node relu(const Node& a) { return a.tape()->emit(Tape::Op::relu, a); }
Node concat_rows(const Node& a, const Node& b) {
    require_same_tape(a, b, "concat_rows");
    return a.tape()->emit(Tape::Op::concat_rows, a, b);
}
Node reshape(const Node& a, int rows, int cols) {
    return a.tape()->emit(Tape::Op::reshape, a, rows, cols);
}
Node sum_squares(const Node& a) { return a.tape()->emit(Tape::Op::sum_squares, a); }
Node trace(const Node& a) { return a.tape()->emit(Tape::Op::trace, a); }
Node rms_floor(const Node& a, double inv_count, double floor) {
    return a.tape()->emit(Tape::Op::rms_floor, a, inv_count, floor);
}
Node solve_spd(const Node& a, const Node& b) {
    require_same_tape(a, b, "solve_spd");
    return a.tape()->emit(Tape::Op::solve_spd, a, b);
}

Node operator+(const Node& a, const Node& b) { return add(a, b); }
Node operator-(const Node& a, const Node& b) { return sub(a, b); }
Node operator-(const Node& a) { return neg(a); }
Node operator*(const Node& a, const Node& b) { return matmul(a, b); }

double scalar_value(const Node& a) { return scalar_value(a.value()); }

}  // namespace lqg
