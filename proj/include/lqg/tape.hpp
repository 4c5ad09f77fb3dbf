#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "lqg/matrix.hpp"

namespace lqg {

class Tape;

// Handle to a recorded value on a tape. A node is either a leaf (parameter
// or constant) or the result of exactly one recorded operation.
class Node {
public:
    Node() = default;
    Node(Tape* tape, int id) : tape_(tape), id_(id) {}

    const Matrix& value() const;
    int id() const { return id_; }
    Tape* tape() const { return tape_; }
    bool valid() const { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    int id_ = -1;
};

// Gradient of a scalar with respect to requested leaves, keyed by tape id.
using GradientMap = std::unordered_map<int, Matrix>;

// Single-writer record of a computation; replay() recomputes every node
// value from the leaves through the same code path used at emission.
class Tape {
public:
    enum class Op : uint8_t {
        leaf,
        add,
        sub,
        neg,
        matmul,
        transpose,
        scale,
        solve_spd,
        sigmoid,
        tanh_e,
        relu,
        hadamard,
        elem_div,
        concat_rows,
        reshape,
        sum_squares,
        trace,
        rms_floor,
    };

    struct Record {
        Op op = Op::leaf;
        int a = -1;
        int b = -1;
        double aux0 = 0.0;  // scale factor / inv_count
        double aux1 = 0.0;  // rms floor
        bool needs_grad = false;
        Matrix value;
    };

    Node leaf(Matrix value);      // differentiable leaf (parameter)
    Node constant(Matrix value);  // non-differentiable leaf

    Node emit(Op op, const Node& a, const Node& b, double aux0 = 0.0, double aux1 = 0.0);
    Node emit(Op op, const Node& a, double aux0 = 0.0, double aux1 = 0.0);

    const Record& record(int id) const { return records_[id]; }
    const Matrix& value(int id) const { return records_[id].value; }
    size_t size() const { return records_.size(); }

    // Recomputes all non-leaf values in emission order.
    void replay();

private:
    Matrix compute(const Record& r) const;

    std::vector<Record> records_;
};

// Reverse-mode gradient of a scalar (1x1) node with respect to the given
// leaves. Leaves the loss does not depend on receive zero gradients.
GradientMap backward(const Node& loss, std::span<const int> leaves);

Node operator+(const Node& a, const Node& b);
Node operator-(const Node& a, const Node& b);
Node operator-(const Node& a);
Node operator*(const Node& a, const Node& b);

Node matmul(const Node& a, const Node& b);
Node add(const Node& a, const Node& b);
Node sub(const Node& a, const Node& b);
Node neg(const Node& a);
Node scale(const Node& a, double s);
Node transpose(const Node& a);
Node hadamard(const Node& a, const Node& b);
Node elem_div(const Node& a, const Node& b);
Node sigmoid(const Node& a);
Node tanh(const Node& a);
Node relu(const Node& a);
Node concat_rows(const Node& a, const Node& b);
Node reshape(const Node& a, int rows, int cols);
Node sum_squares(const Node& a);
Node trace(const Node& a);
Node rms_floor(const Node& a, double inv_count, double floor);
Node solve_spd(const Node& a, const Node& b);

double scalar_value(const Node& a);

}  // namespace lqg
