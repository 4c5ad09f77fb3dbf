#pragma once

#include "lqg/matrix.hpp"
#include "lqg/tape.hpp"

namespace lqg {

// Value domains for code written once and run either as plain matrix
// arithmetic or recorded on a tape for differentiation. The shared free
// functions (matmul, add, sigmoid, ...) are overloaded for both value types.

struct MatrixDomain {
    using Value = Matrix;
    Matrix constant(Matrix m) const { return m; }
};

struct TapeDomain {
    using Value = Node;
    Tape* tape;
    Node constant(Matrix m) const { return tape->constant(std::move(m)); }
};

inline const Matrix& plain_value(const Matrix& v) { return v; }
inline const Matrix& plain_value(const Node& v) { return v.value(); }

}  // namespace lqg
