#include <functional>
#include <vector>

#include "doctest.h"
#include "lqg/rng.hpp"
#include "lqg/tape.hpp"
#include "oracles.hpp"

using namespace lqg;

namespace {

Matrix random_matrix(int r, int c, CounterRng& rng) {
    Matrix m(r, c);
    for (int i = 0; i < m.size(); ++i) m[i] = 2.0 * rng.next_uniform() - 1.0;
    return m;
}

// Small program representation so a graph can be rebuilt with perturbed leaf
// values for finite differencing.
struct GraphProgram {
    std::vector<std::pair<int, int>> leaf_shapes;
    std::function<Node(Tape&, const std::vector<Node>&)> build;

    double eval(const std::vector<Matrix>& leaf_values) const {
        Tape tape;
        std::vector<Node> leaves;
        leaves.reserve(leaf_values.size());
        for (const Matrix& v : leaf_values) leaves.push_back(tape.leaf(v));
        return scalar_value(build(tape, leaves));
    }

    // Analytic gradient, flattened over all leaves in order.
    std::vector<double> gradient(const std::vector<Matrix>& leaf_values) const {
        Tape tape;
        std::vector<Node> leaves;
        std::vector<int> ids;
        for (const Matrix& v : leaf_values) {
            leaves.push_back(tape.leaf(v));
            ids.push_back(leaves.back().id());
        }
        GradientMap grads = backward(build(tape, leaves), ids);
        std::vector<double> flat;
        for (int id : ids) {
            const Matrix& g = grads.at(id);
            flat.insert(flat.end(), g.data().begin(), g.data().end());
        }
        return flat;
    }
};

// Max relative error of the analytic gradient against per-coordinate central
// differences; denominator floored to absorb finite-difference round-off on
// near-zero coordinates.
double coordinate_fd_error(const GraphProgram& program, std::vector<Matrix> values,
                           double eps, double floor) {
    const std::vector<double> analytic = program.gradient(values);
    double max_rel = 0.0;
    size_t coord = 0;
    for (Matrix& leaf : values) {
        for (int i = 0; i < leaf.size(); ++i, ++coord) {
            const double keep = leaf[i];
            leaf[i] = keep + eps;
            const double fp = program.eval(values);
            leaf[i] = keep - eps;
            const double fm = program.eval(values);
            leaf[i] = keep;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double denom =
                std::max({std::abs(analytic[coord]), std::abs(numeric), floor});
            max_rel = std::max(max_rel, std::abs(analytic[coord] - numeric) / denom);
        }
    }
    return max_rel;
}

}  // namespace

TEST_CASE("backward on simple functionals") {
    SUBCASE("trace of a parameter") {
        Tape tape;
        Node theta = tape.leaf(Matrix::identity(2));
        Node loss = trace(theta);
        GradientMap grads = backward(loss, std::vector<int>{theta.id()});
        CHECK(max_abs_diff(grads.at(theta.id()), Matrix::identity(2)) == 0.0);
    }
    SUBCASE("squared norm") {
        Tape tape;
        Node theta = tape.leaf(Matrix{{1.0}, {-2.0}});
        GradientMap grads = backward(sum_squares(theta), std::vector<int>{theta.id()});
        CHECK(max_abs_diff(grads.at(theta.id()), Matrix{{2.0}, {-4.0}}) == 0.0);
    }
    SUBCASE("disconnected leaf gets a zero gradient of its shape") {
        Tape tape;
        Node used = tape.leaf(Matrix{{3.0}});
        Node unused = tape.leaf(Matrix(2, 2));
        GradientMap grads =
            backward(sum_squares(used), std::vector<int>{used.id(), unused.id()});
        CHECK(grads.at(unused.id()).rows() == 2);
        CHECK(max_abs(grads.at(unused.id())) == 0.0);
    }
    SUBCASE("non-scalar loss is a contract violation") {
        Tape tape;
        Node theta = tape.leaf(Matrix::identity(2));
        CHECK_THROWS_AS(backward(theta, std::vector<int>{theta.id()}),
                        std::invalid_argument);
    }
}

TEST_CASE("every primitive matches central finite differences") {
    CounterRng rng(101);
    const double eps = 1e-6;
    const double floor = 1e-3;

    auto check = [&](const char* name, GraphProgram program) {
        std::vector<Matrix> values;
        for (auto [r, c] : program.leaf_shapes) values.push_back(random_matrix(r, c, rng));
        const double err = coordinate_fd_error(program, values, eps, floor);
        INFO(name);
        CHECK(err < 1e-5);
    };

    check("matmul+add+sub+neg", GraphProgram{{{2, 2}, {2, 2}, {2, 2}},
        [](Tape&, const std::vector<Node>& l) {
            return sum_squares(sub(add(matmul(l[0], l[1]), neg(l[2])), l[1]));
        }});
    check("transpose+scale", GraphProgram{{{2, 3}},
        [](Tape&, const std::vector<Node>& l) {
            return sum_squares(scale(transpose(l[0]), -1.7));
        }});
    check("sigmoid+tanh", GraphProgram{{{3, 1}, {3, 1}},
        [](Tape&, const std::vector<Node>& l) {
            return sum_squares(hadamard(sigmoid(l[0]), tanh(l[1])));
        }});
    check("relu away from the kink", GraphProgram{{{3, 1}},
        [](Tape& t, const std::vector<Node>& l) {
            Node shifted = add(l[0], t.constant(Matrix(3, 1, {2.0, -2.0, 2.0})));
            return sum_squares(relu(shifted));
        }});
    check("elem_div with positive denominator", GraphProgram{{{2, 2}, {2, 2}},
        [](Tape& t, const std::vector<Node>& l) {
            Node denom = add(hadamard(l[1], l[1]),
                             t.constant(Matrix(2, 2, {0.5, 0.5, 0.5, 0.5})));
            return sum_squares(elem_div(l[0], denom));
        }});
    check("concat+reshape+trace", GraphProgram{{{2, 2}, {2, 2}},
        [](Tape&, const std::vector<Node>& l) {
            Node stacked = concat_rows(l[0], l[1]);          // 4 x 2
            Node wide = reshape(stacked, 2, 4);              // 2 x 4
            return add(trace(matmul(wide, transpose(wide))), sum_squares(l[1]));
        }});
    check("solve_spd", GraphProgram{{{2, 2}, {2, 1}},
        [](Tape& t, const std::vector<Node>& l) {
            Node spd = add(matmul(transpose(l[0]), l[0]),
                           t.constant(Matrix::diagonal(2, 2.0)));
            return sum_squares(solve_spd(spd, l[1]));
        }});
    check("rms_floor via running ssq", GraphProgram{{{3, 1}, {3, 1}},
        [](Tape&, const std::vector<Node>& l) {
            Node ssq = add(hadamard(l[0], l[0]), hadamard(l[1], l[1]));
            Node norm = rms_floor(ssq, 0.5, 1e-8);
            return sum_squares(elem_div(l[0], norm));
        }});
}

TEST_CASE("random multi-leaf graphs match directional finite differences") {
    // a closed-loop-shaped composite: recurrent chain with gates, solves and
    // normalization, ten differentiable leaves
    GraphProgram program{
        {{2, 2}, {2, 2}, {2, 1}, {2, 1}, {2, 2}, {2, 1}, {2, 2}, {2, 1}, {2, 2}, {2, 1}},
        [](Tape& t, const std::vector<Node>& l) {
            Node h = l[2];
            Node ssq = t.constant(Matrix(2, 1));
            Node loss = sum_squares(l[3]);
            for (int step = 1; step <= 4; ++step) {
                Node z = sigmoid(add(matmul(l[0], h), l[3]));
                Node cand = tanh(add(matmul(l[1], h), l[5]));
                Node ones = t.constant(Matrix(2, 1, {1.0, 1.0}));
                h = add(hadamard(sub(ones, z), h), hadamard(z, cand));
                ssq = add(ssq, hadamard(h, h));
                Node norm = rms_floor(ssq, 1.0 / step, 1e-8);
                Node feat = elem_div(h, norm);
                Node spd = add(matmul(transpose(l[4]), l[4]), t.constant(Matrix::diagonal(2, 1.5)));
                Node solved = solve_spd(spd, add(matmul(l[6], feat), l[7]));
                Node gain = reshape(concat_rows(solved, relu(add(matmul(l[8], h), l[9]))), 2, 2);
                h = add(matmul(gain, h), matmul(l[8], l[9]));
                loss = add(loss, sum_squares(h));
            }
            return loss;
        }};

    CounterRng seeds(77);
    for (int trial = 0; trial < 8; ++trial) {
        CounterRng rng(seeds.next_u64());
        std::vector<Matrix> values;
        for (auto [r, c] : program.leaf_shapes) values.push_back(random_matrix(r, c, rng));

        std::vector<double> theta;
        for (const Matrix& v : values) {
            theta.insert(theta.end(), v.data().begin(), v.data().end());
        }
        auto unflatten = [&](std::span<const double> flat) {
            std::vector<Matrix> out = values;
            size_t k = 0;
            for (Matrix& m : out) {
                for (int i = 0; i < m.size(); ++i) m[i] = flat[k++];
            }
            return out;
        };
        const std::vector<double> grad = program.gradient(values);
        const double err = oracles::directional_fd_error(
            [&](std::span<const double> flat) { return program.eval(unflatten(flat)); },
            theta, grad, 8, 1e-6, rng);
        CHECK(err < 1e-5);
    }
}

TEST_CASE("tape replay is bit-identical") {
    CounterRng rng(303);
    Tape tape;
    Node a = tape.leaf(random_matrix(2, 2, rng));
    Node b = tape.leaf(random_matrix(2, 2, rng));
    Node spd = add(matmul(transpose(a), a), tape.constant(Matrix::diagonal(2, 2.0)));
    Node out = sum_squares(solve_spd(spd, sigmoid(matmul(b, tanh(a)))));

    std::vector<Matrix> before;
    for (size_t i = 0; i < tape.size(); ++i) before.push_back(tape.value(static_cast<int>(i)));
    tape.replay();
    for (size_t i = 0; i < tape.size(); ++i) {
        const Matrix& after = tape.value(static_cast<int>(i));
        REQUIRE(before[i].size() == after.size());
        for (int k = 0; k < after.size(); ++k) {
            CHECK(before[i][k] == after[k]);  // exact
        }
    }
    CHECK(out.value().rows() == 1);
}

TEST_CASE("two identical forward passes agree exactly") {
    CounterRng rng(304);
    const Matrix a = random_matrix(3, 3, rng);
    const Matrix b = random_matrix(3, 1, rng);
    auto run = [&]() {
        Tape tape;
        Node na = tape.leaf(a);
        Node nb = tape.leaf(b);
        Node spd = add(matmul(transpose(na), na), tape.constant(Matrix::diagonal(3, 1.0)));
        return solve_spd(spd, nb).value();
    };
    const Matrix first = run();
    const Matrix second = run();
    for (int i = 0; i < first.size(); ++i) CHECK(first[i] == second[i]);
}
