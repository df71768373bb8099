#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "v2v/matrix.hpp"

namespace v2v {

/// Reverse-mode tape over Matrix values. Ops append nodes in topological
/// order; backward() walks the tape in reverse, accumulating into .grad.
class Tape {
public:
    int input(Matrix value) {
        nodes_.push_back(Node{std::move(value), {}, nullptr});
        return static_cast<int>(nodes_.size()) - 1;
    }

    const Matrix& value(int id) const { return nodes_[id].value; }
    const Matrix& grad(int id) const { return nodes_[id].grad; }
    size_t node_count() const { return nodes_.size(); }

    int matmul(int a, int b) {
        int id = make(v2v::matmul(value(a), value(b)));
        nodes_[id].backward = [a, b, id](Tape& t) {
            const Matrix& g = t.nodes_[id].grad;
            t.accumulate(a, v2v::matmul_nt(g, t.value(b)));
            t.accumulate(b, v2v::matmul(v2v::transpose(t.value(a)), g));
        };
        return id;
    }

    int add(int a, int b) {
        int id = make(v2v::add(value(a), value(b)));
        nodes_[id].backward = [a, b, id](Tape& t) {
            t.accumulate(a, t.nodes_[id].grad);
            t.accumulate(b, t.nodes_[id].grad);
        };
        return id;
    }

    int sub(int a, int b) {
        int id = make(v2v::sub(value(a), value(b)));
        nodes_[id].backward = [a, b, id](Tape& t) {
            t.accumulate(a, t.nodes_[id].grad);
            t.accumulate(b, v2v::scale(t.nodes_[id].grad, -1.0));
        };
        return id;
    }

    int mul(int a, int b) {
        int id = make(v2v::hadamard(value(a), value(b)));
        nodes_[id].backward = [a, b, id](Tape& t) {
            t.accumulate(a, v2v::hadamard(t.nodes_[id].grad, t.value(b)));
            t.accumulate(b, v2v::hadamard(t.nodes_[id].grad, t.value(a)));
        };
        return id;
    }

    int scale(int a, double s) {
        int id = make(v2v::scale(value(a), s));
        nodes_[id].backward = [a, s, id](Tape& t) {
            t.accumulate(a, v2v::scale(t.nodes_[id].grad, s));
        };
        return id;
    }

    /// Broadcast-add a 1xC row vector over every row of a.
    int add_row(int a, int row_vec) {
        Matrix v = value(a);
        add_row_inplace(v, value(row_vec));
        int id = make(std::move(v));
        nodes_[id].backward = [a, row_vec, id](Tape& t) {
            const Matrix& g = t.nodes_[id].grad;
            t.accumulate(a, g);
            Matrix rsum(1, g.cols());
            for (int i = 0; i < g.rows(); ++i)
                for (int j = 0; j < g.cols(); ++j) rsum.at(0, j) += g.at(i, j);
            t.accumulate(row_vec, rsum);
        };
        return id;
    }

    int transpose(int a) {
        int id = make(v2v::transpose(value(a)));
        nodes_[id].backward = [a, id](Tape& t) {
            t.accumulate(a, v2v::transpose(t.nodes_[id].grad));
        };
        return id;
    }

    int slice_cols(int a, int c0, int c1) {
        const Matrix& src = value(a);
        Matrix v(src.rows(), c1 - c0);
        for (int i = 0; i < src.rows(); ++i)
            for (int j = c0; j < c1; ++j) v.at(i, j - c0) = src.at(i, j);
        int id = make(std::move(v));
        nodes_[id].backward = [a, c0, id](Tape& t) {
            const Matrix& g = t.nodes_[id].grad;
            Matrix& ga = t.grad_slot(a);
            for (int i = 0; i < g.rows(); ++i)
                for (int j = 0; j < g.cols(); ++j) ga.at(i, c0 + j) += g.at(i, j);
        };
        return id;
    }

    int concat_cols(const std::vector<int>& parts) {
        int rows = value(parts[0]).rows();
        int cols = 0;
        for (int p : parts) cols += value(p).cols();
        Matrix v(rows, cols);
        int off = 0;
        for (int p : parts) {
            const Matrix& pv = value(p);
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < pv.cols(); ++j) v.at(i, off + j) = pv.at(i, j);
            off += pv.cols();
        }
        int id = make(std::move(v));
        std::vector<int> captured = parts;
        nodes_[id].backward = [captured, id](Tape& t) {
            const Matrix& g = t.nodes_[id].grad;
            int off = 0;
            for (int p : captured) {
                const int pc = t.value(p).cols();
                Matrix gp(g.rows(), pc);
                for (int i = 0; i < g.rows(); ++i)
                    for (int j = 0; j < pc; ++j) gp.at(i, j) = g.at(i, off + j);
                t.accumulate(p, gp);
                off += pc;
            }
        };
        return id;
    }

    int rmsnorm(int x, int gamma, double eps = 1e-6) {
        const Matrix& xv = value(x);
        const Matrix& gv = value(gamma);
        Matrix v(xv.rows(), xv.cols());
        std::vector<double> inv_rms(xv.rows());
        for (int i = 0; i < xv.rows(); ++i) {
            double ms = 0.0;
            for (int j = 0; j < xv.cols(); ++j) ms += xv.at(i, j) * xv.at(i, j);
            inv_rms[i] = 1.0 / std::sqrt(ms / xv.cols() + eps);
            for (int j = 0; j < xv.cols(); ++j) v.at(i, j) = xv.at(i, j) * inv_rms[i] * gv.at(0, j);
        }
        int id = make(std::move(v));
        nodes_[id].backward = [x, gamma, inv_rms, id](Tape& t) {
            const Matrix& g = t.nodes_[id].grad;
            const Matrix& xv = t.value(x);
            const Matrix& gv = t.value(gamma);
            const int C = xv.cols();
            Matrix gx(xv.rows(), C);
            Matrix gg(1, C);
            for (int i = 0; i < xv.rows(); ++i) {
                const double inv = inv_rms[i];
                double inner = 0.0;
                for (int k = 0; k < C; ++k) inner += g.at(i, k) * gv.at(0, k) * xv.at(i, k);
                const double coef = inner * inv * inv * inv / C;
                for (int j = 0; j < C; ++j) {
                    gx.at(i, j) = g.at(i, j) * gv.at(0, j) * inv - xv.at(i, j) * coef;
                    gg.at(0, j) += g.at(i, j) * xv.at(i, j) * inv;
                }
            }
            t.accumulate(x, gx);
            t.accumulate(gamma, gg);
        };
        return id;
    }

    int softmax_rows(int a) {
        Matrix v = value(a);
        softmax_rows_inplace(v);
        int id = make(std::move(v));
        nodes_[id].backward = [a, id](Tape& t) {
            const Matrix& y = t.nodes_[id].value;
            const Matrix& g = t.nodes_[id].grad;
            Matrix gx(y.rows(), y.cols());
            for (int i = 0; i < y.rows(); ++i) {
                double inner = 0.0;
                for (int k = 0; k < y.cols(); ++k) inner += g.at(i, k) * y.at(i, k);
                for (int j = 0; j < y.cols(); ++j)
                    gx.at(i, j) = y.at(i, j) * (g.at(i, j) - inner);
            }
            t.accumulate(a, gx);
        };
        return id;
    }

    int silu(int a) {
        const Matrix& xv = value(a);
        Matrix v(xv.rows(), xv.cols());
        for (size_t i = 0; i < xv.size(); ++i) {
            const double x = xv.data()[i];
            v.data()[i] = x / (1.0 + std::exp(-x));
        }
        int id = make(std::move(v));
        nodes_[id].backward = [a, id](Tape& t) {
            const Matrix& xv = t.value(a);
            const Matrix& g = t.nodes_[id].grad;
            Matrix gx(xv.rows(), xv.cols());
            for (size_t i = 0; i < xv.size(); ++i) {
                const double x = xv.data()[i];
                const double sig = 1.0 / (1.0 + std::exp(-x));
                gx.data()[i] = g.data()[i] * sig * (1.0 + x * (1.0 - sig));
            }
            t.accumulate(a, gx);
        };
        return id;
    }

    int mean_all(int a) {
        const Matrix& xv = value(a);
        double s = 0.0;
        for (double v : xv.data()) s += v;
        Matrix v(1, 1, s / static_cast<double>(xv.size()));
        int id = make(std::move(v));
        nodes_[id].backward = [a, id](Tape& t) {
            const double g = t.nodes_[id].grad.at(0, 0) / static_cast<double>(t.value(a).size());
            Matrix ga(t.value(a).rows(), t.value(a).cols(), g);
            t.accumulate(a, ga);
        };
        return id;
    }

    /// Seed the scalar loss node and sweep the tape in reverse.
    void backward(int loss) {
        if (value(loss).rows() != 1 || value(loss).cols() != 1)
            fail(ErrorKind::dimension, "backward needs a 1x1 loss node");
        for (Node& n : nodes_) n.grad = Matrix();
        grad_slot(loss).at(0, 0) = 1.0;
        for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
            if (nodes_[id].backward && !nodes_[id].grad.empty()) nodes_[id].backward(*this);
        }
    }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::function<void(Tape&)> backward;
    };

    int make(Matrix v) {
        nodes_.push_back(Node{std::move(v), {}, nullptr});
        return static_cast<int>(nodes_.size()) - 1;
    }

    Matrix& grad_slot(int id) {
        if (nodes_[id].grad.empty())
            nodes_[id].grad = Matrix(nodes_[id].value.rows(), nodes_[id].value.cols());
        return nodes_[id].grad;
    }

    void accumulate(int id, const Matrix& g) {
        Matrix& slot = grad_slot(id);
        for (size_t i = 0; i < slot.size(); ++i) slot.data()[i] += g.data()[i];
    }

    std::vector<Node> nodes_;
};

}  // namespace v2v
