#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "vqg/errors.hpp"
#include "vqg/nn/rng.hpp"

namespace vqg::nn {

using Mat = Eigen::MatrixXd;

// Reverse-mode autodiff over dynamically built graphs of dense matrices.
// Sequences are [seq_len x width]; scalars are [1 x 1].
struct Node {
    Mat value;
    Mat grad; // allocated on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    void accumulate(const Mat& g) {
        if (grad.size() == 0) grad = Mat::Zero(value.rows(), value.cols());
        grad += g;
    }
};

using Var = std::shared_ptr<Node>;

inline Var make_var(Mat value, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

inline Var constant(Mat value) { return make_var(std::move(value), false); }
inline Var parameter(Mat value) { return make_var(std::move(value), true); }

inline Var scalar(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
}

namespace detail {

inline bool any_requires_grad(const std::vector<Var>& parents) {
    for (const auto& p : parents)
        if (p->requires_grad) return true;
    return false;
}

inline Var make_op(Mat value, std::vector<Var> parents, std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    n->requires_grad = any_requires_grad(n->parents);
    if (n->requires_grad) n->backward_fn = std::move(backward);
    return n;
}

inline void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (a->value.rows() != b->value.rows() || a->value.cols() != b->value.cols()) {
        throw ShapeError(std::string(op) + ": shape mismatch (" +
                         std::to_string(a->value.rows()) + "x" +
                         std::to_string(a->value.cols()) + " vs " +
                         std::to_string(b->value.rows()) + "x" +
                         std::to_string(b->value.cols()) + ")");
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
    if (a->value.cols() != b->value.rows()) {
        throw ShapeError("matmul: inner dimensions " + std::to_string(a->value.cols()) +
                         " vs " + std::to_string(b->value.rows()));
    }
    return detail::make_op(a->value * b->value, {a, b}, [a, b](Node& n) {
        if (a->requires_grad) a->accumulate(n.grad * b->value.transpose());
        if (b->requires_grad) b->accumulate(a->value.transpose() * n.grad);
    });
}

// a * b^T
inline Var matmul_nt(const Var& a, const Var& b) {
    if (a->value.cols() != b->value.cols()) {
        throw ShapeError("matmul_nt: inner dimensions " + std::to_string(a->value.cols()) +
                         " vs " + std::to_string(b->value.cols()));
    }
    return detail::make_op(a->value * b->value.transpose(), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) a->accumulate(n.grad * b->value);
        if (b->requires_grad) b->accumulate(n.grad.transpose() * a->value);
    });
}

inline Var add(const Var& a, const Var& b) {
    detail::check_same_shape(a, b, "add");
    return detail::make_op(a->value + b->value, {a, b}, [a, b](Node& n) {
        if (a->requires_grad) a->accumulate(n.grad);
        if (b->requires_grad) b->accumulate(n.grad);
    });
}

inline Var sub(const Var& a, const Var& b) {
    detail::check_same_shape(a, b, "sub");
    return detail::make_op(a->value - b->value, {a, b}, [a, b](Node& n) {
        if (a->requires_grad) a->accumulate(n.grad);
        if (b->requires_grad) b->accumulate(-n.grad);
    });
}

// Broadcast a [1 x C] row over every row of a.
inline Var add_rowvec(const Var& a, const Var& row) {
    if (row->value.rows() != 1 || row->value.cols() != a->value.cols()) {
        throw ShapeError("add_rowvec: row must be 1x" + std::to_string(a->value.cols()));
    }
    Mat v = a->value;
    v.rowwise() += row->value.row(0);
    return detail::make_op(std::move(v), {a, row}, [a, row](Node& n) {
        if (a->requires_grad) a->accumulate(n.grad);
        if (row->requires_grad) row->accumulate(n.grad.colwise().sum());
    });
}

inline Var hadamard(const Var& a, const Var& b) {
    detail::check_same_shape(a, b, "hadamard");
    return detail::make_op(a->value.cwiseProduct(b->value), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) a->accumulate(n.grad.cwiseProduct(b->value));
        if (b->requires_grad) b->accumulate(n.grad.cwiseProduct(a->value));
    });
}

inline Var scale(const Var& a, double s) {
    return detail::make_op(a->value * s, {a}, [a, s](Node& n) {
        if (a->requires_grad) a->accumulate(n.grad * s);
    });
}

inline Var add_const(const Var& a, double c) {
    return detail::make_op(a->value.array() + c, {a}, [a](Node& n) {
        if (a->requires_grad) a->accumulate(n.grad);
    });
}

inline Var relu(const Var& a) {
    return detail::make_op(a->value.cwiseMax(0.0), {a}, [a](Node& n) {
        if (a->requires_grad) {
            Mat g = n.grad;
            for (Eigen::Index i = 0; i < g.size(); ++i) {
                if (a->value(i) <= 0.0) g(i) = 0.0;
            }
            a->accumulate(g);
        }
    });
}

// Numerically stable row-wise softmax.
inline Var softmax_rows(const Var& a) {
    Mat y = a->value;
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const double mx = y.row(r).maxCoeff();
        y.row(r) = (y.row(r).array() - mx).exp();
        y.row(r) /= y.row(r).sum();
    }
    auto out = detail::make_op(y, {a}, [a](Node& n) {
        if (!a->requires_grad) return;
        Mat g(n.value.rows(), n.value.cols());
        for (Eigen::Index r = 0; r < n.value.rows(); ++r) {
            const double dot = n.grad.row(r).dot(n.value.row(r));
            g.row(r) = (n.grad.row(r).array() - dot) * n.value.row(r).array();
        }
        a->accumulate(g);
    });
    return out;
}

// Per-row layer normalization with learned gain/bias ([1 x C] each).
inline Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5) {
    const auto C = x->value.cols();
    if (gamma->value.cols() != C || beta->value.cols() != C) {
        throw ShapeError("layer_norm: gain/bias width mismatch");
    }
    Mat xhat(x->value.rows(), C);
    Mat inv_std(x->value.rows(), 1);
    for (Eigen::Index r = 0; r < x->value.rows(); ++r) {
        const double mu = x->value.row(r).mean();
        const double var = (x->value.row(r).array() - mu).square().mean();
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std(r, 0) = is;
        xhat.row(r) = (x->value.row(r).array() - mu) * is;
    }
    Mat y = xhat;
    y.array().rowwise() *= gamma->value.row(0).array();
    y.rowwise() += beta->value.row(0);
    return detail::make_op(
        std::move(y), {x, gamma, beta}, [x, gamma, beta, xhat, inv_std](Node& n) {
            const auto C = static_cast<double>(x->value.cols());
            if (gamma->requires_grad)
                gamma->accumulate(n.grad.cwiseProduct(xhat).colwise().sum());
            if (beta->requires_grad) beta->accumulate(n.grad.colwise().sum());
            if (!x->requires_grad) return;
            Mat gx(x->value.rows(), x->value.cols());
            for (Eigen::Index r = 0; r < x->value.rows(); ++r) {
                Eigen::RowVectorXd dxhat =
                    n.grad.row(r).cwiseProduct(gamma->value.row(0));
                const double s1 = dxhat.sum();
                const double s2 = dxhat.dot(xhat.row(r));
                gx.row(r) = (inv_std(r, 0) / C) *
                            (C * dxhat.array() - s1 - xhat.row(r).array() * s2);
            }
            x->accumulate(gx);
        });
}

// Gathers table rows by token id.
inline Var embedding_rows(const Var& table, const std::vector<int>& ids) {
    Mat v(static_cast<Eigen::Index>(ids.size()), table->value.cols());
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= table->value.rows()) {
            throw ShapeError("embedding_rows: id " + std::to_string(ids[i]) +
                             " outside table of " + std::to_string(table->value.rows()));
        }
        v.row(static_cast<Eigen::Index>(i)) = table->value.row(ids[i]);
    }
    return detail::make_op(std::move(v), {table}, [table, ids](Node& n) {
        if (!table->requires_grad) return;
        if (table->grad.size() == 0)
            table->grad = Mat::Zero(table->value.rows(), table->value.cols());
        for (size_t i = 0; i < ids.size(); ++i) {
            table->grad.row(ids[i]) += n.grad.row(static_cast<Eigen::Index>(i));
        }
    });
}

inline Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index n_cols) {
    if (start < 0 || start + n_cols > a->value.cols()) {
        throw ShapeError("slice_cols: range out of bounds");
    }
    return detail::make_op(a->value.middleCols(start, n_cols), {a},
                           [a, start, n_cols](Node& n) {
                               if (!a->requires_grad) return;
                               if (a->grad.size() == 0)
                                   a->grad = Mat::Zero(a->value.rows(), a->value.cols());
                               a->grad.middleCols(start, n_cols) += n.grad;
                           });
}

inline Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    Eigen::Index rows = parts[0]->value.rows();
    Eigen::Index cols = 0;
    for (const auto& p : parts) {
        if (p->value.rows() != rows) throw ShapeError("concat_cols: row mismatch");
        cols += p->value.cols();
    }
    Mat v(rows, cols);
    Eigen::Index off = 0;
    for (const auto& p : parts) {
        v.middleCols(off, p->value.cols()) = p->value;
        off += p->value.cols();
    }
    return detail::make_op(std::move(v), parts, [parts](Node& n) {
        Eigen::Index off = 0;
        for (const auto& p : parts) {
            if (p->requires_grad) p->accumulate(n.grad.middleCols(off, p->value.cols()));
            off += p->value.cols();
        }
    });
}

// Column-wise mean over rows -> [1 x C].
inline Var mean_rows(const Var& a) {
    const double inv = 1.0 / static_cast<double>(a->value.rows());
    return detail::make_op(a->value.colwise().mean(), {a}, [a, inv](Node& n) {
        if (a->requires_grad) a->accumulate(n.grad.replicate(a->value.rows(), 1) * inv);
    });
}

// Inverted-dropout; identity when not training or p == 0.
inline Var dropout(const Var& a, double p, Rng& rng, bool training) {
    if (!training || p <= 0.0) return a;
    if (p >= 1.0) throw DomainError("dropout: p must be < 1");
    Mat mask(a->value.rows(), a->value.cols());
    const double keep = 1.0 - p;
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        mask(i) = rng.uniform() < p ? 0.0 : 1.0 / keep;
    }
    return detail::make_op(a->value.cwiseProduct(mask), {a}, [a, mask](Node& n) {
        if (a->requires_grad) a->accumulate(n.grad.cwiseProduct(mask));
    });
}

// Cosine similarity of two [1 x D] rows -> [1 x 1].
inline Var cosine_similarity(const Var& a, const Var& b, double eps = 1e-12) {
    detail::check_same_shape(a, b, "cosine_similarity");
    if (a->value.rows() != 1) throw ShapeError("cosine_similarity: expects row vectors");
    const double na = std::max(a->value.row(0).norm(), eps);
    const double nb = std::max(b->value.row(0).norm(), eps);
    const double dot = a->value.row(0).dot(b->value.row(0));
    const double sim = dot / (na * nb);
    Mat v(1, 1);
    v(0, 0) = sim;
    return detail::make_op(std::move(v), {a, b}, [a, b, na, nb, sim](Node& n) {
        const double g = n.grad(0, 0);
        if (a->requires_grad) {
            a->accumulate(g * (b->value / (na * nb) - sim * a->value / (na * na)));
        }
        if (b->requires_grad) {
            b->accumulate(g * (a->value / (na * nb) - sim * b->value / (nb * nb)));
        }
    });
}

// Token-level cross entropy with optional per-class weights.
//
// logits: [T x V]; targets: length <= T, entries in [0,V) or kIgnoreIndex.
// Returns the weighted mean NLL over non-ignored positions (weighted by the
// target's class weight; plain mean when weights are empty).
inline constexpr int kIgnoreIndex = -1;

inline Var cross_entropy_logits(const Var& logits, const std::vector<int>& targets,
                                const std::vector<double>& class_weights = {}) {
    const auto T = logits->value.rows();
    const auto V = logits->value.cols();
    if (static_cast<Eigen::Index>(targets.size()) > T) {
        throw ShapeError("cross_entropy: more targets than logit rows");
    }
    Mat probs = Mat::Zero(static_cast<Eigen::Index>(targets.size()), V);
    double loss = 0.0;
    double weight_sum = 0.0;
    std::vector<double> pos_weight(targets.size(), 0.0);
    for (size_t t = 0; t < targets.size(); ++t) {
        const int y = targets[t];
        if (y == kIgnoreIndex) continue;
        if (y < 0 || y >= V) throw DomainError("cross_entropy: target id out of range");
        const auto row = logits->value.row(static_cast<Eigen::Index>(t));
        const double mx = row.maxCoeff();
        const Eigen::RowVectorXd ex = (row.array() - mx).exp();
        const double z = ex.sum();
        probs.row(static_cast<Eigen::Index>(t)) = ex / z;
        const double w =
            class_weights.empty() ? 1.0 : class_weights.at(static_cast<size_t>(y));
        pos_weight[t] = w;
        loss += w * (std::log(z) - (row(y) - mx));
        weight_sum += w;
    }
    if (weight_sum == 0.0) {
        throw DomainError("cross_entropy: no non-padding target positions");
    }
    Mat v(1, 1);
    v(0, 0) = loss / weight_sum;
    return detail::make_op(std::move(v), {logits},
                           [logits, targets, probs, pos_weight, weight_sum](Node& n) {
                               if (!logits->requires_grad) return;
                               const double g = n.grad(0, 0) / weight_sum;
                               Mat gl = Mat::Zero(logits->value.rows(), logits->value.cols());
                               for (size_t t = 0; t < targets.size(); ++t) {
                                   if (targets[t] == kIgnoreIndex) continue;
                                   const auto r = static_cast<Eigen::Index>(t);
                                   gl.row(r) = g * pos_weight[t] * probs.row(r);
                                   gl(r, targets[t]) -= g * pos_weight[t];
                               }
                               logits->accumulate(gl);
                           });
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

inline void backward(const Var& root, const Mat* seed = nullptr) {
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    // Iterative post-order DFS; recursion would overflow on deep decode graphs.
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (!node->requires_grad) {
            stack.pop_back();
            continue;
        }
        if (next_child == 0 && visited.count(node)) {
            stack.pop_back();
            continue;
        }
        if (next_child < node->parents.size()) {
            Node* child = node->parents[next_child++].get();
            if (!visited.count(child) && child->requires_grad) {
                stack.emplace_back(child, 0);
            }
        } else {
            visited.insert(node);
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->accumulate(seed ? *seed : Mat::Ones(root->value.rows(), root->value.cols()));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn && node->grad.size() != 0) node->backward_fn(*node);
    }
}

} // namespace vqg::nn
