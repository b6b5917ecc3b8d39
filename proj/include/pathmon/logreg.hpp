#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <vector>

#include "pathmon/error.hpp"

namespace pathmon {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// log(1 + exp(z)) without overflow.
template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1> softplus(const Eigen::ArrayBase<Derived>& z) {
    return z.max(typename Derived::Scalar(0)) + (-z.abs()).exp().log1p();
}

// 1 / (1 + exp(-z)), evaluated on the side that cannot overflow.
template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1> sigmoid(const Eigen::ArrayBase<Derived>& z) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Array<Scalar, Eigen::Dynamic, 1> e = (-z.abs()).exp();
    return (z >= Scalar(0)).select(Scalar(1) / (Scalar(1) + e), e / (Scalar(1) + e));
}

template <std::floating_point Scalar>
Scalar sigmoid(Scalar z) {
    const Scalar e = std::exp(-std::abs(z));
    return z >= Scalar(0) ? Scalar(1) / (Scalar(1) + e) : e / (Scalar(1) + e);
}

// Weighted mean negative log-likelihood plus (l2/2)*||w||^2 over parameters
// theta = [w; b]. The bias is not penalized.
template <typename Scalar>
class LogisticObjective {
public:
    LogisticObjective(const Eigen::Ref<const MatrixX<Scalar>>& x, const Eigen::Ref<const VectorX<Scalar>>& y,
                      Scalar l2, VectorX<Scalar> sample_weight = {})
        : x_(x), y_(y), l2_(l2), weight_(std::move(sample_weight)) {
        if (weight_.size() == 0) weight_ = VectorX<Scalar>::Ones(y.size());
        total_weight_ = weight_.sum();
    }

    Eigen::Index dimension() const { return x_.cols() + 1; }

    Scalar value(const VectorX<Scalar>& theta) const {
        const auto w = theta.head(x_.cols());
        const VectorX<Scalar> z = (x_ * w).array() + theta[x_.cols()];
        const Scalar nll = (weight_.array() * (softplus(z.array()) - y_.array() * z.array())).sum() / total_weight_;
        return nll + Scalar(0.5) * l2_ * w.squaredNorm();
    }

    VectorX<Scalar> gradient(const VectorX<Scalar>& theta) const {
        const auto w = theta.head(x_.cols());
        const VectorX<Scalar> z = (x_ * w).array() + theta[x_.cols()];
        const VectorX<Scalar> r = weight_.array() * (sigmoid(z.array()) - y_.array()) / total_weight_;
        VectorX<Scalar> g(dimension());
        g.head(x_.cols()) = x_.transpose() * r + l2_ * w;
        g[x_.cols()] = r.sum();
        return g;
    }

private:
    Eigen::Ref<const MatrixX<Scalar>> x_;
    Eigen::Ref<const VectorX<Scalar>> y_;
    Scalar l2_;
    VectorX<Scalar> weight_;
    Scalar total_weight_;
};

struct LogRegHyper {
    double l2_lambda = 0.01;
    int max_iters = 500;
    double tolerance = 1e-6;
    std::uint64_t seed = 0;      // full-batch training is deterministic; kept for provenance
    bool balanced_class_weight = false;
};

template <typename Scalar>
struct LogRegModel {
    VectorX<Scalar> weights;
    Scalar bias = 0;
    LogRegHyper hyper;
    int iterations = 0;
    Scalar final_objective = 0;
    bool converged = false;
    std::vector<Scalar> objective_history;  // objective after each accepted step, starting at theta = 0

    VectorX<Scalar> logits(const Eigen::Ref<const MatrixX<Scalar>>& x) const {
        if (x.cols() != weights.size()) {
            throw Error("width_mismatch", "feature width " + std::to_string(x.cols()) + " does not match model width " +
                                              std::to_string(weights.size()));
        }
        return (x * weights).array() + bias;
    }

    VectorX<Scalar> predict_proba(const Eigen::Ref<const MatrixX<Scalar>>& x) const {
        return sigmoid(logits(x).array()).matrix();
    }
};

// Full-batch gradient descent with a fixed diagonal preconditioner (inverse of
// a per-coordinate curvature bound, so a strong penalty on the weights does not
// stall the unpenalized bias). The trial step is the Barzilai-Borwein
// estimate, shrunk by halving until the Armijo condition holds, so every
// accepted step lowers the objective. Stops when max|gradient| < tolerance or
// after max_iters steps.
template <typename Scalar>
LogRegModel<Scalar> train_logreg(const Eigen::Ref<const MatrixX<Scalar>>& x, const Eigen::Ref<const VectorX<Scalar>>& y,
                                 const LogRegHyper& hyper = {}) {
    if (x.rows() == 0 || x.rows() != y.size()) throw Error("empty_training_set", "no training rows");
    if (!x.allFinite() || !y.allFinite()) throw Error("non_finite", "training data contains non-finite values");
    const Eigen::Index positives = (y.array() > Scalar(0.5)).count();
    if (positives == 0 || positives == y.size()) {
        throw Error("single_class", "training data contains a single class");
    }

    VectorX<Scalar> sample_weight;
    if (hyper.balanced_class_weight) {
        const Scalar n = Scalar(y.size());
        const Scalar wp = n / (Scalar(2) * Scalar(positives));
        const Scalar wn = n / (Scalar(2) * Scalar(y.size() - positives));
        sample_weight = (y.array() > Scalar(0.5)).select(VectorX<Scalar>::Constant(y.size(), wp),
                                                        VectorX<Scalar>::Constant(y.size(), wn));
    }
    const LogisticObjective<Scalar> objective(x, y, Scalar(hyper.l2_lambda), sample_weight);

    LogRegModel<Scalar> model;
    model.hyper = hyper;
    VectorX<Scalar> theta = VectorX<Scalar>::Zero(objective.dimension());
    Scalar f = objective.value(theta);
    VectorX<Scalar> g = objective.gradient(theta);
    model.objective_history.push_back(f);

    // 0.25 bounds the second derivative of the log-loss in the logit.
    const VectorX<Scalar> w = sample_weight.size() ? sample_weight : VectorX<Scalar>::Ones(y.size());
    VectorX<Scalar> precond(objective.dimension());
    precond.head(x.cols()) =
        (Scalar(0.25) * (w.transpose() * x.array().square().matrix()).transpose() / w.sum()).array() +
        Scalar(hyper.l2_lambda);
    precond[x.cols()] = Scalar(0.25);
    precond = precond.cwiseMax(Scalar(1e-12)).cwiseInverse();

    constexpr Scalar armijo = Scalar(1e-4);
    Scalar step = Scalar(1);
    int it = 0;
    for (; it < hyper.max_iters; ++it) {
        if (g.cwiseAbs().maxCoeff() < Scalar(hyper.tolerance)) {
            model.converged = true;
            break;
        }
        const VectorX<Scalar> d = precond.cwiseProduct(g);
        const Scalar g2 = g.dot(d);
        VectorX<Scalar> next;
        Scalar f_next = f;
        bool accepted = false;
        for (int halvings = 0; halvings < 60; ++halvings) {
            next = theta - step * d;
            f_next = objective.value(next);
            if (std::isfinite(f_next) && f_next <= f - armijo * step * g2) {
                accepted = true;
                break;
            }
            step *= Scalar(0.5);
        }
        if (!accepted) break;  // no representable descent step left

        VectorX<Scalar> g_next = objective.gradient(next);
        const VectorX<Scalar> s = next - theta;
        const VectorX<Scalar> dg = g_next - g;
        const Scalar sy = s.dot(dg);
        step = sy > Scalar(0) ? std::clamp(s.cwiseQuotient(precond).dot(s) / sy, Scalar(1e-10), Scalar(1e10)) : Scalar(1);

        theta = std::move(next);
        f = f_next;
        g = std::move(g_next);
        model.objective_history.push_back(f);
    }
    if (!model.converged && g.cwiseAbs().maxCoeff() < Scalar(hyper.tolerance)) model.converged = true;

    model.weights = theta.head(x.cols());
    model.bias = theta[x.cols()];
    model.iterations = it;
    model.final_objective = f;
    if (!std::isfinite(f)) throw Error("non_finite", "logistic objective diverged");
    return model;
}

}  // namespace pathmon
