#include "hha/numeric.hpp"

#include <cmath>
#include <stdexcept>

namespace hha {

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double m = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - m).exp();
    return e / e.sum();
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
    const double m = logits.maxCoeff();
    const Eigen::ArrayXd shifted = logits.array() - m;
    const double lse = std::log(shifted.exp().sum());
    return (shifted - lse).matrix();
}

int argmax(const Eigen::VectorXd& v) {
    int best = 0;
    for (int i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

double entropy(const Eigen::VectorXd& probs) {
    double h = 0.0;
    for (int i = 0; i < probs.size(); ++i) {
        const double p = probs[i];
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

double digamma(double x) {
    if (!(x > 0.0)) {
        throw std::domain_error("digamma: requires x > 0");
    }
    // recurrence up to x >= 6, then the asymptotic expansion
    double result = 0.0;
    while (x < 6.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    result += std::log(x) - 0.5 * inv;
    result -= inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    return result;
}

}  // namespace hha
