#pragma once

#include <Eigen/Dense>

namespace hha {

// softmax with max-logit subtraction
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

// log of softmax, same stabilization
Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits);

// argmax with ties broken toward the lowest index
int argmax(const Eigen::VectorXd& v);

// Shannon entropy in nats; treats 0*ln(0) as 0
double entropy(const Eigen::VectorXd& probs);

// digamma function for x > 0
double digamma(double x);

}  // namespace hha
