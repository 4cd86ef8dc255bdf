#pragma once

#include <Eigen/Core>
#include <random>

namespace fedsched {

// Loss families trained federatedly. All are mean-per-sample so that the
// data-size-weighted average of local losses equals the loss on the pooled
// data. Parameters live in one flat vector; the MLP maps slices of it onto
// its layer matrices.
//
//   LinearRegression   0.5 * (y - w.x)^2, no bias
//   SquaredSvm         lambda/2 |w|^2 + 0.5 * max(0, 1 - y w.x)^2, y in {-1,+1}
//   Logistic           multinomial softmax cross-entropy with bias
//   Mlp                one hidden ReLU layer, softmax cross-entropy output
enum class ModelKind { LinearRegression, SquaredSvm, Logistic, Mlp };

struct ModelSpec {
  ModelKind kind = ModelKind::Mlp;
  int input_dim = 0;
  int num_classes = 0;  // classification kinds only; SquaredSvm wants 2
  int hidden = 64;      // Mlp only
  double svm_lambda = 0.01;

  int parameter_count() const;
};

// Zero for the convex kinds; the MLP draws layer-wise uniform
// [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))] weights with zero
// biases.
Eigen::VectorXd init_params(const ModelSpec& spec, std::mt19937_64& rng);

double model_loss(const ModelSpec& spec, const Eigen::VectorXd& w,
                  const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

Eigen::VectorXd model_gradient(const ModelSpec& spec, const Eigen::VectorXd& w,
                               const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// Classification: fraction of argmax (or sign, for the SVM) predictions
// matching the labels. NaN for regression, which has no accuracy notion.
double model_accuracy(const ModelSpec& spec, const Eigen::VectorXd& w,
                      const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

}  // namespace fedsched
