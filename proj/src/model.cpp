#include "fedsched/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace fedsched {
namespace {

void check_data(const ModelSpec& spec, const Eigen::VectorXd& w,
                const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() == 0) throw std::domain_error("model: empty dataset");
  if (X.rows() != y.size()) throw std::domain_error("model: feature/label row mismatch");
  if (X.cols() != spec.input_dim) throw std::domain_error("model: feature width mismatch");
  if (w.size() != spec.parameter_count()) throw std::domain_error("model: parameter size mismatch");
}

// Softmax cross-entropy over a score matrix (rows = samples), with labels as
// class indices. Returns mean loss; fills grad_scores with d(mean loss)/d(scores)
// when non-null. Row-wise max subtraction keeps the exponentials bounded.
double softmax_xent(const Eigen::MatrixXd& scores, const Eigen::VectorXd& y,
                    Eigen::MatrixXd* grad_scores) {
  const Eigen::Index n = scores.rows();
  const Eigen::VectorXd row_max = scores.rowwise().maxCoeff();
  Eigen::MatrixXd p = (scores.colwise() - row_max).array().exp();
  const Eigen::VectorXd z = p.rowwise().sum();
  double loss = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const int label = static_cast<int>(y[r]);
    loss += std::log(z[r]) - (scores(r, label) - row_max[r]);
    p.row(r) /= z[r];
    if (grad_scores) p(r, label) -= 1.0;
  }
  if (grad_scores) *grad_scores = p / static_cast<double>(n);
  return loss / static_cast<double>(n);
}

struct MlpViews {
  Eigen::Map<const Eigen::MatrixXd> w1;
  Eigen::Map<const Eigen::RowVectorXd> b1;
  Eigen::Map<const Eigen::MatrixXd> w2;
  Eigen::Map<const Eigen::RowVectorXd> b2;
};

MlpViews mlp_views(const ModelSpec& s, const Eigen::VectorXd& w) {
  const double* p = w.data();
  const int in = s.input_dim, hid = s.hidden, out = s.num_classes;
  return {{p, in, hid},
          {p + in * hid, hid},
          {p + in * hid + hid, hid, out},
          {p + in * hid + hid + hid * out, out}};
}

}  // namespace

int ModelSpec::parameter_count() const {
  switch (kind) {
    case ModelKind::LinearRegression:
    case ModelKind::SquaredSvm:
      return input_dim;
    case ModelKind::Logistic:
      return (input_dim + 1) * num_classes;
    case ModelKind::Mlp:
      return input_dim * hidden + hidden + hidden * num_classes + num_classes;
  }
  throw std::logic_error("ModelSpec: unknown kind");
}

Eigen::VectorXd init_params(const ModelSpec& spec, std::mt19937_64& rng) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(spec.parameter_count());
  if (spec.kind != ModelKind::Mlp) return w;
  auto glorot = [&rng](double* dst, int count, int fan_in, int fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (int i = 0; i < count; ++i) dst[i] = u(rng);
  };
  const int in = spec.input_dim, hid = spec.hidden, out = spec.num_classes;
  glorot(w.data(), in * hid, in, hid);
  glorot(w.data() + in * hid + hid, hid * out, hid, out);
  return w;
}

double model_loss(const ModelSpec& spec, const Eigen::VectorXd& w,
                  const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  check_data(spec, w, X, y);
  const double n = static_cast<double>(X.rows());
  switch (spec.kind) {
    case ModelKind::LinearRegression: {
      return 0.5 * (y - X * w).squaredNorm() / n;
    }
    case ModelKind::SquaredSvm: {
      const Eigen::ArrayXd margin =
          (1.0 - y.array() * (X * w).array()).max(0.0);
      return 0.5 * spec.svm_lambda * w.squaredNorm() +
             0.5 * margin.square().sum() / n;
    }
    case ModelKind::Logistic: {
      Eigen::Map<const Eigen::MatrixXd> wm(w.data(), spec.input_dim + 1,
                                           spec.num_classes);
      Eigen::MatrixXd scores =
          X * wm.topRows(spec.input_dim);  // bias row added below
      scores.rowwise() += wm.row(spec.input_dim);
      return softmax_xent(scores, y, nullptr);
    }
    case ModelKind::Mlp: {
      const MlpViews v = mlp_views(spec, w);
      const Eigen::MatrixXd h =
          ((X * v.w1).rowwise() + v.b1).cwiseMax(0.0);
      Eigen::MatrixXd scores = h * v.w2;
      scores.rowwise() += v.b2;
      return softmax_xent(scores, y, nullptr);
    }
  }
  throw std::logic_error("model_loss: unknown kind");
}

Eigen::VectorXd model_gradient(const ModelSpec& spec, const Eigen::VectorXd& w,
                               const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  check_data(spec, w, X, y);
  const double n = static_cast<double>(X.rows());
  switch (spec.kind) {
    case ModelKind::LinearRegression: {
      return X.transpose() * (X * w - y) / n;
    }
    case ModelKind::SquaredSvm: {
      const Eigen::ArrayXd margin =
          (1.0 - y.array() * (X * w).array()).max(0.0);
      return spec.svm_lambda * w -
             X.transpose() * (margin * y.array()).matrix() / n;
    }
    case ModelKind::Logistic: {
      Eigen::Map<const Eigen::MatrixXd> wm(w.data(), spec.input_dim + 1,
                                           spec.num_classes);
      Eigen::MatrixXd scores = X * wm.topRows(spec.input_dim);
      scores.rowwise() += wm.row(spec.input_dim);
      Eigen::MatrixXd gs;
      softmax_xent(scores, y, &gs);
      Eigen::VectorXd grad(w.size());
      Eigen::Map<Eigen::MatrixXd> gm(grad.data(), spec.input_dim + 1,
                                     spec.num_classes);
      gm.topRows(spec.input_dim) = X.transpose() * gs;
      gm.row(spec.input_dim) = gs.colwise().sum();
      return grad;
    }
    case ModelKind::Mlp: {
      const MlpViews v = mlp_views(spec, w);
      const Eigen::MatrixXd pre = (X * v.w1).rowwise() + v.b1;
      const Eigen::MatrixXd h = pre.cwiseMax(0.0);
      Eigen::MatrixXd scores = h * v.w2;
      scores.rowwise() += v.b2;
      Eigen::MatrixXd gs;
      softmax_xent(scores, y, &gs);
      const Eigen::MatrixXd gh =
          (gs * v.w2.transpose()).array() * (pre.array() > 0.0).cast<double>();
      Eigen::VectorXd grad(w.size());
      const int in = spec.input_dim, hid = spec.hidden, out = spec.num_classes;
      Eigen::Map<Eigen::MatrixXd>(grad.data(), in, hid) = X.transpose() * gh;
      Eigen::Map<Eigen::RowVectorXd>(grad.data() + in * hid, hid) = gh.colwise().sum();
      Eigen::Map<Eigen::MatrixXd>(grad.data() + in * hid + hid, hid, out) =
          h.transpose() * gs;
      Eigen::Map<Eigen::RowVectorXd>(grad.data() + in * hid + hid + hid * out, out) =
          gs.colwise().sum();
      return grad;
    }
  }
  throw std::logic_error("model_gradient: unknown kind");
}

double model_accuracy(const ModelSpec& spec, const Eigen::VectorXd& w,
                      const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  check_data(spec, w, X, y);
  const Eigen::Index n = X.rows();
  switch (spec.kind) {
    case ModelKind::LinearRegression:
      return std::numeric_limits<double>::quiet_NaN();
    case ModelKind::SquaredSvm: {
      const Eigen::ArrayXd pred = (X * w).array();
      double hits = 0.0;
      for (Eigen::Index r = 0; r < n; ++r) {
        hits += ((pred[r] >= 0.0) == (y[r] >= 0.0)) ? 1.0 : 0.0;
      }
      return hits / static_cast<double>(n);
    }
    case ModelKind::Logistic:
    case ModelKind::Mlp: {
      Eigen::MatrixXd scores;
      if (spec.kind == ModelKind::Logistic) {
        Eigen::Map<const Eigen::MatrixXd> wm(w.data(), spec.input_dim + 1,
                                             spec.num_classes);
        scores = X * wm.topRows(spec.input_dim);
        scores.rowwise() += wm.row(spec.input_dim);
      } else {
        const MlpViews v = mlp_views(spec, w);
        const Eigen::MatrixXd h = ((X * v.w1).rowwise() + v.b1).cwiseMax(0.0);
        scores = h * v.w2;
        scores.rowwise() += v.b2;
      }
      double hits = 0.0;
      for (Eigen::Index r = 0; r < n; ++r) {
        Eigen::Index best;
        scores.row(r).maxCoeff(&best);
        hits += (static_cast<int>(best) == static_cast<int>(y[r])) ? 1.0 : 0.0;
      }
      return hits / static_cast<double>(n);
    }
  }
  throw std::logic_error("model_accuracy: unknown kind");
}

}  // namespace fedsched
