#pragma once

#include <cmath>
#include <string>

#include "recon/sparse_core.hpp"

namespace recon {

enum class ScaleMode {
  none,                ///< w_i
  reciprocal,          ///< w_i / yhat_i
  reciprocal_squared,  ///< w_i / (yhat_i + epsilon)^2
};

/// Importance weights plus scale correction.
template <typename Scalar = double>
struct WeightSpec {
  /// Per-entry importance; empty means all ones.
  Vector<Scalar> importance;
  ScaleMode scale_mode = ScaleMode::none;
  Scalar epsilon = Scalar(1);
};

/// Diagonal of W: importance_i times the scale term selected by `spec.scale_mode`.
template <typename Scalar>
DiagonalWeights<Scalar> build_weights(const WeightSpec<Scalar>& spec,
                                      const VectorRef<Scalar>& forecast) {
  const Index n = forecast.size();
  if (spec.importance.size() != 0 && spec.importance.size() != n) {
    throw DimensionError("build_weights: " + std::to_string(spec.importance.size()) +
                         " importance weights for " + std::to_string(n) + " forecasts");
  }
  if (!(spec.epsilon >= Scalar(0))) throw InvalidInput("build_weights: epsilon must be >= 0");

  Vector<Scalar> w(n);
  for (Index i = 0; i < n; ++i) {
    const Scalar importance = spec.importance.size() ? spec.importance[i] : Scalar(1);
    if (!(importance > Scalar(0))) {
      throw InvalidInput("build_weights: importance of entry " + std::to_string(i) +
                         " must be positive");
    }
    const Scalar yhat = forecast[i];
    if (!std::isfinite(static_cast<double>(yhat))) {
      throw InvalidInput("build_weights: forecast " + std::to_string(i) + " is not finite");
    }
    Scalar scale = Scalar(1);
    switch (spec.scale_mode) {
      case ScaleMode::none:
        break;
      case ScaleMode::reciprocal:
        // Zero forecasts are rejected rather than shifted.
        if (!(yhat > Scalar(0))) {
          throw InvalidInput("build_weights: reciprocal weighting needs forecast " +
                             std::to_string(i) + " > 0");
        }
        scale = Scalar(1) / yhat;
        break;
      case ScaleMode::reciprocal_squared: {
        const Scalar shifted = yhat + spec.epsilon;
        scale = Scalar(1) / (shifted * shifted);
        break;
      }
    }
    const Scalar value = importance * scale;
    if (!(value > Scalar(0)) || !std::isfinite(static_cast<double>(value))) {
      throw InvalidInput("build_weights: weight " + std::to_string(i) +
                         " is not positive and finite");
    }
    w[i] = value;
  }
  return DiagonalWeights<Scalar>(std::move(w));
}

/// (y - yhat)^T W (y - yhat).
template <typename Scalar>
Scalar quadratic_objective(const VectorRef<Scalar>& y,
                           const VectorRef<Scalar>& forecast,
                           const DiagonalWeights<Scalar>& w) {
  if (y.size() != forecast.size() || y.size() != w.size()) {
    throw DimensionError("quadratic_objective: length mismatch");
  }
  return ((y - forecast).array().square() * w.entries().array()).sum();
}

/// ((y - yhat) / (yhat + eps))^T W ((y - yhat) / (yhat + eps)), evaluated literally.
template <typename Scalar>
Scalar percentage_objective(const VectorRef<Scalar>& y,
                            const VectorRef<Scalar>& forecast,
                            const DiagonalWeights<Scalar>& importance, Scalar epsilon) {
  if (y.size() != forecast.size() || y.size() != importance.size()) {
    throw DimensionError("percentage_objective: length mismatch");
  }
  Scalar total = Scalar(0);
  for (Index i = 0; i < y.size(); ++i) {
    const Scalar denom = forecast[i] + epsilon;
    if (denom == Scalar(0)) {
      throw InvalidInput("percentage_objective: forecast " + std::to_string(i) +
                         " + epsilon is zero");
    }
    const Scalar r = (y[i] - forecast[i]) / denom;
    total += r * importance[i] * r;
  }
  return total;
}

}  // namespace recon
