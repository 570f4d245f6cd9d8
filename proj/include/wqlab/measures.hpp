#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "wqlab/rng.hpp"

namespace wqlab {

using Point = Eigen::VectorXd;
/// Points stored column-wise: a d x n matrix.
using PointSet = Eigen::MatrixXd;

enum class Norm { L1, L2, LInf };

std::string to_string(Norm norm);
Norm parse_norm(const std::string& name);

template <typename Derived>
double norm_of(Norm norm, const Eigen::MatrixBase<Derived>& v) {
  switch (norm) {
    case Norm::L1:
      return v.template lpNorm<1>();
    case Norm::L2:
      return v.norm();
    case Norm::LInf:
      break;
  }
  return v.template lpNorm<Eigen::Infinity>();
}

template <typename A, typename B>
double distance(Norm norm, const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
  return norm_of(norm, x - y);
}

/// Hot-loop variant over raw coordinates.
inline double distance(Norm norm, const double* x, const double* y, Eigen::Index d) {
  double acc = 0.0;
  switch (norm) {
    case Norm::L1:
      for (Eigen::Index k = 0; k < d; ++k) acc += std::abs(x[k] - y[k]);
      return acc;
    case Norm::L2:
      for (Eigen::Index k = 0; k < d; ++k) acc += (x[k] - y[k]) * (x[k] - y[k]);
      return std::sqrt(acc);
    case Norm::LInf:
      break;
  }
  for (Eigen::Index k = 0; k < d; ++k) acc = std::max(acc, std::abs(x[k] - y[k]));
  return acc;
}

/// t^p with the common exponents special-cased.
inline double power_p(double t, double p) {
  if (p == 1.0) return t;
  if (p == 2.0) return t * t;
  return std::pow(t, p);
}

/// Diameter of [0,1)^d under the norm, i.e. the norm of (1, ..., 1). It is
/// also the equivalence constant in ||x|| <= c ||x||_max.
double unit_cube_diameter(Norm norm, int d);

/// Axis-aligned half-open box [lower, upper).
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Box() = default;
  Box(Eigen::VectorXd lo, Eigen::VectorXd hi);

  static Box unit_cube(int d);

  int dim() const { return static_cast<int>(lower.size()); }
  double volume() const;
  bool contains(const double* x) const;
  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& x) const {
    return ((x.array() >= lower.array()) && (x.array() < upper.array())).all();
  }
  /// True when this box lies inside `outer`.
  bool within(const Box& outer) const;
  /// Diameter under the norm (norm of the side-length vector).
  double diameter(Norm norm) const;
  std::optional<Box> intersect(const Box& other) const;
};

/// Finitely supported measure sum_i w_i delta_{x_i}.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;
  /// Drops zero-weight atoms; throws DomainError on negative or non-finite input.
  DiscreteMeasure(PointSet points, Eigen::VectorXd weights);

  /// Empirical measure (1/N) sum delta_{X_j} of the columns.
  static DiscreteMeasure empirical(PointSet points);
  static DiscreteMeasure dirac(const Point& x, double mass = 1.0);

  int dim() const { return static_cast<int>(points_.rows()); }
  Eigen::Index size() const { return points_.cols(); }
  const PointSet& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  double total_mass() const { return total_mass_; }
  auto point(Eigen::Index i) const { return points_.col(i); }
  double weight(Eigen::Index i) const { return weights_[i]; }

  /// Measure of a half-open box.
  double mass_in(const Box& box) const;
  DiscreteMeasure scaled(double factor) const;
  /// Image under x -> a x + shift.
  DiscreteMeasure mapped(double a, const Eigen::VectorXd& shift) const;
  /// Sum of two measures on the same space (atoms concatenated).
  DiscreteMeasure operator+(const DiscreteMeasure& other) const;

 private:
  PointSet points_;
  Eigen::VectorXd weights_;
  double total_mass_ = 0.0;
};

class ModelMeasure;

/// Uniform distribution on a box.
struct UniformBox {
  Box box;
};

/// Density constant on each cell of the level-m dyadic grid of [0,1)^d.
/// Values are indexed with axis 0 varying fastest.
struct PiecewiseConstantDensity {
  int dim = 0;
  int level = 0;
  std::vector<double> values;
  /// Cumulative cell probabilities, filled by make_piecewise_constant.
  std::vector<double> cumulative;

  std::int64_t cells_per_axis() const { return std::int64_t{1} << level; }
  double cell_side() const { return std::ldexp(1.0, -level); }
};

/// w delta_a + (1 - w) delta_b.
struct TwoPoint {
  Point a;
  Point b;
  double w = 0.5;
};

struct Mixture {
  std::vector<double> weights;
  std::vector<ModelMeasure> components;
};

/// Product of d centred Laplace laws with scale b: density prod exp(-|x_k|/b) / (2b).
struct ProductLaplace {
  double scale = 1.0;
  int dim = 1;
};

/// Reference probability measure given analytically.
class ModelMeasure {
 public:
  using Variant = std::variant<UniformBox, PiecewiseConstantDensity, TwoPoint, Mixture, ProductLaplace>;

  ModelMeasure(UniformBox m);
  ModelMeasure(PiecewiseConstantDensity m);
  ModelMeasure(TwoPoint m);
  ModelMeasure(Mixture m);
  ModelMeasure(ProductLaplace m);

  const Variant& variant() const { return v_; }
  int dim() const { return dim_; }

  template <typename T>
  const T* get_if() const {
    return std::get_if<T>(&v_);
  }

 private:
  Variant v_;
  int dim_ = 0;
};

ModelMeasure make_uniform_box(Eigen::VectorXd lower, Eigen::VectorXd upper);
ModelMeasure make_unit_cube(int d);
/// Validates that sum(value * cell volume) = 1 within 1e-10.
ModelMeasure make_piecewise_constant(int dim, int level, std::vector<double> values);
ModelMeasure make_two_point(Point a, Point b, double w);
ModelMeasure make_mixture(std::vector<double> weights, std::vector<ModelMeasure> components);
ModelMeasure make_product_laplace(double scale, int dim);

/// n i.i.d. draws as columns of a d x n matrix; deterministic in (m, n, seed).
PointSet sample(const ModelMeasure& m, Eigen::Index n, std::uint64_t seed);
/// One draw using the caller's stream.
Point sample_one(const ModelMeasure& m, Rng& rng);
/// One draw from m conditioned on the box. Throws DomainError if m(box) = 0.
Point sample_in_box(const ModelMeasure& m, const Box& box, Rng& rng);

/// Exact probability of a half-open box.
double box_mass(const ModelMeasure& m, const Box& box);

/// E ||X||_max^q. Closed forms where available, quadrature for ProductLaplace.
double moment_maxnorm(const ModelMeasure& m, double q);

/// Tail quantities outside the box: mass m(R^d \ box) and
/// E[||X||_max^q ; X outside box]. Supported when every component is either
/// contained in the box or is a ProductLaplace with a symmetric box.
struct TailMoment {
  double mass = 0.0;
  double moment = 0.0;
};
TailMoment tail_moment_maxnorm(const ModelMeasure& m, const Box& box, double q);

/// Smallest box containing the support, when the support is bounded and the
/// measure has a density (UniformBox, PiecewiseConstantDensity and mixtures of
/// those). Atomic and unbounded families return nullopt.
std::optional<Box> density_support_box(const ModelMeasure& m);

/// Symmetric box [-t, t)^d outside of which a ProductLaplace (or a mixture
/// whose unbounded components are ProductLaplace) has mass <= tail_mass.
Box truncation_box(const ModelMeasure& m, double tail_mass);

/// Atoms of a purely atomic measure (TwoPoint and mixtures of TwoPoint).
std::optional<DiscreteMeasure> atoms_of(const ModelMeasure& m);

}  // namespace wqlab
