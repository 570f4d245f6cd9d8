#include "wqlab/measures.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "wqlab/error.hpp"

namespace wqlab {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kQuadratureTolerance = 1e-10;

double checked_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw DomainError(std::string(what) + " must be finite");
  return x;
}

// Value strictly below `hi` for a draw lo + u (hi - lo) that rounded up.
double clamp_below(double x, double lo, double hi) {
  if (x >= hi) return std::nextafter(hi, lo);
  return x;
}

// P(lo <= X < hi) for a centred 1-d Laplace law with scale b, computed on the
// side of zero that avoids cancellation.
double laplace_interval(double lo, double hi, double b) {
  if (hi <= lo) return 0.0;
  if (lo >= 0.0) return 0.5 * (std::exp(-lo / b) - std::exp(-hi / b));
  if (hi <= 0.0) return 0.5 * (std::exp(hi / b) - std::exp(lo / b));
  return 1.0 - 0.5 * std::exp(lo / b) - 0.5 * std::exp(-hi / b);
}

// Draw from a 1-d Laplace law conditioned on [lo, hi).
double laplace_truncated(double lo, double hi, double b, Rng& rng) {
  const double u = rng.uniform();
  if (lo >= 0.0) {
    // Exponential tail shifted to lo.
    const double span = std::isfinite(hi) ? -std::expm1(-(hi - lo) / b) : 1.0;
    return clamp_below(lo - b * std::log1p(-u * span), lo, hi);
  }
  if (hi <= 0.0) {
    const double span = std::isfinite(lo) ? -std::expm1(-(hi - lo) / b) : 1.0;
    const double x = hi + b * std::log1p(-u * span);
    return x >= hi ? std::nextafter(hi, lo) : std::max(x, lo);
  }
  const double flo = std::isfinite(lo) ? 0.5 * std::exp(lo / b) : 0.0;
  const double fhi = std::isfinite(hi) ? 1.0 - 0.5 * std::exp(-hi / b) : 1.0;
  const double v = flo + u * (fhi - flo);
  const double x = v < 0.5 ? b * std::log(2.0 * v) : -b * std::log(2.0 * (1.0 - v));
  return clamp_below(std::max(x, lo), lo, hi);
}

// E ||X||_max^q for X uniform on a box. P(||X||_max <= s) is a product of
// piecewise linear factors, so the integral of q s^{q-1} (1 - P) is exact.
double uniform_box_moment(const Box& box, double q) {
  const int d = box.dim();
  std::vector<double> breaks{0.0};
  for (int k = 0; k < d; ++k) {
    breaks.push_back(std::abs(box.lower[k]));
    breaks.push_back(std::abs(box.upper[k]));
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  double total = 0.0;
  for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
    const double s0 = breaks[b];
    const double s1 = breaks[b + 1];
    const double mid = 0.5 * (s0 + s1);
    // Polynomial coefficients of prod_k G_k(s) on [s0, s1].
    std::vector<double> poly{1.0};
    for (int k = 0; k < d; ++k) {
      const double lo = box.lower[k];
      const double hi = box.upper[k];
      const double len = hi - lo;
      double c0 = 0.0;
      double c1 = 0.0;
      if (std::min(mid, hi) - std::max(-mid, lo) > 0.0) {
        // overlap = min(s, hi) - max(-s, lo)
        if (mid < hi) {
          c1 += 1.0;
        } else {
          c0 += hi;
        }
        if (-mid > lo) {
          c1 += 1.0;
        } else {
          c0 -= lo;
        }
      }
      c0 /= len;
      c1 /= len;
      std::vector<double> next(poly.size() + 1, 0.0);
      for (std::size_t j = 0; j < poly.size(); ++j) {
        next[j] += c0 * poly[j];
        next[j + 1] += c1 * poly[j];
      }
      poly = std::move(next);
    }
    double piece = std::pow(s1, q) - std::pow(s0, q);
    for (std::size_t j = 0; j < poly.size(); ++j) {
      if (poly[j] == 0.0) continue;
      const double e = q + static_cast<double>(j);
      piece -= poly[j] * q / e * (std::pow(s1, e) - std::pow(s0, e));
    }
    total += piece;
  }
  return total;
}

// P(||X||_max > s) for ProductLaplace.
double laplace_maxnorm_survival(double s, double b, int d) {
  // 1 - (1 - e^{-s/b})^d, evaluated without cancellation for large s.
  return -std::expm1(d * std::log1p(-std::exp(-s / b)));
}

Box cell_box(const PiecewiseConstantDensity& pc, const std::vector<std::int64_t>& idx) {
  const double side = pc.cell_side();
  Eigen::VectorXd lo(pc.dim), hi(pc.dim);
  for (int k = 0; k < pc.dim; ++k) {
    lo[k] = static_cast<double>(idx[k]) * side;
    hi[k] = static_cast<double>(idx[k] + 1) * side;
  }
  return Box(lo, hi);
}

std::vector<std::int64_t> unflatten(std::int64_t flat, int dim, std::int64_t per_axis) {
  std::vector<std::int64_t> idx(dim);
  for (int k = 0; k < dim; ++k) {
    idx[k] = flat % per_axis;
    flat /= per_axis;
  }
  return idx;
}

// Calls f(flat_index, overlap_volume, overlap_box) for every grid cell that
// meets the box with positive volume.
template <typename F>
void for_each_overlapping_cell(const PiecewiseConstantDensity& pc, const Box& box, F&& f) {
  const int d = pc.dim;
  const std::int64_t per_axis = pc.cells_per_axis();
  const double scale = static_cast<double>(per_axis);
  std::vector<std::int64_t> first(d), last(d);
  for (int k = 0; k < d; ++k) {
    const double lo = std::clamp(box.lower[k], 0.0, 1.0);
    const double hi = std::clamp(box.upper[k], 0.0, 1.0);
    if (hi <= lo) return;
    first[k] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(lo * scale)), 0, per_axis - 1);
    last[k] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::ceil(hi * scale)) - 1, 0, per_axis - 1);
  }
  std::vector<std::int64_t> idx = first;
  const double side = pc.cell_side();
  while (true) {
    double vol = 1.0;
    std::int64_t flat = 0;
    std::int64_t stride = 1;
    Eigen::VectorXd lo(d), hi(d);
    for (int k = 0; k < d; ++k) {
      lo[k] = std::max(box.lower[k], static_cast<double>(idx[k]) * side);
      hi[k] = std::min(box.upper[k], static_cast<double>(idx[k] + 1) * side);
      vol *= std::max(0.0, hi[k] - lo[k]);
      flat += idx[k] * stride;
      stride *= per_axis;
    }
    if (vol > 0.0) f(flat, vol, lo, hi);
    int k = 0;
    for (; k < d; ++k) {
      if (idx[k] < last[k]) {
        ++idx[k];
        break;
      }
      idx[k] = first[k];
    }
    if (k == d) break;
  }
}

Point sample_uniform(const Box& box, Rng& rng) {
  Point x(box.dim());
  for (int k = 0; k < box.dim(); ++k) {
    const double lo = box.lower[k];
    const double hi = box.upper[k];
    x[k] = clamp_below(lo + rng.uniform() * (hi - lo), lo, hi);
  }
  return x;
}

std::size_t pick(const std::vector<double>& cumulative, double u) {
  const double target = u * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  std::size_t i = static_cast<std::size_t>(it - cumulative.begin());
  if (i >= cumulative.size()) i = cumulative.size() - 1;
  // Skip zero-width entries that upper_bound can land on only at the end.
  while (i > 0 && cumulative[i] == cumulative[i - 1]) --i;
  return i;
}

}  // namespace

std::string to_string(Norm norm) {
  switch (norm) {
    case Norm::L1:
      return "l1";
    case Norm::L2:
      return "l2";
    case Norm::LInf:
      break;
  }
  return "linf";
}

Norm parse_norm(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "l1") return Norm::L1;
  if (s == "l2") return Norm::L2;
  if (s == "linf" || s == "max") return Norm::LInf;
  throw ConfigError("unknown norm '" + name + "' (expected l1, l2 or linf)");
}

double unit_cube_diameter(Norm norm, int d) {
  if (d < 1) throw DomainError("dimension must be >= 1");
  switch (norm) {
    case Norm::L1:
      return static_cast<double>(d);
    case Norm::L2:
      return std::sqrt(static_cast<double>(d));
    case Norm::LInf:
      break;
  }
  return 1.0;
}

// ---------------------------------------------------------------- Box

Box::Box(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size() || lower.size() == 0) {
    throw DomainError("box corners must have equal, nonzero dimension");
  }
  for (Eigen::Index k = 0; k < lower.size(); ++k) {
    if (std::isnan(lower[k]) || std::isnan(upper[k]) || !(lower[k] < upper[k])) {
      throw DomainError("box is ill-formed: need lower < upper on every axis");
    }
  }
}

Box Box::unit_cube(int d) {
  return Box(Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d));
}

double Box::volume() const { return (upper - lower).prod(); }

bool Box::contains(const double* x) const {
  for (int k = 0; k < dim(); ++k) {
    if (!(x[k] >= lower[k] && x[k] < upper[k])) return false;
  }
  return true;
}

bool Box::within(const Box& outer) const {
  return (lower.array() >= outer.lower.array()).all() && (upper.array() <= outer.upper.array()).all();
}

double Box::diameter(Norm norm) const { return norm_of(norm, upper - lower); }

std::optional<Box> Box::intersect(const Box& other) const {
  Eigen::VectorXd lo = lower.cwiseMax(other.lower);
  Eigen::VectorXd hi = upper.cwiseMin(other.upper);
  if (((hi - lo).array() <= 0.0).any()) return std::nullopt;
  return Box(std::move(lo), std::move(hi));
}

// ---------------------------------------------------------------- DiscreteMeasure

DiscreteMeasure::DiscreteMeasure(PointSet points, Eigen::VectorXd weights) {
  if (points.cols() != weights.size()) throw DomainError("atom and weight counts differ");
  if (!points.allFinite()) throw DomainError("atom coordinates must be finite");
  Eigen::Index kept = 0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw DomainError("atom weights must be finite and nonnegative");
    }
    if (weights[i] > 0.0) ++kept;
  }
  if (kept == weights.size()) {
    points_ = std::move(points);
    weights_ = std::move(weights);
  } else {
    points_.resize(points.rows(), kept);
    weights_.resize(kept);
    Eigen::Index j = 0;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
      if (weights[i] > 0.0) {
        points_.col(j) = points.col(i);
        weights_[j] = weights[i];
        ++j;
      }
    }
  }
  total_mass_ = weights_.sum();
}

DiscreteMeasure DiscreteMeasure::empirical(PointSet points) {
  const Eigen::Index n = points.cols();
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, n > 0 ? 1.0 / static_cast<double>(n) : 0.0);
  return DiscreteMeasure(std::move(points), std::move(w));
}

DiscreteMeasure DiscreteMeasure::dirac(const Point& x, double mass) {
  return DiscreteMeasure(PointSet(x), Eigen::VectorXd::Constant(1, mass));
}

double DiscreteMeasure::mass_in(const Box& box) const {
  double m = 0.0;
  for (Eigen::Index i = 0; i < size(); ++i) {
    if (box.contains(points_.col(i).data())) m += weights_[i];
  }
  return m;
}

DiscreteMeasure DiscreteMeasure::scaled(double factor) const {
  return DiscreteMeasure(points_, weights_ * factor);
}

DiscreteMeasure DiscreteMeasure::mapped(double a, const Eigen::VectorXd& shift) const {
  PointSet moved = (a * points_).colwise() + shift;
  return DiscreteMeasure(std::move(moved), weights_);
}

DiscreteMeasure DiscreteMeasure::operator+(const DiscreteMeasure& other) const {
  if (size() == 0) return other;
  if (other.size() == 0) return *this;
  if (dim() != other.dim()) throw DomainError("cannot add measures of different dimension");
  PointSet pts(dim(), size() + other.size());
  pts << points_, other.points_;
  Eigen::VectorXd w(size() + other.size());
  w << weights_, other.weights_;
  return DiscreteMeasure(std::move(pts), std::move(w));
}

// ---------------------------------------------------------------- ModelMeasure

ModelMeasure::ModelMeasure(UniformBox m) : v_(std::move(m)) {
  dim_ = std::get<UniformBox>(v_).box.dim();
}
ModelMeasure::ModelMeasure(PiecewiseConstantDensity m) : v_(std::move(m)) {
  dim_ = std::get<PiecewiseConstantDensity>(v_).dim;
}
ModelMeasure::ModelMeasure(TwoPoint m) : v_(std::move(m)) {
  dim_ = static_cast<int>(std::get<TwoPoint>(v_).a.size());
}
ModelMeasure::ModelMeasure(Mixture m) : v_(std::move(m)) {
  dim_ = std::get<Mixture>(v_).components.front().dim();
}
ModelMeasure::ModelMeasure(ProductLaplace m) : v_(std::move(m)) {
  dim_ = std::get<ProductLaplace>(v_).dim;
}

ModelMeasure make_uniform_box(Eigen::VectorXd lower, Eigen::VectorXd upper) {
  for (Eigen::Index k = 0; k < lower.size(); ++k) checked_finite(lower[k], "box corner");
  for (Eigen::Index k = 0; k < upper.size(); ++k) checked_finite(upper[k], "box corner");
  return ModelMeasure(UniformBox{Box(std::move(lower), std::move(upper))});
}

ModelMeasure make_unit_cube(int d) { return ModelMeasure(UniformBox{Box::unit_cube(d)}); }

ModelMeasure make_piecewise_constant(int dim, int level, std::vector<double> values) {
  if (dim < 1 || level < 0 || level * dim > 30) {
    throw DomainError("piecewise constant density needs dim >= 1 and 0 <= level*dim <= 30");
  }
  const std::size_t cells = std::size_t{1} << (level * dim);
  if (values.size() != cells) {
    std::ostringstream os;
    os << "piecewise constant density at level " << level << " in dimension " << dim << " needs " << cells
       << " cell values, got " << values.size();
    throw DomainError(os.str());
  }
  const double cell_volume = std::ldexp(1.0, -level * dim);
  PiecewiseConstantDensity pc{dim, level, std::move(values), {}};
  pc.cumulative.resize(cells);
  double acc = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    if (!(pc.values[i] >= 0.0) || !std::isfinite(pc.values[i])) {
      throw DomainError("cell values must be finite and nonnegative");
    }
    acc += pc.values[i] * cell_volume;
    pc.cumulative[i] = acc;
  }
  if (std::abs(acc - 1.0) > 1e-10) {
    std::ostringstream os;
    os.precision(17);
    os << "piecewise constant density integrates to " << acc << ", expected 1";
    throw DomainError(os.str());
  }
  return ModelMeasure(std::move(pc));
}

ModelMeasure make_two_point(Point a, Point b, double w) {
  if (a.size() != b.size() || a.size() == 0) throw DomainError("two-point atoms need equal dimension");
  if (!a.allFinite() || !b.allFinite()) throw DomainError("atom coordinates must be finite");
  if (!(w >= 0.0 && w <= 1.0)) throw DomainError("two-point weight must lie in [0, 1]");
  return ModelMeasure(TwoPoint{std::move(a), std::move(b), w});
}

ModelMeasure make_mixture(std::vector<double> weights, std::vector<ModelMeasure> components) {
  if (weights.empty() || weights.size() != components.size()) {
    throw DomainError("mixture needs one weight per component and at least one component");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("mixture weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("mixture weights must sum to 1");
  const int d = components.front().dim();
  for (const auto& c : components) {
    if (c.dim() != d) throw DomainError("mixture components must share a dimension");
  }
  return ModelMeasure(Mixture{std::move(weights), std::move(components)});
}

ModelMeasure make_product_laplace(double scale, int dim) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("Laplace scale must be positive");
  if (dim < 1) throw DomainError("dimension must be >= 1");
  return ModelMeasure(ProductLaplace{scale, dim});
}

// ---------------------------------------------------------------- sampling

Point sample_one(const ModelMeasure& m, Rng& rng) {
  return std::visit(
      overloaded{
          [&](const UniformBox& u) -> Point { return sample_uniform(u.box, rng); },
          [&](const PiecewiseConstantDensity& pc) -> Point {
            const std::size_t cell = pick(pc.cumulative, rng.uniform());
            return sample_uniform(cell_box(pc, unflatten(static_cast<std::int64_t>(cell), pc.dim, pc.cells_per_axis())),
                                  rng);
          },
          [&](const TwoPoint& tp) -> Point { return rng.uniform() < tp.w ? tp.a : tp.b; },
          [&](const Mixture& mix) -> Point {
            std::vector<double> cumulative(mix.weights.size());
            std::partial_sum(mix.weights.begin(), mix.weights.end(), cumulative.begin());
            return sample_one(mix.components[pick(cumulative, rng.uniform())], rng);
          },
          [&](const ProductLaplace& pl) -> Point {
            Point x(pl.dim);
            for (int k = 0; k < pl.dim; ++k) {
              const double u = rng.uniform_open();
              x[k] = u < 0.5 ? pl.scale * std::log(2.0 * u) : -pl.scale * std::log(2.0 * (1.0 - u));
            }
            return x;
          },
      },
      m.variant());
}

PointSet sample(const ModelMeasure& m, Eigen::Index n, std::uint64_t seed) {
  if (n < 0) throw DomainError("sample count must be nonnegative");
  Rng rng(seed);
  PointSet out(m.dim(), n);
  for (Eigen::Index j = 0; j < n; ++j) out.col(j) = sample_one(m, rng);
  return out;
}

Point sample_in_box(const ModelMeasure& m, const Box& box, Rng& rng) {
  if (box.dim() != m.dim()) throw DomainError("box dimension does not match measure");
  return std::visit(
      overloaded{
          [&](const UniformBox& u) -> Point {
            auto overlap = u.box.intersect(box);
            if (!overlap) throw DomainError("conditioning box has zero mass");
            return sample_uniform(*overlap, rng);
          },
          [&](const PiecewiseConstantDensity& pc) -> Point {
            std::vector<double> cumulative;
            std::vector<Box> pieces;
            double acc = 0.0;
            for_each_overlapping_cell(pc, box, [&](std::int64_t flat, double vol, const Eigen::VectorXd& lo,
                                                   const Eigen::VectorXd& hi) {
              const double mass = pc.values[static_cast<std::size_t>(flat)] * vol;
              if (mass <= 0.0) return;
              acc += mass;
              cumulative.push_back(acc);
              pieces.emplace_back(lo, hi);
            });
            if (pieces.empty()) throw DomainError("conditioning box has zero mass");
            return sample_uniform(pieces[pick(cumulative, rng.uniform())], rng);
          },
          [&](const TwoPoint& tp) -> Point {
            const double wa = box.contains(tp.a) ? tp.w : 0.0;
            const double wb = box.contains(tp.b) ? 1.0 - tp.w : 0.0;
            if (wa + wb <= 0.0) throw DomainError("conditioning box has zero mass");
            return rng.uniform() * (wa + wb) < wa ? tp.a : tp.b;
          },
          [&](const Mixture& mix) -> Point {
            std::vector<double> cumulative(mix.weights.size());
            double acc = 0.0;
            for (std::size_t k = 0; k < mix.weights.size(); ++k) {
              acc += mix.weights[k] > 0.0 ? mix.weights[k] * box_mass(mix.components[k], box) : 0.0;
              cumulative[k] = acc;
            }
            if (acc <= 0.0) throw DomainError("conditioning box has zero mass");
            return sample_in_box(mix.components[pick(cumulative, rng.uniform())], box, rng);
          },
          [&](const ProductLaplace& pl) -> Point {
            Point x(pl.dim);
            for (int k = 0; k < pl.dim; ++k) {
              if (laplace_interval(box.lower[k], box.upper[k], pl.scale) <= 0.0) {
                throw DomainError("conditioning box has zero mass");
              }
              x[k] = laplace_truncated(box.lower[k], box.upper[k], pl.scale, rng);
            }
            return x;
          },
      },
      m.variant());
}

// ---------------------------------------------------------------- box mass

double box_mass(const ModelMeasure& m, const Box& box) {
  if (box.dim() != m.dim()) throw DomainError("box dimension does not match measure");
  return std::visit(
      overloaded{
          [&](const UniformBox& u) -> double {
            auto overlap = u.box.intersect(box);
            return overlap ? overlap->volume() / u.box.volume() : 0.0;
          },
          [&](const PiecewiseConstantDensity& pc) -> double {
            double mass = 0.0;
            for_each_overlapping_cell(pc, box, [&](std::int64_t flat, double vol, const Eigen::VectorXd&,
                                                   const Eigen::VectorXd&) {
              mass += pc.values[static_cast<std::size_t>(flat)] * vol;
            });
            return mass;
          },
          [&](const TwoPoint& tp) -> double {
            return (box.contains(tp.a) ? tp.w : 0.0) + (box.contains(tp.b) ? 1.0 - tp.w : 0.0);
          },
          [&](const Mixture& mix) -> double {
            double mass = 0.0;
            for (std::size_t k = 0; k < mix.weights.size(); ++k) {
              if (mix.weights[k] > 0.0) mass += mix.weights[k] * box_mass(mix.components[k], box);
            }
            return mass;
          },
          [&](const ProductLaplace& pl) -> double {
            double mass = 1.0;
            for (int k = 0; k < pl.dim; ++k) mass *= laplace_interval(box.lower[k], box.upper[k], pl.scale);
            return mass;
          },
      },
      m.variant());
}

// ---------------------------------------------------------------- moments

double moment_maxnorm(const ModelMeasure& m, double q) {
  if (!(q >= 1.0) || !std::isfinite(q)) throw DomainError("moment order q must be >= 1");
  return std::visit(
      overloaded{
          [&](const UniformBox& u) -> double { return uniform_box_moment(u.box, q); },
          [&](const PiecewiseConstantDensity& pc) -> double {
            const double cell_volume = std::ldexp(1.0, -pc.level * pc.dim);
            double acc = 0.0;
            for (std::size_t i = 0; i < pc.values.size(); ++i) {
              if (pc.values[i] <= 0.0) continue;
              const Box cell = cell_box(pc, unflatten(static_cast<std::int64_t>(i), pc.dim, pc.cells_per_axis()));
              acc += pc.values[i] * cell_volume * uniform_box_moment(cell, q);
            }
            return acc;
          },
          [&](const TwoPoint& tp) -> double {
            return tp.w * std::pow(tp.a.lpNorm<Eigen::Infinity>(), q) +
                   (1.0 - tp.w) * std::pow(tp.b.lpNorm<Eigen::Infinity>(), q);
          },
          [&](const Mixture& mix) -> double {
            double acc = 0.0;
            for (std::size_t k = 0; k < mix.weights.size(); ++k) {
              if (mix.weights[k] > 0.0) acc += mix.weights[k] * moment_maxnorm(mix.components[k], q);
            }
            return acc;
          },
          [&](const ProductLaplace& pl) -> double {
            auto integrand = [&](double s) {
              if (s <= 0.0) return 0.0;
              return q * std::pow(s, q - 1.0) * laplace_maxnorm_survival(s, pl.scale, pl.dim);
            };
            return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                integrand, 0.0, std::numeric_limits<double>::infinity(), 20, kQuadratureTolerance);
          },
      },
      m.variant());
}

TailMoment tail_moment_maxnorm(const ModelMeasure& m, const Box& box, double q) {
  if (box.dim() != m.dim()) throw DomainError("box dimension does not match measure");
  return std::visit(
      overloaded{
          [&](const UniformBox& u) -> TailMoment {
            if (u.box.within(box)) return {};
            throw UnsupportedError("tail moment of a uniform box only when it lies inside the truncation box");
          },
          [&](const PiecewiseConstantDensity& pc) -> TailMoment {
            if (Box::unit_cube(pc.dim).within(box)) return {};
            throw UnsupportedError("tail moment of a piecewise density only when [0,1)^d lies inside the box");
          },
          [&](const TwoPoint& tp) -> TailMoment {
            TailMoment t;
            if (!box.contains(tp.a)) {
              t.mass += tp.w;
              t.moment += tp.w * std::pow(tp.a.lpNorm<Eigen::Infinity>(), q);
            }
            if (!box.contains(tp.b)) {
              t.mass += 1.0 - tp.w;
              t.moment += (1.0 - tp.w) * std::pow(tp.b.lpNorm<Eigen::Infinity>(), q);
            }
            return t;
          },
          [&](const Mixture& mix) -> TailMoment {
            TailMoment t;
            for (std::size_t k = 0; k < mix.weights.size(); ++k) {
              if (mix.weights[k] <= 0.0) continue;
              const TailMoment c = tail_moment_maxnorm(mix.components[k], box, q);
              t.mass += mix.weights[k] * c.mass;
              t.moment += mix.weights[k] * c.moment;
            }
            return t;
          },
          [&](const ProductLaplace& pl) -> TailMoment {
            const double t = box.upper[0];
            const bool symmetric = (box.upper.array() == t).all() && (box.lower.array() == -t).all();
            if (!symmetric) throw UnsupportedError("Laplace tail moment needs a symmetric box [-t, t)^d");
            TailMoment out;
            out.mass = laplace_maxnorm_survival(t, pl.scale, pl.dim);
            auto integrand = [&](double s) {
              return q * std::pow(s, q - 1.0) * laplace_maxnorm_survival(s, pl.scale, pl.dim);
            };
            out.moment = std::pow(t, q) * out.mass +
                         boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                             integrand, t, std::numeric_limits<double>::infinity(), 20, kQuadratureTolerance);
            return out;
          },
      },
      m.variant());
}

// ---------------------------------------------------------------- supports

std::optional<Box> density_support_box(const ModelMeasure& m) {
  return std::visit(overloaded{
                        [](const UniformBox& u) -> std::optional<Box> { return u.box; },
                        [](const PiecewiseConstantDensity& pc) -> std::optional<Box> {
                          return Box::unit_cube(pc.dim);
                        },
                        [](const TwoPoint&) -> std::optional<Box> { return std::nullopt; },
                        [](const Mixture& mix) -> std::optional<Box> {
                          std::optional<Box> hull;
                          for (std::size_t k = 0; k < mix.components.size(); ++k) {
                            if (mix.weights[k] <= 0.0) continue;
                            auto b = density_support_box(mix.components[k]);
                            if (!b) return std::nullopt;
                            if (!hull) {
                              hull = b;
                            } else {
                              hull = Box(hull->lower.cwiseMin(b->lower), hull->upper.cwiseMax(b->upper));
                            }
                          }
                          return hull;
                        },
                        [](const ProductLaplace&) -> std::optional<Box> { return std::nullopt; },
                    },
                    m.variant());
}

Box truncation_box(const ModelMeasure& m, double tail_mass) {
  if (!(tail_mass > 0.0 && tail_mass < 1.0)) throw DomainError("tail mass must lie in (0, 1)");
  double t = 0.0;
  std::function<void(const ModelMeasure&)> visit = [&](const ModelMeasure& mm) {
    std::visit(overloaded{
                   [&](const ProductLaplace& pl) {
                     // 1 - (1 - e^{-t/b})^d = tail  =>  e^{-t/b} = 1 - (1 - tail)^{1/d}
                     const double per_axis = -std::expm1(std::log1p(-tail_mass) / pl.dim);
                     t = std::max(t, -pl.scale * std::log(per_axis));
                   },
                   [&](const Mixture& mix) {
                     for (const auto& c : mix.components) visit(c);
                   },
                   [&](const auto& other) {
                     auto b = density_support_box(ModelMeasure(other));
                     if (!b) throw UnsupportedError("truncation box only for ProductLaplace and bounded densities");
                     t = std::max({t, b->lower.cwiseAbs().maxCoeff(), std::nextafter(b->upper.cwiseAbs().maxCoeff(),
                                                                                    1e300)});
                   },
               },
               mm.variant());
  };
  visit(m);
  return Box(Eigen::VectorXd::Constant(m.dim(), -t), Eigen::VectorXd::Constant(m.dim(), t));
}

std::optional<DiscreteMeasure> atoms_of(const ModelMeasure& m) {
  if (const auto* tp = m.get_if<TwoPoint>()) {
    PointSet pts(tp->a.size(), 2);
    pts << tp->a, tp->b;
    Eigen::Vector2d w(tp->w, 1.0 - tp->w);
    return DiscreteMeasure(std::move(pts), w);
  }
  if (const auto* mix = m.get_if<Mixture>()) {
    DiscreteMeasure acc;
    for (std::size_t k = 0; k < mix->components.size(); ++k) {
      auto part = atoms_of(mix->components[k]);
      if (!part) return std::nullopt;
      acc = acc + part->scaled(mix->weights[k]);
    }
    return acc;
  }
  return std::nullopt;
}

}  // namespace wqlab
