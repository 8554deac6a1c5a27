#include "mfg/model.hpp"

#include <cmath>

namespace mfg {

HJet DegeneracyProfile::eval(double z) const {
  switch (kind) {
    case Kind::Sine:
      return {std::sin(z), std::cos(z), -std::sin(z)};
    case Kind::Sigmoid: {
      // h(z) = z / sqrt(1+z^2)
      double s = 1.0 + z * z;
      double r = 1.0 / std::sqrt(s);
      return {z * r, r / s, -3.0 * z * r / (s * s)};
    }
    case Kind::Constant:
      return {param, 0.0, 0.0};
    case Kind::Custom:
      return custom(z);
  }
  throw std::logic_error("unreachable");
}

double DegeneracyProfile::sup_abs() const {
  switch (kind) {
    case Kind::Sine:
      return 1.0;
    case Kind::Sigmoid:
      return 1.0;
    case Kind::Constant:
      return std::abs(param);
    case Kind::Custom: {
      double m = 0;
      for (int i = 0; i <= 4000; ++i) m = std::max(m, std::abs(custom(-20.0 + i * 0.01).h));
      return m;
    }
  }
  throw std::logic_error("unreachable");
}

double DegeneracyProfile::c2_bound(double z_lo, double z_hi) const {
  double m = 0;
  int n = 2000;
  for (int i = 0; i <= n; ++i) {
    HJet j = eval(z_lo + (z_hi - z_lo) * i / n);
    m = std::max(m, std::abs(j.h) + std::abs(j.dh) + std::abs(j.ddh));
  }
  return m;
}

double Potential::value(const Vec2& x) const {
  switch (kind) {
    case Kind::Zero:
      return 0.0;
    case Kind::HalfSquare:
      return 0.5 * amp * x.squaredNorm();
    case Kind::Cosine:
      return amp * std::cos(freq * x.x()) * std::cos(freq * x.y());
    case Kind::Bump: {
      BumpKernel k{radius};
      return amp * (M_PI * radius * radius / 4.0) * k.value(x - center);
    }
  }
  throw std::logic_error("unreachable");
}

Vec2 Potential::gradient(const Vec2& x) const {
  switch (kind) {
    case Kind::Zero:
      return Vec2::Zero();
    case Kind::HalfSquare:
      return amp * x;
    case Kind::Cosine:
      return {-amp * freq * std::sin(freq * x.x()) * std::cos(freq * x.y()),
              -amp * freq * std::cos(freq * x.x()) * std::sin(freq * x.y())};
    case Kind::Bump: {
      BumpKernel k{radius};
      return amp * (M_PI * radius * radius / 4.0) * k.gradient(x - center);
    }
  }
  throw std::logic_error("unreachable");
}

Eigen::Matrix2d Potential::hessian(const Vec2& x) const {
  switch (kind) {
    case Kind::Zero:
      return Eigen::Matrix2d::Zero();
    case Kind::HalfSquare:
      return amp * Eigen::Matrix2d::Identity();
    case Kind::Cosine: {
      double c1 = std::cos(freq * x.x()), s1 = std::sin(freq * x.x());
      double c2 = std::cos(freq * x.y()), s2 = std::sin(freq * x.y());
      Eigen::Matrix2d H;
      double f2 = amp * freq * freq;
      H << -f2 * c1 * c2, f2 * s1 * s2, f2 * s1 * s2, -f2 * c1 * c2;
      return H;
    }
    case Kind::Bump: {
      BumpKernel k{radius};
      return amp * (M_PI * radius * radius / 4.0) * k.hessian(x - center);
    }
  }
  throw std::logic_error("unreachable");
}

double Potential::c2_bound(const Box& box) const {
  double m = 0;
  int n = 60;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) {
      Vec2 x{box.x1_min + box.width1() * i / n, box.x2_min + box.width2() * j / n};
      m = std::max(m, std::abs(value(x)) + gradient(x).norm() + hessian(x).norm());
    }
  return m;
}

double BumpKernel::value(const Vec2& x) const {
  double q = x.squaredNorm() / (eps * eps);
  if (q >= 1.0) return 0.0;
  double u = 1.0 - q;
  return peak() * u * u * u;
}

Vec2 BumpKernel::gradient(const Vec2& x) const {
  double e2 = eps * eps;
  double q = x.squaredNorm() / e2;
  if (q >= 1.0) return Vec2::Zero();
  double u = 1.0 - q;
  return (-6.0 * peak() * u * u / e2) * x;
}

Eigen::Matrix2d BumpKernel::hessian(const Vec2& x) const {
  double e2 = eps * eps;
  double q = x.squaredNorm() / e2;
  if (q >= 1.0) return Eigen::Matrix2d::Zero();
  double u = 1.0 - q;
  Eigen::Matrix2d H = (-6.0 * peak() / e2) *
                      (u * u * Eigen::Matrix2d::Identity() - (4.0 * u / e2) * x * x.transpose());
  return H;
}

double BumpKernel::lipschitz() const {
  // max of 6A r (1-r^2/e^2)^2 / e^2 over r, at r = eps/sqrt(5): 6A/e * (4/5)^2 / sqrt(5)
  return 6.0 * peak() / eps * 0.64 / std::sqrt(5.0);
}

double Coupling::eval(const ParticleCloud& m, const Vec2& x) const {
  double v = potential.value(x);
  if (strength != 0.0) {
    double s = 0;
    for (int i = 0; i < m.size(); ++i) s += m.weights[i] * mollifier.value(x - m.positions[i]);
    v += strength * s;
  }
  return v;
}

Vec2 Coupling::gradient(const ParticleCloud& m, const Vec2& x) const {
  Vec2 g = potential.gradient(x);
  if (strength != 0.0) {
    Vec2 s = Vec2::Zero();
    for (int i = 0; i < m.size(); ++i) s += m.weights[i] * mollifier.gradient(x - m.positions[i]);
    g += strength * s;
  }
  return g;
}

Eigen::Matrix2d Coupling::hessian(const ParticleCloud& m, const Vec2& x) const {
  Eigen::Matrix2d H = potential.hessian(x);
  if (strength != 0.0) {
    Eigen::Matrix2d s = Eigen::Matrix2d::Zero();
    for (int i = 0; i < m.size(); ++i) s += m.weights[i] * mollifier.hessian(x - m.positions[i]);
    H += strength * s;
  }
  return H;
}

ScalarField Coupling::eval_on_grid(const Grid& g, const ParticleCloud& m) const {
  ScalarField f(g);
  f.fill([&](const Vec2& x) { return eval(m, x); });
  return f;
}

void ProblemSpec::validate() const {
  box.validate();
  if (T <= 0) throw std::invalid_argument("ProblemSpec: T must be > 0");
  if (A_max <= 0) throw std::invalid_argument("ProblemSpec: A_max must be > 0");
  if (m0.radius <= 0) throw std::invalid_argument("ProblemSpec: m0.radius must be > 0");
  if (F.mollifier.eps <= 0 || G.mollifier.eps <= 0)
    throw std::invalid_argument("ProblemSpec: mollifier radius must be > 0");
  if (F.strength < 0 || G.strength < 0)
    throw std::invalid_argument("ProblemSpec: coupling strength must be >= 0");
  // supp(m0) plus the reachable margin must fit strictly inside the box
  double margin = T * A_max * std::max(1.0, h.sup_abs());
  double r = m0.radius + margin;
  if (m0.center.x() - r <= box.x1_min || m0.center.x() + r >= box.x1_max ||
      m0.center.y() - r <= box.x2_min || m0.center.y() + r >= box.x2_max)
    throw std::invalid_argument(
        "ProblemSpec: box too small, supp(m0) plus T*A_max*max(1,|h|) margin must fit inside");
}

double hamiltonian(const ProblemSpec& spec, const Vec2& x, const Vec2& p) {
  double hv = spec.h(x.x());
  return 0.5 * (p.x() * p.x() + hv * hv * p.y() * p.y());
}

Vec2 field_gradient(const ScalarField& u, const Vec2& x) {
  const Grid& g = u.grid;
  if (x.x() - g.h1 < g.box.x1_min || x.x() + g.h1 > g.box.x1_max ||
      x.y() - g.h2 < g.box.x2_min || x.y() + g.h2 > g.box.x2_max)
    throw std::invalid_argument("stencil out of domain");
  double d1 = (u.interpolate({x.x() + g.h1, x.y()}) - u.interpolate({x.x() - g.h1, x.y()})) /
              (2 * g.h1);
  double d2 = (u.interpolate({x.x(), x.y() + g.h2}) - u.interpolate({x.x(), x.y() - g.h2})) /
              (2 * g.h2);
  return {d1, d2};
}

Vec2 grushin_gradient(const ScalarField& u, const Vec2& x, const DegeneracyProfile& h) {
  Vec2 d = field_gradient(u, x);
  return {d.x(), h(x.x()) * d.y()};
}

}  // namespace mfg
