#include "pisonet/optim.hpp"

#include <cmath>

namespace pisonet {

void Adam::step(Vec& x, const Vec& g) {
  if (m_.size() != x.size()) {
    m_ = Vec::Zero(x.size());
    v_ = Vec::Zero(x.size());
  }
  ++t_;
  m_ = opt_.beta1 * m_ + (1.0 - opt_.beta1) * g;
  v_ = opt_.beta2 * v_ + (1.0 - opt_.beta2) * g.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  const double step = opt_.lr / bc1;
  x.array() -= step * m_.array() / ((v_.array() / bc2).sqrt() + opt_.eps);
}

namespace {

// Minimiser of the cubic through (a, fa, ga), (b, fb, gb), clamped into the
// interior of the bracket.
double cubic_min(double a, double fa, double ga, double b, double fb, double gb) {
  const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - ga * gb;
  double t;
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
  } else {
    t = 0.5 * (a + b);
  }
  const double lo = std::min(a, b), hi = std::max(a, b);
  const double margin = 0.1 * (hi - lo);
  if (!std::isfinite(t) || t < lo + margin || t > hi - margin) t = 0.5 * (a + b);
  return t;
}

}  // namespace

double Lbfgs::zoom(const Objective& fn, const Vec& x, const Vec& d, double f0, double dg0, double lo, double hi,
                   double flo, double dglo, double fhi, double dghi, Vec& xnew, double& fnew, Vec& gnew, bool& ok) {
  ok = false;
  double best_a = lo, best_f = flo;
  while (budget_ > 0) {
    const double a = cubic_min(lo, flo, dglo, hi, fhi, dghi);
    xnew = x + a * d;
    fnew = fn(xnew, gnew);
    ++evals_;
    --budget_;
    const double dga = gnew.dot(d);
    if (!std::isfinite(fnew) || fnew > f0 + opt_.c1 * a * dg0 || fnew >= flo) {
      hi = a;
      fhi = std::isfinite(fnew) ? fnew : 1e300;
      dghi = std::isfinite(dga) ? dga : 0.0;
    } else {
      if (std::abs(dga) <= -opt_.c2 * dg0) {
        ok = true;
        return a;
      }
      if (dga * (hi - lo) >= 0.0) {
        hi = lo;
        fhi = flo;
        dghi = dglo;
      }
      lo = a;
      flo = fnew;
      dglo = dga;
      if (fnew < best_f) {
        best_f = fnew;
        best_a = a;
      }
    }
    if (std::abs(hi - lo) < 1e-14 * std::max(1.0, std::abs(lo))) break;
  }
  // Fall back to the best sufficient-decrease point seen.
  if (best_a != 0.0 && best_f < f0) {
    xnew = x + best_a * d;
    fnew = fn(xnew, gnew);
    ++evals_;
    return best_a;
  }
  return 0.0;
}

Lbfgs::Status Lbfgs::step(const Objective& fn, Vec& x, double& f, Vec& g) {
  if (g.norm() == 0.0) return Status::converged;
  // Two-loop recursion.
  Vec d = -g;
  const int m = static_cast<int>(s_.size());
  std::vector<double> alpha(m);
  for (int i = m - 1; i >= 0; --i) {
    alpha[i] = rho_[i] * s_[i].dot(d);
    d -= alpha[i] * y_[i];
  }
  if (m > 0) d *= s_.back().dot(y_.back()) / y_.back().squaredNorm();
  for (int i = 0; i < m; ++i) {
    const double beta = rho_[i] * y_[i].dot(d);
    d += (alpha[i] - beta) * s_[i];
  }
  double dg0 = g.dot(d);
  if (!(dg0 < 0.0)) {
    s_.clear();
    y_.clear();
    rho_.clear();
    d = -g;
    dg0 = g.dot(d);
  }

  budget_ = opt_.max_evals_per_step;
  const double f0 = f;
  double a_prev = 0.0, f_prev = f0, dg_prev = dg0;
  double a = m > 0 ? 1.0 : std::min(1.0, 1.0 / g.lpNorm<Eigen::Infinity>());
  Vec xnew(x.size()), gnew(x.size());
  double fnew = f0, a_star = 0.0;
  bool ok = false;
  (void)ok;
  for (int it = 0; budget_ > 0; ++it) {
    xnew = x + a * d;
    fnew = fn(xnew, gnew);
    ++evals_;
    --budget_;
    const double dga = gnew.dot(d);
    if (!std::isfinite(fnew) || fnew > f0 + opt_.c1 * a * dg0 || (it > 0 && fnew >= f_prev)) {
      a_star = zoom(fn, x, d, f0, dg0, a_prev, a, f_prev, dg_prev, std::isfinite(fnew) ? fnew : 1e300,
                    std::isfinite(dga) ? dga : 0.0, xnew, fnew, gnew, ok);
      break;
    }
    if (std::abs(dga) <= -opt_.c2 * dg0) {
      a_star = a;
      ok = true;
      break;
    }
    if (dga >= 0.0) {
      a_star = zoom(fn, x, d, f0, dg0, a, a_prev, fnew, dga, f_prev, dg_prev, xnew, fnew, gnew, ok);
      break;
    }
    a_prev = a;
    f_prev = fnew;
    dg_prev = dga;
    a *= 2.0;
  }
  if (a_star == 0.0 && a_prev > 0.0 && f_prev < f0) {
    a_star = a_prev;
    xnew = x + a_star * d;
    fnew = fn(xnew, gnew);
    ++evals_;
  }

  if (a_star == 0.0 || !std::isfinite(fnew) || fnew >= f0) {
    s_.clear();
    y_.clear();
    rho_.clear();
    return Status::line_search_failed;
  }
  Vec s = xnew - x;
  Vec y = gnew - g;
  const double sy = s.dot(y);
  if (sy > 1e-12 * s.norm() * y.norm()) {
    s_.push_back(std::move(s));
    y_.push_back(std::move(y));
    rho_.push_back(1.0 / sy);
    if (static_cast<int>(s_.size()) > opt_.memory) {
      s_.pop_front();
      y_.pop_front();
      rho_.pop_front();
    }
  }
  x = xnew;
  f = fnew;
  g = gnew;
  return Status::ok;
}

}  // namespace pisonet
