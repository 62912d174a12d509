#pragma once

// First-order and quasi-Newton optimisers over flat parameter vectors.

#include "pisonet/core.hpp"

#include <deque>
#include <functional>

namespace pisonet {

/// f(x) with gradient written into g.
using Objective = std::function<double(const Vec& x, Vec& g)>;

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct LbfgsOptions {
  int memory = 10;
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_evals_per_step = 25;
};

class Adam {
 public:
  using Options = AdamOptions;

  explicit Adam(Options opt = {}) : opt_(opt) {}
  void step(Vec& x, const Vec& g);
  void set_lr(double lr) { opt_.lr = lr; }
  long steps() const { return t_; }

 private:
  Options opt_;
  Vec m_, v_;
  long t_ = 0;
};

class Lbfgs {
 public:
  using Options = LbfgsOptions;

  enum class Status { ok, converged, line_search_failed };

  explicit Lbfgs(Options opt = {}) : opt_(opt) {}

  /// One quasi-Newton iteration with a strong-Wolfe line search. On entry
  /// (f, g) must hold the objective at x; on exit they hold the new values.
  Status step(const Objective& fn, Vec& x, double& f, Vec& g);
  int evaluations() const { return evals_; }

 private:
  double zoom(const Objective& fn, const Vec& x, const Vec& d, double f0, double dg0, double lo, double hi, double flo,
              double dglo, double fhi, double dghi, Vec& xnew, double& fnew, Vec& gnew, bool& ok);

  Options opt_;
  std::deque<Vec> s_, y_;
  std::deque<double> rho_;
  int evals_ = 0;
  int budget_ = 0;
};

}  // namespace pisonet
