#include "pisonet/dense.hpp"

#include <cmath>

namespace pisonet {

namespace {

using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

// phi, phi', phi'' evaluated at pre-activation u.
inline void act_eval(Activation a, double u, double& f, double& f1, double& f2) {
  if (a == Activation::tanh) {
    f = std::tanh(u);
    f1 = 1.0 - f * f;
    f2 = -2.0 * f * f1;
  } else {
    const double s = 1.0 / (1.0 + std::exp(-u));
    f = u * s;
    f1 = s + u * s * (1.0 - s);
    f2 = s * (1.0 - s) * (2.0 + u * (1.0 - 2.0 * s));
  }
}

}  // namespace

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "silu") return Activation::silu;
  throw DomainError("unknown activation '" + name + "'");
}

std::string activation_name(Activation a) { return a == Activation::tanh ? "tanh" : "silu"; }

DenseNet::DenseNet(std::vector<int> sizes, Activation act, std::size_t offset)
    : sizes_(std::move(sizes)), act_(act), offset_(offset) {
  if (sizes_.size() < 2) throw DomainError("DenseNet: need at least input and output sizes");
}

std::size_t DenseNet::param_count() const {
  std::size_t c = 0;
  for (std::size_t l = 1; l < sizes_.size(); ++l) c += static_cast<std::size_t>(sizes_[l - 1] * sizes_[l] + sizes_[l]);
  return c;
}

std::size_t DenseNet::final_weight_offset() const {
  std::size_t c = offset_;
  for (std::size_t l = 1; l + 1 < sizes_.size(); ++l) c += static_cast<std::size_t>(sizes_[l - 1] * sizes_[l] + sizes_[l]);
  return c;
}

std::size_t DenseNet::final_bias_offset() const {
  const auto L = sizes_.size() - 1;
  return final_weight_offset() + static_cast<std::size_t>(sizes_[L - 1] * sizes_[L]);
}

void DenseNet::forward(const double* params, const Vec& in, const Vec& in_dot, Tape& tape) const {
  const std::size_t L = sizes_.size() - 1;
  tape.u.resize(L + 1);
  tape.ud.resize(L + 1);
  tape.h.resize(L + 1);
  tape.hd.resize(L + 1);
  tape.h[0] = in;
  tape.hd[0] = in_dot;
  const double* p = params + offset_;
  for (std::size_t l = 1; l <= L; ++l) {
    const int ni = sizes_[l - 1], no = sizes_[l];
    ConstMap W(p, no, ni);
    Eigen::Map<const Vec> c(p + ni * no, no);
    p += ni * no + no;
    tape.u[l].noalias() = W * tape.h[l - 1];
    tape.u[l] += c;
    tape.ud[l].noalias() = W * tape.hd[l - 1];
    if (l == L) {
      tape.h[l] = tape.u[l];
      tape.hd[l] = tape.ud[l];
      break;
    }
    tape.h[l].resize(no);
    tape.hd[l].resize(no);
    for (int k = 0; k < no; ++k) {
      double f, f1, f2;
      act_eval(act_, tape.u[l][k], f, f1, f2);
      tape.h[l][k] = f;
      tape.hd[l][k] = f1 * tape.ud[l][k];
    }
  }
}

void DenseNet::backward(const double* params, const Tape& tape, const Vec& out_bar, const Vec& out_dot_bar,
                        double* grad, Vec* in_bar) const {
  const std::size_t L = sizes_.size() - 1;
  // Offsets of each layer's block.
  std::vector<std::size_t> offs(L + 1);
  offs[1] = offset_;
  for (std::size_t l = 2; l <= L; ++l) offs[l] = offs[l - 1] + sizes_[l - 2] * sizes_[l - 1] + sizes_[l - 1];

  Vec ub = out_bar, udb = out_dot_bar;
  Vec hb, hdb;
  for (std::size_t l = L; l >= 1; --l) {
    const int ni = sizes_[l - 1], no = sizes_[l];
    ConstMap W(params + offs[l], no, ni);
    MutMap Wb(grad + offs[l], no, ni);
    Eigen::Map<Vec> cb(grad + offs[l] + ni * no, no);
    Wb.noalias() += ub * tape.h[l - 1].transpose();
    Wb.noalias() += udb * tape.hd[l - 1].transpose();
    cb += ub;
    if (l == 1 && in_bar == nullptr) break;
    hb.noalias() = W.transpose() * ub;
    hdb.noalias() = W.transpose() * udb;
    if (l == 1) {
      *in_bar = hb;
      break;
    }
    // Through the activation of layer l-1.
    const Vec& u = tape.u[l - 1];
    const Vec& ud = tape.ud[l - 1];
    ub.resize(ni);
    udb.resize(ni);
    for (int k = 0; k < ni; ++k) {
      double f, f1, f2;
      act_eval(act_, u[k], f, f1, f2);
      ub[k] = hb[k] * f1 + hdb[k] * f2 * ud[k];
      udb[k] = hdb[k] * f1;
    }
  }
}

void DenseNet::init(double* params, std::mt19937_64& rng) const {
  const std::size_t L = sizes_.size() - 1;
  double* p = params + offset_;
  for (std::size_t l = 1; l <= L; ++l) {
    const int ni = sizes_[l - 1], no = sizes_[l];
    const double bound = ni > 0 ? 1.0 / std::sqrt(static_cast<double>(ni)) : 1.0;
    std::uniform_real_distribution<double> U(-bound, bound);
    for (int k = 0; k < ni * no + no; ++k) p[k] = (l == L) ? 0.0 : U(rng);
    p += ni * no + no;
  }
}

}  // namespace pisonet
