#include "pisonet/core.hpp"

#include <cmath>
#include <sstream>

namespace pisonet {

Vec ProblemInstance::initial_state() const {
  Vec out(phase_dim());
  for (int i = 0; i < num_agents(); ++i) out.segment(i * agent_dim(), agent_dim()) = x0.row(i).transpose();
  return out;
}

Vec ProblemInstance::terminal_state() const {
  Vec out(phase_dim());
  for (int i = 0; i < num_agents(); ++i) out.segment(i * agent_dim(), agent_dim()) = xT.row(i).transpose();
  return out;
}

TimeGrid TimeGrid::uniform(double horizon, int count) {
  if (count < 2 || !(horizon > 0.0)) throw DomainError("TimeGrid::uniform: need count >= 2 and horizon > 0");
  TimeGrid g;
  g.times.resize(count);
  for (int j = 0; j < count; ++j) g.times[j] = horizon * static_cast<double>(j) / (count - 1);
  g.times.back() = horizon;
  return g;
}

TimeGrid TimeGrid::refined(int factor) const {
  if (factor < 1) throw DomainError("TimeGrid::refined: factor must be >= 1");
  TimeGrid g;
  g.times.reserve((times.size() - 1) * factor + 1);
  for (std::size_t j = 0; j + 1 < times.size(); ++j) {
    for (int s = 0; s < factor; ++s)
      g.times.push_back(times[j] + (times[j + 1] - times[j]) * static_cast<double>(s) / factor);
  }
  g.times.push_back(times.back());
  return g;
}

bool TimeGrid::valid() const {
  if (times.size() < 2 || times.front() != 0.0) return false;
  for (std::size_t j = 1; j < times.size(); ++j)
    if (!(times[j] > times[j - 1])) return false;
  return true;
}

Vec LatentTrajectory::point(int j) const {
  const auto n = y.cols();
  Vec z(2 * n);
  z.head(n) = y.row(j).transpose();
  z.tail(n) = q.row(j).transpose();
  return z;
}

Vec LatentTrajectory::velocity(int j) const {
  const auto n = y.cols();
  Vec z(2 * n);
  z.head(n) = ydot.row(j).transpose();
  z.tail(n) = qdot.row(j).transpose();
  return z;
}

RowMat positions_of(const Vec& x, int num_agents, int spatial_dim) {
  RowMat w(num_agents, spatial_dim);
  for (int i = 0; i < num_agents; ++i) w.row(i) = x.segment(2 * spatial_dim * i, spatial_dim).transpose();
  return w;
}

int obstacle_dim(const Obstacle& ob) {
  return std::visit(
      [](const auto& o) -> int {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, Circle>) return static_cast<int>(o.center.size());
        else if constexpr (std::is_same_v<T, AxisBox>) return static_cast<int>(o.min_corner.size());
        else return static_cast<int>(o.a.size());
      },
      ob);
}

namespace {

bool inside_box(const AxisBox& box, const Eigen::Ref<const Vec>& pt, double pad = 0.0) {
  constexpr double tol = 1e-12;
  for (int d = 0; d < pt.size(); ++d) {
    if (pt[d] - pad < box.min_corner[d] - tol || pt[d] + pad > box.max_corner[d] + tol) return false;
  }
  return true;
}

std::string fmt_index(const char* what, int i) {
  std::ostringstream os;
  os << what << " " << i;
  return os.str();
}

}  // namespace

std::vector<Violation> validate_instance(const ProblemInstance& inst) {
  std::vector<Violation> out;
  auto report = [&](std::string inv, std::vector<int> idx, std::string msg) {
    out.push_back({std::move(inv), std::move(idx), std::move(msg)});
  };

  const int N = inst.num_agents();
  const int sd = inst.env.spatial_dim;
  if (N == 0) report("agents.nonempty", {}, "instance has no agents");
  if (sd < 1 || sd > 3) {
    report("env.spatial_dim", {sd}, "spatial_dim must be 1, 2 or 3");
    return out;  // nothing else can be checked meaningfully
  }
  const int dx = 2 * sd;

  for (int i = 0; i < N; ++i) {
    const auto& a = inst.agents[i];
    if (!(a.radius > 0.0)) report("agent.radius_positive", {i}, fmt_index("radius <= 0 for agent", i));
    if (!(a.drag_coeff >= 0.0)) report("agent.drag_nonnegative", {i}, fmt_index("drag < 0 for agent", i));
    if (a.state_dim % 2 != 0) {
      report("agent.state_dim_even", {i}, fmt_index("odd state_dim for agent", i));
      continue;
    }
    if (a.control_dim * 2 != a.state_dim)
      report("agent.control_dim", {i}, fmt_index("control_dim != state_dim/2 for agent", i));
    else if (a.state_dim != dx)
      report("env.agent_dim_match", {i}, fmt_index("state_dim != 2*spatial_dim for agent", i));
  }

  const auto& dom = inst.env.domain;
  bool domain_ok = dom.min_corner.size() == sd && dom.max_corner.size() == sd;
  if (domain_ok) {
    for (int d = 0; d < sd; ++d)
      if (!(dom.min_corner[d] < dom.max_corner[d])) domain_ok = false;
  }
  if (!domain_ok) report("env.domain", {}, "domain box malformed");

  for (int k = 0; k < static_cast<int>(inst.env.obstacles.size()); ++k) {
    const auto& ob = inst.env.obstacles[k];
    if (obstacle_dim(ob) != sd) {
      report("obstacle.dim", {k}, fmt_index("dimension mismatch for obstacle", k));
      continue;
    }
    std::visit(
        [&](const auto& o) {
          using T = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<T, Circle>) {
            if (!(o.radius > 0.0)) report("obstacle.circle_radius", {k}, fmt_index("circle radius <= 0, obstacle", k));
            else if (domain_ok && !inside_box(dom, o.center, o.radius))
              report("obstacle.inside_domain", {k}, fmt_index("circle leaves domain, obstacle", k));
          } else if constexpr (std::is_same_v<T, AxisBox>) {
            bool ordered = true;
            for (int d = 0; d < sd; ++d)
              if (!(o.min_corner[d] < o.max_corner[d])) ordered = false;
            if (!ordered) report("obstacle.box_order", {k}, fmt_index("box min >= max, obstacle", k));
            else if (domain_ok && !(inside_box(dom, o.min_corner) && inside_box(dom, o.max_corner)))
              report("obstacle.inside_domain", {k}, fmt_index("box leaves domain, obstacle", k));
          } else {
            if (!(o.half_width >= 0.0)) report("obstacle.wall_width", {k}, fmt_index("wall half_width < 0, obstacle", k));
            else if (domain_ok && !(inside_box(dom, o.a, o.half_width) && inside_box(dom, o.b, o.half_width)))
              report("obstacle.inside_domain", {k}, fmt_index("wall leaves domain, obstacle", k));
          }
        },
        ob);
  }

  if (!(inst.horizon > 0.0)) report("instance.horizon", {}, "horizon must be positive");

  const bool shapes_ok = inst.x0.rows() == N && inst.x0.cols() == dx && inst.xT.rows() == N && inst.xT.cols() == dx;
  if (!shapes_ok) {
    report("instance.boundary_shape", {}, "x0/xT must be N x dx");
    return out;
  }
  for (int i = 0; i < N; ++i) {
    if (!inst.x0.row(i).allFinite() || !inst.xT.row(i).allFinite()) {
      report("instance.finite", {i}, fmt_index("non-finite boundary state for agent", i));
      continue;
    }
    if (domain_ok) {
      const Vec w0 = inst.x0.row(i).head(sd).transpose();
      const Vec wT = inst.xT.row(i).head(sd).transpose();
      if (!inside_box(dom, w0)) report("instance.x0_in_domain", {i}, fmt_index("initial position outside domain, agent", i));
      if (!inside_box(dom, wT)) report("instance.xT_in_domain", {i}, fmt_index("terminal position outside domain, agent", i));
    }
  }
  for (int i = 0; i < N; ++i) {
    for (int j = i + 1; j < N; ++j) {
      const double dist = (inst.x0.row(i).head(sd) - inst.x0.row(j).head(sd)).norm();
      const double need = inst.agents[i].radius + inst.agents[j].radius;
      if (!(dist > need)) {
        std::ostringstream os;
        os << "initial separation " << dist << " <= radius sum " << need << " for agents " << i << "," << j;
        report("instance.initial_separation", {i, j}, os.str());
      }
    }
  }
  return out;
}

}  // namespace pisonet
