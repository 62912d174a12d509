#include "pisonet/io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace pisonet {

void check_json_keys(const json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) throw DomainError(std::string(what) + ": expected a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw DomainError(std::string(what) + ": unknown field '" + it.key() + "'");
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* what) {
  check_json_keys(j, allowed, what);
}

template <class T>
void get_opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

std::string arch_name(Architecture a) { return a == Architecture::sonet ? "sonet" : "mlp"; }

Architecture parse_arch(const std::string& s) {
  if (s == "sonet") return Architecture::sonet;
  if (s == "mlp") return Architecture::mlp;
  throw DomainError("unknown architecture '" + s + "'");
}

}  // namespace

json vec_to_json(const Vec& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

Vec vec_from_json(const json& j) {
  if (!j.is_array()) throw DomainError("expected a numeric array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

json mat_to_json(const RowMat& m) {
  json j = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(vec_to_json(m.row(r).transpose()));
  return j;
}

RowMat mat_from_json(const json& j) {
  if (!j.is_array()) throw DomainError("expected an array of rows");
  if (j.empty()) return RowMat(0, 0);
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  RowMat m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) throw DomainError("ragged matrix rows");
    m.row(static_cast<Eigen::Index>(r)) = vec_from_json(j[r]).transpose();
  }
  return m;
}

void to_json(json& j, const Circle& c) {
  j = {{"type", "circle"}, {"center", vec_to_json(c.center)}, {"radius", c.radius}};
}
void from_json(const json& j, Circle& c) {
  c.center = vec_from_json(j.at("center"));
  c.radius = j.at("radius").get<double>();
}
void to_json(json& j, const AxisBox& b) {
  j = {{"type", "box"}, {"min", vec_to_json(b.min_corner)}, {"max", vec_to_json(b.max_corner)}};
}
void from_json(const json& j, AxisBox& b) {
  b.min_corner = vec_from_json(j.at("min"));
  b.max_corner = vec_from_json(j.at("max"));
}
void to_json(json& j, const SegmentWall& w) {
  j = {{"type", "wall"}, {"a", vec_to_json(w.a)}, {"b", vec_to_json(w.b)}, {"half_width", w.half_width}};
}
void from_json(const json& j, SegmentWall& w) {
  w.a = vec_from_json(j.at("a"));
  w.b = vec_from_json(j.at("b"));
  w.half_width = j.at("half_width").get<double>();
}
void to_json(json& j, const Obstacle& o) {
  std::visit([&](const auto& s) { to_json(j, s); }, o);
}
void from_json(const json& j, Obstacle& o) {
  const std::string t = j.at("type").get<std::string>();
  if (t == "circle") {
    o = j.get<Circle>();
  } else if (t == "box") {
    o = j.get<AxisBox>();
  } else if (t == "wall") {
    o = j.get<SegmentWall>();
  } else {
    throw DomainError("unknown obstacle type '" + t + "'");
  }
}

void to_json(json& j, const AgentSpec& a) {
  j = {{"radius", a.radius}, {"drag_coeff", a.drag_coeff}, {"state_dim", a.state_dim}, {"control_dim", a.control_dim}};
}
void from_json(const json& j, AgentSpec& a) {
  a.radius = j.at("radius").get<double>();
  get_opt(j, "drag_coeff", a.drag_coeff);
  get_opt(j, "state_dim", a.state_dim);
  get_opt(j, "control_dim", a.control_dim);
}

void to_json(json& j, const EnvironmentSpec& e) {
  j = {{"domain", e.domain}, {"obstacles", e.obstacles}, {"spatial_dim", e.spatial_dim}};
  j["domain"].erase("type");
}
void from_json(const json& j, EnvironmentSpec& e) {
  e.domain = j.at("domain").get<AxisBox>();
  e.obstacles = j.value("obstacles", std::vector<Obstacle>{});
  e.spatial_dim = j.at("spatial_dim").get<int>();
}

void to_json(json& j, const CostSpec& c) {
  j = {{"velocity_weight", c.velocity_weight}, {"control_weight", c.control_weight}};
}
void from_json(const json& j, CostSpec& c) {
  get_opt(j, "velocity_weight", c.velocity_weight);
  get_opt(j, "control_weight", c.control_weight);
}

void to_json(json& j, const ProblemInstance& p) {
  j = {{"family_id", p.family_id}, {"agents", p.agents},        {"env", p.env},   {"x0", mat_to_json(p.x0)},
       {"xT", mat_to_json(p.xT)},  {"horizon", p.horizon},      {"seed", p.seed}, {"cost", p.cost}};
}
void from_json(const json& j, ProblemInstance& p) {
  check_keys(j, {"family_id", "agents", "env", "x0", "xT", "horizon", "seed", "cost"}, "ProblemInstance");
  p.family_id = j.value("family_id", std::string());
  p.agents = j.at("agents").get<std::vector<AgentSpec>>();
  p.env = j.at("env").get<EnvironmentSpec>();
  p.x0 = mat_from_json(j.at("x0"));
  p.xT = mat_from_json(j.at("xT"));
  p.horizon = j.at("horizon").get<double>();
  p.seed = j.value("seed", std::uint64_t{0});
  p.cost = j.value("cost", CostSpec{});
}

void to_json(json& j, const TimeGrid& g) { j = g.times; }
void from_json(const json& j, TimeGrid& g) { g.times = j.get<std::vector<double>>(); }

void to_json(json& j, const PhaseTrajectory& t) {
  j = {{"t", t.grid}, {"x", mat_to_json(t.x)}, {"p", mat_to_json(t.p)}};
}
void from_json(const json& j, PhaseTrajectory& t) {
  t.grid = j.at("t").get<TimeGrid>();
  t.x = mat_from_json(j.at("x"));
  t.p = mat_from_json(j.at("p"));
}

void to_json(json& j, const LatentTrajectory& t) {
  j = {{"t", t.grid},
       {"y", mat_to_json(t.y)},
       {"q", mat_to_json(t.q)},
       {"ydot", mat_to_json(t.ydot)},
       {"qdot", mat_to_json(t.qdot)}};
}
void from_json(const json& j, LatentTrajectory& t) {
  t.grid = j.at("t").get<TimeGrid>();
  t.y = mat_from_json(j.at("y"));
  t.q = mat_from_json(j.at("q"));
  t.ydot = mat_from_json(j.at("ydot"));
  t.qdot = mat_from_json(j.at("qdot"));
}

void to_json(json& j, const BarrierParams& b) { j = {{"eps", b.eps}, {"ell", b.ell}}; }
void from_json(const json& j, BarrierParams& b) {
  get_opt(j, "eps", b.eps);
  get_opt(j, "ell", b.ell);
}

void to_json(json& j, const Interval& i) { j = json::array({i.lo, i.hi}); }
void from_json(const json& j, Interval& i) {
  if (!j.is_array() || j.size() != 2) throw DomainError("interval must be [lo, hi]");
  i.lo = j[0].get<double>();
  i.hi = j[1].get<double>();
}

void to_json(json& j, const FamilySpec& f) {
  j = {{"name", f.name},
       {"num_agents", f.num_agents},
       {"spatial_dim", f.spatial_dim},
       {"domain", f.domain},
       {"layout_radius", f.layout_radius},
       {"nominal_start", mat_to_json(f.nominal_start)},
       {"nominal_goal", mat_to_json(f.nominal_goal)},
       {"perturbation_radius", f.perturbation_radius},
       {"agent_radius", f.agent_radius},
       {"radius_range", f.radius_range ? json(*f.radius_range) : json(nullptr)},
       {"obstacles", f.obstacles},
       {"obstacle_radius_range", f.obstacle_radius_range ? json(*f.obstacle_radius_range) : json(nullptr)},
       {"drag", drag_law_name(f.drag)},
       {"drag_constant", f.drag_constant},
       {"horizon", f.horizon},
       {"cost", f.cost},
       {"train_count", f.train_count},
       {"test_count", f.test_count},
       {"seed", f.seed}};
  j["domain"].erase("type");
}
void from_json(const json& j, FamilySpec& f) {
  check_keys(j,
             {"name", "num_agents", "spatial_dim", "domain", "layout_radius", "nominal_start", "nominal_goal",
              "perturbation_radius", "agent_radius", "radius_range", "obstacles", "obstacle_radius_range", "drag",
              "drag_constant", "horizon", "cost", "train_count", "test_count", "seed"},
             "FamilySpec");
  f.name = j.at("name").get<std::string>();
  f.num_agents = j.at("num_agents").get<int>();
  f.spatial_dim = j.at("spatial_dim").get<int>();
  f.domain = j.at("domain").get<AxisBox>();
  get_opt(j, "layout_radius", f.layout_radius);
  f.nominal_start = mat_from_json(j.at("nominal_start"));
  f.nominal_goal = mat_from_json(j.at("nominal_goal"));
  get_opt(j, "perturbation_radius", f.perturbation_radius);
  get_opt(j, "agent_radius", f.agent_radius);
  f.radius_range.reset();
  if (auto it = j.find("radius_range"); it != j.end() && !it->is_null()) f.radius_range = it->get<Interval>();
  f.obstacles = j.value("obstacles", std::vector<Obstacle>{});
  f.obstacle_radius_range.reset();
  if (auto it = j.find("obstacle_radius_range"); it != j.end() && !it->is_null())
    f.obstacle_radius_range = it->get<Interval>();
  f.drag = parse_drag_law(j.value("drag", std::string("none")));
  get_opt(j, "drag_constant", f.drag_constant);
  get_opt(j, "horizon", f.horizon);
  get_opt(j, "cost", f.cost);
  get_opt(j, "train_count", f.train_count);
  get_opt(j, "test_count", f.test_count);
  get_opt(j, "seed", f.seed);
}

void to_json(json& j, const DecoderConfig& c) {
  j = {{"arch", arch_name(c.arch)},
       {"layers", c.layers},
       {"cond_width", c.cond_width},
       {"cond_depth", c.cond_depth},
       {"time_width", c.time_width},
       {"time_depth", c.time_depth},
       {"activation", activation_name(c.activation)},
       {"block_diagonal", c.block_diagonal}};
}
void from_json(const json& j, DecoderConfig& c) {
  check_keys(j, {"arch", "layers", "cond_width", "cond_depth", "time_width", "time_depth", "activation", "block_diagonal"}, "DecoderConfig");
  if (j.contains("arch")) c.arch = parse_arch(j.at("arch").get<std::string>());
  get_opt(j, "layers", c.layers);
  get_opt(j, "cond_width", c.cond_width);
  get_opt(j, "cond_depth", c.cond_depth);
  get_opt(j, "time_width", c.time_width);
  get_opt(j, "time_depth", c.time_depth);
  if (j.contains("activation")) c.activation = parse_activation(j.at("activation").get<std::string>());
  get_opt(j, "block_diagonal", c.block_diagonal);
  if (c.layers < 0 || c.cond_width < 1 || c.cond_depth < 0 || c.time_width < 1 || c.time_depth < 0) throw DomainError("DecoderConfig: invalid sizes");
}

void to_json(json& j, const LatentConfig& c) {
  j = {{"variant", latent_variant_name(c.variant)},
       {"C_B", c.rotation_rate},
       {"C_Q", c.velocity_cost},
       {"composed_checkpoint", c.composed_checkpoint}};
}
void from_json(const json& j, LatentConfig& c) {
  check_keys(j, {"variant", "C_B", "C_Q", "composed_checkpoint"}, "LatentConfig");
  if (j.contains("variant")) c.variant = parse_latent_variant(j.at("variant").get<std::string>());
  get_opt(j, "C_B", c.rotation_rate);
  get_opt(j, "C_Q", c.velocity_cost);
  get_opt(j, "composed_checkpoint", c.composed_checkpoint);
  if (c.velocity_cost < 0.0) throw DomainError("LatentConfig: C_Q must be >= 0");
  if (c.variant == LatentVariant::lqr_composed && c.composed_checkpoint.empty())
    throw DomainError("LatentConfig: lqr_composed requires composed_checkpoint");
}

void to_json(json& j, const AnnealConfig& c) {
  j = {{"enabled", c.enabled}, {"eps0", c.eps0},       {"ell0", c.ell0}, {"rho_eps", c.rho_eps},
       {"rho_ell", c.rho_ell}, {"period_steps", c.period_steps}, {"eps", c.eps}, {"ell", c.ell}};
}
void from_json(const json& j, AnnealConfig& c) {
  check_keys(j, {"enabled", "eps0", "ell0", "rho_eps", "rho_ell", "period_steps", "eps", "ell"}, "AnnealConfig");
  get_opt(j, "enabled", c.enabled);
  get_opt(j, "eps0", c.eps0);
  get_opt(j, "ell0", c.ell0);
  get_opt(j, "rho_eps", c.rho_eps);
  get_opt(j, "rho_ell", c.rho_ell);
  get_opt(j, "period_steps", c.period_steps);
  get_opt(j, "eps", c.eps);
  get_opt(j, "ell", c.ell);
}

void to_json(json& j, const AnnealState& s) {
  j = {{"stage", s.stage}, {"eps", s.eps}, {"ell", s.ell}, {"carry_optimizer_state", s.carry_optimizer_state}};
}
void from_json(const json& j, AnnealState& s) {
  get_opt(j, "stage", s.stage);
  get_opt(j, "eps", s.eps);
  get_opt(j, "ell", s.ell);
  get_opt(j, "carry_optimizer_state", s.carry_optimizer_state);
}

void to_json(json& j, const TrainConfig& c) {
  j = {{"adam_steps", c.adam_steps},
       {"lbfgs_steps", c.lbfgs_steps},
       {"adam_lr", c.adam_lr},
       {"adam_beta1", c.adam_beta1},
       {"adam_beta2", c.adam_beta2},
       {"adam_eps", c.adam_eps},
       {"lbfgs_memory", c.lbfgs_memory},
       {"weight_decay", c.weight_decay},
       {"ic_weight", c.ic_weight},
       {"tc_weight", c.tc_weight},
       {"anneal", c.anneal},
       {"batch_size", c.batch_size},
       {"collocation_count", c.collocation_count},
       {"rng_seed", c.rng_seed},
       {"pretrain_steps", c.pretrain_steps},
       {"pretrain_lr", c.pretrain_lr},
       {"verbose", c.verbose}};
}
void from_json(const json& j, TrainConfig& c) {
  check_keys(j,
             {"adam_steps", "lbfgs_steps", "adam_lr", "adam_beta1", "adam_beta2", "adam_eps", "lbfgs_memory",
              "weight_decay", "ic_weight", "tc_weight", "anneal", "batch_size", "collocation_count", "rng_seed",
              "pretrain_steps", "pretrain_lr", "verbose"},
             "TrainConfig");
  get_opt(j, "adam_steps", c.adam_steps);
  get_opt(j, "lbfgs_steps", c.lbfgs_steps);
  get_opt(j, "adam_lr", c.adam_lr);
  get_opt(j, "adam_beta1", c.adam_beta1);
  get_opt(j, "adam_beta2", c.adam_beta2);
  get_opt(j, "adam_eps", c.adam_eps);
  get_opt(j, "lbfgs_memory", c.lbfgs_memory);
  get_opt(j, "weight_decay", c.weight_decay);
  get_opt(j, "ic_weight", c.ic_weight);
  get_opt(j, "tc_weight", c.tc_weight);
  get_opt(j, "anneal", c.anneal);
  get_opt(j, "batch_size", c.batch_size);
  get_opt(j, "collocation_count", c.collocation_count);
  get_opt(j, "rng_seed", c.rng_seed);
  get_opt(j, "pretrain_steps", c.pretrain_steps);
  get_opt(j, "pretrain_lr", c.pretrain_lr);
  get_opt(j, "verbose", c.verbose);
  if (c.adam_steps < 0 || c.lbfgs_steps < 0 || c.pretrain_steps < 0) throw DomainError("TrainConfig: negative step count");
  if (c.lbfgs_memory < 1) throw DomainError("TrainConfig: lbfgs_memory must be >= 1");
}

void to_json(json& j, const TrainReport& r) {
  j = {{"loss", r.loss},
       {"residual", r.residual},
       {"eps", r.eps},
       {"ell", r.ell},
       {"elapsed", r.elapsed},
       {"pretrain_loss", r.pretrain_loss},
       {"final_anneal", r.final_anneal},
       {"lbfgs_line_search_failures", r.lbfgs_line_search_failures}};
}
void from_json(const json& j, TrainReport& r) {
  get_opt(j, "loss", r.loss);
  get_opt(j, "residual", r.residual);
  get_opt(j, "eps", r.eps);
  get_opt(j, "ell", r.ell);
  get_opt(j, "elapsed", r.elapsed);
  get_opt(j, "pretrain_loss", r.pretrain_loss);
  get_opt(j, "final_anneal", r.final_anneal);
  get_opt(j, "lbfgs_line_search_failures", r.lbfgs_line_search_failures);
}

std::string json_digest(const json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string family_digest(const FamilySpec& f) { return json_digest(json(f)); }
std::string instance_digest(const ProblemInstance& p) { return json_digest(json(p)); }

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed for " + path.string());
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

template <class T>
void put_le(std::string& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(const std::string& in, std::size_t& pos) {
  if (in.size() < pos + sizeof(T))
    throw CheckpointError(CheckpointError::Kind::truncated, "checkpoint truncated at byte " + std::to_string(pos));
  unsigned char b[sizeof(T)];
  std::memcpy(b, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  pos += sizeof(T);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

std::uint32_t crc_of(const char* data, std::size_t n) {
  uLong c = crc32(0L, Z_NULL, 0);
  c = crc32(c, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(n));
  return static_cast<std::uint32_t>(c);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const DecoderWeights& w, const json& meta) {
  if (static_cast<std::size_t>(w.params.size()) !=
      count_parameters(w.cfg, w.num_agents, w.agent_dim, w.theta_dim))
    throw DomainError("save_checkpoint: parameter count does not match the decoder config");
  json m = meta.is_object() ? meta : json::object();
  m["decoder"] = {{"config", w.cfg},         {"num_agents", w.num_agents}, {"agent_dim", w.agent_dim},
                  {"theta_dim", w.theta_dim}, {"horizon", w.horizon},       {"weights_version", DecoderWeights::kVersion}};
  const std::string mj = m.dump();
  std::string out = "PISN";
  put_le<std::uint32_t>(out, Checkpoint::kFormatVersion);
  put_le<std::uint64_t>(out, mj.size());
  out += mj;
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(w.params.size()));
  const std::size_t payload_at = out.size();
  for (Eigen::Index i = 0; i < w.params.size(); ++i) put_le<double>(out, w.params[i]);
  put_le<std::uint32_t>(out, crc_of(out.data() + payload_at, out.size() - payload_at));
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  using K = CheckpointError::Kind;
  if (in.size() < 4) throw CheckpointError(K::truncated, "checkpoint truncated: missing magic");
  if (in.compare(0, 4, "PISN") != 0) throw CheckpointError(K::magic, "not a checkpoint: magic mismatch");
  std::size_t pos = 4;
  const auto version = get_le<std::uint32_t>(in, pos);
  if (version != Checkpoint::kFormatVersion)
    throw CheckpointError(K::version, "unsupported checkpoint version " + std::to_string(version) + " (reader is " +
                                          std::to_string(Checkpoint::kFormatVersion) + ")");
  const auto mlen = get_le<std::uint64_t>(in, pos);
  if (in.size() - pos < mlen) throw CheckpointError(K::truncated, "checkpoint truncated in metadata");
  Checkpoint ck;
  try {
    ck.meta = json::parse(in.substr(pos, mlen));
    pos += mlen;
    const json& d = ck.meta.at("decoder");
    ck.weights.cfg = d.at("config").get<DecoderConfig>();
    ck.weights.num_agents = d.at("num_agents").get<int>();
    ck.weights.agent_dim = d.at("agent_dim").get<int>();
    ck.weights.theta_dim = d.at("theta_dim").get<int>();
    ck.weights.horizon = d.at("horizon").get<double>();
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(K::metadata, std::string("bad checkpoint metadata: ") + e.what());
  }
  const auto count = get_le<std::uint64_t>(in, pos);
  const std::size_t expect =
      count_parameters(ck.weights.cfg, ck.weights.num_agents, ck.weights.agent_dim, ck.weights.theta_dim);
  if (count != expect)
    throw CheckpointError(K::length, "weight count " + std::to_string(count) + " does not match config (" +
                                         std::to_string(expect) + ")");
  if ((in.size() - pos) / 8 < count) throw CheckpointError(K::truncated, "checkpoint truncated in weights");
  const std::size_t payload_at = pos;
  ck.weights.params.resize(static_cast<Eigen::Index>(count));
  for (std::uint64_t i = 0; i < count; ++i) ck.weights.params[static_cast<Eigen::Index>(i)] = get_le<double>(in, pos);
  const std::uint32_t crc = crc_of(in.data() + payload_at, pos - payload_at);
  const auto stored = get_le<std::uint32_t>(in, pos);
  if (crc != stored) throw CheckpointError(K::crc, "checkpoint weight CRC mismatch");
  if (pos != in.size()) throw CheckpointError(K::length, "trailing bytes after checkpoint payload");
  return ck;
}

bool checkpoint_matches_family(const Checkpoint& ck, const FamilySpec& fam) {
  auto it = ck.meta.find("family_digest");
  if (it == ck.meta.end() || !it->is_string()) return true;
  return it->get<std::string>() == family_digest(fam);
}

std::string trajectory_csv(const PhaseTrajectory& traj, const ProblemInstance& inst) {
  const int N = inst.num_agents(), d = inst.spatial_dim(), dx = 2 * d;
  if (traj.x.cols() != N * dx || traj.p.cols() != N * dx || traj.x.rows() != traj.grid.size() ||
      traj.p.rows() != traj.grid.size())
    throw DomainError("trajectory_csv: trajectory does not match the instance");
  std::string s = "t,agent";
  for (const char* pre : {"w", "v", "pw", "pv", "u"})
    for (int k = 0; k < d; ++k) s += "," + std::string(pre) + std::to_string(k);
  s += "\n";
  for (int j = 0; j < traj.grid.size(); ++j) {
    for (int i = 0; i < N; ++i) {
      s += format_double(traj.grid.times[j]) + "," + std::to_string(i);
      const Vec xi = traj.x.row(j).segment(i * dx, dx).transpose();
      const Vec pi = traj.p.row(j).segment(i * dx, dx).transpose();
      const Vec ui = conjugate_control(inst, i, pi);
      for (int k = 0; k < dx; ++k) s += "," + format_double(xi[k]);
      for (int k = 0; k < dx; ++k) s += "," + format_double(pi[k]);
      for (int k = 0; k < d; ++k) s += "," + format_double(ui[k]);
      s += "\n";
    }
  }
  return s;
}

void write_trajectory_csv(const std::filesystem::path& path, const PhaseTrajectory& traj, const ProblemInstance& inst) {
  const std::string s = trajectory_csv(traj, inst);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << s;
  if (!out) throw IoError("write failed for " + path.string());
}

namespace {

double parse_num(const std::string& tok, int line) {
  double v = 0.0;
  const char* b = tok.data();
  const char* e = b + tok.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e)
    throw DomainError("trajectory CSV: bad number '" + tok + "' on line " + std::to_string(line));
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  return out;
}

}  // namespace

TrajectoryTable parse_trajectory_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DomainError("trajectory CSV: empty file");
  const auto head = split_csv(line);
  if (head.size() < 7 || head[0] != "t" || head[1] != "agent" || (head.size() - 2) % 5 != 0)
    throw DomainError("trajectory CSV: unexpected header");
  const int d = static_cast<int>((head.size() - 2) / 5);
  {
    std::size_t c = 2;
    for (const char* pre : {"w", "v", "pw", "pv", "u"})
      for (int k = 0; k < d; ++k)
        if (head[c++] != std::string(pre) + std::to_string(k))
          throw DomainError("trajectory CSV: unexpected column '" + head[c - 1] + "'");
  }
  const int dx = 2 * d;
  std::vector<double> times;
  std::vector<std::vector<double>> rows;
  std::vector<int> agents;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tok = split_csv(line);
    if (tok.size() != head.size()) throw DomainError("trajectory CSV: wrong column count on line " + std::to_string(lineno));
    std::vector<double> r;
    for (const auto& t : tok) r.push_back(parse_num(t, lineno));
    rows.push_back(std::move(r));
  }
  TrajectoryTable tab;
  tab.spatial_dim = d;
  if (rows.empty()) return tab;
  int N = 0;
  while (N < static_cast<int>(rows.size()) && rows[N][0] == rows[0][0]) ++N;
  if (rows.size() % N != 0) throw DomainError("trajectory CSV: incomplete time sample");
  const int Nt = static_cast<int>(rows.size()) / N;
  tab.num_agents = N;
  tab.traj.grid.times.resize(Nt);
  tab.traj.x.resize(Nt, N * dx);
  tab.traj.p.resize(Nt, N * dx);
  tab.controls.resize(Nt, N * d);
  for (int j = 0; j < Nt; ++j) {
    for (int i = 0; i < N; ++i) {
      const auto& r = rows[static_cast<std::size_t>(j) * N + i];
      if (static_cast<int>(r[1]) != i || r[0] != rows[static_cast<std::size_t>(j) * N][0])
        throw DomainError("trajectory CSV: rows must be sorted by (t, agent)");
      for (int k = 0; k < dx; ++k) {
        tab.traj.x(j, i * dx + k) = r[2 + k];
        tab.traj.p(j, i * dx + k) = r[2 + dx + k];
      }
      for (int k = 0; k < d; ++k) tab.controls(j, i * d + k) = r[2 + 2 * dx + k];
    }
    tab.traj.grid.times[j] = rows[static_cast<std::size_t>(j) * N][0];
  }
  return tab;
}

TrajectoryTable read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_trajectory_csv(ss.str());
}

}  // namespace pisonet
