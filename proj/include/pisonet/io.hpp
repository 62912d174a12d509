#pragma once

// JSON schema for every domain type, binary checkpoints, trajectory CSV.

#include "pisonet/decoder.hpp"
#include "pisonet/hamiltonian.hpp"
#include "pisonet/latent.hpp"
#include "pisonet/scenario.hpp"
#include "pisonet/training.hpp"

#include <json.hpp>

#include <filesystem>

namespace pisonet {

using nlohmann::json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public IoError {
 public:
  enum class Kind { truncated, magic, version, length, crc, metadata };
  CheckpointError(Kind k, const std::string& msg) : IoError(msg), kind(k) {}
  Kind kind;
};

/// Throws DomainError when j is not an object or has a key outside allowed.
void check_json_keys(const json& j, std::initializer_list<const char*> allowed, const char* what);

// Eigen helpers (ADL does not reach Eigen types from here).
json vec_to_json(const Vec& v);
Vec vec_from_json(const json& j);
json mat_to_json(const RowMat& m);  // array of rows
RowMat mat_from_json(const json& j);

void to_json(json& j, const Circle& c);
void from_json(const json& j, Circle& c);
void to_json(json& j, const AxisBox& b);
void from_json(const json& j, AxisBox& b);
void to_json(json& j, const SegmentWall& w);
void from_json(const json& j, SegmentWall& w);
void to_json(json& j, const Obstacle& o);
void from_json(const json& j, Obstacle& o);
void to_json(json& j, const AgentSpec& a);
void from_json(const json& j, AgentSpec& a);
void to_json(json& j, const EnvironmentSpec& e);
void from_json(const json& j, EnvironmentSpec& e);
void to_json(json& j, const CostSpec& c);
void from_json(const json& j, CostSpec& c);
void to_json(json& j, const ProblemInstance& p);
void from_json(const json& j, ProblemInstance& p);
void to_json(json& j, const TimeGrid& g);
void from_json(const json& j, TimeGrid& g);
void to_json(json& j, const PhaseTrajectory& t);
void from_json(const json& j, PhaseTrajectory& t);
void to_json(json& j, const LatentTrajectory& t);
void from_json(const json& j, LatentTrajectory& t);
void to_json(json& j, const BarrierParams& b);
void from_json(const json& j, BarrierParams& b);
void to_json(json& j, const Interval& i);
void from_json(const json& j, Interval& i);
void to_json(json& j, const FamilySpec& f);
void from_json(const json& j, FamilySpec& f);
void to_json(json& j, const DecoderConfig& c);
void from_json(const json& j, DecoderConfig& c);
void to_json(json& j, const LatentConfig& c);
void from_json(const json& j, LatentConfig& c);
void to_json(json& j, const AnnealConfig& c);
void from_json(const json& j, AnnealConfig& c);
void to_json(json& j, const AnnealState& s);
void from_json(const json& j, AnnealState& s);
void to_json(json& j, const TrainConfig& c);
void from_json(const json& j, TrainConfig& c);
void to_json(json& j, const TrainReport& r);
void from_json(const json& j, TrainReport& r);

/// 16 hex digits of the FNV-1a hash of the compact JSON dump.
std::string json_digest(const json& j);
std::string family_digest(const FamilySpec& f);
std::string instance_digest(const ProblemInstance& p);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double x);

struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;
  DecoderWeights weights;
  json meta = json::object();  // free-form: family digest, latent config, anneal state, training summary
};

/// "PISN", u32 version, u64 metadata length, metadata JSON, u64 weight count,
/// little-endian f64 weights, u32 CRC32 of the weight bytes.
void save_checkpoint(const std::filesystem::path& path, const DecoderWeights& w, const json& meta = json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// True when the checkpoint was trained on this family (or records no digest).
bool checkpoint_matches_family(const Checkpoint& ck, const FamilySpec& fam);

/// One row per (time sample, agent): t, agent, w*, v*, pw*, pv*, u*.
void write_trajectory_csv(const std::filesystem::path& path, const PhaseTrajectory& traj, const ProblemInstance& inst);
std::string trajectory_csv(const PhaseTrajectory& traj, const ProblemInstance& inst);

struct TrajectoryTable {
  int num_agents = 0;
  int spatial_dim = 0;
  PhaseTrajectory traj;
  RowMat controls;  // Nt x N*d
};
TrajectoryTable read_trajectory_csv(const std::filesystem::path& path);
TrajectoryTable parse_trajectory_csv(const std::string& text);

}  // namespace pisonet
