#pragma once

// End-to-end workflow shared by the command line and the acceptance runs:
// run configuration, datasets, training with an optional composed latent,
// checkpoint metadata and model loading.

#include "pisonet/evaluation.hpp"
#include "pisonet/io.hpp"

#include <filesystem>
#include <optional>

namespace pisonet {

struct RunConfig {
  FamilySpec family = make_family("free", 4);
  DecoderConfig decoder;
  LatentConfig latent;
  TrainConfig train;
  std::uint64_t init_seed = 7;
  bool nominal_only = false;  // train on the nominal instance alone
};

/// "family" accepts a full FamilySpec or {"name", "num_agents", "overrides"}.
void to_json(json& j, const RunConfig& c);
void from_json(const json& j, RunConfig& c);

struct Dataset {
  std::vector<ProblemInstance> insts;
  std::vector<Vec> thetas;
};

Dataset family_split(const FamilySpec& fam, Split split);
Dataset nominal_dataset(const FamilySpec& fam);
/// Encodes instances against fam.
Dataset make_dataset(const FamilySpec& fam, std::vector<ProblemInstance> insts);

/// Decoder plus the encoding of the nominal instance of its family.
struct Pretrained {
  DecoderWeights weights;
  Vec theta;
};

struct TrainedModel {
  DecoderWeights weights;
  TrainReport report;
  double seconds = 0.0;
};

TrainedModel train_model(const RunConfig& cfg, const Pretrained* pre = nullptr, const ReferenceSet* refs = nullptr);

/// Metadata block stored with a trained checkpoint.
json model_meta(const RunConfig& cfg, const TrainedModel& m);

/// Barrier parameters the model finished training at.
BarrierParams final_barrier(const TrainReport& r);

/// A checkpoint with everything inference needs.
struct LoadedModel {
  Checkpoint ck;
  FamilySpec family;
  LatentConfig latent;
  BarrierParams bp;
  std::optional<Pretrained> pretrained;

  const Pretrained* pre() const { return pretrained ? &*pretrained : nullptr; }
  const DecoderWeights* pre_weights() const { return pretrained ? &pretrained->weights : nullptr; }
  const Vec* pre_theta() const { return pretrained ? &pretrained->theta : nullptr; }
};

LoadedModel load_model(const std::filesystem::path& ckpt);

/// Pretrained decoder for the composed latent; the family comes from the
/// checkpoint metadata.
Pretrained pretrained_from_checkpoint(const Checkpoint& ck);

}  // namespace pisonet
