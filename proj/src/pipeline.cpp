#include "pisonet/pipeline.hpp"

#include <chrono>

namespace pisonet {

void to_json(json& j, const RunConfig& c) {
  j = {{"family", c.family},     {"decoder", c.decoder},       {"latent", c.latent},
       {"train", c.train},       {"init_seed", c.init_seed},   {"nominal_only", c.nominal_only}};
}

void from_json(const json& j, RunConfig& c) {
  check_json_keys(j, {"family", "decoder", "latent", "train", "init_seed", "nominal_only"}, "RunConfig");
  const json& f = j.at("family");
  if (f.contains("name") && f.contains("num_agents") && !f.contains("domain")) {
    check_json_keys(f, {"name", "num_agents", "overrides"}, "RunConfig.family");
    c.family = make_family(f.at("name").get<std::string>(), f.at("num_agents").get<int>(),
                           f.value("overrides", json::object()));
  } else {
    c.family = f.get<FamilySpec>();
  }
  if (j.contains("decoder")) c.decoder = j.at("decoder").get<DecoderConfig>();
  if (j.contains("latent")) c.latent = j.at("latent").get<LatentConfig>();
  if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
  c.init_seed = j.value("init_seed", c.init_seed);
  c.nominal_only = j.value("nominal_only", c.nominal_only);
}

Dataset make_dataset(const FamilySpec& fam, std::vector<ProblemInstance> insts) {
  Dataset d;
  d.insts = std::move(insts);
  for (const auto& in : d.insts) d.thetas.push_back(encode_theta(in, fam));
  return d;
}

Dataset family_split(const FamilySpec& fam, Split split) {
  const int n = split == Split::train ? fam.train_count : fam.test_count;
  std::vector<ProblemInstance> insts;
  for (int i = 0; i < n; ++i) insts.push_back(sample_instance(fam, split, i));
  return make_dataset(fam, std::move(insts));
}

Dataset nominal_dataset(const FamilySpec& fam) { return make_dataset(fam, {nominal_instance(fam)}); }

TrainedModel train_model(const RunConfig& cfg, const Pretrained* pre, const ReferenceSet* refs) {
  if (cfg.latent.variant == LatentVariant::lqr_composed && pre == nullptr)
    throw DomainError("train_model: the composed latent needs a pretrained decoder");
  const FamilySpec& fam = cfg.family;
  const Dataset data = cfg.nominal_only ? nominal_dataset(fam) : family_split(fam, Split::train);
  if (data.insts.empty()) throw DomainError("train_model: empty training set");
  TrainedModel m;
  m.weights = make_decoder_weights(cfg.decoder, fam.num_agents, 2 * fam.spatial_dim, theta_dim(fam), fam.horizon,
                                   cfg.init_seed);
  const auto t0 = std::chrono::steady_clock::now();
  const auto samples = make_samples(data.insts, data.thetas, cfg.latent, cfg.train.collocation_count,
                                    pre ? &pre->weights : nullptr, pre ? &pre->theta : nullptr);
  m.report = train(m.weights, samples, cfg.train, refs);
  m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return m;
}

json model_meta(const RunConfig& cfg, const TrainedModel& m) {
  json summary = {{"final_loss", m.report.loss.empty() ? 0.0 : m.report.loss.back()},
                  {"steps", m.report.loss.size()},
                  {"lbfgs_line_search_failures", m.report.lbfgs_line_search_failures}};
  return {{"family", cfg.family},
          {"family_digest", family_digest(cfg.family)},
          {"latent", cfg.latent},
          {"anneal_state", m.report.final_anneal},
          {"train", cfg.train},
          {"init_seed", cfg.init_seed},
          {"nominal_only", cfg.nominal_only},
          {"summary", summary}};
}

BarrierParams final_barrier(const TrainReport& r) { return {r.final_anneal.eps, r.final_anneal.ell}; }

Pretrained pretrained_from_checkpoint(const Checkpoint& ck) {
  if (!ck.meta.contains("family")) throw DomainError("pretrained checkpoint records no family");
  const FamilySpec fam = ck.meta.at("family").get<FamilySpec>();
  return {ck.weights, encode_theta(nominal_instance(fam), fam)};
}

LoadedModel load_model(const std::filesystem::path& ckpt) {
  LoadedModel m;
  m.ck = load_checkpoint(ckpt);
  const json& meta = m.ck.meta;
  if (!meta.contains("family") || !meta.contains("latent"))
    throw CheckpointError(CheckpointError::Kind::metadata, "checkpoint metadata lacks family or latent block");
  m.family = meta.at("family").get<FamilySpec>();
  m.latent = meta.at("latent").get<LatentConfig>();
  if (meta.contains("anneal_state")) {
    const auto st = meta.at("anneal_state").get<AnnealState>();
    m.bp = {st.eps, st.ell};
  }
  if (m.latent.variant == LatentVariant::lqr_composed) {
    std::filesystem::path p = m.latent.composed_checkpoint;
    if (p.is_relative()) p = ckpt.parent_path() / p;
    m.pretrained = pretrained_from_checkpoint(load_checkpoint(p));
  }
  return m;
}

}  // namespace pisonet
