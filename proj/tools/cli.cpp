#include "cli.hpp"

#include "invariants.hpp"
#include "pisonet/eikonal.hpp"
#include "pisonet/pipeline.hpp"
#include "pisonet/svg.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <ostream>

namespace pisonet::cli {

namespace fs = std::filesystem;

namespace {

std::string index_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", i);
  return buf;
}

struct InstanceSet {
  std::vector<fs::path> files;
  std::vector<ProblemInstance> insts;
  std::optional<FamilySpec> family;  // family.json next to the instances, when present
};

InstanceSet read_instances(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  InstanceSet s;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".json") continue;
    if (e.path().filename() == "family.json") {
      s.family = read_json_file(e.path()).get<FamilySpec>();
      continue;
    }
    s.files.push_back(e.path());
  }
  std::sort(s.files.begin(), s.files.end());
  for (const auto& f : s.files) s.insts.push_back(read_json_file(f).get<ProblemInstance>());
  if (s.insts.empty()) throw DomainError("no instance files in " + dir.string());
  return s;
}

void warn_digest(const LoadedModel& m, const InstanceSet& s, std::ostream& err) {
  if (s.family) {
    if (!checkpoint_matches_family(m.ck, *s.family))
      err << "warning: checkpoint family digest " << m.ck.meta.value("family_digest", "?") << " differs from "
          << family_digest(*s.family) << " of the instance set; running anyway\n";
    return;
  }
  for (const auto& in : s.insts)
    if (in.family_id != m.family.name) {
      err << "warning: instance family '" << in.family_id << "' differs from checkpoint family '" << m.family.name
          << "'; running anyway\n";
      return;
    }
}

int cmd_gen(const std::string& family, int n, int train, int test, std::uint64_t seed, const std::string& overrides,
            const fs::path& out, std::ostream& os) {
  json ov = overrides.empty() ? json::object() : json::parse(overrides);
  ov["train_count"] = train;
  ov["test_count"] = test;
  ov["seed"] = seed;
  const FamilySpec fam = make_family(family, n, ov);
  fs::create_directories(out);
  write_json_file(out / "family.json", fam);
  for (auto [split, name, count] : {std::tuple{Split::train, "train", train}, std::tuple{Split::test, "test", test}}) {
    const fs::path dir = out / name;
    fs::create_directories(dir);
    write_json_file(dir / "family.json", fam);
    for (int i = 0; i < count; ++i) write_json_file(dir / (index_name(i) + ".json"), sample_instance(fam, split, i));
  }
  os << "wrote " << train << " train and " << test << " test instances of family " << fam.name << " (digest "
     << family_digest(fam) << ") to " << out.string() << "\n";
  return 0;
}

int cmd_train(const fs::path& config, const fs::path& out, bool verbose, std::ostream& os) {
  RunConfig cfg = read_json_file(config).get<RunConfig>();
  if (verbose) cfg.train.verbose = true;
  std::optional<Pretrained> pre;
  if (cfg.latent.variant == LatentVariant::lqr_composed) {
    // relative paths name a checkpoint next to the output
    const fs::path out_dir = fs::absolute(out).parent_path();
    fs::path p = cfg.latent.composed_checkpoint;
    if (p.is_relative()) p = out_dir / p;
    pre = pretrained_from_checkpoint(load_checkpoint(p));
    cfg.latent.composed_checkpoint = fs::relative(p, out_dir).generic_string();
  }
  const TrainedModel m = train_model(cfg, pre ? &*pre : nullptr);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_checkpoint(out, m.weights, model_meta(cfg, m));
  os << "trained " << m.weights.params.size() << " parameters on " << (cfg.nominal_only ? 1 : cfg.family.train_count)
     << " instances: final loss " << format_double(m.report.loss.empty() ? 0.0 : m.report.loss.back()) << " in "
     << m.seconds << " s; final eps " << format_double(m.report.final_anneal.eps) << "\n";
  return 0;
}

int cmd_infer(const fs::path& ckpt, const fs::path& dir, const fs::path& out, int samples, std::ostream& os,
              std::ostream& err) {
  const LoadedModel m = load_model(ckpt);
  const InstanceSet s = read_instances(dir);
  warn_digest(m, s, err);
  const Dataset data = make_dataset(m.family, s.insts);
  fs::create_directories(out);
  for (std::size_t b = 0; b < data.insts.size(); ++b) {
    const ProblemInstance& in = data.insts[b];
    const TimeGrid grid = TimeGrid::uniform(in.horizon, samples);
    const auto tr = decode_trajectory(m.ck.weights, data.thetas[b],
                                      solve_latent(in, m.latent, grid, m.pre_weights(), m.pre_theta()));
    const std::string stem = s.files[b].stem().string();
    write_trajectory_csv(out / (stem + ".csv"), tr, in);
    const SafetyResult sr = safety_violation(tr, in, 10);
    write_json_file(out / (stem + ".json"),
                    {{"instance_digest", instance_digest(in)},
                     {"family_digest", m.ck.meta.value("family_digest", "")},
                     {"metrics", {{"cost", running_cost(tr, in)}, {"max_violation", sr.max_violation}, {"pass", sr.pass}}}});
  }
  os << "decoded " << data.insts.size() << " instances into " << out.string() << "\n";
  return 0;
}

int cmd_eval(const fs::path& ckpt, const fs::path& dir, const fs::path& report, int refine, int samples, int m_ref,
             std::ostream& os, std::ostream& err) {
  const LoadedModel m = load_model(ckpt);
  const InstanceSet s = read_instances(dir);
  warn_digest(m, s, err);
  const Dataset data = make_dataset(m.family, s.insts);
  EvalOptions opt;
  opt.bp = m.bp;
  opt.refine_steps = refine;
  opt.time_samples = samples;
  opt.refinement = m_ref;
  const EvalReport r = evaluate_batch(data.insts, data.thetas, m.ck.weights, m.latent, opt, m.pre_weights(), m.pre_theta());
  json j = r;
  j.erase("batched_seconds");
  if (report.has_parent_path()) fs::create_directories(report.parent_path());
  write_json_file(report, j);
  os << report_table(r);
  return 0;
}

int cmd_eikonal(const std::string& family, int n, std::uint64_t seed, double h, const SdeConfig& sde, int samples,
                const fs::path& out, std::ostream& os) {
  const FamilySpec fam = make_family(family, n);
  const ProblemInstance inst = nominal_instance(fam);
  const TimeGrid grid = TimeGrid::uniform(inst.horizon, samples);
  fs::create_directories(out);
  json trials = json::array();
  const ReferenceResult ref = generate_reference(inst, sde, h, grid, seed);
  for (std::size_t k = 0; k < ref.rollouts.size(); ++k) {
    const auto& r = ref.rollouts[k];
    trials.push_back({{"trial", k},
                      {"seed", seed + k},
                      {"reached", r.reached},
                      {"steps", r.steps},
                      {"clearance", path_clearance(r.path, inst)},
                      {"detour_ratio", detour_ratio(r.path, inst.num_agents())}});
  }
  // positions from the reference, velocities by differences, zero costate
  const int N = inst.num_agents(), Nt = grid.size();
  PhaseTrajectory tr{grid, RowMat::Zero(Nt, 4 * N), RowMat::Zero(Nt, 4 * N)};
  for (int j = 0; j < Nt; ++j) {
    const int a = std::max(0, j - 1), b = std::min(Nt - 1, j + 1);
    for (int i = 0; i < N; ++i) {
      tr.x.block(j, 4 * i, 1, 2) = ref.reference.block(j, 2 * i, 1, 2);
      tr.x.block(j, 4 * i + 2, 1, 2) =
          (ref.reference.block(b, 2 * i, 1, 2) - ref.reference.block(a, 2 * i, 1, 2)) / (grid.times[b] - grid.times[a]);
    }
  }
  write_trajectory_csv(out / "reference.csv", tr, inst);
  write_json_file(out / "instance.json", inst);
  write_json_file(out / "reference.json", {{"selected", ref.selected},
                                           {"trials", trials},
                                           {"h", h},
                                           {"instance_digest", instance_digest(inst)},
                                           {"corridors", corridor_signature(ref.reference, N, inst.env.obstacles)}});
  os << "selected trial " << ref.selected << " of " << ref.rollouts.size() << "; reference written to "
     << out.string() << "\n";
  return 0;
}

int cmd_plot(const fs::path& traj, const fs::path& envp, const fs::path& out, int arrows, bool controls,
             std::ostream& os, std::ostream& err) {
  const TrajectoryTable tab = read_trajectory_csv(traj);
  const json j = read_json_file(envp);
  const EnvironmentSpec env = j.contains("env") ? j.at("env").get<EnvironmentSpec>() : j.get<EnvironmentSpec>();
  SvgOptions o;
  o.arrows = arrows;
  o.control_arrows = controls;
  if (write_svg(out, tab, env, o)) err << "warning: 3D input, plotted the (x, y) projection\n";
  os << "wrote " << out.string() << "\n";
  return 0;
}

int cmd_check(std::ostream& os) {
  bool all = true;
  for (const auto& r : run_invariant_suite()) {
    os << (r.pass ? "PASS " : "FAIL ") << r.name;
    if (!r.detail.empty()) os << " (" << r.detail << ")";
    os << "\n";
    all = all && r.pass;
  }
  return all ? 0 : 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"pisonet: symplectic operator networks for multi-agent optimal control", "pisonet"};
  app.require_subcommand(1);

  std::string family, overrides;
  int n = 4, ntrain = 20, ntest = 20, refine = 0, samples = 64, m_ref = 10, arrows = 0;
  std::uint64_t seed = 1234;
  std::string out_path, config, ckpt, instances, report, traj, env;
  bool verbose = false, controls = false;
  double h = 0.005;
  SdeConfig sde;
  sde.c1 = 1000.0;
  sde.c2 = 10000.0;

  auto* gen = app.add_subcommand("gen", "sample a family's train/test instances");
  gen->add_option("--family", family, "family name")->required();
  gen->add_option("--n", n, "number of agents");
  gen->add_option("--train", ntrain, "train instances");
  gen->add_option("--test", ntest, "test instances");
  gen->add_option("--seed", seed, "family seed");
  gen->add_option("--overrides", overrides, "JSON merge patch over the family defaults");
  gen->add_option("--out", out_path, "output directory")->required();

  auto* train = app.add_subcommand("train", "train a decoder from a run configuration");
  train->add_option("--config", config, "run configuration JSON")->required();
  train->add_option("--out", out_path, "checkpoint path")->required();
  train->add_flag("--verbose", verbose, "print per-step losses");

  auto* infer = app.add_subcommand("infer", "decode trajectories for an instance directory");
  infer->add_option("--ckpt", ckpt, "checkpoint")->required();
  infer->add_option("--instances", instances, "instance directory")->required();
  infer->add_option("--out", out_path, "output directory")->required();
  infer->add_option("--samples", samples, "time samples per trajectory");

  auto* eval = app.add_subcommand("eval", "metrics report for an instance directory");
  eval->add_option("--ckpt", ckpt, "checkpoint")->required();
  eval->add_option("--instances", instances, "instance directory")->required();
  eval->add_option("--report", report, "report JSON path")->required();
  eval->add_option("--refine", refine, "L-BFGS refinement steps for failing instances");
  eval->add_option("--samples", samples, "coarse time samples");
  eval->add_option("--m", m_ref, "dense-grid refinement factor");

  auto* eik = app.add_subcommand("eikonal", "reference trajectories from Eikonal-guided rollouts");
  eik->add_option("--family", family, "family name")->required();
  eik->add_option("--out", out_path, "output directory")->required();
  eik->add_option("--n", n, "number of agents");
  eik->add_option("--seed", seed, "seed of trial 0");
  eik->add_option("--spacing", h, "Eikonal grid spacing");
  eik->add_option("--c1", sde.c1, "agent repulsion constant");
  eik->add_option("--c2", sde.c2, "wall repulsion constant");
  eik->add_option("--sigma", sde.sigma, "diffusion scale");
  eik->add_option("--dt", sde.dt, "time step");
  eik->add_option("--trials", sde.trials, "number of rollouts");
  eik->add_option("--max-steps", sde.max_steps, "step cap per rollout");
  eik->add_option("--samples", samples, "time samples of the reference");

  auto* plot = app.add_subcommand("plot", "render a trajectory CSV as SVG");
  plot->add_option("--traj", traj, "trajectory CSV")->required();
  plot->add_option("--env", env, "environment or instance JSON")->required();
  plot->add_option("--out", out_path, "SVG path")->required();
  plot->add_option("--arrows", arrows, "velocity arrows per agent");
  plot->add_flag("--controls", controls, "also draw control arrows");

  auto* check = app.add_subcommand("check", "run the invariant suite");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*gen) return cmd_gen(family, n, ntrain, ntest, seed, overrides, out_path, out);
    if (*train) return cmd_train(config, out_path, verbose, out);
    if (*infer) return cmd_infer(ckpt, instances, out_path, samples, out, err);
    if (*eval) return cmd_eval(ckpt, instances, report, refine, samples, m_ref, out, err);
    if (*eik) return cmd_eikonal(family, n, seed, h, sde, samples, out_path, out);
    if (*plot) return cmd_plot(traj, env, out_path, arrows, controls, out, err);
    if (*check) return cmd_check(out);
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace pisonet::cli
