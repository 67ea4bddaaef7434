#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "npd/checkpoint.hpp"
#include "npd/config.hpp"
#include "npd/corpus.hpp"
#include "npd/errors.hpp"
#include "npd/io.hpp"
#include "npd/metrics.hpp"
#include "npd/monitor.hpp"
#include "npd/pretrain.hpp"
#include "npd/rng.hpp"
#include "npd/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required = false) {
  auto* c = cmd->add_option("--config", opts.config_path, "run configuration file");
  if (config_required) c->required();
  cmd->add_option("--seed", opts.seed, "override the config seed");
}

npd::CliConfig effective_config(const CommonOpts& opts) {
  npd::CliConfig cfg;
  if (!opts.config_path.empty()) cfg = npd::load_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  return cfg;
}

std::string pick_path(const std::string& flag_value, const std::string& config_value,
                      const std::string& what) {
  if (!flag_value.empty()) return flag_value;
  if (!config_value.empty()) return config_value;
  throw npd::NpdError(npd::ErrorKind::Config,
                      "no path given for " + what + " (flag or [paths] entry)");
}

// pool = first pool_size examples of the train split; shared by `gen` and `run`
std::vector<npd::Example> make_pool(const npd::CliConfig& cfg,
                                    const std::vector<npd::Example>& corpus) {
  auto [train, eval] = npd::split_corpus(corpus, cfg.train_fraction, cfg.eval_fraction);
  size_t n = std::min<size_t>(cfg.pool_size, train.size());
  return {train.begin(), train.begin() + n};
}

npd::io::Meta meta_for(const char* command, const npd::CliConfig& cfg,
                       std::initializer_list<std::pair<std::string, std::string>> inputs,
                       int64_t policy_version = -1) {
  npd::io::Meta m;
  m.command = command;
  m.config_hash = cfg.hash();
  m.policy_version = policy_version;
  m.inputs.assign(inputs.begin(), inputs.end());
  return m;
}

int cmd_corpus(const CommonOpts& opts, const std::string& out_flag) {
  auto cfg = effective_config(opts);
  std::string out = pick_path(out_flag, cfg.corpus_path, "corpus output");
  auto examples = npd::gen_corpus(cfg.vocab(), cfg.task, cfg.corpus_count);
  npd::write_corpus(examples, out);
  npd::io::write_meta(out, meta_for("corpus", cfg, {}));
  std::cout << "wrote " << examples.size() << " examples to " << out << "\n";
  return 0;
}

int cmd_pretrain(const CommonOpts& opts, const std::string& role,
                 const std::string& corpus_flag, const std::string& out_flag,
                 std::optional<uint32_t> epochs_flag) {
  auto cfg = effective_config(opts);
  bool teacher = role == "teacher";
  std::string corpus_path = pick_path(corpus_flag, cfg.corpus_path, "corpus");
  std::string out = pick_path(out_flag, teacher ? cfg.teacher_ckpt : cfg.student_ckpt,
                              role + " checkpoint output");

  auto corpus = npd::read_corpus(corpus_path);
  auto [train, eval] = npd::split_corpus(corpus, cfg.train_fraction, cfg.eval_fraction);

  npd::PretrainConfig pc;
  pc.epochs = epochs_flag ? *epochs_flag : (teacher ? cfg.teacher_epochs : cfg.student_epochs);
  pc.batch_packs = cfg.pretrain_batch_packs;
  pc.pack_len = cfg.pretrain_pack_len;
  pc.opt = cfg.pretrain_opt;
  pc.seed = cfg.seed;

  auto dims = teacher ? cfg.teacher_dims : cfg.student_dims;
  uint64_t init_tag = teacher ? uint64_t(npd::rng::kTagTeacherInit) : uint64_t(npd::rng::kTagStudentInit);
  npd::TinyLm model = npd::TinyLm::random_init(dims, npd::rng::mix_key(cfg.seed, init_tag, 0));
  auto result = npd::pretrain(std::move(model), train, eval, pc);

  npd::write_checkpoint(result.model, out);
  npd::io::write_meta(out, meta_for("pretrain", cfg, {{"corpus", corpus_path}},
                                    result.model.version));
  std::cout << role << " pretrained: eval token accuracy " << result.eval_token_accuracy
            << ", version " << result.model.version << ", written to " << out << "\n";
  return 0;
}

int cmd_gen(const CommonOpts& opts, const std::string& student_flag,
            const std::string& corpus_flag, const std::string& out_flag) {
  auto cfg = effective_config(opts);
  std::string student_path = pick_path(student_flag, cfg.student_ckpt, "student checkpoint");
  std::string corpus_path = pick_path(corpus_flag, cfg.corpus_path, "corpus");
  std::string out = out_flag.empty() ? "trajectories.jsonl" : out_flag;

  auto snapshot = npd::read_checkpoint(student_path);
  auto corpus = npd::read_corpus(corpus_path);
  auto pool = make_pool(cfg, corpus);
  std::vector<npd::PromptRef> prompts(pool.size());
  for (size_t i = 0; i < pool.size(); ++i)
    prompts[i] = npd::PromptRef{pool[i].id, pool[i].prompt};

  auto trajectories = npd::generate(snapshot, prompts, cfg.gen, cfg.seed);
  npd::write_trajectories(trajectories, out);
  npd::io::write_meta(out, meta_for("gen", cfg,
                                    {{"student", student_path}, {"corpus", corpus_path}},
                                    snapshot.version));
  std::cout << "generated " << trajectories.size() << " trajectories from policy v"
            << snapshot.version << " to " << out << "\n";
  return 0;
}

int cmd_score(const CommonOpts& opts, const std::string& teacher_flag,
              const std::string& student_flag, const std::string& traj_flag,
              const std::string& out_flag) {
  auto cfg = effective_config(opts);
  std::string teacher_path = pick_path(teacher_flag, cfg.teacher_ckpt, "teacher checkpoint");
  std::string student_path = pick_path(student_flag, cfg.student_ckpt, "student checkpoint");
  std::string out = out_flag.empty() ? "scores.jsonl" : out_flag;

  auto teacher = npd::read_checkpoint(teacher_path);
  auto student = npd::read_checkpoint(student_path);
  auto trajectories = npd::read_trajectories(traj_flag);
  for (const auto& tr : trajectories)
    if (tr.policy_version != student.version)
      throw npd::NpdError(npd::ErrorKind::Provenance,
                          "trajectory " + std::to_string(tr.id) + " is from policy v" +
                              std::to_string(tr.policy_version) +
                              " but the student snapshot is v" +
                              std::to_string(student.version));

  auto records = npd::score_trajectories(teacher, student, trajectories, cfg.filter);
  npd::write_scores(records, out);
  npd::io::write_meta(out, meta_for("score", cfg,
                                    {{"teacher", teacher_path},
                                     {"student", student_path},
                                     {"trajectories", traj_flag}},
                                    student.version));
  std::cout << "scored " << records.size() << " trajectories to " << out << "\n";
  return 0;
}

int cmd_filter(const CommonOpts& opts, const std::string& scores_flag,
               const std::string& out_flag, const std::string& stats_flag,
               std::optional<double> tau, bool disabled) {
  auto cfg = effective_config(opts);
  if (tau) cfg.filter.tau = *tau;
  if (disabled) cfg.filter.enabled = false;
  auto records = npd::read_scores(scores_flag);
  // zones in the file were assigned at score time; reclassify against the
  // filter settings in effect now
  for (auto& rec : records) rec.zone = npd::classify_zone(rec, cfg.filter);
  auto res = npd::filter_records(records, cfg.filter);
  std::string out = out_flag.empty() ? "kept.json" : out_flag;
  std::string stats = stats_flag.empty() ? "zone_stats.json" : stats_flag;
  npd::write_kept_ids(res.kept_ids, out);
  npd::write_zone_stats(res.stats, stats);
  npd::io::write_meta(out, meta_for("filter", cfg, {{"scores", scores_flag}}));
  std::cout << "kept " << res.kept_ids.size() << " of " << records.size()
            << " trajectories (tau " << cfg.filter.tau << ")\n";
  return 0;
}

int cmd_pack(const CommonOpts& opts, const std::string& traj_flag,
             const std::string& kept_flag, const std::string& out_flag) {
  auto cfg = effective_config(opts);
  auto trajectories = npd::read_trajectories(traj_flag);
  std::vector<npd::Trajectory> selected;
  if (!kept_flag.empty()) {
    auto kept_ids = npd::read_kept_ids(kept_flag);
    std::unordered_set<uint64_t> kept(kept_ids.begin(), kept_ids.end());
    for (auto& tr : trajectories)
      if (kept.count(tr.id)) selected.push_back(std::move(tr));
  } else {
    selected = std::move(trajectories);
  }
  auto items = npd::items_from_trajectories(selected);
  auto packs = npd::pack(items, cfg.pack_cfg);
  std::string out = out_flag.empty() ? "packs.bin" : out_flag;
  npd::write_packs(packs, cfg.pack_cfg.pack_len, cfg.vocab_size, out);
  npd::io::write_meta(out, meta_for("pack", cfg, {{"trajectories", traj_flag}}));
  std::cout << "packed " << selected.size() << " sequences into " << packs.size()
            << " packs of length " << cfg.pack_cfg.pack_len << " at " << out << "\n";
  return 0;
}

int cmd_annotate(const CommonOpts& opts, const std::string& teacher_flag,
                 const std::string& packs_flag, const std::string& out_flag,
                 std::optional<uint32_t> top_k) {
  auto cfg = effective_config(opts);
  if (top_k) cfg.top_k = *top_k;
  std::string teacher_path = pick_path(teacher_flag, cfg.teacher_ckpt, "teacher checkpoint");
  auto teacher = npd::read_checkpoint(teacher_path);
  auto pf = npd::read_packs(packs_flag);
  if (pf.vocab_size != teacher.dims().vocab)
    throw npd::NpdError(npd::ErrorKind::Config,
                        "pack vocab " + std::to_string(pf.vocab_size) +
                            " does not match teacher vocab " +
                            std::to_string(teacher.dims().vocab));
  auto sidecar = npd::annotate(teacher, pf.packs, cfg.top_k, pf.payload_crc);
  std::string out = out_flag.empty() ? "packs.topk" : out_flag;
  npd::write_sidecar(sidecar, out);
  npd::io::write_meta(out, meta_for("annotate", cfg,
                                    {{"teacher", teacher_path}, {"packs", packs_flag}},
                                    teacher.version));
  std::cout << "annotated " << sidecar.total_positions() << " positions (k=" << cfg.top_k
            << ") to " << out << "\n";
  return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& student_flag,
              const std::string& packs_flag, const std::string& sidecar_flag,
              const std::string& out_flag, const std::string& opt_in,
              const std::string& opt_out, uint32_t epoch_start,
              std::optional<uint32_t> epochs_flag, const std::string& metrics_flag) {
  auto cfg = effective_config(opts);
  std::string student_path = pick_path(student_flag, cfg.student_ckpt, "student checkpoint");
  auto student = npd::read_checkpoint(student_path);
  auto pf = npd::read_packs(packs_flag);
  auto sidecar = npd::read_sidecar(sidecar_flag, pf.payload_crc);

  npd::ReplayBuffer buffer;
  buffer.packs = std::move(pf.packs);
  buffer.sidecar = std::move(sidecar);
  buffer.pack_crc = pf.payload_crc;

  npd::RunConfig rc = cfg.to_run_config();
  npd::OptState opt = [&] {
    if (!opt_in.empty()) return npd::read_opt_state(opt_in);
    npd::OptConfig oc = rc.opt;
    oc.total_steps =
        rc.total_epochs * npd::steps_per_epoch(buffer.packs.size(), rc.batch_packs);
    return npd::OptState::init(student.dims(), oc);
  }();

  uint32_t epochs = epochs_flag ? *epochs_flag : rc.refresh_interval;
  uint64_t step_counter = opt.step;
  std::optional<npd::MetricsWriter> metrics;
  if (!metrics_flag.empty()) metrics.emplace(metrics_flag);

  npd::train_epochs(student, buffer, rc, opt, epoch_start, epochs, step_counter,
                    nullptr, {}, nullptr, metrics ? &*metrics : nullptr);

  std::string out = pick_path(out_flag, "", "trained checkpoint output");
  npd::write_checkpoint(student, out);
  npd::io::write_meta(out, meta_for("train", cfg,
                                    {{"student", student_path},
                                     {"packs", packs_flag},
                                     {"sidecar", sidecar_flag}},
                                    student.version));
  if (!opt_out.empty()) npd::write_opt_state(opt, opt_out);
  std::cout << "trained epochs " << epoch_start << ".." << (epoch_start + epochs - 1)
            << ", student now v" << student.version << ", written to " << out << "\n";
  return 0;
}

int cmd_run(const CommonOpts& opts, const std::string& corpus_flag,
            const std::string& teacher_flag, const std::string& student_flag,
            const std::string& out_dir_flag) {
  auto cfg = effective_config(opts);
  std::string corpus_path = pick_path(corpus_flag, cfg.corpus_path, "corpus");
  std::string teacher_path = pick_path(teacher_flag, cfg.teacher_ckpt, "teacher checkpoint");
  std::string student_path = pick_path(student_flag, cfg.student_ckpt, "student checkpoint");
  std::string out_dir = pick_path(out_dir_flag, cfg.out_dir, "output directory");

  auto corpus = npd::read_corpus(corpus_path);
  auto teacher = npd::read_checkpoint(teacher_path);
  auto student = npd::read_checkpoint(student_path);
  auto pool = make_pool(cfg, corpus);

  fs::create_directories(out_dir);
  npd::MetricsWriter metrics(fs::path(out_dir) / "metrics.csv");
  auto final_student = npd::run_npd(cfg.to_run_config(), teacher, std::move(student),
                                    pool, out_dir, &metrics);

  fs::path final_path = fs::path(out_dir) / "student_final.ckpt";
  uint32_t crc = npd::write_checkpoint(final_student, final_path);
  npd::io::write_meta(final_path, meta_for("run", cfg,
                                           {{"corpus", corpus_path},
                                            {"teacher", teacher_path},
                                            {"student", student_path}},
                                           final_student.version));
  std::cout << "run complete: student v" << final_student.version << ", checkpoint crc "
            << crc << ", artifacts under " << out_dir << "\n";
  return 0;
}

int cmd_klmon(const std::string& learner_flag, const std::string& generator_flag,
              const std::string& traj_flag, const std::string& out_flag,
              uint64_t step) {
  auto learner = npd::read_checkpoint(learner_flag);
  auto generator = npd::read_checkpoint(generator_flag);
  auto probes = npd::read_trajectories(traj_flag);
  auto sample = npd::kl_lag(learner, generator, probes);
  json j;
  j["step"] = step;
  j["kl"] = sample.kl;
  j["learner_version"] = sample.learner_version;
  j["generator_version"] = sample.generator_version;
  std::string text = j.dump() + "\n";
  std::cout << text;
  if (!out_flag.empty()) npd::io::write_text_atomic(out_flag, text);
  return 0;
}

int cmd_stats(const std::string& metrics_flag) {
  auto rows = npd::read_metrics(metrics_flag);
  const char* phases[] = {"generate", "score", "filter", "pack", "annotate", "train"};
  double totals[6] = {};
  double grand = 0.0;
  for (const auto& r : rows) {
    for (size_t i = 0; i < 6; ++i)
      if (r.phase == phases[i]) {
        totals[i] += r.wall_ms;
        grand += r.wall_ms;
      }
  }
  std::printf("%-12s %14s %9s\n", "phase", "wall_ms", "percent");
  for (size_t i = 0; i < 6; ++i)
    std::printf("%-12s %14.2f %8.2f%%\n", phases[i], totals[i],
                grand > 0 ? 100.0 * totals[i] / grand : 0.0);
  std::printf("%-12s %14.2f %8.2f%%\n", "total", grand, grand > 0 ? 100.0 : 0.0);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"near-policy distillation pipeline"};
  app.require_subcommand(1);

  CommonOpts corpus_opts, pretrain_opts, gen_opts, score_opts, filter_opts,
      pack_opts, annotate_opts, train_opts, run_opts;
  std::string out, corpus_in, role = "teacher", teacher_in, student_in, traj_in,
              scores_in, kept_in, packs_in, sidecar_in, stats_out, opt_in, opt_out,
              metrics_in, learner_in, generator_in, out_dir;
  std::optional<uint32_t> epochs_flag, top_k_flag;
  std::optional<double> tau_flag;
  bool filter_disabled = false;
  uint32_t epoch_start = 1;
  uint64_t klmon_step = 0;

  auto* c_corpus = app.add_subcommand("corpus", "generate the synthetic task corpus");
  add_common(c_corpus, corpus_opts);
  c_corpus->add_option("-o,--out", out, "corpus JSONL output");

  auto* c_pre = app.add_subcommand("pretrain", "pretrain a model on ground-truth targets");
  add_common(c_pre, pretrain_opts);
  c_pre->add_option("--role", role, "teacher|student")
      ->check(CLI::IsMember({"teacher", "student"}));
  c_pre->add_option("--corpus", corpus_in, "corpus JSONL");
  c_pre->add_option("-o,--out", out, "checkpoint output");
  c_pre->add_option("--epochs", epochs_flag, "override pretrain epochs");

  auto* c_gen = app.add_subcommand("gen", "generate trajectories from a policy snapshot");
  add_common(c_gen, gen_opts);
  c_gen->add_option("--student", student_in, "policy snapshot checkpoint");
  c_gen->add_option("--corpus", corpus_in, "prompt corpus JSONL");
  c_gen->add_option("-o,--out", out, "trajectories JSONL output");

  auto* c_score = app.add_subcommand("score", "compute IFD and delta-IFD records");
  add_common(c_score, score_opts);
  c_score->add_option("--teacher", teacher_in, "teacher checkpoint");
  c_score->add_option("--student", student_in, "student snapshot checkpoint");
  c_score->add_option("--trajectories", traj_in, "trajectories JSONL")->required();
  c_score->add_option("-o,--out", out, "scores JSONL output");

  auto* c_filter = app.add_subcommand("filter", "select the proximal learning zone");
  add_common(c_filter, filter_opts);
  c_filter->add_option("--scores", scores_in, "scores JSONL")->required();
  c_filter->add_option("--tau", tau_flag, "difficulty threshold");
  c_filter->add_flag("--disabled", filter_disabled, "keep every scoreable record");
  c_filter->add_option("-o,--out", out, "kept-ids JSON output");
  c_filter->add_option("--stats", stats_out, "zone stats JSON output");

  auto* c_pack = app.add_subcommand("pack", "pack trajectories into fixed-length rows");
  add_common(c_pack, pack_opts);
  c_pack->add_option("--trajectories", traj_in, "trajectories JSONL")->required();
  c_pack->add_option("--kept", kept_in, "kept-ids JSON (defaults to all)");
  c_pack->add_option("-o,--out", out, "pack file output");

  auto* c_ann = app.add_subcommand("annotate", "teacher top-k prefill over packs");
  add_common(c_ann, annotate_opts);
  c_ann->add_option("--teacher", teacher_in, "teacher checkpoint");
  c_ann->add_option("--packs", packs_in, "pack file")->required();
  c_ann->add_option("--top-k", top_k_flag, "retained logits per position");
  c_ann->add_option("-o,--out", out, "sidecar output");

  auto* c_train = app.add_subcommand("train", "composite-loss epochs over a fixed buffer");
  add_common(c_train, train_opts, /*config_required=*/true);
  c_train->add_option("--student", student_in, "student checkpoint");
  c_train->add_option("--packs", packs_in, "pack file")->required();
  c_train->add_option("--sidecar", sidecar_in, "top-k sidecar")->required();
  c_train->add_option("-o,--out", out, "trained checkpoint output")->required();
  c_train->add_option("--opt-in", opt_in, "optimizer state to resume");
  c_train->add_option("--opt-out", opt_out, "optimizer state output");
  c_train->add_option("--epoch-start", epoch_start, "global epoch number of the first epoch");
  c_train->add_option("--epochs", epochs_flag, "epochs to train (default: refresh interval)");
  c_train->add_option("--metrics", metrics_in, "metrics CSV output");

  auto* c_run = app.add_subcommand("run", "full distillation loop");
  add_common(c_run, run_opts, /*config_required=*/true);
  c_run->add_option("--corpus", corpus_in, "corpus JSONL");
  c_run->add_option("--teacher", teacher_in, "teacher checkpoint");
  c_run->add_option("--student", student_in, "initial student checkpoint");
  c_run->add_option("--out-dir", out_dir, "artifact directory");

  auto* c_kl = app.add_subcommand("klmon", "policy-lag KL between two snapshots");
  c_kl->add_option("--learner", learner_in, "learner checkpoint")->required();
  c_kl->add_option("--generator", generator_in, "generator checkpoint")->required();
  c_kl->add_option("--trajectories", traj_in, "probe trajectories JSONL")->required();
  c_kl->add_option("--step", klmon_step, "step label for the output");
  c_kl->add_option("-o,--out", out, "also write the JSON here");

  auto* c_stats = app.add_subcommand("stats", "per-phase wall-time breakdown");
  c_stats->add_option("--metrics", metrics_in, "metrics CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_corpus->parsed()) return cmd_corpus(corpus_opts, out);
    if (c_pre->parsed())
      return cmd_pretrain(pretrain_opts, role, corpus_in, out, epochs_flag);
    if (c_gen->parsed()) return cmd_gen(gen_opts, student_in, corpus_in, out);
    if (c_score->parsed())
      return cmd_score(score_opts, teacher_in, student_in, traj_in, out);
    if (c_filter->parsed())
      return cmd_filter(filter_opts, scores_in, out, stats_out, tau_flag, filter_disabled);
    if (c_pack->parsed()) return cmd_pack(pack_opts, traj_in, kept_in, out);
    if (c_ann->parsed())
      return cmd_annotate(annotate_opts, teacher_in, packs_in, out, top_k_flag);
    if (c_train->parsed())
      return cmd_train(train_opts, student_in, packs_in, sidecar_in, out, opt_in,
                       opt_out, epoch_start, epochs_flag, metrics_in);
    if (c_run->parsed())
      return cmd_run(run_opts, corpus_in, teacher_in, student_in, out_dir);
    if (c_kl->parsed())
      return cmd_klmon(learner_in, generator_in, traj_in, out, klmon_step);
    if (c_stats->parsed()) return cmd_stats(metrics_in);
  } catch (const npd::NpdError& e) {
    json err;
    err["error"] = e.kind_name();
    err["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    json err;
    err["error"] = "internal";
    err["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 1;
}
