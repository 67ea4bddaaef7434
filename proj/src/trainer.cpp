#include "npd/trainer.hpp"

#include <chrono>
#include <cmath>
#include <unordered_set>

#include "npd/errors.hpp"
#include "npd/io.hpp"
#include "npd/kernels.hpp"
#include "npd/monitor.hpp"
#include "npd/rng.hpp"

namespace npd {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void fisher_yates(std::vector<size_t>& order, rng::Stream& stream) {
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[stream.below(static_cast<uint32_t>(i))]);
}

}  // namespace

double kd_position(std::span<const double> student_logits,
                   std::span<const double> student_exps, const SoftmaxStats& stats,
                   const TopKAnnotation& ann, KdMode mode, KdScratch& scratch,
                   double* dlogits) {
  size_t k = ann.indices.size();
  size_t v = student_logits.size();
  for (size_t c = 0; c < k; ++c)
    if (ann.indices[c] >= v)
      throw NpdError(ErrorKind::Validation, "kd: annotation index out of vocab");

  // teacher mass over its stored logits
  scratch.texp.resize(k);
  double tmax = static_cast<double>(ann.logits[0]);
  for (size_t c = 1; c < k; ++c)
    tmax = std::max(tmax, static_cast<double>(ann.logits[c]));
  for (size_t c = 0; c < k; ++c)
    scratch.texp[c] = std::exp(static_cast<double>(ann.logits[c]) - tmax);
  double tz = kernels::sum(scratch.texp.data(), k);
  double ln_tz = std::log(tz);

  double ln_zs = std::log(stats.sum);
  double loss = 0.0;
  if (mode == KdMode::Renormalized) {
    double wk = 0.0;
    for (size_t c = 0; c < k; ++c) wk += student_exps[ann.indices[c]];
    double ln_wk = std::log(wk);
    for (size_t c = 0; c < k; ++c) {
      double q = scratch.texp[c] / tz;
      double ln_q = static_cast<double>(ann.logits[c]) - tmax - ln_tz;
      uint32_t id = ann.indices[c];
      double ln_r = (student_logits[id] - stats.max) - ln_wk;
      loss += q * (ln_q - ln_r);
      if (dlogits) dlogits[id] += student_exps[id] / wk - q;
    }
  } else {
    for (size_t c = 0; c < k; ++c) {
      double q = scratch.texp[c] / tz;
      double ln_q = static_cast<double>(ann.logits[c]) - tmax - ln_tz;
      uint32_t id = ann.indices[c];
      double lsm = student_logits[id] - stats.max - ln_zs;
      loss += q * (ln_q - lsm);
      if (dlogits) dlogits[id] -= q;
    }
    if (dlogits)
      for (size_t i = 0; i < v; ++i) dlogits[i] += student_exps[i] / stats.sum;
  }
  return loss;
}

double kd_loss(std::span<const double> student_logits, const TopKAnnotation& ann,
               KdMode mode) {
  std::vector<double> exps(student_logits.size());
  SoftmaxStats st = softmax_stats(student_logits, exps);
  KdScratch scratch;
  return kd_position(student_logits, exps, st, ann, mode, scratch, nullptr);
}

void accumulate_composite(const TinyLm& lm, const Pack& pack,
                          const std::vector<TopKAnnotation>* annotations,
                          double lambda, KdMode mode, Workspace& ws,
                          KdScratch& scratch, LmTensors& grad, double& ce_sum,
                          double& kd_sum, size_t& positions) {
  uint32_t v = lm.dims().vocab;
  size_t cursor = 0;
  for (size_t t = 0; t < pack.occupied; ++t) {
    if (!pack.loss_mask[t]) continue;
    forward_at(lm, pack.tokens, pack.segment_ids, t, ws);
    SoftmaxStats st = softmax_stats(ws.logits, ws.exps);
    double log_z = std::log(st.sum);
    Token y = pack.tokens[t];
    ce_sum += -(ws.logits[y] - st.max - log_z);
    for (uint32_t i = 0; i < v; ++i) ws.dlogits[i] = ws.exps[i] / st.sum;
    ws.dlogits[y] -= 1.0;

    if (annotations) {
      if (cursor >= annotations->size() || (*annotations)[cursor].position != t)
        throw NpdError(ErrorKind::Validation,
                       "sidecar does not cover masked position " + std::to_string(t));
      std::fill(ws.dkd.begin(), ws.dkd.end(), 0.0);
      kd_sum += kd_position(ws.logits, ws.exps, st, (*annotations)[cursor], mode,
                            scratch, ws.dkd.data());
      for (uint32_t i = 0; i < v; ++i)
        ws.dlogits[i] = (1.0 - lambda) * ws.dlogits[i] + lambda * ws.dkd[i];
      ++cursor;
    }
    backward_at(lm, ws, ws.dlogits, grad);
    ++positions;
  }
  if (annotations && cursor != annotations->size())
    throw NpdError(ErrorKind::Validation,
                   "sidecar has " + std::to_string(annotations->size()) +
                       " annotations but pack has " + std::to_string(cursor) +
                       " masked positions");
}

CompositeResult composite_loss(const TinyLm& lm, const Pack& pack,
                               const std::vector<TopKAnnotation>& annotations,
                               double lambda, KdMode mode) {
  CompositeResult res;
  res.grad = LmTensors::zeros(lm.dims());
  Workspace ws;
  ws.resize(lm.dims());
  KdScratch scratch;
  accumulate_composite(lm, pack, &annotations, lambda, mode, ws, scratch, res.grad,
                       res.loss_ce, res.loss_kd, res.positions);
  if (res.positions == 0)
    throw NpdError(ErrorKind::Input, "composite_loss: pack has no masked positions");
  double inv = 1.0 / static_cast<double>(res.positions);
  res.loss_ce *= inv;
  res.loss_kd *= inv;
  res.loss_total = (1.0 - lambda) * res.loss_ce + lambda * res.loss_kd;
  res.grad.scale(inv);
  return res;
}

std::vector<uint32_t> refresh_schedule(uint32_t total_epochs, uint32_t refresh_interval) {
  if (total_epochs < 1 || refresh_interval < 1)
    throw NpdError(ErrorKind::Config, "refresh_schedule: E and K must be >= 1");
  std::vector<uint32_t> out;
  for (uint32_t e = 1; e <= total_epochs; ++e)
    if ((e - 1) % refresh_interval == 0) out.push_back(e);
  return out;
}

uint32_t steps_per_epoch(size_t pack_count, uint32_t batch_packs) {
  return static_cast<uint32_t>((pack_count + batch_packs - 1) / batch_packs);
}

void train_epochs(TinyLm& student, const ReplayBuffer& buffer, const RunConfig& cfg,
                  OptState& opt, uint32_t epoch_start, uint32_t epoch_count,
                  uint64_t& step_counter, const TinyLm* generator,
                  std::span<const Trajectory> probes, const ZoneStats* zones,
                  MetricsWriter* metrics) {
  Workspace ws;
  ws.resize(student.dims());
  KdScratch scratch;
  LmTensors grad = LmTensors::zeros(student.dims());

  for (uint32_t ei = 0; ei < epoch_count; ++ei) {
    uint32_t epoch = epoch_start + ei;
    std::vector<size_t> order(buffer.packs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng::Stream shuffle_stream(cfg.seed, rng::kTagTrainShuffle, epoch);
    fisher_yates(order, shuffle_stream);

    for (size_t start = 0; start < order.size(); start += cfg.batch_packs) {
      auto t0 = Clock::now();
      size_t end = std::min(order.size(), start + cfg.batch_packs);
      grad.set_zero();
      double ce_sum = 0.0, kd_sum = 0.0;
      size_t positions = 0;
      for (size_t bi = start; bi < end; ++bi) {
        size_t pi = order[bi];
        accumulate_composite(student, buffer.packs[pi], &buffer.sidecar.per_pack[pi],
                             cfg.lambda, cfg.kd_normalization, ws, scratch, grad,
                             ce_sum, kd_sum, positions);
      }
      if (positions == 0) continue;
      double inv = 1.0 / static_cast<double>(positions);
      double loss_ce = ce_sum * inv;
      double loss_kd = kd_sum * inv;
      double loss_total = (1.0 - cfg.lambda) * loss_ce + cfg.lambda * loss_kd;
      if (!std::isfinite(loss_total))
        throw NpdError(ErrorKind::Numerical, "training loss diverged (non-finite)");
      grad.scale(inv);
      double lr_now = cosine_lr(opt.cfg, opt.step);
      adamw_step(student, grad, opt);
      ++step_counter;
      if (metrics) {
        MetricsRow r;
        r.step = step_counter;
        r.epoch = epoch;
        r.phase = "train";
        r.loss_total = loss_total;
        r.loss_ce = loss_ce;
        r.loss_kd = loss_kd;
        r.lr = lr_now;
        if (zones) {
          r.zone_degenerate_frac = zones->fractions[size_t(Zone::Degenerate)];
          r.zone_proximal_frac = zones->fractions[size_t(Zone::Proximal)];
          r.zone_disconnect_frac = zones->fractions[size_t(Zone::CognitiveDisconnect)];
          r.zone_unconfirmed_frac = zones->fractions[size_t(Zone::TeacherUnconfirmed)];
        }
        r.wall_ms = ms_since(t0);
        metrics->row(r);
      }
    }

    if (metrics && generator != nullptr) {
      auto t0 = Clock::now();
      KlLagSample kl = kl_lag(student, *generator, probes);
      MetricsRow r;
      r.step = step_counter;
      r.epoch = epoch;
      r.phase = "kl";
      r.kl_lag = kl.kl;
      r.wall_ms = ms_since(t0);
      metrics->row(r);
    }
  }
}

namespace {

void phase_row(MetricsWriter* metrics, uint64_t step, uint32_t epoch,
               const char* phase, double wall_ms) {
  if (!metrics) return;
  MetricsRow r;
  r.step = step;
  r.epoch = epoch;
  r.phase = phase;
  r.wall_ms = wall_ms;
  metrics->row(r);
}

}  // namespace

TinyLm run_npd(const RunConfig& cfg, const TinyLm& teacher, TinyLm student,
               std::span<const Example> pool, const std::filesystem::path& out_dir,
               MetricsWriter* metrics) {
  if (pool.empty()) throw NpdError(ErrorKind::Input, "run: empty prompt pool");
  if (teacher.dims().vocab != student.dims().vocab)
    throw NpdError(ErrorKind::Config, "run: teacher/student vocab mismatch");
  if (cfg.lambda < 0.0 || cfg.lambda > 1.0)
    throw NpdError(ErrorKind::Config, "run: lambda must be in [0, 1]");

  bool write_artifacts = !out_dir.empty();
  std::vector<PromptRef> prompts(pool.size());
  for (size_t i = 0; i < pool.size(); ++i)
    prompts[i] = PromptRef{pool[i].id, pool[i].prompt};

  auto refreshes = refresh_schedule(cfg.total_epochs, cfg.refresh_interval);
  size_t next_refresh = 0;

  ReplayBuffer buffer;
  std::optional<OptState> opt;
  std::optional<TinyLm> generator;
  std::vector<Trajectory> probes;
  ZoneStats zones;
  uint64_t step_counter = 0;

  for (uint32_t epoch = 1; epoch <= cfg.total_epochs; ++epoch) {
    if (next_refresh < refreshes.size() && refreshes[next_refresh] == epoch) {
      ++next_refresh;
      TinyLm snapshot = student;

      std::filesystem::path rdir;
      if (write_artifacts) {
        char name[32];
        std::snprintf(name, sizeof(name), "refresh_e%04u", epoch);
        rdir = out_dir / name;
        std::filesystem::create_directories(rdir);
      }

      auto t0 = Clock::now();
      auto trajectories = generate(snapshot, prompts, cfg.gen_cfg, cfg.seed);
      phase_row(metrics, step_counter, epoch, "generate", ms_since(t0));
      if (write_artifacts) write_trajectories(trajectories, rdir / "trajectories.jsonl");

      t0 = Clock::now();
      auto records = score_trajectories(teacher, snapshot, trajectories, cfg.filter_cfg);
      phase_row(metrics, step_counter, epoch, "score", ms_since(t0));
      if (write_artifacts) write_scores(records, rdir / "scores.jsonl");

      t0 = Clock::now();
      auto fres = filter_records(records, cfg.filter_cfg);
      phase_row(metrics, step_counter, epoch, "filter", ms_since(t0));
      if (write_artifacts) {
        write_kept_ids(fres.kept_ids, rdir / "kept.json");
        write_zone_stats(fres.stats, rdir / "zone_stats.json");
      }
      if (fres.kept_ids.empty())
        throw NpdError(ErrorKind::FilterStarvation,
                       "no samples in the proximal zone at epoch " +
                           std::to_string(epoch) + "; consider relaxing tau");

      probes.clear();
      for (const auto& tr : trajectories) {
        if (tr.sample_index != 0) continue;
        probes.push_back(tr);
        if (probes.size() >= cfg.probe_count) break;
      }

      std::unordered_set<uint64_t> kept(fres.kept_ids.begin(), fres.kept_ids.end());
      std::vector<Trajectory> selected;
      selected.reserve(kept.size());
      for (auto& tr : trajectories)
        if (kept.count(tr.id)) selected.push_back(std::move(tr));

      t0 = Clock::now();
      auto items = items_from_trajectories(selected);
      auto packs = pack(items, cfg.pack_cfg);
      uint32_t crc = packs_content_crc(packs, cfg.pack_cfg.pack_len,
                                       teacher.dims().vocab);
      phase_row(metrics, step_counter, epoch, "pack", ms_since(t0));
      if (write_artifacts)
        write_packs(packs, cfg.pack_cfg.pack_len, teacher.dims().vocab,
                    rdir / "packs.bin");

      t0 = Clock::now();
      Sidecar sidecar = annotate(teacher, packs, cfg.top_k, crc);
      phase_row(metrics, step_counter, epoch, "annotate", ms_since(t0));
      if (write_artifacts) write_sidecar(sidecar, rdir / "packs.topk");

      buffer.packs = std::move(packs);
      buffer.sidecar = std::move(sidecar);
      buffer.generator_version = snapshot.version;
      buffer.pack_crc = crc;
      zones = fres.stats;

      if (!opt) {
        OptConfig oc = cfg.opt;
        oc.total_steps =
            cfg.total_epochs * steps_per_epoch(buffer.packs.size(), cfg.batch_packs);
        opt = OptState::init(student.dims(), oc);
      }

      generator = std::move(snapshot);

      // exact-snapshot semantics: lag is zero right after a refresh
      KlLagSample kl0 = kl_lag(student, *generator, probes);
      MetricsRow r;
      r.step = step_counter;
      r.epoch = epoch;
      r.phase = "kl";
      r.kl_lag = kl0.kl;
      r.wall_ms = 0.0;
      if (metrics) metrics->row(r);
    }

    train_epochs(student, buffer, cfg, *opt, epoch, 1, step_counter,
                 generator ? &*generator : nullptr, probes, &zones, metrics);
  }

  if (metrics) metrics->flush();
  return student;
}

const char* kd_mode_name(KdMode mode) {
  return mode == KdMode::Renormalized ? "renormalized" : "truncated";
}

KdMode kd_mode_from_name(const std::string& name) {
  if (name == "renormalized") return KdMode::Renormalized;
  if (name == "truncated") return KdMode::Truncated;
  throw NpdError(ErrorKind::Config, "unknown kd normalization: " + name);
}

}  // namespace npd
