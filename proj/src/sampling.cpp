#include "npd/sampling.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "npd/errors.hpp"
#include "npd/io.hpp"
#include "npd/parallel.hpp"
#include "npd/rng.hpp"

namespace npd {

using nlohmann::json;

namespace {

Token argmax_token(std::span<const double> logits) {
  Token best = 0;
  for (uint32_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return best;
}

Token sample_token(std::span<const double> logits, double temperature, Workspace& ws,
                   rng::Stream& stream) {
  uint32_t v = static_cast<uint32_t>(logits.size());
  for (uint32_t i = 0; i < v; ++i) ws.dlogits[i] = logits[i] / temperature;
  SoftmaxStats st = softmax_stats(std::span<const double>(ws.dlogits.data(), v), ws.exps);
  double u = stream.next_double() * st.sum;
  double cum = 0.0;
  for (uint32_t i = 0; i < v; ++i) {
    cum += ws.exps[i];
    if (u < cum) return i;
  }
  return v - 1;  // guards the cum < sum rounding edge
}

Trajectory roll_one(const TinyLm& snapshot, const PromptRef& prompt, const GenConfig& cfg,
                    uint64_t seed, uint32_t sample_index, Workspace& ws) {
  Trajectory tr;
  tr.id = prompt.id * cfg.samples_per_prompt + sample_index;
  tr.prompt.assign(prompt.tokens.begin(), prompt.tokens.end());
  tr.policy_version = snapshot.version;
  tr.sample_index = sample_index;
  rng::Stream stream(seed, prompt.id, sample_index);
  tr.seed = stream.key();

  bool greedy = cfg.mode == GenMode::Greedy && sample_index == 0;
  std::vector<Token> seq(tr.prompt);
  for (uint32_t step = 0; step < cfg.max_len; ++step) {
    forward_at(snapshot, seq, {}, seq.size(), ws);
    Token next = greedy ? argmax_token(ws.logits)
                        : sample_token(ws.logits, cfg.temperature, ws, stream);
    tr.response.push_back(next);
    seq.push_back(next);
    if (next == Vocab::kEos) break;
  }
  return tr;
}

}  // namespace

std::vector<Trajectory> generate(const TinyLm& snapshot, std::span<const PromptRef> prompts,
                                 const GenConfig& cfg, uint64_t seed) {
  if (prompts.empty()) throw NpdError(ErrorKind::Input, "generate: empty prompt set");
  if (cfg.max_len == 0) throw NpdError(ErrorKind::Config, "generate: max_len must be > 0");
  if (cfg.temperature <= 0.0)
    throw NpdError(ErrorKind::Config, "generate: temperature must be > 0");
  if (cfg.samples_per_prompt == 0)
    throw NpdError(ErrorKind::Config, "generate: samples_per_prompt must be >= 1");
  if (!snapshot.p.all_finite())
    throw NpdError(ErrorKind::Numerical, "generate: snapshot has non-finite parameters");

  size_t k = cfg.samples_per_prompt;
  std::vector<Trajectory> out(prompts.size() * k);
  par::parallel_for(out.size(), [&](size_t i) {
    thread_local Workspace ws;
    ws.resize(snapshot.dims());
    size_t p = i / k;
    uint32_t s = static_cast<uint32_t>(i % k);
    out[i] = roll_one(snapshot, prompts[p], cfg, seed, s, ws);
  });
  return out;
}

void write_trajectories(const std::vector<Trajectory>& trajectories,
                        const std::filesystem::path& path) {
  std::string buf;
  for (const auto& tr : trajectories) {
    json j;
    j["id"] = tr.id;
    j["prompt"] = tr.prompt;
    j["response"] = tr.response;
    j["policy_version"] = tr.policy_version;
    j["sample_index"] = tr.sample_index;
    j["seed"] = tr.seed;
    buf += j.dump();
    buf += '\n';
  }
  io::write_text_atomic(path, buf);
}

std::vector<Trajectory> read_trajectories(const std::filesystem::path& path) {
  std::vector<Trajectory> out;
  auto lines = io::read_lines(path);
  for (size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      json j = json::parse(lines[i]);
      Trajectory tr;
      tr.id = j.at("id").get<uint64_t>();
      tr.prompt = j.at("prompt").get<std::vector<Token>>();
      tr.response = j.at("response").get<std::vector<Token>>();
      tr.policy_version = j.at("policy_version").get<uint32_t>();
      tr.sample_index = j.at("sample_index").get<uint32_t>();
      tr.seed = j.at("seed").get<uint64_t>();
      out.push_back(std::move(tr));
    } catch (const json::exception& e) {
      throw NpdError(ErrorKind::Parse, path.string() + ": line " +
                                           std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

const char* gen_mode_name(GenMode mode) {
  return mode == GenMode::Greedy ? "greedy" : "sample";
}

GenMode gen_mode_from_name(const std::string& name) {
  if (name == "greedy") return GenMode::Greedy;
  if (name == "sample") return GenMode::Sample;
  throw NpdError(ErrorKind::Config, "unknown generation mode: " + name);
}

}  // namespace npd
