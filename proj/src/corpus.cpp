#include "npd/corpus.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "npd/io.hpp"
#include "npd/rng.hpp"

namespace npd {

using nlohmann::json;

std::vector<Token> task_target(const Vocab& vocab, const TaskSpec& spec,
                               std::span<const Token> payload) {
  std::vector<Token> target;
  target.reserve(payload.size() + 1);
  switch (spec.kind) {
    case TaskKind::Reverse:
      for (size_t i = payload.size(); i-- > 0;) target.push_back(payload[i]);
      break;
    case TaskKind::ModAdd: {
      uint64_t acc = 0;
      for (Token t : payload) {
        acc = (acc + (t - 4)) % spec.alphabet_size;
        target.push_back(vocab.payload(static_cast<uint32_t>(acc)));
      }
      break;
    }
  }
  target.push_back(Vocab::kEos);
  return target;
}

std::vector<Example> gen_corpus(const Vocab& vocab, const TaskSpec& spec, size_t n) {
  if (n < 1) throw NpdError(ErrorKind::Config, "gen_corpus: n must be >= 1");
  if (spec.alphabet_size > vocab.payload_size())
    throw NpdError(ErrorKind::Config,
                   "alphabet_size " + std::to_string(spec.alphabet_size) +
                       " exceeds vocab payload " + std::to_string(vocab.payload_size()));
  if (spec.prompt_len_min < 1 || spec.prompt_len_max > 64 ||
      spec.prompt_len_min > spec.prompt_len_max)
    throw NpdError(ErrorKind::Config, "prompt_len_range must satisfy 1 <= min <= max <= 64");

  std::vector<Example> out(n);
  for (size_t i = 0; i < n; ++i) {
    rng::Stream stream(spec.seed, rng::kTagCorpus, i);
    uint32_t span = spec.prompt_len_max - spec.prompt_len_min + 1;
    uint32_t len = spec.prompt_len_min + stream.below(span);
    std::vector<Token> payload(len);
    for (auto& t : payload) t = vocab.payload(stream.below(spec.alphabet_size));

    Example& ex = out[i];
    ex.id = i;
    ex.prompt.reserve(len + 2);
    ex.prompt.push_back(Vocab::kBos);
    ex.prompt.insert(ex.prompt.end(), payload.begin(), payload.end());
    ex.prompt.push_back(Vocab::kSep);
    ex.target = task_target(vocab, spec, payload);
  }
  return out;
}

std::pair<std::vector<Example>, std::vector<Example>> split_corpus(
    const std::vector<Example>& examples, double train_fraction, double eval_fraction) {
  if (train_fraction <= 0.0 || eval_fraction <= 0.0 ||
      train_fraction + eval_fraction > 1.0 + 1e-12)
    throw NpdError(ErrorKind::Config, "split fractions must be positive and sum to <= 1");
  size_t n = examples.size();
  size_t n_train = static_cast<size_t>(std::floor(static_cast<double>(n) * train_fraction));
  size_t n_eval = static_cast<size_t>(std::floor(static_cast<double>(n) * eval_fraction));
  if (n_train == 0 || n_eval == 0)
    throw NpdError(ErrorKind::Config, "split produces an empty set (" +
                                          std::to_string(n_train) + "/" +
                                          std::to_string(n_eval) + " of " +
                                          std::to_string(n) + ")");
  std::vector<Example> train(examples.begin(), examples.begin() + n_train);
  std::vector<Example> eval(examples.begin() + n_train, examples.begin() + n_train + n_eval);
  return {std::move(train), std::move(eval)};
}

void write_corpus(const std::vector<Example>& examples, const std::filesystem::path& path) {
  std::string out;
  for (const auto& ex : examples) {
    json j;
    j["id"] = ex.id;
    j["prompt"] = ex.prompt;
    j["target"] = ex.target;
    out += j.dump();
    out += '\n';
  }
  io::write_text_atomic(path, out);
}

std::vector<Example> read_corpus(const std::filesystem::path& path) {
  std::vector<Example> out;
  auto lines = io::read_lines(path);
  for (size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    json j;
    try {
      j = json::parse(lines[i]);
      Example ex;
      ex.id = j.at("id").get<uint64_t>();
      ex.prompt = j.at("prompt").get<std::vector<Token>>();
      ex.target = j.at("target").get<std::vector<Token>>();
      out.push_back(std::move(ex));
    } catch (const json::exception& e) {
      throw NpdError(ErrorKind::Parse, path.string() + ": line " +
                                           std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

const char* task_kind_name(TaskKind kind) {
  return kind == TaskKind::Reverse ? "reverse" : "modadd";
}

TaskKind task_kind_from_name(const std::string& name) {
  if (name == "reverse") return TaskKind::Reverse;
  if (name == "modadd") return TaskKind::ModAdd;
  throw NpdError(ErrorKind::Config, "unknown task kind: " + name);
}

}  // namespace npd
