#include "npd/config.hpp"

#include <map>
#include <sstream>

#include "npd/errors.hpp"
#include "npd/io.hpp"

namespace npd {

namespace {

struct RawConfig {
  // section -> key -> value; consumed entries are erased during extraction
  std::map<std::string, std::map<std::string, std::string>> sections;
  std::string origin;

  bool take(const std::string& sec, const std::string& key, std::string& out) {
    auto s = sections.find(sec);
    if (s == sections.end()) return false;
    auto k = s->second.find(key);
    if (k == s->second.end()) return false;
    out = k->second;
    s->second.erase(k);
    return true;
  }
};

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

RawConfig tokenize(const std::string& text, const std::string& origin) {
  RawConfig raw;
  raw.origin = origin;
  std::istringstream is(text);
  std::string line;
  std::string section;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw NpdError(ErrorKind::Config, origin + ":" + std::to_string(lineno) +
                                              ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      raw.sections[section];
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw NpdError(ErrorKind::Config, origin + ":" + std::to_string(lineno) +
                                            ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw NpdError(ErrorKind::Config,
                     origin + ":" + std::to_string(lineno) + ": empty key");
    if (!raw.sections[section].emplace(key, value).second)
      throw NpdError(ErrorKind::Config, origin + ":" + std::to_string(lineno) +
                                            ": duplicate key '" + key + "'");
  }
  return raw;
}

template <class T>
T convert(const std::string& value, const std::string& what);

template <>
double convert<double>(const std::string& value, const std::string& what) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw NpdError(ErrorKind::Config, what + ": not a number: '" + value + "'");
  }
}

template <>
uint64_t convert<uint64_t>(const std::string& value, const std::string& what) {
  try {
    size_t used = 0;
    unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw NpdError(ErrorKind::Config, what + ": not an integer: '" + value + "'");
  }
}

template <>
uint32_t convert<uint32_t>(const std::string& value, const std::string& what) {
  uint64_t v = convert<uint64_t>(value, what);
  if (v > 0xFFFFFFFFull) throw NpdError(ErrorKind::Config, what + ": out of range");
  return static_cast<uint32_t>(v);
}

template <>
bool convert<bool>(const std::string& value, const std::string& what) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw NpdError(ErrorKind::Config, what + ": expected true/false: '" + value + "'");
}

template <>
std::string convert<std::string>(const std::string& value, const std::string&) {
  return value;
}

template <class T>
void get(RawConfig& raw, const std::string& sec, const std::string& key, T& out) {
  std::string value;
  if (raw.take(sec, key, value))
    out = convert<T>(value, raw.origin + ": [" + sec + "] " + key);
}

void get_opt(RawConfig& raw, const std::string& sec, OptConfig& opt) {
  get(raw, sec, "base_lr", opt.base_lr);
  get(raw, sec, "final_lr", opt.final_lr);
  get(raw, sec, "beta1", opt.beta1);
  get(raw, sec, "beta2", opt.beta2);
  get(raw, sec, "eps", opt.eps);
  get(raw, sec, "weight_decay", opt.weight_decay);
  get(raw, sec, "grad_clip", opt.grad_clip_norm);
}

}  // namespace

CliConfig parse_config(const std::string& text, const std::string& origin) {
  RawConfig raw = tokenize(text, origin);
  CliConfig c;

  get(raw, "", "seed", c.seed);

  std::string s;
  if (raw.take("corpus", "task", s)) c.task.kind = task_kind_from_name(s);
  get(raw, "corpus", "vocab_size", c.vocab_size);
  get(raw, "corpus", "alphabet_size", c.task.alphabet_size);
  get(raw, "corpus", "prompt_len_min", c.task.prompt_len_min);
  get(raw, "corpus", "prompt_len_max", c.task.prompt_len_max);
  get(raw, "corpus", "seed", c.task.seed);
  get(raw, "corpus", "count", c.corpus_count);
  get(raw, "corpus", "train_fraction", c.train_fraction);
  get(raw, "corpus", "eval_fraction", c.eval_fraction);

  get(raw, "teacher", "window", c.teacher_dims.window);
  get(raw, "teacher", "embed_dim", c.teacher_dims.embed_dim);
  get(raw, "teacher", "hidden_dim", c.teacher_dims.hidden_dim);
  get(raw, "student", "window", c.student_dims.window);
  get(raw, "student", "embed_dim", c.student_dims.embed_dim);
  get(raw, "student", "hidden_dim", c.student_dims.hidden_dim);
  c.teacher_dims.vocab = c.vocab_size;
  c.student_dims.vocab = c.vocab_size;

  get(raw, "pretrain", "teacher_epochs", c.teacher_epochs);
  get(raw, "pretrain", "student_epochs", c.student_epochs);
  get(raw, "pretrain", "batch_packs", c.pretrain_batch_packs);
  get(raw, "pretrain", "pack_len", c.pretrain_pack_len);
  get_opt(raw, "pretrain", c.pretrain_opt);

  get(raw, "gen", "temperature", c.gen.temperature);
  get(raw, "gen", "max_len", c.gen.max_len);
  get(raw, "gen", "samples_per_prompt", c.gen.samples_per_prompt);
  if (raw.take("gen", "mode", s)) c.gen.mode = gen_mode_from_name(s);
  get(raw, "gen", "pool_size", c.pool_size);

  get(raw, "filter", "tau", c.filter.tau);
  get(raw, "filter", "require_teacher_quality", c.filter.require_teacher_quality);
  get(raw, "filter", "epsilon_div", c.filter.epsilon_div);
  get(raw, "filter", "min_response_len", c.filter.min_response_len);
  get(raw, "filter", "enabled", c.filter.enabled);

  get(raw, "pack", "pack_len", c.pack_cfg.pack_len);
  if (raw.take("pack", "strategy", s)) c.pack_cfg.strategy = pack_strategy_from_name(s);

  get(raw, "annotate", "top_k", c.top_k);

  get(raw, "train", "lambda", c.lambda);
  if (raw.take("train", "kd_normalization", s)) c.kd_normalization = kd_mode_from_name(s);
  get(raw, "train", "epochs", c.train_epochs);
  get(raw, "train", "refresh_interval", c.refresh_interval);
  get(raw, "train", "batch_packs", c.train_batch_packs);
  get_opt(raw, "train", c.train_opt);

  get(raw, "monitor", "probe_count", c.probe_count);
  get(raw, "monitor", "spike_window", c.spike_window);
  get(raw, "monitor", "spike_z", c.spike_z);
  get(raw, "monitor", "kl_epsilon", c.kl_epsilon);

  get(raw, "paths", "corpus", c.corpus_path);
  get(raw, "paths", "teacher_ckpt", c.teacher_ckpt);
  get(raw, "paths", "student_ckpt", c.student_ckpt);
  get(raw, "paths", "out_dir", c.out_dir);

  for (const auto& [sec, keys] : raw.sections) {
    if (keys.empty()) continue;
    throw NpdError(ErrorKind::Config, origin + ": unknown key '" + keys.begin()->first +
                                          "' in section [" + sec + "]");
  }
  if (c.lambda < 0.0 || c.lambda > 1.0)
    throw NpdError(ErrorKind::Config, "lambda must be in [0, 1]");
  if (c.filter.tau <= 0.0) throw NpdError(ErrorKind::Config, "tau must be > 0");
  if (c.filter.epsilon_div <= 0.0)
    throw NpdError(ErrorKind::Config, "epsilon_div must be > 0");
  if (c.refresh_interval < 1 || c.train_epochs < 1)
    throw NpdError(ErrorKind::Config, "train epochs and refresh_interval must be >= 1");
  return c;
}

CliConfig load_config(const std::filesystem::path& path) {
  return parse_config(io::read_text(path), path.string());
}

RunConfig CliConfig::to_run_config() const {
  RunConfig rc;
  rc.lambda = lambda;
  rc.top_k = top_k;
  rc.kd_normalization = kd_normalization;
  rc.total_epochs = train_epochs;
  rc.refresh_interval = refresh_interval;
  rc.batch_packs = train_batch_packs;
  rc.opt = train_opt;
  rc.pack_cfg = pack_cfg;
  rc.gen_cfg = gen;
  rc.filter_cfg = filter;
  rc.seed = seed;
  rc.probe_count = probe_count;
  return rc;
}

std::string CliConfig::dump() const {
  std::ostringstream os;
  os.precision(17);
  os << "seed = " << seed << "\n\n";
  os << "[corpus]\n";
  os << "task = " << task_kind_name(task.kind) << "\n";
  os << "vocab_size = " << vocab_size << "\n";
  os << "alphabet_size = " << task.alphabet_size << "\n";
  os << "prompt_len_min = " << task.prompt_len_min << "\n";
  os << "prompt_len_max = " << task.prompt_len_max << "\n";
  os << "seed = " << task.seed << "\n";
  os << "count = " << corpus_count << "\n";
  os << "train_fraction = " << train_fraction << "\n";
  os << "eval_fraction = " << eval_fraction << "\n\n";
  os << "[teacher]\n";
  os << "window = " << teacher_dims.window << "\n";
  os << "embed_dim = " << teacher_dims.embed_dim << "\n";
  os << "hidden_dim = " << teacher_dims.hidden_dim << "\n\n";
  os << "[student]\n";
  os << "window = " << student_dims.window << "\n";
  os << "embed_dim = " << student_dims.embed_dim << "\n";
  os << "hidden_dim = " << student_dims.hidden_dim << "\n\n";
  auto dump_opt = [&](const OptConfig& o) {
    os << "base_lr = " << o.base_lr << "\n";
    os << "final_lr = " << o.final_lr << "\n";
    os << "beta1 = " << o.beta1 << "\n";
    os << "beta2 = " << o.beta2 << "\n";
    os << "eps = " << o.eps << "\n";
    os << "weight_decay = " << o.weight_decay << "\n";
    os << "grad_clip = " << o.grad_clip_norm << "\n";
  };
  os << "[pretrain]\n";
  os << "teacher_epochs = " << teacher_epochs << "\n";
  os << "student_epochs = " << student_epochs << "\n";
  os << "batch_packs = " << pretrain_batch_packs << "\n";
  os << "pack_len = " << pretrain_pack_len << "\n";
  dump_opt(pretrain_opt);
  os << "\n[gen]\n";
  os << "temperature = " << gen.temperature << "\n";
  os << "max_len = " << gen.max_len << "\n";
  os << "samples_per_prompt = " << gen.samples_per_prompt << "\n";
  os << "mode = " << gen_mode_name(gen.mode) << "\n";
  os << "pool_size = " << pool_size << "\n\n";
  os << "[filter]\n";
  os << "tau = " << filter.tau << "\n";
  os << "require_teacher_quality = " << (filter.require_teacher_quality ? "true" : "false")
     << "\n";
  os << "epsilon_div = " << filter.epsilon_div << "\n";
  os << "min_response_len = " << filter.min_response_len << "\n";
  os << "enabled = " << (filter.enabled ? "true" : "false") << "\n\n";
  os << "[pack]\n";
  os << "pack_len = " << pack_cfg.pack_len << "\n";
  os << "strategy = " << pack_strategy_name(pack_cfg.strategy) << "\n\n";
  os << "[annotate]\n";
  os << "top_k = " << top_k << "\n\n";
  os << "[train]\n";
  os << "lambda = " << lambda << "\n";
  os << "kd_normalization = " << kd_mode_name(kd_normalization) << "\n";
  os << "epochs = " << train_epochs << "\n";
  os << "refresh_interval = " << refresh_interval << "\n";
  os << "batch_packs = " << train_batch_packs << "\n";
  dump_opt(train_opt);
  os << "\n[monitor]\n";
  os << "probe_count = " << probe_count << "\n";
  os << "spike_window = " << spike_window << "\n";
  os << "spike_z = " << spike_z << "\n";
  os << "kl_epsilon = " << kl_epsilon << "\n\n";
  os << "[paths]\n";
  os << "corpus = " << corpus_path << "\n";
  os << "teacher_ckpt = " << teacher_ckpt << "\n";
  os << "student_ckpt = " << student_ckpt << "\n";
  os << "out_dir = " << out_dir << "\n";
  return os.str();
}

uint32_t CliConfig::hash() const {
  std::string d = dump();
  return io::crc32_bytes(d.data(), d.size());
}

}  // namespace npd
