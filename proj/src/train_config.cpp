#include "sam/train_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "sam/error.hpp"

namespace sam {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* want) {
  throw InputError("config field '" + key + "': expected " + want + ", got '" + value + "'");
}

Index as_index(const std::string& key, const std::string& v, Index min) {
  Index out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "an integer");
  if (out < min) bad(key, v, min == 0 ? "a non-negative integer" : "a positive integer");
  return out;
}

std::uint64_t as_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "an unsigned integer");
  return out;
}

double as_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) bad(key, v, "a number");
    return d;
  } catch (const std::logic_error&) {
    bad(key, v, "a number");
  }
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  bad(key, v, "true or false");
}

template <typename F>
auto field(const std::string& key, F&& parse) {
  try {
    return parse();
  } catch (const InputError& e) {
    throw InputError("config field '" + key + "': " + e.what());
  }
}

}  // namespace

void apply_setting(TrainConfig& c, const std::string& key, const std::string& v) {
  MemoryConfig& m = c.memory;
  if (key == "task") c.task = field(key, [&] { return parse_task(v); });
  else if (key == "model") c.model = field(key, [&] { return parse_model(v); });
  else if (key == "seed") c.seed = as_u64(key, v);
  else if (key == "learning_rate") c.optimizer.learning_rate = as_double(key, v);
  else if (key == "rmsprop_decay") c.optimizer.decay = as_double(key, v);
  else if (key == "rmsprop_epsilon") c.optimizer.epsilon = as_double(key, v);
  else if (key == "rmsprop_momentum") c.optimizer.momentum = as_double(key, v);
  else if (key == "minibatch") c.minibatch = as_index(key, v, 1);
  else if (key == "workers") c.workers = as_index(key, v, 1);
  else if (key == "grad_clip") c.grad_clip = as_double(key, v);
  else if (key == "init_scale") c.init_scale = as_double(key, v);
  else if (key == "curriculum") c.curriculum = as_bool(key, v);
  else if (key == "curriculum_threshold") c.curriculum_config.threshold = as_double(key, v);
  else if (key == "curriculum_patience") c.curriculum_config.patience = as_index(key, v, 1);
  else if (key == "curriculum_initial") c.curriculum_config.initial_level = as_index(key, v, 1);
  else if (key == "min_level") c.min_level = as_index(key, v, 1);
  else if (key == "max_level") c.max_level = as_index(key, v, 1);
  else if (key == "stop_level") c.stop_level = as_index(key, v, 0);
  else if (key == "minibatches") c.minibatches = as_index(key, v, 0);
  else if (key == "stop_below") c.stop_below = as_double(key, v);
  else if (key == "stop_window") c.stop_window = as_index(key, v, 1);
  else if (key == "bits") c.bits = as_index(key, v, 1);
  else if (key == "item_words") c.item_words = as_index(key, v, 1);
  else if (key == "hidden") c.hidden = as_index(key, v, 1);
  else if (key == "slots") m.slots = as_index(key, v, 1);
  else if (key == "word_size") m.word_size = as_index(key, v, 1);
  else if (key == "heads") m.heads = as_index(key, v, 1);
  else if (key == "reads") m.reads = as_index(key, v, 1);
  else if (key == "delta") m.delta = as_double(key, v);
  else if (key == "discount") m.discount = as_double(key, v);
  else if (key == "ann") m.ann.backend = field(key, [&] { return parse_ann_backend(v); });
  else if (key == "kd_trees") m.ann.kd_trees = static_cast<int>(as_index(key, v, 1));
  else if (key == "kd_checks") m.ann.kd_checks = static_cast<int>(as_index(key, v, 1));
  else if (key == "lsh_tables") m.ann.lsh_tables = static_cast<int>(as_index(key, v, 1));
  else if (key == "lsh_bits") m.ann.lsh_bits = static_cast<int>(as_index(key, v, 1));
  else if (key == "lsh_probe_radius") m.ann.lsh_probe_radius = static_cast<int>(as_index(key, v, 0));
  else if (key == "rebuild_interval") m.ann.rebuild_interval = as_index(key, v, 0);
  else if (key == "links") c.links = as_index(key, v, 1);
  else if (key == "log_every") c.log_every = as_index(key, v, 1);
  else if (key == "checkpoint_every") c.checkpoint_every = as_index(key, v, 0);
  else throw InputError("unknown config field '" + key + "'");
}

TrainConfig parse_train_config(const std::string& text) {
  TrainConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InputError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    apply_setting(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  validate(c);
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_train_config(ss.str());
}

std::string to_text(const TrainConfig& c) {
  const MemoryConfig& m = c.memory;
  std::ostringstream s;
  s.precision(17);
  s << "task = " << to_string(c.task) << "\n"
    << "model = " << to_string(c.model) << "\n"
    << "seed = " << c.seed << "\n"
    << "learning_rate = " << c.optimizer.learning_rate << "\n"
    << "rmsprop_decay = " << c.optimizer.decay << "\n"
    << "rmsprop_epsilon = " << c.optimizer.epsilon << "\n"
    << "rmsprop_momentum = " << c.optimizer.momentum << "\n"
    << "minibatch = " << c.minibatch << "\n"
    << "workers = " << c.workers << "\n"
    << "grad_clip = " << c.grad_clip << "\n"
    << "init_scale = " << c.init_scale << "\n"
    << "curriculum = " << (c.curriculum ? "true" : "false") << "\n"
    << "curriculum_threshold = " << c.curriculum_config.threshold << "\n"
    << "curriculum_patience = " << c.curriculum_config.patience << "\n"
    << "curriculum_initial = " << c.curriculum_config.initial_level << "\n"
    << "min_level = " << c.min_level << "\n"
    << "max_level = " << c.max_level << "\n"
    << "stop_level = " << c.stop_level << "\n"
    << "minibatches = " << c.minibatches << "\n"
    << "stop_below = " << c.stop_below << "\n"
    << "stop_window = " << c.stop_window << "\n"
    << "bits = " << c.bits << "\n"
    << "item_words = " << c.item_words << "\n"
    << "hidden = " << c.hidden << "\n"
    << "slots = " << m.slots << "\n"
    << "word_size = " << m.word_size << "\n"
    << "heads = " << m.heads << "\n"
    << "reads = " << m.reads << "\n"
    << "delta = " << m.delta << "\n"
    << "discount = " << m.discount << "\n"
    << "ann = " << to_string(m.ann.backend) << "\n"
    << "kd_trees = " << m.ann.kd_trees << "\n"
    << "kd_checks = " << m.ann.kd_checks << "\n"
    << "lsh_tables = " << m.ann.lsh_tables << "\n"
    << "lsh_bits = " << m.ann.lsh_bits << "\n"
    << "lsh_probe_radius = " << m.ann.lsh_probe_radius << "\n"
    << "rebuild_interval = " << m.ann.rebuild_interval << "\n"
    << "links = " << c.links << "\n"
    << "log_every = " << c.log_every << "\n"
    << "checkpoint_every = " << c.checkpoint_every << "\n";
  return s.str();
}

void validate(const TrainConfig& c) {
  auto check = [](bool ok, const char* key, const char* what) {
    if (!ok) throw InputError(std::string("config field '") + key + "': " + what);
  };
  check(c.optimizer.learning_rate > 0.0, "learning_rate", "must be positive");
  check(c.optimizer.decay >= 0.0 && c.optimizer.decay < 1.0, "rmsprop_decay", "must lie in [0, 1)");
  check(c.optimizer.momentum >= 0.0 && c.optimizer.momentum < 1.0, "rmsprop_momentum",
        "must lie in [0, 1)");
  check(c.optimizer.epsilon > 0.0, "rmsprop_epsilon", "must be positive");
  check(c.grad_clip >= 0.0, "grad_clip", "must be non-negative");
  check(c.init_scale > 0.0, "init_scale", "must be positive");
  check(c.min_level <= c.max_level, "min_level", "must not exceed max_level");
  check(c.curriculum_config.threshold > 0.0, "curriculum_threshold", "must be positive");
  check(c.stop_below >= 0.0, "stop_below", "must be non-negative");
  check(c.memory.reads <= c.memory.slots, "reads", "must not exceed slots");
  check(c.memory.heads <= c.memory.slots, "heads", "must not exceed slots");
  check(c.memory.delta > 0.0 && c.memory.delta < 1.0, "delta", "must lie in (0, 1)");
  check(c.memory.discount > 0.0 && c.memory.discount < 1.0, "discount", "must lie in (0, 1)");
  check(c.memory.ann.lsh_probe_radius <= 2, "lsh_probe_radius", "must be 0, 1 or 2");
  check(c.memory.ann.lsh_bits <= 64, "lsh_bits", "must be at most 64");
}

ModelConfig model_config(const TrainConfig& c) {
  ModelConfig mc = make_model_config(c.model, task_input_width(c.bits), task_output_width(c.bits),
                                     c.hidden, c.memory);
  if (c.model == ModelKind::kSdnc) mc.links = c.links;
  return mc;
}

}  // namespace sam
