#include "sam/trainer.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <optional>
#include <thread>

#include "json.hpp"

#include "sam/error.hpp"

namespace sam {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kLevelStream = 0x6c6576656cULL;

}  // namespace

std::uint64_t episode_seed(std::uint64_t seed, Index minibatch, Index index) {
  return splitmix(splitmix(splitmix(seed) ^ static_cast<std::uint64_t>(minibatch)) ^
                  static_cast<std::uint64_t>(index));
}

std::string to_ndjson(const MinibatchRecord& r) {
  nlohmann::json j;
  j["minibatch"] = r.minibatch;
  j["episode"] = r.episodes;
  j["level"] = r.level;
  j["curriculum_level"] = r.curriculum_level;
  j["loss"] = r.loss;
  j["bit_error"] = r.bit_error;
  j["wall_time"] = r.wall_time;
  j["journal_bytes"] = r.journal_bytes;
  j["grad_norm"] = r.grad_norm;
  return j.dump() + "\n";
}

Trainer::Trainer(const TrainConfig& config, std::string out_dir)
    : config_(config), out_dir_(std::move(out_dir)), model_config_(model_config(config)) {
  validate(config_);
  Model probe(model_config_);
  params_ = probe.controller().init_params(config_.seed, config_.init_scale);
  optimizer_ = RmsProp(params_.size(), config_.optimizer);
  curriculum_ = Curriculum(config_.curriculum_config);
  if (!out_dir_.empty()) std::filesystem::create_directories(out_dir_);
}

std::string Trainer::metrics_path() const { return out_dir_ + "/metrics.ndjson"; }
std::string Trainer::checkpoint_path() const { return out_dir_ + "/checkpoint.bin"; }

bool Trainer::stop_reached() const {
  if (config_.stop_below > 0.0 && static_cast<Index>(recent_.size()) == config_.stop_window) {
    const double mean = std::accumulate(recent_.begin(), recent_.end(), 0.0) / static_cast<double>(recent_.size());
    if (mean < config_.stop_below) return true;
  }
  return config_.curriculum && config_.stop_level > 0 && curriculum_.level() > config_.stop_level;
}

Index Trainer::sample_level(Index minibatch) const {
  std::mt19937_64 rng(episode_seed(config_.seed ^ kLevelStream, minibatch, 0));
  if (config_.curriculum) return std::max<Index>(1, curriculum_.sample(rng));
  const auto span = static_cast<std::uint64_t>(config_.max_level - config_.min_level + 1);
  return config_.min_level + static_cast<Index>(rng() % span);
}

void Trainer::append_metrics(const MinibatchRecord& r) {
  if (out_dir_.empty()) return;
  const std::string line = to_ndjson(r);
  std::ofstream f(metrics_path(), std::ios::binary | std::ios::app);
  f.write(line.data(), static_cast<std::streamsize>(line.size()));
  f.flush();
  if (!f) throw InputError("cannot append to '" + metrics_path() + "'");
  metrics_offset_ += line.size();
}

TrainSummary Trainer::run(Index limit) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const double elapsed_before = elapsed_;
  std::mutex mu;
  Index issued = next_minibatch_;
  Index issued_here = 0;
  std::exception_ptr failure;

  auto take = [&]() -> std::optional<Batch> {
    std::lock_guard lock(mu);
    if (failure || issued >= config_.minibatches || stop_reached()) return std::nullopt;
    if (limit >= 0 && issued_here >= limit) return std::nullopt;
    ++issued_here;
    const Index mb = issued++;
    return Batch{mb, sample_level(mb), params_};
  };

  auto worker = [&]() {
    try {
      Model model(model_config_);
      Vector grads(params_.size());
      while (auto batch = take()) {
        grads.setZero();
        std::vector<double> losses;
        double wrong = 0.0;
        double answer_bits = 0.0;
        double journal = 0.0;
        for (Index i = 0; i < config_.minibatch; ++i) {
          model.reset();
          TaskConfig tc{config_.task, batch->level, config_.bits, config_.item_words,
                        episode_seed(config_.seed, batch->minibatch, i)};
          const Episode ep = generate(tc);
          const EpisodeResult r = model.run(batch->params, ep, &grads);
          losses.push_back(r.bits_per_step());
          wrong += r.bit_errors;
          answer_bits += static_cast<double>(r.answer_steps * config_.bits);
          journal += r.journal_bytes;
        }
        grads /= static_cast<double>(config_.minibatch);

        std::lock_guard lock(mu);
        if (failure) break;
        MinibatchRecord rec;
        rec.grad_norm = clip_global_norm(grads, config_.grad_clip);
        optimizer_.update(params_, grads);
        if (config_.curriculum) {
          for (double l : losses) curriculum_.observe(l);
        }
        rec.loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
        recent_.push_back(rec.loss);
        while (static_cast<Index>(recent_.size()) > config_.stop_window) recent_.pop_front();
        ++next_minibatch_;
        rec.minibatch = next_minibatch_;
        rec.episodes = next_minibatch_ * config_.minibatch;
        rec.level = batch->level;
        rec.curriculum_level = curriculum_.level();
        rec.bit_error = answer_bits > 0.0 ? wrong / answer_bits : 0.0;
        elapsed_ = elapsed_before + std::chrono::duration<double>(Clock::now() - start).count();
        rec.wall_time = elapsed_;
        rec.journal_bytes = journal / static_cast<double>(config_.minibatch);
        if (next_minibatch_ % config_.log_every == 0) append_metrics(rec);
        if (callback_) callback_(rec);
        if (!out_dir_.empty() && config_.checkpoint_every > 0 &&
            next_minibatch_ % config_.checkpoint_every == 0) {
          save_checkpoint(checkpoint_path());
        }
      }
    } catch (...) {
      std::lock_guard lock(mu);
      if (!failure) failure = std::current_exception();
    }
  };

  if (config_.workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (Index w = 0; w < config_.workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  if (!out_dir_.empty()) save_checkpoint(checkpoint_path());

  TrainSummary s;
  s.minibatches = next_minibatch_;
  s.curriculum_level = curriculum_.level();
  if (!recent_.empty()) {
    s.window_loss = std::accumulate(recent_.begin(), recent_.end(), 0.0) / static_cast<double>(recent_.size());
  }
  s.reached_target = config_.stop_below > 0.0 &&
                     static_cast<Index>(recent_.size()) == config_.stop_window &&
                     s.window_loss < config_.stop_below;
  s.reached_level = config_.curriculum && config_.stop_level > 0 && curriculum_.level() > config_.stop_level;
  return s;
}

Container Trainer::checkpoint() const {
  Container c("checkpoint");
  c.put_string("config", to_text(config_));
  c.put_vector("params", params_);
  c.put_vector("rmsprop.mean_square", optimizer_.mean_square());
  c.put_vector("rmsprop.velocity", optimizer_.velocity());
  const std::int64_t cur[2] = {curriculum_.level(), curriculum_.observed_at_level()};
  c.put_ints("curriculum", cur);
  const std::vector<double> window(curriculum_.window().begin(), curriculum_.window().end());
  c.put_doubles("curriculum.window", window);
  const std::vector<double> recent(recent_.begin(), recent_.end());
  c.put_doubles("recent", recent);
  const std::int64_t counters[2] = {next_minibatch_, static_cast<std::int64_t>(metrics_offset_)};
  c.put_ints("counters", counters);
  const double elapsed = elapsed_;
  c.put_doubles("elapsed", std::span<const double>(&elapsed, 1));
  return c;
}

void Trainer::save_checkpoint(const std::string& path) const { checkpoint().save(path); }

void Trainer::resume(const Container& c) {
  if (c.kind() != "checkpoint") throw InputError("resume: not a training checkpoint");
  const Vector params = c.get_vector("params");
  if (params.size() != params_.size())
    throw InputError("resume: checkpoint has " + std::to_string(params.size()) +
                     " parameters, this configuration needs " + std::to_string(params_.size()));
  params_ = params;
  optimizer_.load_state(c.get_vector("rmsprop.mean_square"), c.get_vector("rmsprop.velocity"));
  const auto cur = c.get_ints("curriculum");
  const auto window = c.get_doubles("curriculum.window");
  if (cur.size() != 2) throw InputError("resume: bad curriculum section");
  curriculum_.restore(cur[0], std::deque<double>(window.begin(), window.end()), cur[1]);
  const auto recent = c.get_doubles("recent");
  recent_.assign(recent.begin(), recent.end());
  const auto counters = c.get_ints("counters");
  if (counters.size() != 2) throw InputError("resume: bad counters section");
  next_minibatch_ = counters[0];
  metrics_offset_ = static_cast<std::uint64_t>(counters[1]);
  elapsed_ = c.get_doubles("elapsed").at(0);
  if (!out_dir_.empty() && std::filesystem::exists(metrics_path())) {
    std::filesystem::resize_file(metrics_path(), metrics_offset_);
  }
}

EvalRow evaluate(const ModelConfig& model_cfg, const Vector& params, TaskKind task, Index level,
                 Index bits, Index item_words, Index episodes, std::uint64_t seed) {
  if (level < 1) throw InputError("eval: level " + std::to_string(level) + " has no answer steps");
  if (episodes < 1) throw InputError("eval: need at least one episode");
  Model model(model_cfg);
  std::vector<double> fractions;
  for (Index e = 0; e < episodes; ++e) {
    model.reset();
    const Episode ep = generate({task, level, bits, item_words, episode_seed(seed, level, e)});
    const EpisodeResult r = model.run(params, ep);
    fractions.push_back(r.bit_errors / static_cast<double>(r.answer_steps * bits));
  }
  EvalRow row;
  row.level = level;
  row.episodes = episodes;
  const double n = static_cast<double>(episodes);
  row.mean_bit_error = std::accumulate(fractions.begin(), fractions.end(), 0.0) / n;
  double var = 0.0;
  for (double f : fractions) var += (f - row.mean_bit_error) * (f - row.mean_bit_error);
  row.std_error = episodes > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
  return row;
}

}  // namespace sam
