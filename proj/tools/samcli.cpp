#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sam/alloc_tracking.hpp"
#include "sam/bench.hpp"
#include "sam/error.hpp"
#include "sam/gradient_check.hpp"
#include "sam/trainer.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kTaskFailure = 1;
constexpr int kUsage = 2;

struct BenchArgs {
  std::vector<std::string> models{"sam-ann", "dam"};
  std::vector<sam::Index> slots;
  int min_exp = 10;
  int max_exp = 14;
  std::string out;
  sam::BenchConfig cfg;
};

int cmd_bench(BenchArgs& a) {
  sam::BenchConfig cfg = a.cfg;
  cfg.models.clear();
  for (const auto& m : a.models) cfg.models.push_back(sam::parse_bench_model(m));
  cfg.slots = a.slots;
  if (cfg.slots.empty()) {
    if (a.min_exp < 1 || a.max_exp < a.min_exp || a.max_exp > 30)
      throw sam::InputError("bench: need 1 <= --min-exp <= --max-exp <= 30");
    for (int e = a.min_exp; e <= a.max_exp; ++e) cfg.slots.push_back(sam::Index{1} << e);
  }
  cfg.probe = sam::alloc_tracking::probe();
  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out);
    if (!file) throw sam::InputError("bench: cannot write '" + a.out + "'");
  }
  std::ostream& out = a.out.empty() ? std::cout : file;
  out << sam::kBenchCsvHeader << '\n';
  sam::run_bench(cfg, [&](const sam::BenchResult& r) {
    sam::write_csv_row(out, r);
    out.flush();
    if (r.skipped) std::cerr << sam::to_string(r.model) << " N=" << r.slots << ": skipped (" << r.reason << ")\n";
  });
  return kOk;
}

struct TrainArgs {
  std::string config;
  std::string task;
  std::string model;
  std::string out = "run";
  long long seed = -1;
  long long minibatches = -1;
  std::vector<std::string> set;
  bool resume = false;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  sam::TrainConfig cfg = a.config.empty() ? sam::TrainConfig{} : sam::load_train_config(a.config);
  if (!a.task.empty()) sam::apply_setting(cfg, "task", a.task);
  if (!a.model.empty()) sam::apply_setting(cfg, "model", a.model);
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  if (a.minibatches >= 0) cfg.minibatches = a.minibatches;
  for (const auto& kv : a.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw sam::InputError("--set expects key=value, got '" + kv + "'");
    sam::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  sam::validate(cfg);

  sam::Trainer trainer(cfg, a.out);
  if (a.resume) {
    trainer.resume(sam::Container::load(trainer.checkpoint_path(), "checkpoint"));
  } else if (std::filesystem::exists(trainer.metrics_path())) {
    std::filesystem::remove(trainer.metrics_path());
  }
  if (!a.quiet) {
    trainer.on_minibatch([](const sam::MinibatchRecord& r) {
      if (r.minibatch % 100 == 0)
        std::cerr << "minibatch " << r.minibatch << " level " << r.curriculum_level << " loss " << r.loss
                  << " bits/step\n";
    });
  }
  const sam::TrainSummary s = trainer.run();
  std::cout << "minibatches " << s.minibatches << "\nwindow_loss " << s.window_loss
            << "\ncurriculum_level " << s.curriculum_level << "\nreached_target "
            << (s.reached_target ? "yes" : "no") << "\ncheckpoint " << trainer.checkpoint_path() << '\n';
  return kOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string task;
  std::vector<sam::Index> levels{1};
  sam::Index episodes = 100;
  long long bits = -1;
  long long slots = -1;
  std::uint64_t seed = 12345;
  std::string out;
};

int cmd_eval(const EvalArgs& a) {
  const sam::Container c = sam::Container::load(a.checkpoint, "checkpoint");
  const sam::TrainConfig cfg = sam::parse_train_config(c.get_string("config"));
  if (a.bits >= 0 && a.bits != cfg.bits) {
    throw sam::InputError("eval: task width " + std::to_string(a.bits) + " bits does not match the checkpoint's " +
                          std::to_string(cfg.bits));
  }
  const sam::TaskKind task = a.task.empty() ? cfg.task : sam::parse_task(a.task);
  sam::ModelConfig mc = sam::model_config(cfg);
  if (a.slots > 0) mc.memory.slots = a.slots;
  const sam::Vector params = c.get_vector("params");
  if (params.size() != sam::Model(mc).parameter_count())
    throw sam::InputError("eval: checkpoint parameters do not match its configuration");
  for (sam::Index level : a.levels) {
    if (level < 1) throw sam::InputError("eval: level " + std::to_string(level) + " has no answer steps");
  }
  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out);
    if (!file) throw sam::InputError("eval: cannot write '" + a.out + "'");
  }
  std::ostream& out = a.out.empty() ? std::cout : file;
  out << "level,mean_bit_error,std_error,episodes\n";
  for (sam::Index level : a.levels) {
    const sam::EvalRow r = sam::evaluate(mc, params, task, level, cfg.bits, cfg.item_words, a.episodes, a.seed);
    out << r.level << ',' << r.mean_bit_error << ',' << r.std_error << ',' << r.episodes << '\n';
  }
  return kOk;
}

struct GradArgs {
  std::string model = "sam";
  sam::Index slots = 16;
  sam::Index word = 8;
  sam::Index heads = 2;
  sam::Index reads = 4;
  sam::Index hidden = 12;
  sam::Index level = 2;
  double tolerance = 1e-5;
  double epsilon = 1e-5;
  std::uint64_t seed = 1;
  bool corrupt = false;
};

int cmd_gradcheck(const GradArgs& a) {
  sam::MemoryConfig mem;
  mem.slots = a.slots;
  mem.word_size = a.word;
  mem.heads = a.heads;
  mem.reads = a.reads;
  const sam::Index bits = 8;
  sam::Model model(sam::make_model_config(sam::parse_model(a.model), sam::task_input_width(bits),
                                          sam::task_output_width(bits), a.hidden, mem));
  const sam::Vector params = model.controller().init_params(a.seed, 0.5);
  if (model.has_memory()) {
    std::mt19937_64 rng(a.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    sam::Matrix rows(a.slots, a.word);
    for (sam::Index i = 0; i < rows.size(); ++i) rows.data()[i] = u(rng);
    model.memory().load(rows);
  }
  const sam::Episode ep = sam::generate({sam::TaskKind::kCopy, a.level, bits, 1, a.seed});
  sam::GradCheckOptions opts;
  opts.tolerance = a.tolerance;
  opts.epsilon = a.epsilon;
  opts.corrupt = a.corrupt;
  const sam::GradCheckReport r = sam::gradient_check(model, params, ep, opts);
  std::cout << sam::describe(r, model.controller().layout()) << '\n';
  return r.passed ? kOk : kTaskFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse access memory: training, evaluation, gradient checks and benchmarks"};
  app.require_subcommand(1);

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "time / space sweep over memory sizes, CSV on stdout");
  b->add_option("--models", bench.models, "sam-exact, sam-ann, dam, ntm-dense, sdnc, dnc-dense")
      ->delimiter(',');
  b->add_option("--slots", bench.slots, "explicit slot counts")->delimiter(',');
  b->add_option("--min-exp", bench.min_exp, "smallest N = 2^e");
  b->add_option("--max-exp", bench.max_exp, "largest N = 2^e");
  b->add_option("--steps", bench.cfg.steps, "time steps per episode")->check(CLI::PositiveNumber);
  b->add_option("--minibatch", bench.cfg.minibatch, "episodes per timed pass")->check(CLI::PositiveNumber);
  b->add_option("--trials", bench.cfg.trials, "timed passes; the median is reported")->check(CLI::PositiveNumber);
  b->add_option("--dense-ceiling", bench.cfg.dense_ceiling, "largest N for dense models");
  b->add_option("--dnc-ceiling", bench.cfg.dnc_ceiling, "largest N for dnc-dense");
  b->add_option("--seed", bench.cfg.seed);
  b->add_option("--out", bench.out, "CSV path (default stdout)");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train a model, writing metrics and checkpoints");
  t->add_option("--config", train.config, "key = value config file");
  t->add_option("--task", train.task, "copy, recall or sort");
  t->add_option("--model", train.model, "sam, dam, ntm-dense, sdnc, dnc-dense or lstm");
  t->add_option("--seed", train.seed);
  t->add_option("--minibatches", train.minibatches, "minibatch budget");
  t->add_option("--set", train.set, "config override key=value (repeatable)");
  t->add_option("--out", train.out, "output directory");
  t->add_flag("--resume", train.resume, "continue from the checkpoint in --out");
  t->add_flag("--quiet", train.quiet, "no progress lines");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "per-level bit error of a checkpoint, CSV on stdout");
  e->add_option("--checkpoint", eval.checkpoint)->required();
  e->add_option("--task", eval.task, "defaults to the checkpoint's task");
  e->add_option("--levels", eval.levels)->delimiter(',');
  e->add_option("--episodes", eval.episodes)->check(CLI::PositiveNumber);
  e->add_option("--bits", eval.bits, "expected word width");
  e->add_option("--slots", eval.slots, "memory size for evaluation (default: as trained)");
  e->add_option("--seed", eval.seed);
  e->add_option("--out", eval.out, "CSV path (default stdout)");

  GradArgs grad;
  auto* g = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients");
  g->add_option("--model", grad.model);
  g->add_option("--slots", grad.slots)->check(CLI::PositiveNumber);
  g->add_option("--word", grad.word)->check(CLI::PositiveNumber);
  g->add_option("--heads", grad.heads)->check(CLI::PositiveNumber);
  g->add_option("--reads", grad.reads)->check(CLI::PositiveNumber);
  g->add_option("--hidden", grad.hidden)->check(CLI::PositiveNumber);
  g->add_option("--level", grad.level, "copy length; T = 2 * level + 1")->check(CLI::PositiveNumber);
  g->add_option("--tolerance", grad.tolerance);
  g->add_option("--epsilon", grad.epsilon);
  g->add_option("--seed", grad.seed);
  g->add_flag("--corrupt", grad.corrupt, "negate the analytic gradient");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (b->parsed()) return cmd_bench(bench);
    if (t->parsed()) return cmd_train(train);
    if (e->parsed()) return cmd_eval(eval);
    return cmd_gradcheck(grad);
  } catch (const sam::InputError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kUsage;
  } catch (const std::exception& err) {
    std::cerr << "failure: " << err.what() << '\n';
    return kTaskFailure;
  }
}
