#include <cmath>
#include <random>

#include "doctest.h"
#include "sam/controller.hpp"
#include "sam/gradient_check.hpp"
#include "sam/model.hpp"

using namespace sam;

namespace {

constexpr double kRefTol = 1e-12;
constexpr double kFdEps = 1e-6;
constexpr double kFdTol = 1e-7;

ControllerShape small_shape(Index heads = 2, bool modes = false) {
  ControllerShape s;
  s.input = 5;
  s.output = 4;
  s.hidden = 6;
  s.heads = heads;
  s.word = 3;
  s.read_modes = modes;
  return s;
}

Vector random_vector(std::mt19937_64& rng, Index n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Textbook LSTM cell, written against explicit per-element loops.
struct RefCell {
  Vector h;
  Vector c;
};

RefCell reference_cell(const Controller& ctl, const Vector& p, const Vector& x, const Vector& h0, const Vector& c0) {
  const Index hs = ctl.shape().hidden;
  const Index in = ctl.shape().lstm_input();
  const ParamLayout& l = ctl.layout();
  auto wx = [&](Index row, Index col) { return p[l.gate_input + row * in + col]; };
  auto wh = [&](Index row, Index col) { return p[l.gate_hidden + row * hs + col]; };
  auto pre = [&](Index row) {
    double z = p[l.gate_bias + row];
    for (Index j = 0; j < in; ++j) z += wx(row, j) * x[j];
    for (Index j = 0; j < hs; ++j) z += wh(row, j) * h0[j];
    return z;
  };
  RefCell out{Vector(hs), Vector(hs)};
  for (Index k = 0; k < hs; ++k) {
    const double i = sigmoid_ref(pre(k));
    const double f = sigmoid_ref(pre(hs + k));
    const double g = std::tanh(pre(2 * hs + k));
    const double o = sigmoid_ref(pre(3 * hs + k));
    out.c[k] = f * c0[k] + i * g;
    out.h[k] = o * std::tanh(out.c[k]);
  }
  return out;
}

ModelConfig tiny_model(ModelKind kind) {
  MemoryConfig mem;
  mem.slots = 16;
  mem.word_size = 4;
  mem.heads = 2;
  mem.reads = 4;
  return make_model_config(kind, task_input_width(4), task_output_width(4), 8, mem);
}

}  // namespace

TEST_CASE("lstm: zero weights give zero hidden state") {
  const Controller ctl(small_shape());
  std::mt19937_64 rng(41);
  const Vector p = Vector::Zero(ctl.parameter_count());
  const LstmCache c = ctl.lstm_forward(p, random_vector(rng, ctl.shape().lstm_input()),
                                       {random_vector(rng, 6), Vector::Zero(6)});
  CHECK(c.h.isZero(0));
}

TEST_CASE("lstm: saturated forget gate and closed input gate keep the cell") {
  const Controller ctl(small_shape());
  std::mt19937_64 rng(42);
  Vector p = ctl.init_params(1);
  const Index h = 6;
  p.segment(ctl.layout().gate_input, 4 * h * ctl.shape().lstm_input()).setZero();
  p.segment(ctl.layout().gate_hidden, 4 * h * h).setZero();
  p.segment(ctl.layout().gate_bias, h).setConstant(-60.0);
  p.segment(ctl.layout().gate_bias + h, h).setConstant(60.0);
  const Vector c0 = random_vector(rng, h);
  const LstmCache c = ctl.lstm_forward(p, random_vector(rng, ctl.shape().lstm_input()), {random_vector(rng, h), c0});
  CHECK((c.c - c0).cwiseAbs().maxCoeff() <= 1e-20);
}

TEST_CASE("lstm matches a loop-based reference cell") {
  const Controller ctl(small_shape());
  std::mt19937_64 rng(43);
  for (int rep = 0; rep < 20; ++rep) {
    const Vector p = random_vector(rng, ctl.parameter_count(), 0.5);
    const Vector x = random_vector(rng, ctl.shape().lstm_input());
    const Vector h0 = random_vector(rng, 6);
    const Vector c0 = random_vector(rng, 6);
    const LstmCache got = ctl.lstm_forward(p, x, {h0, c0});
    const RefCell ref = reference_cell(ctl, p, x, h0, c0);
    CHECK((got.h - ref.h).cwiseAbs().maxCoeff() <= kRefTol);
    CHECK((got.c - ref.c).cwiseAbs().maxCoeff() <= kRefTol);
  }
  CHECK_THROWS_AS(ctl.lstm_forward(Vector::Zero(ctl.parameter_count()), Vector::Zero(3), ctl.zero_state()),
                  ContractError);
}

TEST_CASE("interface: zero hidden state and zero biases give half-open gates") {
  const Controller ctl(small_shape());
  Vector p = ctl.init_params(2);
  const auto heads = ctl.interface_forward(p, Vector::Zero(6));
  REQUIRE(heads.size() == 2);
  for (const auto& h : heads) {
    CHECK(h.alpha == 0.5);
    CHECK(h.gamma == 0.5);
    CHECK(h.beta == doctest::Approx(std::log(2.0) + kBetaFloor).epsilon(kRefTol));
    CHECK(h.query.isZero(0));
    CHECK(h.word.isZero(0));
  }
}

TEST_CASE("interface squashing gradients match finite differences") {
  for (bool modes : {false, true}) {
    const Controller ctl(small_shape(2, modes));
    std::mt19937_64 rng(44);
    const Vector p = random_vector(rng, ctl.parameter_count(), 0.7);
    const Vector h0 = random_vector(rng, 6);
    std::vector<HeadInterfaceGrad> up(2);
    for (auto& d : up) {
      d.d_query = random_vector(rng, 3);
      d.d_word = random_vector(rng, 3);
      d.d_alpha = random_vector(rng, 1)[0];
      d.d_gamma = random_vector(rng, 1)[0];
      d.d_beta = random_vector(rng, 1)[0];
      for (double& m : d.d_mode) m = random_vector(rng, 1)[0];
    }
    auto loss = [&](const Vector& h) {
      const auto heads = ctl.interface_forward(p, h);
      double l = 0.0;
      for (std::size_t r = 0; r < heads.size(); ++r) {
        l += up[r].d_query.dot(heads[r].query) + up[r].d_word.dot(heads[r].word);
        l += up[r].d_alpha * heads[r].alpha + up[r].d_gamma * heads[r].gamma + up[r].d_beta * heads[r].beta;
        if (modes)
          for (int k = 0; k < 3; ++k) l += up[r].d_mode[k] * heads[r].mode[k];
      }
      return l;
    };
    Vector grads = Vector::Zero(ctl.parameter_count());
    const Vector dh = ctl.interface_backward(p, h0, ctl.interface_forward(p, h0), up, grads);
    for (Index i = 0; i < 6; ++i) {
      Vector hp = h0, hm = h0;
      hp[i] += kFdEps;
      hm[i] -= kFdEps;
      const double numeric = (loss(hp) - loss(hm)) / (2 * kFdEps);
      CHECK(std::abs(dh[i] - numeric) <= kFdTol * std::max(1.0, std::abs(numeric)));
    }
  }
}

TEST_CASE("output: a zero read word reduces to an affine map of the hidden state") {
  const Controller ctl(small_shape());
  std::mt19937_64 rng(45);
  const Vector p = random_vector(rng, ctl.parameter_count());
  const Vector h = random_vector(rng, 6);
  const Vector y = ctl.output_forward(p, h, {Vector::Zero(3), Vector::Zero(3)});
  const ParamLayout& l = ctl.layout();
  Vector ref = p.segment(l.output_b, 4);
  for (Index r = 0; r < 4; ++r)
    for (Index j = 0; j < 6; ++j) ref[r] += p[l.output_w + r * (6 + 2 * 3) + j] * h[j];
  CHECK((y - ref).cwiseAbs().maxCoeff() <= kRefTol);
}

TEST_CASE("lstm backward: zero upstream gives zero gradients") {
  const Controller ctl(small_shape());
  std::mt19937_64 rng(46);
  const Vector p = random_vector(rng, ctl.parameter_count());
  const LstmCache c = ctl.lstm_forward(p, random_vector(rng, ctl.shape().lstm_input()),
                                       {random_vector(rng, 6), random_vector(rng, 6)});
  Vector grads = Vector::Zero(ctl.parameter_count());
  Vector dh, dc;
  const Vector dx = ctl.lstm_backward(p, c, Vector::Zero(6), Vector::Zero(6), grads, dh, dc);
  CHECK(grads.isZero(0));
  CHECK(dx.isZero(0));
  CHECK(dh.isZero(0));
  CHECK(dc.isZero(0));
}

TEST_CASE("full-model gradient check on a five-step episode") {
  for (ModelKind kind : {ModelKind::kSam, ModelKind::kDam, ModelKind::kSdnc, ModelKind::kLstm}) {
    CAPTURE(to_string(kind));
    Model model(tiny_model(kind));
    const Vector p = model.controller().init_params(7, 0.5);
    if (model.has_memory()) {
      std::mt19937_64 rng(8);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      Matrix rows(16, 4);
      for (Index i = 0; i < rows.size(); ++i) rows.data()[i] = u(rng);
      model.memory().load(rows);
    }
    const Episode ep = generate({TaskKind::kCopy, 2, 4, 1, 9});
    REQUIRE(ep.steps() == 5);
    const GradCheckReport r = gradient_check(model, p, ep);
    CHECK(r.checked == model.parameter_count());
    CHECK(r.max_relative_error <= 1e-5);
    CHECK(r.passed);
  }
}

TEST_CASE("the gradient check rejects a corrupted gradient") {
  Model model(tiny_model(ModelKind::kSam));
  GradCheckOptions o;
  o.corrupt = true;
  o.stride = 7;
  const GradCheckReport r = gradient_check(model, model.controller().init_params(3, 0.5),
                                          generate({TaskKind::kCopy, 2, 4, 1, 9}), o);
  CHECK_FALSE(r.passed);
}

TEST_CASE("a detached read path gives the LSTM-only gradients") {
  Model with_memory(tiny_model(ModelKind::kSam));
  Model lstm(tiny_model(ModelKind::kLstm));
  const ParamLayout& lm = with_memory.controller().layout();
  const ParamLayout& ll = lstm.controller().layout();
  const ControllerShape& sm = with_memory.controller().shape();
  const Index hidden = sm.hidden;
  const Index x = sm.input;
  const Index y = sm.output;

  std::mt19937_64 rng(47);
  const Vector pl = random_vector(rng, lstm.parameter_count(), 0.3);
  Vector pm = random_vector(rng, with_memory.parameter_count(), 0.3);
  for (Index row = 0; row < 4 * hidden; ++row) {
    for (Index col = 0; col < sm.lstm_input(); ++col)
      pm[lm.gate_input + row * sm.lstm_input() + col] = col < x ? pl[ll.gate_input + row * x + col] : 0.0;
  }
  pm.segment(lm.gate_hidden, 4 * hidden * hidden) = pl.segment(ll.gate_hidden, 4 * hidden * hidden);
  pm.segment(lm.gate_bias, 4 * hidden) = pl.segment(ll.gate_bias, 4 * hidden);
  const Index cols = hidden + sm.heads * sm.word;
  for (Index row = 0; row < y; ++row) {
    for (Index col = 0; col < cols; ++col)
      pm[lm.output_w + row * cols + col] = col < hidden ? pl[ll.output_w + row * hidden + col] : 0.0;
  }
  pm.segment(lm.output_b, y) = pl.segment(ll.output_b, y);

  const Episode ep = generate({TaskKind::kCopy, 3, 4, 1, 10});
  Vector gm = Vector::Zero(with_memory.parameter_count());
  Vector gl = Vector::Zero(lstm.parameter_count());
  const EpisodeResult rm = with_memory.run(pm, ep, &gm);
  const EpisodeResult rl = lstm.run(pl, ep, &gl);
  CHECK(rm.loss == doctest::Approx(rl.loss).epsilon(kRefTol));
  double worst = 0.0;
  for (Index row = 0; row < 4 * hidden; ++row) {
    for (Index col = 0; col < x; ++col)
      worst = std::max(worst, std::abs(gm[lm.gate_input + row * sm.lstm_input() + col] - gl[ll.gate_input + row * x + col]));
  }
  worst = std::max(worst, (gm.segment(lm.gate_hidden, 4 * hidden * hidden) - gl.segment(ll.gate_hidden, 4 * hidden * hidden)).cwiseAbs().maxCoeff());
  worst = std::max(worst, (gm.segment(lm.gate_bias, 4 * hidden) - gl.segment(ll.gate_bias, 4 * hidden)).cwiseAbs().maxCoeff());
  for (Index row = 0; row < y; ++row) {
    for (Index col = 0; col < hidden; ++col)
      worst = std::max(worst, std::abs(gm[lm.output_w + row * cols + col] - gl[ll.output_w + row * hidden + col]));
  }
  worst = std::max(worst, (gm.segment(lm.output_b, y) - gl.segment(ll.output_b, y)).cwiseAbs().maxCoeff());
  CHECK(worst <= kRefTol);
  CHECK(gm.segment(lm.interface_w, sm.interface_size() * hidden).isZero(0));
}

TEST_CASE("init: uniform weights, zero biases, forget bias one") {
  const Controller ctl(small_shape());
  const Vector p = ctl.init_params(5);
  const ParamLayout& l = ctl.layout();
  CHECK(p.segment(l.gate_bias, 6).isZero(0));
  CHECK(p.segment(l.gate_bias + 6, 6) == Vector::Ones(6));
  CHECK(p.segment(l.gate_bias + 12, 12).isZero(0));
  CHECK(p.segment(l.gate_input, l.gate_bias).cwiseAbs().maxCoeff() <= 0.1);
  CHECK(ctl.init_params(5) == p);
}
