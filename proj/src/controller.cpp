#include "sam/controller.hpp"

#include <cmath>
#include <random>

#include "sam/error.hpp"

namespace sam {

namespace {

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;

ConstMap cmat(const Vector& p, Index offset, Index rows, Index cols) {
  return ConstMap(p.data() + offset, rows, cols);
}
MutMap mmat(Vector& p, Index offset, Index rows, Index cols) {
  return MutMap(p.data() + offset, rows, cols);
}

}  // namespace

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

ParamLayout make_layout(const ControllerShape& s) {
  require(s.input >= 0 && s.output >= 1 && s.hidden >= 1 && s.heads >= 0 && s.word >= 1,
          "ControllerShape: sizes must be positive");
  ParamLayout l;
  const Index g = 4 * s.hidden;
  Index at = 0;
  l.gate_input = at;
  at += g * s.lstm_input();
  l.gate_hidden = at;
  at += g * s.hidden;
  l.gate_bias = at;
  at += g;
  l.interface_w = at;
  at += s.interface_size() * s.hidden;
  l.interface_b = at;
  at += s.interface_size();
  l.output_w = at;
  at += s.output * (s.hidden + s.heads * s.word);
  l.output_b = at;
  at += s.output;
  l.total = at;
  return l;
}

Controller::Controller(const ControllerShape& shape) : shape_(shape), layout_(make_layout(shape)) {}

Vector Controller::init_params(std::uint64_t seed, double scale) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  Vector p(layout_.total);
  for (Index k = 0; k < p.size(); ++k) p[k] = u(rng);
  const Index h = shape_.hidden;
  p.segment(layout_.gate_bias, 4 * h).setZero();
  p.segment(layout_.gate_bias + h, h).setOnes();
  p.segment(layout_.interface_b, shape_.interface_size()).setZero();
  p.segment(layout_.output_b, shape_.output).setZero();
  return p;
}

LstmState Controller::zero_state() const {
  return {Vector::Zero(shape_.hidden), Vector::Zero(shape_.hidden)};
}

LstmCache Controller::lstm_forward(const Vector& params, const Vector& input,
                                   const LstmState& prev) const {
  require(params.size() == layout_.total, "lstm_step: parameter vector has the wrong size");
  require(input.size() == shape_.lstm_input(), "lstm_step: input length mismatch");
  require(prev.h.size() == shape_.hidden && prev.c.size() == shape_.hidden,
          "lstm_step: state size mismatch");
  const Index h = shape_.hidden;
  Vector z = cmat(params, layout_.gate_input, 4 * h, shape_.lstm_input()) * input;
  z.noalias() += cmat(params, layout_.gate_hidden, 4 * h, h) * prev.h;
  z += params.segment(layout_.gate_bias, 4 * h);

  LstmCache c;
  c.input = input;
  c.h_prev = prev.h;
  c.c_prev = prev.c;
  c.i = z.segment(0, h).unaryExpr(&logistic);
  c.f = z.segment(h, h).unaryExpr(&logistic);
  c.g = z.segment(2 * h, h).array().tanh();
  c.o = z.segment(3 * h, h).unaryExpr(&logistic);
  c.c = c.f.cwiseProduct(prev.c) + c.i.cwiseProduct(c.g);
  c.tanh_c = c.c.array().tanh();
  c.h = c.o.cwiseProduct(c.tanh_c);
  return c;
}

Vector Controller::lstm_backward(const Vector& params, const LstmCache& c, const Vector& d_h,
                                 const Vector& d_c, Vector& grads, Vector& d_h_prev,
                                 Vector& d_c_prev) const {
  const Index h = shape_.hidden;
  const Vector dc = d_c + d_h.cwiseProduct(c.o).cwiseProduct(
                              (1.0 - c.tanh_c.array().square()).matrix());
  Vector dz(4 * h);
  dz.segment(0, h) = dc.cwiseProduct(c.g).cwiseProduct(
      c.i.cwiseProduct((1.0 - c.i.array()).matrix()));
  dz.segment(h, h) = dc.cwiseProduct(c.c_prev).cwiseProduct(
      c.f.cwiseProduct((1.0 - c.f.array()).matrix()));
  dz.segment(2 * h, h) =
      dc.cwiseProduct(c.i).cwiseProduct((1.0 - c.g.array().square()).matrix());
  dz.segment(3 * h, h) = d_h.cwiseProduct(c.tanh_c).cwiseProduct(
      c.o.cwiseProduct((1.0 - c.o.array()).matrix()));

  const Index in = shape_.lstm_input();
  mmat(grads, layout_.gate_input, 4 * h, in).noalias() += dz * c.input.transpose();
  mmat(grads, layout_.gate_hidden, 4 * h, h).noalias() += dz * c.h_prev.transpose();
  grads.segment(layout_.gate_bias, 4 * h) += dz;

  d_c_prev = dc.cwiseProduct(c.f);
  d_h_prev = cmat(params, layout_.gate_hidden, 4 * h, h).transpose() * dz;
  return cmat(params, layout_.gate_input, 4 * h, in).transpose() * dz;
}

std::vector<HeadInterface> Controller::interface_forward(const Vector& params,
                                                         const Vector& h) const {
  require(h.size() == shape_.hidden, "interface_project: hidden size mismatch");
  const Index m = shape_.word;
  const Index per = shape_.head_interface();
  Vector xi = cmat(params, layout_.interface_w, shape_.interface_size(), shape_.hidden) * h;
  xi += params.segment(layout_.interface_b, shape_.interface_size());
  std::vector<HeadInterface> heads(static_cast<std::size_t>(shape_.heads));
  for (Index r = 0; r < shape_.heads; ++r) {
    const auto seg = xi.segment(r * per, per);
    HeadInterface& hi = heads[static_cast<std::size_t>(r)];
    hi.query = seg.segment(0, m);
    hi.word = seg.segment(m, m);
    hi.alpha_logit = seg[2 * m];
    hi.gamma_logit = seg[2 * m + 1];
    hi.beta_logit = seg[2 * m + 2];
    hi.alpha = logistic(hi.alpha_logit);
    hi.gamma = logistic(hi.gamma_logit);
    hi.beta = softplus(hi.beta_logit) + kBetaFloor;
    if (shape_.read_modes) {
      double z[3];
      double mx = seg[2 * m + 3];
      for (int k = 0; k < 3; ++k) mx = std::max(mx, seg[2 * m + 3 + k]);
      double sum = 0.0;
      for (int k = 0; k < 3; ++k) sum += z[k] = std::exp(seg[2 * m + 3 + k] - mx);
      for (int k = 0; k < 3; ++k) hi.mode[k] = z[k] / sum;
    }
  }
  return heads;
}

Vector Controller::interface_backward(const Vector& params, const Vector& h,
                                      const std::vector<HeadInterface>& heads,
                                      const std::vector<HeadInterfaceGrad>& d_heads,
                                      Vector& grads) const {
  const Index m = shape_.word;
  const Index per = shape_.head_interface();
  Vector dxi = Vector::Zero(shape_.interface_size());
  for (Index r = 0; r < shape_.heads; ++r) {
    const HeadInterface& hi = heads[static_cast<std::size_t>(r)];
    const HeadInterfaceGrad& d = d_heads[static_cast<std::size_t>(r)];
    auto seg = dxi.segment(r * per, per);
    seg.segment(0, m) = d.d_query;
    seg.segment(m, m) = d.d_word;
    seg[2 * m] = d.d_alpha * hi.alpha * (1.0 - hi.alpha);
    seg[2 * m + 1] = d.d_gamma * hi.gamma * (1.0 - hi.gamma);
    seg[2 * m + 2] = d.d_beta * logistic(hi.beta_logit);
    if (shape_.read_modes) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += hi.mode[k] * d.d_mode[k];
      for (int k = 0; k < 3; ++k) seg[2 * m + 3 + k] = hi.mode[k] * (d.d_mode[k] - dot);
    }
  }
  mmat(grads, layout_.interface_w, shape_.interface_size(), shape_.hidden).noalias() +=
      dxi * h.transpose();
  grads.segment(layout_.interface_b, shape_.interface_size()) += dxi;
  return cmat(params, layout_.interface_w, shape_.interface_size(), shape_.hidden).transpose() *
         dxi;
}

Vector Controller::output_forward(const Vector& params, const Vector& h,
                                  const std::vector<Vector>& reads) const {
  require(h.size() == shape_.hidden, "output_combine: hidden size mismatch");
  require(static_cast<Index>(reads.size()) == shape_.heads, "output_combine: wrong number of reads");
  const Index cols = shape_.hidden + shape_.heads * shape_.word;
  const auto w = cmat(params, layout_.output_w, shape_.output, cols);
  Vector y = w.leftCols(shape_.hidden) * h + params.segment(layout_.output_b, shape_.output);
  for (Index r = 0; r < shape_.heads; ++r) {
    const Vector& rd = reads[static_cast<std::size_t>(r)];
    require(rd.size() == shape_.word, "output_combine: read word length mismatch");
    y.noalias() += w.middleCols(shape_.hidden + r * shape_.word, shape_.word) * rd;
  }
  return y;
}

Vector Controller::output_backward(const Vector& params, const Vector& h,
                                   const std::vector<Vector>& reads, const Vector& d_y,
                                   Vector& grads, std::vector<Vector>& d_reads) const {
  const Index cols = shape_.hidden + shape_.heads * shape_.word;
  const auto w = cmat(params, layout_.output_w, shape_.output, cols);
  auto gw = mmat(grads, layout_.output_w, shape_.output, cols);
  gw.leftCols(shape_.hidden).noalias() += d_y * h.transpose();
  for (Index r = 0; r < shape_.heads; ++r) {
    const auto block = w.middleCols(shape_.hidden + r * shape_.word, shape_.word);
    gw.middleCols(shape_.hidden + r * shape_.word, shape_.word).noalias() +=
        d_y * reads[static_cast<std::size_t>(r)].transpose();
    d_reads[static_cast<std::size_t>(r)].noalias() += block.transpose() * d_y;
  }
  grads.segment(layout_.output_b, shape_.output) += d_y;
  return w.leftCols(shape_.hidden).transpose() * d_y;
}

}  // namespace sam
