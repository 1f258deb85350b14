#include "ywb/qmodel.hpp"

#include <cmath>

#include "ywb/linalg.hpp"

namespace ywb {

// ----------------------------------------------------------------------------
// ParamLayout
// ----------------------------------------------------------------------------

Index ParamLayout::add(const std::string& name, Index rows, Index cols) {
  Entry e;
  e.name = name;
  e.offset = total;
  e.rows = rows;
  e.cols = cols;
  entries.push_back(e);
  total += e.size();
  return e.offset;
}

const ParamLayout::Entry& ParamLayout::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw ConfigError("param layout: no entry named " + name);
}

Eigen::Map<const Mat> ParamLayout::matrix(const Vec& flat, const Entry& e) {
  require(e.offset + e.size() <= flat.size(), "param layout: flat vector too short");
  return Eigen::Map<const Mat>(flat.data() + e.offset, e.rows, e.cols);
}

Eigen::Map<const Vec> ParamLayout::vector(const Vec& flat, const Entry& e) {
  require(e.offset + e.size() <= flat.size(), "param layout: flat vector too short");
  return Eigen::Map<const Vec>(flat.data() + e.offset, e.size());
}

// ----------------------------------------------------------------------------
// ContractingCell
// ----------------------------------------------------------------------------

ParamLayout ContractingCell::layout(const ContractingCellSpec& s) {
  require(s.state_dim > 0 && s.hidden_dim > 0 && s.input_dim > 0 && s.output_dim > 0,
          "contracting cell: dimensions must be positive");
  ParamLayout l;
  l.add("a_diag", s.state_dim, 1);
  l.add("b_nl", s.state_dim, s.hidden_dim);
  l.add("b_in", s.state_dim, s.input_dim);
  l.add("c_q", s.hidden_dim, s.state_dim);
  l.add("d_in", s.hidden_dim, s.input_dim);
  l.add("bias", s.hidden_dim, 1);
  l.add("c_out", s.output_dim, s.state_dim);
  l.add("d_ff", s.output_dim, s.input_dim);
  return l;
}

Vec ContractingCell::init_params(const ContractingCellSpec& spec, RngStream& rng) {
  const ParamLayout l = layout(spec);
  Vec v(l.total);
  for (Index i = 0; i < v.size(); ++i) v[i] = 0.1 * rng.next_gaussian();
  // Zero output maps: the initial cell is the zero operator.  Zero bias: the
  // hidden layer responds only to inputs, so early search gradients point at
  // signal-dependent structure rather than constant output offsets.
  for (const char* name : {"c_out", "d_ff", "bias"}) {
    const auto& e = l.find(name);
    v.segment(e.offset, e.size()).setZero();
  }
  return v;
}

namespace {

struct ProjectedWeights {
  Vec a;
  Mat b_nl, b_in, c_q, d_in, c_o, d_ff;
  Vec bias;
  ProjectionReport report;
};

ProjectedWeights project(const ContractingCellSpec& s, const Vec& free) {
  require(0.0 <= s.alpha_bar && s.alpha_bar < 1.0, "contracting cell: alpha_bar must be in [0,1)");
  require(s.gamma > 0.0, "contracting cell: gamma must be positive");
  const ParamLayout l = ContractingCell::layout(s);
  require(free.size() == l.total, "contracting cell: free parameter size mismatch");

  ProjectedWeights w;
  w.a = ParamLayout::vector(free, l.find("a_diag"));
  w.b_nl = ParamLayout::matrix(free, l.find("b_nl"));
  w.b_in = ParamLayout::matrix(free, l.find("b_in"));
  w.c_q = ParamLayout::matrix(free, l.find("c_q"));
  w.d_in = ParamLayout::matrix(free, l.find("d_in"));
  w.bias = ParamLayout::vector(free, l.find("bias"));
  w.c_o = ParamLayout::matrix(free, l.find("c_out"));
  w.d_ff = ParamLayout::matrix(free, l.find("d_ff"));

  // Fold the interface units into the weights so both the runtime map and the
  // certificates below refer to the raw input → output map in plant units.
  require(s.output_scale > 0.0 && std::isfinite(s.output_scale),
          "contracting cell: output_scale must be positive");
  if (s.input_scale.size()) {
    require(s.input_scale.size() == s.input_dim, "contracting cell: input_scale size mismatch");
    require(s.input_scale.minCoeff() > 0.0, "contracting cell: input_scale must be positive");
    const auto sinv = s.input_scale.cwiseInverse();
    w.b_in = w.b_in * sinv.asDiagonal();
    w.d_in = w.d_in * sinv.asDiagonal();
    w.d_ff = w.d_ff * sinv.asDiagonal();
  }
  w.c_o *= s.output_scale;
  w.d_ff *= s.output_scale;

  auto& rep = w.report;
  const double norm_a = w.a.size() ? w.a.cwiseAbs().maxCoeff() : 0.0;  // diagonal: exact
  const double norm_b = spectral_norm_safe(w.b_nl);
  const double norm_cq = spectral_norm_safe(w.c_q);
  rep.s_raw = norm_a + norm_b * norm_cq;
  rep.eta = s.alpha_bar / std::max(rep.s_raw, s.alpha_bar);
  w.a *= rep.eta;
  w.b_nl *= rep.eta;
  w.b_in *= rep.eta;
  rep.s_cert = rep.eta * rep.s_raw;

  rep.input_path = spectral_norm_safe(w.b_in) + rep.eta * norm_b * spectral_norm_safe(w.d_in);
  rep.gain_raw = spectral_norm_safe(w.d_ff) +
                 spectral_norm_safe(w.c_o) * rep.input_path / (1.0 - s.alpha_bar);
  rep.theta = std::isfinite(s.gamma) ? s.gamma / std::max(rep.gain_raw, s.gamma) : 1.0;
  w.c_o *= rep.theta;
  w.d_ff *= rep.theta;
  rep.gain_cert = rep.theta * rep.gain_raw;
  return w;
}

}  // namespace

ProjectionReport project_parameters(const ContractingCellSpec& spec, const Vec& free_params) {
  return project(spec, free_params).report;
}

ContractingCell::ContractingCell(const ContractingCellSpec& spec, const Vec& free_params)
    : spec_(spec), free_(free_params) {
  ProjectedWeights w = project(spec, free_params);
  a_ = std::move(w.a);
  b_nl_ = std::move(w.b_nl);
  b_in_ = std::move(w.b_in);
  c_q_ = std::move(w.c_q);
  d_in_ = std::move(w.d_in);
  bias_ = std::move(w.bias);
  c_o_ = std::move(w.c_o);
  d_ff_ = std::move(w.d_ff);
  report_ = w.report;
  q_ = Vec::Zero(spec.state_dim);
  scratch_hidden_.resize(spec.hidden_dim);
  scratch_state_.resize(spec.state_dim);
}

void ContractingCell::set_state(const Vec& s) {
  require(s.size() == spec_.state_dim, "contracting cell: state size mismatch");
  q_ = s;
}

void ContractingCell::step(const Vec& in, Vec& out) {
  scratch_hidden_ = bias_;
  scratch_hidden_.noalias() += c_q_ * q_;
  scratch_hidden_.noalias() += d_in_ * in;
  scratch_hidden_ = scratch_hidden_.cwiseMax(0.0);  // ReLU

  out.noalias() = c_o_ * q_;
  out.noalias() += d_ff_ * in;

  scratch_state_ = a_.cwiseProduct(q_);
  scratch_state_.noalias() += b_nl_ * scratch_hidden_;
  scratch_state_.noalias() += b_in_ * in;
  q_ = scratch_state_;
}

std::unique_ptr<SequenceModel> ContractingCell::clone() const {
  return std::make_unique<ContractingCell>(*this);
}

// ----------------------------------------------------------------------------
// LstmCell
// ----------------------------------------------------------------------------

ParamLayout LstmCell::layout(const LstmSpec& s) {
  require(s.units > 0 && s.input_dim > 0 && s.output_dim > 0, "lstm: dimensions must be positive");
  ParamLayout l;
  l.add("w", 4 * s.units, s.input_dim + s.units);
  l.add("b", 4 * s.units, 1);
  l.add("w_out", s.output_dim, s.units);
  l.add("b_out", s.output_dim, 1);
  return l;
}

Vec LstmCell::init_params(const LstmSpec& spec, RngStream& rng) {
  const ParamLayout l = layout(spec);
  Vec v(l.total);
  for (Index i = 0; i < v.size(); ++i) v[i] = 0.1 * rng.next_gaussian();
  for (const char* name : {"b", "w_out", "b_out"}) {
    const auto& e = l.find(name);
    v.segment(e.offset, e.size()).setZero();
  }
  return v;
}

LstmCell::LstmCell(const LstmSpec& spec, const Vec& params) : spec_(spec), free_(params) {
  const ParamLayout l = layout(spec);
  require(params.size() == l.total, "lstm: parameter size mismatch");
  W_ = ParamLayout::matrix(params, l.find("w"));
  b_ = ParamLayout::vector(params, l.find("b"));
  W_out_ = ParamLayout::matrix(params, l.find("w_out"));
  b_out_ = ParamLayout::vector(params, l.find("b_out"));
  in_offset_ = spec.input_offset.size() ? spec.input_offset : Vec::Zero(spec.input_dim);
  require(in_offset_.size() == spec.input_dim, "lstm: input_offset size mismatch");
  if (spec.input_scale.size()) {
    require(spec.input_scale.size() == spec.input_dim, "lstm: input_scale size mismatch");
    require(spec.input_scale.minCoeff() > 0.0, "lstm: input_scale must be positive");
    in_scale_inv_ = spec.input_scale.cwiseInverse();
  } else {
    in_scale_inv_ = Vec::Ones(spec.input_dim);
  }
  require(spec.output_scale > 0.0 && std::isfinite(spec.output_scale),
          "lstm: output_scale must be positive");
  h_ = Vec::Zero(spec.units);
  c_ = Vec::Zero(spec.units);
  gates_.resize(4 * spec.units);
  zin_.resize(spec.input_dim + spec.units);
}

void LstmCell::get_state(Vec& s) const {
  s.resize(2 * spec_.units);
  s.head(spec_.units) = h_;
  s.tail(spec_.units) = c_;
}

void LstmCell::set_state(const Vec& s) {
  require(s.size() == 2 * spec_.units, "lstm: state size mismatch");
  h_ = s.head(spec_.units);
  c_ = s.tail(spec_.units);
}

namespace {
inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
}

void LstmCell::step(const Vec& in, Vec& out) {
  const Index H = spec_.units;
  zin_.head(spec_.input_dim) = (in - in_offset_).cwiseProduct(in_scale_inv_);
  zin_.tail(H) = h_;
  gates_ = b_;
  gates_.noalias() += W_ * zin_;
  for (Index j = 0; j < H; ++j) {
    const double i_g = sigmoid(gates_[j]);
    const double f_g = sigmoid(gates_[H + j]);
    const double g_g = std::tanh(gates_[2 * H + j]);
    const double o_g = sigmoid(gates_[3 * H + j]);
    c_[j] = f_g * c_[j] + i_g * g_g;
    h_[j] = o_g * std::tanh(c_[j]);
  }
  out = b_out_;
  out.noalias() += W_out_ * h_;
  out *= spec_.output_scale;
}

std::unique_ptr<SequenceModel> LstmCell::clone() const {
  return std::make_unique<LstmCell>(*this);
}

// ----------------------------------------------------------------------------
// Empirical probes
// ----------------------------------------------------------------------------

double empirical_gain(const SequenceModel& model, int probes, int horizon, RngStream& rng,
                      double input_scale) {
  auto m1 = model.clone();
  auto m2 = model.clone();
  const Index ni = model.input_dim();
  Vec in1(ni), in2(ni), out1(model.output_dim()), out2(model.output_dim());
  double best = 0.0;
  for (int p = 0; p < probes; ++p) {
    m1->reset();
    m2->reset();
    double num = 0.0, den = 0.0;
    for (int t = 0; t < horizon; ++t) {
      for (Index i = 0; i < ni; ++i) {
        in1[i] = input_scale * rng.next_gaussian();
        in2[i] = input_scale * rng.next_gaussian();
      }
      m1->step(in1, out1);
      m2->step(in2, out2);
      num += (out1 - out2).squaredNorm();
      den += (in1 - in2).squaredNorm();
    }
    if (den < 1e-24) continue;  // degenerate probe
    best = std::max(best, std::sqrt(num / den));
  }
  return best;
}

double empirical_step_contraction(const SequenceModel& model, int pairs, RngStream& rng,
                                  double state_scale, double input_scale) {
  auto m1 = model.clone();
  auto m2 = model.clone();
  const Index ns = model.state_dim();
  const Index ni = model.input_dim();
  Vec s1(ns), s2(ns), in(ni), out(model.output_dim()), n1(ns), n2(ns);
  double worst = 0.0;
  for (int p = 0; p < pairs; ++p) {
    for (Index i = 0; i < ns; ++i) {
      s1[i] = state_scale * rng.next_gaussian();
      s2[i] = state_scale * rng.next_gaussian();
    }
    for (Index i = 0; i < ni; ++i) in[i] = input_scale * rng.next_gaussian();
    const double d0 = (s1 - s2).norm();
    if (d0 < 1e-12) continue;
    m1->set_state(s1);
    m2->set_state(s2);
    m1->step(in, out);
    m2->step(in, out);
    m1->get_state(n1);
    m2->get_state(n2);
    worst = std::max(worst, (n1 - n2).norm() / d0);
  }
  return worst;
}

}  // namespace ywb
