#pragma once

#include <limits>
#include <string>
#include <vector>

#include "ywb/common.hpp"
#include "ywb/rng.hpp"
#include "ywb/sequence_model.hpp"

namespace ywb {

// ============================================================================
// Flat-parameter plumbing shared by all trainable models.
// ============================================================================
struct ParamLayout {
  struct Entry {
    std::string name;
    Index offset = 0, rows = 0, cols = 0;
    Index size() const { return rows * cols; }
  };
  std::vector<Entry> entries;
  Index total = 0;

  Index add(const std::string& name, Index rows, Index cols);
  const Entry& find(const std::string& name) const;

  // Views into a flat vector (column-major blocks).
  static Eigen::Map<const Mat> matrix(const Vec& flat, const Entry& e);
  static Eigen::Map<const Vec> vector(const Vec& flat, const Entry& e);
};

// ============================================================================
// Contracting cell: a direct parameterization of contracting / Lipschitz
// recurrent models.  Free parameters are unconstrained reals; construction
// rescales them so the model carries numeric certificates:
//
//   q_{t+1} = A q_t + B φ(C_q q_t + D_in u_t + b) + B_u u_t
//   out_t   = C_o q_t + D_ff u_t,          φ = ReLU (1-Lipschitz)
//
//   per-step contraction factor  s = |A|₂ + |B|₂|C_q|₂ ≤ ᾱ
//   incremental ℓ2 gain bound    |D_ff|₂ + |C_o|₂ L_u/(1-ᾱ) ≤ γ,
//                                L_u = |B_u|₂ + |B|₂|D_in|₂
//
// A is diagonal (its spectral norm is then exact and the parameter count
// stays comparable to the LSTM baseline at equal widths).  Rescaling factors:
// η = ᾱ/max(s, ᾱ) applied to (A, B, B_u); θ = γ/max(bound, γ) applied to
// (C_o, D_ff).  Every free-parameter vector therefore maps onto a certified
// model, making the search space unconstrained.
//
// input_scale / output_scale express the physical units of the model's
// interface: inputs are divided per-channel by input_scale and the output is
// multiplied by output_scale, so the free parameters always describe an O(1)
// map regardless of the plant's units.  The scales are folded into the
// effective weight matrices at construction; the certificates (and the gamma
// cap) therefore bound the raw input → output map in plant units.
// ============================================================================
struct ContractingCellSpec {
  Index state_dim = 32;
  Index hidden_dim = 64;
  Index input_dim = 0;
  Index output_dim = 0;
  double alpha_bar = 0.95;
  double gamma = std::numeric_limits<double>::infinity();  // infinity = uncapped
  Vec input_scale;           // per-channel input units (empty = all ones)
  double output_scale = 1.0; // output units
};

struct ProjectionReport {
  double s_raw = 0.0;     // contraction factor of the free parameters
  double eta = 1.0;       // applied state-path rescale
  double s_cert = 0.0;    // certified per-step factor after rescale
  double input_path = 0.0;  // L_u after rescale
  double gain_raw = 0.0;  // gain bound before output rescale
  double theta = 1.0;     // applied output rescale
  double gain_cert = 0.0; // certified gain bound after rescale
};

class ContractingCell final : public SequenceModel {
 public:
  ContractingCell(const ContractingCellSpec& spec, const Vec& free_params);

  static ParamLayout layout(const ContractingCellSpec& spec);
  // Gaussian(0, 0.1) init with zero output maps, so a freshly initialized
  // cell is the zero operator (policy starts at the base controller).  The
  // hidden bias starts at zero as well, keeping the internal response purely
  // input-driven, which concentrates early search on signal-dependent
  // structure instead of constant offsets.
  static Vec init_params(const ContractingCellSpec& spec, RngStream& rng);

  Index input_dim() const override { return spec_.input_dim; }
  Index output_dim() const override { return spec_.output_dim; }
  Index state_dim() const override { return spec_.state_dim; }
  void reset() override { q_.setZero(); }
  void get_state(Vec& s) const override { s = q_; }
  void set_state(const Vec& s) override;
  void step(const Vec& in, Vec& out) override;
  std::unique_ptr<SequenceModel> clone() const override;

  const ContractingCellSpec& spec() const { return spec_; }
  const Vec& free_params() const { return free_; }
  const ProjectionReport& projection() const { return report_; }
  double certified_rate() const { return report_.s_cert; }
  double certified_gain() const { return report_.gain_cert; }

  // Effective (post-projection, unit-folded) weights of the raw-unit map,
  // exposed for certification tests.
  const Vec& A_diag() const { return a_; }
  const Mat& B_nl() const { return b_nl_; }
  const Mat& B_in() const { return b_in_; }
  const Mat& C_q() const { return c_q_; }
  const Mat& D_in() const { return d_in_; }
  const Vec& bias() const { return bias_; }
  const Mat& C_out() const { return c_o_; }
  const Mat& D_ff() const { return d_ff_; }

 private:
  ContractingCellSpec spec_;
  Vec free_;
  Vec a_, bias_, q_;
  Mat b_nl_, b_in_, c_q_, d_in_, c_o_, d_ff_;
  ProjectionReport report_;
  Vec scratch_hidden_, scratch_state_;
};

// Projection applied to a free-parameter vector without building a cell;
// returns the certificate report (used by soundness tests).
ProjectionReport project_parameters(const ContractingCellSpec& spec, const Vec& free_params);

// ============================================================================
// LSTM baseline: standard gated recurrence, no stability certificate.
// ============================================================================
struct LstmSpec {
  Index units = 28;
  Index input_dim = 0;
  Index output_dim = 0;
  Vec input_offset;          // subtracted per channel (empty = zeros)
  Vec input_scale;           // per-channel input units (empty = all ones)
  double output_scale = 1.0; // output units
};

class LstmCell final : public SequenceModel {
 public:
  LstmCell(const LstmSpec& spec, const Vec& params);

  static ParamLayout layout(const LstmSpec& spec);
  // Gaussian(0, 0.1) recurrence weights, zero gate bias and zero output map
  // (same convention as the contracting cell: the initial policy correction
  // is zero and the internal response is purely input-driven).
  static Vec init_params(const LstmSpec& spec, RngStream& rng);

  Index input_dim() const override { return spec_.input_dim; }
  Index output_dim() const override { return spec_.output_dim; }
  Index state_dim() const override { return 2 * spec_.units; }  // [h; c]
  void reset() override { h_.setZero(); c_.setZero(); }
  void get_state(Vec& s) const override;
  void set_state(const Vec& s) override;
  void step(const Vec& in, Vec& out) override;
  std::unique_ptr<SequenceModel> clone() const override;

  const LstmSpec& spec() const { return spec_; }
  const Vec& free_params() const { return free_; }

 private:
  LstmSpec spec_;
  Vec free_;
  Mat W_;        // (4 units) x (input + units)
  Vec b_;        // 4 units
  Mat W_out_;    // output x units
  Vec b_out_;
  Vec in_offset_, in_scale_inv_;  // unit normalization of the input channels
  Vec h_, c_;
  Vec gates_, zin_;
};

// Max over probes of ||Δout||_T / ||Δin||_T for random Gaussian input-sequence
// pairs from the model's canonical initial state (equal initial states, so
// the ratio lower-bounds the incremental gain).  Zero-difference probes are
// skipped.
double empirical_gain(const SequenceModel& model, int probes, int horizon, RngStream& rng,
                      double input_scale = 1.0);

// Max observed per-step state contraction factor under shared input over
// random state pairs (lower bound on the true factor; certified models must
// dominate it).
double empirical_step_contraction(const SequenceModel& model, int pairs, RngStream& rng,
                                  double state_scale = 1.0, double input_scale = 1.0);

}  // namespace ywb
