#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>

#include "doctest.h"
#include "ywb/qmodel.hpp"
#include "ywb/rng.hpp"

using namespace ywb;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ContractingCellSpec small_spec(double alpha_bar, double gamma) {
  ContractingCellSpec s;
  s.state_dim = 6;
  s.hidden_dim = 10;
  s.input_dim = 2;
  s.output_dim = 1;
  s.alpha_bar = alpha_bar;
  s.gamma = gamma;
  return s;
}

Vec random_params(const ParamLayout& l, RngStream& rng, double scale) {
  Vec v(l.total);
  for (Index i = 0; i < v.size(); ++i) v[i] = scale * rng.next_gaussian();
  return v;
}

// Exact spectral norm, independent of the library's estimator.
double svd_norm(const Mat& m) {
  return m.size() ? Eigen::JacobiSVD<Mat>(m).singularValues()(0) : 0.0;
}

}  // namespace

TEST_SUITE("qmodel: parameter layout") {
  TEST_CASE("offsets are contiguous and column-major views round-trip") {
    ParamLayout l;
    CHECK_EQ(l.add("first", 2, 3), 0);
    CHECK_EQ(l.add("second", 4, 1), 6);
    CHECK_EQ(l.total, 10);
    Vec flat(10);
    for (Index i = 0; i < 10; ++i) flat[i] = static_cast<double>(i);
    auto m = ParamLayout::matrix(flat, l.find("first"));
    CHECK_EQ(m(0, 0), 0.0);
    CHECK_EQ(m(1, 0), 1.0);  // column-major: rows vary fastest
    CHECK_EQ(m(0, 1), 2.0);
    CHECK_EQ(m(1, 2), 5.0);
    auto v = ParamLayout::vector(flat, l.find("second"));
    CHECK_EQ(v[0], 6.0);
    CHECK_EQ(v[3], 9.0);
    CHECK_THROWS_AS((void)l.find("missing"), ConfigError);
    Vec tiny(3);
    CHECK_THROWS((void)ParamLayout::matrix(tiny, l.find("second")));
  }

  TEST_CASE("contracting-cell layout covers every weight block") {
    ContractingCellSpec s = small_spec(0.9, kInf);
    s.state_dim = 4;
    s.hidden_dim = 8;
    s.input_dim = 3;
    s.output_dim = 2;
    const ParamLayout l = ContractingCell::layout(s);
    // a(4) + B(4x8) + B_u(4x3) + C_q(8x4) + D_in(8x3) + bias(8)
    // + C_o(2x4) + D_ff(2x3) = 126.
    CHECK_EQ(l.total, 126);
    Index sum = 0;
    for (const auto& e : l.entries) sum += e.size();
    CHECK_EQ(sum, l.total);
    CHECK_EQ(l.find("c_q").rows, 8);
    CHECK_EQ(l.find("c_q").cols, 4);
  }

  TEST_CASE("lstm layout matches the gate stack") {
    LstmSpec s;
    s.units = 3;
    s.input_dim = 2;
    s.output_dim = 1;
    const ParamLayout l = LstmCell::layout(s);
    // W(12x5) + b(12) + W_out(1x3) + b_out(1) = 76.
    CHECK_EQ(l.total, 76);
    CHECK_EQ(l.find("w").rows, 12);
    CHECK_EQ(l.find("w").cols, 5);
  }
}

TEST_SUITE("qmodel: certificate soundness") {
  TEST_CASE("projection never exceeds the declared bounds") {
    ContractingCellSpec spec = small_spec(0.9, 2.0);
    const ParamLayout l = ContractingCell::layout(spec);
    RngStream rng(derive_stream(11, {stream_id::kSearchDirections, 1}));
    for (int draw = 0; draw < 300; ++draw) {
      const Vec p = random_params(l, rng, 1.0);
      ProjectionReport rep = project_parameters(spec, p);
      CHECK_LE(rep.s_cert, spec.alpha_bar + 1e-9);
      CHECK_LE(rep.gain_cert, spec.gamma + 1e-9);
      CHECK_LE(rep.eta, 1.0);
      CHECK_GT(rep.eta, 0.0);
      CHECK_LE(rep.theta, 1.0);
    }
  }

  TEST_CASE("certificates dominate exact spectral norms of the built weights") {
    ContractingCellSpec spec = small_spec(0.85, 1.5);
    const ParamLayout l = ContractingCell::layout(spec);
    RngStream rng(derive_stream(11, {stream_id::kSearchDirections, 2}));
    for (int draw = 0; draw < 25; ++draw) {
      ContractingCell cell(spec, random_params(l, rng, 1.5));
      const double s_exact =
          cell.A_diag().cwiseAbs().maxCoeff() + svd_norm(cell.B_nl()) * svd_norm(cell.C_q());
      CHECK_LE(s_exact, cell.certified_rate() + 1e-9);
      CHECK_LE(cell.certified_rate(), spec.alpha_bar + 1e-9);
      const double lu_exact = svd_norm(cell.B_in()) + svd_norm(cell.B_nl()) * svd_norm(cell.D_in());
      const double gain_exact =
          svd_norm(cell.D_ff()) + svd_norm(cell.C_out()) * lu_exact / (1.0 - spec.alpha_bar);
      CHECK_LE(gain_exact, cell.certified_gain() + 1e-9);
      CHECK_LE(cell.certified_gain(), spec.gamma + 1e-9);
    }
  }

  TEST_CASE("feasible parameters pass through untouched") {
    ContractingCellSpec spec = small_spec(0.9, kInf);
    const ParamLayout l = ContractingCell::layout(spec);
    RngStream rng(derive_stream(11, {stream_id::kSearchDirections, 3}));
    const Vec p = random_params(l, rng, 0.01);  // tiny: already contracting
    ProjectionReport rep = project_parameters(spec, p);
    CHECK_EQ(rep.eta, 1.0);
    CHECK_EQ(rep.theta, 1.0);
    CHECK_EQ(rep.s_cert, rep.s_raw);
    ContractingCell cell(spec, p);
    CHECK_EQ((cell.A_diag() - ParamLayout::vector(p, l.find("a_diag"))).norm(), 0.0);
  }

  TEST_CASE("empirical probes never beat the certificates") {
    ContractingCellSpec spec = small_spec(0.9, 2.0);
    const ParamLayout l = ContractingCell::layout(spec);
    RngStream rng(derive_stream(11, {stream_id::kSearchDirections, 4}));
    for (int draw = 0; draw < 20; ++draw) {
      ContractingCell cell(spec, random_params(l, rng, 2.0));
      CHECK_LE(empirical_step_contraction(cell, 50, rng), cell.certified_rate() + 1e-9);
      CHECK_LE(empirical_gain(cell, 8, 40, rng), cell.certified_gain() + 1e-9);
    }
  }

  TEST_CASE("state distance contracts along arbitrary input trajectories") {
    ContractingCellSpec spec = small_spec(0.9, kInf);
    const ParamLayout l = ContractingCell::layout(spec);
    RngStream rng(derive_stream(11, {stream_id::kSearchDirections, 5}));
    ContractingCell a(spec, random_params(l, rng, 3.0));
    auto b = a.clone();
    Vec s1(6), s2(6), in(2), out(1);
    for (Index i = 0; i < 6; ++i) {
      s1[i] = rng.next_gaussian();
      s2[i] = rng.next_gaussian();
    }
    a.set_state(s1);
    b->set_state(s2);
    double dist = (s1 - s2).norm();
    for (int t = 0; t < 50; ++t) {
      in << rng.next_gaussian(), rng.next_gaussian();
      a.step(in, out);
      b->step(in, out);
      a.get_state(s1);
      b->get_state(s2);
      const double next = (s1 - s2).norm();
      CHECK_LE(next, a.certified_rate() * dist + 1e-12);
      dist = next;
    }
  }

  TEST_CASE("construction rejects invalid specs and parameters") {
    ContractingCellSpec spec = small_spec(0.9, kInf);
    const ParamLayout l = ContractingCell::layout(spec);
    RngStream rng(derive_stream(11, {stream_id::kSearchDirections, 6}));
    const Vec good = random_params(l, rng, 0.1);
    CHECK_THROWS(ContractingCell(spec, good.head(l.total - 1)));
    ContractingCellSpec bad = spec;
    bad.alpha_bar = 1.0;
    CHECK_THROWS(ContractingCell(bad, good));
    bad = spec;
    bad.gamma = 0.0;
    CHECK_THROWS(ContractingCell(bad, good));
    bad = spec;
    bad.input_scale = Vec::Ones(3);  // wrong channel count
    CHECK_THROWS(ContractingCell(bad, good));
    bad = spec;
    bad.input_scale = -Vec::Ones(2);
    CHECK_THROWS(ContractingCell(bad, good));
    ContractingCell cell(spec, good);
    CHECK_THROWS(cell.set_state(Vec::Zero(5)));
  }
}

TEST_SUITE("qmodel: interface units") {
  TEST_CASE("input and output scales fold into an equivalent unit-scale cell") {
    ContractingCellSpec scaled = small_spec(0.9, kInf);
    scaled.input_scale = Vec(2);
    scaled.input_scale << 2.0, 0.5;
    scaled.output_scale = 3.0;
    ContractingCellSpec unit = small_spec(0.9, kInf);
    const ParamLayout l = ContractingCell::layout(unit);
    RngStream rng(derive_stream(11, {stream_id::kSearchDirections, 7}));
    const Vec p = random_params(l, rng, 1.0);
    ContractingCell a(scaled, p), b(unit, p);
    Vec u(2), un(2), oa(1), ob(1);
    for (int t = 0; t < 30; ++t) {
      u << rng.next_gaussian(), rng.next_gaussian();
      un << u[0] / 2.0, u[1] * 2.0;
      a.step(u, oa);
      b.step(un, ob);
      CHECK_EQ(oa[0], doctest::Approx(3.0 * ob[0]).epsilon(1e-12));
    }
  }

  TEST_CASE("lstm offset and scale normalize the raw inputs") {
    LstmSpec scaled;
    scaled.units = 4;
    scaled.input_dim = 2;
    scaled.output_dim = 1;
    scaled.input_offset = Vec(2);
    scaled.input_offset << 1.0, -2.0;
    scaled.input_scale = Vec(2);
    scaled.input_scale << 4.0, 0.25;
    scaled.output_scale = 5.0;
    LstmSpec unit = scaled;
    unit.input_offset = Vec();
    unit.input_scale = Vec();
    unit.output_scale = 1.0;
    RngStream rng(derive_stream(11, {stream_id::kSearchDirections, 8}));
    const Vec p = random_params(LstmCell::layout(unit), rng, 0.5);
    LstmCell a(scaled, p), b(unit, p);
    Vec u(2), un(2), oa(1), ob(1);
    for (int t = 0; t < 20; ++t) {
      u << rng.next_gaussian(), rng.next_gaussian();
      un << (u[0] - 1.0) / 4.0, (u[1] + 2.0) * 4.0;
      a.step(u, oa);
      b.step(un, ob);
      CHECK_EQ(oa[0], doctest::Approx(5.0 * ob[0]).epsilon(1e-12));
    }
  }
}

TEST_SUITE("qmodel: initialization and state plumbing") {
  TEST_CASE("freshly initialized models are the zero operator") {
    ContractingCellSpec spec = small_spec(0.95, kInf);
    RngStream rng(derive_stream(11, {stream_id::kSearchDirections, 9}));
    ContractingCell cell(spec, ContractingCell::init_params(spec, rng));
    LstmSpec ls;
    ls.units = 5;
    ls.input_dim = 2;
    ls.output_dim = 1;
    LstmCell lstm(ls, LstmCell::init_params(ls, rng));
    Vec u(2), out(1);
    for (int t = 0; t < 30; ++t) {
      u << rng.next_gaussian(), rng.next_gaussian();
      cell.step(u, out);
      CHECK_EQ(out[0], 0.0);
      lstm.step(u, out);
      CHECK_EQ(out[0], 0.0);
    }
  }

  TEST_CASE("clone duplicates dynamics and reset restores the origin") {
    ContractingCellSpec spec = small_spec(0.9, kInf);
    const ParamLayout l = ContractingCell::layout(spec);
    RngStream rng(derive_stream(11, {stream_id::kSearchDirections, 10}));
    ContractingCell cell(spec, random_params(l, rng, 1.0));
    Vec u(2), o1(1), o2(1), s(6);
    for (int t = 0; t < 5; ++t) {
      u << rng.next_gaussian(), rng.next_gaussian();
      cell.step(u, o1);
    }
    auto copy = cell.clone();
    for (int t = 0; t < 5; ++t) {
      u << rng.next_gaussian(), rng.next_gaussian();
      cell.step(u, o1);
      copy->step(u, o2);
      CHECK_EQ(o1[0], o2[0]);
    }
    cell.reset();
    cell.get_state(s);
    CHECK_EQ(s.norm(), 0.0);
  }
}

TEST_SUITE("qmodel: lstm recurrence") {
  TEST_CASE("one step matches the gate equations computed by hand") {
    LstmSpec s;
    s.units = 1;
    s.input_dim = 1;
    s.output_dim = 1;
    const ParamLayout l = LstmCell::layout(s);
    // W is 4x2 (column-major in the flat vector), rows ordered
    // (input, forget, candidate, output); columns (input, hidden).
    Vec p(l.total);
    p << 0.3, -0.2, 0.5, 0.7,   // W column 0: gate weights on the input
        0.1, 0.4, -0.6, 0.2,    // W column 1: gate weights on h
        0.05, -0.1, 0.2, 0.3,   // b
        1.5,                    // w_out
        -0.25;                  // b_out
    LstmCell cell(s, p);
    auto sigmoid = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    double h = 0.0, c = 0.0;
    Vec u(1), out(1);
    for (int t = 0; t < 4; ++t) {
      const double x = 0.4 * t - 0.3;
      const double i_g = sigmoid(0.3 * x + 0.1 * h + 0.05);
      const double f_g = sigmoid(-0.2 * x + 0.4 * h - 0.1);
      const double g_g = std::tanh(0.5 * x - 0.6 * h + 0.2);
      const double o_g = sigmoid(0.7 * x + 0.2 * h + 0.3);
      c = f_g * c + i_g * g_g;
      h = o_g * std::tanh(c);
      u << x;
      cell.step(u, out);
      CHECK_EQ(out[0], doctest::Approx(1.5 * h - 0.25).epsilon(1e-14));
    }
    Vec state(2);
    cell.get_state(state);
    CHECK_EQ(state[0], doctest::Approx(h).epsilon(1e-14));
    CHECK_EQ(state[1], doctest::Approx(c).epsilon(1e-14));
  }

  TEST_CASE("state round-trips through get and set") {
    LstmSpec s;
    s.units = 3;
    s.input_dim = 2;
    s.output_dim = 2;
    RngStream rng(derive_stream(11, {stream_id::kSearchDirections, 11}));
    LstmCell cell(s, random_params(LstmCell::layout(s), rng, 0.4));
    Vec u(2), out(2), snap(6);
    u << 0.5, -1.0;
    cell.step(u, out);
    cell.get_state(snap);
    Vec out_a(2), out_b(2);
    cell.step(u, out_a);
    cell.set_state(snap);
    cell.step(u, out_b);
    CHECK_EQ((out_a - out_b).norm(), 0.0);
    CHECK_THROWS(cell.set_state(Vec::Zero(5)));
  }
}
