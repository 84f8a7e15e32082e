#include "smmpc/control.hpp"

#include <Eigen/Cholesky>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "smmpc/errors.hpp"

namespace smmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vector expand_box_side(const std::optional<BoxBounds>& box, bool lower, Index n_ch, Index T) {
  Vector out = Vector::Constant(n_ch * T, lower ? -kInf : kInf);
  if (box) {
    const Vector& side = lower ? box->lower : box->upper;
    for (Index t = 0; t < T; ++t) out.segment(t * n_ch, n_ch) = side;
  }
  return out;
}

// Block first-difference operator: (D u)(0) = u(0), (D u)(j) = u(j) - u(j-1).
Matrix difference_operator(Index n_u, Index T_f) {
  Matrix D = Matrix::Identity(n_u * T_f, n_u * T_f);
  for (Index j = 1; j < T_f; ++j) {
    D.block(j * n_u, (j - 1) * n_u, n_u, n_u) = -Matrix::Identity(n_u, n_u);
  }
  return D;
}

void check_symmetric_spd(const Matrix& W, const std::string& name) {
  if (W.rows() != W.cols()) throw DimensionError("ControlSpec: " + name + " must be square");
  const double scale = std::max(1.0, W.cwiseAbs().maxCoeff());
  if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw NumericalError("ControlSpec: " + name + " must be symmetric within 1e-12");
  }
  if (Eigen::LLT<Matrix>(W).info() != Eigen::Success) {
    throw NumericalError("ControlSpec: " + name + " must be positive definite");
  }
}

// Tracking QP over z = [u_f; output auxiliaries] for a fixed output response
// map y_f = c + Gamma u_f. The matrices are independent of (c, reference,
// u_prev), which only move f and b_eq; that split is what lets a controller
// reuse one KKT factorization across receding-horizon steps.
class TrackingQpTemplate {
 public:
  TrackingQpTemplate(Matrix Gamma, const ControlSpec& spec, Index n_u, Index n_y, Index T_f)
      : Gamma_(std::move(Gamma)), spec_(spec), n_u_(n_u), n_y_(n_y), T_f_(T_f) {
    spec_.validate(n_u, n_y, T_f);
    const Index n_uf = n_u * T_f;
    const Index n_yf = n_y * T_f;

    y_lb_ = expand_box_side(spec_.y_box, true, n_y, T_f);
    y_ub_ = expand_box_side(spec_.y_box, false, n_y, T_f);
    for (Index i = 0; i < n_yf; ++i) {
      if (std::isfinite(y_lb_(i)) || std::isfinite(y_ub_(i))) constrained_.push_back(i);
    }
    soft_ = std::isfinite(spec_.slack_weight) && !constrained_.empty();

    if (spec_.input_penalty == InputPenalty::delta) {
      D_ = difference_operator(n_u, T_f);
      R_eff_ = D_.transpose() * spec_.R * D_;
    } else {
      D_ = Matrix::Identity(n_uf, n_uf);
      R_eff_ = spec_.R;
    }

    // Variable layout: [u_f | w_lo | w_hi | s] (soft) or [u_f | w] (hard).
    Index n_lo = 0, n_hi = 0;
    for (Index i : constrained_) {
      if (std::isfinite(y_lb_(i))) ++n_lo;
      if (std::isfinite(y_ub_(i))) ++n_hi;
    }
    const Index n_c = static_cast<Index>(constrained_.size());
    n_vars_ = soft_ ? n_uf + n_lo + n_hi + n_c : n_uf + n_c;
    const Index m_eq = soft_ ? n_lo + n_hi : n_c;

    H_ = Matrix::Zero(n_vars_, n_vars_);
    H_.topLeftCorner(n_uf, n_uf) =
        2.0 * (Gamma_.transpose() * spec_.P * Gamma_ + R_eff_);
    A_eq_ = Matrix::Zero(m_eq, n_vars_);
    lb_ = Vector::Constant(n_vars_, -kInf);
    ub_ = Vector::Constant(n_vars_, kInf);
    lb_.head(n_uf) = expand_box_side(spec_.u_box, true, n_u, T_f);
    ub_.head(n_uf) = expand_box_side(spec_.u_box, false, n_u, T_f);
    eq_output_.resize(m_eq);

    if (soft_) {
      const Index w_lo0 = n_uf, w_hi0 = n_uf + n_lo, s0 = n_uf + n_lo + n_hi;
      H_.block(s0, s0, n_c, n_c) =
          2.0 * spec_.slack_weight * Matrix::Identity(n_c, n_c);
      lb_.segment(s0, n_c).setZero();  // s >= 0
      Index row = 0, lo = 0, hi = 0, k = 0;
      for (Index i : constrained_) {
        if (std::isfinite(y_lb_(i))) {
          // y_i + s_k - w_lo = 0, w_lo >= lb
          A_eq_.block(row, 0, 1, n_uf) = Gamma_.row(i);
          A_eq_(row, s0 + k) = 1.0;
          A_eq_(row, w_lo0 + lo) = -1.0;
          lb_(w_lo0 + lo) = y_lb_(i);
          eq_output_(row) = i;
          ++row;
          ++lo;
        }
        if (std::isfinite(y_ub_(i))) {
          // y_i - s_k - w_hi = 0, w_hi <= ub
          A_eq_.block(row, 0, 1, n_uf) = Gamma_.row(i);
          A_eq_(row, s0 + k) = -1.0;
          A_eq_(row, w_hi0 + hi) = -1.0;
          ub_(w_hi0 + hi) = y_ub_(i);
          eq_output_(row) = i;
          ++row;
          ++hi;
        }
        ++k;
      }
    } else {
      Index row = 0;
      for (Index i : constrained_) {
        A_eq_.block(row, 0, 1, n_uf) = Gamma_.row(i);
        A_eq_(row, n_uf + row) = -1.0;
        lb_(n_uf + row) = y_lb_(i);
        ub_(n_uf + row) = y_ub_(i);
        eq_output_(row) = i;
        ++row;
      }
    }
  }

  Index n_vars() const { return n_vars_; }
  Index n_uf() const { return n_u_ * T_f_; }
  const Matrix& H() const { return H_; }
  const Matrix& A_eq() const { return A_eq_; }
  const Vector& lb() const { return lb_; }
  const Vector& ub() const { return ub_; }
  const Matrix& Gamma() const { return Gamma_; }

  Vector make_f(const Vector& c, const Vector& reference, const Vector& u_prev) const {
    Vector f = Vector::Zero(n_vars_);
    f.head(n_uf()) = 2.0 * Gamma_.transpose() * (spec_.P * (c - reference));
    if (spec_.input_penalty == InputPenalty::delta) {
      Vector t = Vector::Zero(n_uf());
      t.head(n_u_) = u_prev;
      f.head(n_uf()) -= 2.0 * D_.transpose() * (spec_.R * t);
    }
    return f;
  }

  Vector make_b_eq(const Vector& c) const {
    Vector b(A_eq_.rows());
    for (Index row = 0; row < b.size(); ++row) b(row) = -c(eq_output_(row));
    return b;
  }

  // Constant dropped from the quadratic form; added back for reporting.
  double objective_offset(const Vector& c, const Vector& reference,
                          const Vector& u_prev) const {
    const Vector e = c - reference;
    double off = e.dot(spec_.P * e);
    if (spec_.input_penalty == InputPenalty::delta) {
      Vector t = Vector::Zero(n_uf());
      t.head(n_u_) = u_prev;
      off += t.dot(spec_.R * t);
    }
    return off;
  }

 private:
  Matrix Gamma_;
  ControlSpec spec_;
  Index n_u_, n_y_, T_f_;
  Matrix D_, R_eff_;
  Vector y_lb_, y_ub_;
  std::vector<Index> constrained_;
  bool soft_ = false;
  Index n_vars_ = 0;
  Matrix H_, A_eq_;
  Vector lb_, ub_;
  Eigen::VectorXi eq_output_;  // which output entry each equality row pins
};

QpProblem assemble(const TrackingQpTemplate& tpl, const Vector& c, const Vector& reference,
                   const Vector& u_prev) {
  QpProblem qp;
  qp.H = tpl.H();
  qp.A_eq = tpl.A_eq();
  qp.lb = tpl.lb();
  qp.ub = tpl.ub();
  qp.f = tpl.make_f(c, reference, u_prev);
  qp.b_eq = tpl.make_b_eq(c);
  return qp;
}

Vector reference_or_zero(const ControlSpec& spec, Index n_yf) {
  if (spec.reference.size() == 0) return Vector::Zero(n_yf);
  return spec.reference;
}

class TemplateController : public RecedingHorizonController {
 public:
  TemplateController(TrackingQpTemplate tpl, ControlSpec spec, Index n_u, Index n_y,
                     Index T_p, Index T_f, const QpSettings& qp)
      : tpl_(std::move(tpl)),
        spec_(std::move(spec)),
        n_u_(n_u),
        n_y_(n_y),
        T_p_(T_p),
        T_f_(T_f),
        solver_(tpl_.H(), tpl_.A_eq(), tpl_.lb(), tpl_.ub(), qp) {}

  Index past_horizon() const override { return T_p_; }
  Index future_horizon() const override { return T_f_; }

 protected:
  virtual Vector response_offset(const Vector& u_past, const Vector& y_past_meas,
                                 const Vector& plant_state) = 0;

  ControlStep solve_step(const Vector& u_past, const Vector& y_past_meas,
                         const Vector& reference, const Vector& plant_state) {
    const auto t0 = std::chrono::steady_clock::now();
    const Vector c = response_offset(u_past, y_past_meas, plant_state);
    const Vector ref =
        reference.size() > 0 ? reference : reference_or_zero(spec_, n_y_ * T_f_);
    const Vector u_prev = u_past.tail(n_u_);
    const Vector f = tpl_.make_f(c, ref, u_prev);
    const Vector b_eq = tpl_.make_b_eq(c);

    QpSolution sol = have_warm_ ? solver_.solve(f, b_eq, shift_warm(), dual_warm_)
                                : solver_.solve(f, b_eq);
    if (sol.status == QpStatus::infeasible) {
      throw InfeasibleError("receding-horizon step: QP infeasible (" +
                            std::to_string(tpl_.A_eq().rows()) + " output equality rows, " +
                            std::to_string(tpl_.n_vars()) + " variables); check box bounds");
    }
    z_warm_ = sol.z;
    dual_warm_ = sol.dual;
    have_warm_ = true;

    ControlStep step;
    step.u_f = sol.z.head(tpl_.n_uf());
    step.u_apply = step.u_f.head(n_u_);
    step.y_f_pred = c + tpl_.Gamma() * step.u_f;
    step.iterations = sol.iterations;
    step.cost = sol.objective + tpl_.objective_offset(c, ref, u_prev);
    step.solve_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    return step;
  }

 private:
  // Standard receding-horizon warm start: advance the input plan one block.
  Vector shift_warm() const {
    Vector z = z_warm_;
    const Index n_uf = tpl_.n_uf();
    if (T_f_ > 1) {
      z.head(n_uf - n_u_) = z_warm_.segment(n_u_, n_uf - n_u_);
      z.segment(n_uf - n_u_, n_u_) = z_warm_.segment(n_uf - n_u_, n_u_);
    }
    return z;
  }

  TrackingQpTemplate tpl_;
  ControlSpec spec_;
  Index n_u_, n_y_, T_p_, T_f_;
  QpSolver solver_;
  Vector z_warm_, dual_warm_;
  bool have_warm_ = false;
};

class PredictorController final : public TemplateController {
 public:
  PredictorController(const PredictorMatrices& pm, const ControlSpec& spec,
                      const QpSettings& qp)
      : TemplateController(TrackingQpTemplate(pm.E_uf, spec, pm.dims.n_u, pm.dims.n_y,
                                              pm.dims.T_f),
                           spec, pm.dims.n_u, pm.dims.n_y, pm.dims.T_p, pm.dims.T_f, qp),
        pm_(pm) {}

  ControlStep step(const Vector& u_past, const Vector& y_past_meas, const Vector& reference,
                   const Vector& plant_state) override {
    return solve_step(u_past, y_past_meas, reference, plant_state);
  }

 protected:
  Vector response_offset(const Vector& u_past, const Vector& y_past_meas,
                         const Vector&) override {
    if (u_past.size() != pm_.E_up.cols() || y_past_meas.size() != pm_.E_yp.cols()) {
      throw DimensionError("controller step: past buffers must hold T_p samples");
    }
    return pm_.E_up * u_past + pm_.E_yp * y_past_meas;
  }

 private:
  PredictorMatrices pm_;
};

class OracleController final : public TemplateController {
 public:
  OracleController(const StateSpace& ss, Index T_p, Index T_f, const ControlSpec& spec,
                   const QpSettings& qp)
      : TemplateController(make_template(ss, T_f, spec), spec, ss.n_u(), ss.n_y(), T_p, T_f,
                           qp),
        ss_(ss) {
    output_predictor_from_model(ss_, T_f, &Phi_, &gamma_unused_);
  }

  ControlStep step(const Vector& u_past, const Vector& y_past_meas, const Vector& reference,
                   const Vector& plant_state) override {
    return solve_step(u_past, y_past_meas, reference, plant_state);
  }

 protected:
  Vector response_offset(const Vector&, const Vector&, const Vector& plant_state) override {
    if (plant_state.size() != ss_.n_x()) {
      throw DimensionError("oracle controller: plant state of length n_x required");
    }
    return Phi_ * plant_state;
  }

 private:
  static TrackingQpTemplate make_template(const StateSpace& ss, Index T_f,
                                          const ControlSpec& spec) {
    Matrix Phi, Gamma;
    output_predictor_from_model(ss, T_f, &Phi, &Gamma);
    return TrackingQpTemplate(std::move(Gamma), spec, ss.n_u(), ss.n_y(), T_f);
  }

  StateSpace ss_;
  Matrix Phi_, gamma_unused_;
};

// DeePC decision vector: z = [g; u_f; y_f; sigma_y].
struct DeepcLayout {
  Index M, n_uf, n_yf, n_yp;
  Index g0() const { return 0; }
  Index uf0() const { return M; }
  Index yf0() const { return M + n_uf; }
  Index sy0() const { return M + n_uf + n_yf; }
  Index n() const { return M + n_uf + n_yf + n_yp; }
};

class DeepcController final : public RecedingHorizonController {
 public:
  DeepcController(const HankelSet& hankels, const ControlSpec& spec, const QpSettings& qp)
      : hankels_(hankels), spec_(spec) {
    const HorizonDims& d = hankels.dims;
    spec_.validate(d.n_u, d.n_y, d.T_f);
    if (!(spec_.deepc_lambda1 > 0.0)) {
      throw ConfigError("DeePC requires lambda1 > 0");
    }
    layout_ = DeepcLayout{d.M, d.rows_uf(), d.rows_yf(), d.rows_yp()};

    if (spec_.input_penalty == InputPenalty::delta) {
      D_ = difference_operator(d.n_u, d.T_f);
      R_eff_ = D_.transpose() * spec_.R * D_;
    } else {
      D_ = Matrix::Identity(layout_.n_uf, layout_.n_uf);
      R_eff_ = spec_.R;
    }

    H_ = Matrix::Zero(layout_.n(), layout_.n());
    H_.block(0, 0, d.M, d.M) = 2.0 * spec_.deepc_lambda2 * Matrix::Identity(d.M, d.M);
    H_.block(layout_.uf0(), layout_.uf0(), layout_.n_uf, layout_.n_uf) = 2.0 * R_eff_;
    H_.block(layout_.yf0(), layout_.yf0(), layout_.n_yf, layout_.n_yf) = 2.0 * spec_.P;
    H_.block(layout_.sy0(), layout_.sy0(), layout_.n_yp, layout_.n_yp) =
        2.0 * spec_.deepc_lambda1 * Matrix::Identity(layout_.n_yp, layout_.n_yp);

    const Index m_eq = d.rows_up() + d.rows_yp() + layout_.n_uf + layout_.n_yf;
    A_eq_ = Matrix::Zero(m_eq, layout_.n());
    Index row = 0;
    A_eq_.block(row, 0, d.rows_up(), d.M) = hankels.H_up;
    row += d.rows_up();
    A_eq_.block(row, 0, d.rows_yp(), d.M) = hankels.H_yp;
    A_eq_.block(row, layout_.sy0(), d.rows_yp(), layout_.n_yp) =
        Matrix::Identity(layout_.n_yp, layout_.n_yp);
    row += d.rows_yp();
    A_eq_.block(row, 0, layout_.n_uf, d.M) = hankels.H_uf;
    A_eq_.block(row, layout_.uf0(), layout_.n_uf, layout_.n_uf) =
        -Matrix::Identity(layout_.n_uf, layout_.n_uf);
    row += layout_.n_uf;
    A_eq_.block(row, 0, layout_.n_yf, d.M) = hankels.H_yf;
    A_eq_.block(row, layout_.yf0(), layout_.n_yf, layout_.n_yf) =
        -Matrix::Identity(layout_.n_yf, layout_.n_yf);

    lb_ = Vector::Constant(layout_.n(), -kInf);
    ub_ = Vector::Constant(layout_.n(), kInf);
    lb_.segment(layout_.uf0(), layout_.n_uf) = expand_box_side(spec_.u_box, true, d.n_u, d.T_f);
    ub_.segment(layout_.uf0(), layout_.n_uf) = expand_box_side(spec_.u_box, false, d.n_u, d.T_f);
    lb_.segment(layout_.yf0(), layout_.n_yf) = expand_box_side(spec_.y_box, true, d.n_y, d.T_f);
    ub_.segment(layout_.yf0(), layout_.n_yf) = expand_box_side(spec_.y_box, false, d.n_y, d.T_f);

    solver_ = std::make_unique<QpSolver>(H_, A_eq_, lb_, ub_, qp);
  }

  Index past_horizon() const override { return hankels_.dims.T_p; }
  Index future_horizon() const override { return hankels_.dims.T_f; }

  ControlStep step(const Vector& u_past, const Vector& y_past_meas, const Vector& reference,
                   const Vector&) override {
    const auto t0 = std::chrono::steady_clock::now();
    const HorizonDims& d = hankels_.dims;
    if (u_past.size() != d.rows_up() || y_past_meas.size() != d.rows_yp()) {
      throw DimensionError("DeePC step: past buffers must hold T_p samples");
    }
    const Vector ref =
        reference.size() > 0 ? reference : reference_or_zero(spec_, layout_.n_yf);
    const Vector u_prev = u_past.tail(d.n_u);

    Vector f = Vector::Zero(layout_.n());
    f.segment(layout_.yf0(), layout_.n_yf) = -2.0 * spec_.P * ref;
    if (spec_.input_penalty == InputPenalty::delta) {
      Vector t = Vector::Zero(layout_.n_uf);
      t.head(d.n_u) = u_prev;
      f.segment(layout_.uf0(), layout_.n_uf) = -2.0 * D_.transpose() * (spec_.R * t);
    }
    Vector b_eq(A_eq_.rows());
    b_eq << u_past, y_past_meas, Vector::Zero(layout_.n_uf), Vector::Zero(layout_.n_yf);

    QpSolution sol = have_warm_ ? solver_->solve(f, b_eq, shift_warm(), dual_warm_)
                                : solver_->solve(f, b_eq);
    if (sol.status == QpStatus::infeasible) {
      throw InfeasibleError("DeePC step: QP infeasible; output box likely excludes every "
                            "data-consistent trajectory");
    }
    z_warm_ = sol.z;
    dual_warm_ = sol.dual;
    have_warm_ = true;

    ControlStep step;
    step.u_f = sol.z.segment(layout_.uf0(), layout_.n_uf);
    step.u_apply = step.u_f.head(d.n_u);
    step.y_f_pred = sol.z.segment(layout_.yf0(), layout_.n_yf);
    step.iterations = sol.iterations;
    const Vector e = step.y_f_pred - ref;
    const Vector du = D_ * step.u_f - [&] {
      Vector t = Vector::Zero(layout_.n_uf);
      if (spec_.input_penalty == InputPenalty::delta) t.head(d.n_u) = u_prev;
      return t;
    }();
    const Vector g = sol.z.head(d.M);
    const Vector sy = sol.z.segment(layout_.sy0(), layout_.n_yp);
    step.cost = e.dot(spec_.P * e) + du.dot(spec_.R * du) +
                spec_.deepc_lambda1 * sy.squaredNorm() +
                spec_.deepc_lambda2 * g.squaredNorm();
    step.solve_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    return step;
  }

 private:
  Vector shift_warm() const {
    Vector z = z_warm_;
    const Index n_u = hankels_.dims.n_u;
    const Index n_y = hankels_.dims.n_y;
    if (hankels_.dims.T_f > 1) {
      auto shift = [](Vector& v, Index offset, Index block, Index count) {
        for (Index j = 0; j + 1 < count; ++j) {
          v.segment(offset + j * block, block) = v.segment(offset + (j + 1) * block, block);
        }
      };
      shift(z, layout_.uf0(), n_u, hankels_.dims.T_f);
      shift(z, layout_.yf0(), n_y, hankels_.dims.T_f);
    }
    return z;
  }

  HankelSet hankels_;
  ControlSpec spec_;
  DeepcLayout layout_;
  Matrix D_, R_eff_, H_, A_eq_;
  Vector lb_, ub_;
  std::unique_ptr<QpSolver> solver_;
  Vector z_warm_, dual_warm_;
  bool have_warm_ = false;
};

}  // namespace

void ControlSpec::validate(Index n_u, Index n_y, Index T_f) const {
  if (P.rows() != n_y * T_f) throw DimensionError("ControlSpec: P must be (n_y T_f)^2");
  if (R.rows() != n_u * T_f) throw DimensionError("ControlSpec: R must be (n_u T_f)^2");
  check_symmetric_spd(P, "P");
  check_symmetric_spd(R, "R");
  if (reference.size() != 0 && reference.size() != n_y * T_f) {
    throw DimensionError("ControlSpec: reference must have length n_y T_f (or be empty)");
  }
  auto check_box = [](const std::optional<BoxBounds>& box, Index n_ch, const char* name) {
    if (!box) return;
    if (box->lower.size() != n_ch || box->upper.size() != n_ch) {
      throw DimensionError(std::string("ControlSpec: ") + name +
                           " bounds must have one entry per channel");
    }
    for (Index i = 0; i < n_ch; ++i) {
      if (box->lower(i) > box->upper(i)) {
        throw ConfigError(std::string("ControlSpec: ") + name + " lower bound exceeds upper");
      }
    }
  };
  check_box(u_box, n_u, "u_box");
  check_box(y_box, n_y, "y_box");
  if (!(slack_weight >= 0.0)) throw ConfigError("ControlSpec: slack_weight must be >= 0");
  if (!(deepc_lambda1 > 0.0)) throw ConfigError("ControlSpec: deepc_lambda1 must be > 0");
  if (deepc_lambda2 < 0.0) throw ConfigError("ControlSpec: deepc_lambda2 must be >= 0");
}

ControlSpec make_control_spec(Index n_u, Index n_y, Index T_f, double p, double r) {
  ControlSpec spec;
  spec.P = p * Matrix::Identity(n_y * T_f, n_y * T_f);
  spec.R = r * Matrix::Identity(n_u * T_f, n_u * T_f);
  return spec;
}

QpProblem build_smmpc_qp(const PredictorMatrices& pm, const ControlSpec& spec,
                         const Vector& u_p, const Vector& y_p_meas) {
  if (u_p.size() != pm.E_up.cols() || y_p_meas.size() != pm.E_yp.cols()) {
    throw DimensionError("build_smmpc_qp: past windows must match the predictor horizons");
  }
  TrackingQpTemplate tpl(pm.E_uf, spec, pm.dims.n_u, pm.dims.n_y, pm.dims.T_f);
  const Vector c = pm.E_up * u_p + pm.E_yp * y_p_meas;
  const Vector ref = reference_or_zero(spec, pm.dims.rows_yf());
  return assemble(tpl, c, ref, u_p.tail(pm.dims.n_u));
}

QpProblem build_deepc_qp(const HankelSet& hankels, const ControlSpec& spec,
                         const Vector& u_p, const Vector& y_p_meas) {
  // Route the assembly through the controller to keep one source of truth.
  const HorizonDims& d = hankels.dims;
  if (u_p.size() != d.rows_up() || y_p_meas.size() != d.rows_yp()) {
    throw DimensionError("build_deepc_qp: past windows must hold T_p samples");
  }
  if (!(spec.deepc_lambda1 > 0.0)) throw ConfigError("build_deepc_qp: lambda1 must be > 0");

  ControlSpec local = spec;
  local.validate(d.n_u, d.n_y, d.T_f);
  const Index M = d.M;
  const Index n_uf = d.rows_uf();
  const Index n_yf = d.rows_yf();
  const Index n_yp = d.rows_yp();
  const Index n = M + n_uf + n_yf + n_yp;

  Matrix R_eff = local.R;
  Matrix D = Matrix::Identity(n_uf, n_uf);
  if (local.input_penalty == InputPenalty::delta) {
    D = difference_operator(d.n_u, d.T_f);
    R_eff = D.transpose() * local.R * D;
  }

  QpProblem qp;
  qp.H = Matrix::Zero(n, n);
  qp.H.block(0, 0, M, M) = 2.0 * local.deepc_lambda2 * Matrix::Identity(M, M);
  qp.H.block(M, M, n_uf, n_uf) = 2.0 * R_eff;
  qp.H.block(M + n_uf, M + n_uf, n_yf, n_yf) = 2.0 * local.P;
  qp.H.block(M + n_uf + n_yf, M + n_uf + n_yf, n_yp, n_yp) =
      2.0 * local.deepc_lambda1 * Matrix::Identity(n_yp, n_yp);

  qp.f = Vector::Zero(n);
  const Vector ref = reference_or_zero(local, n_yf);
  qp.f.segment(M + n_uf, n_yf) = -2.0 * local.P * ref;
  if (local.input_penalty == InputPenalty::delta) {
    Vector t = Vector::Zero(n_uf);
    t.head(d.n_u) = u_p.tail(d.n_u);
    qp.f.segment(M, n_uf) = -2.0 * D.transpose() * (local.R * t);
  }

  const Index m_eq = d.rows_up() + n_yp + n_uf + n_yf;
  qp.A_eq = Matrix::Zero(m_eq, n);
  Index row = 0;
  qp.A_eq.block(row, 0, d.rows_up(), M) = hankels.H_up;
  row += d.rows_up();
  qp.A_eq.block(row, 0, n_yp, M) = hankels.H_yp;
  qp.A_eq.block(row, M + n_uf + n_yf, n_yp, n_yp) = Matrix::Identity(n_yp, n_yp);
  row += n_yp;
  qp.A_eq.block(row, 0, n_uf, M) = hankels.H_uf;
  qp.A_eq.block(row, M, n_uf, n_uf) = -Matrix::Identity(n_uf, n_uf);
  row += n_uf;
  qp.A_eq.block(row, 0, n_yf, M) = hankels.H_yf;
  qp.A_eq.block(row, M + n_uf, n_yf, n_yf) = -Matrix::Identity(n_yf, n_yf);

  qp.b_eq = Vector(m_eq);
  qp.b_eq << u_p, y_p_meas, Vector::Zero(n_uf), Vector::Zero(n_yf);

  qp.lb = Vector::Constant(n, -kInf);
  qp.ub = Vector::Constant(n, kInf);
  qp.lb.segment(M, n_uf) = expand_box_side(local.u_box, true, d.n_u, d.T_f);
  qp.ub.segment(M, n_uf) = expand_box_side(local.u_box, false, d.n_u, d.T_f);
  qp.lb.segment(M + n_uf, n_yf) = expand_box_side(local.y_box, true, d.n_y, d.T_f);
  qp.ub.segment(M + n_uf, n_yf) = expand_box_side(local.y_box, false, d.n_y, d.T_f);
  return qp;
}

std::unique_ptr<RecedingHorizonController> make_predictor_controller(
    const PredictorMatrices& pm, const ControlSpec& spec, const QpSettings& qp) {
  return std::make_unique<PredictorController>(pm, spec, qp);
}

std::unique_ptr<RecedingHorizonController> make_deepc_controller(const HankelSet& hankels,
                                                                 const ControlSpec& spec,
                                                                 const QpSettings& qp) {
  return std::make_unique<DeepcController>(hankels, spec, qp);
}

std::unique_ptr<RecedingHorizonController> make_oracle_controller(const StateSpace& ss,
                                                                  Index T_p, Index T_f,
                                                                  const ControlSpec& spec,
                                                                  const QpSettings& qp) {
  return std::make_unique<OracleController>(ss, T_p, T_f, spec, qp);
}

void output_predictor_from_model(const StateSpace& ss, Index T_f, Matrix* Phi, Matrix* Gamma) {
  const Index n_y = ss.n_y();
  const Index n_u = ss.n_u();
  const Index n_x = ss.n_x();
  *Phi = Matrix::Zero(n_y * T_f, n_x);
  *Gamma = Matrix::Zero(n_y * T_f, n_u * T_f);

  // Markov parameters G_0 = D, G_k = C A^{k-1} B.
  std::vector<Matrix> markov(static_cast<size_t>(T_f));
  markov[0] = ss.D;
  Matrix Ak = Matrix::Identity(n_x, n_x);
  for (Index k = 1; k < T_f; ++k) {
    markov[static_cast<size_t>(k)] = ss.C * Ak * ss.B;
    Ak = ss.A * Ak;
  }
  Matrix Aj = Matrix::Identity(n_x, n_x);
  for (Index j = 0; j < T_f; ++j) {
    Phi->block(j * n_y, 0, n_y, n_x) = ss.C * Aj;
    Aj = ss.A * Aj;
    for (Index i = 0; i <= j; ++i) {
      Gamma->block(j * n_y, i * n_u, n_y, n_u) = markov[static_cast<size_t>(j - i)];
    }
  }
}

}  // namespace smmpc
