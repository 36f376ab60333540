#pragma once

// Geometric programming: monomial/posynomial algebra, standard form, the
// log-space convex transform and a barrier solver for it.
//
//   minimize f0(x)  s.t.  f_i(x) <= 1,  g_j(x) = 1,  lo <= x <= hi
//
// With x = exp(y) every posynomial becomes exp of a log-sum-exp of affine
// functions, so log f0, log f_i are convex in y and log g_j is affine.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mimopc/linalg.hpp"
#include "mimopc/types.hpp"

namespace mimopc::gp {

using VarId = int;

class GpTypeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Monomial {
  double coeff = 1.0;
  std::map<VarId, double> exponents;  // zero exponents are never stored

  Monomial() = default;
  Monomial(double c) : coeff(c) {}  // NOLINT: constants promote implicitly
  Monomial(double c, std::map<VarId, double> e) : coeff(c), exponents(std::move(e)) { prune(); }

  static Monomial var(VarId id, double exponent = 1.0) { return Monomial(1.0, {{id, exponent}}); }

  void prune() { std::erase_if(exponents, [](const auto& kv) { return kv.second == 0.0; }); }

  double eval(const std::vector<double>& x) const {
    double v = coeff;
    for (const auto& [id, e] : exponents) v *= std::pow(x.at(id), e);
    return v;
  }

  void validate() const {
    if (!(coeff > 0.0) || !std::isfinite(coeff))
      throw GpTypeError("monomial coefficient must be positive and finite");
    for (const auto& [id, e] : exponents)
      if (!std::isfinite(e) || id < 0) throw GpTypeError("monomial exponent must be finite");
  }
};

inline Monomial operator*(const Monomial& a, const Monomial& b) {
  Monomial r(a.coeff * b.coeff, a.exponents);
  for (const auto& [id, e] : b.exponents) r.exponents[id] += e;
  r.prune();
  return r;
}

inline Monomial operator/(const Monomial& a, const Monomial& b) {
  Monomial r(a.coeff / b.coeff, a.exponents);
  for (const auto& [id, e] : b.exponents) r.exponents[id] -= e;
  r.prune();
  return r;
}

struct Posynomial {
  std::vector<Monomial> terms;

  Posynomial() = default;
  Posynomial(Monomial m) : terms{std::move(m)} {}  // NOLINT
  explicit Posynomial(std::vector<Monomial> t) : terms(std::move(t)) { merge(); }

  /// Combines terms with identical exponent vectors.
  void merge() {
    std::map<std::map<VarId, double>, double> acc;
    std::vector<std::map<VarId, double>> order;
    for (auto& t : terms) {
      t.prune();
      auto [it, inserted] = acc.try_emplace(t.exponents, 0.0);
      if (inserted) order.push_back(t.exponents);
      it->second += t.coeff;
    }
    terms.clear();
    for (auto& e : order) terms.emplace_back(acc[e], std::move(e));
  }

  bool is_monomial() const { return terms.size() == 1; }

  double eval(const std::vector<double>& x) const {
    double v = 0.0;
    for (const auto& t : terms) v += t.eval(x);
    return v;
  }

  void validate() const {
    if (terms.empty()) throw GpTypeError("posynomial needs at least one term");
    for (const auto& t : terms) t.validate();
  }
};

inline Posynomial operator+(const Posynomial& a, const Posynomial& b) {
  std::vector<Monomial> t = a.terms;
  t.insert(t.end(), b.terms.begin(), b.terms.end());
  return Posynomial(std::move(t));
}

inline Posynomial operator*(const Posynomial& a, const Posynomial& b) {
  std::vector<Monomial> t;
  t.reserve(a.terms.size() * b.terms.size());
  for (const auto& x : a.terms)
    for (const auto& y : b.terms) t.push_back(x * y);
  return Posynomial(std::move(t));
}

inline Posynomial operator/(const Posynomial& a, const Monomial& b) {
  std::vector<Monomial> t;
  t.reserve(a.terms.size());
  for (const auto& x : a.terms) t.push_back(x / b);
  return Posynomial(std::move(t));
}

/// Posynomial division; only defined when the divisor is a single monomial.
inline Posynomial operator/(const Posynomial& a, const Posynomial& b) {
  if (!b.is_monomial()) throw GpTypeError("cannot divide by a posynomial with more than one term");
  return a / b.terms.front();
}

struct Variable {
  std::string name;
  double lower = 0.0;  // 0 means unbounded below
  double upper = std::numeric_limits<double>::infinity();
};

struct StandardForm {
  Posynomial objective;
  std::vector<Posynomial> inequalities;  // each <= 1
  std::vector<Monomial> equalities;      // each == 1
  std::vector<Variable> variables;

  VarId add_variable(std::string name, double lower = 0.0,
                     double upper = std::numeric_limits<double>::infinity()) {
    variables.push_back({std::move(name), lower, upper});
    return static_cast<VarId>(variables.size() - 1);
  }

  int size() const { return static_cast<int>(variables.size()); }

  void validate() const {
    const int n = size();
    auto check_ids = [n](const Monomial& m) {
      for (const auto& [id, e] : m.exponents)
        if (id >= n) throw GpTypeError("monomial references unregistered variable " + std::to_string(id));
    };
    objective.validate();
    for (const auto& t : objective.terms) check_ids(t);
    for (const auto& p : inequalities) {
      p.validate();
      for (const auto& t : p.terms) check_ids(t);
    }
    for (const auto& m : equalities) {
      m.validate();
      check_ids(m);
    }
    for (const auto& v : variables) {
      if (!(v.lower >= 0.0) || !(v.upper > 0.0) || !(v.lower < v.upper))
        throw GpTypeError("variable '" + v.name + "' has invalid bounds");
    }
  }
};

// ---------------------------------------------------------------------------
// Log-space form

/// log(sum_t exp(a_t . y + b_t)) with sparse a_t.
struct LogSumExp {
  struct Term {
    std::vector<std::pair<int, double>> a;
    double b = 0.0;
  };
  std::vector<Term> terms;

  double affine(const Term& t, const Vector& y) const {
    double s = t.b;
    for (const auto& [i, v] : t.a) s += v * y[i];
    return s;
  }

  double value(const Vector& y) const {
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> z(terms.size());
    for (std::size_t t = 0; t < terms.size(); ++t) mx = std::max(mx, z[t] = affine(terms[t], y));
    double s = 0.0;
    for (double zt : z) s += std::exp(zt - mx);
    return mx + std::log(s);
  }

  /// Value; gradient written to grad (overwritten); when hess is non-null,
  /// weight * Hessian is accumulated into it.
  double evaluate(const Vector& y, Vector& grad, Matrix* hess = nullptr, double weight = 1.0) const {
    const std::size_t nt = terms.size();
    std::vector<double> w(nt);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < nt; ++t) mx = std::max(mx, w[t] = affine(terms[t], y));
    double s = 0.0;
    for (auto& wt : w) s += (wt = std::exp(wt - mx));
    for (auto& wt : w) wt /= s;
    grad.setZero(y.size());
    for (std::size_t t = 0; t < nt; ++t)
      for (const auto& [i, v] : terms[t].a) grad[i] += w[t] * v;
    if (hess != nullptr && nt > 1) {
      // sum_t w_t a_t a_t^T - g g^T
      for (std::size_t t = 0; t < nt; ++t)
        for (const auto& [i, vi] : terms[t].a)
          for (const auto& [j, vj] : terms[t].a) (*hess)(i, j) += weight * w[t] * vi * vj;
      std::vector<int> support;
      for (Eigen::Index i = 0; i < grad.size(); ++i)
        if (grad[i] != 0.0) support.push_back(static_cast<int>(i));
      for (int i : support)
        for (int j : support) (*hess)(i, j) -= weight * grad[i] * grad[j];
    }
    return mx + std::log(s);
  }

  bool is_affine() const { return terms.size() == 1; }
};

struct ConvexProgram {
  int n = 0;
  LogSumExp objective;
  std::vector<LogSumExp> inequalities;  // each <= 0
  Matrix eq_a;                          // eq_a * y == eq_b
  Vector eq_b;
};

namespace detail {

inline LogSumExp::Term log_term(const Monomial& m) {
  LogSumExp::Term t;
  t.b = std::log(m.coeff);
  for (const auto& [id, e] : m.exponents) t.a.emplace_back(id, e);
  return t;
}

inline LogSumExp log_posynomial(const Posynomial& p) {
  LogSumExp f;
  for (const auto& m : p.terms) f.terms.push_back(log_term(m));
  return f;
}

}  // namespace detail

/// Substitutes x = exp(y). Box bounds become single-term (affine) inequalities.
inline ConvexProgram to_convex(const StandardForm& gp) {
  gp.validate();
  ConvexProgram cp;
  cp.n = gp.size();
  cp.objective = detail::log_posynomial(gp.objective);
  for (const auto& p : gp.inequalities) cp.inequalities.push_back(detail::log_posynomial(p));
  for (int i = 0; i < cp.n; ++i) {
    const auto& v = gp.variables[i];
    if (v.lower > 0.0) cp.inequalities.push_back({{{{{i, -1.0}}, std::log(v.lower)}}});
    if (std::isfinite(v.upper)) cp.inequalities.push_back({{{{{i, 1.0}}, -std::log(v.upper)}}});
  }
  const auto ne = static_cast<Eigen::Index>(gp.equalities.size());
  cp.eq_a = Matrix::Zero(ne, cp.n);
  cp.eq_b = Vector::Zero(ne);
  for (Eigen::Index r = 0; r < ne; ++r) {
    const auto& m = gp.equalities[r];
    for (const auto& [id, e] : m.exponents) cp.eq_a(r, id) = e;
    cp.eq_b[r] = -std::log(m.coeff);
  }
  return cp;
}

// ---------------------------------------------------------------------------
// Barrier solver

enum class Status { Optimal, Infeasible, NonConverged };

inline std::string_view to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::NonConverged: return "nonconverged";
  }
  return "unknown";
}

struct Result {
  Status status = Status::NonConverged;
  std::vector<double> x;
  double cost = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::infinity();  // bound on log-objective suboptimality
  int newton_steps = 0;
};

struct SolverOptions {
  double tol = 1e-8;
  double t0 = 1.0;
  double mu = 20.0;
  int max_newton_steps = 5000;
};

namespace detail {

struct BarrierRun {
  Vector y;
  bool converged = false;
  bool stopped_early = false;
  double gap = std::numeric_limits<double>::infinity();
  int steps = 0;
};

inline bool strictly_feasible(const ConvexProgram& cp, const Vector& y) {
  for (const auto& f : cp.inequalities) {
    const double v = f.value(y);
    if (!(v < 0.0)) return false;
  }
  return true;
}

inline double barrier_value(const ConvexProgram& cp, const Vector& y, double t) {
  double phi = t * cp.objective.value(y);
  for (const auto& f : cp.inequalities) {
    const double v = f.value(y);
    if (!(v < 0.0)) return std::numeric_limits<double>::infinity();
    phi -= std::log(-v);
  }
  return std::isfinite(phi) ? phi : std::numeric_limits<double>::infinity();
}

/// Orthonormal basis of {d : eq_a d = 0}; empty columns when there are no equalities.
inline Matrix null_space(const Matrix& eq_a, Eigen::Index n) {
  if (eq_a.rows() == 0) return Matrix(n, 0);
  Eigen::JacobiSVD<Matrix> svd(eq_a, Eigen::ComputeFullV);
  svd.setThreshold(1e-12);
  const Eigen::Index r = svd.rank();
  return svd.matrixV().rightCols(n - r);
}

/// Newton direction for the barrier subproblem restricted to y + range(z).
/// z with zero columns means unconstrained.
inline Vector newton_direction(const Matrix& h, const Vector& g, const Matrix& z, bool constrained) {
  const Eigen::Index n = h.rows();
  const double ridge = 1e-14 * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
  if (!constrained) {
    Eigen::LDLT<Matrix> ldlt(h + ridge * Matrix::Identity(n, n));
    return ldlt.solve(-g);
  }
  if (z.cols() == 0) return Vector::Zero(n);  // equalities pin every coordinate
  const Matrix hz = z.transpose() * h * z;
  Eigen::LDLT<Matrix> ldlt(hz + ridge * Matrix::Identity(z.cols(), z.cols()));
  return z * ldlt.solve(-(z.transpose() * g));
}

/// Barrier method from a strictly feasible start with eq_a y = eq_b.
/// stop(y) lets phase one exit as soon as a usable point appears.
template <class StopFn>
BarrierRun barrier(const ConvexProgram& cp, Vector y, const SolverOptions& opt, StopFn stop) {
  BarrierRun run;
  const double m = static_cast<double>(cp.inequalities.size());
  double t = m == 0.0 ? 1.0 : opt.t0;
  const Eigen::Index n = cp.n;
  Vector g(n), gi(n);
  Matrix h(n, n);
  const bool constrained = cp.eq_a.rows() > 0;
  const Matrix z = null_space(cp.eq_a, n);

  for (int outer = 0; outer < 200; ++outer) {
    for (int inner = 0; inner < 200; ++inner) {
      if (run.steps >= opt.max_newton_steps) {
        run.y = y;
        return run;
      }
      h.setZero();
      cp.objective.evaluate(y, g, &h, t);
      g *= t;
      for (const auto& f : cp.inequalities) {
        // -log(-F): gradient dF / (-F), Hessian d2F / (-F) + dF dF^T / F^2.
        const double v = f.value(y);
        f.evaluate(y, gi, &h, 1.0 / (-v));
        g += gi / (-v);
        h.noalias() += (gi * gi.transpose()) / (v * v);
      }
      const Vector dy = newton_direction(h, g, z, constrained);
      const double decrement = -g.dot(dy);
      if (!(decrement > 2e-12 * std::max(1.0, t))) break;

      const double phi0 = barrier_value(cp, y, t);
      double step = 1.0;
      Vector trial = y + dy;
      double phi = barrier_value(cp, trial, t);
      while (!(phi <= phi0 - 0.25 * step * decrement) && step > 1e-20) {
        step *= 0.5;
        trial = y + step * dy;
        phi = barrier_value(cp, trial, t);
      }
      ++run.steps;
      if (step <= 1e-20) break;  // stalled at working precision
      y = trial;
      if (stop(y)) {
        run.y = y;
        run.stopped_early = true;
        return run;
      }
    }
    run.gap = m / t;
    if (run.gap <= opt.tol) {
      run.converged = true;
      run.y = y;
      return run;
    }
    t *= opt.mu;
  }
  run.y = y;
  return run;
}

// Phase one: minimize s subject to F_i(y) - s <= 0 and s >= -1 over (y, s).
inline ConvexProgram phase_one_program(const ConvexProgram& cp) {
  ConvexProgram p1;
  p1.n = cp.n + 1;
  p1.objective.terms.push_back({{{cp.n, 1.0}}, 0.0});
  for (const auto& f : cp.inequalities) {
    LogSumExp g = f;
    for (auto& t : g.terms) t.a.emplace_back(cp.n, -1.0);
    p1.inequalities.push_back(std::move(g));
  }
  // s >= -1 keeps phase one bounded; a linear objective over an affine
  // constraint otherwise sends Newton along a flat direction.
  p1.inequalities.push_back(LogSumExp{{{{{cp.n, -1.0}}, -1.0}}});
  p1.eq_a = Matrix::Zero(cp.eq_a.rows(), p1.n);
  p1.eq_a.leftCols(cp.n) = cp.eq_a;
  p1.eq_b = cp.eq_b;
  return p1;
}

}  // namespace detail

/// Solves a convex program produced by to_convex. Returns y (log variables) in
/// Result::x untransformed; use solve() for the GP-level answer.
inline Result solve_convex(const ConvexProgram& cp, const SolverOptions& opt = {}) {
  Result res;
  Vector y = Vector::Zero(cp.n);
  if (cp.eq_a.rows() > 0) {
    y = cp.eq_a.completeOrthogonalDecomposition().solve(cp.eq_b);
    if ((cp.eq_a * y - cp.eq_b).norm() > 1e-9 * std::max(1.0, cp.eq_b.norm())) {
      res.status = Status::Infeasible;
      return res;
    }
  }

  if (!detail::strictly_feasible(cp, y)) {
    const ConvexProgram p1 = detail::phase_one_program(cp);
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& f : cp.inequalities) worst = std::max(worst, f.value(y));
    Vector z(p1.n);
    z.head(cp.n) = y;
    z[cp.n] = worst + 1.0;
    SolverOptions o1 = opt;
    o1.tol = 1e-10;
    const auto run1 = detail::barrier(p1, z, o1, [&](const Vector& w) {
      return w[cp.n] < -1e-3 || detail::strictly_feasible(cp, w.head(cp.n));
    });
    res.newton_steps += run1.steps;
    y = run1.y.head(cp.n);
    if (!detail::strictly_feasible(cp, y)) {
      res.status = run1.converged || run1.stopped_early ? Status::Infeasible : Status::NonConverged;
      return res;
    }
  }

  SolverOptions o2 = opt;
  o2.max_newton_steps = std::max(1, opt.max_newton_steps - res.newton_steps);
  const auto run = detail::barrier(cp, y, o2, [](const Vector&) { return false; });
  res.newton_steps += run.steps;
  res.gap = run.gap;
  res.x.assign(run.y.data(), run.y.data() + run.y.size());
  res.cost = cp.objective.value(run.y);
  res.status = run.converged ? Status::Optimal : Status::NonConverged;
  return res;
}

/// Solves the GP. On success x holds the positive optimum and cost the
/// objective posynomial evaluated there.
inline Result solve(const StandardForm& gp, const SolverOptions& opt = {}) {
  const ConvexProgram cp = to_convex(gp);
  Result res = solve_convex(cp, opt);
  if (res.x.empty()) return res;
  for (double& v : res.x) v = std::exp(v);
  res.cost = gp.objective.eval(res.x);
  return res;
}

inline Result solve(const StandardForm& gp, double tol) {
  SolverOptions opt;
  opt.tol = tol;
  return solve(gp, opt);
}

/// Largest value of (f_i(x) - 1) and |g_j(x) - 1| at x; <= tol means feasible.
inline double max_violation(const StandardForm& gp, const std::vector<double>& x) {
  double worst = 0.0;
  for (const auto& p : gp.inequalities) worst = std::max(worst, p.eval(x) - 1.0);
  for (const auto& m : gp.equalities) worst = std::max(worst, std::abs(m.eval(x) - 1.0));
  for (int i = 0; i < gp.size(); ++i) {
    const auto& v = gp.variables[i];
    if (v.lower > 0.0) worst = std::max(worst, v.lower / x[i] - 1.0);
    if (std::isfinite(v.upper)) worst = std::max(worst, x[i] / v.upper - 1.0);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Text dump
//
//   var <id> <name> <lower|-> <upper|->
//   objective | ineq | eq        starts a new block
//   <coeff> <id>:<exp> ...       one monomial per line
//
// '#' starts a comment. An eq block holds exactly one monomial.

inline std::string dump(const StandardForm& gp) {
  std::ostringstream os;
  os << std::setprecision(17);
  auto bound = [&os](double v, bool present) {
    if (present) os << v; else os << '-';
  };
  auto monomial = [&os](const Monomial& m) {
    os << m.coeff;
    for (const auto& [id, e] : m.exponents) os << ' ' << id << ':' << e;
    os << '\n';
  };
  os << "# gp standard form\n";
  for (int i = 0; i < gp.size(); ++i) {
    const auto& v = gp.variables[i];
    os << "var " << i << ' ' << (v.name.empty() ? "x" + std::to_string(i) : v.name) << ' ';
    bound(v.lower, v.lower > 0.0);
    os << ' ';
    bound(v.upper, std::isfinite(v.upper));
    os << '\n';
  }
  os << "objective\n";
  for (const auto& t : gp.objective.terms) monomial(t);
  for (const auto& p : gp.inequalities) {
    os << "ineq\n";
    for (const auto& t : p.terms) monomial(t);
  }
  for (const auto& m : gp.equalities) {
    os << "eq\n";
    monomial(m);
  }
  return os.str();
}

inline StandardForm parse(std::string_view text) {
  StandardForm gp;
  enum class Block { None, Objective, Ineq, Eq } block = Block::None;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  int eq_terms = 0;
  auto fail = [&lineno](const std::string& what) {
    throw ConfigError("gp dump line " + std::to_string(lineno) + ": " + what);
  };
  auto number = [&fail](const std::string& tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      fail("bad number '" + tok + "'");
    }
    if (used != tok.size()) fail("bad number '" + tok + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string head;
    if (!(ls >> head)) continue;
    if (head == "var") {
      std::string id, name, lo, hi;
      if (!(ls >> id >> name >> lo >> hi)) fail("var needs: id name lower upper");
      if (static_cast<int>(number(id)) != gp.size()) fail("var ids must be consecutive from 0");
      gp.add_variable(name, lo == "-" ? 0.0 : number(lo),
                      hi == "-" ? std::numeric_limits<double>::infinity() : number(hi));
    } else if (head == "objective") {
      block = Block::Objective;
    } else if (head == "ineq") {
      block = Block::Ineq;
      gp.inequalities.emplace_back();
    } else if (head == "eq") {
      if (block == Block::Eq && eq_terms != 1) fail("eq block needs exactly one monomial");
      block = Block::Eq;
      eq_terms = 0;
    } else {
      Monomial m(number(head));
      std::string tok;
      while (ls >> tok) {
        const auto colon = tok.find(':');
        if (colon == std::string::npos) fail("expected id:exponent, got '" + tok + "'");
        m.exponents[static_cast<VarId>(number(tok.substr(0, colon)))] += number(tok.substr(colon + 1));
      }
      m.prune();
      switch (block) {
        case Block::None: fail("monomial outside a block");
        case Block::Objective: gp.objective.terms.push_back(std::move(m)); break;
        case Block::Ineq: gp.inequalities.back().terms.push_back(std::move(m)); break;
        case Block::Eq:
          if (++eq_terms > 1) fail("eq block needs exactly one monomial");
          gp.equalities.push_back(std::move(m));
          break;
      }
    }
  }
  if (block == Block::Eq && eq_terms != 1) fail("eq block needs exactly one monomial");
  try {
    gp.validate();
  } catch (const GpTypeError& e) {
    throw ConfigError(std::string("gp dump: ") + e.what());
  }
  return gp;
}

}  // namespace mimopc::gp
