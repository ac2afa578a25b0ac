#pragma once

// Link-function families h(x, theta) mapping a covariate and a component
// parameter to a kernel parameter, with gradients and Hessians in theta.
//
// All variants are either linear in theta (polynomial / trigonometric /
// constant / sums of those) or a smooth scalar map of a linear score
// (log-linear, sigmoid-linear, power-product in log scale).  The inner
// feature map is exposed so the GLM M-steps can work on the design matrix.

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace regmix {

enum class LinkKind {
  kPolynomial,
  kTrigPolynomial,
  kLogLinear,
  kSigmoidLinear,
  kIdentityConstant,
  kPowerProduct,
  kSum
};

enum class OuterMap { kIdentity, kExp, kSigmoid };

inline double sigmoid(double s) { return 1.0 / (1.0 + std::exp(-s)); }

class Link {
 public:
  Link() = default;

  static Link polynomial(int degree, int p) {
    if (degree < 0 || p < 1)
      throw std::invalid_argument("polynomial: need degree >= 0, p >= 1");
    Link l;
    l.kind_ = LinkKind::kPolynomial;
    l.degree_ = degree;
    l.p_ = p;
    l.exponents_ = monomial_exponents(degree, p);
    return l;
  }

  // Restricted to p = 1: a0 + sum b_n sin(nx) + sum c_n cos(nx).
  static Link trig_polynomial(int degree) {
    if (degree < 1)
      throw std::invalid_argument("trig_polynomial: need degree >= 1");
    Link l;
    l.kind_ = LinkKind::kTrigPolynomial;
    l.degree_ = degree;
    l.p_ = 1;
    return l;
  }

  // exp(theta_0 + theta_bar' x), p covariates.
  static Link log_linear(int p) {
    if (p < 1) throw std::invalid_argument("log_linear: need p >= 1");
    Link l;
    l.kind_ = LinkKind::kLogLinear;
    l.p_ = p;
    return l;
  }

  static Link sigmoid_linear(int p, bool intercept = false) {
    if (p < 1) throw std::invalid_argument("sigmoid_linear: need p >= 1");
    Link l;
    l.kind_ = LinkKind::kSigmoidLinear;
    l.p_ = p;
    l.intercept_ = intercept;
    return l;
  }

  static Link identity_constant() {
    Link l;
    l.kind_ = LinkKind::kIdentityConstant;
    l.p_ = 0;
    return l;
  }

  // theta_0 * F1^theta_1 * F2^theta_2 over positive covariates.  theta_0 is
  // held in log scale internally; log_scale_theta0 records whether supplied
  // parameter vectors carry log(theta_0) (default) or theta_0 itself.
  static Link power_product(bool log_scale_theta0 = true) {
    Link l;
    l.kind_ = LinkKind::kPowerProduct;
    l.p_ = 2;
    l.log_theta0_ = log_scale_theta0;
    return l;
  }

  static Link sum(Link a, Link b) {
    if (a.covariate_dim() != b.covariate_dim())
      throw std::invalid_argument("sum link: covariate dims differ");
    Link l;
    l.kind_ = LinkKind::kSum;
    l.p_ = a.p_;
    l.terms_.push_back(std::make_shared<Link>(std::move(a)));
    l.terms_.push_back(std::make_shared<Link>(std::move(b)));
    return l;
  }

  LinkKind kind() const { return kind_; }
  int degree() const { return degree_; }
  bool intercept() const { return intercept_; }
  bool theta0_log_scale() const { return log_theta0_; }
  const std::vector<std::shared_ptr<Link>>& terms() const { return terms_; }

  std::size_t covariate_dim() const { return p_; }

  std::size_t param_dim() const {
    switch (kind_) {
      case LinkKind::kPolynomial: return exponents_.size();
      case LinkKind::kTrigPolynomial: return 2 * degree_ + 1;
      case LinkKind::kLogLinear: return p_ + 1;
      case LinkKind::kSigmoidLinear: return p_ + (intercept_ ? 1 : 0);
      case LinkKind::kIdentityConstant: return 1;
      case LinkKind::kPowerProduct: return 3;
      case LinkKind::kSum:
        return terms_[0]->param_dim() + terms_[1]->param_dim();
    }
    return 0;
  }

  bool has_linear_inner() const {
    switch (kind_) {
      case LinkKind::kPolynomial:
      case LinkKind::kTrigPolynomial:
      case LinkKind::kLogLinear:
      case LinkKind::kSigmoidLinear:
      case LinkKind::kIdentityConstant:
        return true;
      case LinkKind::kPowerProduct:
        return log_theta0_;
      case LinkKind::kSum:
        return terms_[0]->has_linear_inner() &&
               terms_[0]->outer() == OuterMap::kIdentity &&
               terms_[1]->has_linear_inner() &&
               terms_[1]->outer() == OuterMap::kIdentity;
    }
    return false;
  }

  OuterMap outer() const {
    switch (kind_) {
      case LinkKind::kLogLinear: return OuterMap::kExp;
      case LinkKind::kSigmoidLinear: return OuterMap::kSigmoid;
      case LinkKind::kPowerProduct: return OuterMap::kExp;
      default: return OuterMap::kIdentity;
    }
  }

  // Feature vector of the inner linear score theta' f(x).
  Eigen::VectorXd inner_features(const std::vector<double>& x) const {
    check_x(x);
    Eigen::VectorXd f(param_dim());
    switch (kind_) {
      case LinkKind::kPolynomial: {
        for (std::size_t m = 0; m < exponents_.size(); ++m) {
          double v = 1.0;
          for (int c = 0; c < p_; ++c)
            for (int e = 0; e < exponents_[m][c]; ++e) v *= x[c];
          f(m) = v;
        }
        return f;
      }
      case LinkKind::kTrigPolynomial: {
        f(0) = 1.0;
        for (int n = 1; n <= degree_; ++n) f(n) = std::sin(n * x[0]);
        for (int n = 1; n <= degree_; ++n)
          f(degree_ + n) = std::cos(n * x[0]);
        return f;
      }
      case LinkKind::kLogLinear: {
        f(0) = 1.0;
        for (int c = 0; c < p_; ++c) f(c + 1) = x[c];
        return f;
      }
      case LinkKind::kSigmoidLinear: {
        int off = 0;
        if (intercept_) f(off++) = 1.0;
        for (int c = 0; c < p_; ++c) f(off + c) = x[c];
        return f;
      }
      case LinkKind::kIdentityConstant:
        f(0) = 1.0;
        return f;
      case LinkKind::kPowerProduct: {
        if (!log_theta0_)
          throw std::invalid_argument(
              "power_product: natural-scale theta0 has no linear score");
        f(0) = 1.0;
        f(1) = std::log(x[0]);
        f(2) = std::log(x[1]);
        return f;
      }
      case LinkKind::kSum: {
        const Eigen::VectorXd fa = terms_[0]->inner_features(x);
        const Eigen::VectorXd fb = terms_[1]->inner_features(x);
        f << fa, fb;
        return f;
      }
    }
    return f;
  }

  double eval(const std::vector<double>& x,
              const std::vector<double>& theta) const {
    check_theta(theta);
    if (kind_ == LinkKind::kSum) {
      const auto [ta, tb] = split_theta(theta);
      return terms_[0]->eval(x, ta) + terms_[1]->eval(x, tb);
    }
    if (kind_ == LinkKind::kPowerProduct && !log_theta0_) {
      check_x(x);
      if (!(theta[0] > 0.0))
        throw std::invalid_argument("power_product: theta0 must be > 0");
      return theta[0] *
             std::exp(theta[1] * std::log(x[0]) + theta[2] * std::log(x[1]));
    }
    const Eigen::VectorXd f = inner_features(x);
    double s = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) s += theta[i] * f(i);
    switch (outer()) {
      case OuterMap::kIdentity: return s;
      case OuterMap::kExp: return std::exp(s);
      case OuterMap::kSigmoid: return sigmoid(s);
    }
    return s;
  }

  Eigen::VectorXd grad_theta(const std::vector<double>& x,
                             const std::vector<double>& theta) const {
    check_theta(theta);
    if (kind_ == LinkKind::kSum) {
      const auto [ta, tb] = split_theta(theta);
      Eigen::VectorXd g(param_dim());
      g << terms_[0]->grad_theta(x, ta), terms_[1]->grad_theta(x, tb);
      return g;
    }
    if (kind_ == LinkKind::kPowerProduct && !log_theta0_) {
      const double h = eval(x, theta);
      Eigen::VectorXd g(3);
      g << h / theta[0], h * std::log(x[0]), h * std::log(x[1]);
      return g;
    }
    const Eigen::VectorXd f = inner_features(x);
    double s = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) s += theta[i] * f(i);
    switch (outer()) {
      case OuterMap::kIdentity: return f;
      case OuterMap::kExp: return std::exp(s) * f;
      case OuterMap::kSigmoid: {
        const double sg = sigmoid(s);
        return sg * (1.0 - sg) * f;
      }
    }
    return f;
  }

  Eigen::MatrixXd hess_theta(const std::vector<double>& x,
                             const std::vector<double>& theta) const {
    check_theta(theta);
    const std::size_t d = param_dim();
    if (kind_ == LinkKind::kSum) {
      const auto [ta, tb] = split_theta(theta);
      Eigen::MatrixXd hmat = Eigen::MatrixXd::Zero(d, d);
      const std::size_t da = terms_[0]->param_dim();
      hmat.topLeftCorner(da, da) = terms_[0]->hess_theta(x, ta);
      hmat.bottomRightCorner(d - da, d - da) = terms_[1]->hess_theta(x, tb);
      return hmat;
    }
    if (kind_ == LinkKind::kPowerProduct && !log_theta0_) {
      const double h = eval(x, theta);
      const double l1 = std::log(x[0]), l2 = std::log(x[1]);
      Eigen::MatrixXd hmat(3, 3);
      hmat << 0.0, h * l1 / theta[0], h * l2 / theta[0],
              h * l1 / theta[0], h * l1 * l1, h * l1 * l2,
              h * l2 / theta[0], h * l1 * l2, h * l2 * l2;
      return hmat;
    }
    const Eigen::VectorXd f = inner_features(x);
    double s = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) s += theta[i] * f(i);
    switch (outer()) {
      case OuterMap::kIdentity: return Eigen::MatrixXd::Zero(d, d);
      case OuterMap::kExp: return std::exp(s) * (f * f.transpose());
      case OuterMap::kSigmoid: {
        const double sg = sigmoid(s);
        return sg * (1.0 - sg) * (1.0 - 2.0 * sg) * (f * f.transpose());
      }
    }
    return Eigen::MatrixXd::Zero(d, d);
  }

 private:
  static std::vector<std::vector<int>> monomial_exponents(int degree, int p) {
    // Graded lexicographic enumeration of exponent tuples with sum <= degree.
    std::vector<std::vector<int>> out;
    std::vector<int> cur(p, 0);
    for (int total = 0; total <= degree; ++total) {
      std::function<void(int, int)> rec = [&](int pos, int rem) {
        if (pos == p - 1) {
          cur[pos] = rem;
          out.push_back(cur);
          return;
        }
        for (int e = rem; e >= 0; --e) {
          cur[pos] = e;
          rec(pos + 1, rem - e);
        }
      };
      rec(0, total);
    }
    return out;
  }

  void check_x(const std::vector<double>& x) const {
    if (kind_ == LinkKind::kIdentityConstant) return;
    if (x.size() != static_cast<std::size_t>(p_))
      throw std::invalid_argument("link: covariate dimension mismatch");
    if (kind_ == LinkKind::kPowerProduct)
      for (double v : x)
        if (!(v > 0.0))
          throw std::invalid_argument(
              "power_product: covariates must be > 0");
  }

  void check_theta(const std::vector<double>& theta) const {
    if (theta.size() != param_dim())
      throw std::invalid_argument("link: parameter dimension mismatch");
  }

  std::pair<std::vector<double>, std::vector<double>> split_theta(
      const std::vector<double>& theta) const {
    const std::size_t da = terms_[0]->param_dim();
    return {std::vector<double>(theta.begin(), theta.begin() + da),
            std::vector<double>(theta.begin() + da, theta.end())};
  }

  LinkKind kind_ = LinkKind::kIdentityConstant;
  int degree_ = 0;
  int p_ = 0;
  bool intercept_ = false;
  bool log_theta0_ = true;
  std::vector<std::vector<int>> exponents_;
  std::vector<std::shared_ptr<Link>> terms_;
};

// Empirical uniform-Lipschitz witness: max over an x-grid and random theta
// pairs of |h(x,theta) - h(x,theta')| / ||theta - theta'||.
template <typename Rng>
double lipschitz_witness(const Link& link, const std::vector<double>& x_lo,
                         const std::vector<double>& x_hi,
                         const std::vector<double>& theta_lo,
                         const std::vector<double>& theta_hi, int x_grid,
                         int pairs, Rng& rng) {
  const std::size_t p = link.covariate_dim();
  const std::size_t d = link.param_dim();
  double worst = 0.0;
  for (int pair = 0; pair < pairs; ++pair) {
    std::vector<double> ta(d), tb(d);
    double norm2 = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      ta[c] = rng.uniform(theta_lo[c], theta_hi[c]);
      tb[c] = rng.uniform(theta_lo[c], theta_hi[c]);
      norm2 += (ta[c] - tb[c]) * (ta[c] - tb[c]);
    }
    if (norm2 < 1e-20) continue;
    for (int g = 0; g < x_grid; ++g) {
      std::vector<double> x(p);
      for (std::size_t c = 0; c < p; ++c) {
        const double t = x_grid == 1 ? 0.5 : static_cast<double>(g) / (x_grid - 1);
        x[c] = x_lo[c] + t * (x_hi[c] - x_lo[c]);
      }
      const double gap = std::fabs(link.eval(x, ta) - link.eval(x, tb));
      worst = std::max(worst, gap / std::sqrt(norm2));
    }
  }
  return worst;
}

// ---- JSON ({"link":"polynomial","degree":2,"p":1} and friends) ----

inline void to_json(nlohmann::json& j, const Link& link) {
  switch (link.kind()) {
    case LinkKind::kPolynomial:
      j = {{"link", "polynomial"},
           {"degree", link.degree()},
           {"p", static_cast<int>(link.covariate_dim())}};
      break;
    case LinkKind::kTrigPolynomial:
      j = {{"link", "trig_polynomial"}, {"degree", link.degree()}};
      break;
    case LinkKind::kLogLinear:
      j = {{"link", "log_linear"}, {"p", static_cast<int>(link.covariate_dim())}};
      break;
    case LinkKind::kSigmoidLinear:
      j = {{"link", "sigmoid_linear"},
           {"p", static_cast<int>(link.covariate_dim())},
           {"intercept", link.intercept()}};
      break;
    case LinkKind::kIdentityConstant:
      j = {{"link", "identity_constant"}};
      break;
    case LinkKind::kPowerProduct:
      j = {{"link", "power_product"},
           {"theta0_scale", link.theta0_log_scale() ? "log" : "natural"}};
      break;
    case LinkKind::kSum: {
      nlohmann::json terms = nlohmann::json::array();
      for (const auto& t : link.terms()) terms.push_back(*t);
      j = {{"link", "sum"}, {"terms", terms}};
      break;
    }
  }
}

inline void from_json(const nlohmann::json& j, Link& link) {
  const std::string kind = j.at("link").get<std::string>();
  if (kind == "polynomial")
    link = Link::polynomial(j.at("degree").get<int>(), j.value("p", 1));
  else if (kind == "trig_polynomial")
    link = Link::trig_polynomial(j.at("degree").get<int>());
  else if (kind == "log_linear")
    link = Link::log_linear(j.value("p", 1));
  else if (kind == "sigmoid_linear")
    link = Link::sigmoid_linear(j.value("p", 1), j.value("intercept", false));
  else if (kind == "identity_constant")
    link = Link::identity_constant();
  else if (kind == "power_product")
    link = Link::power_product(j.value("theta0_scale", "log") == "log");
  else if (kind == "sum") {
    const auto& terms = j.at("terms");
    if (terms.size() != 2)
      throw std::invalid_argument("sum link: expected exactly 2 terms");
    link = Link::sum(terms[0].get<Link>(), terms[1].get<Link>());
  } else {
    throw std::invalid_argument("link: unknown variant '" + kind + "'");
  }
}

}  // namespace regmix
