#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ftasl/analysis.hpp"
#include "ftasl/solvers.hpp"

using namespace ftasl;

namespace {

struct Instance {
  MeasurementMatrix phi;
  std::vector<SparseVector> us;
  std::vector<DenseVector> ws;
  std::vector<DenseVector> ys;
};

Instance small_instance(std::uint64_t seed, std::size_t m, std::size_t n, std::size_t k, std::size_t T,
                        bool constant_u = false, double noise = 1.0) {
  RngStream rng(seed);
  Instance inst{sample_gaussian_matrix(m, n, 1.0 / std::sqrt(double(m)), rng), {}, {}, {}};
  const auto support = sample_support(n, k, rng);
  std::vector<double> vals(k);
  for (std::size_t t = 0; t < T; ++t) {
    if (!constant_u || t == 0)
      for (auto& v : vals) v = rng.uniform01();
    inst.us.push_back(SparseVector::from_entries(n, support, vals));
    Eigen::VectorXd w = noise * sample_standard_normal_vector(m, rng).values();
    inst.ws.emplace_back(w);
    inst.ys.emplace_back(Eigen::VectorXd(matvec_dense(inst.phi, inst.us.back()) + w));
  }
  return inst;
}

// Minimizes the full cumulative loss directly over every support.
double direct_cumulative_opt(const Instance& inst, std::size_t k) {
  double best = std::numeric_limits<double>::infinity();
  for_each_combination(inst.phi.cols(), k, [&](std::span<const std::size_t> s) {
    const Eigen::MatrixXd a = inst.phi.columns(s);
    // Stacked system over all rounds.
    const auto T = static_cast<Eigen::Index>(inst.ys.size());
    const Eigen::Index m = a.rows();
    Eigen::MatrixXd big(m * T, a.cols());
    Eigen::VectorXd rhs(m * T);
    for (Eigen::Index t = 0; t < T; ++t) {
      big.middleRows(t * m, m) = a;
      rhs.segment(t * m, m) = inst.ys[static_cast<std::size_t>(t)].values();
    }
    const Eigen::VectorXd x = big.colPivHouseholderQr().solve(rhs);
    best = std::min(best, 0.5 * (rhs - big * x).squaredNorm());
  });
  return best;
}

std::vector<double> losses_of(const Instance& inst, const std::vector<SparseVector>& xs) {
  std::vector<double> out;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    const Eigen::VectorXd r = inst.ys[t].values() - inst.phi.entries() * xs[t].to_dense();
    out.push_back(0.5 * r.dot(r));
  }
  return out;
}

}  // namespace

TEST_CASE("approximate regret") {
  const auto inst = small_instance(1, 8, 12, 2, 16);
  const auto zs = running_means(inst.us);

  SUBCASE("predicting the final comparator gives zero") {
    const std::vector<SparseVector> xs(16, zs.back());
    CHECK(approx_regret(losses_of(inst, xs), inst.ys, inst.phi, zs.back()) == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("single noiseless round") {
    const auto y = matvec(inst.phi, inst.us[0]);
    const std::vector<DenseVector> ys{y};
    const std::vector<double> losses{0.5 * y.squared_norm()};
    CHECK(approx_regret(losses, ys, inst.phi, inst.us[0]) == doctest::Approx(0.5 * y.squared_norm()));
  }
  SUBCASE("two-pass summation oracle") {
    RngStream rng(2);
    std::vector<SparseVector> xs;
    for (int t = 0; t < 16; ++t) xs.push_back(SparseVector::from_entries(12, sample_support(12, 2, rng), {0.3, -0.2}));
    const auto losses = losses_of(inst, xs);
    double policy = 0.0, comparator = 0.0;
    for (double l : losses) policy += l;
    for (const auto& y : inst.ys) {
      const Eigen::VectorXd r = y.values() - inst.phi.entries() * zs.back().to_dense();
      comparator += 0.5 * r.squaredNorm();
    }
    CHECK(approx_regret(losses, inst.ys, inst.phi, zs.back()) ==
          doctest::Approx(policy - comparator).epsilon(1e-12));
  }
  CHECK_THROWS_AS(approx_regret(std::vector<double>(3), inst.ys, inst.phi, zs.back()), DimensionError);
}

TEST_CASE("offline optimum") {
  SUBCASE("realizable noiseless sequence") {
    const auto inst = small_instance(3, 8, 12, 2, 10, true, 0.0);
    const auto opt = exact_opt(inst.ys, inst.phi, 2);
    CHECK(opt.value == doctest::Approx(0.0).epsilon(1e-12));
    CHECK((opt.x.to_dense() - inst.us[0].to_dense()).norm() < 1e-10);
  }
  SUBCASE("zero mean measurements") {
    RngStream rng(4);
    const auto phi = sample_gaussian_matrix(4, 6, 0.5, rng);
    const DenseVector y(std::vector<double>{1, -2, 0.5, 3});
    const DenseVector neg(Eigen::VectorXd(-y.values()));
    const std::vector<DenseVector> ys{y, neg};
    const auto opt = exact_opt(ys, phi, 2);
    CHECK(opt.x.nnz() == 0);
    CHECK(opt.value == doctest::Approx(y.squared_norm()));
  }
  SUBCASE("mean reformulation equals direct cumulative minimization") {
    for (std::uint64_t seed = 10; seed < 60; ++seed) {
      const auto inst = small_instance(seed, 8, 12, 2, 10);
      CHECK(exact_opt(inst.ys, inst.phi, 2).value == doctest::Approx(direct_cumulative_opt(inst, 2)).epsilon(1e-10));
    }
  }
}

TEST_CASE("running means") {
  const auto inst = small_instance(5, 8, 12, 3, 50);
  const auto zs = running_means(inst.us);
  for (std::size_t t = 0; t < zs.size(); ++t) {
    Eigen::VectorXd direct = Eigen::VectorXd::Zero(12);
    for (std::size_t s = 0; s <= t; ++s) direct += inst.us[s].to_dense();
    direct /= static_cast<double>(t + 1);
    CHECK((zs[t].to_dense() - direct).norm() < 1e-14);
  }
  const auto constant = small_instance(6, 8, 12, 3, 50, true);
  for (const auto& z : running_means(constant.us)) CHECK(z == constant.us[0]);
}

TEST_CASE("regret decomposition") {
  SUBCASE("perfect predictions on a constant noiseless stream") {
    const auto inst = small_instance(7, 8, 12, 2, 16, true, 0.0);
    const auto rep = regret_decomposition(inst.us, inst.ws, inst.us, inst.phi, 0.0);
    CHECK(rep.A == doctest::Approx(0.0));
    CHECK(rep.B == 0.0);
    CHECK(rep.C == doctest::Approx(0.0));
    CHECK(rep.R_T == doctest::Approx(0.0));
    CHECK(rep.R_hat_T == doctest::Approx(0.0));
  }
  SUBCASE("constant signal has no drift term") {
    const auto inst = small_instance(8, 8, 12, 2, 16, true);
    const std::vector<SparseVector> xs(16, SparseVector(12));
    const auto opt = exact_opt(inst.ys, inst.phi, 2);
    CHECK(regret_decomposition(inst.us, inst.ws, xs, inst.phi, opt.value).B == 0.0);
  }
  SUBCASE("identities against directly computed regret") {
    for (std::uint64_t seed = 100; seed < 150; ++seed) {
      const auto inst = small_instance(seed, 8, 12, 2, 16);
      RngStream rng(seed);
      std::vector<SparseVector> xs;
      for (int t = 0; t < 16; ++t)
        xs.push_back(SparseVector::from_entries(12, sample_support(12, 2, rng), {rng.uniform01(), -rng.uniform01()}));
      const double opt = direct_cumulative_opt(inst, 2);
      const auto rep = regret_decomposition(inst.us, inst.ws, xs, inst.phi, exact_opt(inst.ys, inst.phi, 2).value);
      const auto losses = losses_of(inst, xs);
      const double direct_R = std::accumulate(losses.begin(), losses.end(), 0.0) - opt;
      const double scale = std::abs(rep.A) + std::abs(rep.B) + std::abs(rep.C);
      CHECK(std::abs(rep.A + rep.B + rep.C - direct_R) <= 1e-9 * scale);
      CHECK(rep.identities_hold());
    }
  }
}

TEST_CASE("b(delta)") {
  CHECK(b_delta(1.0 - 1e-12, 1) == doctest::Approx(1.0).epsilon(1e-5));
  const double l = std::log(20.0);
  CHECK(b_delta(0.05, 256) == doctest::Approx(std::pow(16.0 + std::sqrt(l), 2) + l));
  CHECK(b_delta(0.05, 256) == doctest::Approx(317.378).epsilon(1e-5));
  double prev = std::numeric_limits<double>::infinity();
  for (double d = 0.01; d < 1.0; d += 0.01) {
    const double b = b_delta(d, 64);
    CHECK(b < prev);
    prev = b;
  }
  CHECK_THROWS_AS(b_delta(0.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(b_delta(1.0, 4), std::invalid_argument);
}

TEST_CASE("a_T(delta) and the regret bound") {
  BoundParams p;
  p.delta = 0.1;
  p.M = 64;
  p.kappa = 2.0;
  p.delta_K = 0.3;
  p.T = 1000;
  CHECK(a_T_delta(p) == doctest::Approx(1 + 2 * 4.0 * 64 * b_delta(0.1, 64) * std::log(1000.0)));

  SUBCASE("degenerate horizon") {
    p.T = 1;
    const double expect = b_delta(0.1 / 3, 64) / 2 + std::sqrt(2 * std::log(60.0) * 1.3);
    CHECK(regret_bound(p) == doctest::Approx(expect));
  }
  SUBCASE("nondecreasing in T") {
    p.z_star_drift = 0.5;
    p.u_drift = 0.25;
    p.Delta = 1.0;
    double prev = 0.0;
    for (std::size_t T = 1; T <= (1u << 14); T *= 2) {
      p.T = T;
      const double b = regret_bound(p);
      CHECK(b >= prev);
      prev = b;
    }
  }
  SUBCASE("fourth term constant is configurable") {
    p.T = 64;
    CHECK(regret_bound(p, 2.0) < regret_bound(p, 12.0));
  }
  SUBCASE("bound over ln T settles for a constant signal") {
    p.M = 64;
    p.kappa = 5.0;
    p.delta = 0.05;
    std::vector<double> ratio;
    for (std::size_t T : {256u, 1024u, 4096u}) {
      p.T = T;
      ratio.push_back(regret_bound(p) / std::log(double(T)));
    }
    CHECK(std::abs(ratio[2] - ratio[1]) < std::abs(ratio[1] - ratio[0]));
    CHECK(std::abs(ratio[2] / ratio[1] - 1.0) < 0.01);
  }
  SUBCASE("invalid parameters") {
    p.delta_K = 1.0;
    CHECK_THROWS_AS(regret_bound(p), std::invalid_argument);
    p.delta_K = 0.1;
    p.kappa = 0.0;
    CHECK_THROWS_AS(a_T_delta(p), std::invalid_argument);
    p.kappa = 1.0;
    p.Delta = -1.0;
    CHECK_THROWS_AS(regret_bound(p), std::invalid_argument);
  }
}

TEST_CASE("drift sums") {
  const auto constant = small_instance(9, 8, 12, 3, 100, true);
  const auto zc = running_means(constant.us);
  CHECK(lazy_drift(zc) == 0.0);
  CHECK(z_star_drift(zc) == 0.0);
  CHECK(u_drift(constant.us, zc) == 0.0);

  // Signal redrawn at t = 1, 2, 4, 8, ...
  RngStream rng(10);
  const auto support = sample_support(12, 3, rng);
  std::vector<SparseVector> us;
  SparseVector u;
  for (std::size_t t = 1; t <= 300; ++t) {
    if ((t & (t - 1)) == 0) u = SparseVector::from_entries(12, support, {rng.uniform01(), rng.uniform01(), 0.5});
    us.push_back(u);
  }
  const auto zs = running_means(us);
  // Means from plain prefix sums, then the block double sum.
  std::vector<Eigen::VectorXd> z(us.size());
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(12);
  for (std::size_t t = 0; t < us.size(); ++t) {
    acc += us[t].to_dense();
    z[t] = acc / static_cast<double>(t + 1);
  }
  const std::size_t T = us.size();
  double oracle = 0.0;
  for (std::size_t k = 1; (std::size_t{1} << k) <= T; ++k) {
    const std::size_t start = std::size_t{1} << k, stop = std::min((start << 1) - 1, T);
    for (std::size_t t = start; t <= stop; ++t) oracle += 2.0 * (z[t - 1] - z[start - 2]).squaredNorm();
  }
  CHECK(lazy_drift(zs) == doctest::Approx(oracle).epsilon(1e-12));

  double zd = 0.0, ud = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    zd += (z[T - 1] - z[t]).squaredNorm();
    ud += (z[t] - us[t].to_dense()).squaredNorm();
  }
  CHECK(z_star_drift(zs) == doctest::Approx(zd).epsilon(1e-12));
  CHECK(u_drift(us, zs) == doctest::Approx(ud).epsilon(1e-12));
}

TEST_CASE("restricted isometry estimates") {
  RngStream rng(11);
  SUBCASE("orthonormal columns") {
    const MeasurementMatrix id(Eigen::MatrixXd::Identity(6, 6));
    for (std::size_t k = 1; k <= 6; ++k) CHECK(estimate_ric_exact(id, k).value == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("duplicated column") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 2);
    m(0, 0) = m(0, 1) = 1.0;
    CHECK(estimate_ric(MeasurementMatrix(m), 2, RicMode::exact(), rng).value == doctest::Approx(1.0));
  }
  SUBCASE("sampling with full coverage equals enumeration") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      RngStream local(seed);
      const auto phi = sample_gaussian_matrix(32, 16, 1.0 / std::sqrt(32.0), local);
      const auto exact = estimate_ric_exact(phi, 3);
      CHECK(exact.supports_examined == 560);
      CHECK_FALSE(exact.lower_bound);
      // 560 supports; 20000 draws miss any given one with probability about 3e-16.
      const auto sampled = estimate_ric(phi, 3, RicMode::monte_carlo(20000), local);
      CHECK(sampled.lower_bound);
      CHECK(sampled.value == exact.value);
    }
  }
  SUBCASE("invariant under column permutations") {
    const auto phi = sample_gaussian_matrix(10, 8, 0.3, rng);
    std::vector<Eigen::Index> perm(8);
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    std::swap(perm[1], perm[5]);
    Eigen::MatrixXd shuffled(10, 8);
    for (Eigen::Index j = 0; j < 8; ++j) shuffled.col(j) = phi.entries().col(perm[j]);
    CHECK(estimate_ric_exact(MeasurementMatrix(shuffled), 3).value ==
          doctest::Approx(estimate_ric_exact(phi, 3).value).epsilon(1e-12));
  }
  SUBCASE("guard") {
    const auto wide = sample_gaussian_matrix(4, 100, 1.0, rng);
    CHECK_THROWS_AS(estimate_ric_exact(wide, 4), GuardExceeded);
  }
}

TEST_CASE("chi-square tail self-test") {
  RngStream rng(12);
  CHECK(chi_square_tail_selftest(256, 10000, 0.05, rng) <= 0.05);
  CHECK(chi_square_tail_selftest(8, 10000, 0.5, rng) <= 0.5);
  CHECK(chi_square_tail_selftest(1, 10000, 0.05, rng) <= 0.05);
  CHECK_THROWS_AS(chi_square_tail_selftest(4, 999, 0.05, rng), std::invalid_argument);
}

TEST_CASE("quadratic form self-test") {
  const std::vector<double> norms{1.0, 2.0, 0.5};
  CHECK(psd_quadratic_form_threshold(norms, 0.1, 4) == doctest::Approx(3.5 * b_delta(0.1, 4)));

  RngStream rng(13);
  const auto res = dyadic_quadratic_form_selftest(16, 64, 0.05, 10000, rng);
  CHECK(res.exceedance_rate <= 0.05);
  // Each term s_k ||e_k||^2 has mean m s_k / (t_k - 1).
  double expect = 0.0;
  for (std::size_t k = 1; k < 7; ++k) expect += 16.0 * std::ldexp(1.0, int(k)) / (std::ldexp(1.0, int(k)) - 1.0);
  CHECK(res.mean_statistic == doctest::Approx(expect).epsilon(0.03));
  CHECK(res.threshold == doctest::Approx(b_delta(0.05, 16) * expect));
}
