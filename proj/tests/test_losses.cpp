#include "doctest.h"

#include <cmath>
#include <random>

#include "exf/losses.hpp"
#include "oracle.hpp"

using namespace exf;

namespace {

Matrix binary_from(std::initializer_list<std::initializer_list<double>> rows) {
  return Matrix::from_rows(rows);
}

}  // namespace

TEST_CASE("contrastive fixtures") {
  // coincident positive pair
  Matrix x0 = Matrix::from_rows({{1.0, 0.0}, {1.0, 0.0}});
  Matrix ypos = binary_from({{1, 1}, {1, 1}});
  CHECK(contrastive(x0, ypos, 1.0).value == doctest::Approx(0.0));

  // positive pair at distance 0.5
  Matrix xp = Matrix::from_rows({{0.0}, {0.5}});
  CHECK(contrastive(xp, ypos, 1.0).value == doctest::Approx(0.25).epsilon(1e-12));

  // negative pair at distance 0.4, margin 1
  Matrix xn = Matrix::from_rows({{0.0}, {0.4}});
  Matrix yneg = binary_from({{1, 0}, {0, 1}});
  CHECK(contrastive(xn, yneg, 1.0).value == doctest::Approx(0.36).epsilon(1e-12));
}

TEST_CASE("contrastive validates labels") {
  Matrix x = Matrix::from_rows({{0.0}, {1.0}});
  Matrix asym = binary_from({{1, 1}, {0, 1}});
  CHECK_THROWS_AS(contrastive(x, asym, 1.0), InvalidInput);
  Matrix wrong_size = binary_from({{1}});
  CHECK_THROWS_AS(contrastive(x, wrong_size, 1.0), InvalidInput);
}

TEST_CASE("contrastive_distance_grad branches") {
  CHECK(contrastive_distance_grad(0.5, true, 1.0, 2) == doctest::Approx(0.5));
  CHECK(contrastive_distance_grad(1.2, false, 1.0, 2) == 0.0);
  CHECK(contrastive_distance_grad(1.0, false, 1.0, 2) == 0.0);  // exactly at margin
  CHECK(contrastive_distance_grad(0.4, false, 1.0, 2) == doctest::Approx(-0.6));
}

TEST_CASE("relaxed_contrastive_abs fixture w=0.5 d=0.5") {
  Matrix x = Matrix::from_rows({{0.0}, {0.5}});
  WeightMatrix w = WeightMatrix::from(binary_from({{1.0, 0.5}, {0.5, 1.0}}));
  CHECK(relaxed_contrastive_abs(x, w, 1.0).value == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("relaxed_abs per-pair gradient vanishes at d = delta(1-w)") {
  double delta = 1.0;
  for (double w : {0.0, 0.25, 0.5, 0.9}) {
    double d = delta * (1.0 - w);
    if (d < delta)
      CHECK(std::abs(relaxed_abs_distance_grad(d, w, delta, 4)) < 1e-15);
    // closed form inside the margin
    for (double probe : {0.1, 0.3, 0.7, 0.99}) {
      double expected = 2.0 / 4.0 * (probe - delta * (1.0 - w));
      CHECK(relaxed_abs_distance_grad(probe, w, delta, 4) ==
            doctest::Approx(expected).epsilon(1e-15));
    }
  }
}

TEST_CASE("relaxed_contrastive_abs with binary weights equals contrastive") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int t = 0; t < 50; ++t) {
    std::size_t n = 3 + t % 6;
    Matrix x = oracle::random_matrix(rng, n, 3);
    Matrix y(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      y(i, i) = 1.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        double v = coin(rng);
        y(i, j) = v;
        y(j, i) = v;
      }
    }
    LossResult a = relaxed_contrastive_abs(x, WeightMatrix::from(y), 1.0);
    LossResult b = contrastive(x, y, 1.0);
    CHECK(std::abs(a.value - b.value) < 1e-12);
    for (std::size_t k = 0; k < a.grad.data.size(); ++k)
      CHECK(std::abs(a.grad.data[k] - b.grad.data[k]) < 1e-12);
  }
}

TEST_CASE("relaxed_contrastive hand fixture (0,1,3)") {
  Matrix x = Matrix::from_rows({{0.0}, {1.0}, {3.0}});
  WeightMatrix w = WeightMatrix::from(
      binary_from({{1.0, 1.0, 0.0}, {1.0, 1.0, 0.5}, {0.0, 0.5, 1.0}}));
  // term-by-term: (0.5625 + 1 + 2 + 0.72) / 3, confirmed by
  // tests/brute_force_fixtures.py
  CHECK(relaxed_contrastive(x, w, 1.0).value == doctest::Approx(1.4275).epsilon(1e-9));
}

TEST_CASE("relaxed_contrastive scale invariance") {
  std::mt19937_64 rng(37);
  for (double c : {0.1, 10.0}) {
    Matrix x = oracle::random_matrix(rng, 7, 4);
    WeightMatrix w = oracle::random_weights(rng, 7);
    double v1 = relaxed_contrastive(x, w, 1.0).value;
    double v2 = relaxed_contrastive(scaled(x, c), w, 1.0).value;
    CHECK(std::abs(v1 - v2) < 1e-9);
  }
}

TEST_CASE("relaxed_contrastive degenerate batches error") {
  WeightMatrix w = WeightMatrix::from(
      binary_from({{1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}}));
  Matrix coincident(3, 2, 0.7);
  CHECK_THROWS_AS(relaxed_contrastive(coincident, w, 1.0), DegenerateInput);

  Matrix two = Matrix::from_rows({{0.0}, {1.0}});
  WeightMatrix w2 = WeightMatrix::from(binary_from({{1.0, 0.5}, {0.5, 1.0}}));
  CHECK_THROWS_AS(relaxed_contrastive(two, w2, 1.0), InvalidInput);
}

TEST_CASE("relaxed_contrastive matches the naive formula on random instances") {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 30; ++t) {
    std::size_t n = 3 + t % 8;
    Matrix x = oracle::random_matrix(rng, n, 3);
    WeightMatrix w = oracle::random_weights(rng, n);
    double expected = oracle::relative_pair_loss_value(x, w.w, 1.0);
    CHECK(relaxed_contrastive(x, w, 1.0).value ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("unrelaxed_relative equals relaxed_contrastive on binary weights") {
  std::mt19937_64 rng(43);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int t = 0; t < 20; ++t) {
    std::size_t n = 4 + t % 5;
    Matrix x = oracle::random_matrix(rng, n, 3);
    Matrix y(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      y(i, i) = 1.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        double v = coin(rng);
        y(i, j) = v;
        y(j, i) = v;
      }
    }
    LossResult a = unrelaxed_relative(x, y, 1.0);
    LossResult b = relaxed_contrastive(x, WeightMatrix::from(y), 1.0);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-15));
  }
}

TEST_CASE("unrelaxed_relative positive-only batch at equal spacing") {
  // points 0, 1, 2 all same class: value 29/6, from brute_force_fixtures.py
  Matrix x = Matrix::from_rows({{0.0}, {1.0}, {2.0}});
  Matrix y(3, 3, 1.0);
  CHECK(unrelaxed_relative(x, y, 1.0).value ==
        doctest::Approx(29.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("unrelaxed_relative scale invariance") {
  std::mt19937_64 rng(47);
  Matrix x = oracle::random_matrix(rng, 6, 3);
  Matrix y = class_equivalence({0, 0, 1, 1, 2, 2});
  double v1 = unrelaxed_relative(x, y, 1.0).value;
  for (double c : {0.1, 10.0})
    CHECK(std::abs(unrelaxed_relative(scaled(x, c), y, 1.0).value - v1) < 1e-9);
}

TEST_CASE("relaxed_ms hand fixture (0,1,3) alpha=1 beta=2") {
  Matrix x = Matrix::from_rows({{0.0}, {1.0}, {3.0}});
  WeightMatrix w = WeightMatrix::from(
      binary_from({{1.0, 1.0, 0.0}, {1.0, 1.0, 0.5}, {0.0, 0.5, 1.0}}));
  LossConfig cfg;
  cfg.alpha = 1.0;
  cfg.beta = 2.0;
  // 1.468515471600907 from tests/brute_force_fixtures.py
  CHECK(relaxed_ms(x, w, cfg).value == doctest::Approx(1.468515471600907).epsilon(1e-9));
}

TEST_CASE("relaxed_ms repel term vanishes when all weights are 1") {
  std::mt19937_64 rng(53);
  Matrix x = oracle::random_matrix(rng, 5, 3);
  WeightMatrix all_one{5, Matrix(5, 5, 1.0)};
  LossConfig cfg;
  double value = relaxed_ms(x, all_one, cfg).value;

  // recompute the attract-only part directly
  Matrix r = relative_distances(pairwise_distances(x));
  double expected = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    double a = 0.0;
    for (std::size_t j = 0; j < 5; ++j)
      if (j != i) a += std::exp(cfg.alpha * r(i, j));
    expected += std::log(1.0 + a) / cfg.alpha;
  }
  expected /= 5.0;
  CHECK(value == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("relaxed_ms scale invariance") {
  std::mt19937_64 rng(59);
  Matrix x = oracle::random_matrix(rng, 6, 4);
  WeightMatrix w = oracle::random_weights(rng, 6);
  LossConfig cfg;
  double v1 = relaxed_ms(x, w, cfg).value;
  for (double c : {0.1, 10.0})
    CHECK(std::abs(relaxed_ms(scaled(x, c), w, cfg).value - v1) < 1e-9);
}

TEST_CASE("hkd_kl fixtures") {
  Matrix same = Matrix::from_rows({{1.0, 2.0, -0.5}});
  CHECK(hkd_kl(same, same, 4.0).value == doctest::Approx(0.0));

  Matrix teacher = Matrix::from_rows({{2.0, 0.0}});
  Matrix student = Matrix::from_rows({{0.0, 0.0}});
  // 0.32781332547273756 from tests/brute_force_fixtures.py
  CHECK(hkd_kl(student, teacher, 1.0).value ==
        doctest::Approx(0.32781332547273756).epsilon(1e-12));
}

TEST_CASE("hkd_kl is nonnegative on random inputs") {
  std::mt19937_64 rng(61);
  for (int t = 0; t < 50; ++t) {
    Matrix s = oracle::random_matrix(rng, 4, 5, 2.0);
    Matrix te = oracle::random_matrix(rng, 4, 5, 2.0);
    CHECK(hkd_kl(s, te, 4.0).value >= 0.0);
  }
}

TEST_CASE("hkd_kl rejects shape mismatch") {
  Matrix a(2, 3), b(2, 4);
  CHECK_THROWS_AS(hkd_kl(a, b, 1.0), InvalidInput);
}

TEST_CASE("cross_entropy fixtures") {
  // overwhelming logit on the true class
  Matrix sure = Matrix::from_rows({{50.0, 0.0}});
  CHECK(cross_entropy(sure, {0}).value < 1e-8);

  Matrix uniform(1, 4, 0.0);
  CHECK(cross_entropy(uniform, {2}).value ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("cross_entropy gradient rows sum to zero") {
  std::mt19937_64 rng(67);
  Matrix logits = oracle::random_matrix(rng, 5, 4, 2.0);
  LossResult r = cross_entropy(logits, {0, 1, 2, 3, 0});
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0.0;
    for (double v : r.grad.row(i)) s += v;
    CHECK(std::abs(s) < 1e-12);
  }
}

TEST_CASE("cross_entropy rejects out-of-range labels") {
  Matrix logits(2, 3, 0.0);
  CHECK_THROWS_AS(cross_entropy(logits, {0, 3}), InvalidInput);
}

TEST_CASE("loss values are nonnegative") {
  std::mt19937_64 rng(71);
  for (int t = 0; t < 20; ++t) {
    std::size_t n = 3 + t % 6;
    Matrix x = oracle::random_matrix(rng, n, 4);
    WeightMatrix w = oracle::random_weights(rng, n);
    Matrix y = class_equivalence(oracle::random_labels(rng, n, 3));
    LossConfig cfg;
    CHECK(contrastive(x, y, 1.0).value >= 0.0);
    CHECK(relaxed_contrastive_abs(x, w, 1.0).value >= 0.0);
    CHECK(relaxed_contrastive(x, w, 1.0).value >= 0.0);
    CHECK(unrelaxed_relative(x, y, 1.0).value >= 0.0);
    CHECK(relaxed_ms(x, w, cfg).value >= 0.0);
  }
}

TEST_CASE("analytical gradients match finite differences") {
  std::mt19937_64 rng(73);
  std::uniform_int_distribution<std::size_t> n_dist(3, 16), d_dist(2, 8);
  for (int t = 0; t < 25; ++t) {
    std::size_t n = n_dist(rng), d = d_dist(rng);
    Matrix x = oracle::random_matrix(rng, n, d);
    WeightMatrix w = oracle::random_weights(rng, n);
    Matrix y = class_equivalence(oracle::random_labels(rng, n, 3));
    LossConfig cfg;

    LossResult r = contrastive(x, y, 1.0);
    CHECK(oracle::grad_rel_err(x, r.grad, [&](const Matrix& m) {
            return contrastive(m, y, 1.0).value;
          }) < 1e-4);

    r = relaxed_contrastive_abs(x, w, 1.0);
    CHECK(oracle::grad_rel_err(x, r.grad, [&](const Matrix& m) {
            return relaxed_contrastive_abs(m, w, 1.0).value;
          }) < 1e-4);

    r = relaxed_contrastive(x, w, 1.0);
    CHECK(oracle::grad_rel_err(x, r.grad, [&](const Matrix& m) {
            return relaxed_contrastive(m, w, 1.0).value;
          }) < 1e-4);

    r = unrelaxed_relative(x, y, 1.0);
    CHECK(oracle::grad_rel_err(x, r.grad, [&](const Matrix& m) {
            return unrelaxed_relative(m, y, 1.0).value;
          }) < 1e-4);

    r = relaxed_ms(x, w, cfg);
    CHECK(oracle::grad_rel_err(x, r.grad, [&](const Matrix& m) {
            return relaxed_ms(m, w, cfg).value;
          }) < 1e-4);

    Matrix teacher = oracle::random_matrix(rng, n, d, 2.0);
    r = hkd_kl(x, teacher, 4.0);
    CHECK(oracle::grad_rel_err(x, r.grad, [&](const Matrix& m) {
            return hkd_kl(m, teacher, 4.0).value;
          }) < 1e-4);

    auto labels = oracle::random_labels(rng, n, d);
    r = cross_entropy(x, labels);
    CHECK(oracle::grad_rel_err(x, r.grad, [&](const Matrix& m) {
            return cross_entropy(m, labels).value;
          }) < 1e-4);
  }
}
