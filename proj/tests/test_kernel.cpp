#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <random>

#include "emgtl/kernel.hpp"
#include "emgtl/reference.hpp"
#include "gradcheck.hpp"

using namespace emgtl;
using namespace emgtl::test;
namespace k = emgtl::kernel;

TEST_CASE("conv1d gradients (input, weight, bias)") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t B = 1 + rng() % 3, Ci = 1 + rng() % 4, Co = 1 + rng() % 4, K = 1 + rng() % 4,
                      T = 4 + rng() % 12, dil = 1 + rng() % 3;
    auto x = random_tensor({B, Ci, T}, rng);
    auto w = random_tensor({Co, Ci, K}, rng);
    auto b = random_tensor({Co}, rng);
    const auto R = random_tensor({B, Co, T}, rng);
    auto loss = [&] { return weighted_sum(k::conv1d_causal_forward(x, w, b, dil), R); };
    Tensor<double> dw(w.shape()), db(b.shape());
    const auto dx = k::conv1d_causal_backward(x, w, dil, R, &dw, &db);
    CHECK(relative_error(dx, numeric_gradient(x, loss)) < 1e-4);
    CHECK(relative_error(dw, numeric_gradient(w, loss)) < 1e-4);
    CHECK(relative_error(db, numeric_gradient(b, loss)) < 1e-4);
  }
}

TEST_CASE("batch norm gradients in training mode") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t B = 2 + rng() % 3, C = 1 + rng() % 4, T = 2 + rng() % 6;
    auto x = random_tensor({B, C, T}, rng);
    auto gamma = random_tensor({C}, rng);
    auto beta = random_tensor({C}, rng);
    const auto R = random_tensor({B, C, T}, rng);
    k::DomainStats<double> stats(C);
    stats.add("a");
    auto loss = [&] {
      return weighted_sum(k::batch_norm_forward(x, gamma, beta, stats, "a", k::BnMode::kTrainNoUpdate, {}, static_cast<k::BnCache<double>*>(nullptr)), R);
    };
    k::BnCache<double> cache;
    k::batch_norm_forward(x, gamma, beta, stats, "a", k::BnMode::kTrainNoUpdate, {}, &cache);
    Tensor<double> dg(gamma.shape()), dbt(beta.shape());
    const auto dx = k::batch_norm_backward(cache, gamma, R, &dg, &dbt);
    CHECK(relative_error(dx, numeric_gradient(x, loss)) < 1e-4);
    CHECK(relative_error(dg, numeric_gradient(gamma, loss)) < 1e-4);
    CHECK(relative_error(dbt, numeric_gradient(beta, loss)) < 1e-4);
  }
}

TEST_CASE("batch norm gradients in inference mode") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t B = 1 + rng() % 3, C = 1 + rng() % 4, T = 1 + rng() % 6;
    auto x = random_tensor({B, C, T}, rng);
    auto gamma = random_tensor({C}, rng);
    auto beta = random_tensor({C}, rng);
    const auto R = random_tensor({B, C, T}, rng);
    k::DomainStats<double> stats(C);
    stats.add("a");
    for (std::size_t c = 0; c < C; ++c) {
      stats.at("a").mean[c] = uniform(rng);
      stats.at("a").var[c] = 0.5 + std::abs(uniform(rng));
    }
    auto loss = [&] {
      return weighted_sum(k::batch_norm_forward(x, gamma, beta, stats, "a", k::BnMode::kInference, {}, static_cast<k::BnCache<double>*>(nullptr)), R);
    };
    k::BnCache<double> cache;
    k::batch_norm_forward(x, gamma, beta, stats, "a", k::BnMode::kInference, {}, &cache);
    Tensor<double> dg(gamma.shape()), dbt(beta.shape());
    const auto dx = k::batch_norm_backward(cache, gamma, R, &dg, &dbt);
    CHECK(relative_error(dx, numeric_gradient(x, loss)) < 1e-4);
    CHECK(relative_error(dg, numeric_gradient(gamma, loss)) < 1e-4);
  }
}

TEST_CASE("leaky relu, pooling, dropout gradients") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t B = 1 + rng() % 3, C = 1 + rng() % 4, T = 1 + rng() % 8;
    auto x = random_tensor({B, C, T}, rng);
    for (auto& v : x.values()) {
      if (std::abs(v) < 1e-3) v = 0.5;  // keep clear of the kink
    }
    const auto R = random_tensor({B, C, T}, rng);
    auto relu_loss = [&] { return weighted_sum(k::leaky_relu_forward(x, 0.1), R); };
    CHECK(relative_error(k::leaky_relu_backward(x, 0.1, R), numeric_gradient(x, relu_loss)) < 1e-4);

    const auto Rp = random_tensor({B, C}, rng);
    auto pool_loss = [&] { return weighted_sum(k::global_avg_pool_forward(x), Rp); };
    CHECK(relative_error(k::global_avg_pool_backward(Rp, T), numeric_gradient(x, pool_loss)) < 1e-4);

    k::Rng drng(seed);
    Tensor<double> mask;
    k::dropout_forward(x, 0.5, true, &drng, &mask);
    auto drop_loss = [&] {
      k::Rng again(seed);
      return weighted_sum(k::dropout_forward(x, 0.5, true, &again, static_cast<Tensor<double>*>(nullptr)), R);
    };
    CHECK(relative_error(k::dropout_backward(mask, R), numeric_gradient(x, drop_loss)) < 1e-4);
  }
}

TEST_CASE("linear and softmax cross-entropy gradients") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t B = 1 + rng() % 4, In = 1 + rng() % 6, Out = 2 + rng() % 5;
    auto x = random_tensor({B, In}, rng);
    auto w = random_tensor({Out, In}, rng);
    auto b = random_tensor({Out}, rng);
    std::vector<int> labels(B);
    for (auto& l : labels) l = int(rng() % Out);
    auto loss = [&] { return k::softmax_cross_entropy(k::linear_forward(x, w, b), labels).loss; };
    const auto res = k::softmax_cross_entropy(k::linear_forward(x, w, b), labels);
    Tensor<double> dw(w.shape()), db(b.shape());
    const auto dx = k::linear_backward(x, w, res.d_logits, &dw, &db);
    CHECK(relative_error(dx, numeric_gradient(x, loss)) < 1e-4);
    CHECK(relative_error(dw, numeric_gradient(w, loss)) < 1e-4);
    CHECK(relative_error(db, numeric_gradient(b, loss)) < 1e-4);
  }
}

TEST_CASE("gradient reversal and scaled add") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 1 + rng() % 10;
    auto x = random_tensor({n}, rng);
    const auto R = random_tensor({n}, rng);
    const double lambda = 0.1 + std::abs(uniform(rng));
    CHECK(k::gradient_reversal_forward(x) == x);
    const auto g = k::gradient_reversal_backward(R, lambda);
    for (std::size_t i = 0; i < n; ++i) CHECK(g[i] == doctest::Approx(-lambda * R[i]));

    auto t = random_tensor({n}, rng);
    auto s = random_tensor({n}, rng);
    Tensor<double> alpha({1}, {0.3 + std::abs(uniform(rng))});
    auto loss = [&] { return weighted_sum(k::scaled_add_forward(t, s, alpha[0]), R); };
    double da = 0.0;
    const auto ds = k::scaled_add_backward(s, alpha[0], R, &da);
    CHECK(relative_error(ds, numeric_gradient(s, loss)) < 1e-4);
    CHECK(relative_error(R, numeric_gradient(t, loss)) < 1e-4);
    CHECK(relative_error(Tensor<double>({1}, {da}), numeric_gradient(alpha, loss)) < 1e-4);
  }
}

TEST_CASE("backward accumulates into parameter gradients") {
  std::mt19937_64 rng(5);
  auto x = random_tensor({2, 3, 7}, rng);
  auto w = random_tensor({2, 3, 3}, rng);
  const auto R = random_tensor({2, 2, 7}, rng);
  Tensor<double> once(w.shape()), twice(w.shape());
  k::conv1d_causal_backward(x, w, 2, R, &once, static_cast<Tensor<double>*>(nullptr));
  k::conv1d_causal_backward(x, w, 2, R, &twice, static_cast<Tensor<double>*>(nullptr));
  k::conv1d_causal_backward(x, w, 2, R, &twice, static_cast<Tensor<double>*>(nullptr));
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(twice[i] == doctest::Approx(2 * once[i]));
}

TEST_CASE("OpenMP kernels agree with the serial reference") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t B = 1 + rng() % 5, Ci = 1 + rng() % 9, Co = 1 + rng() % 9, K = 1 + rng() % 4,
                      T = 5 + rng() % 40, dil = 1 + rng() % 4;
    const auto x = random_tensor({B, Ci, T}, rng);
    const auto w = random_tensor({Co, Ci, K}, rng);
    const auto b = random_tensor({Co}, rng);
    const auto d = random_tensor({B, Co, T}, rng);
    CHECK(relative_error(k::conv1d_causal_forward(x, w, b, dil), reference::conv1d_causal_forward(x, w, b, dil)) < 1e-12);
    Tensor<double> dw(w.shape()), db(b.shape());
    const auto dx = k::conv1d_causal_backward(x, w, dil, d, &dw, &db);
    const auto ref = reference::conv1d_causal_backward(x, w, dil, d);
    CHECK(relative_error(dx, ref.d_input) < 1e-12);
    CHECK(relative_error(dw, ref.d_weight) < 1e-12);
    CHECK(relative_error(db, ref.d_bias) < 1e-12);

    const auto gamma = random_tensor({Co}, rng);
    const auto beta = random_tensor({Co}, rng);
    k::DomainStats<double> stats(Co);
    stats.add("a");
    const auto y = k::batch_norm_forward(d, gamma, beta, stats, "a", k::BnMode::kTrainNoUpdate, {}, static_cast<k::BnCache<double>*>(nullptr));
    CHECK(relative_error(y, reference::batch_norm_train_forward(d, gamma, beta, 1e-5)) < 1e-12);
  }
}

TEST_CASE("conv output at time t ignores later inputs") {
  std::mt19937_64 rng(9);
  auto x = random_tensor({1, 2, 20}, rng);
  const auto w = random_tensor({3, 2, 3}, rng);
  const auto b = random_tensor({3}, rng);
  const auto y0 = k::conv1d_causal_forward(x, w, b, 4);
  x.at(0, 1, 12) += 1.0;
  const auto y1 = k::conv1d_causal_forward(x, w, b, 4);
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t t = 0; t < 12; ++t) CHECK(y0.at(0, o, t) == y1.at(0, o, t));
    CHECK(y0.at(0, o, 12) != y1.at(0, o, 12));
  }
}

TEST_CASE("BN running statistics: only the selected bank moves") {
  std::mt19937_64 rng(4);
  const auto x = random_tensor({4, 2, 5}, rng);
  const Tensor<double> gamma({2}, 1.0), beta({2}, 0.0);
  k::DomainStats<double> stats(2);
  stats.add("a");
  stats.add("b");
  const auto before_b = stats.at("b");

  k::batch_norm_forward(x, gamma, beta, stats, "a", k::BnMode::kTrainNoUpdate, {}, static_cast<k::BnCache<double>*>(nullptr));
  CHECK(stats.at("a") == before_b);  // both still fresh

  k::batch_norm_forward(x, gamma, beta, stats, "a", k::BnMode::kTrain, {0.1, 1e-5}, static_cast<k::BnCache<double>*>(nullptr));
  CHECK(stats.at("b") == before_b);
  for (std::size_t c = 0; c < 2; ++c) {
    double m = 0, v = 0;
    const std::size_t n = 4 * 5;
    for (std::size_t b = 0; b < 4; ++b) {
      for (std::size_t t = 0; t < 5; ++t) m += x.at(b, c, t) / double(n);
    }
    for (std::size_t b = 0; b < 4; ++b) {
      for (std::size_t t = 0; t < 5; ++t) v += (x.at(b, c, t) - m) * (x.at(b, c, t) - m) / double(n - 1);
    }
    CHECK(stats.at("a").mean[c] == doctest::Approx(0.1 * m));
    CHECK(stats.at("a").var[c] == doctest::Approx(0.9 + 0.1 * v));
  }
  CHECK_THROWS_AS(k::batch_norm_forward(x, gamma, beta, stats, "zzz", k::BnMode::kTrain, {}, static_cast<k::BnCache<double>*>(nullptr)), UsageError);
}

TEST_CASE("dropout mask: keep rate, scale, expectation, determinism") {
  const Tensor<double> x({1000, 100}, 1.0);
  k::Rng rng(1);
  Tensor<double> mask;
  const auto y = k::dropout_forward(x, 0.5, true, &rng, &mask);
  std::size_t zeros = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    CHECK((mask[i] == 0.0 || mask[i] == 2.0));
    zeros += mask[i] == 0.0;
    sum += y[i];
  }
  const double n = double(y.size());
  // 5 sigma of a Bernoulli(0.5) count
  CHECK(std::abs(double(zeros) - 0.5 * n) < 5 * std::sqrt(0.25 * n));
  CHECK(std::abs(sum / n - 1.0) < 5 * std::sqrt(1.0 / n));

  k::Rng a(7), b(7);
  Tensor<double> ma, mb;
  k::dropout_forward(x, 0.3, true, &a, &ma);
  k::dropout_forward(x, 0.3, true, &b, &mb);
  CHECK(ma == mb);

  Tensor<double> none;
  CHECK(k::dropout_forward(x, 0.5, false, nullptr, &none) == x);
  CHECK(none.empty());
}

TEST_CASE("dropout keep rate for several rates") {
  const Tensor<float> x({200000}, 1.0f);
  for (double rate : {0.1, 0.25, 0.5, 0.9}) {
    k::Rng rng(3);
    Tensor<float> mask;
    k::dropout_forward(x, rate, true, &rng, &mask);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) kept += mask[i] != 0.0f;
    const double n = double(mask.size());
    CHECK(std::abs(double(kept) / n - (1.0 - rate)) < 5 * std::sqrt(rate * (1 - rate) / n));
  }
}

TEST_CASE("softmax rows sum to one; bad labels rejected") {
  std::mt19937_64 rng(2);
  const auto z = random_tensor({3, 5}, rng);
  const auto p = k::softmax(z);
  for (std::size_t i = 0; i < 3; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 5; ++j) s += p.at(i, j);
    CHECK(s == doctest::Approx(1.0));
  }
  const std::vector<int> bad{0, 5, 1};
  CHECK_THROWS_AS(k::softmax_cross_entropy(z, bad), UsageError);
}

TEST_CASE("fusion coefficient projection") {
  CHECK(k::clamp_coefficient(-0.5) == 0.0);
  CHECK(k::clamp_coefficient(0.7) == 0.7);
  CHECK(k::clamp_coefficient(2.5) == 2.0);
}
