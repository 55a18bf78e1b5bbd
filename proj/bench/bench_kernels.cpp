// Wall-clock comparison of the OpenMP kernels against the serial reference
// versions, plus one full training step of the default and a small TCN.
//
//   bench_kernels [repeats]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>

#include "emgtl/kernel.hpp"
#include "emgtl/model.hpp"
#include "emgtl/reference.hpp"
#include "emgtl/training.hpp"

using namespace emgtl;

namespace {

double time_ms(int repeats, const std::function<void()>& fn) {
  fn();  // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / repeats;
}

Tensor<float> random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng) {
  Tensor<float> t(std::move(shape));
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (auto& v : t.values()) v = n(rng);
  return t;
}

void row(const char* name, double omp_ms, double ref_ms) {
  if (ref_ms > 0) {
    std::printf("%-34s %10.3f ms %10.3f ms %7.2fx\n", name, omp_ms, ref_ms, ref_ms / omp_ms);
  } else {
    std::printf("%-34s %10.3f ms %13s %8s\n", name, omp_ms, "-", "-");
  }
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%-34s %13s %13s %8s\n", "kernel", "openmp", "reference", "speedup");
  std::mt19937_64 rng(7);

  for (std::size_t width : {16, 128}) {
    const std::size_t batch = width == 16 ? 64 : 128;
    const auto x = random_tensor({batch, width, 150}, rng);
    const auto w = random_tensor({width, width, 3}, rng);
    const auto b = random_tensor({width}, rng);
    const auto dy = random_tensor({batch, width, 150}, rng);
    char label[96];

    std::snprintf(label, sizeof label, "conv fwd B=%zu C=%zu d=2", batch, width);
    row(label, time_ms(repeats, [&] { kernel::conv1d_causal_forward(x, w, b, 2); }),
        time_ms(repeats, [&] { reference::conv1d_causal_forward(x, w, b, 2); }));

    std::snprintf(label, sizeof label, "conv bwd B=%zu C=%zu d=2", batch, width);
    Tensor<float> dw(w.shape()), db(b.shape());
    row(label, time_ms(repeats, [&] { kernel::conv1d_causal_backward(x, w, 2, dy, &dw, &db); }),
        time_ms(repeats, [&] { reference::conv1d_causal_backward(x, w, 2, dy); }));

    std::snprintf(label, sizeof label, "batch norm fwd B=%zu C=%zu", batch, width);
    Tensor<float> gamma({width}, 1.0f), beta({width}, 0.0f);
    kernel::DomainStats<float> stats(width);
    stats.add("a");
    row(label, time_ms(repeats, [&] {
          kernel::BnCache<float> cache;
          kernel::batch_norm_forward(x, gamma, beta, stats, "a", kernel::BnMode::kTrainNoUpdate, {},
                                     &cache);
        }),
        time_ms(repeats, [&] { reference::batch_norm_train_forward(x, gamma, beta, 1e-5); }));

    std::snprintf(label, sizeof label, "dropout fwd B=%zu C=%zu", batch, width);
    kernel::Rng drng(1);
    row(label, time_ms(repeats, [&] {
          Tensor<float> mask;
          kernel::dropout_forward(x, 0.5, true, &drng, &mask);
        }), 0);
  }

  {
    RawSignal sig(10, 60000);
    std::normal_distribution<double> n(0.0, 1000.0);
    for (std::size_t c = 0; c < 10; ++c) {
      for (auto& v : sig.channel(c)) v = n(rng);
    }
    const auto coeffs = design_bandpass({});
    row("filter 10 x 60000", time_ms(repeats, [&] { filter_causal(sig, coeffs); }),
        time_ms(repeats, [&] { reference::filter_causal(sig, coeffs); }));
  }

  for (std::size_t width : {16, 128}) {
    TcnConfig cfg;
    cfg.channels = {width, width, width};
    TcnModel<float> model(cfg, 3);
    model.add_domain("s1");
    const std::size_t batch = width == 16 ? 64 : 128;
    const auto x = random_tensor({batch, 10, 150}, rng);
    std::vector<int> labels(batch);
    for (std::size_t i = 0; i < batch; ++i) labels[i] = int(i % 11);
    kernel::Rng srng(5);
    char label[96];
    std::snprintf(label, sizeof label, "training step B=%zu C=%zu", batch, width);
    row(label, time_ms(repeats, [&] {
          model.zero_grad();
          supervised_accumulate(model, x, labels, "s1", srng);
        }), 0);
  }
  return 0;
}
