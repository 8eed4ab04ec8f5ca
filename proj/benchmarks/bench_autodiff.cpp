#include <benchmark/benchmark.h>

#include "patchprint/autodiff.hpp"
#include "patchprint/rng.hpp"

using namespace patchprint;
using namespace patchprint::ad;

namespace {

TensorPtr<float> noise_tensor(Tape<float>& tape, std::vector<int> shape, std::uint64_t seed,
                              bool grad) {
  auto t = make_tensor<float>(std::move(shape), grad);
  SplitMix64 rng(seed);
  for (auto& v : t->value) v = static_cast<float>(rng.gaussian() * 0.1);
  (void)tape;
  return t;
}

void bm_conv2d_forward(benchmark::State& state) {
  Tape<float> tape;
  tape.set_recording(false);
  auto x = noise_tensor(tape, {4, 16, 32, 32}, 1, false);
  auto w = noise_tensor(tape, {32, 16, 3, 3}, 2, false);
  auto b = noise_tensor(tape, {32}, 3, false);
  for (auto _ : state) benchmark::DoNotOptimize(tape.conv2d(x, w, b, 1, 1)->value.data());
}
BENCHMARK(bm_conv2d_forward);

void bm_conv2d_train_step(benchmark::State& state) {
  for (auto _ : state) {
    Tape<float> tape;
    auto x = noise_tensor(tape, {4, 16, 32, 32}, 1, false);
    auto w = noise_tensor(tape, {32, 16, 3, 3}, 2, true);
    auto b = noise_tensor(tape, {32}, 3, true);
    auto loss = tape.sum(tape.relu(tape.conv2d(x, w, b, 1, 1)));
    tape.backward(loss);
    benchmark::DoNotOptimize(w->grad.data());
  }
}
BENCHMARK(bm_conv2d_train_step);

void bm_matmul(benchmark::State& state) {
  Tape<float> tape;
  tape.set_recording(false);
  auto a = noise_tensor(tape, {64, 256}, 4, false);
  auto b = noise_tensor(tape, {256, 64}, 5, false);
  for (auto _ : state) benchmark::DoNotOptimize(tape.matmul(a, b)->value.data());
}
BENCHMARK(bm_matmul);

}  // namespace
