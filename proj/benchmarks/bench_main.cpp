#include <benchmark/benchmark.h>

#include <random>

#include "ssad/config.hpp"
#include "ssad/evaluation.hpp"
#include "ssad/ops.hpp"
#include "ssad/trainer.hpp"

namespace {

using namespace ssad;

Tensor uniform(std::vector<int> shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

// Scalar sum of every element, so backward() has a single-element target.
Var sum(Tape& tape, Var x) {
  const Tensor& v = tape.value(x);
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i];
  return tape.record(Tensor::scalar(s), {x}, [x](Tape& t, Var out) {
    const double g = t.grad(out)[0];
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

RunConfig toy() { return load_run_config(std::filesystem::path(SSAD_SOURCE_DIR) / "configs/toy.ini"); }

// 3x3 stride-2 conv, 16 -> 32 channels, forward and backward.
void BM_Conv2d(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto w = make_parameter("w", uniform({32, 16, 3, 3}, 1));
  const auto b = make_parameter("b", uniform({32}, 2));
  const Tensor x = uniform({16, size, size}, 3);
  for (auto _ : state) {
    Tape tape;
    Var y = ops::conv2d(tape, tape.constant(x), tape.parameter(w), tape.parameter(b), {3, 2, 1});
    tape.backward(sum(tape, y));
    benchmark::DoNotOptimize(w->grad);
  }
}
BENCHMARK(BM_Conv2d)->Arg(32)->Arg(64)->Arg(128);

void BM_EncoderForward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto encoder = reference_encoder();
  const ImageBuffer img(1, size, size, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(encoder->encode(img));
}
BENCHMARK(BM_EncoderForward)->Arg(128)->Arg(256);

// One batch of the toy configuration; arg 0 is detection_only, 1 is the joint objective.
void BM_TrainStep(benchmark::State& state) {
  auto rc = toy();
  if (state.range(0) == 0) {
    rc.train.paradigm = Paradigm::detection_only;
    rc.train.weights.recon = rc.train.weights.tc = 0.0;
  } else {
    rc.train.paradigm = Paradigm::ssad;
  }
  const auto data = resize_dataset(synthesize_toy_dataset(rc.train.batch_size, rc.synth.image_size,
                                                          rc.synth.n_categories, 0),
                                   rc.train.image_size, rc.train.mask_patch);
  Trainer trainer(build_model(rc.train, rc.synth.n_categories), rc.train);
  std::vector<TrainSample> batch;
  for (std::size_t i = 0; i < data.images.size(); ++i) batch.push_back({&data.images[i], &data.annotations.records[i]});
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step(batch, 1));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_MapSuite(benchmark::State& state) {
  const int n_images = static_cast<int>(state.range(0));
  const std::vector<std::string> names{"a", "b", "c", "d"};
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<Detection>> predictions(n_images);
  std::vector<std::vector<GroundTruthBox>> truths(n_images);
  for (int i = 0; i < n_images; ++i) {
    for (int k = 0; k < 4; ++k) {
      const double x = 200 * u(rng), y = 200 * u(rng);
      const int c = static_cast<int>(4 * u(rng)) % 4;
      truths[i].push_back({x, y, x + 40, y + 40, c});
      const double jx = 10 * (u(rng) - 0.5), jy = 10 * (u(rng) - 0.5);
      predictions[i].push_back({{x + jx, y + jy, x + jx + 40, y + jy + 40, c}, u(rng)});
      predictions[i].push_back({{200 * u(rng), 200 * u(rng), 240, 240, c}, 0.5 * u(rng)});
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(eval::map_suite(predictions, truths, names));
}
BENCHMARK(BM_MapSuite)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
