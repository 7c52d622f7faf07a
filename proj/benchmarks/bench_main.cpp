#include <benchmark/benchmark.h>

#include <random>

#include "wi/embed.hpp"
#include "wi/image.hpp"
#include "wi/losses.hpp"
#include "wi/retrieval.hpp"
#include "wi/sift.hpp"
#include "wi/text_aoi.hpp"

namespace {

wi::GrayImage noise_image(int side, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  wi::GrayImage img(side, side);
  for (double& v : img.pixels) v = u(gen);
  return img;
}

void BM_GaussianBlur(benchmark::State& state) {
  const auto img = noise_image(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(wi::gaussian_blur(img, 1.6));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_GaussianBlur)->Arg(256)->Arg(512);

void BM_SiftDetect(benchmark::State& state) {
  const auto img = wi::gaussian_blur(noise_image(static_cast<int>(state.range(0)), 2), 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(wi::detect(img));
}
BENCHMARK(BM_SiftDetect)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_AoiSelect(benchmark::State& state) {
  const auto img = noise_image(512, 3);
  wi::BinaryMask mask(512, 512);
  for (std::size_t i = 0; i < mask.bits.size(); ++i) mask.bits[i] = img.pixels[i] < 0.02;
  for (auto _ : state) benchmark::DoNotOptimize(wi::select_aoi(img, mask, wi::AoiParams{{25, 25}, 1}));
}
BENCHMARK(BM_AoiSelect)->Unit(benchmark::kMillisecond);

void BM_ForwardBackwardBatch(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto e = wi::init_extractor({1024, 256, 256, 128}, 4);
  std::mt19937_64 gen(5);
  std::normal_distribution<double> g;
  std::vector<double> in(rows * 1024), grad_out(rows * 128);
  for (double& v : in) v = g(gen);
  for (double& v : grad_out) v = g(gen);
  std::vector<double> grads(e.params().size());
  for (auto _ : state) {
    wi::BatchCache cache;
    benchmark::DoNotOptimize(wi::forward_batch(e, in, rows, &cache));
    wi::backward_batch(e, cache, grad_out, grads);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackwardBatch)->Arg(32)->Arg(96)->Unit(benchmark::kMillisecond);

void BM_Retrieval(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 gen(6);
  std::normal_distribution<double> g;
  std::vector<wi::FeatureVector> docs(n);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) {
    docs[i].values.resize(128);
    for (double& v : docs[i].values) v = g(gen);
    labels.push_back(std::to_string(i % 20));
  }
  for (auto _ : state) {
    const auto d = wi::distance_matrix(docs, wi::DistanceMetric::cosine);
    benchmark::DoNotOptimize(wi::leave_one_out_retrieval(d, labels));
  }
}
BENCHMARK(BM_Retrieval)->Arg(120)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
