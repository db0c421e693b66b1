// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <numeric>

#include "genb/biasworld.hpp"
#include "genb/losses.hpp"
#include "genb/trainer.hpp"

using namespace genb;

namespace {

const SplitBundle& train_split() {
  static const SplitBundle b = [] {
    DatasetSpec s;
    s.train_size = 2048;
    return generate_split(s, Split::kTrain);
  }();
  return b;
}

Batch batch_of(int size) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(size));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return make_batch(train_split(), idx);
}

void BM_GenerateSplit(benchmark::State& state) {
  DatasetSpec s;
  s.train_size = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(generate_split(s, Split::kTrain));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerateSplit)->Arg(1000)->Arg(20000);

void BM_TargetForward(benchmark::State& state) {
  TrainConfig cfg;
  TargetModel t = init_target(model_config_for(train_split().spec, cfg));
  Batch b = batch_of(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(predict(t, b.features, b.tokens));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TargetForward)->Arg(64)->Arg(2048);

void BM_TargetForwardBackward(benchmark::State& state) {
  TrainConfig cfg;
  TargetModel t = init_target(model_config_for(train_split().spec, cfg));
  Batch b = batch_of(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    ad::Tape tape;
    VqaOutput out = vqa_forward(tape, t, tape.constant(b.features), b.tokens);
    LossGrad l = bce_from_logits(out.logits.value(), b.targets);
    tape.backward(ad::custom_scalar(out.logits, l.value, l.grad));
    benchmark::DoNotOptimize(tape.grad_of(t.cls_out));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TargetForwardBackward)->Arg(64);

void BM_BiasStep(benchmark::State& state) {
  TrainConfig cfg;
  TrainState s = TrainState::initialize(model_config_for(train_split().spec, cfg), cfg);
  Batch b = batch_of(64);
  for (auto _ : state) benchmark::DoNotOptimize(train_step_bias(s, cfg, b));
}
BENCHMARK(BM_BiasStep);

void BM_TargetStep(benchmark::State& state) {
  TrainConfig cfg;
  TrainState s = TrainState::initialize(model_config_for(train_split().spec, cfg), cfg);
  Batch b = batch_of(64);
  for (auto _ : state) benchmark::DoNotOptimize(train_step_target(s, cfg, b));
}
BENCHMARK(BM_TargetStep);

void BM_PseudoLabel(benchmark::State& state) {
  Rng rng(1);
  Matrix gt = batch_of(64).targets;
  Matrix yb = rng.normal_matrix(gt.rows(), gt.cols()) * 3.0;
  for (auto _ : state) benchmark::DoNotOptimize(pseudo_label(gt, yb));
  state.SetItemsProcessed(state.iterations() * gt.size());
}
BENCHMARK(BM_PseudoLabel);

}  // namespace

BENCHMARK_MAIN();
