#include <doctest.h>

#include <random>

#include "evsteer/train.hpp"
#include "support.hpp"

using namespace evsteer;

namespace {

ModelConfig small_model() {
  ModelConfig c;
  c.stem_channels = 4;
  c.head_hidden = 8;
  c.seed = 2;
  return c;
}

SampleBank random_bank(std::size_t n, std::uint64_t seed, double target) {
  SampleBank bank({2, 8, 8});
  testing_support::Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor x({2, 8, 8});
    for (auto& v : x.values()) v = u(rng);
    bank.add(x, target);
  }
  return bank;
}

}  // namespace

TEST_CASE("sample bank stores float inputs and batches rows") {
  SampleBank bank({1, 2, 2});
  bank.add(Tensor({1, 2, 2}, std::vector<double>{1, 2, 3, 4}), 0.5);
  bank.add(Tensor({1, 2, 2}, std::vector<double>{0.1, 6, 7, 8}), -0.5);
  CHECK(bank.size() == 2);
  std::vector<std::size_t> rows = {1, 0, 1};
  auto b = bank.batch(rows);
  CHECK(b.shape() == std::vector<std::size_t>{3, 1, 2, 2});
  CHECK(b[0] == static_cast<double>(0.1f));
  CHECK(b[4] == 1.0);
  CHECK(b[11] == 8.0);
  CHECK(bank.targets()[1] == -0.5);
  CHECK_THROWS_AS(bank.add(Tensor({2, 2, 2}), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(SampleBank({4, 4}), std::invalid_argument);
}

TEST_CASE("constant dataset is fitted") {
  SampleBank bank({2, 8, 8});
  const auto one = random_bank(1, 1, 0.3);
  std::vector<std::size_t> row{0};
  Tensor x = one.batch(row);
  x = Tensor({2, 8, 8}, x.values());
  for (int i = 0; i < 64; ++i) bank.add(x, 0.3);
  TrainConfig tc;
  tc.epochs = 50;
  tc.batch_size = 8;
  auto r = train(init_model(small_model()), bank, tc);
  REQUIRE(r.loss_history.size() == 50);
  CHECK(r.loss_history.back() < 1e-4);
  for (double p : predict(r.model, bank)) CHECK(p == doctest::Approx(0.3).epsilon(0.01));
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  auto bank = random_bank(20, 2, 0.5);
  TrainConfig tc;
  tc.learning_rate = 0.0;
  tc.epochs = 3;
  auto m = init_model(small_model());
  CHECK(train(m, bank, tc).model == m);
}

TEST_CASE("training is deterministic for fixed seeds") {
  auto bank = random_bank(40, 3, -0.2);
  TrainConfig tc;
  tc.epochs = 4;
  tc.batch_size = 8;
  tc.seed = 9;
  int calls = 0;
  auto a = train(init_model(small_model()), bank, tc, [&](int epoch, double) { CHECK(epoch == calls++); });
  CHECK(calls == 4);
  auto b = train(init_model(small_model()), bank, tc);
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.model == b.model);
  tc.seed = 10;
  CHECK(train(init_model(small_model()), bank, tc).loss_history != a.loss_history);
}

TEST_CASE("divergence carries the epoch") {
  auto bank = random_bank(16, 4, 1.0);
  TrainConfig tc;
  tc.learning_rate = 1e6;
  tc.epochs = 50;
  try {
    train(init_model(small_model()), bank, tc);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.epoch() >= 0);
    CHECK(e.epoch() < 50);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("train config validation") {
  auto bank = random_bank(4, 5, 0.0);
  TrainConfig tc;
  tc.batch_size = 0;
  CHECK_THROWS_AS(train(init_model(small_model()), bank, tc), std::invalid_argument);
  tc = TrainConfig{};
  tc.momentum = 1.0;
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
  tc = TrainConfig{};
  tc.learning_rate = -1.0;
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
  CHECK_THROWS_AS(train(init_model(small_model()), SampleBank({2, 8, 8}), TrainConfig{}), std::invalid_argument);
}
