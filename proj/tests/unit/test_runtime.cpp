#include <doctest.h>

#include "mobsynth/errors.hpp"
#include "mobsynth/rng.hpp"
#include "mobsynth/runtime.hpp"

using namespace mobsynth;

namespace {

nn::ModelConfig small_model() {
  nn::ModelConfig c;
  c.vocab_size = 8;
  c.embedding_size = 6;
  c.layer_size = 8;
  c.n_layers = 2;
  c.dropout_rate = 0.1;
  c.max_length = 10;
  c.seed = 4;
  return c;
}

std::vector<PrefixedSequence> random_sequences(int n, int length, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::vector<PrefixedSequence> out(n, PrefixedSequence(length + 2));
  for (auto& s : out)
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<Token>((i < 2 ? 1 : 0) + uniform_index(rng, 7));
  return out;
}

bool same_params(const nn::Parameters<float>& a, const nn::Parameters<float>& b) {
  const auto x = a.blocks();
  const auto y = b.blocks();
  for (std::size_t i = 0; i < x.size(); ++i)
    if (*x[i].value != *y[i].value) return false;
  return true;
}

}  // namespace

TEST_CASE("examples use windows of at most max_length preceding tokens") {
  const std::vector<PrefixedSequence> seqs{{1, 2, 3, 4, 5, 6}};
  const auto ex = make_examples(seqs, 3);
  REQUIRE(ex.size() == 5);
  CHECK(ex[0].context.size() == 1);
  CHECK(ex[0].target == 2);
  CHECK(ex[4].context.size() == 3);
  CHECK(ex[4].context[0] == 3);
  CHECK(ex[4].target == 6);
}

TEST_CASE("zero epochs return the initialization") {
  TrainConfig tc;
  tc.epochs = 0;
  const auto seqs = random_sequences(3, 12, 1);
  const auto trained = train(seqs, small_model(), tc);
  CHECK(same_params(trained.params, initialize_checkpoint(small_model(), 12).params));
  CHECK(trained.meta.trajectory_length == 12);
}

TEST_CASE("training is deterministic and lowers the loss") {
  TrainConfig tc;
  tc.epochs = 4;
  tc.batch_size = 16;
  tc.learning_rate = 0.01;
  tc.seed = 9;
  const auto seqs = random_sequences(6, 12, 2);
  std::vector<double> seen;
  tc.on_epoch = [&](int, double loss) { seen.push_back(loss); };
  const auto a = train(seqs, small_model(), tc);
  const auto b = train(seqs, small_model(), tc);
  CHECK(same_params(a.params, b.params));
  CHECK(a.meta.epoch_losses.size() == 4);
  CHECK(seen.size() == 8);
  CHECK(a.meta.epoch_losses.back() < a.meta.epoch_losses.front());
  CHECK(evaluate_loss(a, seqs) < evaluate_loss(initialize_checkpoint(small_model(), 12), seqs));
}

TEST_CASE("training input validation") {
  TrainConfig tc;
  CHECK_THROWS_AS(train({}, small_model(), tc), ConfigError);
  auto seqs = random_sequences(2, 5, 3);
  seqs[1].push_back(1);
  CHECK_THROWS_AS(train(seqs, small_model(), tc), ConfigError);
  seqs = random_sequences(2, 5, 3);
  seqs[0][3] = 8;
  CHECK_THROWS_AS(train(seqs, small_model(), tc), DomainError);
  tc.batch_size = 0;
  CHECK_THROWS_AS(train(random_sequences(2, 5, 3), small_model(), tc), ConfigError);
}

TEST_CASE("a repeated sequence is memorized and reproduced greedily") {
  nn::ModelConfig mc;
  mc.vocab_size = 10;
  mc.embedding_size = 16;
  mc.layer_size = 32;
  mc.n_layers = 2;
  mc.dropout_rate = 0.0;
  mc.max_length = 60;
  mc.seed = 1;
  PrefixedSequence seq{3, 7};
  Rng rng = make_rng(77);
  for (int i = 0; i < 30; ++i) seq.push_back(static_cast<Token>(uniform_index(rng, 10)));
  const std::vector<PrefixedSequence> corpus(16, seq);
  TrainConfig tc;
  tc.epochs = 200;
  tc.batch_size = 32;
  tc.learning_rate = 0.01;
  tc.seed = 2;
  const auto ck = train(corpus, mc, tc);
  CHECK(ck.meta.final_loss < 0.05);
  CHECK(evaluate_loss(ck, corpus) < 0.05);
  Rng unused = make_rng(0);
  const auto generated = generate_trajectory(ck, 3, 7, kGreedy, unused);
  CHECK(generated == std::vector<Token>(seq.begin() + 2, seq.end()));
}

TEST_CASE("greedy sampling takes the first maximum") {
  Rng rng = make_rng(1);
  nn::VectorX<float> logits(4);
  logits << 0.5f, 2.0f, 2.0f, -1.0f;
  CHECK(sample_token(logits, kGreedy, rng) == 1);
  CHECK_THROWS_AS(sample_token(logits, -1.0, rng), ConfigError);
}

TEST_CASE("sampling follows the softmax distribution") {
  Rng rng = make_rng(3);
  nn::VectorX<float> logits(3);
  logits << 0.0f, std::log(2.0f), std::log(7.0f);
  std::array<int, 3> counts{};
  for (int i = 0; i < 20000; ++i) ++counts[sample_token(logits, 1.0, rng)];
  CHECK(counts[0] / 20000.0 == doctest::Approx(0.1).epsilon(0.1));
  CHECK(counts[2] / 20000.0 == doctest::Approx(0.7).epsilon(0.03));
}

TEST_CASE("generation shapes, labels and seeds") {
  auto ck = initialize_checkpoint(small_model(), 12);
  GenerationRequest req;
  CHECK(generate_sample(ck, req).empty());

  for (int i = 0; i < 20; ++i) req.labels.push_back({static_cast<Token>(1 + i % 7), static_cast<Token>(1 + (i * 3) % 7)});
  req.seed = 5;
  req.batch_size = 8;
  const auto a = generate_sample(ck, req);
  REQUIRE(a.size() == 20);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].label == req.labels[i]);
    CHECK(a[i].trajectory.tokens.size() == 12);
    for (Token t : a[i].trajectory.tokens) CHECK(t < 8);
  }
  CHECK(a[0].trajectory.device_id == "syn000000");
  const auto again = generate_sample(ck, req);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(again[i].trajectory.tokens == a[i].trajectory.tokens);

  req.seed = 6;
  const auto b = generate_sample(ck, req);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= b[i].trajectory.tokens != a[i].trajectory.tokens;
  CHECK(differs);

  req.temperature = kGreedy;
  const auto g1 = generate_sample(ck, req);
  req.seed = 99;
  const auto g2 = generate_sample(ck, req);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(g1[i].trajectory.tokens == g2[i].trajectory.tokens);

  req.labels.push_back({0, 1});
  CHECK_THROWS_AS(generate_sample(ck, req), DomainError);
}

TEST_CASE("single and batched generation agree on the trajectory length contract") {
  const auto ck = initialize_checkpoint(small_model(), 0);
  Rng rng = make_rng(1);
  CHECK_THROWS_AS(generate_trajectory(ck, 1, 2, 1.0, rng), ConfigError);
  CHECK(generate_trajectory(ck, 1, 2, 1.0, rng, 7).size() == 7);
}
