#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "branchlab/replay.hpp"
#include "test_oracles.hpp"

using namespace branchlab;

namespace {

Experience make_exp(int64_t target, double predicted, int64_t v_root) {
  Experience exp;
  exp.instance_id = "i";
  exp.static_features = std::make_shared<const std::vector<double>>(std::vector<double>{1.0});
  exp.dynamic_features = {0.5};
  exp.action = 0;
  exp.target = target;
  exp.predicted = predicted;
  exp.v_root = v_root;
  return exp;
}

}  // namespace

TEST_CASE("eviction is strictly oldest-first") {
  ReplayBuffer buf(2);
  buf.push({make_exp(3, 1.0, 5), make_exp(5, 1.0, 9), make_exp(7, 1.0, 11)});
  CHECK(buf.size() == 2);
  CHECK(buf.pushed_total() == 3);
  CHECK_FALSE(buf.contains(0));  // first evicted
  CHECK(buf.get(1).target == 5);
  CHECK(buf.get(2).target == 7);
}

TEST_CASE("push of an empty list is a no-op and counters track length") {
  ReplayBuffer buf(4);
  buf.push({});
  CHECK(buf.size() == 0);
  CHECK(buf.pushed_total() == 0);
  buf.push({make_exp(3, 2.0, 4), make_exp(4, 2.0, 4)});
  CHECK(buf.pushed_total() == 2);
  CHECK(buf.size() == 2);
}

TEST_CASE("invariant violations are rejected with a diagnostic") {
  ReplayBuffer buf(4);
  CHECK_THROWS_AS(buf.push({make_exp(2, 1.0, 5)}), std::invalid_argument);   // target < 3
  CHECK_THROWS_AS(buf.push({make_exp(6, 1.0, 5)}), std::invalid_argument);   // v_root < target
  CHECK_THROWS_AS(buf.push({make_exp(6, std::nan(""), 8)}), std::invalid_argument);
  Rng rng(1);
  CHECK_THROWS_AS(buf.sample(1, SampleMode::uniform, rng), std::runtime_error);
}

TEST_CASE("priorities follow the normalized-error rule") {
  CHECK(experience_priority(10, 10.0) == doctest::Approx(kPriorityEps));
  CHECK(experience_priority(10, 6.0) == doctest::Approx(0.4 + kPriorityEps));
  CHECK(experience_priority(10, 2.0) == doctest::Approx(0.8 + kPriorityEps));
  // Two experiences with normalized errors 1.0 and 3.0 sample at 1/4 and 3/4.
  double p1 = 1.0 + kPriorityEps, p2 = 3.0 + kPriorityEps;
  CHECK(p1 / (p1 + p2) == doctest::Approx(0.25).epsilon(1e-3));
}

TEST_CASE("prioritized frequencies match Eq-style normalized priorities") {
  ReplayBuffer buf(8);
  // Targets chosen so |target - 0| / target = 1 for all, then vary predicted.
  buf.push({make_exp(10, 0.0, 20),    // error 1.0
            make_exp(10, 5.0, 20),    // error 0.5
            make_exp(10, 8.0, 20),    // error 0.2
            make_exp(10, 9.0, 20)});  // error 0.1
  Rng rng(999);
  std::vector<int64_t> counts(4, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    auto s = buf.sample(1, SampleMode::prioritized, rng);
    counts[s[0].id]++;
  }
  double total = 1.0 + 0.5 + 0.2 + 0.1 + 4 * kPriorityEps;
  std::vector<double> expected;
  for (double e : {1.0, 0.5, 0.2, 0.1})
    expected.push_back(draws * (e + kPriorityEps) / total);
  CHECK(testlab::chi_square_p_value(counts, expected) > 0.01);
}

TEST_CASE("equal priorities reduce prioritized to uniform") {
  ReplayBuffer buf(4);
  buf.push({make_exp(10, 5.0, 20), make_exp(20, 10.0, 40), make_exp(30, 15.0, 60)});
  Rng rng(5);
  std::vector<int64_t> counts(3, 0);
  const int draws = 60000;
  for (int i = 0; i < draws; ++i) counts[buf.sample(1, SampleMode::prioritized, rng)[0].id]++;
  std::vector<double> expected(3, draws / 3.0);
  CHECK(testlab::chi_square_p_value(counts, expected) > 0.01);
}

TEST_CASE("uniform sampling is equiprobable with replacement") {
  ReplayBuffer buf(4);
  buf.push({make_exp(3, 1.0, 3), make_exp(4, 1.0, 4), make_exp(5, 1.0, 5), make_exp(6, 1.0, 6)});
  Rng rng(31);
  std::vector<int64_t> counts(4, 0);
  const int draws = 80000;
  for (int i = 0; i < draws; ++i) counts[buf.sample(1, SampleMode::uniform, rng)[0].id]++;
  std::vector<double> expected(4, draws / 4.0);
  CHECK(testlab::chi_square_p_value(counts, expected) > 0.01);
}

TEST_CASE("update_priorities recomputes and skips stale ids") {
  ReplayBuffer buf(2);
  buf.push({make_exp(10, 5.0, 20), make_exp(10, 5.0, 20)});
  std::vector<uint64_t> ids{0, 1};
  std::vector<double> preds{10.0, 2.5};
  buf.update_priorities(ids, preds);
  CHECK(buf.get(0).priority == doctest::Approx(kPriorityEps));
  CHECK(buf.get(1).priority == doctest::Approx(0.75 + kPriorityEps));

  buf.push({make_exp(4, 1.0, 6)});  // evicts id 0
  buf.update_priorities(std::vector<uint64_t>{0}, std::vector<double>{3.0});
  CHECK(buf.stale_skipped() == 1);

  // Doubling the error doubles the priority up to the floor term.
  double p_single = experience_priority(10, 8.0) - kPriorityEps;
  double p_double = experience_priority(10, 6.0) - kPriorityEps;
  CHECK(p_double == doctest::Approx(2.0 * p_single));
}

TEST_CASE("debug dump lists live experiences in insertion order") {
  ReplayBuffer buf(2);
  buf.push({make_exp(4, 1.0, 6), make_exp(5, 2.0, 7), make_exp(6, 3.0, 8)});
  auto path = std::filesystem::temp_directory_path() / "branchlab_replay_dump.json";
  buf.dump(path);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string body = ss.str();
  CHECK(body.find("\"pushed_total\": 3") != std::string::npos);
  CHECK(body.find("\"target\": 5") != std::string::npos);  // id 1 survives
  CHECK(body.find("\"target\": 4") == std::string::npos);  // id 0 evicted
  std::filesystem::remove(path);
}

TEST_CASE("sampling is deterministic given the rng state") {
  ReplayBuffer buf(8);
  buf.push({make_exp(10, 1.0, 20), make_exp(12, 2.0, 30), make_exp(14, 3.0, 40)});
  Rng a(77), b(77);
  for (int i = 0; i < 100; ++i) {
    auto sa = buf.sample(2, SampleMode::prioritized, a);
    auto sb = buf.sample(2, SampleMode::prioritized, b);
    CHECK(sa[0].id == sb[0].id);
    CHECK(sa[1].id == sb[1].id);
  }
}
