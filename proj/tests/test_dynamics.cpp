#include <doctest.h>

#include <cmath>
#include <random>

#include "hcrl/dynamics.hpp"

using namespace hcrl;

namespace {

Transition make_transition(Eigen::VectorXd s, Eigen::VectorXd a, Eigen::VectorXd s_next, int task = 1) {
  return Transition{std::move(s), std::move(a), std::move(s_next), task};
}

Eigen::VectorXd vec2(double x, double y) {
  Eigen::VectorXd v(2);
  v << x, y;
  return v;
}

DynamicsModel zero_model(Index ds, Index da) {
  const MLPSpec spec = target_spec(ds, da, {4});
  return DynamicsModel{spec, Params{Eigen::VectorXd::Zero(spec.param_count())}, Normalizer(ds + da)};
}

}  // namespace

TEST_CASE("zero theta predicts no change") {
  DynamicsModel m = zero_model(2, 1);
  m.norm.delta_scale = vec2(0.5, 3.0);
  const Eigen::VectorXd s = vec2(0.3, -1.2);
  CHECK(m.predict_next(s, Eigen::VectorXd::Ones(1)) == s);
}

TEST_CASE("dynamics loss conventions") {
  const DynamicsModel m = zero_model(2, 1);
  const Eigen::VectorXd a = Eigen::VectorXd::Zero(1);
  SUBCASE("perfect model") {
    const Batch b = make_batch({make_transition(vec2(1, 2), a, vec2(1, 2))});
    CHECK(dyn_loss(m, b) == 0.0);
  }
  SUBCASE("3-4-5 error") {
    const Batch b = make_batch({make_transition(vec2(0, 0), a, vec2(3, 4))});
    CHECK(dyn_loss(m, b) == doctest::Approx(5.0));
    CHECK(dyn_loss(m, b, DynLoss::MeanSquaredNorm) == doctest::Approx(25.0));
  }
  SUBCASE("batch mean") {
    const Batch b = make_batch({make_transition(vec2(0, 0), a, vec2(3, 4)), make_transition(vec2(1, 1), a, vec2(1, 1))});
    CHECK(dyn_loss(m, b) == doctest::Approx(2.5));
  }
  SUBCASE("empty batch") { CHECK_THROWS_AS(dyn_loss(m, Batch{}), PreconditionError); }
}

TEST_CASE("dynamics loss gradient matches finite differences") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01(0.0, 1.0);
  const MLPSpec spec = target_spec(3, 2, {6, 5});
  std::vector<Transition> items;
  for (int i = 0; i < 12; ++i) {
    Eigen::VectorXd s(3), a(2), sn(3);
    for (auto* v : {&s, &a, &sn}) {
      for (Index k = 0; k < v->size(); ++k) (*v)[k] = n01(rng);
    }
    items.push_back(make_transition(s, a, sn));
  }
  const Batch b = make_batch(items);
  Normalizer norm = normalizer_fit(items);
  for (DynLoss kind : {DynLoss::MeanNorm, DynLoss::MeanSquaredNorm}) {
    for (int trial = 0; trial < 5; ++trial) {
      DynamicsModel m{spec, xavier_init(spec, static_cast<std::uint64_t>(trial)), norm};
      for (Index i = 0; i < m.theta.flat.size(); ++i) m.theta.flat[i] += 0.1 * n01(rng);
      const auto g = dyn_loss_and_grad(m, b, kind, 0.7);
      CHECK(g.loss == doctest::Approx(0.7 * dyn_loss(m, b, kind)).epsilon(1e-12));
      Eigen::VectorXd fd(m.theta.flat.size());
      const double h = 1e-5;
      for (Index i = 0; i < fd.size(); ++i) {
        DynamicsModel p = m, q = m;
        p.theta.flat[i] += h;
        q.theta.flat[i] -= h;
        fd[i] = 0.7 * (dyn_loss(p, b, kind) - dyn_loss(q, b, kind)) / (2 * h);
      }
      CHECK((g.grad_theta - fd).norm() / (g.grad_theta.norm() + fd.norm()) < 1e-4);
    }
  }
}

TEST_CASE("normalizer") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<Transition> items;
  for (int i = 0; i < 5000; ++i) {
    Eigen::VectorXd a(1);
    a << n01(rng);
    items.push_back(make_transition(vec2(7.5, n01(rng)), a, vec2(7.5, 0.0)));
  }
  const Normalizer n = normalizer_fit(items);
  SUBCASE("constant column maps to zero") {
    for (int i = 0; i < 10; ++i) CHECK(n.apply(items[i].s, items[i].a)[0] == 0.0);
  }
  SUBCASE("standard normal column keeps unit spread") {
    for (Index col : {Index{1}, Index{2}}) {
      double sum = 0.0, sq = 0.0;
      for (const auto& t : items) {
        const double z = n.apply(t.s, t.a)[col];
        sum += z;
        sq += z * z;
      }
      const double mean = sum / static_cast<double>(items.size());
      const double sd = std::sqrt(sq / static_cast<double>(items.size()) - mean * mean);
      CHECK(std::abs(sd - 1.0) < 0.05);
    }
  }
  SUBCASE("fitting is idempotent") { CHECK(normalizer_fit(items) == n); }
  SUBCASE("empty input") { CHECK_THROWS_AS(normalizer_fit(std::vector<Transition>{}), PreconditionError); }
}

TEST_CASE("replay buffer") {
  ReplayBuffer buf;
  buf.reset(2);
  Engine rng(1);
  CHECK_THROWS_AS(buffer_sample(buf, 4, rng), PreconditionError);
  buf.add(make_transition(vec2(1, 2), Eigen::VectorXd::Ones(1), vec2(3, 4), 2));
  CHECK_THROWS_AS(buf.add(make_transition(vec2(0, 0), Eigen::VectorXd::Ones(1), vec2(0, 0), 1)), DataError);

  const Batch b = buffer_sample(buf, 100, rng);
  CHECK(b.size() == 100);
  for (Index c = 0; c < b.size(); ++c) CHECK(b.next_states.col(c) == vec2(3, 4));

  for (int i = 0; i < 20; ++i) buf.add(make_transition(vec2(i, 0), Eigen::VectorXd::Ones(1), vec2(i, 1), 2));
  Engine r1(42), r2(42);
  CHECK(buffer_sample(buf, 16, r1).states == buffer_sample(buf, 16, r2).states);

  buf.reset(3);
  CHECK(buf.empty());
  CHECK(buf.task_id() == 3);
}
