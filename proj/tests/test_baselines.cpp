#include <doctest.h>

#include <cmath>
#include <random>

#include "hcrl/baselines.hpp"

using namespace hcrl;

namespace {

std::vector<Transition> random_items(int n, int task, std::uint64_t seed, Index ds = 2, Index da = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<Transition> out;
  for (int i = 0; i < n; ++i) {
    Transition t;
    t.s = Eigen::VectorXd(ds);
    t.a = Eigen::VectorXd(da);
    t.s_next = Eigen::VectorXd(ds);
    for (auto* v : {&t.s, &t.a, &t.s_next}) {
      for (Index k = 0; k < v->size(); ++k) (*v)[k] = n01(rng);
    }
    t.task_id = task;
    out.push_back(t);
  }
  return out;
}

ReplayBuffer fill(const std::vector<Transition>& items, int task) {
  ReplayBuffer b(items.size() + 1);
  b.reset(task);
  for (const auto& t : items) b.add(t);
  return b;
}

}  // namespace

TEST_CASE("multi-head layout") {
  Engine rng(1);
  MultiHeadNet net(target_spec(2, 1, {4}), rng);
  net.add_head(rng);
  net.add_head(rng);
  CHECK(net.heads() == 2);
  CHECK(net.params().size() == net.trunk_size() + 2 * net.head_size());
  CHECK(net.trunk_size() + net.head_size() == net.spec().param_count());
  const Params p2 = net.task_params(2);
  CHECK(p2.flat.head(net.trunk_size()) == net.params().head(net.trunk_size()));
  CHECK(p2.flat.tail(net.head_size()) == net.params().tail(net.head_size()));
  CHECK_THROWS_AS(net.task_params(3), DataError);
}

TEST_CASE("EWC penalty") {
  EWCState st;
  st.lambda = 1.0;
  Eigen::VectorXd star(2), fisher(2), theta(2);
  star << 0.5, -1.0;
  fisher << 1.0, 2.0;
  st.anchors.push_back(EWCAnchor{star, fisher});
  theta = star + Eigen::VectorXd::Ones(2);
  CHECK(ewc_penalty(theta, st) == doctest::Approx(1.5));
  CHECK(ewc_penalty(star, st) == 0.0);

  Eigen::VectorXd g = Eigen::VectorXd::Zero(2);
  ewc_penalty_grad(star, st, g);
  CHECK(g.isZero(0.0));

  EWCState zero_f = st;
  zero_f.anchors[0].fisher.setZero();
  CHECK(ewc_penalty(theta, zero_f) == 0.0);
  EWCState off = st;
  off.lambda = 0.0;
  CHECK(ewc_penalty(theta, off) == 0.0);
}

TEST_CASE("empirical Fisher matches squared finite-difference gradients") {
  Engine rng(3);
  MultiHeadNet net(target_spec(2, 1, {3}), rng);
  net.add_head(rng);
  const auto items = random_items(6, 1, 5);
  const Normalizer norm = normalizer_fit(items);
  const Eigen::VectorXd f = empirical_fisher(net, 1, norm, items);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(net.params().size());
  const double h = 1e-6;
  for (const auto& t : items) {
    const Batch b = make_batch(std::vector<Transition>{t});
    for (Index i = 0; i < expected.size(); ++i) {
      MultiHeadNet p = net, q = net;
      p.params()[i] += h;
      q.params()[i] -= h;
      const double d = (dyn_loss(DynamicsModel{net.spec(), p.task_params(1), norm}, b) -
                        dyn_loss(DynamicsModel{net.spec(), q.task_params(1), norm}, b)) /
                       (2 * h);
      expected[i] += d * d;
    }
  }
  expected /= static_cast<double>(items.size());
  CHECK((f - expected).norm() / (f.norm() + expected.norm()) < 1e-4);

  MultiHeadNet flat = net;
  flat.params().setZero();
  std::vector<Transition> still = items;
  for (auto& t : still) t.s_next = t.s;
  CHECK(empirical_fisher(flat, 1, norm, still).isZero(0.0));
  CHECK_THROWS_AS(empirical_fisher(net, 1, norm, {}), PreconditionError);
}

TEST_CASE("SI path integral") {
  SUBCASE("no steps means no penalty") {
    Eigen::VectorXd theta = Eigen::VectorXd::Constant(3, 0.2);
    SIState st = make_si(theta, 1.0, 0.1);
    si_consolidate(st, theta);
    CHECK(si_penalty(theta + Eigen::VectorXd::Ones(3), st) == 0.0);
  }
  SUBCASE("one gradient step adds lr times g squared") {
    Eigen::VectorXd theta(2), g(2);
    theta << 1.0, -1.0;
    g << 0.4, -2.0;
    SIState st = make_si(theta, 1.0, 0.1);
    const double lr = 0.05;
    si_track(st, theta, theta - lr * g, g);
    CHECK(st.path_accumulator[0] == doctest::Approx(lr * 0.16));
    CHECK(st.path_accumulator[1] == doctest::Approx(lr * 4.0));
  }
  SUBCASE("importance on a one-parameter quadratic follows the scalar recursion") {
    const double lr = 0.1, xi = 0.1;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(1);
    SIState st = make_si(theta, 1.0, xi);
    double p = 0.0, path = 0.0;
    for (int k = 0; k < 30; ++k) {
      const double g = 2.0 * (p - 2.0);
      path += -g * (-lr * g);
      p -= lr * g;
      Eigen::VectorXd gv = Eigen::VectorXd::Constant(1, 2.0 * (theta[0] - 2.0));
      const Eigen::VectorXd before = theta;
      theta -= lr * gv;
      si_track(st, before, theta, gv);
    }
    si_consolidate(st, theta);
    CHECK(st.omega[0] == doctest::Approx(path / (p * p + xi)).epsilon(1e-12));
    CHECK(si_penalty(theta, st) == 0.0);
    CHECK(si_penalty(theta + Eigen::VectorXd::Ones(1), st) == doctest::Approx(st.omega[0]));
  }
  SUBCASE("zero strength disables the penalty") {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(2);
    SIState st = make_si(theta, 0.0, 0.1);
    st.omega.setOnes();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(2);
    si_penalty_grad(Eigen::VectorXd::Ones(2), st, g);
    CHECK(g.isZero(0.0));
    CHECK(si_penalty(Eigen::VectorXd::Ones(2), st) == 0.0);
  }
}

TEST_CASE("coreset keeps one percent per task") {
  CHECK(coreset_quota(4000) == 40);
  CHECK(coreset_quota(3000) == 30);
  CHECK(coreset_quota(4001) == 41);
  CHECK(coreset_quota(30) == 1);
  CHECK(coreset_quota(1) == 1);
  CHECK(coreset_quota(0) == 0);

  const ReplayBuffer b1 = fill(random_items(4000, 1, 1), 1);
  const ReplayBuffer b2 = fill(random_items(250, 2, 2), 2);
  Coreset cs;
  Engine rng(4);
  coreset_update(cs, b1, rng);
  coreset_update(cs, b2, rng);
  CHECK(cs.kept.size() == 43);
  CHECK(cs.per_task == std::vector<std::size_t>{40, 3});
  int from1 = 0;
  for (const auto& t : cs.kept) from1 += t.task_id == 1 ? 1 : 0;
  CHECK(from1 == 40);

  Coreset again;
  Engine rng2(4);
  coreset_update(again, b1, rng2);
  for (std::size_t i = 0; i < 40; ++i) CHECK(again.kept[i].s == cs.kept[i].s);
}

TEST_CASE("mixed batches") {
  const ReplayBuffer cur = fill(random_items(50, 2, 7), 2);
  Engine rng(5);
  auto [c1, p1] = mixed_batch(cur, {}, 100, rng);
  CHECK(c1.size() == 100);
  CHECK(p1.empty());

  const auto past = random_items(20, 1, 8);
  auto [c2, p2] = mixed_batch(cur, past, 100, rng);
  CHECK(c2.size() == 100);
  CHECK(p2.size() == 100);
  for (int id : c2.task_ids) CHECK(id == 2);
  for (int id : p2.task_ids) CHECK(id == 1);
}
