// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "gplasdi/errors.hpp"
#include "gplasdi/trainer.hpp"

using namespace gplasdi;

namespace {

// Smooth moving-bump fields on a 1-D strip of `nu` nodes.
SnapshotTensor toy_tensor(std::vector<ParameterVector> grid, std::size_t nu = 8, std::size_t nt = 10) {
  SnapshotTensor t;
  t.parameters = std::move(grid);
  for (std::size_t n = 0; n <= nt; ++n) t.times.push_back(0.001 * static_cast<double>(n));
  for (const auto& mu : t.parameters) {
    DenseMatrix u(nt + 1, nu);
    for (std::size_t n = 0; n <= nt; ++n) {
      const double s = static_cast<double>(n) / static_cast<double>(nt);
      for (std::size_t k = 0; k < nu; ++k) {
        const double x = static_cast<double>(k) / static_cast<double>(nu - 1);
        const double c = 0.1 + 8.0 * mu.speed * s;
        u(n, k) = 300.0 + mu.power * s * std::exp(-(x - c) * (x - c) / 0.05);
      }
    }
    t.values.push_back(std::move(u));
  }
  return t;
}

std::vector<ParameterVector> lattice(std::size_t np, std::size_t ns) {
  std::vector<ParameterVector> g;
  for (std::size_t i = 0; i < np; ++i)
    for (std::size_t j = 0; j < ns; ++j)
      g.push_back({120.0 + 40.0 * static_cast<double>(i) / static_cast<double>(np - 1),
                   0.08 + 0.04 * static_cast<double>(j) / static_cast<double>(ns - 1)});
  return g;
}

TrainConfig toy_config() {
  TrainConfig c;
  c.hidden_widths = {6};
  c.latent_dim = 2;
  c.n_epochs = 0;
  c.n_greedy = 1000;
  c.n_uq_samples = 5;
  c.seed = 11;
  return c;
}

struct Toy {
  SnapshotTensor data;
  TrainConfig config;
  TrainingBatch batch;
  TrainState state;

  explicit Toy(TrainConfig c, std::vector<ParameterVector> grid = lattice(2, 2))
      : data(toy_tensor(std::move(grid))), config(std::move(c)) {
    state = initialize_training(data, config, batch);
  }
};

void randomize_xi(TrainState& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& xi : s.xi_all)
    for (double& v : xi.xi.values()) v = u(rng);
}

}  // namespace

TEST_CASE("total loss examples") {
  TrainConfig c = toy_config();
  Toy toy(c);
  randomize_xi(toy.state, 1);

  c.beta2 = 0.0;
  c.beta3 = 0.0;
  c.beta1 = 2.5;
  const LossBreakdown ae_only = total_loss(toy.state, toy.batch, c);
  CHECK(ae_only.total == 2.5 * ae_only.ae);

  TrainState single = toy.state;
  single.mlp = MLPParameters::initialized({8, 6, 5}, 3);
  single.xi_all = {CoefficientMatrix(DenseMatrix(5, 6, 1.0))};
  const TrainingBatch one = TrainingBatch::from({toy.batch.samples[0]});
  c.beta1 = 0.0;
  c.beta2 = 0.0;
  c.beta3 = 0.3;
  CHECK(total_loss(single, one, c).total == doctest::Approx(0.3 * 30.0).epsilon(1e-15));
}

TEST_CASE("total loss equals the sum of independently computed parts") {
  TrainConfig c = toy_config();
  c.beta1 = 1.3;
  c.beta2 = 0.7;
  c.beta3 = 0.2;
  Toy toy(c);
  randomize_xi(toy.state, 2);

  const double ae = reconstruction_loss(toy.state.mlp, toy.batch.samples);
  LatentTrajectorySet z;
  for (const auto& s : toy.batch.samples) z.values.push_back(encode(toy.state.mlp, s));
  const double sindy = sindy_loss(z, toy.state.xi_all, toy.state.latent_dt());
  double reg = 0.0;
  for (const auto& xi : toy.state.xi_all)
    for (double v : xi.xi.values()) reg += v * v;

  const LossBreakdown l = total_loss(toy.state, toy.batch, c);
  CHECK(std::abs(l.ae - ae) <= 1e-12 * ae);
  CHECK(std::abs(l.sindy - sindy) <= 1e-12 * sindy);
  CHECK(std::abs(l.reg - reg) <= 1e-12 * reg);
  CHECK(std::abs(l.total - (1.3 * ae + 0.7 * sindy + 0.2 * reg)) <= 1e-12 * l.total);

  const Gradients g = compute_gradients(toy.state, toy.batch, c);
  CHECK(std::abs(g.loss.total - l.total) <= 1e-12 * l.total);
}

TEST_CASE("reverse-mode gradients match central differences, including the encoder path") {
  TrainConfig c = toy_config();
  c.beta1 = 1.0;
  c.beta2 = 0.7;
  c.beta3 = 0.3;
  Toy toy(c);
  randomize_xi(toy.state, 3);
  // Non-zero biases so every parameter is exercised.
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (DenseMatrix* t : toy.state.mlp.tensors())
    if (t->rows() == 1)
      for (double& v : t->values()) v = u(rng);

  const Gradients g = compute_gradients(toy.state, toy.batch, c);
  const double h = 1e-6;
  auto check = [&](double& w, double analytic) {
    const double saved = w;
    w = saved + h;
    const double up = total_loss(toy.state, toy.batch, c).total;
    w = saved - h;
    const double down = total_loss(toy.state, toy.batch, c).total;
    w = saved;
    const double fd = (up - down) / (2.0 * h);
    CHECK(std::abs(analytic - fd) <= 1e-5 * std::max({std::abs(analytic), std::abs(fd), 1e-3}));
  };
  auto tensors = toy.state.mlp.tensors();
  for (std::size_t t = 0; t < tensors.size(); ++t)
    for (std::size_t k = 0; k < tensors[t]->size(); ++k) check(tensors[t]->values()[k], g.mlp[t].values()[k]);
  for (std::size_t i = 0; i < toy.state.xi_all.size(); ++i)
    for (std::size_t k = 0; k < toy.state.xi_all[i].xi.size(); ++k)
      check(toy.state.xi_all[i].xi.values()[k], g.xi[i].values()[k]);
}

TEST_CASE("every encoder weight influences the sindy loss") {
  TrainConfig c = toy_config();
  Toy toy(c);
  randomize_xi(toy.state, 5);
  const double base = total_loss(toy.state, toy.batch, c).sindy;
  const std::size_t n_enc = 2 * toy.state.mlp.encoder.n_layers();
  auto tensors = toy.state.mlp.tensors();
  for (std::size_t t = 0; t < n_enc; t += 2) {
    for (double& w : tensors[t]->values()) {
      const double saved = w;
      w = saved + 1e-4;
      CHECK(total_loss(toy.state, toy.batch, c).sindy != base);
      w = saved;
    }
  }
}

TEST_CASE("train_epoch determinism, lr = 0 and divergence") {
  TrainConfig c = toy_config();
  c.lr = 1e-3;
  Toy a(c), b(c);
  for (int e = 0; e < 20; ++e) {
    train_epoch(a.state, a.batch, c);
    train_epoch(b.state, b.batch, c);
  }
  REQUIRE(a.state.loss_history.size() == 20);
  for (std::size_t k = 0; k < 20; ++k) {
    CHECK(a.state.loss_history[k].epoch == static_cast<long>(k));
    CHECK(a.state.loss_history[k].loss.total == b.state.loss_history[k].loss.total);
  }
  CHECK(a.state.xi_all == b.state.xi_all);

  TrainConfig frozen = c;
  frozen.lr = 0.0;
  Toy z(frozen);
  const TrainState before = z.state;
  for (int e = 0; e < 3; ++e) train_epoch(z.state, z.batch, frozen);
  CHECK(z.state.xi_all == before.xi_all);
  for (std::size_t t = 0; t < before.mlp.tensors().size(); ++t)
    CHECK(*z.state.mlp.tensors()[t] == *before.mlp.tensors()[t]);
  CHECK(z.state.loss_history.size() == 3);

  Toy bad(c);
  bad.state.mlp.encoder.weights[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(train_epoch(bad.state, bad.batch, c), NonFiniteLoss);
}

TEST_CASE("loss decreases over every 100-epoch window on a two-sample toy problem") {
  TrainConfig c = toy_config();
  c.initial_samples = {0, 3};
  c.lr = 1e-3;
  Toy toy(c);
  for (int e = 0; e < 500; ++e) train_epoch(toy.state, toy.batch, c);
  const auto& h = toy.state.loss_history;
  REQUIRE(h.size() == 500);
  double worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 100 < h.size(); ++k) {
    CHECK(h[k + 100].loss.total < h[k].loss.total);
    worst_margin = std::min(worst_margin, h[k].loss.total - h[k + 100].loss.total);
  }
  MESSAGE("smallest 100-epoch decrease: " << worst_margin);
  for (const auto& r : h) {
    const LossBreakdown& l = r.loss;
    CHECK(std::abs(l.total - (c.beta1 * l.ae + c.beta2 * l.sindy + c.beta3 * l.reg)) <= 1e-12 * l.total);
  }
}

TEST_CASE("greedy selection") {
  const auto grid = lattice(3, 3);
  TrainConfig c = toy_config();
  Toy toy(c, grid);
  std::vector<DenseMatrix> initial;
  for (const auto& m : toy.data.values)
    initial.push_back(toy.state.normalization.apply(DenseMatrix(1, m.cols(), {m.row(0).begin(), m.row(0).end()})));

  DenseMatrix mean_xi(2, 3);
  mean_xi(0, 0) = 0.2;
  mean_xi(1, 2) = -0.4;
  auto with_std = [&](auto std_of) {
    return [=](const ParameterVector& mu) {
      return XiPosterior{CoefficientMatrix(mean_xi), DenseMatrix(2, 3, std_of(mu))};
    };
  };

  SUBCASE("single remaining candidate") {
    TrainState s = toy.state;
    s.active_set = {0, 1, 2, 3, 5, 6, 7, 8};
    const auto pick = greedy_select(s, grid, initial, with_std([](const ParameterVector&) { return 0.1; }), c, 1);
    CHECK(pick.index == 4);
  }
  SUBCASE("zero spread ties go to the lowest candidate index") {
    const auto pick = greedy_select(toy.state, grid, initial, with_std([](const ParameterVector&) { return 0.0; }), c, 1);
    CHECK(pick.score == 0.0);
    CHECK(pick.index == 1);
  }
  SUBCASE("the candidate with ten times the spread wins") {
    const ParameterVector target = grid[5];
    auto post = with_std([target](const ParameterVector& mu) { return mu == target ? 0.1 : 0.01; });
    const auto pick = greedy_select(toy.state, grid, initial, post, c, 3);
    CHECK(pick.index == 5);
    const auto again = greedy_select(toy.state, grid, initial, post, c, 3);
    CHECK(again.score == pick.score);
  }
  SUBCASE("blow-up scores infinite") {
    DenseMatrix wild(2, 3);
    wild(0, 1) = 60.0;
    wild(1, 2) = 60.0;
    auto post = [&](const ParameterVector& mu) {
      return XiPosterior{CoefficientMatrix(mu == grid[7] ? wild : mean_xi), DenseMatrix(2, 3, 0.01)};
    };
    const auto pick = greedy_select(toy.state, grid, initial, post, c, 3);
    CHECK(pick.index == 7);
    CHECK(std::isinf(pick.score));
  }
  SUBCASE("no candidates") {
    TrainState s = toy.state;
    s.active_set = {0, 1, 2, 3, 4, 5, 6, 7, 8};
    CHECK_THROWS_AS(greedy_select(s, grid, initial, with_std([](const ParameterVector&) { return 0.1; }), c, 1),
                    NoCandidates);
  }
  SUBCASE("gp-backed selection returns a non-active index deterministically") {
    const GPSurrogate gp = fit_state_gp(toy.state, grid, c);
    const std::size_t a = greedy_select(toy.state, toy.data, gp, c, 9);
    const std::size_t b = greedy_select(toy.state, toy.data, gp, c, 9);
    CHECK(a == b);
    CHECK(std::find(toy.state.active_set.begin(), toy.state.active_set.end(), a) == toy.state.active_set.end());
  }
}

TEST_CASE("lattice corners") {
  CHECK(lattice_corners(lattice(5, 5)) == std::vector<std::size_t>{0, 4, 20, 24});
  CHECK(lattice_corners(lattice(3, 2)) == std::vector<std::size_t>{0, 1, 4, 5});
  const std::vector<ParameterVector> ragged{{1, 1}, {1, 2}, {2, 1}};
  CHECK_THROWS_AS(lattice_corners(ragged), InvalidArgument);
}

TEST_CASE("greedy schedule arithmetic") {
  const auto grid = lattice(3, 3);
  const SnapshotTensor data = toy_tensor(grid);
  TrainConfig c = toy_config();
  c.n_epochs = 5;
  c.n_greedy = 10;
  CHECK(run_training(data, c).state.active_set == std::vector<std::size_t>{0, 2, 6, 8});

  c.n_epochs = 50;
  std::size_t events = 0;
  TrainingObserver obs;
  obs.on_greedy = [&](const TrainState&, const GPSurrogate&, std::size_t) { ++events; };
  const TrainingResult r = run_training(data, c, obs);
  CHECK(events == 4);
  CHECK(r.state.active_set.size() == 8);
  CHECK(r.state.xi_all.size() == 8);
  CHECK(r.gp.n_train() == 8);
  CHECK(r.state.loss_history.size() == 50);
}

TEST_CASE("larger β3 gives a smaller coefficient norm") {
  std::vector<double> norms;
  for (double beta3 : {0.0, 1.0, 10.0}) {
    TrainConfig c = toy_config();
    c.beta3 = beta3;
    c.lr = 1e-3;
    c.n_epochs = 300;
    const TrainingResult r = run_training(toy_tensor(lattice(2, 2)), c);
    double sq = 0.0;
    for (const auto& xi : r.state.xi_all) sq += xi.xi.squared_norm();
    norms.push_back(std::sqrt(sq));
  }
  MESSAGE("‖Ξ‖ for β3 = 0, 1, 10: " << norms[0] << ", " << norms[1] << ", " << norms[2]);
  CHECK(norms[1] <= 1.05 * norms[0]);
  CHECK(norms[2] <= 1.05 * norms[1]);
}

TEST_CASE("configuration validation") {
  TrainConfig c = toy_config();
  c.initial_samples = {0, 0};
  CHECK_THROWS_AS(c.validate(4), InvalidArgument);
  c.initial_samples = {7};
  CHECK_THROWS_AS(c.validate(4), InvalidArgument);
  c = toy_config();
  c.beta3 = -1.0;
  CHECK_THROWS_AS(c.validate(4), InvalidArgument);
  c = toy_config();
  c.n_greedy = 0;
  CHECK_THROWS_AS(c.validate(4), InvalidArgument);
  CHECK(toy_config().layer_sizes(8) == std::vector<std::size_t>{8, 6, 2});
  CHECK(latent_times(std::vector<double>{2.0, 2.5, 3.0}) == std::vector<double>{0.0, 1.0, 2.0});
  CHECK_THROWS_AS(latent_times(std::vector<double>{1.0, 1.0}), DegenerateTrajectory);
}
