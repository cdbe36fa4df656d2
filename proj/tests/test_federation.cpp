#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bmfl/channel.hpp"
#include "bmfl/error.hpp"
#include "bmfl/federation.hpp"
#include "bmfl/network.hpp"
#include "support.hpp"

namespace bmfl {
namespace {

ModelWeights params_model(std::vector<double> v) {
  // A bias-only output layer over v.size() - 1 inputs gives any length >= 2.
  MlpSpec spec{{v.size() - 1, 1}, Activation::Relu};
  ModelWeights w = zero_weights(spec);
  w.params = std::move(v);
  return w;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::IoError;
}

TEST(Federation, CleanDataFiltersByRadiusAndFrequency) {
  const auto m = test::msbs_at(0, {0, 0}, 8, 3, 10.0);
  const std::vector<Vec2> users{{1, 0}, {20, 0}, {0, 9.9}};
  ParticipationLedger ledger(3);
  // Round 1: N_total = 0, so only the radius matters.
  EXPECT_EQ(clean_data(m, users, ledger, 0.5), (std::vector<std::uint8_t>{1, 0, 1}));
  EXPECT_EQ(ledger.total, 1);
  EXPECT_EQ(ledger.perUser, (std::vector<std::int64_t>{1, 0, 1}));
  EXPECT_DOUBLE_EQ(ledger.frequency(0), 1.0);
  // Both near users now sit at frequency 1 > 0.5.
  EXPECT_EQ(clean_data(m, users, ledger, 0.5), (std::vector<std::uint8_t>{0, 0, 0}));
  EXPECT_DOUBLE_EQ(ledger.frequency(0), 0.5);
  EXPECT_EQ(clean_data(m, users, ledger, 0.5), (std::vector<std::uint8_t>{1, 0, 1}));
  EXPECT_EQ(code_of([&] { clean_data(m, users, ledger, 0.0); }), ErrorCode::RangeError);
}

TEST(Federation, LedgerFrequencyCappedByEtaPlusSlack) {
  const auto m = test::msbs_at(0, {50, 50}, 8, 3, 80.0);
  for (double eta : {0.3, 0.5, 0.8}) {
    std::vector<Vec2> users;
    for (int i = 0; i < 7; ++i) users.push_back({10.0 * i, 40.0});
    ParticipationLedger ledger(7);
    for (int r = 0; r < 200; ++r) clean_data(m, users, ledger, eta);
    for (int u = 0; u < 7; ++u) EXPECT_LE(ledger.frequency(u), eta + 1.0 / ledger.total);
  }
}

TEST(Federation, LocalUpdateScalarToy) {
  const auto g = params_model({1.0, 2.0});
  const std::vector<double> grad{0.4, -2.0};
  const auto t = local_update(g, grad, 0.1, 2.0);
  EXPECT_DOUBLE_EQ(t.params[0], 1.0 - 0.05 * 0.4);
  EXPECT_DOUBLE_EQ(t.params[1], 2.0 + 0.05 * 2.0);
  EXPECT_EQ(local_update(g, {}, 0.1, 2.0), g);
  EXPECT_EQ(code_of([&] { local_update(g, std::vector<double>{1.0}, 0.1, 2.0); }), ErrorCode::ShapeMismatch);
  EXPECT_EQ(code_of([&] { local_update(g, grad, 0.1, 0.0); }), ErrorCode::ZeroData);
}

TEST(Federation, AggregateWeightedScalarToy) {
  const std::vector<ModelWeights> ms{params_model({0.0, 0.0}), params_model({4.0, 4.0})};
  const std::vector<double> k{1.0, 3.0};
  const auto g = aggregate(ms, k);
  EXPECT_EQ(g.params[0], 3.0);
  EXPECT_EQ(g.params[1], 3.0);
}

TEST(Federation, AggregateIdentityOnIdenticalModels) {
  Rng r(2);
  const auto w = init_weights(MlpSpec::q_network(11), r);
  const std::vector<ModelWeights> ms(5, w);
  const std::vector<double> k{1, 7, 2, 0.5, 3};
  EXPECT_EQ(aggregate(ms, k), w);
  const std::vector<ModelWeights> one{w};
  const std::vector<double> k1{4};
  EXPECT_EQ(aggregate(one, k1), w);
}

TEST(Federation, AggregatePermutationInvariantAndInsideHull) {
  Rng r(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ModelWeights> ms;
    std::vector<double> k;
    std::uniform_real_distribution<double> cnt(0.5, 40.0);
    for (int b = 0; b < 5; ++b) {
      ms.push_back(init_weights(MlpSpec::q_network(6, {5}), r));
      k.push_back(std::round(cnt(r)));
    }
    const auto g = aggregate(ms, k);
    std::vector<std::size_t> perm{4, 2, 0, 3, 1};
    std::vector<ModelWeights> pm;
    std::vector<double> pk;
    for (auto i : perm) {
      pm.push_back(ms[i]);
      pk.push_back(k[i]);
    }
    EXPECT_EQ(aggregate(pm, pk), g);
    const double K = std::accumulate(k.begin(), k.end(), 0.0);
    for (std::size_t i = 0; i < g.params.size(); ++i) {
      double lo = ms[0].params[i];
      double hi = lo;
      double mean = 0.0;
      for (std::size_t b = 0; b < ms.size(); ++b) {
        lo = std::min(lo, ms[b].params[i]);
        hi = std::max(hi, ms[b].params[i]);
        mean += k[b] / K * ms[b].params[i];
      }
      EXPECT_GE(g.params[i], lo);
      EXPECT_LE(g.params[i], hi);
      EXPECT_NEAR(g.params[i], mean, 1e-12);
    }
  }
}

TEST(Federation, AggregateErrors) {
  const std::vector<ModelWeights> none;
  const std::vector<double> nk;
  EXPECT_EQ(code_of([&] { aggregate(none, nk); }), ErrorCode::EmptyInput);
  const std::vector<ModelWeights> two{params_model({1, 2}), params_model({3, 4})};
  const std::vector<double> zeros{0, 0};
  EXPECT_EQ(code_of([&] { aggregate(two, zeros); }), ErrorCode::ZeroData);
  const std::vector<double> one{1};
  EXPECT_EQ(code_of([&] { aggregate(two, one); }), ErrorCode::ShapeMismatch);
  const std::vector<ModelWeights> mixed{params_model({1, 2}), params_model({1, 2, 3})};
  const std::vector<double> k2{1, 1};
  EXPECT_EQ(code_of([&] { aggregate(mixed, k2); }), ErrorCode::ShapeMismatch);
}

TEST(Federation, ComplexityEstimate) {
  auto sc = test::random_scenario(1, 6, 8, 3, 20);
  EXPECT_EQ(complexity_estimate(sc, 10, 10), 1300);
  EXPECT_EQ(complexity_estimate(sc, 0, 10), 0);
}

TEST(Federation, AutoRewardScaleIsPeakUserRate) {
  auto sc = test::random_scenario(1, 3, 8, 3, 12);
  FederationConfig cfg;
  const auto& c = sc.radio;
  const double snr = test::rx_mw(1.0, 0.0, c) / test::noise_mw(c.wMm, c);
  const double peak = 3 * c.wMm * std::log2(1.0 + snr);
  EXPECT_NEAR(reward_scale(cfg, sc) * peak, 1.0, 1e-12);
  cfg.rewardScale = 2.5;
  EXPECT_EQ(reward_scale(cfg, sc), 2.5);
}

TEST(Federation, SingleRoundSingleSlotSingleAgent) {
  auto sc = test::random_scenario(4, 1, 8, 3, 6);
  FederationConfig cfg;
  cfg.rounds = 1;
  cfg.slotsPerRound = 1;
  const auto r = run_bmfl(sc, Hyperparams{}, cfg);
  EXPECT_EQ(r.trace.iterationLoss.size(), 1u);
  EXPECT_EQ(r.trace.rows.size(), 1u);
  EXPECT_EQ(r.global, r.localModels[0]);
  EXPECT_EQ(r.aggregations, 1);
  EXPECT_EQ(r.envSlots, 1);
}

TEST(Federation, TrainingIsDeterministic) {
  auto sc = test::random_scenario(6, 2, 5, 2, 8);
  FederationConfig cfg;
  cfg.rounds = 4;
  const auto a = run_bmfl(sc, Hyperparams{}, cfg);
  const auto b = run_bmfl(sc, Hyperparams{}, cfg);
  EXPECT_EQ(a.global, b.global);
  EXPECT_EQ(a.trace.iterationLoss, b.trace.iterationLoss);
  EXPECT_EQ(a.finalPolicy, b.finalPolicy);
  std::ostringstream x;
  std::ostringstream y;
  write_trace_csv(x, a.trace);
  write_trace_csv(y, b.trace);
  EXPECT_EQ(x.str(), y.str());
  EXPECT_EQ(x.str().substr(0, x.str().find('\n')), "round,slot,msbsId,loss,reward,coverage,throughputBps");
}

TEST(Federation, DataCountsFollowParticipants) {
  auto sc = test::random_scenario(6, 3, 5, 2, 10);
  FederationConfig cfg;
  cfg.rounds = 2;
  cfg.slotsPerRound = 3;
  const auto r = run_bmfl(sc, Hyperparams{}, cfg);
  for (int b = 0; b < 3; ++b) {
    const auto& mask = r.participants[static_cast<std::size_t>(b)];
    const auto n = std::count(mask.begin(), mask.end(), 1);
    EXPECT_DOUBLE_EQ(r.dataCounts[static_cast<std::size_t>(b)], 3.0 * std::max<long>(1, n));
  }
  cfg.dataCount = DataCount::Slots;
  const auto s = run_bmfl(sc, Hyperparams{}, cfg);
  for (double k : s.dataCounts) EXPECT_DOUBLE_EQ(k, 3.0);
}

TEST(Federation, DeployedModelsApplyTheLocalCorrection) {
  auto sc = test::random_scenario(6, 2, 5, 2, 8);
  FederationConfig cfg;
  cfg.rounds = 2;
  Hyperparams hp;
  const auto r = run_bmfl(sc, hp, cfg);
  const auto d = deployed_models(r, hp, true);
  for (std::size_t b = 0; b < d.size(); ++b) {
    EXPECT_EQ(d[b], local_update(r.global, r.lastGradients[b], hp.lambda, r.dataCounts[b]));
  }
}

TEST(Federation, MixedBeamCountsRejected) {
  auto sc = test::random_scenario(1, 2, 8, 3, 4);
  sc.msbs[1].maxBeams = 2;
  EXPECT_EQ(code_of([&] { run_bmfl(sc, Hyperparams{}, FederationConfig{}); }), ErrorCode::ShapeMismatch);
}

}  // namespace
}  // namespace bmfl
