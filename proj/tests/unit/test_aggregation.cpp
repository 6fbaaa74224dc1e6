#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "gradcheck.hpp"
#include "orchnet/aggregation.hpp"

using namespace orchnet;

namespace {

FeatureMap example_map() {
  FeatureMap z(2, 3);
  z << 1, 2, 3, 4, 0, -1;
  return z;
}

OrchHead identity_head(HeadMode mode) {
  AggregationConfig cfg;
  cfg.channels = 2;
  cfg.dim = 2;
  cfg.mode = mode;
  OrchHead head(cfg);
  for (Linear* l : {&head.mac_head, &head.spoc_head, &head.gem_head}) {
    l->weight.values = Eigen::MatrixXd::Identity(2, 2);
    l->bias.values.setZero();
  }
  head.set_fusion_weights({1.0, 1.0, 1.0});
  head.set_gem_p(1.0);
  return head;
}

}  // namespace

TEST_SUITE("aggregation") {

TEST_CASE("pooling examples") {
  const FeatureMap z = example_map();
  CHECK(mac_pool(z) == Eigen::Vector2d(3, 4));
  CHECK(spoc_pool(z) == Eigen::Vector2d(2, 1));

  FeatureMap row(1, 3);
  row << 1, 2, 3;
  CHECK(gem_pool(row, 3.0)(0) == doctest::Approx(std::cbrt(12.0)).epsilon(1e-14));
  CHECK(gem_pool(row, 3.0)(0) == doctest::Approx(2.2894).epsilon(1e-4));
  CHECK(std::abs(gem_pool(row, 100.0)(0) - 3.0) <= 0.02 * 3.0);

  const FeatureMap k = FeatureMap::Constant(3, 5, 0.75);
  CHECK(mac_pool(k).isApprox(Eigen::VectorXd::Constant(3, 0.75)));
  CHECK(spoc_pool(k).isApprox(Eigen::VectorXd::Constant(3, 0.75)));
  CHECK(gem_pool(k, 3.0).isApprox(Eigen::VectorXd::Constant(3, 0.75)));

  FeatureMap single(3, 1);
  single << -1, 0.5, 2;
  CHECK(mac_pool(single) == single.col(0));
  CHECK(spoc_pool(single) == single.col(0));
}

TEST_CASE("gem with p = 1 equals spoc on nonnegative maps") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const FeatureMap z = oracle::random_matrix(rng, 6, 9, 0.0, 3.0);
    CHECK(oracle::relative_error(gem_pool(z, 1.0), spoc_pool(z)) < 1e-14);
  }
}

TEST_CASE("pooling matches loop references") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> pu(0.5, 6.0);
  for (int t = 0; t < 100; ++t) {
    const FeatureMap z = oracle::random_matrix(rng, 1 + t % 16, 1 + (t * 7) % 16, -2.0, 2.0);
    const double p = pu(rng);
    CHECK((mac_pool(z) - oracle::brute_mac(z)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((spoc_pool(z) - oracle::brute_spoc(z)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((gem_pool(z, p) - oracle::brute_gem(z, p)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("gem is monotone in p and bracketed by spoc and mac") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 50; ++t) {
    const FeatureMap z = oracle::random_matrix(rng, 5, 8, 0.0, 4.0);
    const Eigen::VectorXd lo = spoc_pool(z);
    const Eigen::VectorXd hi = mac_pool(z);
    Eigen::VectorXd prev = gem_pool(z, 1.0);
    for (double p : {1.5, 2.0, 3.0, 5.0, 10.0, 40.0}) {
      const Eigen::VectorXd g = gem_pool(z, p);
      CHECK((g.array() >= prev.array() - 1e-12).all());
      CHECK((g.array() >= lo.array() - 1e-12).all());
      CHECK((g.array() <= hi.array() + 1e-12).all());
      prev = g;
    }
  }
}

TEST_CASE("pooling ignores the order of support columns") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const FeatureMap z = oracle::random_matrix(rng, 4, 7, -1.0, 2.0);
    std::vector<Index> perm(7);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    FeatureMap zp(4, 7);
    for (Index s = 0; s < 7; ++s) zp.col(s) = z.col(perm[static_cast<std::size_t>(s)]);
    CHECK(mac_pool(zp) == mac_pool(z));
    CHECK(oracle::relative_error(spoc_pool(zp), spoc_pool(z)) < 1e-14);
    CHECK(oracle::relative_error(gem_pool(zp, 2.5), gem_pool(z, 2.5)) < 1e-14);
  }
}

TEST_CASE("head projection and fusion examples") {
  Linear head("h", 3, 3);
  head.weight.values = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::Vector3d pooled(0.5, -1.0, 2.0);
  CHECK(head_project(pooled, head) == Descriptor(pooled));

  Linear zero("z", 3, 2);
  zero.bias.values << 1.5, -0.5;
  CHECK(head_project(pooled, zero) == Descriptor(Eigen::Vector2d(1.5, -0.5)));

  Linear r("r", 4, 3);
  r.weight.values << 1, 2, 0, -1,
                     0, 1, 1, 1,
                     3, 0, -2, 0.5;
  r.bias.values << 0.25, 0, -1;
  const Eigen::Vector4d x(1, -1, 2, 4);
  // rows by hand: 1-2+0-4+0.25, 0-1+2+4, 3+0-4+2-1
  CHECK(head_project(x, r) == Descriptor(Eigen::Vector3d(-4.75, 5, 0)));
  CHECK_THROWS_AS(head_project(Eigen::Vector2d(1, 2), r), UsageError);

  const Descriptor dm = Eigen::Vector2d(1, 0);
  const Descriptor ds = Eigen::Vector2d(0, 1);
  const Descriptor dg = Eigen::Vector2d(1, 1);
  CHECK(fuse(dm, ds, dg, {1, 2, 3}) == Descriptor(Eigen::Vector2d(4, 5)));
  CHECK(fuse(dm, ds, dg, {1, 0, 0}) == dm);
  CHECK(fuse(dm, dm, dg, {0.5, 0.5, 0}) == dm);
  CHECK_THROWS_AS(fuse(dm, Eigen::Vector3d(1, 2, 3), dg, {1, 1, 1}), UsageError);
}

TEST_CASE("composed forward on the worked 2x3 map") {
  OrchHead head = identity_head(HeadMode::fusion);
  OrchHead::Cache cache;
  const Descriptor out = head.forward(example_map(), &cache);
  CHECK(cache.d_mac == Descriptor(Eigen::Vector2d(3, 4)));
  CHECK(cache.d_spoc == Descriptor(Eigen::Vector2d(2, 1)));
  // gem(p = 1) clamps 0 and -1 to 1e-6: row 2 is (4 + 2e-6) / 3
  const double g2 = (4.0 + 2e-6) / 3.0;
  CHECK(cache.d_gem(0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(cache.d_gem(1) == doctest::Approx(g2).epsilon(1e-15));
  CHECK(out(0) == doctest::Approx(7.0).epsilon(1e-15));
  CHECK(out(1) == doctest::Approx(5.0 + g2).epsilon(1e-15));
}

TEST_CASE("single-head modes") {
  AggregationConfig cfg;
  cfg.channels = 5;
  cfg.dim = 4;
  OrchHead fused(cfg);
  Rng rng(1);
  fused.init(rng);
  std::mt19937_64 gen(3);
  const FeatureMap z = oracle::random_matrix(gen, 5, 11);

  OrchHead mac = fused;
  mac.set_mode(HeadMode::mac);
  CHECK(mac.forward(z) == head_project(mac_pool(z), fused.mac_head));
  fused.set_fusion_weights({1, 0, 0});
  CHECK(fused.forward(z).isApprox(mac.forward(z), 1e-15));

  OrchHead spoc = fused;
  spoc.set_mode(HeadMode::spoc);
  CHECK(spoc.forward(z) == head_project(spoc_pool(z), fused.spoc_head));
  OrchHead gem = fused;
  gem.set_mode(HeadMode::gem);
  CHECK(gem.forward(z) == head_project(gem_pool(z, 3.0), fused.gem_head));

  CHECK(parse_head_mode("spoc") == HeadMode::spoc);
  CHECK(to_string(HeadMode::gem) == "gem");
  CHECK_THROWS_AS(parse_head_mode("vlad"), UsageError);
}

TEST_CASE("initialization draws fusion weights and resets p") {
  AggregationConfig cfg;
  OrchHead head(cfg);
  Rng rng(77);
  head.init(rng);
  CHECK(head.gem_p() == 3.0);
  CHECK(head.fusion_weights().cwiseAbs().maxCoeff() < 0.6);
  CHECK(head.fusion_weights() != Eigen::Vector3d::Constant(1.0 / 3.0));

  // fusion weights over many seeds follow N(0, 0.1)
  double sum = 0.0, sq = 0.0;
  const int n = 3000;
  for (int s = 0; s < n; ++s) {
    Rng r(static_cast<std::uint64_t>(s));
    OrchHead h(AggregationConfig{2, 2});
    h.init(r);
    for (int i = 0; i < 3; ++i) {
      sum += h.fusion_weights()(i);
      sq += h.fusion_weights()(i) * h.fusion_weights()(i);
    }
  }
  const double mean = sum / (3.0 * n);
  const double sd = std::sqrt(sq / (3.0 * n) - mean * mean);
  CHECK(std::abs(mean) < 0.01);
  CHECK(sd == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("p is clamped after updates") {
  OrchHead head;
  head.set_gem_p(250.0);
  head.clamp_gem_p();
  CHECK(head.gem_p() == kGemPMax);
  head.set_gem_p(-3.0);
  head.clamp_gem_p();
  CHECK(head.gem_p() == kGemPMin);
}

TEST_CASE("backward: zero upstream, missing cache, fusion partials") {
  AggregationConfig cfg;
  cfg.channels = 3;
  cfg.dim = 2;
  OrchHead head(cfg);
  Rng rng(2);
  head.init(rng);
  std::mt19937_64 gen(6);
  const FeatureMap z = oracle::random_matrix(gen, 3, 4, 0.1, 1.0);
  OrchHead::Cache cache;
  head.forward(z, &cache);

  const FeatureMap dz0 = head.backward(Descriptor::Zero(2), cache);
  CHECK(dz0.isZero(0.0));
  for (const ParamTensor* p : head.parameters()) CHECK(p->grads.isZero(0.0));

  CHECK_THROWS_AS(head.backward(Descriptor::Zero(2), OrchHead::Cache{}), UsageError);

  for (Index k = 0; k < 2; ++k) {
    for (ParamTensor* p : head.parameters()) p->zero_grad();
    head.backward(Descriptor::Unit(2, k), cache);
    CHECK(head.fusion_param().grads(0, 0) == doctest::Approx(cache.d_mac(k)).epsilon(1e-15));
    CHECK(head.fusion_param().grads(1, 0) == doctest::Approx(cache.d_spoc(k)).epsilon(1e-15));
    CHECK(head.fusion_param().grads(2, 0) == doctest::Approx(cache.d_gem(k)).epsilon(1e-15));
  }
}

TEST_CASE("mac backward routes to the first maximum") {
  FeatureMap z(2, 4);
  z << 1, 3, 3, 0,
       5, 5, 5, 5;
  const Eigen::MatrixXd g = mac_pool_backward(Eigen::Vector2d(2.0, -1.0), z);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(2, 4);
  expected(0, 1) = 2.0;
  expected(1, 0) = -1.0;
  CHECK(g == expected);
}

TEST_CASE("pooling backward matches finite differences") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> pu(0.7, 5.0);
  for (int t = 0; t < 25; ++t) {
    FeatureMap z = oracle::random_matrix(rng, 4, 6, -0.5, 2.0);
    const Eigen::VectorXd up = oracle::random_matrix(rng, 4, 1);
    auto fm = [&] { return up.dot(mac_pool(z)); };
    auto fs = [&] { return up.dot(spoc_pool(z)); };
    CHECK(oracle::relative_error(mac_pool_backward(up, z), oracle::numeric_gradient(fm, z)) < 1e-5);
    CHECK(oracle::relative_error(spoc_pool_backward(up, z.cols()), oracle::numeric_gradient(fs, z)) < 1e-5);

    Eigen::MatrixXd p(1, 1);
    p(0, 0) = pu(rng);
    auto fg = [&] { return up.dot(gem_pool(z, p(0, 0))); };
    const GemGrads g = gem_pool_backward(up, z, p(0, 0), gem_pool(z, p(0, 0)));
    CHECK(oracle::relative_error(g.z, oracle::numeric_gradient(fg, z)) < 1e-5);
    CHECK(oracle::relative_error(Eigen::MatrixXd::Constant(1, 1, g.p), oracle::numeric_gradient(fg, p)) < 1e-5);
  }
}

TEST_CASE("full head forward/backward matches finite differences (C=3, S=4, K=2)") {
  for (HeadMode mode : {HeadMode::fusion, HeadMode::mac, HeadMode::spoc, HeadMode::gem}) {
    for (int t = 0; t < 20; ++t) {
      AggregationConfig cfg;
      cfg.channels = 3;
      cfg.dim = 2;
      cfg.mode = mode;
      cfg.l2_normalize = t % 2 == 1;
      OrchHead head(cfg);
      Rng rng(static_cast<std::uint64_t>(100 + t));
      head.init(rng);
      std::mt19937_64 gen(static_cast<std::uint64_t>(t));
      FeatureMap z = oracle::random_matrix(gen, 3, 4, -0.3, 1.5);
      const Descriptor up = oracle::random_matrix(gen, 2, 1);
      auto f = [&] { return up.dot(head.forward(z)); };

      OrchHead::Cache cache;
      head.forward(z, &cache);
      const FeatureMap dz = head.backward(up, cache);
      CHECK(oracle::relative_error(dz, oracle::numeric_gradient(f, z)) < 1e-5);
      const oracle::ParamCheck pc = oracle::check_params(f, head.parameters());
      INFO("worst parameter " << pc.name);
      CHECK(pc.worst < 1e-5);
    }
  }
}

}
