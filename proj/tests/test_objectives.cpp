#include <doctest.h>

#include <cmath>
#include <vector>

#include "gennli/gradcheck.hpp"
#include "gennli/objectives.hpp"
#include "gennli/rng.hpp"

using namespace gennli;

namespace {

double loss_of(LossKind kind, const std::vector<double>& scores, int gold) {
  return discriminative_loss(kind, scores, gold, zero_one_cost());
}

const LossKind kDiscriminative[] = {LossKind::perceptron,     LossKind::hinge,      LossKind::log_loss,
                                    LossKind::softmax_margin, LossKind::bayes_risk, LossKind::infinilog};

}  // namespace

TEST_CASE("loss names round-trip through their CLI spellings") {
  for (LossKind kind : {LossKind::generative_nll, LossKind::perceptron, LossKind::hinge, LossKind::log_loss,
                        LossKind::softmax_margin, LossKind::bayes_risk, LossKind::infinilog}) {
    CHECK(loss_kind_from_string(to_string(kind)) == kind);
  }
  CHECK_FALSE(loss_kind_from_string("nonsense").has_value());
}

TEST_CASE("generative NLL negates the gold score") {
  CHECK(generative_nll(0.0) == 0.0);
  CHECK(generative_nll(-2.0) == 2.0);
  CHECK_THROWS_AS(generative_nll(std::nan("")), std::invalid_argument);
}

TEST_CASE("the six worked binary examples") {
  const std::vector<double> scores = {-2.0, -2.5};
  const int gold = 0;
  CHECK(loss_of(LossKind::perceptron, scores, gold) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(loss_of(LossKind::hinge, scores, gold) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(loss_of(LossKind::infinilog, scores, gold) == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(loss_of(LossKind::log_loss, scores, gold) == doctest::Approx(0.474077).epsilon(1e-6));
  CHECK(loss_of(LossKind::softmax_margin, scores, gold) == doctest::Approx(0.974077).epsilon(1e-6));
  CHECK(loss_of(LossKind::bayes_risk, scores, gold) == doctest::Approx(0.377541).epsilon(1e-6));
}

TEST_CASE("loss algebra holds over random scores") {
  Rng rng(2024);
  const CostFunction unit = zero_one_cost();
  const CostFunction zero = [](int, int) { return 0.0; };
  const CostFunction gold_sink = [](int gold, int cand) { return gold == cand ? -40.0 : 0.0; };

  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + rng.next_below(4);
    std::vector<double> scores(static_cast<size_t>(n));
    for (double& s : scores) s = rng.next_uniform(-30.0, 0.0);
    const int gold = rng.next_below(n);

    const double perceptron = loss_of(LossKind::perceptron, scores, gold);
    const double hinge = loss_of(LossKind::hinge, scores, gold);
    const double log_l = loss_of(LossKind::log_loss, scores, gold);
    const double sm = loss_of(LossKind::softmax_margin, scores, gold);
    const double bayes = loss_of(LossKind::bayes_risk, scores, gold);
    const double infini = loss_of(LossKind::infinilog, scores, gold);

    // softmax-margin with an all-zero cost is exactly log loss.
    CHECK(discriminative_loss(LossKind::softmax_margin, scores, gold, zero) ==
          doctest::Approx(log_l).epsilon(1e-9));
    // infinilog is softmax-margin with the gold pushed to -inf cost.
    CHECK(discriminative_loss(LossKind::softmax_margin, scores, gold, gold_sink) ==
          doctest::Approx(infini).epsilon(1e-6));

    CHECK(hinge >= perceptron - 1e-12);
    CHECK(perceptron >= -1e-12);
    CHECK(log_l >= perceptron - 1e-12);
    CHECK(sm >= log_l - 1e-12);
    CHECK(bayes >= -1e-12);
    CHECK(bayes <= 1.0 + 1e-12);

    // Every loss is invariant to a uniform score shift.
    const double c = rng.next_uniform(-25.0, 25.0);
    std::vector<double> shifted = scores;
    for (double& s : shifted) s += c;
    CHECK(loss_of(LossKind::perceptron, shifted, gold) == doctest::Approx(perceptron).epsilon(1e-9));
    CHECK(loss_of(LossKind::hinge, shifted, gold) == doctest::Approx(hinge).epsilon(1e-9));
    CHECK(loss_of(LossKind::log_loss, shifted, gold) == doctest::Approx(log_l).epsilon(1e-9));
    CHECK(loss_of(LossKind::softmax_margin, shifted, gold) == doctest::Approx(sm).epsilon(1e-9));
    CHECK(loss_of(LossKind::bayes_risk, shifted, gold) == doctest::Approx(bayes).epsilon(1e-9));
    CHECK(loss_of(LossKind::infinilog, shifted, gold) == doctest::Approx(infini).epsilon(1e-9));
    (void)unit;
  }
}

TEST_CASE("infinilog is the only loss that can go negative") {
  // A confident model: the gold score dominates.
  const std::vector<double> scores = {-1.0, -8.0, -9.0};
  CHECK(loss_of(LossKind::infinilog, scores, 0) < 0.0);
  CHECK(loss_of(LossKind::perceptron, scores, 0) >= 0.0);
  CHECK(loss_of(LossKind::hinge, scores, 0) >= 0.0);
  CHECK(loss_of(LossKind::log_loss, scores, 0) >= 0.0);
  CHECK(loss_of(LossKind::softmax_margin, scores, 0) >= 0.0);
  CHECK(loss_of(LossKind::bayes_risk, scores, 0) >= 0.0);
}

TEST_CASE("infinilog rejects a single-label score set") {
  const std::vector<double> one = {-1.0};
  CHECK_THROWS_AS(loss_of(LossKind::infinilog, one, 0), std::invalid_argument);
}

TEST_CASE("the generative kind is rejected by the discriminative entry point") {
  const std::vector<double> scores = {-1.0, -2.0};
  CHECK_THROWS_AS(loss_of(LossKind::generative_nll, scores, 0), std::invalid_argument);
}

TEST_CASE("loss gradients with respect to scores pass finite differences") {
  Rng rng(9);
  for (LossKind kind : kDiscriminative) {
    // Well-separated scores keep the hinge/perceptron max untied.
    std::vector<double> base = {-1.0, -3.5, -6.0};
    for (double& s : base) s += rng.next_uniform(-0.2, 0.2);
    const int gold = 1;

    ad::ParamMap pm{{"scores", ad::Tensor::from_vector(base)}};
    auto loss = [&](const ad::ParamMap& p, ad::Gradients* grads) {
      ad::Tape tape;
      ad::Value vec = tape.param("scores", p.at("scores"));
      std::vector<ad::Value> per_label;
      for (int y = 0; y < 3; ++y) per_label.push_back(ad::pick(vec, y));
      ad::Value out = discriminative_loss(tape, kind, per_label, gold, zero_one_cost());
      const double v = tape.val(out).item();
      if (grads != nullptr) *grads = tape.backward(out);
      return v;
    };
    const ad::FdReport report = ad::finite_difference_check(loss, pm);
    CAPTURE(to_string(kind));
    CHECK(report.max_rel_error < 1e-5);
  }
}

TEST_CASE("tied hinge maxima route the subgradient to the lowest index") {
  ad::Tape tape;
  ad::Value s0 = tape.param("s0", ad::Tensor::scalar(-2.0));
  ad::Value s1 = tape.param("s1", ad::Tensor::scalar(-2.0));
  const ad::Value scores[] = {s0, s1};
  ad::Value loss = discriminative_loss(tape, LossKind::perceptron, scores, 1, zero_one_cost());
  ad::Gradients g = tape.backward(loss);
  CHECK(g.at("s0").item() == 1.0);   // max picked index 0
  CHECK(g.at("s1").item() == -1.0);  // the negated gold term
}
