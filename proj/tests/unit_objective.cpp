#include <doctest.h>

#include "fixtures.hpp"
#include "sparselqr/lqr_objective.hpp"

using namespace sparselqr;

namespace {

double rel_err(const MatrixXd& got, const MatrixXd& want) {
    return (got - want).norm() / std::max(1.0, want.norm());
}

}  // namespace

TEST_CASE("social value matches time-domain quadrature") {
    std::mt19937 rng(31);
    const LtiSystem sys = fixtures::random_system(rng, {{2, 1}, {3, 2}});
    const DesignWeights w = fixtures::random_weights(rng, sys);
    const FeedbackGain K(MatrixXd::Zero(3, 5), sys.structure);

    const double J = social_value(sys, w, K).value;
    const MatrixXd M = w.Q + K.K.transpose() * w.R * K.K;
    const double J_ref = oracles::energy_quadrature(sys.A - sys.B * K.K, M, sys.D);
    CHECK(std::abs(J - J_ref) <= 1e-6 * std::abs(J_ref));
}

TEST_CASE("social gradient matches central finite differences") {
    std::mt19937 rng(32);
    const LtiSystem sys = fixtures::random_system(rng, {{2, 1}, {2, 1}});
    const DesignWeights w = fixtures::random_weights(rng, sys);
    const MatrixXd K0 = 0.1 * oracles::random_matrix(rng, 2, 4);
    REQUIRE(spectral_abscissa(sys.A - sys.B * K0) < 0.0);

    const MatrixXd g = social_gradient(sys, w, FeedbackGain(K0, sys.structure));
    const MatrixXd g_fd = oracles::finite_diff_gradient(
        [&](const MatrixXd& V) { return social_value(sys, w, FeedbackGain(V, sys.structure)).value; },
        K0);
    CHECK(rel_err(g, g_fd) <= 1e-6);
}

TEST_CASE("selfish value and gradient agree with oracles") {
    std::mt19937 rng(33);
    const LtiSystem sys = fixtures::random_system(rng, {{2, 1}, {2, 1}, {2, 1}});
    const AgentPartition part(sys.structure, {2, 1});
    AgentWeights aw;
    for (int i = 0; i < 2; ++i) {
        aw.Q.push_back(oracles::random_spd(rng, sys.num_states(), 0.0));
        aw.R.push_back(oracles::random_spd(rng, part.inputs_of(i), 0.5));
    }
    const MatrixXd K0 = 0.05 * oracles::random_matrix(rng, 3, 6);
    REQUIRE(spectral_abscissa(sys.A - sys.B * K0) < 0.0);
    const FeedbackGain K(K0, sys.structure);

    for (int agent = 0; agent < 2; ++agent) {
        // value: quadrature of x^T Q_i x + u_i^T R_i u_i on the global loop
        const int n0 = part.input_offset(agent), ni = part.inputs_of(agent);
        const MatrixXd Ki = K0.middleRows(n0, ni);
        const MatrixXd M = aw.Q[agent] + Ki.transpose() * aw.R[agent] * Ki;
        const double J_ref = oracles::energy_quadrature(sys.A - sys.B * K0, M, sys.D);
        CHECK(std::abs(selfish_value(sys, part, aw, agent, K).value - J_ref) <=
              1e-6 * std::abs(J_ref));

        // gradient in the agent's own rows, other rows fixed
        const MatrixXd g = selfish_gradient(sys, part, aw, agent, K);
        const MatrixXd g_fd = oracles::finite_diff_gradient(
            [&](const MatrixXd& Vi) {
                MatrixXd K2 = K0;
                K2.middleRows(n0, ni) = Vi;
                return selfish_value(sys, part, aw, agent, FeedbackGain(K2, sys.structure)).value;
            },
            Ki);
        CHECK(rel_err(g, g_fd) <= 1e-6);
    }
}

TEST_CASE("hessian products match finite differences of the gradient") {
    std::mt19937 rng(34);
    const LtiSystem sys = fixtures::random_system(rng, {{2, 1}, {2, 1}});
    const DesignWeights w = fixtures::random_weights(rng, sys);
    const SocialObjective obj(sys, w);
    const MatrixXd K0 = 0.1 * oracles::random_matrix(rng, 2, 4);
    REQUIRE(obj.stabilizing(K0));
    const MatrixXd dir = oracles::random_matrix(rng, 2, 4);

    const double h = 1e-6;
    const MatrixXd hv_fd =
        (obj.gradient(K0 + h * dir) - obj.gradient(K0 - h * dir)) / (2.0 * h);
    CHECK(rel_err(obj.hessian_product(K0, dir), hv_fd) <= 1e-5);
}

TEST_CASE("row-restricted objective equals the full objective on embeddings") {
    std::mt19937 rng(35);
    const LtiSystem sys = fixtures::random_system(rng, {{2, 1}, {2, 1}});
    const DesignWeights w = fixtures::random_weights(rng, sys);
    const SocialObjective full(sys, w);
    const MatrixXd K0 = 0.1 * oracles::random_matrix(rng, 2, 4);
    REQUIRE(full.stabilizing(K0));

    RowRestrictedObjective restricted(full, {1}, K0);
    const MatrixXd V = K0.row(1);
    CHECK(restricted.value(V) == doctest::Approx(full.value(K0)));
    CHECK((restricted.gradient(V) - full.gradient(K0).row(1)).norm() <= 1e-12);
    CHECK((restricted.embed(2.0 * V).row(0) - K0.row(0)).norm() == 0.0);
}

TEST_CASE("weight validation") {
    MatrixXd Q = MatrixXd::Identity(3, 3);
    MatrixXd R = MatrixXd::Identity(2, 2);
    CHECK_NOTHROW(DesignWeights(Q, R));
    MatrixXd Qbad = Q;
    Qbad(0, 1) = 1e-3;  // asymmetric
    CHECK_THROWS_AS(DesignWeights(Qbad, R), ValidationError);
    CHECK_THROWS_AS(DesignWeights(Q, MatrixXd::Zero(2, 2)), ValidationError);
}

TEST_CASE("agent weight certification") {
    const BlockStructure s({NodeDims{2, 1}, NodeDims{2, 1}});
    const AgentPartition part(s, {1, 1});
    const DesignWeights social(MatrixXd::Identity(4, 4), MatrixXd::Identity(2, 2));
    AgentWeights aw;
    aw.Q = {0.5 * MatrixXd::Identity(4, 4), 0.5 * MatrixXd::Identity(4, 4)};
    aw.R = {MatrixXd::Identity(1, 1), MatrixXd::Identity(1, 1)};
    aw.certify(social, part);
    CHECK(aw.sum_matches_social);
    aw.Q[0](0, 0) = 1.0;
    aw.certify(social, part);
    CHECK_FALSE(aw.sum_matches_social);
}

TEST_CASE("restricted newton step solves the projected system on SPD regions") {
    std::mt19937 rng(36);
    const LtiSystem sys = fixtures::random_system(rng, {{2, 1}, {2, 1}});
    const DesignWeights w = fixtures::random_weights(rng, sys);
    const SocialObjective obj(sys, w);
    // near the unconstrained optimum the Hessian is positive definite
    const CareSolution care = solve_care(sys.A, sys.B, w.Q, w.R);
    const MatrixXd K_opt = care.K_dense;
    SupportSet support;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 4; ++c) support.insert(r, c);

    const MatrixXd step = restricted_newton_step(obj, K_opt, support);
    // Newton step from the optimum is (numerically) zero
    CHECK(step.norm() <= 1e-6 * std::max(1.0, K_opt.norm()));

    // small enough that the Hessian stays positive definite at K1
    const MatrixXd K1 = K_opt + 0.005 * oracles::random_matrix(rng, 2, 4);
    const MatrixXd d = restricted_newton_step(obj, K1, support);
    // descent direction
    const double slope = (obj.gradient(K1).array() * d.array()).sum();
    CHECK(slope < 0.0);
    // and H d = -g on the support
    const MatrixXd resid = obj.hessian_product(K1, d) + obj.gradient(K1);
    CHECK(support.mask(resid).norm() <= 1e-5 * std::max(1.0, obj.gradient(K1).norm()));
}
