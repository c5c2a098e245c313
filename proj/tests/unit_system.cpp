#include <doctest.h>

#include "oracles.hpp"
#include "sparselqr/json_io.hpp"
#include "sparselqr/system_model.hpp"

using namespace sparselqr;

namespace {

BlockStructure two_node_structure() {
    return BlockStructure({NodeDims{2, 1}, NodeDims{3, 2}});
}

}  // namespace

TEST_CASE("block structure bookkeeping") {
    const BlockStructure s = two_node_structure();
    CHECK(s.total_states() == 5);
    CHECK(s.total_inputs() == 3);
    CHECK(s.node_of_col(0) == 0);
    CHECK(s.node_of_col(2) == 1);
    CHECK(s.node_of_row(0) == 0);
    CHECK(s.node_of_row(1) == 1);
    CHECK(s.state_offset(1) == 2);
    CHECK(s.input_offset(1) == 1);
    CHECK(s.is_diag_entry(0, 1));
    CHECK_FALSE(s.is_diag_entry(0, 2));
}

TEST_CASE("card_off counts only off-diagonal blocks") {
    const BlockStructure s = two_node_structure();
    MatrixXd K = MatrixXd::Zero(3, 5);
    K(0, 0) = 1.0;  // diag block (node 0, node 0)
    K(0, 3) = 2.0;  // off block
    K(2, 1) = 3.0;  // off block
    K(1, 4) = 4.0;  // diag block (node 1, node 1)
    CHECK(card_off(FeedbackGain(K, s)) == 2);

    const FeedbackGain off = block_project(FeedbackGain(K, s), BlockPart::Off);
    CHECK(off.K(0, 0) == 0.0);
    CHECK(off.K(0, 3) == 2.0);
    const FeedbackGain diag = block_project(FeedbackGain(K, s), BlockPart::Diag);
    CHECK(diag.K(0, 0) == 1.0);
    CHECK(diag.K(2, 1) == 0.0);
}

TEST_CASE("prune keeps the s largest off-block magnitudes with exact zeros") {
    const BlockStructure s = two_node_structure();
    MatrixXd K = MatrixXd::Zero(3, 5);
    K(0, 0) = 9.0;   // diagonal block, untouched
    K(0, 2) = 0.5;   // off
    K(0, 3) = -2.0;  // off
    K(1, 0) = 1.5;   // off
    K(2, 1) = -1.5;  // off, tied with (1,0); larger linear index loses
    const FeedbackGain pruned = prune_top_s(FeedbackGain(K, s), 2);
    CHECK(card_off(pruned) == 2);
    CHECK(pruned.K(0, 0) == 9.0);
    CHECK(pruned.K(0, 3) == -2.0);
    CHECK(pruned.K(1, 0) == 1.5);   // wins the tie: smaller row-major index
    CHECK(pruned.K(2, 1) == 0.0);
    CHECK(pruned.K(0, 2) == 0.0);
}

TEST_CASE("support set operations") {
    SupportSet a, b;
    a.insert(0, 1);
    b.insert(2, 3);
    b.insert(0, 1);
    const SupportSet u = a.united(b);
    CHECK(u.size() == 2);
    MatrixXd M = MatrixXd::Ones(3, 4);
    const MatrixXd masked = u.mask(M);
    CHECK(masked.sum() == doctest::Approx(2.0));
    CHECK(SupportSet::nonzeros(masked).size() == 2);
}

TEST_CASE("agent partition ranges") {
    const BlockStructure s({NodeDims{2, 1}, NodeDims{2, 1}, NodeDims{3, 2}});
    const AgentPartition part(s, {2, 1});
    CHECK(part.num_agents() == 2);
    CHECK(part.states_of(0) == 4);
    CHECK(part.inputs_of(0) == 2);
    CHECK(part.states_of(1) == 3);
    CHECK(part.input_offset(1) == 2);
    CHECK(part.agent_of_node(1) == 0);
    CHECK(part.agent_of_node(2) == 1);
    CHECK_THROWS_AS(AgentPartition(s, {2, 2}), ValidationError);
}

TEST_CASE("system validation") {
    LtiSystem sys;
    sys.structure = two_node_structure();
    sys.A = MatrixXd::Zero(5, 5);
    sys.B = MatrixXd::Zero(5, 3);
    sys.D = VectorXd::Zero(5);
    CHECK_NOTHROW(sys.validate());
    sys.B = MatrixXd::Zero(5, 2);
    CHECK_THROWS_AS(sys.validate(), ValidationError);
}

TEST_CASE("system json round trip") {
    std::mt19937 rng(21);
    LtiSystem sys;
    sys.structure = two_node_structure();
    sys.A = oracles::random_matrix(rng, 5, 5);
    sys.B = oracles::random_matrix(rng, 5, 3);
    sys.D = oracles::random_matrix(rng, 5, 1);
    const std::string text = system_to_json(sys, {1, 1});
    const SystemSpec spec = parse_system_json(text);
    CHECK((spec.system.A - sys.A).norm() == 0.0);
    CHECK((spec.system.B - sys.B).norm() == 0.0);
    CHECK((spec.system.D - sys.D).norm() == 0.0);
    CHECK(spec.system.structure == sys.structure);
    CHECK(spec.agents == std::vector<int>{1, 1});
}

TEST_CASE("json parse errors name the offending field") {
    CHECK_THROWS_WITH_AS(parse_system_json("{}"), doctest::Contains("m"), ValidationError);
    CHECK_THROWS_AS(parse_system_json("not json"), ValidationError);
}

TEST_CASE("number formatting round trips doubles") {
    for (double v : {1.0 / 3.0, 1e-17, -2.5e300, 0.0, 123456.789}) {
        CHECK(std::stod(format_number(v)) == v);
    }
}
