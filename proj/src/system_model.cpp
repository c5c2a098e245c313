#include "sparselqr/system_model.hpp"

#include <algorithm>
#include <cmath>

namespace sparselqr {

BlockStructure::BlockStructure(const std::vector<NodeDims>& nodes) : nodes_(nodes) {
    if (nodes.empty()) throw ValidationError("nodes: empty node list");
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        if (nodes[j].states < 1) throw ValidationError("nodes: m_j must be >= 1");
        if (nodes[j].inputs < 0) throw ValidationError("nodes: p_j must be >= 0");
        state_offset_.push_back(total_states_);
        input_offset_.push_back(total_inputs_);
        total_states_ += nodes[j].states;
        total_inputs_ += nodes[j].inputs;
        for (int k = 0; k < nodes[j].states; ++k) col_node_.push_back(static_cast<int>(j));
        for (int k = 0; k < nodes[j].inputs; ++k) row_node_.push_back(static_cast<int>(j));
    }
}

void LtiSystem::validate() const {
    const int m = structure.total_states();
    const int q = structure.total_inputs();
    if (A.rows() != m || A.cols() != m) throw ValidationError("A: expected m x m");
    if (B.rows() != m || B.cols() != q) throw ValidationError("B: expected m x q");
    if (D.size() != m) throw ValidationError("D: expected length m");
    if (!A.allFinite()) throw ValidationError("A: non-finite entries");
    if (!B.allFinite()) throw ValidationError("B: non-finite entries");
    if (!D.allFinite()) throw ValidationError("D: non-finite entries");
}

AgentPartition::AgentPartition(const BlockStructure& structure,
                               const std::vector<int>& nodes_per_agent) {
    if (nodes_per_agent.empty()) throw ValidationError("agents: empty agent list");
    int node = 0;
    for (std::size_t i = 0; i < nodes_per_agent.size(); ++i) {
        const int n_i = nodes_per_agent[i];
        if (n_i < 1) throw ValidationError("agents: node count must be >= 1");
        node_counts_.push_back(n_i);
        node_begin_.push_back(node);
        state_begin_.push_back(node < structure.num_nodes() ? structure.state_offset(node) : -1);
        input_begin_.push_back(node < structure.num_nodes() ? structure.input_offset(node) : -1);
        int M_i = 0, N_i = 0;
        for (int k = 0; k < n_i; ++k, ++node) {
            if (node >= structure.num_nodes()) {
                throw ValidationError("agents: node counts exceed number of nodes");
            }
            M_i += structure.nodes()[node].states;
            N_i += structure.nodes()[node].inputs;
            node_agent_.push_back(static_cast<int>(i));
        }
        state_counts_.push_back(M_i);
        input_counts_.push_back(N_i);
    }
    if (node != structure.num_nodes()) {
        throw ValidationError("agents: node counts do not cover all nodes");
    }
}

FeedbackGain::FeedbackGain(MatrixXd gain, BlockStructure s)
    : K(std::move(gain)), structure(std::move(s)) {
    if (K.rows() != structure.total_inputs() || K.cols() != structure.total_states()) {
        throw ValidationError("K: dimensions do not match node structure");
    }
}

SupportSet SupportSet::united(const SupportSet& other) const {
    SupportSet out = *this;
    out.entries_.insert(other.entries_.begin(), other.entries_.end());
    return out;
}

SupportSet SupportSet::nonzeros(const MatrixXd& M, double threshold) {
    SupportSet out;
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j)
            if (std::abs(M(i, j)) > threshold) out.insert(static_cast<int>(i), static_cast<int>(j));
    return out;
}

MatrixXd SupportSet::mask(const MatrixXd& M) const {
    MatrixXd out = MatrixXd::Zero(M.rows(), M.cols());
    for (const auto& [i, j] : entries_) {
        out(i, j) = M(i, j);
    }
    return out;
}

int card_off(const FeedbackGain& K) {
    int count = 0;
    for (int i = 0; i < K.rows(); ++i)
        for (int j = 0; j < K.cols(); ++j)
            if (!K.structure.is_diag_entry(i, j) && std::abs(K.K(i, j)) > kNumericalZero) ++count;
    return count;
}

FeedbackGain block_project(const FeedbackGain& K, BlockPart part) {
    FeedbackGain out = K;
    for (int i = 0; i < K.rows(); ++i)
        for (int j = 0; j < K.cols(); ++j) {
            const bool diag = K.structure.is_diag_entry(i, j);
            if ((part == BlockPart::Off && diag) || (part == BlockPart::Diag && !diag)) {
                out.K(i, j) = 0.0;
            }
        }
    return out;
}

MatrixXd prune_off_entries(const MatrixXd& M, const BlockStructure& structure, int s) {
    if (s < 0) throw InvalidParamsError("prune: s must be >= 0");
    struct Entry {
        double mag;
        long linear;  // row-major
        int row, col;
    };
    std::vector<Entry> off;
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            if (structure.is_diag_entry(static_cast<int>(i), static_cast<int>(j))) continue;
            const double mag = std::abs(M(i, j));
            if (mag > kNumericalZero) {
                off.push_back({mag, static_cast<long>(i) * M.cols() + j,
                               static_cast<int>(i), static_cast<int>(j)});
            }
        }
    std::sort(off.begin(), off.end(), [](const Entry& a, const Entry& b) {
        if (a.mag != b.mag) return a.mag > b.mag;
        return a.linear < b.linear;
    });

    MatrixXd out = M;
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j)
            if (!structure.is_diag_entry(static_cast<int>(i), static_cast<int>(j)))
                out(i, j) = 0.0;
    const std::size_t keep = std::min<std::size_t>(off.size(), static_cast<std::size_t>(s));
    for (std::size_t k = 0; k < keep; ++k) out(off[k].row, off[k].col) = M(off[k].row, off[k].col);
    return out;
}

FeedbackGain prune_top_s(const FeedbackGain& K, int s) {
    FeedbackGain out = K;
    out.K = prune_off_entries(K.K, K.structure, s);
    // scrub numerical zeros in off blocks so cardinality is exact
    for (int i = 0; i < out.rows(); ++i)
        for (int j = 0; j < out.cols(); ++j)
            if (!out.structure.is_diag_entry(i, j) && std::abs(out.K(i, j)) <= kNumericalZero)
                out.K(i, j) = 0.0;
    return out;
}

ClosedLoop closed_loop(const LtiSystem& sys, const FeedbackGain& K) {
    if (K.rows() != sys.num_inputs() || K.cols() != sys.num_states()) {
        throw InvalidParamsError("closed_loop: gain dimensions do not match system");
    }
    ClosedLoop out;
    out.A_cl = sys.A - sys.B * K.K;
    out.abscissa = spectral_abscissa(out.A_cl);
    out.is_stable = out.abscissa < -kStabilityMargin;
    return out;
}

SupportSet diagonal_block_support(const BlockStructure& structure) {
    SupportSet out;
    for (int i = 0; i < structure.total_inputs(); ++i)
        for (int j = 0; j < structure.total_states(); ++j)
            if (structure.is_diag_entry(i, j)) out.insert(i, j);
    return out;
}

}  // namespace sparselqr
