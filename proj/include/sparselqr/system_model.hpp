#pragma once

#include <Eigen/Dense>
#include <set>
#include <utility>
#include <vector>

#include "sparselqr/errors.hpp"
#include "sparselqr/matrix_kernels.hpp"

namespace sparselqr {

// Entry is treated as nonzero iff |entry| exceeds this; pruning writes exact
// zeros so cardinality stays integer-exact.
inline constexpr double kNumericalZero = 1e-12;

// Stability margin: abscissa must be below -kStabilityMargin to count as
// stabilizing.
inline constexpr double kStabilityMargin = 1e-8;

struct NodeDims {
    int states = 0;  // m_j
    int inputs = 0;  // p_j
};

// Row/column bookkeeping for the node-block grid of K.
class BlockStructure {
public:
    BlockStructure() = default;
    explicit BlockStructure(const std::vector<NodeDims>& nodes);

    int num_nodes() const { return static_cast<int>(nodes_.size()); }
    int total_states() const { return total_states_; }
    int total_inputs() const { return total_inputs_; }
    const std::vector<NodeDims>& nodes() const { return nodes_; }

    int node_of_row(int row) const { return row_node_[row]; }
    int node_of_col(int col) const { return col_node_[col]; }
    int state_offset(int node) const { return state_offset_[node]; }
    int input_offset(int node) const { return input_offset_[node]; }

    bool is_diag_entry(int row, int col) const {
        return row_node_[row] == col_node_[col];
    }

    bool operator==(const BlockStructure& other) const {
        return total_states_ == other.total_states_ && total_inputs_ == other.total_inputs_ &&
               row_node_ == other.row_node_ && col_node_ == other.col_node_;
    }

private:
    std::vector<NodeDims> nodes_;
    std::vector<int> row_node_, col_node_;
    std::vector<int> state_offset_, input_offset_;
    int total_states_ = 0, total_inputs_ = 0;
};

struct LtiSystem {
    MatrixXd A;  // m x m
    MatrixXd B;  // m x q
    VectorXd D;  // m x 1, scalar disturbance channel
    BlockStructure structure;

    int num_states() const { return structure.total_states(); }
    int num_inputs() const { return structure.total_inputs(); }
    int num_nodes() const { return structure.num_nodes(); }

    void validate() const;
};

// Contiguous node ranges S_1..S_r, one per agent.
class AgentPartition {
public:
    AgentPartition() = default;
    AgentPartition(const BlockStructure& structure, const std::vector<int>& nodes_per_agent);

    int num_agents() const { return static_cast<int>(node_counts_.size()); }
    int nodes_of(int agent) const { return node_counts_[agent]; }
    int first_node(int agent) const { return node_begin_[agent]; }
    int states_of(int agent) const { return state_counts_[agent]; }   // M_i
    int inputs_of(int agent) const { return input_counts_[agent]; }   // N_i
    int state_offset(int agent) const { return state_begin_[agent]; }
    int input_offset(int agent) const { return input_begin_[agent]; }
    int agent_of_node(int node) const { return node_agent_[node]; }

private:
    std::vector<int> node_counts_, node_begin_;
    std::vector<int> state_counts_, state_begin_;
    std::vector<int> input_counts_, input_begin_;
    std::vector<int> node_agent_;
};

struct FeedbackGain {
    MatrixXd K;  // q x m
    BlockStructure structure;

    FeedbackGain() = default;
    FeedbackGain(MatrixXd gain, BlockStructure s);

    int rows() const { return static_cast<int>(K.rows()); }
    int cols() const { return static_cast<int>(K.cols()); }
};

// Set of (row, col) index pairs into K.
class SupportSet {
public:
    SupportSet() = default;

    void insert(int row, int col) { entries_.emplace(row, col); }
    bool contains(int row, int col) const { return entries_.count({row, col}) > 0; }
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }
    const std::set<std::pair<int, int>>& entries() const { return entries_; }

    SupportSet united(const SupportSet& other) const;

    // Support of the nonzero entries of M.
    static SupportSet nonzeros(const MatrixXd& M, double threshold = kNumericalZero);

    // Zeroes the entries of M outside the support.
    MatrixXd mask(const MatrixXd& M) const;

private:
    std::set<std::pair<int, int>> entries_;
};

enum class BlockPart { Off, Diag };

// Number of nonzeros in the off-diagonal node blocks of K.
int card_off(const FeedbackGain& K);

// Keeps only the requested block part, zeroing the rest.
FeedbackGain block_project(const FeedbackGain& K, BlockPart part);

// Diagonal blocks untouched; among off-diagonal-block entries the s largest
// magnitudes survive.  Ties broken toward the smaller row-major linear index.
FeedbackGain prune_top_s(const FeedbackGain& K, int s);

// Same pruning rule applied to an arbitrary matrix over the block grid
// (used for the gradient's 2s direction selection).
MatrixXd prune_off_entries(const MatrixXd& M, const BlockStructure& structure, int s);

struct ClosedLoop {
    MatrixXd A_cl;
    bool is_stable = false;
    double abscissa = 0.0;
};

ClosedLoop closed_loop(const LtiSystem& sys, const FeedbackGain& K);

// Full diagonal-block index set of the block grid (every local-feedback entry).
SupportSet diagonal_block_support(const BlockStructure& structure);

}  // namespace sparselqr
