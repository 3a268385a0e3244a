#pragma once

#include "specssm/model.hpp"
#include "specssm/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace specssm {

// Per-depth branching profile for draft trees. branching[d] children are
// created under each depth-d survivor; max_nodes caps total drafted tokens.
struct tree_topology {
    std::vector<int64_t> branching;
    int64_t max_nodes = 16;   // prediction length budget

    // [1,1,...,1] of the given length: sequence-style drafting
    static tree_topology chain(int64_t length);
    void validate() const;
};

struct tree_node {
    int64_t token  = -1;
    int64_t parent = -1;       // -1: child of the virtual root (last committed token)
    double  q      = 1.0;      // draft probability of `token` given the path
    tensor  logits;            // draft-model logits at this node
};

// BFS-ordered draft tree. Node indices are creation order; every parent index
// precedes its children and parents are non-decreasing along the list.
struct token_tree {
    std::vector<tree_node> nodes;

    int64_t size() const { return static_cast<int64_t>(nodes.size()); }
    std::vector<int64_t> children_of(int64_t id) const;
    int64_t depth_of(int64_t id) const;
    // Node ids from a depth-1 node down to `id`, inclusive.
    std::vector<int64_t> path_to(int64_t id) const;
    bool has_children(int64_t id) const;
    void validate() const;
};

struct flat_node {
    int64_t node;
    int64_t parent;
    int64_t token;
};

// Level-order flattening with creation-order stability; rejects cycles and
// forward parent references.
std::vector<flat_node> bfs_flatten(const token_tree & tree);

std::string tree_to_json(const token_tree & tree);
token_tree tree_from_json(const std::string & text);

// Output of one drafting round: the tree plus the draft model's per-node
// states and per-node/per-layer activations (the state manager decides what
// to persist).
struct draft_tree_result {
    token_tree tree;
    std::vector<model_state> node_states;                       // per node
    std::vector<std::vector<step_activations>> node_acts;       // per node, per layer
};

// BFS tree expansion with one draft model step per created node. Children are
// the top-b tokens by draft probability, or b samples from the draft softmax
// when sampled_children is set. The base state is not modified.
draft_tree_result generate_draft_tree(const model_weights & draft,
                                      const model_state & base_state,
                                      const tensor & base_logits,
                                      const tree_topology & topology,
                                      double temperature,
                                      bool sampled_children,
                                      rng_stream & rng);

} // namespace specssm
