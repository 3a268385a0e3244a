#include "specssm/token_tree.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <numeric>

namespace specssm {

using ordered_json = nlohmann::ordered_json;

tree_topology tree_topology::chain(int64_t length) {
    tree_topology t;
    t.branching.assign(static_cast<size_t>(length), 1);
    t.max_nodes = length;
    return t;
}

void tree_topology::validate() const {
    if (max_nodes < 1) throw usage_error("tree_topology: node budget must be >= 1");
    if (branching.empty()) throw usage_error("tree_topology: empty branching profile");
    for (int64_t b : branching) {
        if (b < 1) throw usage_error("tree_topology: branching factors must be >= 1");
    }
}

std::vector<int64_t> token_tree::children_of(int64_t id) const {
    std::vector<int64_t> out;
    for (int64_t i = 0; i < size(); ++i) {
        if (nodes[static_cast<size_t>(i)].parent == id) out.push_back(i);
    }
    return out;
}

int64_t token_tree::depth_of(int64_t id) const {
    int64_t d = 0;
    while (nodes[static_cast<size_t>(id)].parent != -1) {
        id = nodes[static_cast<size_t>(id)].parent;
        ++d;
    }
    return d;
}

std::vector<int64_t> token_tree::path_to(int64_t id) const {
    std::vector<int64_t> path;
    while (id != -1) {
        path.push_back(id);
        id = nodes[static_cast<size_t>(id)].parent;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

bool token_tree::has_children(int64_t id) const {
    for (const auto & n : nodes) {
        if (n.parent == id) return true;
    }
    return false;
}

void token_tree::validate() const {
    if (nodes.empty()) throw structure_error("token_tree: empty tree");
    int64_t roots = 0;
    for (int64_t i = 0; i < size(); ++i) {
        const int64_t p = nodes[static_cast<size_t>(i)].parent;
        if (p == -1) {
            ++roots;
        } else if (p >= i) {
            throw structure_error("token_tree: node " + std::to_string(i) +
                                  " references parent " + std::to_string(p) + " ahead of it");
        } else if (p < -1) {
            throw structure_error("token_tree: invalid parent index");
        }
        const double q = nodes[static_cast<size_t>(i)].q;
        if (!(q > 0.0 && q <= 1.0)) {
            throw structure_error("token_tree: draft probability out of (0,1]");
        }
    }
    // exactly one root and it must come first: depth-1 nodes are a prefix run
    if (nodes[0].parent != -1) throw structure_error("token_tree: first node must be a root");
    if (roots == 0) throw structure_error("token_tree: no root");
}

std::vector<flat_node> bfs_flatten(const token_tree & tree) {
    tree.validate();
    const int64_t n = tree.size();
    std::vector<int64_t> depth(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        const int64_t p = tree.nodes[static_cast<size_t>(i)].parent;
        depth[static_cast<size_t>(i)] = p == -1 ? 0 : depth[static_cast<size_t>(p)] + 1;
    }
    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
        return depth[static_cast<size_t>(a)] < depth[static_cast<size_t>(b)];
    });
    std::vector<flat_node> out;
    out.reserve(static_cast<size_t>(n));
    for (int64_t id : order) {
        const tree_node & nd = tree.nodes[static_cast<size_t>(id)];
        out.push_back({id, nd.parent, nd.token});
    }
    return out;
}

std::string tree_to_json(const token_tree & tree) {
    ordered_json nodes = ordered_json::array();
    for (const auto & n : tree.nodes) {
        nodes.push_back({{"token", n.token}, {"parent", n.parent}, {"q", n.q}});
    }
    ordered_json j;
    j["nodes"] = nodes;
    return j.dump(2);
}

token_tree tree_from_json(const std::string & text) {
    ordered_json j = ordered_json::parse(text);
    token_tree tree;
    for (const auto & e : j.at("nodes")) {
        tree_node n;
        n.token  = e.at("token").get<int64_t>();
        n.parent = e.at("parent").get<int64_t>();
        n.q      = e.value("q", 1.0);
        tree.nodes.push_back(std::move(n));
    }
    tree.validate();
    return tree;
}

// Top-b token ids by probability, ties broken by lower token id.
static std::vector<int64_t> top_tokens(const std::vector<double> & probs, int64_t b) {
    std::vector<int64_t> idx(probs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int64_t x, int64_t y) {
        return probs[static_cast<size_t>(x)] > probs[static_cast<size_t>(y)];
    });
    idx.resize(static_cast<size_t>(std::min<int64_t>(b, static_cast<int64_t>(probs.size()))));
    return idx;
}

draft_tree_result generate_draft_tree(const model_weights & draft,
                                      const model_state & base_state,
                                      const tensor & base_logits,
                                      const tree_topology & topology,
                                      double temperature,
                                      bool sampled_children,
                                      rng_stream & rng) {
    topology.validate();

    draft_tree_result res;
    const double q_temp = temperature > 0.0 ? temperature : 1.0;

    // frontier entry: node id, or -1 for the virtual root
    std::vector<int64_t> frontier = {-1};
    for (size_t depth = 0; depth < topology.branching.size(); ++depth) {
        const int64_t b = topology.branching[depth];
        std::vector<int64_t> next_frontier;
        for (int64_t parent : frontier) {
            if (res.tree.size() >= topology.max_nodes) break;
            const tensor & logits =
                parent == -1 ? base_logits : res.tree.nodes[static_cast<size_t>(parent)].logits;
            const std::vector<double> probs = ops::softmax(logits, q_temp);

            std::vector<int64_t> child_tokens;
            if (sampled_children) {
                for (int64_t i = 0; i < b; ++i) {
                    tensor lt = logits;
                    child_tokens.push_back(ops::sample_token(lt, q_temp, rng));
                }
            } else {
                child_tokens = top_tokens(probs, b);
            }

            for (int64_t tok : child_tokens) {
                if (res.tree.size() >= topology.max_nodes) break;
                const model_state & pstate =
                    parent == -1 ? base_state : res.node_states[static_cast<size_t>(parent)];
                model_state st = pstate;
                model_step_result step = model_step(draft, st, tok);

                tree_node node;
                node.token  = tok;
                node.parent = parent;
                node.q      = std::max(probs[static_cast<size_t>(tok)], 1e-300);
                node.logits = std::move(step.logits);
                next_frontier.push_back(res.tree.size());
                res.tree.nodes.push_back(std::move(node));
                res.node_states.push_back(std::move(st));
                res.node_acts.push_back(std::move(step.layer_acts));
            }
        }
        frontier = std::move(next_frontier);
        if (frontier.empty() || res.tree.size() >= topology.max_nodes) break;
    }

    if (res.tree.nodes.empty()) throw usage_error("generate_draft_tree: empty tree");
    return res;
}

} // namespace specssm
