#include "mpguard/iforest.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "mpguard/util.hpp"

namespace mpguard::iforest {

namespace {

struct WorkItem {
    std::size_t begin;
    std::size_t end;
    std::size_t depth;
    std::int32_t parent; // -1 for the root
    bool is_left;
};

// Draw a split strictly inside (lo, hi).
double draw_split(util::Rng64& rng, double lo, double hi) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        const double p = lo + rng.next_double() * (hi - lo);
        if (p > lo && p < hi) return p;
    }
    return std::midpoint(lo, hi);
}

Tree build_tree(const core::Matrix& data, std::span<const std::size_t> sample,
                std::size_t height_limit, util::Rng64& rng) {
    Tree tree;
    std::vector<std::size_t> rows(sample.begin(), sample.end());
    std::vector<std::size_t> eligible;
    std::vector<double> lows(data.cols), highs(data.cols);

    std::vector<WorkItem> stack;
    stack.push_back({0, rows.size(), 0, -1, false});
    while (!stack.empty()) {
        const WorkItem item = stack.back();
        stack.pop_back();

        const std::int32_t node_idx = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        if (item.parent >= 0) {
            if (item.is_left)
                tree.nodes[static_cast<std::size_t>(item.parent)].left = node_idx;
            else
                tree.nodes[static_cast<std::size_t>(item.parent)].right = node_idx;
        }
        TreeNode& node = tree.nodes.back();
        const std::size_t count = item.end - item.begin;

        bool stop = item.depth >= height_limit || count <= 1;
        if (!stop) {
            eligible.clear();
            for (std::size_t c = 0; c < data.cols; ++c) {
                double lo = data.at(rows[item.begin], c);
                double hi = lo;
                for (std::size_t r = item.begin + 1; r < item.end; ++r) {
                    const double v = data.at(rows[r], c);
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                lows[c] = lo;
                highs[c] = hi;
                if (hi > lo) eligible.push_back(c);
            }
            stop = eligible.empty(); // every attribute constant on this subset
        }

        if (stop) {
            node.feature = -1;
            node.size = static_cast<std::int64_t>(count);
            continue;
        }

        const std::size_t q = eligible[rng.next_below(eligible.size())];
        const double p = draw_split(rng, lows[q], highs[q]);
        node.feature = static_cast<std::int32_t>(q);
        node.split = p;

        const auto mid_it = std::partition(
            rows.begin() + static_cast<std::ptrdiff_t>(item.begin),
            rows.begin() + static_cast<std::ptrdiff_t>(item.end),
            [&](std::size_t r) { return data.at(r, q) < p; });
        const std::size_t mid =
            static_cast<std::size_t>(mid_it - rows.begin());

        // LIFO: push right first so the left subtree is materialized next
        // (preorder node layout, fixed RNG draw order)
        stack.push_back({mid, item.end, item.depth + 1, node_idx, false});
        stack.push_back({item.begin, mid, item.depth + 1, node_idx, true});
    }
    return tree;
}

double tree_path_length(const Tree& tree, std::span<const double> x) {
    std::size_t idx = 0;
    double edges = 0.0;
    while (true) {
        const TreeNode& node = tree.nodes[idx];
        if (node.is_external())
            return edges + average_path_length(node.size);
        idx = x[static_cast<std::size_t>(node.feature)] < node.split
                  ? static_cast<std::size_t>(node.left)
                  : static_cast<std::size_t>(node.right);
        edges += 1.0;
    }
}

} // namespace

double average_path_length(std::int64_t n) noexcept {
    if (n <= 1) return 0.0;
    if (n == 2) return 1.0;
    const double nd = static_cast<double>(n);
    const double harmonic = std::log(nd - 1.0) + 0.5772156649;
    return 2.0 * harmonic - 2.0 * (nd - 1.0) / nd;
}

ForestModel fit_forest(const core::Matrix& data, const ForestOptions& options) {
    if (data.rows == 0 || data.cols == 0)
        throw std::invalid_argument("fit_forest: data must be non-empty");
    if (options.n_trees == 0)
        throw std::invalid_argument("fit_forest: n_trees must be positive");
    if (options.subsample < 2)
        throw std::invalid_argument("fit_forest: subsample must be >= 2");
    if (options.subsample > data.rows)
        throw std::invalid_argument("fit_forest: subsample exceeds row count");
    if (!(options.contamination > 0.0 && options.contamination < 1.0))
        throw std::invalid_argument("fit_forest: contamination outside (0, 1)");

    ForestModel model;
    model.n_trees = options.n_trees;
    model.subsample_size = options.subsample;
    model.height_limit = options.height_limit.value_or(static_cast<std::size_t>(
        std::max(1.0, std::ceil(std::log2(static_cast<double>(options.subsample))))));
    model.dimension = data.cols;
    model.seed = options.seed;
    model.contamination = options.contamination;
    model.trees.resize(options.n_trees);

    auto build_range = [&](std::size_t t_begin, std::size_t t_end) {
        std::vector<std::size_t> indices(data.rows);
        for (std::size_t t = t_begin; t < t_end; ++t) {
            util::Rng64 rng(util::Rng64::derive_seed(options.seed, t));
            std::iota(indices.begin(), indices.end(), 0);
            // partial Fisher-Yates: sample without replacement
            for (std::size_t i = 0; i < options.subsample; ++i) {
                const std::size_t j = i + rng.next_below(indices.size() - i);
                std::swap(indices[i], indices[j]);
            }
            model.trees[t] = build_tree(
                data, std::span<const std::size_t>(indices.data(), options.subsample),
                model.height_limit, rng);
        }
    };

    const unsigned threads =
        std::max(1u, std::min<unsigned>(options.threads,
                                        static_cast<unsigned>(options.n_trees)));
    if (threads == 1) {
        build_range(0, options.n_trees);
    } else {
        std::vector<std::thread> workers;
        const std::size_t per = (options.n_trees + threads - 1) / threads;
        for (unsigned w = 0; w < threads; ++w) {
            const std::size_t b = std::min<std::size_t>(w * per, options.n_trees);
            const std::size_t e = std::min<std::size_t>(b + per, options.n_trees);
            if (b < e) workers.emplace_back(build_range, b, e);
        }
        for (auto& worker : workers) worker.join();
    }

    // contamination-quantile threshold over the training scores
    std::vector<double> scores(data.rows);
    for (std::size_t r = 0; r < data.rows; ++r) scores[r] = anomaly_score(model, data.row(r));
    model.score_threshold =
        util::nearest_rank_quantile(std::move(scores), 1.0 - options.contamination);
    return model;
}

ForestModel fit_forest(const core::Matrix& data, std::size_t n_trees, std::size_t subsample,
                       std::uint64_t seed) {
    ForestOptions options;
    options.n_trees = n_trees;
    options.subsample = subsample;
    options.seed = seed;
    return fit_forest(data, options);
}

double path_length(const ForestModel& model, std::span<const double> x) {
    if (x.size() != model.dimension)
        throw std::invalid_argument("path_length: dimension mismatch");
    double total = 0.0;
    for (const Tree& tree : model.trees) total += tree_path_length(tree, x);
    return total / static_cast<double>(model.trees.size());
}

double anomaly_score(const ForestModel& model, std::span<const double> x) {
    const double norm = average_path_length(static_cast<std::int64_t>(model.subsample_size));
    return std::exp2(-path_length(model, x) / norm);
}

bool predict_anomaly(const ForestModel& model, std::span<const double> x) {
    return anomaly_score(model, x) > model.score_threshold;
}

std::vector<std::pair<std::int64_t, double>> rank_anomalies(const ForestModel& model,
                                                            const core::Matrix& data) {
    std::vector<std::pair<std::int64_t, double>> ranked(data.rows);
    for (std::size_t r = 0; r < data.rows; ++r)
        ranked[r] = {static_cast<std::int64_t>(r), path_length(model, data.row(r))};
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& a, const auto& b) {
                  if (a.second != b.second) return a.second < b.second;
                  return a.first < b.first;
              });
    return ranked;
}

void save_forest(const ForestModel& model, std::ostream& out) {
    out << "mpguard-iforest 1\n";
    out << "n_trees " << model.n_trees << "\n";
    out << "subsample " << model.subsample_size << "\n";
    out << "height_limit " << model.height_limit << "\n";
    out << "dim " << model.dimension << "\n";
    out << "seed " << model.seed << "\n";
    out << "contamination " << util::fmt_double(model.contamination) << "\n";
    out << "score_threshold " << util::fmt_double(model.score_threshold) << "\n";
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
        const Tree& tree = model.trees[t];
        out << "tree " << t << ' ' << tree.nodes.size() << "\n";
        // nodes are stored in preorder already
        for (const TreeNode& node : tree.nodes) {
            if (node.is_external())
                out << "E " << node.size << "\n";
            else
                out << "I " << node.feature << ' ' << util::fmt_double(node.split) << "\n";
        }
    }
    out << "end forest\n";
}

namespace {

std::string next_line(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("iforest model: truncated file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

// Rebuild child links from a preorder record stream.
Tree read_tree(std::istream& in, std::size_t node_count) {
    Tree tree;
    tree.nodes.reserve(node_count);
    std::vector<std::int32_t> pending; // internal nodes awaiting children
    for (std::size_t k = 0; k < node_count; ++k) {
        std::istringstream ss(next_line(in));
        char kind = 0;
        ss >> kind;
        TreeNode node;
        if (kind == 'E') {
            if (!(ss >> node.size)) throw std::runtime_error("iforest model: bad E record");
        } else if (kind == 'I') {
            std::string split_tok;
            if (!(ss >> node.feature >> split_tok))
                throw std::runtime_error("iforest model: bad I record");
            const auto split = util::parse_double(split_tok);
            if (!split) throw std::runtime_error("iforest model: bad split value");
            node.split = *split;
        } else {
            throw std::runtime_error("iforest model: unknown node record");
        }

        const std::int32_t idx = static_cast<std::int32_t>(tree.nodes.size());
        if (!pending.empty()) {
            TreeNode& parent = tree.nodes[static_cast<std::size_t>(pending.back())];
            if (parent.left < 0) {
                parent.left = idx;
            } else {
                parent.right = idx;
                pending.pop_back();
            }
        }
        tree.nodes.push_back(node);
        if (kind == 'I') pending.push_back(idx);
    }
    if (!pending.empty()) throw std::runtime_error("iforest model: incomplete tree");
    return tree;
}

} // namespace

ForestModel load_forest(std::istream& in) {
    if (next_line(in) != "mpguard-iforest 1")
        throw std::runtime_error("iforest model: bad header");

    ForestModel model;
    auto header_value = [&](const char* key) {
        std::istringstream ss(next_line(in));
        std::string tag, value;
        ss >> tag >> value;
        if (tag != key)
            throw std::runtime_error(std::string("iforest model: expected '") + key + "'");
        return value;
    };
    auto as_double = [](const std::string& s) {
        const auto v = util::parse_double(s);
        if (!v) throw std::runtime_error("iforest model: bad numeric field '" + s + "'");
        return *v;
    };
    model.n_trees = std::stoull(header_value("n_trees"));
    model.subsample_size = std::stoull(header_value("subsample"));
    model.height_limit = std::stoull(header_value("height_limit"));
    model.dimension = std::stoull(header_value("dim"));
    model.seed = std::stoull(header_value("seed"));
    model.contamination = as_double(header_value("contamination"));
    model.score_threshold = as_double(header_value("score_threshold"));

    model.trees.reserve(model.n_trees);
    for (std::size_t t = 0; t < model.n_trees; ++t) {
        std::istringstream ss(next_line(in));
        std::string tag;
        std::size_t idx = 0, count = 0;
        ss >> tag >> idx >> count;
        if (tag != "tree" || idx != t)
            throw std::runtime_error("iforest model: bad tree header");
        model.trees.push_back(read_tree(in, count));
    }
    if (next_line(in) != "end forest")
        throw std::runtime_error("iforest model: missing trailer");
    return model;
}

} // namespace mpguard::iforest
