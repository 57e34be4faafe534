#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "icescope/learners.hpp"
#include "icescope/parallel.hpp"

namespace icescope {

namespace {

struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct Tree {
    std::vector<Node> nodes;

    double predict(const double* x) const {
        int k = 0;
        while (nodes[k].feature >= 0) {
            const Node& n = nodes[k];
            k = x[n.feature] <= n.threshold ? n.left : n.right;
        }
        return nodes[k].value;
    }
};

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const std::vector<double>& x, std::size_t p, std::span<const double> y,
                std::size_t min_leaf, std::size_t m_try, Rng& rng)
        : x_(x), p_(p), y_(y), min_leaf_(min_leaf), m_try_(m_try), rng_(rng) {}

    Tree build(std::vector<std::size_t> sample) {
        Tree tree;
        idx_ = std::move(sample);
        struct Pending {
            int node;
            std::size_t begin, end;
        };
        tree.nodes.emplace_back();
        std::vector<Pending> stack{{0, 0, idx_.size()}};
        while (!stack.empty()) {
            const Pending job = stack.back();
            stack.pop_back();
            const std::size_t n = job.end - job.begin;

            double sum = 0.0;
            for (std::size_t k = job.begin; k < job.end; ++k) sum += y_[idx_[k]];
            const double mean = sum / static_cast<double>(n);
            double sse = 0.0;
            for (std::size_t k = job.begin; k < job.end; ++k) {
                const double d = y_[idx_[k]] - mean;
                sse += d * d;
            }
            tree.nodes[job.node].value = mean;

            // zero-variance nodes stay leaves
            const double floor = 1e-24 * static_cast<double>(n) * (1.0 + mean * mean);
            if (n < 2 * min_leaf_ || sse <= floor) continue;

            const Split best = find_split(job.begin, job.end, sum);
            if (best.feature < 0 || !(best.gain > 1e-12 * sse)) continue;

            auto mid_it = std::stable_partition(
                idx_.begin() + static_cast<std::ptrdiff_t>(job.begin),
                idx_.begin() + static_cast<std::ptrdiff_t>(job.end),
                [&](std::size_t i) { return x_[i * p_ + best.feature] <= best.threshold; });
            const std::size_t mid = static_cast<std::size_t>(mid_it - idx_.begin());

            const int left = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            Node& node = tree.nodes[job.node];
            node.feature = best.feature;
            node.threshold = best.threshold;
            node.left = left;
            node.right = left + 1;
            stack.push_back({left + 1, mid, job.end});
            stack.push_back({left, job.begin, mid});
        }
        return tree;
    }

private:
    std::vector<std::size_t> candidate_features() {
        std::vector<std::size_t> f(p_);
        std::iota(f.begin(), f.end(), std::size_t{0});
        if (m_try_ == 0 || m_try_ >= p_) return f;
        rng_.shuffle(f);
        f.resize(m_try_);
        std::sort(f.begin(), f.end());
        return f;
    }

    Split find_split(std::size_t begin, std::size_t end, double total) {
        const std::size_t n = end - begin;
        const double parent = total * total / static_cast<double>(n);
        Split best;
        for (std::size_t f : candidate_features()) {
            order_.clear();
            for (std::size_t k = begin; k < end; ++k) {
                const std::size_t i = idx_[k];
                order_.push_back({x_[i * p_ + f], y_[i]});
            }
            std::sort(order_.begin(), order_.end());
            double left_sum = 0.0;
            for (std::size_t k = 1; k < n; ++k) {
                left_sum += order_[k - 1].second;
                if (k < min_leaf_ || n - k < min_leaf_) continue;
                const double lo = order_[k - 1].first, hi = order_[k].first;
                if (!(lo < hi)) continue;
                const double nl = static_cast<double>(k), nr = static_cast<double>(n - k);
                const double right_sum = total - left_sum;
                const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent;
                if (gain > best.gain) {
                    double t = lo + (hi - lo) / 2.0;
                    if (!(t < hi)) t = lo;
                    best = {static_cast<int>(f), t, gain};
                }
            }
        }
        return best;
    }

    const std::vector<double>& x_;
    std::size_t p_;
    std::span<const double> y_;
    std::size_t min_leaf_;
    std::size_t m_try_;
    Rng& rng_;
    std::vector<std::size_t> idx_;
    std::vector<std::pair<double, double>> order_;
};

class BaggedTrees final : public Model {
public:
    BaggedTrees(std::size_t p, std::vector<Tree> trees) : p_(p), trees_(std::move(trees)) {}

    std::size_t n_features() const override { return p_; }

    void predict(std::span<const double> rows, std::span<double> out) const override {
        const double scale = 1.0 / static_cast<double>(trees_.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double* x = rows.data() + i * p_;
            double acc = 0.0;
            for (const Tree& t : trees_) acc += t.predict(x);
            out[i] = acc * scale;
        }
    }

private:
    std::size_t p_;
    std::vector<Tree> trees_;
};

}  // namespace

PredictorHandle fit_bagged_trees(const FeatureMatrix& data, const TreeOptions& options) {
    if (options.n_trees < 1) throw std::invalid_argument("bagged trees: n_trees must be >= 1");
    if (options.min_leaf < 1) throw std::invalid_argument("bagged trees: min_leaf must be >= 1");
    const std::size_t n = data.n_rows(), p = data.n_cols();
    if (n < 2 * options.min_leaf) {
        throw std::invalid_argument(fmt::format("bagged trees: need N >= 2*min_leaf ({} < {})", n,
                                                2 * options.min_leaf));
    }
    if (p == 0) throw std::invalid_argument("bagged trees: no predictors");

    const std::vector<double> x = data.row_major();
    const auto y = data.response();
    std::vector<Tree> trees(options.n_trees);
    parallel_for(options.n_trees, [&](std::size_t t) {
        Rng rng = Rng::stream(options.seed, t);
        std::vector<std::size_t> sample(n);
        for (auto& s : sample) s = static_cast<std::size_t>(rng.below(n));
        TreeBuilder builder(x, p, y, options.min_leaf, options.m_try, rng);
        trees[t] = builder.build(std::move(sample));
    });

    std::map<std::string, std::string> meta{
        {"n_trees", std::to_string(options.n_trees)},
        {"min_leaf", std::to_string(options.min_leaf)},
        {"m_try", std::to_string(options.m_try == 0 ? p : options.m_try)},
        {"seed", std::to_string(options.seed)},
    };
    return PredictorHandle(std::make_shared<BaggedTrees>(p, std::move(trees)), PredictorKind::bagged_trees,
                           std::move(meta));
}

}  // namespace icescope
