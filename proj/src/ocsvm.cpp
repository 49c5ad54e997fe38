#include "mpguard/ocsvm.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "mpguard/util.hpp"

namespace mpguard::ocsvm {

namespace {

double squared_distance(std::span<const double> x, std::span<const double> y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

double dot(std::span<const double> x, std::span<const double> y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    return acc;
}

// One cached kernel row; SMO tends to reselect the same ascent index.
class KernelRowCache {
public:
    KernelRowCache(const core::Matrix& data, const KernelDescriptor& kernel)
        : data_(data), kernel_(kernel), row_(data.rows), cached_(data.rows + 1) {}

    std::span<const double> row(std::size_t i) {
        if (cached_ != i) {
            for (std::size_t j = 0; j < data_.rows; ++j)
                row_[j] = kernel_eval(data_.row(i), data_.row(j), kernel_);
            cached_ = i;
        }
        return row_;
    }

    void fill_row(std::size_t i, std::vector<double>& out) const {
        out.resize(data_.rows);
        for (std::size_t j = 0; j < data_.rows; ++j)
            out[j] = kernel_eval(data_.row(i), data_.row(j), kernel_);
    }

private:
    const core::Matrix& data_;
    const KernelDescriptor& kernel_;
    std::vector<double> row_;
    std::size_t cached_;
};

} // namespace

double kernel_eval(std::span<const double> x, std::span<const double> y,
                   const KernelDescriptor& kernel) {
    if (x.size() != y.size())
        throw std::invalid_argument("kernel_eval: dimension mismatch");
    switch (kernel.kind) {
    case KernelKind::rbf:
        return std::exp(-kernel.gamma * squared_distance(x, y));
    case KernelKind::linear:
        return dot(x, y);
    }
    return 0.0;
}

double default_gamma(const core::Matrix& data) {
    if (data.cols == 0) throw std::invalid_argument("default_gamma: empty matrix");
    double mean = 0.0;
    for (double v : data.values) mean += v;
    mean /= static_cast<double>(data.values.size());
    double var = 0.0;
    for (double v : data.values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(data.values.size());
    if (var <= 0.0) return 1.0 / static_cast<double>(data.cols);
    return 1.0 / (static_cast<double>(data.cols) * var);
}

SvmModel train_ocsvm(const core::Matrix& data, const TrainOptions& options) {
    const std::size_t n = data.rows;
    if (n == 0) throw std::invalid_argument("train_ocsvm: data must be non-empty");
    if (!(options.nu > 0.0 && options.nu < 1.0))
        throw std::invalid_argument("train_ocsvm: nu must lie in (0, 1)");
    if (!(options.tol > 0.0)) throw std::invalid_argument("train_ocsvm: tol must be positive");
    if (options.kernel.kind == KernelKind::rbf && !(options.kernel.gamma > 0.0))
        throw std::invalid_argument("train_ocsvm: rbf gamma must be positive");

    const double box = 1.0 / (options.nu * static_cast<double>(n));
    std::vector<double> alpha(n, 1.0 / static_cast<double>(n)); // interior, sums to 1

    KernelRowCache cache(data, options.kernel);

    // gradient of the dual objective: G_i = sum_j alpha_j K_ij
    std::vector<double> gradient(n, 0.0);
    {
        std::vector<double> row;
        for (std::size_t i = 0; i < n; ++i) {
            cache.fill_row(i, row);
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += row[j];
            gradient[i] = acc / static_cast<double>(n);
        }
    }

    const std::int64_t max_updates =
        options.max_pair_updates > 0 ? options.max_pair_updates
                                     : static_cast<std::int64_t>(100 * n);
    // the KKT gap is measured in the conventional scaling of the dual where
    // coefficients live in [0, 1]; otherwise a fixed tol gets looser as n*nu
    // grows and the alpha mass never consolidates onto the box
    const double gap_scale = options.nu * static_cast<double>(n);
    std::vector<double> row_j;
    double gap = 0.0;
    bool converged = false;

    for (std::int64_t update = 0; update < max_updates; ++update) {
        // maximal violating pair: mass should flow from the largest gradient
        // (shrinkable) to the smallest gradient (growable)
        std::size_t up = n, down = n;
        double g_up = std::numeric_limits<double>::infinity();
        double g_down = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n; ++k) {
            if (alpha[k] < box && gradient[k] < g_up) {
                g_up = gradient[k];
                up = k;
            }
            if (alpha[k] > 0.0 && gradient[k] > g_down) {
                g_down = gradient[k];
                down = k;
            }
        }
        const double raw_gap = g_down - g_up;
        gap = raw_gap * gap_scale;
        if (up == n || down == n || gap < options.tol) {
            converged = true;
            break;
        }

        const std::span<const double> k_up = cache.row(up);
        cache.fill_row(down, row_j);

        const double eta = k_up[up] + row_j[down] - 2.0 * k_up[down];
        double delta = eta > 1e-12 ? raw_gap / eta : std::numeric_limits<double>::infinity();
        const double room_up = box - alpha[up];
        delta = std::min(delta, std::min(room_up, alpha[down]));

        // keep bound values bit-exact so the selection sets stay clean
        if (delta == room_up) {
            alpha[up] = box;
            alpha[down] -= delta;
        } else if (delta == alpha[down]) {
            alpha[down] = 0.0;
            alpha[up] += delta;
        } else {
            alpha[up] += delta;
            alpha[down] -= delta;
        }

        for (std::size_t k = 0; k < n; ++k)
            gradient[k] += delta * (k_up[k] - row_j[k]);
    }

    if (!converged)
        throw ConvergenceError("train_ocsvm: KKT gap " + util::fmt_double(gap) +
                                   " after " + std::to_string(max_updates) +
                                   " pair updates (tol " + util::fmt_double(options.tol) + ")",
                               gap);

    // rho: the expansion value on margin support vectors; with none, the
    // midpoint of the bound constraints
    double free_sum = 0.0;
    std::size_t free_count = 0;
    double upper = std::numeric_limits<double>::infinity();  // min G over alpha == 0
    double lower = -std::numeric_limits<double>::infinity(); // max G over alpha == box
    for (std::size_t k = 0; k < n; ++k) {
        if (alpha[k] > 0.0 && alpha[k] < box) {
            free_sum += gradient[k];
            ++free_count;
        } else if (alpha[k] == 0.0) {
            upper = std::min(upper, gradient[k]);
        } else {
            lower = std::max(lower, gradient[k]);
        }
    }
    double rho;
    if (free_count > 0) {
        rho = free_sum / static_cast<double>(free_count);
    } else if (std::isfinite(upper) && std::isfinite(lower)) {
        rho = 0.5 * (upper + lower);
    } else if (std::isfinite(lower)) {
        rho = lower;
    } else {
        rho = upper;
    }

    SvmModel model;
    model.nu = options.nu;
    model.rho = rho;
    model.kernel = options.kernel;
    model.training_size = n;

    std::size_t n_sv = 0;
    for (double a : alpha)
        if (a > 0.0) ++n_sv;
    model.support_vectors = core::Matrix(n_sv, data.cols);
    model.alphas.reserve(n_sv);
    std::size_t r = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (alpha[k] <= 0.0) continue;
        for (std::size_t c = 0; c < data.cols; ++c)
            model.support_vectors.at(r, c) = data.at(k, c);
        model.alphas.push_back(alpha[k]);
        ++r;
    }
    return model;
}

SvmModel train_ocsvm(const core::Matrix& data, double nu, const KernelDescriptor& kernel,
                     double tol) {
    TrainOptions options;
    options.nu = nu;
    options.kernel = kernel;
    options.tol = tol;
    return train_ocsvm(data, options);
}

double decision_value(const SvmModel& model, std::span<const double> x) {
    if (x.size() != model.support_vectors.cols)
        throw std::invalid_argument("decision_value: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < model.support_vectors.rows; ++i)
        acc += model.alphas[i] * kernel_eval(model.support_vectors.row(i), x, model.kernel);
    return acc - model.rho;
}

int decide(const SvmModel& model, std::span<const double> x) {
    return decision_value(model, x) < 0.0 ? -1 : 1;
}

void save_svm(const SvmModel& model, std::ostream& out) {
    out << "mpguard-ocsvm 1\n";
    if (model.kernel.kind == KernelKind::rbf)
        out << "kernel rbf " << util::fmt_double(model.kernel.gamma) << "\n";
    else
        out << "kernel linear\n";
    out << "nu " << util::fmt_double(model.nu) << "\n";
    out << "rho " << util::fmt_double(model.rho) << "\n";
    out << "training_size " << model.training_size << "\n";
    out << "sv " << model.support_vectors.rows << ' ' << model.support_vectors.cols << "\n";
    for (std::size_t i = 0; i < model.support_vectors.rows; ++i) {
        out << util::fmt_double(model.alphas[i]);
        for (std::size_t c = 0; c < model.support_vectors.cols; ++c)
            out << ' ' << util::fmt_double(model.support_vectors.at(i, c));
        out << "\n";
    }
    out << "end svm\n";
}

namespace {

std::string next_line(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("ocsvm model: truncated file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

double parse_or_throw(const std::string& token) {
    const auto v = util::parse_double(token);
    if (!v) throw std::runtime_error("ocsvm model: bad numeric field '" + token + "'");
    return *v;
}

} // namespace

SvmModel load_svm(std::istream& in) {
    if (next_line(in) != "mpguard-ocsvm 1") throw std::runtime_error("ocsvm model: bad header");

    SvmModel model;
    {
        std::istringstream ss(next_line(in));
        std::string tag, kind, gamma;
        ss >> tag >> kind;
        if (tag != "kernel") throw std::runtime_error("ocsvm model: expected kernel line");
        if (kind == "rbf") {
            model.kernel.kind = KernelKind::rbf;
            if (!(ss >> gamma)) throw std::runtime_error("ocsvm model: missing gamma");
            model.kernel.gamma = parse_or_throw(gamma);
        } else if (kind == "linear") {
            model.kernel.kind = KernelKind::linear;
        } else {
            throw std::runtime_error("ocsvm model: unknown kernel '" + kind + "'");
        }
    }
    auto tagged = [&](const char* key) {
        std::istringstream ss(next_line(in));
        std::string tag, value;
        ss >> tag >> value;
        if (tag != key)
            throw std::runtime_error(std::string("ocsvm model: expected '") + key + "'");
        return value;
    };
    model.nu = parse_or_throw(tagged("nu"));
    model.rho = parse_or_throw(tagged("rho"));
    model.training_size = std::stoull(tagged("training_size"));

    std::size_t count = 0, dim = 0;
    {
        std::istringstream ss(next_line(in));
        std::string tag;
        ss >> tag >> count >> dim;
        if (tag != "sv") throw std::runtime_error("ocsvm model: expected sv line");
    }
    model.support_vectors = core::Matrix(count, dim);
    model.alphas.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::istringstream ss(next_line(in));
        std::string token;
        if (!(ss >> token)) throw std::runtime_error("ocsvm model: truncated sv row");
        model.alphas[i] = parse_or_throw(token);
        for (std::size_t c = 0; c < dim; ++c) {
            if (!(ss >> token)) throw std::runtime_error("ocsvm model: truncated sv row");
            model.support_vectors.at(i, c) = parse_or_throw(token);
        }
    }
    if (next_line(in) != "end svm") throw std::runtime_error("ocsvm model: missing trailer");
    return model;
}

} // namespace mpguard::ocsvm
