#include "mpguard/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "mpguard/util.hpp"

namespace mpguard::preprocess {

namespace {

bool is_boolean_value(double v) { return v == 0.0 || v == 1.0; }

std::string read_line_checked(std::istream& in, const char* what) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(std::string("pipeline: missing ") + what);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

std::vector<double> parse_doubles(std::istringstream& ss, std::size_t count, const char* what) {
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::string tok;
        if (!(ss >> tok)) throw std::runtime_error(std::string("pipeline: truncated ") + what);
        const auto v = util::parse_double(tok);
        if (!v) throw std::runtime_error(std::string("pipeline: bad number in ") + what);
        out[i] = *v;
    }
    return out;
}

} // namespace

FeatureMatrix::FeatureMatrix(core::Matrix data, std::vector<ColumnInfo> schema)
    : data_(std::move(data)), schema_(std::move(schema)) {
    if (schema_.size() != data_.cols)
        throw std::invalid_argument("FeatureMatrix: schema size does not match column count");
    if (data_.values.size() != data_.rows * data_.cols)
        throw std::invalid_argument("FeatureMatrix: ragged data");
    for (std::size_t c = 0; c < data_.cols; ++c) {
        if (schema_[c].kind != ColumnKind::boolean) continue;
        for (std::size_t r = 0; r < data_.rows; ++r) {
            if (!is_boolean_value(data_.at(r, c)))
                throw std::invalid_argument("FeatureMatrix: boolean column '" + schema_[c].name +
                                            "' holds a value other than 0/1");
        }
    }
}

std::vector<double> FeatureMatrix::column(std::size_t c) const {
    std::vector<double> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, c);
    return out;
}

std::optional<std::size_t> FeatureMatrix::column_index(std::string_view name) const {
    for (std::size_t c = 0; c < schema_.size(); ++c)
        if (schema_[c].name == name) return c;
    return std::nullopt;
}

FeatureMatrix zero_mean(const FeatureMatrix& m) {
    if (m.rows() == 0) throw std::invalid_argument("zero_mean: empty matrix");
    core::Matrix out = m.data();
    for (std::size_t c = 0; c < m.cols(); ++c) {
        if (m.schema()[c].kind == ColumnKind::boolean) continue;
        double mean = 0.0;
        for (std::size_t r = 0; r < m.rows(); ++r) mean += out.at(r, c);
        mean /= static_cast<double>(m.rows());
        for (std::size_t r = 0; r < m.rows(); ++r) out.at(r, c) -= mean;
    }
    return FeatureMatrix(std::move(out), m.schema());
}

FeatureMatrix linear_scale(const FeatureMatrix& m) {
    if (m.rows() == 0) throw std::invalid_argument("linear_scale: empty matrix");
    core::Matrix out = m.data();
    for (std::size_t c = 0; c < m.cols(); ++c) {
        if (m.schema()[c].kind == ColumnKind::boolean) continue;
        double lo = out.at(0, c), hi = out.at(0, c);
        for (std::size_t r = 1; r < m.rows(); ++r) {
            lo = std::min(lo, out.at(r, c));
            hi = std::max(hi, out.at(r, c));
        }
        if (hi > lo) {
            const double span = hi - lo;
            for (std::size_t r = 0; r < m.rows(); ++r)
                out.at(r, c) = (out.at(r, c) - lo) / span;
        } else {
            for (std::size_t r = 0; r < m.rows(); ++r) out.at(r, c) = 0.5;
        }
    }
    return FeatureMatrix(std::move(out), m.schema());
}

FeatureMatrix filter_boolean(const FeatureMatrix& m, BoolMode mode) {
    if (mode == BoolMode::bool_included) return m;
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < m.cols(); ++c)
        if (m.schema()[c].kind != ColumnKind::boolean) keep.push_back(c);

    core::Matrix out(m.rows(), keep.size());
    std::vector<ColumnInfo> schema;
    schema.reserve(keep.size());
    for (std::size_t k = 0; k < keep.size(); ++k) schema.push_back(m.schema()[keep[k]]);
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t k = 0; k < keep.size(); ++k) out.at(r, k) = m.at(r, keep[k]);
    return FeatureMatrix(std::move(out), std::move(schema));
}

void jacobi_eigen_symmetric(std::vector<double>& a, std::size_t n,
                            std::vector<double>& eigenvalues, core::Matrix& eigenvectors) {
    if (a.size() != n * n) throw std::invalid_argument("jacobi: matrix size mismatch");

    auto A = [&](std::size_t r, std::size_t c) -> double& { return a[r * n + c]; };
    core::Matrix v(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::fabs(A(i, i)));
    scale = std::max(scale, 1e-300);

    constexpr int kMaxSweeps = 100;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
        if (std::sqrt(off) <= 1e-13 * scale * static_cast<double>(n)) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = A(p, q);
                if (std::fabs(apq) <= 1e-300) continue;
                const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                const double app = A(p, p), aqq = A(q, q);
                A(p, p) = app - t * apq;
                A(q, q) = aqq + t * apq;
                A(p, q) = A(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = A(p, k) = c * akp - s * akq;
                    A(k, q) = A(q, k) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v.at(k, p), vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - s * vkq;
                    v.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return A(i, i) > A(j, j); });

    eigenvalues.resize(n);
    eigenvectors = core::Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t src = order[i];
        eigenvalues[i] = A(src, src);
        // orient each vector so its largest-magnitude entry is positive
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (std::fabs(v.at(k, src)) > best) {
                best = std::fabs(v.at(k, src));
                arg = k;
            }
        }
        const double sign = v.at(arg, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t k = 0; k < n; ++k) eigenvectors.at(i, k) = sign * v.at(k, src);
    }
}

PcaModel pca_fit(const FeatureMatrix& m, const PcaChoice& choice) {
    if (m.rows() == 0 || m.cols() == 0) throw std::invalid_argument("pca_fit: empty matrix");
    const std::size_t d = m.cols();
    if (choice.k && (*choice.k < 1 || *choice.k > d))
        throw std::invalid_argument("pca_fit: component count out of range");
    if (choice.target && !(*choice.target > 0.0 && *choice.target <= 1.0))
        throw std::invalid_argument("pca_fit: variance target outside (0, 1]");
    if (!choice.k && !choice.target)
        throw std::invalid_argument("pca_fit: no retention choice given");

    PcaModel model;
    model.mean_vector.assign(d, 0.0);
    for (std::size_t c = 0; c < d; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < m.rows(); ++r) mean += m.at(r, c);
        model.mean_vector[c] = mean / static_cast<double>(m.rows());
    }

    // population covariance of the centered data
    std::vector<double> cov(d * d, 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t i = 0; i < d; ++i) {
            const double xi = m.at(r, i) - model.mean_vector[i];
            for (std::size_t j = i; j < d; ++j)
                cov[i * d + j] += xi * (m.at(r, j) - model.mean_vector[j]);
        }
    }
    const double inv_rows = 1.0 / static_cast<double>(m.rows());
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            cov[i * d + j] *= inv_rows;
            cov[j * d + i] = cov[i * d + j];
        }

    std::vector<double> eigenvalues;
    core::Matrix vectors;
    jacobi_eigen_symmetric(cov, d, eigenvalues, vectors);
    for (double& ev : eigenvalues) ev = std::max(ev, 0.0);

    std::size_t k;
    if (choice.k) {
        k = *choice.k;
    } else {
        const double total = std::accumulate(eigenvalues.begin(), eigenvalues.end(), 0.0);
        k = 1;
        if (total > 0.0) {
            double cum = 0.0;
            for (k = 0; k < d;) {
                cum += eigenvalues[k];
                ++k;
                if (cum / total >= *choice.target) break;
            }
        }
    }

    model.components = core::Matrix(k, d);
    model.explained_variance.assign(eigenvalues.begin(),
                                    eigenvalues.begin() + static_cast<std::ptrdiff_t>(k));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < d; ++j) model.components.at(i, j) = vectors.at(i, j);
    return model;
}

FeatureMatrix pca_transform(const PcaModel& model, const FeatureMatrix& m) {
    const std::size_t d = model.mean_vector.size();
    if (m.cols() != d) throw std::invalid_argument("pca_transform: dimension mismatch");
    const std::size_t k = model.components.rows;

    core::Matrix out(m.rows(), k);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < k; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j)
                acc += model.components.at(c, j) * (m.at(r, j) - model.mean_vector[j]);
            out.at(r, c) = acc;
        }
    }
    std::vector<ColumnInfo> schema(k);
    for (std::size_t c = 0; c < k; ++c)
        schema[c] = {"pc" + std::to_string(c + 1), ColumnKind::continuous};
    return FeatureMatrix(std::move(out), std::move(schema));
}

Pipeline Pipeline::fit(const FeatureMatrix& train, Variant variant, BoolMode mode,
                       const PcaChoice& pca_choice) {
    if (train.rows() == 0) throw std::invalid_argument("Pipeline::fit: empty training data");

    Pipeline p;
    p.variant_ = variant;
    p.mode_ = mode;
    p.source_cols_ = train.cols();
    for (std::size_t c = 0; c < train.cols(); ++c) {
        if (mode == BoolMode::non_bool && train.schema()[c].kind == ColumnKind::boolean)
            continue;
        p.kept_.push_back(c);
        p.kept_kinds_.push_back(train.schema()[c].kind);
    }

    const FeatureMatrix filtered = filter_boolean(train, mode);
    switch (variant) {
    case Variant::none:
        break;
    case Variant::zero_mean: {
        p.means_.assign(filtered.cols(), 0.0);
        for (std::size_t c = 0; c < filtered.cols(); ++c) {
            if (p.kept_kinds_[c] == ColumnKind::boolean) continue;
            double mean = 0.0;
            for (std::size_t r = 0; r < filtered.rows(); ++r) mean += filtered.at(r, c);
            p.means_[c] = mean / static_cast<double>(filtered.rows());
        }
        break;
    }
    case Variant::linear: {
        p.mins_.assign(filtered.cols(), 0.0);
        p.maxs_.assign(filtered.cols(), 1.0);
        for (std::size_t c = 0; c < filtered.cols(); ++c) {
            if (p.kept_kinds_[c] == ColumnKind::boolean) continue;
            double lo = filtered.at(0, c), hi = filtered.at(0, c);
            for (std::size_t r = 1; r < filtered.rows(); ++r) {
                lo = std::min(lo, filtered.at(r, c));
                hi = std::max(hi, filtered.at(r, c));
            }
            p.mins_[c] = lo;
            p.maxs_[c] = hi;
        }
        break;
    }
    case Variant::pca:
        p.pca_ = pca_fit(filtered, pca_choice);
        break;
    }
    return p;
}

FeatureMatrix Pipeline::apply(const FeatureMatrix& m) const {
    if (m.cols() != source_cols_)
        throw std::invalid_argument("Pipeline::apply: column count differs from fit");

    core::Matrix data(m.rows(), kept_.size());
    std::vector<ColumnInfo> schema(kept_.size());
    for (std::size_t k = 0; k < kept_.size(); ++k) {
        schema[k] = m.schema()[kept_[k]];
        schema[k].kind = kept_kinds_[k];
        for (std::size_t r = 0; r < m.rows(); ++r) data.at(r, k) = m.at(r, kept_[k]);
    }

    switch (variant_) {
    case Variant::none:
        break;
    case Variant::zero_mean:
        for (std::size_t k = 0; k < kept_.size(); ++k) {
            if (kept_kinds_[k] == ColumnKind::boolean) continue;
            for (std::size_t r = 0; r < m.rows(); ++r) data.at(r, k) -= means_[k];
        }
        break;
    case Variant::linear:
        for (std::size_t k = 0; k < kept_.size(); ++k) {
            if (kept_kinds_[k] == ColumnKind::boolean) continue;
            const double lo = mins_[k], hi = maxs_[k];
            if (hi > lo) {
                const double span = hi - lo;
                for (std::size_t r = 0; r < m.rows(); ++r)
                    data.at(r, k) = (data.at(r, k) - lo) / span;
            } else {
                for (std::size_t r = 0; r < m.rows(); ++r) data.at(r, k) = 0.5;
            }
        }
        break;
    case Variant::pca:
        return pca_transform(*pca_, FeatureMatrix(std::move(data), std::move(schema)));
    }
    return FeatureMatrix(std::move(data), std::move(schema));
}

void Pipeline::save(std::ostream& out) const {
    out << "pipeline 1\n";
    out << "variant " << to_string(variant_) << "\n";
    out << "bool_mode " << to_string(mode_) << "\n";
    out << "source_cols " << source_cols_ << "\n";
    out << "kept " << kept_.size();
    for (std::size_t i : kept_) out << ' ' << i;
    out << "\n";
    out << "kinds " << kept_kinds_.size();
    for (ColumnKind k : kept_kinds_) out << ' ' << (k == ColumnKind::boolean ? 'b' : 'c');
    out << "\n";
    auto dump = [&](const char* tag, const std::vector<double>& vals) {
        out << tag << ' ' << vals.size();
        for (double v : vals) out << ' ' << util::fmt_double(v);
        out << "\n";
    };
    if (variant_ == Variant::zero_mean) dump("means", means_);
    if (variant_ == Variant::linear) {
        dump("mins", mins_);
        dump("maxs", maxs_);
    }
    if (variant_ == Variant::pca) {
        out << "pca " << pca_->components.rows << ' ' << pca_->components.cols << "\n";
        dump("pca_mean", pca_->mean_vector);
        dump("pca_evar", pca_->explained_variance);
        for (std::size_t i = 0; i < pca_->components.rows; ++i) {
            out << "comp";
            for (std::size_t j = 0; j < pca_->components.cols; ++j)
                out << ' ' << util::fmt_double(pca_->components.at(i, j));
            out << "\n";
        }
    }
    out << "end pipeline\n";
}

Pipeline Pipeline::load(std::istream& in) {
    Pipeline p;
    std::string line = read_line_checked(in, "header");
    if (line != "pipeline 1") throw std::runtime_error("pipeline: bad header '" + line + "'");

    auto expect_counted = [](std::istringstream& ss, const char* what) {
        std::size_t count = 0;
        if (!(ss >> count)) throw std::runtime_error(std::string("pipeline: bad count for ") + what);
        return count;
    };

    std::size_t pca_k = 0, pca_d = 0, comp_rows = 0;
    while (true) {
        line = read_line_checked(in, "section");
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "end") break;
        if (tag == "variant") {
            std::string v;
            ss >> v;
            p.variant_ = variant_from_string(v);
        } else if (tag == "bool_mode") {
            std::string v;
            ss >> v;
            p.mode_ = bool_mode_from_string(v);
        } else if (tag == "source_cols") {
            ss >> p.source_cols_;
        } else if (tag == "kept") {
            const std::size_t k = expect_counted(ss, "kept");
            p.kept_.resize(k);
            for (auto& i : p.kept_)
                if (!(ss >> i)) throw std::runtime_error("pipeline: truncated kept list");
        } else if (tag == "kinds") {
            const std::size_t k = expect_counted(ss, "kinds");
            p.kept_kinds_.resize(k);
            for (auto& kind : p.kept_kinds_) {
                char c = 0;
                if (!(ss >> c)) throw std::runtime_error("pipeline: truncated kinds list");
                kind = (c == 'b') ? ColumnKind::boolean : ColumnKind::continuous;
            }
        } else if (tag == "means") {
            p.means_ = parse_doubles(ss, expect_counted(ss, "means"), "means");
        } else if (tag == "mins") {
            p.mins_ = parse_doubles(ss, expect_counted(ss, "mins"), "mins");
        } else if (tag == "maxs") {
            p.maxs_ = parse_doubles(ss, expect_counted(ss, "maxs"), "maxs");
        } else if (tag == "pca") {
            if (!(ss >> pca_k >> pca_d)) throw std::runtime_error("pipeline: bad pca line");
            p.pca_ = PcaModel{};
            p.pca_->components = core::Matrix(pca_k, pca_d);
        } else if (tag == "pca_mean") {
            p.pca_->mean_vector = parse_doubles(ss, expect_counted(ss, "pca_mean"), "pca_mean");
        } else if (tag == "pca_evar") {
            p.pca_->explained_variance =
                parse_doubles(ss, expect_counted(ss, "pca_evar"), "pca_evar");
        } else if (tag == "comp") {
            if (!p.pca_ || comp_rows >= pca_k)
                throw std::runtime_error("pipeline: unexpected comp row");
            const auto vals = parse_doubles(ss, pca_d, "comp");
            for (std::size_t j = 0; j < pca_d; ++j)
                p.pca_->components.at(comp_rows, j) = vals[j];
            ++comp_rows;
        } else {
            throw std::runtime_error("pipeline: unknown section '" + tag + "'");
        }
    }
    return p;
}

std::string to_string(Variant v) {
    switch (v) {
    case Variant::none: return "none";
    case Variant::zero_mean: return "zero_mean";
    case Variant::linear: return "linear";
    case Variant::pca: return "pca";
    }
    return "none";
}

std::string to_string(BoolMode m) {
    return m == BoolMode::bool_included ? "bool" : "non_bool";
}

Variant variant_from_string(std::string_view s) {
    const std::string v = util::to_lower(s);
    if (v == "none") return Variant::none;
    if (v == "zero_mean" || v == "0mean" || v == "0_mean") return Variant::zero_mean;
    if (v == "linear") return Variant::linear;
    if (v == "pca") return Variant::pca;
    throw std::invalid_argument("unknown preprocessing variant '" + std::string(s) + "'");
}

BoolMode bool_mode_from_string(std::string_view s) {
    const std::string v = util::to_lower(s);
    if (v == "bool") return BoolMode::bool_included;
    if (v == "non_bool" || v == "nonbool") return BoolMode::non_bool;
    throw std::invalid_argument("unknown bool mode '" + std::string(s) + "'");
}

} // namespace mpguard::preprocess
