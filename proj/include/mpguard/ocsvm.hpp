#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpguard/core.hpp"

namespace mpguard::ocsvm {

enum class KernelKind { rbf, linear };

struct KernelDescriptor {
    KernelKind kind = KernelKind::rbf;
    double gamma = 1.0; // rbf only, > 0
};

// rbf: exp(-gamma * ||x - y||^2); linear: x . y
double kernel_eval(std::span<const double> x, std::span<const double> y,
                   const KernelDescriptor& kernel);

// 1 / (feature count * total feature variance); falls back to
// 1 / feature count for constant data.
double default_gamma(const core::Matrix& data);

struct SvmModel {
    core::Matrix support_vectors;
    std::vector<double> alphas; // dual coefficients of the kept vectors
    double rho = 0.0;
    double nu = 0.5;
    std::size_t training_size = 0; // n of the 1/(nu*n) box constraint
    KernelDescriptor kernel;
};

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

struct TrainOptions {
    double nu = 0.5;
    KernelDescriptor kernel;
    double tol = 1e-3;
    // default: 100 * n two-variable updates
    std::int64_t max_pair_updates = -1;
};

// Solves the one-class dual
//   min 1/2 sum_ij a_i a_j K(x_i, x_j)   s.t.  0 <= a_i <= 1/(nu*n), sum a = 1
// by maximal-violating-pair SMO updates until the KKT gap drops below tol.
// The gap is measured in the conventional scaling of the dual (coefficients
// in [0, 1], i.e. multiplied by nu*n) so tol keeps its usual meaning as n
// grows. rho is recovered from the margin support vectors. Throws
// ConvergenceError (carrying the residual gap) if the update cap is hit first.
SvmModel train_ocsvm(const core::Matrix& data, const TrainOptions& options);
SvmModel train_ocsvm(const core::Matrix& data, double nu, const KernelDescriptor& kernel,
                     double tol = 1e-3);

// sum_i a_i K(sv_i, x) - rho
double decision_value(const SvmModel& model, std::span<const double> x);

// sign of the decision value; sign(0) is +1 (inlier)
int decide(const SvmModel& model, std::span<const double> x);

void save_svm(const SvmModel& model, std::ostream& out);
SvmModel load_svm(std::istream& in);

} // namespace mpguard::ocsvm
