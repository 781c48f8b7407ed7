#include "latentcast/evalkit/gaussian.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace latentcast::evalkit {

namespace {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
void check_eigenvalues(const char* op, const Vec<Scalar>& values) {
    if (values.size() == 0) return;
    const double scale = std::max(1.0, static_cast<double>(values.cwiseAbs().maxCoeff()));
    const double lowest = static_cast<double>(values.minCoeff());
    if (lowest < -kNegativeTolerance * scale) {
        throw NotPsdError(std::string(op) + ": matrix is not positive semidefinite (eigenvalue " +
                          std::to_string(lowest) + ")");
    }
}

}  // namespace

template <typename Scalar>
GaussianSummary<Scalar> fit_gaussian(const Mat<Scalar>& rows) {
    if (rows.rows() < 2) throw std::invalid_argument("fit_gaussian: need at least 2 vectors");
    const Mat<double> x = rows.template cast<double>();
    const Vec<double> mean = x.colwise().mean().transpose();
    const Mat<double> centered = x.rowwise() - mean.transpose();
    Mat<double> cov = (centered.transpose() * centered) / static_cast<double>(x.rows());
    const auto d = static_cast<double>(x.cols());
    const double lambda = std::max(kShrinkage * cov.trace() / d, kShrinkageFloor);
    cov.diagonal().array() += lambda;
    GaussianSummary<Scalar> g;
    g.mean = mean.template cast<Scalar>();
    g.cov = cov.template cast<Scalar>();
    g.count = rows.rows();
    g.shrinkage = static_cast<Scalar>(lambda);
    return g;
}

template <typename Scalar>
GaussianSummary<Scalar> make_gaussian(Vec<Scalar> mean, Mat<Scalar> cov, std::int64_t count) {
    if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
        throw std::invalid_argument("make_gaussian: covariance is not d x d");
    }
    const double scale = std::max(1.0, static_cast<double>(cov.cwiseAbs().maxCoeff()));
    if (static_cast<double>((cov - cov.transpose()).cwiseAbs().maxCoeff()) > 1e-9 * scale) {
        throw NotPsdError("make_gaussian: covariance is not symmetric");
    }
    GaussianSummary<Scalar> g;
    g.mean = std::move(mean);
    g.cov = std::move(cov);
    g.count = count;
    return g;
}

template <typename Scalar>
Mat<Scalar> psd_sqrt(const Mat<Scalar>& m) {
    const Mat<Scalar> sym = (m + m.transpose()) / Scalar(2);
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(sym);
    if (es.info() != Eigen::Success) throw NotPsdError("psd_sqrt: eigendecomposition failed");
    check_eigenvalues<Scalar>("psd_sqrt", es.eigenvalues());
    const Vec<Scalar> root = es.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

template <typename Scalar>
void prepare_sqrt(GaussianSummary<Scalar>& g) {
    g.sqrt_cov = psd_sqrt<Scalar>(g.cov);
}

template <typename Scalar>
Scalar frechet_distance(const GaussianSummary<Scalar>& a, const GaussianSummary<Scalar>& b) {
    if (a.dim() != b.dim() || a.cov.rows() != a.dim() || b.cov.rows() != b.dim()) {
        throw std::invalid_argument("frechet_distance: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                                    std::to_string(b.dim()) + ")");
    }
    // Identical moments: skip the rounding of tr(S) - tr((S S)^{1/2}), which
    // would otherwise leave ~sqrt(eps) behind.
    if (a.mean == b.mean && a.cov == b.cov) return Scalar(0);
    const Mat<Scalar> root = a.sqrt_cov.size() == a.cov.size() ? a.sqrt_cov : psd_sqrt<Scalar>(a.cov);
    Mat<Scalar> middle = root * b.cov * root;
    middle = (middle + middle.transpose()) / Scalar(2);
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(middle, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NotPsdError("frechet_distance: eigendecomposition failed");
    check_eigenvalues<Scalar>("frechet_distance", es.eigenvalues());
    const Scalar trace_root = es.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt().sum();
    const Scalar squared = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - Scalar(2) * trace_root;
    return std::sqrt(std::max(squared, Scalar(0)));
}

#define LATENTCAST_GAUSSIAN(S)                                                                    \
    template GaussianSummary<S> fit_gaussian<S>(const Mat<S>&);                                  \
    template GaussianSummary<S> make_gaussian<S>(Vec<S>, Mat<S>, std::int64_t);                  \
    template Mat<S> psd_sqrt<S>(const Mat<S>&);                                                   \
    template void prepare_sqrt<S>(GaussianSummary<S>&);                                           \
    template S frechet_distance<S>(const GaussianSummary<S>&, const GaussianSummary<S>&);
LATENTCAST_GAUSSIAN(float)
LATENTCAST_GAUSSIAN(double)
#undef LATENTCAST_GAUSSIAN

}  // namespace latentcast::evalkit
