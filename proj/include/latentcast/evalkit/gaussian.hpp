#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <stdexcept>

namespace latentcast::evalkit {

/// Relative shrinkage added to every covariance: lambda = kShrinkage * trace / d.
inline constexpr double kShrinkage = 1e-6;
/// Lower bound on lambda, so a degenerate set still has a positive-definite covariance.
inline constexpr double kShrinkageFloor = 1e-12;
/// Eigenvalues below -kNegativeTolerance * max(1, largest |eigenvalue|) mean the input was not PSD.
inline constexpr double kNegativeTolerance = 1e-8;

class NotPsdError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

template <typename Scalar>
struct GaussianSummary {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    Vector mean;
    Matrix cov;
    std::int64_t count = 0;
    Scalar shrinkage = 0;
    /// cov^{1/2} once prepare_sqrt() ran; frechet_distance reuses it for its
    /// first argument, so a reference set fitted once is decomposed once.
    Matrix sqrt_cov;

    Eigen::Index dim() const { return mean.size(); }
};

/// Population mean and covariance (denominator n) of the rows of `rows`
/// [n, d], plus shrinkage. Throws std::invalid_argument for fewer than 2 rows.
template <typename Scalar>
GaussianSummary<Scalar> fit_gaussian(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& rows);

/// Summary from given moments, without shrinkage. Throws NotPsdError if cov
/// is not symmetric.
template <typename Scalar>
GaussianSummary<Scalar> make_gaussian(Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean,
                                      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cov,
                                      std::int64_t count = 0);

/// Symmetric PSD square root by eigendecomposition; small negative
/// eigenvalues are clamped to zero, larger ones throw NotPsdError.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> psd_sqrt(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m);

/// Fills g.sqrt_cov. Throws NotPsdError if the covariance is not PSD.
template <typename Scalar>
void prepare_sqrt(GaussianSummary<Scalar>& g);

/// sqrt(|mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1^{1/2} S2 S1^{1/2})^{1/2})).
/// Throws std::invalid_argument on a dimension mismatch and NotPsdError when
/// the middle product has an eigenvalue below tolerance.
template <typename Scalar>
Scalar frechet_distance(const GaussianSummary<Scalar>& a, const GaussianSummary<Scalar>& b);

}  // namespace latentcast::evalkit
