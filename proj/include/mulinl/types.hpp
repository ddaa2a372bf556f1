#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

namespace mulinl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ModelKind { Line2D, Ellipse2D, Cylinder3D, FundamentalMatrix, Homography };

/// One input measurement y in R^l. The optional covariance is l x l,
/// symmetric positive definite with unit determinant; absent means identity.
struct DataPoint {
    Vec y;
    std::optional<Mat> covariance;
};

/// Carrier lift of one point: zeta carrier vectors in R^m, their m x l
/// Jacobians and the propagated m x m covariances J C_y J^T.
struct CarrierBundle {
    std::vector<Vec> carriers;
    std::vector<Mat> jacobians;
    std::vector<Mat> covariances;
};

/// Linear-space structure parameters, theta^T x = alpha with |theta| = 1.
struct Hypothesis {
    Vec theta;
    double alpha = 0.0;
};

/// Affine map of one coordinate block: y' = scale * (y - offset).
struct BlockTransform {
    Eigen::Vector3d offset = Eigen::Vector3d::Zero();
    int dim = 2;
    double scale = 1.0;
};

/// Hartley-style normalization, one transform per coordinate block
/// (two blocks for image-pair models, one otherwise).
struct NormalizationTransform {
    std::vector<BlockTransform> blocks;

    Vec apply(const Vec& y) const {
        Vec out(y.size());
        int at = 0;
        for (const auto& b : blocks) {
            for (int k = 0; k < b.dim; ++k) out[at + k] = b.scale * (y[at + k] - b.offset[k]);
            at += b.dim;
        }
        return out;
    }

    Vec invert(const Vec& y) const {
        Vec out(y.size());
        int at = 0;
        for (const auto& b : blocks) {
            for (int k = 0; k < b.dim; ++k) out[at + k] = y[at + k] / b.scale + b.offset[k];
            at += b.dim;
        }
        return out;
    }

    bool identity() const {
        for (const auto& b : blocks)
            if (b.scale != 1.0 || b.offset.head(b.dim).any()) return false;
        return true;
    }

    /// det(S)^(1/l) where S is the full diagonal scale; converts a Mahalanobis
    /// scale measured under the unit-determinant normalized covariance back to
    /// original units (divide by it).
    double unit_scale() const {
        double logdet = 0.0;
        int l = 0;
        for (const auto& b : blocks) {
            logdet += b.dim * std::log(b.scale);
            l += b.dim;
        }
        return std::exp(logdet / l);
    }
};

}  // namespace mulinl
