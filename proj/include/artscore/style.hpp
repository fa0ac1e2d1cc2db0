#pragma once

#include <cstddef>
#include <vector>

#include "artscore/core.hpp"
#include "artscore/image.hpp"

namespace artscore {

// Channel-correlation style descriptor: the Gram matrix of an image's
// channel features stacked row-major into one vector of length C*C.
struct StyleVector {
    std::vector<double> values;
    std::size_t channels = 0;
};

// G = F F^T / N for features F of shape (C, N). Symmetric positive
// semidefinite by construction.
inline Matrix gram_matrix(const Matrix& features) {
    if (features.cols == 0 || features.rows == 0)
        throw shape_error("gram_matrix: empty feature matrix");
    const std::size_t c = features.rows;
    const std::size_t n = features.cols;
    Matrix g(c, c);
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = i; j < c; ++j) {
            double acc = 0.0;
            const double* fi = features.data.data() + i * n;
            const double* fj = features.data.data() + j * n;
            for (std::size_t k = 0; k < n; ++k) acc += fi[k] * fj[k];
            acc /= static_cast<double>(n);
            g.at(i, j) = acc;
            g.at(j, i) = acc;
        }
    }
    return g;
}

// Image (H, W, C) -> features (C, H*W), one row per channel.
inline Matrix channel_features(const ImageGrid& img) {
    if (img.size() == 0) throw shape_error("channel_features: empty image");
    Matrix f(img.channels, img.height * img.width);
    for (std::size_t h = 0; h < img.height; ++h)
        for (std::size_t w = 0; w < img.width; ++w)
            for (std::size_t c = 0; c < img.channels; ++c)
                f.at(c, h * img.width + w) = img.at(h, w, c);
    return f;
}

// Gram matrix of the channel features, stacked row-major. Invariant to any
// spatial permutation of pixels: it is purely a channel statistic.
inline StyleVector style_vector(const ImageGrid& img) {
    const Matrix g = gram_matrix(channel_features(img));
    StyleVector sv;
    sv.channels = img.channels;
    sv.values = g.data;
    return sv;
}

// d(loss)/d(image) given d(loss)/d(gram entries) for gram of channel
// features. Used by the style-matching adaptation objective.
// dG[i][j]/dF[i][k] = F[j][k]/N (plus the symmetric term), so
// dL/dF[c][k] = sum_j (dL/dG[c][j] + dL/dG[j][c]) * F[j][k] / (2N) * 2.
inline void gram_backward(const ImageGrid& img, const Matrix& grad_gram,
                          std::vector<double>& grad_image) {
    const std::size_t c = img.channels;
    const std::size_t n = img.height * img.width;
    if (grad_gram.rows != c || grad_gram.cols != c)
        throw shape_error("gram_backward: gram gradient shape mismatch");
    grad_image.assign(img.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < c; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                const double f_jk = img.values[k * c + j];
                acc += (grad_gram.at(i, j) + grad_gram.at(j, i)) * f_jk;
            }
            grad_image[k * c + i] = acc * inv_n;
        }
    }
}

}  // namespace artscore
