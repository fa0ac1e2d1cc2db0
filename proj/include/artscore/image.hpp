#pragma once

#include <cstddef>
#include <vector>

#include "artscore/core.hpp"

namespace artscore {

// H x W x C image with channel-last layout: values[(h*W + w)*C + c].
// Generator outputs pass through tanh, so values live in [-1, 1].
struct ImageGrid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<double> values;

    ImageGrid() = default;
    ImageGrid(std::size_t h, std::size_t w, std::size_t c)
        : height(h), width(w), channels(c), values(h * w * c, 0.0) {}

    std::size_t size() const { return values.size(); }

    double& at(std::size_t h, std::size_t w, std::size_t c) {
        return values[(h * width + w) * channels + c];
    }
    double at(std::size_t h, std::size_t w, std::size_t c) const {
        return values[(h * width + w) * channels + c];
    }

    bool same_shape(const ImageGrid& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

inline ImageGrid flip_horizontal(const ImageGrid& img) {
    ImageGrid out(img.height, img.width, img.channels);
    for (std::size_t h = 0; h < img.height; ++h)
        for (std::size_t w = 0; w < img.width; ++w)
            for (std::size_t c = 0; c < img.channels; ++c)
                out.at(h, w, c) = img.at(h, img.width - 1 - w, c);
    return out;
}

// Counter-clockwise quarter turn; requires a square image.
inline ImageGrid rotate90(const ImageGrid& img) {
    if (img.height != img.width)
        throw config_error("rotate90 requires square images");
    ImageGrid out(img.height, img.width, img.channels);
    const std::size_t n = img.height;
    for (std::size_t h = 0; h < n; ++h)
        for (std::size_t w = 0; w < n; ++w)
            for (std::size_t c = 0; c < img.channels; ++c)
                out.at(n - 1 - w, h, c) = img.at(h, w, c);
    return out;
}

inline ImageGrid rotate_quarters(const ImageGrid& img, unsigned quarters) {
    ImageGrid out = img;
    for (unsigned i = 0; i < quarters % 4; ++i) out = rotate90(out);
    return out;
}

}  // namespace artscore
