#pragma once

// Expected per-layer output shape and parameter count of the detector,
// typed in by hand.

#include <array>
#include <cstddef>
#include <string_view>

#include "jamdet/cnn.hpp"

namespace expected {

struct Row {
    std::string_view name;
    jamdet::cnn::Shape output;
    std::size_t params;
};

inline constexpr std::array<Row, 15> kDetector{{
    {"input", {100, 1024, 1}, 0},
    {"conv2d", {49, 511, 32}, 320},
    {"batch_norm", {49, 511, 32}, 128},
    {"average_pooling", {24, 255, 32}, 0},
    {"conv2d", {22, 253, 64}, 18496},
    {"batch_norm", {22, 253, 64}, 256},
    {"average_pooling", {11, 126, 64}, 0},
    {"conv2d", {9, 124, 128}, 73856},
    {"average_pooling", {4, 62, 128}, 0},
    {"batch_norm", {4, 62, 128}, 512},
    {"flatten", {1, 1, 31744}, 0},
    {"dense", {1, 1, 64}, 2031680},
    {"dense", {1, 1, 32}, 2080},
    {"dense", {1, 1, 16}, 528},
    {"dense", {1, 1, 1}, 17},
}};

}  // namespace expected
