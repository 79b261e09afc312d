#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

// Experimental protocol defaults.
namespace svl::protocol {

inline constexpr std::size_t kEpochs = 50;
inline constexpr std::size_t kBatchSize = 32;
inline constexpr double kLearningRate = 0.001;
inline constexpr std::size_t kHiddenDim = 256;

inline constexpr std::size_t kPseudoLabelsPerClass = 16;
inline constexpr std::array<std::size_t, 5> kShots = {1, 2, 4, 8, 16};
inline constexpr std::array<std::uint64_t, 3> kSeeds = {0, 1, 2};

inline constexpr std::size_t kLambdaGridSize = 20;
inline constexpr double kTemperature = 100.0;

// CLIP-Adapter baseline.
inline constexpr std::size_t kClipAdapterReduction = 4;
inline constexpr double kClipAdapterAlpha = 0.2;
inline constexpr double kClipAdapterBeta = 0.2;

}  // namespace svl::protocol
