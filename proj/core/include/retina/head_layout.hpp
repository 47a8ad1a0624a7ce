#pragma once

#include "retina/anchors.hpp"
#include "retina/network.hpp"

namespace retina {

/// Gathers per-level head maps into AnchorGrid order: [num_anchors, depth]
/// where depth is K for classification maps and 4 for box maps.
template <typename T>
BasicTensor<T> flatten_head(const std::vector<BasicTensor<T>>& maps, const AnchorGrid& grid,
                            std::size_t depth);

/// Inverse of flatten_head; used to route loss gradients back to the maps.
template <typename T>
std::vector<BasicTensor<T>> unflatten_head(const BasicTensor<T>& flat, const AnchorGrid& grid,
                                           std::size_t depth);

}  // namespace retina
