#include "retina/head_layout.hpp"

#include <string>

namespace retina {

namespace {

void check_map(const AnchorGrid& grid, std::size_t level, const Shape& shape, std::size_t depth) {
  const auto& lv = grid.levels[level];
  const Shape want{grid.anchors_per_cell * depth, lv.rows, lv.cols};
  if (shape != want) {
    throw InvalidInput("head output at level " + std::to_string(level) + " has shape " +
                       shape_to_string(shape) + ", anchor grid expects " +
                       shape_to_string(want));
  }
}

}  // namespace

template <typename T>
BasicTensor<T> flatten_head(const std::vector<BasicTensor<T>>& maps, const AnchorGrid& grid,
                            std::size_t depth) {
  if (maps.size() != grid.levels.size()) {
    throw InvalidInput("head outputs: expected " + std::to_string(grid.levels.size()) +
                       " levels, got " + std::to_string(maps.size()));
  }
  const std::size_t a_per = grid.anchors_per_cell;
  BasicTensor<T> flat({grid.size(), depth});
  std::size_t offset = 0;
  for (std::size_t l = 0; l < maps.size(); ++l) {
    check_map(grid, l, maps[l].shape(), depth);
    const auto& lv = grid.levels[l];
    for (std::size_t r = 0; r < lv.rows; ++r) {
      for (std::size_t c = 0; c < lv.cols; ++c) {
        for (std::size_t a = 0; a < a_per; ++a) {
          const std::size_t anchor = offset + (r * lv.cols + c) * a_per + a;
          for (std::size_t k = 0; k < depth; ++k) {
            flat[anchor * depth + k] = maps[l].at(a * depth + k, r, c);
          }
        }
      }
    }
    offset += grid.per_level_counts[l];
  }
  return flat;
}

template <typename T>
std::vector<BasicTensor<T>> unflatten_head(const BasicTensor<T>& flat, const AnchorGrid& grid,
                                           std::size_t depth) {
  if (flat.shape() != Shape{grid.size(), depth}) {
    throw InvalidInput("unflatten_head: expected " + shape_to_string({grid.size(), depth}) +
                       ", got " + shape_to_string(flat.shape()));
  }
  const std::size_t a_per = grid.anchors_per_cell;
  std::vector<BasicTensor<T>> maps;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < grid.levels.size(); ++l) {
    const auto& lv = grid.levels[l];
    BasicTensor<T> m({a_per * depth, lv.rows, lv.cols});
    for (std::size_t r = 0; r < lv.rows; ++r) {
      for (std::size_t c = 0; c < lv.cols; ++c) {
        for (std::size_t a = 0; a < a_per; ++a) {
          const std::size_t anchor = offset + (r * lv.cols + c) * a_per + a;
          for (std::size_t k = 0; k < depth; ++k) {
            m.at(a * depth + k, r, c) = flat[anchor * depth + k];
          }
        }
      }
    }
    maps.push_back(std::move(m));
    offset += grid.per_level_counts[l];
  }
  return maps;
}

template Tensor flatten_head(const std::vector<Tensor>&, const AnchorGrid&, std::size_t);
template BasicTensor<double> flatten_head(const std::vector<BasicTensor<double>>&,
                                          const AnchorGrid&, std::size_t);
template std::vector<Tensor> unflatten_head(const Tensor&, const AnchorGrid&, std::size_t);
template std::vector<BasicTensor<double>> unflatten_head(const BasicTensor<double>&,
                                                         const AnchorGrid&, std::size_t);

}  // namespace retina
