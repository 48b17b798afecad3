#pragma once

#include "mapfw/grid.hpp"
#include "mapfw/rng.hpp"

namespace testutil {

inline mapfw::GridMap random_map(int w, int h, double density, std::uint64_t seed) {
  mapfw::Rng rng(seed);
  mapfw::GridMap m(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (rng.uniform() < density) m.set({r, c}, mapfw::Cell::Obstacle);
  if (m.free_count() == 0) m.set({0, 0}, mapfw::Cell::Free);
  return m;
}

}  // namespace testutil
