#pragma once

#include <filesystem>
#include <string>

#include "din/image.hpp"
#include "din/pool.hpp"

namespace din {

// Deterministic toy dataset: smooth low-frequency "photos" as content and
// high-contrast patterns as styles, 32x32 each. Small enough to train on
// in seconds, varied enough that the style statistics actually differ.

namespace detail {

inline Image render_smooth(Rng& rng, int64_t hw) {
  Tensor coarse = Tensor::zeros({1, 3, 4, 4});
  for (double& v : coarse.mut_data()) v = rng.uniform(0.15, 0.85);
  Tensor up = bilinear_upsample(coarse, hw / 4);
  for (double& v : up.mut_data()) v += rng.uniform(-0.03, 0.03);
  return tensor_to_image(up);
}

inline Image render_pattern(Rng& rng, int64_t hw, bool stripes) {
  Tensor t = Tensor::zeros({1, 3, hw, hw});
  auto d = t.mut_data();
  const double phase = rng.uniform(0.0, 6.28);
  const double freq = rng.uniform(0.5, 1.2);
  double palette[2][3] = {{rng.uniform(), rng.uniform(), rng.uniform()},
                          {rng.uniform(), rng.uniform(), rng.uniform()}};
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < hw; ++y)
      for (int64_t x = 0; x < hw; ++x) {
        const double s = stripes ? std::sin(freq * (y + 2 * x) + phase) : std::sin(freq * y + phase) * std::cos(freq * x);
        d[(c * hw + y) * hw + x] = s > 0 ? palette[0][c] : palette[1][c];
      }
  return tensor_to_image(t);
}

}  // namespace detail

// Writes 4 content and 2 style images under dir/content and dir/style.
inline void write_fixture_images(const std::string& dir, uint64_t seed, int64_t hw = 32) {
  namespace fs = std::filesystem;
  fs::create_directories(dir + "/content");
  fs::create_directories(dir + "/style");
  Rng rng(seed);
  for (int i = 0; i < 4; ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s/content/c%02d.png", dir.c_str(), i);
    write_png(name, detail::render_smooth(rng, hw));
  }
  for (int i = 0; i < 2; ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s/style/s%02d.png", dir.c_str(), i);
    write_png(name, detail::render_pattern(rng, hw, i == 0));
  }
}

}  // namespace din
