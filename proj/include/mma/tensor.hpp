#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace mma {

// Dense H x W x C buffer, row-major, float32. Images hold values in [0, 1];
// perturbations and gradients may hold any finite value.
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  ImageTensor() = default;
  ImageTensor(int h, int w, int c, float fill = 0.0f);

  float& at(int y, int x, int ch) {
    return data[(static_cast<size_t>(y) * width + x) * channels + ch];
  }
  float at(int y, int x, int ch) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + ch];
  }
  size_t size() const { return data.size(); }
  bool same_shape(const ImageTensor& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

bool is_power_of_two(int v);

// Enforces the image contract: power-of-two dims >= 8, 1 or 3 channels,
// finite payload of the right length.
void validate_image(const ImageTensor& t);

double linf_norm(const ImageTensor& t);
void clamp01_inplace(ImageTensor& t);

// "MMT1" tensor file: magic 'MMT1', u32le height/width/channels, then
// float32le payload, row-major.
void save_mmt1(const std::filesystem::path& path, const ImageTensor& t);
ImageTensor load_mmt1(const std::filesystem::path& path);

}  // namespace mma
