#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "grasp/pose_estimation.hpp"

namespace grasp {

struct MaskFileError : std::runtime_error {
  explicit MaskFileError(const std::string& what) : std::runtime_error(what) {}
};

// One mask instance loaded from disk (or produced by a renderer):
// the visible pixel set, its class, and the pre-determined full pixel
// count used for the occlusion ratio.
struct MaskObservation {
  int instance = 0;
  PixelMask mask;
  int full_area = 0;
};

// Portable graymap where any nonzero pixel belongs to the mask.
// Accepts P2 (ASCII) and P5 (binary, maxval < 256).
PixelMask read_pgm(const std::filesystem::path& path, int* width = nullptr,
                   int* height = nullptr);

void write_pgm(const std::filesystem::path& path, const PixelMask& mask, int width,
               int height);

// Sidecar document {class_label, full_area} stored next to the graymap
// with the extension swapped to .json.
std::filesystem::path sidecar_path(const std::filesystem::path& pgm_path);

void write_mask_file(const std::filesystem::path& pgm_path, const PixelMask& mask,
                     int width, int height, int full_area);

MaskObservation read_mask_file(const std::filesystem::path& pgm_path);

}  // namespace grasp
