#include "grasp/mask_io.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace grasp {

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) continue;
    tok.push_back(static_cast<char>(c));
    while ((c = in.peek()) != EOF && !std::isspace(c) && c != '#') {
      tok.push_back(static_cast<char>(in.get()));
    }
    return tok;
  }
  return tok;
}

int parse_int(const std::string& tok, const std::string& field) {
  try {
    size_t pos = 0;
    int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw MaskFileError("bad " + field + " in graymap header: '" + tok + "'");
  }
}

}  // namespace

PixelMask read_pgm(const std::filesystem::path& path, int* width, int* height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MaskFileError("cannot open " + path.string());

  std::string magic = next_token(in);
  if (magic != "P2" && magic != "P5") {
    throw MaskFileError(path.string() + ": not a P2/P5 graymap (magic '" + magic + "')");
  }
  int w = parse_int(next_token(in), "width");
  int h = parse_int(next_token(in), "height");
  int maxval = parse_int(next_token(in), "maxval");
  if (w <= 0 || h <= 0) throw MaskFileError(path.string() + ": non-positive dimensions");
  if (maxval <= 0 || maxval > 255) {
    throw MaskFileError(path.string() + ": unsupported maxval " + std::to_string(maxval));
  }

  PixelMask mask;
  if (magic == "P5") {
    in.get();  // single whitespace byte after maxval
    std::vector<unsigned char> row(static_cast<size_t>(w));
    for (int y = 0; y < h; ++y) {
      in.read(reinterpret_cast<char*>(row.data()), w);
      if (in.gcount() != w) throw MaskFileError(path.string() + ": truncated pixel data");
      for (int x = 0; x < w; ++x) {
        if (row[static_cast<size_t>(x)] != 0) mask.points.push_back({x, y});
      }
    }
  } else {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        std::string tok = next_token(in);
        if (tok.empty()) throw MaskFileError(path.string() + ": truncated pixel data");
        if (parse_int(tok, "pixel") != 0) mask.points.push_back({x, y});
      }
    }
  }
  if (width) *width = w;
  if (height) *height = h;
  return mask;
}

void write_pgm(const std::filesystem::path& path, const PixelMask& mask, int width,
               int height) {
  std::vector<unsigned char> img(static_cast<size_t>(width) * height, 0);
  for (const auto& p : mask.points) {
    if (p.x < 0 || p.x >= width || p.y < 0 || p.y >= height) {
      throw MaskFileError("mask point outside image bounds");
    }
    img[static_cast<size_t>(p.y) * width + p.x] = 255;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MaskFileError("cannot write " + path.string());
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
}

std::filesystem::path sidecar_path(const std::filesystem::path& pgm_path) {
  std::filesystem::path p = pgm_path;
  p.replace_extension(".json");
  return p;
}

void write_mask_file(const std::filesystem::path& pgm_path, const PixelMask& mask,
                     int width, int height, int full_area) {
  write_pgm(pgm_path, mask, width, height);
  nlohmann::json side;
  side["class_label"] = mask.class_label;
  side["full_area"] = full_area;
  std::ofstream out(sidecar_path(pgm_path));
  if (!out) throw MaskFileError("cannot write " + sidecar_path(pgm_path).string());
  out << side.dump(2) << "\n";
}

MaskObservation read_mask_file(const std::filesystem::path& pgm_path) {
  MaskObservation obs;
  obs.mask = read_pgm(pgm_path);

  std::ifstream in(sidecar_path(pgm_path));
  if (!in) throw MaskFileError("missing sidecar " + sidecar_path(pgm_path).string());
  nlohmann::json side;
  try {
    in >> side;
  } catch (const nlohmann::json::exception& e) {
    throw MaskFileError(sidecar_path(pgm_path).string() + ": " + e.what());
  }
  if (!side.contains("class_label") || !side.contains("full_area")) {
    throw MaskFileError(sidecar_path(pgm_path).string() +
                        ": sidecar must carry class_label and full_area");
  }
  obs.mask.class_label = side.at("class_label").get<int>();
  obs.full_area = side.at("full_area").get<int>();
  return obs;
}

}  // namespace grasp
