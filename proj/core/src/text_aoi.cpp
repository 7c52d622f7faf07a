#include "wi/text_aoi.hpp"

#include <algorithm>
#include <numeric>

#include "wi/error.hpp"

namespace wi {
namespace {

int find_root(std::vector<int>& parent, int i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

void unite(std::vector<int>& parent, int a, int b) {
  a = find_root(parent, a);
  b = find_root(parent, b);
  if (a == b) return;
  if (a < b)
    parent[b] = a;
  else
    parent[a] = b;
}

}  // namespace

void AoiParams::validate() const {
  if (top_k < 1) throw ConfigError("aoi top_k must be >= 1");
  if (dilation.height < 1 || dilation.width < 1) throw ConfigError("aoi dilation must be >= (1, 1)");
}

ComponentLabels connected_components(const BinaryMask& mask) {
  ComponentLabels out;
  out.width = mask.width;
  out.height = mask.height;
  out.labels.assign(mask.bits.size(), 0);
  if (mask.empty()) return out;

  // Two-pass labelling with union-find over provisional labels.
  std::vector<int> parent{0};
  const int w = mask.width;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      int label = 0;
      const int nx[4] = {x - 1, x - 1, x, x + 1};
      const int ny[4] = {y, y - 1, y - 1, y - 1};
      for (int n = 0; n < 4; ++n) {
        if (nx[n] < 0 || nx[n] >= w || ny[n] < 0) continue;
        const int l = out.labels[static_cast<std::size_t>(ny[n]) * w + nx[n]];
        if (l == 0) continue;
        if (label == 0)
          label = l;
        else
          unite(parent, label, l);
      }
      if (label == 0) {
        label = static_cast<int>(parent.size());
        parent.push_back(label);
      }
      out.labels[static_cast<std::size_t>(y) * w + x] = label;
    }
  }

  std::vector<int> final_label(parent.size(), 0);
  int next = 0;
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    int& l = out.labels[i];
    if (l == 0) continue;
    const int root = find_root(parent, l);
    if (final_label[root] == 0) {
      final_label[root] = ++next;
      const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
      out.boxes.push_back(ComponentBox{next, x, y, x, y, 0});
    }
    l = final_label[root];
    ComponentBox& b = out.boxes[l - 1];
    const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
    b.x0 = std::min(b.x0, x);
    b.x1 = std::max(b.x1, x);
    b.y0 = std::min(b.y0, y);
    b.y1 = std::max(b.y1, y);
    ++b.pixel_count;
  }
  return out;
}

std::vector<ComponentBox> rank_boxes(std::vector<ComponentBox> boxes, int top_k) {
  std::sort(boxes.begin(), boxes.end(), [](const ComponentBox& a, const ComponentBox& b) {
    if (a.bbox_area() != b.bbox_area()) return a.bbox_area() > b.bbox_area();
    if (a.pixel_count != b.pixel_count) return a.pixel_count > b.pixel_count;
    if (a.y0 != b.y0) return a.y0 < b.y0;
    return a.x0 < b.x0;
  });
  if (top_k >= 0 && static_cast<std::size_t>(top_k) < boxes.size()) boxes.resize(top_k);
  return boxes;
}

std::vector<AoiCrop> select_aoi(const GrayImage& img, const BinaryMask& text_mask, const AoiParams& p,
                                const std::string& source_path) {
  p.validate();
  if (img.empty() || std::min(img.width, img.height) < 32) throw DataError("aoi: image too small (min dimension 32)");
  if (text_mask.width != img.width || text_mask.height != img.height)
    throw DataError("aoi: mask dims differ from image dims");
  if (text_mask.count() == 0) throw DataError("no text regions found");

  const BinaryMask dilated = dilate(text_mask, p.dilation);
  const ComponentLabels cc = connected_components(dilated);
  std::vector<AoiCrop> crops;
  for (const ComponentBox& b : rank_boxes(cc.boxes, p.top_k))
    crops.push_back(AoiCrop{crop(img, b.x0, b.y0, b.width(), b.height()), b, source_path});
  return crops;
}

std::vector<AoiCrop> select_aoi(const GrayImage& img, const BinarizerSpec& b, const AoiParams& p,
                                const std::filesystem::path& source_path) {
  p.validate();
  if (img.empty() || std::min(img.width, img.height) < 32) throw DataError("aoi: image too small (min dimension 32)");
  return select_aoi(img, binarize(img, b, source_path), p, source_path.string());
}

}  // namespace wi
