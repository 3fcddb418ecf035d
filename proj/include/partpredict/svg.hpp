#ifndef PARTPREDICT_SVG_HPP
#define PARTPREDICT_SVG_HPP

#include <string>
#include <vector>

#include "partpredict/parttree.hpp"
#include "partpredict/rdosim.hpp"

namespace partpredict {

// Partition overlay: grayscale superblock (4x4-averaged cells) under one
// outlined rect per coded block, 1 SVG unit per pixel. No timestamps or other
// run-varying metadata, so output is byte-stable.
std::string svg_tree_overlay(const Superblock& sb, const std::vector<LeafBlock>& leaves);

struct ChartSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (x, y)
};

// Minimal line chart with axes, ticks and a legend.
std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::vector<ChartSeries>& series);

}  // namespace partpredict

#endif
