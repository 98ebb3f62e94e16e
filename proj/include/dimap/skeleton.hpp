#pragma once

#include <span>
#include <vector>

#include "dimap/geometry.hpp"
#include "dimap/raster.hpp"
#include "dimap/road_graph.hpp"

namespace dimap::skeleton {

using raster::BinaryMask;

struct Pixel {
  int col;
  int row;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

using PixelChain = std::vector<Pixel>;

// Zhang-Suen thinning followed by removal of redundant staircase pixels
// (simple points bridging two orthogonal neighbours), iterated to a fixpoint.
BinaryMask thin(const BinaryMask& mask);

// Positive neighbours of p under mixed adjacency: 4-neighbours, plus diagonal
// neighbours that are not already linked through a shared positive 4-neighbour.
std::vector<Pixel> m_neighbors(const BinaryMask& mask, Pixel p);

// Traces a skeleton into a pixel-frame graph. Nodes are pixels whose mixed
// degree is not 2 (junctions, endpoints, isolated pixels) plus one anchor at
// the first pixel in row-major order of every pure cycle. Node ids follow
// row-major pixel order; each chain between two nodes becomes one edge whose
// geometry is the pixel centre polyline.
graph::RoadGraph extract_graph(const BinaryMask& skel);

// Same traversal, exposing the chains (node pixel, interior pixels..., node pixel).
std::vector<PixelChain> trace_chains(const BinaryMask& skel, std::vector<Pixel>* nodes = nullptr);

// Ramer-Douglas-Peucker. Keeps the endpoints and returns a subsequence whose
// segments stay within epsilon of every dropped input point.
std::vector<Point> simplify_rdp(std::span<const Point> polyline, double epsilon);

struct GraphBuildParams {
  int kernel = 5;
  int dilate_iterations = 2;
  double rdp_epsilon = 3.0;
};

// dilate -> thin -> extract -> simplify, dropping isolated nodes.
graph::RoadGraph mask_to_graph(const BinaryMask& mask, const GraphBuildParams& params = {});

}  // namespace dimap::skeleton
