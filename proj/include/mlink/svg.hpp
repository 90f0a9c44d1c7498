#pragma once

#include <string>

#include "mlink/clustering.hpp"

namespace mlink {

/// Static SVG of a segmented scene: points colored by structure, outliers
/// and unassigned points gray, fitted curves overdrawn across each
/// structure's extent. Byte-deterministic for identical inputs.
std::string render_svg(const PointSet& data, const Segmentation& seg);

}  // namespace mlink
