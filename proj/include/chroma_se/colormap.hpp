// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace chroma_se::codec {

struct Rgb8 {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb8&) const = default;
};

inline constexpr int kColormapSize = 256;

/// 256-entry colormap stored at 8-bit resolution, so that encoded images are
/// exactly representable in an 8-bit PNG.
struct ColormapTable {
  std::string name;
  std::array<Rgb8, kColormapSize> entries{};

  /// Component `ch` (0=R, 1=G, 2=B) of entry `idx`, in [0, 1].
  double component(int idx, int ch) const {
    const Rgb8& e = entries[static_cast<std::size_t>(idx)];
    const std::uint8_t v = ch == 0 ? e.r : (ch == 1 ? e.g : e.b);
    return v / 255.0;
  }
};

/// Registered colormaps: parula autumn bone colorcube cool copper flag gray
/// hot hsv jet lines pink prism spring summer winter. Lookup is
/// case-insensitive and ignores '-' ("Color-cube" finds colorcube).
/// Unknown names throw kNotFound with the list of valid names.
const ColormapTable& Colormap(std::string_view name);

/// Canonical names in registry order.
const std::vector<std::string>& ColormapNames();

/// Number of entries whose RGB triplet equals some earlier entry; 0 means
/// the table is injective at 8-bit resolution.
int DuplicateEntries(const ColormapTable& table);

/// Fixed LPS interval mapped linearly onto colormap indices.
struct DisplayRange {
  double lo = 0.0;
  double hi = 1.0;

  void Validate() const;
  bool operator==(const DisplayRange&) const = default;
};

/// round(255 * (clamp(v, lo, hi) - lo) / (hi - lo)), halves rounded up.
int QuantizeIndex(double v, const DisplayRange& range);

/// LPS value at the centre of index `idx`.
double DequantizeIndex(int idx, const DisplayRange& range);

/// lo = min(percentile(values, lo_pct), floor_lps), hi = percentile(hi_pct).
/// Percentiles use linear interpolation between order statistics.
DisplayRange RangeFromPercentiles(std::span<const double> values, double lo_pct,
                                  double hi_pct, double floor_lps);

}  // namespace chroma_se::codec
