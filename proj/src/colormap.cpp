// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "chroma_se/colormap.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "chroma_se/error.hpp"

namespace chroma_se::codec {

namespace {

constexpr int kM = kColormapSize;

struct RgbD {
  double r, g, b;
};

// Published 64-entry parula control points (MATLAB R2014b+ default).
constexpr std::array<RgbD, 64> kParulaControl = {{
    {0.2081, 0.1663, 0.5292},          {0.2116238095, 0.1897809524, 0.5776761905},
    {0.212252381, 0.2137714286, 0.6269714286}, {0.2081, 0.2386, 0.6770857143},
    {0.1959047619, 0.2644571429, 0.7279},      {0.1707285714, 0.2919380952, 0.779247619},
    {0.1252714286, 0.3242428571, 0.8302714286}, {0.0591333333, 0.3598333333, 0.8683333333},
    {0.0116952381, 0.3875095238, 0.8819571429}, {0.0059571429, 0.4086142857, 0.8828428571},
    {0.0165142857, 0.4266, 0.8786333333},      {0.032852381, 0.4430428571, 0.8719571429},
    {0.0498142857, 0.4585714286, 0.8640571429}, {0.0629333333, 0.4736904762, 0.8554380952},
    {0.0722666667, 0.4886666667, 0.8467},      {0.0779428571, 0.5039857143, 0.8383714286},
    {0.079347619, 0.5200238095, 0.8311809524}, {0.0749428571, 0.5375428571, 0.8262714286},
    {0.0640571429, 0.5569857143, 0.8239571429}, {0.0487714286, 0.5772238095, 0.8228285714},
    {0.0343428571, 0.5965809524, 0.819852381}, {0.0265, 0.6137, 0.8135},
    {0.0238904762, 0.6286619048, 0.8037619048}, {0.0230904762, 0.6417857143, 0.7912666667},
    {0.0227714286, 0.6534857143, 0.7767571429}, {0.0266619048, 0.6641952381, 0.7607190476},
    {0.0383714286, 0.6742714286, 0.743552381}, {0.0589714286, 0.6837571429, 0.7253857143},
    {0.0843, 0.6928333333, 0.7061666667},      {0.1132952381, 0.7015, 0.6858571429},
    {0.1452714286, 0.7097571429, 0.6646285714}, {0.1801333333, 0.7176571429, 0.6424333333},
    {0.2178285714, 0.7250428571, 0.6192619048}, {0.2586428571, 0.7317142857, 0.5954285714},
    {0.3021714286, 0.7376047619, 0.5711857143}, {0.3481666667, 0.7424333333, 0.5472666667},
    {0.3952571429, 0.7459, 0.5244428571},      {0.4420095238, 0.7480809524, 0.5033142857},
    {0.4871238095, 0.7490619048, 0.4839761905}, {0.5300285714, 0.7491142857, 0.4661142857},
    {0.5708571429, 0.7485190476, 0.4493904762}, {0.609852381, 0.7473142857, 0.4336857143},
    {0.6473, 0.7456, 0.4188},                  {0.6834190476, 0.7434761905, 0.4044333333},
    {0.7184095238, 0.7411333333, 0.3904761905}, {0.7524857143, 0.7384, 0.3768142857},
    {0.7858428571, 0.7355666667, 0.3632714286}, {0.8185047619, 0.7327333333, 0.3497904762},
    {0.8506571429, 0.7299, 0.3360285714},      {0.8824333333, 0.7274333333, 0.3217},
    {0.9139333333, 0.7257857143, 0.3062761905}, {0.9449571429, 0.7261142857, 0.2886428571},
    {0.9738952381, 0.7313952381, 0.266647619}, {0.9937714286, 0.7454571429, 0.240347619},
    {0.9990428571, 0.7653142857, 0.2164142857}, {0.9955333333, 0.7860571429, 0.196652381},
    {0.988, 0.8066, 0.1793666667},             {0.9788571429, 0.8271428571, 0.1633142857},
    {0.9697, 0.8481380952, 0.147452381},       {0.9625857143, 0.8705142857, 0.1309},
    {0.9588714286, 0.8949, 0.1132428571},      {0.9598238095, 0.9218333333, 0.0948380952},
    {0.9661, 0.9514428571, 0.0755333333},      {0.9763, 0.9831, 0.0538},
}};

// MATLAB default axes ColorOrder, cycled by `lines`.
constexpr std::array<RgbD, 7> kLinesCycle = {{
    {0.0, 0.4470, 0.7410}, {0.8500, 0.3250, 0.0980}, {0.9290, 0.6940, 0.1250},
    {0.4940, 0.1840, 0.5560}, {0.4660, 0.6740, 0.1880}, {0.3010, 0.7450, 0.9330},
    {0.6350, 0.0780, 0.1840},
}};

constexpr std::array<RgbD, 6> kPrismCycle = {{
    {1, 0, 0}, {1, 0.5, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {2.0 / 3.0, 0, 1},
}};

constexpr std::array<RgbD, 4> kFlagCycle = {{{1, 0, 0}, {1, 1, 1}, {0, 0, 1}, {0, 0, 0}}};

using Generator = std::function<RgbD(int)>;

double Ramp(int k) { return static_cast<double>(k) / (kM - 1); }

RgbD Hot(int k) {
  constexpr int n = 3 * kM / 8;  // fix(3/8*m)
  const double r = k < n ? (k + 1.0) / n : 1.0;
  const double g = k < n ? 0.0 : (k < 2 * n ? (k - n + 1.0) / n : 1.0);
  const double b = k < 2 * n ? 0.0 : (k - 2 * n + 1.0) / (kM - 2 * n);
  return {r, g, b};
}

RgbD Jet(int k) {
  // MATLAB jet(m): a trapezoid u of length 3n-1 placed at staggered offsets.
  constexpr int n = (kM + 3) / 4;
  auto u = [](int i) -> double {  // i in [0, 3n-1)
    if (i < n) return (i + 1.0) / n;
    if (i < 2 * n - 1) return 1.0;
    return (3.0 * n - 1 - i) / n;
  };
  constexpr int ulen = 3 * n - 1;
  const int g0 = (n + 1) / 2 - (kM % 4 == 1 ? 1 : 0);  // first green row, 1-based
  auto channel = [&](int offset) -> double {
    // Row (1-based) = offset + i + 1 for i in [0, ulen).
    const int i = (k + 1) - offset - 1;
    return (i >= 0 && i < ulen) ? u(i) : 0.0;
  };
  return {channel(g0 + n), channel(g0), channel(g0 - n)};
}

RgbD Hsv(int k) {
  const double h = static_cast<double>(k) / kM * 6.0;
  const int sector = static_cast<int>(std::floor(h)) % 6;
  const double f = h - std::floor(h);
  switch (sector) {
    case 0: return {1, f, 0};
    case 1: return {1 - f, 1, 0};
    case 2: return {0, 1, f};
    case 3: return {0, 1 - f, 1};
    case 4: return {f, 0, 1};
    default: return {1, 0, 1 - f};
  }
}

RgbD Parula(int k) {
  const double pos = static_cast<double>(k) * (kParulaControl.size() - 1) / (kM - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(pos), kParulaControl.size() - 2);
  const double w = pos - static_cast<double>(i);
  const RgbD& a = kParulaControl[i];
  const RgbD& b = kParulaControl[i + 1];
  return {a.r + w * (b.r - a.r), a.g + w * (b.g - a.g), a.b + w * (b.b - a.b)};
}

// Regular lattice of the RGB cube (grays removed) followed by extra ramps of
// gray, red, green and blue filling the remaining entries.
std::vector<RgbD> ColorCubeEntries() {
  int levels = static_cast<int>(std::cbrt(static_cast<double>(kM)) + 1e-9);
  while (levels * levels * levels - levels + 4 > kM) --levels;
  std::vector<RgbD> out;
  const double step = 1.0 / (levels - 1);
  for (int b = 0; b < levels; ++b) {
    for (int g = 0; g < levels; ++g) {
      for (int r = 0; r < levels; ++r) {
        if (r == g && g == b) continue;
        out.push_back({r * step, g * step, b * step});
      }
    }
  }
  const int extra = kM - static_cast<int>(out.size());
  for (int ramp = 0; ramp < 4; ++ramp) {
    const int count = extra / 4 + (ramp < extra % 4 ? 1 : 0);
    for (int j = 1; j <= count; ++j) {
      const double v = static_cast<double>(j) / (count + 1);
      switch (ramp) {
        case 0: out.push_back({v, v, v}); break;
        case 1: out.push_back({v, 0, 0}); break;
        case 2: out.push_back({0, v, 0}); break;
        default: out.push_back({0, 0, v}); break;
      }
    }
  }
  return out;
}

std::uint8_t To8Bit(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

ColormapTable Build(const std::string& name, const Generator& gen) {
  ColormapTable t;
  t.name = name;
  for (int k = 0; k < kM; ++k) {
    const RgbD c = gen(k);
    t.entries[static_cast<std::size_t>(k)] = {To8Bit(c.r), To8Bit(c.g), To8Bit(c.b)};
  }
  return t;
}

std::vector<ColormapTable> BuildRegistry() {
  const auto cube = ColorCubeEntries();
  std::vector<ColormapTable> reg;
  reg.push_back(Build("parula", Parula));
  reg.push_back(Build("autumn", [](int k) { return RgbD{1, Ramp(k), 0}; }));
  reg.push_back(Build("bone", [](int k) {
    const double g = Ramp(k);
    const RgbD h = Hot(k);  // bone uses hot with its channels reversed
    return RgbD{(7 * g + h.b) / 8, (7 * g + h.g) / 8, (7 * g + h.r) / 8};
  }));
  reg.push_back(Build("colorcube", [&](int k) { return cube[static_cast<std::size_t>(k)]; }));
  reg.push_back(Build("cool", [](int k) { return RgbD{Ramp(k), 1 - Ramp(k), 1}; }));
  reg.push_back(Build("copper", [](int k) {
    const double g = Ramp(k);
    return RgbD{std::min(1.0, 1.25 * g), std::min(1.0, 0.7812 * g), std::min(1.0, 0.4975 * g)};
  }));
  reg.push_back(Build("flag", [](int k) { return kFlagCycle[static_cast<std::size_t>(k) % 4]; }));
  reg.push_back(Build("gray", [](int k) { return RgbD{Ramp(k), Ramp(k), Ramp(k)}; }));
  reg.push_back(Build("hot", Hot));
  reg.push_back(Build("hsv", Hsv));
  reg.push_back(Build("jet", Jet));
  reg.push_back(Build("lines", [](int k) { return kLinesCycle[static_cast<std::size_t>(k) % 7]; }));
  reg.push_back(Build("pink", [](int k) {
    const double g = Ramp(k);
    const RgbD h = Hot(k);
    return RgbD{std::sqrt((2 * g + h.r) / 3), std::sqrt((2 * g + h.g) / 3),
                std::sqrt((2 * g + h.b) / 3)};
  }));
  reg.push_back(Build("prism", [](int k) { return kPrismCycle[static_cast<std::size_t>(k) % 6]; }));
  reg.push_back(Build("spring", [](int k) { return RgbD{1, Ramp(k), 1 - Ramp(k)}; }));
  reg.push_back(Build("summer", [](int k) { return RgbD{Ramp(k), 0.5 + Ramp(k) / 2, 0.4}; }));
  reg.push_back(Build("winter", [](int k) { return RgbD{0, Ramp(k), 0.5 + (1 - Ramp(k)) / 2}; }));
  return reg;
}

const std::vector<ColormapTable>& Registry() {
  static const std::vector<ColormapTable> reg = BuildRegistry();
  return reg;
}

std::string Canonical(std::string_view name) {
  std::string out;
  for (char c : name) {
    if (c == '-' || c == '_' || c == ' ') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

}  // namespace

const ColormapTable& Colormap(std::string_view name) {
  const std::string key = Canonical(name);
  for (const auto& t : Registry()) {
    if (t.name == key) return t;
  }
  std::string valid;
  for (const auto& n : ColormapNames()) valid += (valid.empty() ? "" : ", ") + n;
  Fail(ErrorCode::kNotFound,
       "unknown colormap '" + std::string(name) + "'; valid names: " + valid);
}

const std::vector<std::string>& ColormapNames() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& t : Registry()) v.push_back(t.name);
    return v;
  }();
  return names;
}

int DuplicateEntries(const ColormapTable& table) {
  std::set<std::uint32_t> seen;
  int dups = 0;
  for (const auto& e : table.entries) {
    const std::uint32_t key = (std::uint32_t{e.r} << 16) | (std::uint32_t{e.g} << 8) | e.b;
    if (!seen.insert(key).second) ++dups;
  }
  return dups;
}

void DisplayRange::Validate() const {
  Require(std::isfinite(lo) && std::isfinite(hi) && lo < hi,
          ErrorCode::kInvalidArgument, "display range: need finite lo < hi");
}

int QuantizeIndex(double v, const DisplayRange& range) {
  const double c = std::clamp(v, range.lo, range.hi);
  const double idx = std::floor(255.0 * (c - range.lo) / (range.hi - range.lo) + 0.5);
  return std::clamp(static_cast<int>(idx), 0, 255);
}

double DequantizeIndex(int idx, const DisplayRange& range) {
  return range.lo + (range.hi - range.lo) * idx / 255.0;
}

DisplayRange RangeFromPercentiles(std::span<const double> values, double lo_pct,
                                  double hi_pct, double floor_lps) {
  Require(!values.empty(), ErrorCode::kInvalidArgument, "display range: no values");
  Require(0.0 <= lo_pct && lo_pct < hi_pct && hi_pct <= 100.0,
          ErrorCode::kInvalidArgument, "display range: bad percentiles");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  auto pct = [&](double p) {
    const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const auto j = std::min(i + 1, sorted.size() - 1);
    const double w = pos - static_cast<double>(i);
    return sorted[i] + w * (sorted[j] - sorted[i]);
  };
  DisplayRange r{std::min(pct(lo_pct), floor_lps), pct(hi_pct)};
  if (!(r.hi > r.lo)) r.hi = r.lo + 1.0;
  return r;
}

}  // namespace chroma_se::codec
