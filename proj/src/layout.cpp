#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "saber/types.hpp"

namespace saber {
namespace {

constexpr double kPi = 3.14159265358979323846;

using Vec3 = std::array<double, 3>;

// Unit vector at polar angle `incl` from +z, azimuth `az` from +y (nasion)
// with positive azimuth toward the left ear (-x).
Vec3 sphere_point(double incl_deg, double az_deg) {
  const double th = incl_deg * kPi / 180.0;
  const double ph = az_deg * kPi / 180.0;
  return {-std::sin(th) * std::sin(ph), std::sin(th) * std::cos(ph), std::cos(th)};
}

// Great-circle interpolation between two unit vectors, t in [0, 1].
Vec3 slerp(const Vec3& a, const Vec3& b, double t) {
  double d = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  d = std::min(1.0, std::max(-1.0, d));
  const double omega = std::acos(d);
  const double so = std::sin(omega);
  const double wa = std::sin((1.0 - t) * omega) / so;
  const double wb = std::sin(t * omega) / so;
  return {wa * a[0] + wb * b[0], wa * a[1] + wb * b[1], wa * a[2] + wb * b[2]};
}

Vec3 mirror_lr(const Vec3& p) { return {-p[0], p[1], p[2]}; }

struct Row {
  const char* midline;        // label on the sagittal line, or nullptr (Fp/O rows)
  double midline_incl;        // inclination of the midline label
  double midline_az;          // 0 = front, 180 = back
  double ring_az;             // azimuth of this row's outer-ring electrode (left side)
  std::vector<std::pair<const char*, double>> laterals;  // (left label, slerp fraction)
};

}  // namespace

namespace {

// Idealized 10-10 coordinates on a unit sphere. The outer ring sits at 72°
// from the vertex; lateral electrodes lie on the great-circle arc between the
// row's midline electrode and its ring electrode. Only label identity,
// left/right pairing and relative distances are analytically load-bearing.
ElectrodeLayout build_layout_64() {
  ElectrodeLayout lo;
  const double ring = 72.0;

  auto push = [&lo](const std::string& label, const Vec3& p, Hemisphere h) {
    lo.labels.push_back(label);
    lo.positions.push_back(p);
    lo.hemisphere.push_back(h);
  };
  // Adds left electrode, then its mirrored right homolog, and records the pair.
  auto push_pair = [&](const std::string& left, const std::string& right, const Vec3& pl) {
    push(left, pl, Hemisphere::Left);
    push(right, mirror_lr(pl), Hemisphere::Right);
    lo.pairs.emplace_back(left, right);
  };

  // Frontal pole and occipital labels live on the ring itself.
  push_pair("Fp1", "Fp2", sphere_point(ring, 18.0));
  push("Fpz", sphere_point(ring, 0.0), Hemisphere::Midline);

  const std::vector<Row> rows = {
      {"AFz", 54.0, 0.0, 36.0, {{"AF3", 0.5}, {"AF7", 1.0}}},
      {"Fz", 36.0, 0.0, 54.0, {{"F1", 0.25}, {"F3", 0.5}, {"F5", 0.75}, {"F7", 1.0}}},
      {"FCz", 18.0, 0.0, 72.0, {{"FC1", 0.25}, {"FC3", 0.5}, {"FC5", 0.75}, {"FT7", 1.0}}},
      {"Cz", 0.0, 0.0, 90.0, {{"C1", 0.25}, {"C3", 0.5}, {"C5", 0.75}, {"T7", 1.0}}},
      {"CPz", 18.0, 180.0, 108.0, {{"CP1", 0.25}, {"CP3", 0.5}, {"CP5", 0.75}, {"TP7", 1.0}}},
      {"Pz", 36.0, 180.0, 126.0, {{"P1", 0.25}, {"P3", 0.5}, {"P5", 0.75}, {"P7", 1.0}}},
      {"POz", 54.0, 180.0, 144.0, {{"PO3", 0.5}, {"PO7", 1.0}}},
  };
  for (const auto& row : rows) {
    push(row.midline, sphere_point(row.midline_incl, row.midline_az), Hemisphere::Midline);
    const Vec3 mid = sphere_point(row.midline_incl, row.midline_az);
    const Vec3 edge = sphere_point(ring, row.ring_az);
    for (const auto& [label, frac] : row.laterals) {
      std::string left = label;
      std::string right = left;
      right.back() = static_cast<char>(right.back() + 1);  // odd -> even homolog
      push_pair(left, right, frac >= 1.0 ? edge : slerp(mid, edge, frac));
    }
  }

  push("Oz", sphere_point(ring, 180.0), Hemisphere::Midline);
  push_pair("O1", "O2", sphere_point(ring, 162.0));
  push("Iz", sphere_point(90.0, 180.0), Hemisphere::Midline);
  // Mastoids: below and slightly behind the ears.
  push_pair("M1", "M2", sphere_point(108.0, 100.0));

  lo.validate();
  return lo;
}

}  // namespace

const ElectrodeLayout& standard_layout_64() {
  static const ElectrodeLayout lo = build_layout_64();
  return lo;
}

const std::vector<std::string> kLeftAlphaRoi = {"PO3", "PO7", "O1"};
const std::vector<std::string> kRightAlphaRoi = {"PO4", "PO8", "O2"};
const std::vector<std::pair<std::string, std::string>> kErpPairs = {{"PO7", "PO8"}, {"P7", "P8"}};
const std::vector<std::string> kDefaultEogChannels = {"Fp1", "Fp2"};
const std::vector<std::string> kDefaultReferenceChannels = {"M1", "M2"};
const std::vector<std::string> kPosteriorChannels = {
    "P7", "P5", "P3", "P1", "Pz", "P2", "P4", "P6", "P8",
    "PO7", "PO3", "POz", "PO4", "PO8", "O1", "Oz", "O2", "Iz"};

}  // namespace saber
