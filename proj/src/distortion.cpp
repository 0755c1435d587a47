#include "forespeed/distortion.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <Eigen/Eigenvalues>
#include <boost/math/tools/minima.hpp>

#include "forespeed/model.hpp"

namespace forespeed {

namespace {

constexpr double kSearchMin = -0.5;
constexpr double kSearchMax = 0.5;
constexpr int kCoarseSteps = 100;
constexpr double kNoCurvatureThreshold = 1e-3;

double objective(const DistortionModel<double>& model, std::span<const LineAnnotation> lines) {
  double total = 0.0;
  for (const auto& line : lines) {
    const double r = line_straightness_residual(model, line);
    total += r * r;
  }
  return total;
}

}  // namespace

double line_straightness_residual(const DistortionModel<double>& model, const LineAnnotation& line) {
  if (line.points.size() < 3) throw PreconditionError("line needs at least 3 points");
  const auto n = static_cast<double>(line.points.size());

  std::vector<Vec2<double>> pts;
  pts.reserve(line.points.size());
  Vec2<double> centroid = Vec2<double>::Zero();
  for (const auto& p : line.points) {
    pts.push_back(undistort_point(model, p));
    centroid += pts.back();
  }
  centroid /= n;

  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) {
    const Vec2<double> q = p - centroid;
    scatter += q * q.transpose();
  }
  if (scatter.trace() <= 1e-24) throw DegenerateLine("undistorted line points collapse to a point");

  // Distances are measured along the eigenvector normal rather than read off
  // the smallest eigenvalue, which loses half its digits to cancellation.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(scatter);
  const Vec2<double> normal = eig.eigenvectors().col(0);
  double sum_sq = 0;
  for (const auto& p : pts) {
    const double dist = normal.dot(p - centroid);
    sum_sq += dist * dist;
  }
  return std::sqrt(sum_sq / n);
}

DistortionFit fit_distortion(std::span<const LineAnnotation> lines, const ImageSize& image) {
  if (lines.empty()) throw PreconditionError("fit_distortion needs at least one line");
  if (image.width <= 0 || image.height <= 0) throw PreconditionError("image size must be positive");
  for (const auto& line : lines)
    if (line.points.size() < 3) throw PreconditionError("every line needs at least 3 points");

  DistortionModel<double> model = DistortionModel<double>::identity(image);

  bool curved = false;
  for (const auto& line : lines)
    if (line_straightness_residual(model, line) >= kNoCurvatureThreshold) curved = true;
  if (!curved) return {model, true, objective(model, lines)};

  auto cost = [&](double k) {
    DistortionModel<double> trial = model;
    trial.k = k;
    try {
      return objective(trial, lines);
    } catch (const FoldOverError&) {
      return std::numeric_limits<double>::infinity();
    } catch (const DegenerateLine&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  // Coarse scan to isolate the basin, then Brent inside the neighbouring bracket.
  const double step = (kSearchMax - kSearchMin) / kCoarseSteps;
  int best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kCoarseSteps; ++i) {
    const double c = cost(kSearchMin + i * step);
    if (c < best_cost) {
      best_cost = c;
      best = i;
    }
  }
  const double lo = kSearchMin + std::max(0, best - 1) * step;
  const double hi = kSearchMin + std::min(kCoarseSteps, best + 1) * step;
  const auto [k, value] = boost::math::tools::brent_find_minima(cost, lo, hi, std::numeric_limits<double>::digits / 2);

  model.k = k;
  return {model, false, value};
}

}  // namespace forespeed
