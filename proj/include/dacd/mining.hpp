#pragma once

// Background mining: NBNN image-to-image distance and gallery argmin.

#include <Eigen/Core>

#include <algorithm>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dacd/error.hpp"
#include "dacd/features.hpp"

namespace dacd {

struct Gallery {
  std::vector<std::pair<std::string, FeatureSet>> entries;

  void add(std::string id, FeatureSet fs) {
    for (const auto& e : entries) {
      if (e.first == id) throw Error("gallery: duplicate id " + id);
    }
    entries.emplace_back(std::move(id), std::move(fs));
  }
  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

/// Descriptors packed row-major for batched distance evaluation.
class DescriptorMatrix {
 public:
  using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  explicit DescriptorMatrix(const FeatureSet& fs) : source_(&fs), rows_(fs.size(), kDescriptorSize) {
    norms_.resize(static_cast<Eigen::Index>(fs.size()));
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const auto& d = fs.features[i].descriptor;
      for (std::size_t k = 0; k < kDescriptorSize; ++k) rows_(static_cast<Eigen::Index>(i), k) = d[k];
    }
    norms_ = rows_.rowwise().squaredNorm();
  }

  const FeatureSet& source() const { return *source_; }
  const Matrix& rows() const { return rows_; }
  const Eigen::VectorXf& norms() const { return norms_; }
  std::size_t size() const { return static_cast<std::size_t>(rows_.rows()); }

 private:
  const FeatureSet* source_;
  Matrix rows_;
  Eigen::VectorXf norms_;
};

namespace detail {

// Candidates within this slack of the float-expanded minimum are re-scored in
// double; the float expansion error for unit-L1 descriptors is far below it.
inline constexpr float kNbnnCandidateSlack = 1e-3f;

}  // namespace detail

/// Sum over query descriptors of the squared distance to the nearest entry
/// descriptor. A float GEMM screens candidates; the minimum itself is always
/// the exact double-precision distance.
inline double nbnn_distance(const DescriptorMatrix& query, const DescriptorMatrix& entry) {
  if (entry.size() == 0) throw Error("nbnn_distance: entry feature set is empty");
  if (query.size() == 0) return 0.0;
  const DescriptorMatrix::Matrix cross = query.rows() * entry.rows().transpose();
  const auto& qf = query.source().features;
  const auto& ef = entry.source().features;
  double total = 0.0;
  for (Eigen::Index i = 0; i < cross.rows(); ++i) {
    const float qn = query.norms()(i);
    float approx_min = std::numeric_limits<float>::infinity();
    for (Eigen::Index j = 0; j < cross.cols(); ++j) {
      approx_min = std::min(approx_min, qn + entry.norms()(j) - 2.0f * cross(i, j));
    }
    const float cutoff = approx_min + detail::kNbnnCandidateSlack;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < cross.cols(); ++j) {
      if (qn + entry.norms()(j) - 2.0f * cross(i, j) > cutoff) continue;
      best = std::min(best, descriptor_distance_sq(qf[static_cast<std::size_t>(i)].descriptor,
                                                   ef[static_cast<std::size_t>(j)].descriptor));
    }
    total += best;
  }
  return total;
}

inline double nbnn_distance(const FeatureSet& query, const FeatureSet& entry) {
  if (entry.empty()) throw Error("nbnn_distance: entry feature set is empty");
  return nbnn_distance(DescriptorMatrix(query), DescriptorMatrix(entry));
}

/// First index attaining the minimum distance.
inline std::size_t argmin_first(const std::vector<double>& distances) {
  if (distances.empty()) throw Error("mine_background: gallery is empty");
  std::size_t best = 0;
  for (std::size_t i = 1; i < distances.size(); ++i) {
    if (distances[i] < distances[best]) best = i;
  }
  return best;
}

inline std::vector<double> nbnn_distances(const FeatureSet& query, const Gallery& gallery) {
  const DescriptorMatrix q(query);
  std::vector<double> out;
  out.reserve(gallery.size());
  for (const auto& [id, fs] : gallery.entries) {
    if (fs.empty()) throw Error("nbnn_distance: gallery entry " + id + " has no features");
    out.push_back(nbnn_distance(q, DescriptorMatrix(fs)));
  }
  return out;
}

inline std::string mine_background(const FeatureSet& query, const Gallery& gallery) {
  if (gallery.empty()) throw Error("mine_background: gallery is empty");
  return gallery.entries[argmin_first(nbnn_distances(query, gallery))].first;
}

}  // namespace dacd
