#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <optional>
#include <stdexcept>
#include <vector>

namespace pds {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Sorted, duplicate-free column indices.
using IndexSet = std::vector<int>;

inline IndexSet make_index_set(IndexSet v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline IndexSet index_union(const IndexSet& a, const IndexSet& b) {
  IndexSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline bool index_contains(const IndexSet& s, int j) {
  return std::binary_search(s.begin(), s.end(), j);
}

inline Mat select_columns(const Mat& X, const IndexSet& idx) {
  Mat out(X.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = X.col(idx[k]);
  return out;
}

inline Mat select_rows(const Mat& X, const IndexSet& idx) {
  Mat out(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = X.row(idx[k]);
  return out;
}

inline Vec select_rows(const Vec& v, const IndexSet& idx) {
  Vec out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[idx[k]];
  return out;
}

// Ground truth attached to simulated samples: the target coefficient, the
// nonzero control sets, and the scalar index signals x'(c_y b0), x'(c_d b1).
struct Truth {
  double alpha0 = 0.0;
  IndexSet support_y;
  IndexSet support_d;
  Vec signal_y;
  Vec signal_d;
};

struct Dataset {
  Vec y;
  Vec d;
  Mat X;
  std::optional<Truth> truth;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const { return X.cols(); }

  void validate() const {
    if (y.size() != d.size() || y.size() != X.rows()) {
      throw std::invalid_argument("dataset: y, d and X must share the row count");
    }
    if (y.size() < 2) throw std::invalid_argument("dataset: need at least 2 observations");
    if (!y.allFinite() || !d.allFinite() || !X.allFinite()) {
      throw std::invalid_argument("dataset: non-finite entries");
    }
  }
};

// Point estimate plus inference for the treatment coefficient.
struct EstimateReport {
  double alpha_hat = 0.0;
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double level = 0.95;
  IndexSet selected;   // control columns entering the final regression
  int s_hat = 0;       // |selected|
  bool flagged = false;  // degrees-of-freedom truncation or a non-converged selection fit
};

}  // namespace pds
