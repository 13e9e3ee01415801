#ifndef TSFORGE_EMBEDDING_HPP
#define TSFORGE_EMBEDDING_HPP

#include "tsforge/core_data.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tsforge {

enum class BasisMethod { FPC, FICA };

std::string to_string(BasisMethod m);
BasisMethod parse_basis_method(const std::string& s);

/// Basis functions of one channel: k rows of length L plus the mean curve removed before
/// projection.
struct ChannelBasis {
  std::string name;
  Matrix basis;       // k x L
  Vector mean_curve;  // L
  Vector eigenvalues; // FPC only: covariance eigenvalues of the retained components
  int iterations = 0;
  bool converged = true;
  std::vector<std::string> warnings;

  Index k() const { return basis.rows(); }
  Index length() const { return basis.cols(); }
};

struct BasisSystem {
  BasisMethod method = BasisMethod::FPC;
  std::vector<ChannelBasis> channels;
  /// One basis fitted on the pooled windows of every channel.
  bool shared = false;

  Index total_components() const;
};

/// Columns [start, start + width) of an embedding table belong to one channel.
struct ChannelSpan {
  std::string name;
  Index start = 0;
  Index width = 0;
};

/// I x K coefficient table, channels concatenated column-wise.
struct EmbeddingTable {
  Matrix values;
  std::vector<ChannelSpan> spans;
  std::vector<Index> row_ids;

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
  auto channel_block(Index c) const {
    const auto& s = spans.at(static_cast<std::size_t>(c));
    return values.middleCols(s.start, s.width);
  }
};

std::vector<ChannelSpan> spans_for(const BasisSystem& basis);

struct FastIcaOptions {
  int max_iter = 500;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

/// Top-k eigenvectors of the sample covariance of the centered windows of one channel.
ChannelBasis fit_fpc(const InstanceSet& x, Index channel, Index k);

/// k temporal independent components: windows are centered by the mean curve, the
/// L-sample x I-variate view is whitened, then symmetric FastICA with a log-cosh contrast.
/// Components are unit-norm, sign-normalized and ordered by single-component variance retained.
ChannelBasis fit_fastica(const InstanceSet& x, Index channel, Index k, const FastIcaOptions& opts = {});

/// Fit every channel independently.
BasisSystem fit_basis(const InstanceSet& x, BasisMethod method, const std::vector<Index>& k,
                      const FastIcaOptions& opts = {});

/// Fit one basis on the windows of all channels stacked row-wise; every channel reuses it.
BasisSystem fit_shared_basis(const InstanceSet& x, BasisMethod method, Index k, const FastIcaOptions& opts = {});

/// Coefficients of one channel's windows: inner products for orthonormal FPC rows,
/// least-squares projection for the oblique FICA rows.
Matrix project(const Matrix& windows, const ChannelBasis& basis, BasisMethod method);

EmbeddingTable embed(const InstanceSet& x, const BasisSystem& basis);

/// mean_curve + sum_j e_ij b_j per channel.
InstanceSet reconstruct(const EmbeddingTable& e, const BasisSystem& basis);

/// 1 - ||Xc - Xc_hat||_F^2 / ||Xc||_F^2 per channel.
std::vector<double> variance_retained(const InstanceSet& x, const BasisSystem& basis);

struct KSelection {
  std::vector<Index> k;
  std::vector<double> retained;
  std::vector<std::string> warnings;
};

/// Smallest k per channel reaching the target variance, capped at min(k_max, I - 1, L).
KSelection select_k(const InstanceSet& x, BasisMethod method, double target, Index k_max,
                    const FastIcaOptions& opts = {});

/// Flip each row so its largest-magnitude entry is positive.
void normalize_signs(Matrix& rows);

}  // namespace tsforge

#endif  // TSFORGE_EMBEDDING_HPP
