#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "semsteer/types.hpp"

namespace semsteer::project {

enum class Which { base, steered };

/// 2D layout of `records` (corpus order preserved). Cosine metric projects the
/// L2-normalized vectors; euclidean uses them as given.
///
/// linear_pca: mean-center, project onto the top two principal directions.
/// Each direction's sign is fixed so its largest-magnitude loading is positive.
///
/// neighbor_embedding: exact kNN graph, fuzzy-union weights, attractive and
/// negative-sampling SGD on the 1 / (1 + a d^(2b)) kernel (a, b fitted from
/// min_dist with spread 1). Initialized from the PCA layout scaled to
/// [-10, 10] plus seeded jitter; 5 negative samples per edge; n_epochs passes.
///
/// external_adapter: runs `external_command` through the shell with a request
/// file on stdin and reads positions from stdout. Request: one line
/// {"config": {...}} followed by one {"id", "vector"} line per document.
/// Response: one {"id", "x", "y"} line per document. Nonzero exit fails.
ProjectionLayout project(const std::vector<EmbeddingRecord>& records, const ProjectionConfig& config, Which which,
                         std::string name = {});

/// Same, over raw vectors.
ProjectionLayout project_vectors(const std::vector<DocId>& ids, const std::vector<EmbeddingVector>& vectors,
                                 const ProjectionConfig& config, std::string name = {});

/// Top-2 principal coordinates of row vectors (no normalization applied).
std::vector<Point2> pca_2d(const std::vector<std::vector<double>>& rows);

/// Kernel parameters (a, b) of 1 / (1 + a d^(2b)) fitted by least squares to
/// the offset-exponential target curve with the given min_dist and spread.
std::pair<double, double> fit_kernel_ab(double min_dist, double spread = 1.0);

/// k nearest neighbors in layout space, Euclidean, self excluded, ties by
/// ascending doc id.
std::map<DocId, std::vector<DocId>> knn_2d(const ProjectionLayout& layout, int k);

/// Index form over a subset: neighbors of each point among `points`, ties
/// broken by `ids` ascending. Returned indices refer to positions in `points`.
std::vector<std::vector<std::size_t>> knn_indices(std::span<const Point2> points, std::span<const DocId> ids, int k);

} // namespace semsteer::project
