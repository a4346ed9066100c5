#include "cefr/vector_ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cefr {

std::vector<double> mean_pool(std::span<const std::vector<double>> token_vectors) {
    if (token_vectors.empty()) throw std::invalid_argument("mean_pool: no token vectors");
    const std::size_t dim = token_vectors.front().size();
    std::vector<double> out(dim, 0.0);
    for (const auto& row : token_vectors) {
        if (row.size() != dim) throw std::invalid_argument("mean_pool: ragged token matrix");
        for (std::size_t j = 0; j < dim; ++j) out[j] += row[j];
    }
    const double m = static_cast<double>(token_vectors.size());
    for (double& v : out) v /= m;
    return out;
}

double l2_norm(std::span<const double> v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    return std::sqrt(sq);
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw std::invalid_argument("cosine_similarity: dimension mismatch");
    const double nu = l2_norm(u);
    const double nv = l2_norm(v);
    if (nu == 0.0 || nv == 0.0) throw std::invalid_argument("cosine_similarity: zero-norm input");
    double dot = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
    return std::clamp(dot / (nu * nv), -1.0, 1.0);
}

}  // namespace cefr
