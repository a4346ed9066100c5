#pragma once

#include <span>
#include <vector>

namespace cefr {

// Column-wise mean of m token vectors (m >= 1, all of equal length).
std::vector<double> mean_pool(std::span<const std::vector<double>> token_vectors);

// u.v / (|u||v|). Throws std::invalid_argument on zero norm or dimension mismatch.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

double l2_norm(std::span<const double> v);

}  // namespace cefr
