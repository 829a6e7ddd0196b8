#include "buddy/cache/embedding.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "buddy/common/text.hpp"

namespace buddy {

bool Embedding::is_zero() const {
  for (float v : values) {
    if (v != 0.0f) return false;
  }
  return true;
}

double cosine(const Embedding& a, const Embedding& b) {
  if (a.values.size() != b.values.size()) throw std::invalid_argument("embedding dimensions differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += static_cast<double>(a.values[i]) * b.values[i];
    na += static_cast<double>(a.values[i]) * a.values[i];
    nb += static_cast<double>(b.values[i]) * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

TrigramEmbedder::TrigramEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) throw std::invalid_argument("embedding dimension must be positive");
}

Embedding TrigramEmbedder::embed(std::string_view input) const {
  Embedding out;
  out.values.assign(dimension_, 0.0f);
  if (input.empty()) return out;

  std::string padded;
  padded.reserve(input.size() + 2);
  padded.push_back(' ');
  padded.append(input);
  padded.push_back(' ');

  std::vector<double> counts(dimension_, 0.0);
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    const auto h = text::fnv1a64(std::string_view(padded).substr(i, 3));
    counts[h % dimension_] += 1.0;
  }
  double norm = 0.0;
  for (double c : counts) norm += c * c;
  norm = std::sqrt(norm);
  for (std::size_t i = 0; i < dimension_; ++i) out.values[i] = static_cast<float>(counts[i] / norm);
  return out;
}

}  // namespace buddy
