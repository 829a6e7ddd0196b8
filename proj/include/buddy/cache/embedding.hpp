#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace buddy {

/// Fixed-length, L2-normalized vector. All zeros only for empty text.
struct Embedding {
  std::vector<float> values;

  bool is_zero() const;
};

/// Cosine similarity; 0 when either side is the zero vector.
double cosine(const Embedding& a, const Embedding& b);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Embedding embed(std::string_view text) const = 0;
  virtual std::size_t dimension() const = 0;
};

/// Character-trigram feature hashing. The text is padded with one space on
/// each side, every byte trigram is hashed (FNV-1a) into one of `dimension`
/// buckets, and the count vector is L2-normalized.
class TrigramEmbedder final : public Embedder {
 public:
  static constexpr std::size_t kDefaultDimension = 256;

  explicit TrigramEmbedder(std::size_t dimension = kDefaultDimension);

  Embedding embed(std::string_view text) const override;
  std::size_t dimension() const override { return dimension_; }

 private:
  std::size_t dimension_;
};

}  // namespace buddy
