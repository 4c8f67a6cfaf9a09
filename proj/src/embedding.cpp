#include "mmbattn/embedding.hpp"

#include "mmbattn/errors.hpp"
#include "mmbattn/random.hpp"

namespace mmb::emb {

EmbeddingTable init_embeddings(const data::FieldSchema& schema, const data::Vocabulary& vocab, Index dim,
                               std::uint64_t seed) {
  if (dim < 1) throw ContractError("embedding dimension must be >= 1");
  if (vocab.num_fields() != schema.num_fields()) throw SchemaError("vocabulary and schema disagree on field count");
  EmbeddingTable emb;
  emb.dim = dim;
  for (Index f = 0; f < schema.num_fields(); ++f) {
    const std::string& name = schema.fields[static_cast<std::size_t>(f)].name;
    const Index rows = vocab.size(f);
    ag::Tensor t = ag::Tensor::zeros({rows, dim}, true);
    Rng rng = make_rng(seed, "embedding." + name);
    fill_normal(t.value(), kInitStddev, rng);
    emb.names.push_back(name);
    emb.tables.push_back(std::move(t));
  }
  return emb;
}

ag::Tensor lookup(ag::Graph& g, const EmbeddingTable& emb, const data::Batch& batch) {
  const Index B = batch.size();
  const Index F = emb.num_fields();
  const Index d = emb.dim;
  if (batch.indices.cols() != F)
    throw ContractError("batch has " + std::to_string(batch.indices.cols()) + " fields, embedding has " +
                        std::to_string(F));
  for (Index f = 0; f < F; ++f) {
    const Index rows = emb.tables[static_cast<std::size_t>(f)].dim(0);
    for (Index b = 0; b < B; ++b)
      if (static_cast<Index>(batch.indices(b, f)) >= rows)
        throw ContractError("index " + std::to_string(batch.indices(b, f)) + " out of range for field " +
                            emb.names[static_cast<std::size_t>(f)] + " (size " + std::to_string(rows) + ")");
  }
  ag::Vector out(B * F * d);
  for (Index b = 0; b < B; ++b)
    for (Index f = 0; f < F; ++f)
      out.segment((b * F + f) * d, d) =
          emb.tables[static_cast<std::size_t>(f)].value().segment(static_cast<Index>(batch.indices(b, f)) * d, d);

  data::IndexMatrix indices = batch.indices;
  return g.record("embedding_lookup", emb.tables, ag::Tensor::from({B, F, d}, std::move(out)),
                  [indices = std::move(indices), B, F, d](const ag::Tensor& c, std::span<ag::Tensor> in) {
                    for (Index f = 0; f < F; ++f) {
                      ag::Tensor& table = in[static_cast<std::size_t>(f)];
                      if (!table.requires_grad()) continue;
                      ag::Vector& grad = table.grad();
                      for (Index b = 0; b < B; ++b)
                        grad.segment(static_cast<Index>(indices(b, f)) * d, d) += c.grad().segment((b * F + f) * d, d);
                    }
                  });
}

}  // namespace mmb::emb
