#pragma once

#include <cstdint>

#include "dcqa/squad.hpp"

namespace dcqa {

/// Sentinel-span copy task: each context is filler words with a short span
/// wrapped in the sentinels "marka" ... "markb"; the answer is the tokens in
/// between. Solvable only by attending to the context, so it exercises the
/// whole pipeline end to end. All questions are answerable.
SquadDataset make_synthetic_dataset(int64_t n_examples, uint64_t seed,
                                    const std::string& id_prefix);

/// The word list the generator draws from (sentinels first). Exposed so tests
/// can verify hash-bucket separation under a given tokenizer.
const std::vector<std::string>& synthetic_vocabulary();

}  // namespace dcqa
