#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcqa/metrics.hpp"
#include "dcqa/model.hpp"
#include "dcqa/squad.hpp"

namespace dcqa {

/// One forward pass serialized: example id, surface tokens, per-block C2Q and
/// Q2C probability matrices (row-major, L x L), and the masked span logits.
nlohmann::json attention_dump_json(const QaModel& model, const TokenizedExample& ex);

/// Surface strings aligned one-to-one with ex.token_ids
/// ([CLS] question words [SEP] context tokens [SEP]).
std::vector<std::string> surface_tokens(const TokenizedExample& ex);

/// Predictions plus probability sidecar for a whole dataset. Questions the
/// tokenizer had to drop get a no-answer prediction with probability 0 so the
/// metrics stay defined over the full dataset.
ModelPredictions predict_dataset(const QaModel& model, const SquadDataset& ds,
                                 std::optional<double> tau_override = std::nullopt);

/// Entry point behind main(): parses argv, dispatches the subcommand.
/// Exit code 0 on success, 1 on validation/usage errors, 2 on runtime
/// failures.
int run_cli(int argc, const char* const* argv);

}  // namespace dcqa
