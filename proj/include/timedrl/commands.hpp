#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "timedrl/config.hpp"

namespace timedrl {

inline constexpr const char* kVersion = "0.1.0";

// Process exit status for an error: 2 configuration, 3 data, 4 numeric abort,
// 5 checkpoint or I/O.
int exit_code_for(ErrorCode code);

// Dataset, split and windows shared by every command.
struct PreparedData {
  TimeSeriesDataset dataset;
  DatasetSplit split;
  EvalData windows;
  EncoderConfig encoder;  // window and channel fields resolved against the data
  std::size_t classes = 0;
  std::string dataset_id;
};

PreparedData prepare_data(const RunConfig& config);

struct PretrainOptions {
  std::optional<std::filesystem::path> resume;  // checkpoint to continue from
  std::optional<std::size_t> stop_after;        // stop once this many epochs are done
};

// Each command writes its artifacts into `out` (created if missing).
//   pretrain          -> checkpoint.tdrl, loss.csv, run_meta.json
//   eval              -> metrics.json, ledger.csv (appended)
//   finetune          -> finetune.csv, ledger.csv (appended)
//   ablate            -> ablation.csv
//   export-embeddings -> embeddings.csv, embedding_summary.json
//   gen-data          -> data.csv
void cmd_pretrain(const RunConfig& config, const std::filesystem::path& out, const PretrainOptions& options = {});
void cmd_eval(const RunConfig& config, const std::optional<std::filesystem::path>& checkpoint,
              const std::filesystem::path& out);
void cmd_finetune(const RunConfig& config, const std::optional<std::filesystem::path>& checkpoint,
                  const std::filesystem::path& out);
void cmd_ablate(const RunConfig& config, const std::filesystem::path& out);
void cmd_export_embeddings(const RunConfig& config, const std::optional<std::filesystem::path>& checkpoint,
                           const std::filesystem::path& out, bool with_timestamps = false);
void cmd_gen_data(const RunConfig& config, const std::filesystem::path& out);

// Loss history as CSV: two rows (train, val) per epoch, values at %.17g.
std::string loss_csv(const std::vector<EpochRecord>& history);

}  // namespace timedrl
