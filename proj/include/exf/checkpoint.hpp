#pragma once

#include <filesystem>
#include <utility>

#include "exf/model.hpp"
#include "exf/transfer.hpp"

#include "json.hpp"

namespace exf {

// Checkpoint file: magic "EXFC", u32 header length (little-endian), a JSON
// header carrying format version, layer dims, activation tag and training
// metadata, then the parameters as little-endian float64 in model order.
void save_checkpoint(const std::filesystem::path& path, const MlpModel& model,
                     const nlohmann::json& metadata);

std::pair<MlpModel, nlohmann::json> load_checkpoint(const std::filesystem::path& path);

// TrainLog as JSONL, one record per epoch. Wall time appears only when the
// run recorded it (non-deterministic mode), keeping deterministic logs
// byte-identical across runs.
void save_train_log(const std::filesystem::path& path, const TrainLog& log);

}  // namespace exf
