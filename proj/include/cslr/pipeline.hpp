/* Copyright 2026 The CSLR Toolkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <filesystem>
#include <set>
#include <string>

#include "cslr/augment.hpp"
#include "cslr/config.hpp"
#include "cslr/dbscan.hpp"
#include "cslr/model.hpp"
#include "cslr/schedule.hpp"
#include "cslr/synth.hpp"
#include "cslr/train.hpp"

namespace cslr {

// Every key the pipeline understands; configs with anything else are
// rejected.
const std::set<std::string>& known_config_keys();

// Config section loaders; absent keys fall back to the documented defaults.
SynthConfig synth_config_from(const Config& cfg, std::uint64_t seed);
DbscanParams dbscan_params_from(const Config& cfg);
ModelConfig model_config_from(const Config& cfg, int input_dim,
                              int vocab_size);
ScheduleConfig schedule_config_from(const Config& cfg);
AugmentConfig augment_config_from(const Config& cfg);
TrainConfig train_config_from(const Config& cfg, int threads);

// Shared command context resolved from flags + config file.
struct RunContext {
  Config config;
  std::uint64_t seed = 1;
  int threads = 1;
  std::filesystem::path out_dir;
};

// Pipeline stages. Each writes its outputs plus config.resolved.cfg and a
// provenance stamp into ctx.out_dir, and verifies its inputs against the
// stamps of the producing stages.
void cmd_synth(const RunContext& ctx);
void cmd_eda(const RunContext& ctx, const std::filesystem::path& manifest_path,
             int n_samples, int top_k_count);
void cmd_mask(const RunContext& ctx,
              const std::filesystem::path& manifest_path);
void cmd_preprocess(const RunContext& ctx,
                    const std::filesystem::path& manifest_path,
                    const std::filesystem::path& mask_path);
void cmd_train(const RunContext& ctx,
               const std::filesystem::path& manifest_path,
               const std::filesystem::path& features_dir);
void cmd_evaluate(const RunContext& ctx,
                  const std::filesystem::path& checkpoint_path,
                  const std::filesystem::path& manifest_path,
                  const std::filesystem::path& features_dir,
                  const std::string& split, const std::string& decoder,
                  int beam_width);
void cmd_decode(const RunContext& ctx,
                const std::filesystem::path& checkpoint_path,
                const std::filesystem::path& manifest_path,
                const std::filesystem::path& features_dir,
                const std::string& split, const std::string& decoder,
                int beam_width);

}  // namespace cslr
