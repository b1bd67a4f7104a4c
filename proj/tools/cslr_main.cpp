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

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cslr/errors.hpp"
#include "cslr/pipeline.hpp"

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  bool threads_set = false;
};

cslr::RunContext make_context(const GlobalArgs& args) {
  cslr::RunContext ctx;
  if (!args.config_path.empty())
    ctx.config = cslr::Config::parse_file(args.config_path);
  ctx.config.check_known_keys(cslr::known_config_keys());
  ctx.seed = args.seed_set
                 ? args.seed
                 : static_cast<std::uint64_t>(ctx.config.get_int("seed", 1));
  ctx.threads = args.threads_set
                    ? args.threads
                    : static_cast<int>(ctx.config.get_int("threads", 1));
  if (ctx.threads < 1)
    throw cslr::ConfigError("threads must be >= 1");
  if (args.out_dir.empty())
    throw cslr::UsageError("--out is required");
  ctx.out_dir = args.out_dir;
  return ctx;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CSLR toolkit: synthetic keypoint CSLR pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs g;
  app.add_option("--config", g.config_path, "Config file (key = value lines)");
  app.add_option("--out", g.out_dir, "Output directory for this stage");
  auto* seed_opt = app.add_option("--seed", g.seed, "Base RNG seed");
  auto* threads_opt = app.add_option("--threads", g.threads, "Worker threads");

  std::string manifest_path;
  std::string mask_path;
  std::string features_dir;
  std::string checkpoint_path;
  std::string split = "test";
  std::string decoder;
  int beam_width = 0;
  int n_samples = 10;
  int top_k_count = 20;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");

  auto* eda = app.add_subcommand("eda", "Rank keypoints by displacement");
  eda->add_option("--manifest", manifest_path, "Dataset manifest")->required();
  auto* n_samples_opt =
      eda->add_option("--n-samples", n_samples, "Samples to aggregate");
  auto* top_k_opt =
      eda->add_option("--top-k", top_k_count, "Rows in the top-k report");

  auto* mask = app.add_subcommand("mask", "Build the DBSCAN master mask");
  mask->add_option("--manifest", manifest_path, "Dataset manifest")->required();

  auto* preprocess =
      app.add_subcommand("preprocess", "Normalize and cache feature files");
  preprocess->add_option("--manifest", manifest_path, "Dataset manifest")
      ->required();
  preprocess->add_option("--mask", mask_path, "mask.txt path")->required();

  auto* train = app.add_subcommand("train", "Train the Conformer encoder");
  train->add_option("--manifest", manifest_path, "Dataset manifest")
      ->required();
  train->add_option("--features", features_dir, "Preprocess output dir")
      ->required();

  auto add_decode_opts = [&](CLI::App* cmd) {
    cmd->add_option("--checkpoint", checkpoint_path, "Model checkpoint")
        ->required();
    cmd->add_option("--manifest", manifest_path, "Dataset manifest")
        ->required();
    cmd->add_option("--features", features_dir, "Preprocess output dir")
        ->required();
    cmd->add_option("--split", split, "Manifest split to score");
    cmd->add_option("--decoder", decoder, "greedy or beam");
    cmd->add_option("--beam", beam_width, "Beam width for --decoder beam");
  };
  auto* evaluate = app.add_subcommand("evaluate", "Score a split with WER");
  add_decode_opts(evaluate);
  auto* decode = app.add_subcommand("decode", "Emit hypotheses for a split");
  add_decode_opts(decode);

  CLI11_PARSE(app, argc, argv);
  g.seed_set = seed_opt->count() > 0;
  g.threads_set = threads_opt->count() > 0;

  try {
    cslr::RunContext ctx = make_context(g);
    const std::string dec =
        !decoder.empty() ? decoder
                         : ctx.config.get_string("train.decoder", "greedy");
    const int beam =
        beam_width > 0
            ? beam_width
            : static_cast<int>(ctx.config.get_int("train.beam_width", 20));
    if (synth->parsed()) {
      cslr::cmd_synth(ctx);
    } else if (eda->parsed()) {
      if (n_samples_opt->count() == 0)
        n_samples = static_cast<int>(ctx.config.get_int("eda.n_samples", 10));
      if (top_k_opt->count() == 0)
        top_k_count = static_cast<int>(ctx.config.get_int("eda.top_k", 20));
      cslr::cmd_eda(ctx, manifest_path, n_samples, top_k_count);
    } else if (mask->parsed()) {
      cslr::cmd_mask(ctx, manifest_path);
    } else if (preprocess->parsed()) {
      cslr::cmd_preprocess(ctx, manifest_path, mask_path);
    } else if (train->parsed()) {
      cslr::cmd_train(ctx, manifest_path, features_dir);
    } else if (evaluate->parsed()) {
      cslr::cmd_evaluate(ctx, checkpoint_path, manifest_path, features_dir,
                         split, dec, beam);
    } else if (decode->parsed()) {
      cslr::cmd_decode(ctx, checkpoint_path, manifest_path, features_dir,
                       split, dec, beam);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
