// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// chroma-se: command-line driver for the colored-spectrogram enhancement
// pipeline.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "chroma_se/colormap.hpp"
#include "chroma_se/error.hpp"
#include "chroma_se/fixtures.hpp"
#include "chroma_se/pipeline.hpp"

namespace fs = std::filesystem;
using namespace chroma_se;

namespace {

void Print(const std::string& s) { std::cout << s << std::endl; }

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string ArtifactOr(const pipeline::ExperimentManifest& m, const std::string& role, const std::string& given) {
  if (!given.empty()) return given;
  auto it = m.artifacts.find(role);
  Require(it != m.artifacts.end(), ErrorCode::kNotFound, "manifest has no '" + role + "' artifact");
  return m.Path(it->second).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chroma-se: speech enhancement on colour-coded spectrogram images"};
  app.require_subcommand(1);

  // fixtures
  std::string fx_out;
  std::uint64_t fx_seed = 1;
  int fx_train = 2, fx_test = 1;
  double fx_seconds = 10.0;
  std::string fx_noises = "white,babble,brown";
  std::string fx_snrs = "0,5,10";
  auto* fixtures = app.add_subcommand("fixtures", "Write a synthetic speech + noise corpus");
  fixtures->add_option("--out", fx_out, "Corpus directory")->required();
  fixtures->add_option("--seed", fx_seed, "Random seed");
  fixtures->add_option("--train-files", fx_train, "Training files");
  fixtures->add_option("--test-files", fx_test, "Test files");
  fixtures->add_option("--seconds", fx_seconds, "Seconds per file");
  fixtures->add_option("--noises", fx_noises, "Comma list of white, brown, babble, hum");
  fixtures->add_option("--snrs", fx_snrs, "Comma list of mixture SNRs in dB");

  // prepare
  std::string corpus, out_dir;
  pipeline::PrepareOptions prep;
  std::string prep_tail = "drop";
  auto* prepare = app.add_subcommand("prepare", "Resample, concatenate and segment a corpus");
  prepare->add_option("--corpus", corpus, "Corpus directory")->required();
  prepare->add_option("--out", out_dir, "Experiment directory")->required();
  prepare->add_option("--seed", prep.seed, "Experiment seed");
  prepare->add_option("--colormap", prep.colormap, "Default colormap");
  prepare->add_option("--tail-policy", prep_tail, "drop | zero-pad");
  prepare->add_option("--frame-len", prep.stft.frame_len, "STFT frame length");
  prepare->add_option("--hop", prep.stft.hop, "STFT hop");
  prepare->add_option("--holdout", prep.holdout, "Test share for a corpus without split folders");

  std::string manifest;
  std::string colormap;

  // spectrograms
  auto* spectro = app.add_subcommand("spectrograms", "Encode every segment as a colour image");
  spectro->add_option("--manifest", manifest, "Experiment manifest or directory")->required();
  spectro->add_option("--colormap", colormap, "Colormap (default: manifest colormap)");

  // train-regnet
  regnet::RegnetTrainConfig rcfg;
  int n_images = 2;
  auto* train_regnet = app.add_subcommand("train-regnet", "Fit the pixel-to-LPS regression network");
  train_regnet->add_option("--manifest", manifest, "Experiment manifest or directory")->required();
  train_regnet->add_option("--colormap", colormap, "Colormap; 'gray*' for the single-input variant");
  train_regnet->add_option("--n-images", n_images, "Clean training images to use");
  train_regnet->add_option("--epochs", rcfg.epochs, "Epochs");
  train_regnet->add_option("--holdout", rcfg.holdout, "Held-out share of pixel rows");
  train_regnet->add_option("--seed", rcfg.seed, "Seed");
  train_regnet->add_option("--batch-size", rcfg.batch_size, "Mini-batch size");
  train_regnet->add_option("--lr", rcfg.learning_rate, "Initial learning rate");
  train_regnet->add_option("--final-lr", rcfg.final_learning_rate, "Final learning rate");

  // colormap-bench
  pipeline::BenchOptions bench_opt;
  std::string bench_list;
  std::string bench_csv;
  auto* bench = app.add_subcommand("colormap-bench", "Compare colormaps without the denoiser");
  bench->add_option("--manifest", manifest, "Experiment manifest or directory")->required();
  bench->add_option("--colormap", bench_list, "Comma list (default: all, plus gray*)");
  bench->add_option("--n-images", bench_opt.regnet_images, "Clean training images per regnet");
  bench->add_option("--epochs", bench_opt.regnet.epochs, "Regnet epochs");
  bench->add_option("--seed", bench_opt.regnet.seed, "Regnet seed");
  bench->add_option("--holdout", bench_opt.regnet.holdout, "Held-out share of pixel rows");
  bench->add_option("--max-test", bench_opt.max_test_segments, "Limit on test segments (0: all)");
  bench->add_option("--out", bench_csv, "CSV output (default: <experiment>/colormap_bench.csv)");

  // train-denoiser
  pipeline::DenoiserOptions dopt;
  int divisor = 16;
  std::string net = "desk";
  std::string resume;
  std::int64_t steps = 600;
  int epochs = 0;
  auto* train_den = app.add_subcommand("train-denoiser", "Train the image-domain U-Net");
  train_den->add_option("--manifest", manifest, "Experiment manifest or directory")->required();
  train_den->add_option("--colormap", colormap, "Colormap (default: manifest colormap)");
  train_den->add_option("--steps", steps, "Total optimizer steps");
  train_den->add_option("--epochs", epochs, "Alternative to --steps: passes over the training pairs");
  train_den->add_option("--scale-divisor", divisor, "Channel width divisor");
  train_den->add_option("--config", net, "full | desk");
  train_den->add_option("--seed", dopt.run.seed, "Seed for initialization, sampling and dropout");
  train_den->add_option("--lr", dopt.run.learning_rate, "Adam learning rate");
  train_den->add_option("--checkpoint-interval", dopt.run.checkpoint_interval, "Steps between checkpoints");
  train_den->add_option("--resume", resume, "Checkpoint to continue from");

  // enhance
  std::string in_path, enh_out, regnet_file, ckpt_file;
  std::string enh_tail = "pass-through";
  bool bypass = false;
  auto* enhance = app.add_subcommand("enhance", "Enhance a WAV file or a directory of WAV files");
  enhance->add_option("--manifest", manifest, "Experiment manifest or directory")->required();
  enhance->add_option("--in", in_path, "Noisy WAV file or directory")->required();
  enhance->add_option("--out", enh_out, "Output WAV file or directory")->required();
  enhance->add_option("--regnet", regnet_file, "Regnet file (default: manifest artifact)");
  enhance->add_option("--checkpoint", ckpt_file, "Denoiser checkpoint (default: manifest artifact)");
  enhance->add_option("--tail-policy", enh_tail, "pass-through | drop | zero-pad");
  enhance->add_flag("--bypass-denoiser", bypass, "Skip the U-Net (codec round trip only)");

  // evaluate
  std::string clean_dir, proc_dir, unproc_dir, pesq_csv, eval_out;
  bool concatenated = false;
  auto* evaluate = app.add_subcommand("evaluate", "Score processed audio against clean references");
  evaluate->add_option("--clean", clean_dir, "Clean reference directory")->required();
  evaluate->add_option("--processed", proc_dir, "Processed directory")->required();
  evaluate->add_option("--unprocessed", unproc_dir, "Unprocessed (noisy) directory for gains");
  evaluate->add_option("--external-pesq", pesq_csv, "CSV clip_id,pesq from an external PESQ tool");
  evaluate->add_flag("--concatenated", concatenated, "Score the concatenation instead of each clip");
  evaluate->add_option("--out", eval_out, "Directory for metrics CSV files");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fixtures) {
      fixtures::CorpusSpec spec;
      spec.seed = fx_seed;
      spec.files_per_split_train = fx_train;
      spec.files_per_split_test = fx_test;
      spec.seconds_per_file = fx_seconds;
      spec.noises.clear();
      for (const auto& n : SplitList(fx_noises)) spec.noises.push_back(fixtures::ParseNoiseKind(n));
      spec.snrs_db.clear();
      for (const auto& v : SplitList(fx_snrs)) spec.snrs_db.push_back(std::stod(v));
      fixtures::WriteCorpus(fx_out, spec);
      Print("corpus written to " + fx_out);
    } else if (*prepare) {
      prep.tail = pipeline::ParseTailPolicy(prep_tail);
      const auto m = pipeline::CmdPrepare(corpus, out_dir, prep, Print);
      Print("manifest " + (m.root / pipeline::kManifestName).string() + " revision " +
            std::to_string(m.revision));
    } else if (*spectro) {
      auto m = pipeline::LoadManifest(manifest);
      pipeline::CmdSpectrograms(m, colormap.empty() ? m.colormap : colormap, Print);
    } else if (*train_regnet) {
      auto m = pipeline::LoadManifest(manifest);
      pipeline::CmdTrainRegnet(m, colormap.empty() ? m.colormap : colormap, n_images, rcfg, Print);
    } else if (*bench) {
      const auto m = pipeline::LoadManifest(manifest);
      std::vector<std::string> names = SplitList(bench_list);
      if (names.empty()) {
        names = codec::ColormapNames();
        names.push_back("gray*");
      }
      const auto rows = pipeline::CmdColormapBench(m, names, bench_opt, Print);
      const fs::path csv = bench_csv.empty() ? m.Path("colormap_bench.csv") : fs::path(bench_csv);
      pipeline::WriteBenchCsv(rows, csv);
      Print("bench table written to " + csv.string());
    } else if (*train_den) {
      auto m = pipeline::LoadManifest(manifest);
      Require(net == "full" || net == "desk", ErrorCode::kInvalidArgument, "--config must be full or desk");
      dopt.config = net == "full" ? unet::UNetConfig::Full(divisor) : unet::UNetConfig::Desk(256, divisor);
      dopt.init_seed = dopt.run.seed;
      if (epochs > 0) {
        steps = static_cast<std::int64_t>(epochs) * static_cast<std::int64_t>(m.Split("train").size());
      }
      dopt.run.steps = steps;
      if (!resume.empty()) dopt.resume = resume;
      pipeline::CmdTrainDenoiser(m, colormap.empty() ? m.colormap : colormap, dopt, Print);
    } else if (*enhance) {
      const auto m = pipeline::LoadManifest(manifest);
      pipeline::EnhanceOptions eopt;
      eopt.tail = pipeline::ParseTailPolicy(enh_tail);
      eopt.bypass_denoiser = bypass;
      const std::string cmap = codec::Colormap(m.colormap).name;
      const std::string reg = ArtifactOr(m, "regnet/" + cmap, regnet_file);
      std::optional<fs::path> ckpt;
      if (!bypass) ckpt = ArtifactOr(m, "denoiser/" + cmap, ckpt_file);
      if (fs::is_directory(in_path)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(in_path)) {
          if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        Require(!files.empty(), ErrorCode::kInvalidArgument, "no WAV files in " + in_path);
        for (const auto& f : files) {
          pipeline::CmdEnhance(f, reg, ckpt, m, fs::path(enh_out) / f.filename(), eopt, Print);
        }
      } else {
        pipeline::CmdEnhance(in_path, reg, ckpt, m, enh_out, eopt, Print);
      }
    } else if (*evaluate) {
      pipeline::EvaluateOptions eopt;
      if (!unproc_dir.empty()) eopt.unprocessed_dir = unproc_dir;
      if (!pesq_csv.empty()) eopt.external_pesq = pesq_csv;
      eopt.concatenated = concatenated;
      const auto r = pipeline::CmdEvaluate(clean_dir, proc_dir, eopt, Print);
      Print(metrics::FormatAggregate("processed", r.processed_mean));
      if (r.unprocessed_mean) Print(metrics::FormatAggregate("unprocessed", *r.unprocessed_mean));
      if (r.gain) Print(metrics::FormatGainTable("gain", *r.gain));
      if (!eval_out.empty()) {
        fs::create_directories(eval_out);
        metrics::WriteReportsCsv(r.processed, fs::path(eval_out) / "processed.csv");
        if (!r.unprocessed.empty()) metrics::WriteReportsCsv(r.unprocessed, fs::path(eval_out) / "unprocessed.csv");
      }
    }
  } catch (const Error& e) {
    std::cerr << "error [" << ToString(e.code()) << "]: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
