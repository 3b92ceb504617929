// nesscore: batch conversions, rendering, corpus statistics, baseline
// evaluation and splitting.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "nesscore/apu.h"
#include "nesscore/corpus.h"
#include "nesscore/eval.h"
#include "nesscore/midi.h"
#include "nesscore/score.h"
#include "nesscore/synth.h"
#include "nesscore/vgm.h"

namespace fs = std::filesystem;
using namespace nesscore;

namespace {

int fail(const std::string& kind, const std::string& msg) {
  std::string line = msg;
  for (char& c : line) {
    if (c == '\n') c = ' ';
  }
  std::cerr << "nesscore: error: " << kind << ": " << line << '\n';
  return 1;
}

void require_readable(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw std::runtime_error("input `" + p.string() + "` is not a readable file");
}

std::vector<std::uint8_t> as_bytes(const std::string& s) { return {s.begin(), s.end()}; }

std::array<double, 3> parse_ratios(const std::string& text) {
  std::array<double, 3> r{};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t end = i < 2 ? text.find(':', pos) : text.size();
    if (end == std::string::npos) throw std::invalid_argument("ratios must look like 8:1:1");
    std::size_t used = 0;
    const std::string part = text.substr(pos, end - pos);
    r[i] = std::stod(part, &used);
    if (used != part.size() || r[i] < 0) throw std::invalid_argument("bad ratio `" + part + "`");
    pos = end + 1;
  }
  if (r[0] + r[1] + r[2] <= 0) throw std::invalid_argument("ratios sum to zero");
  return r;
}

// Renders a VGM log as recorded, or synthesizes any other score format.
synth::PcmBuffer render_input(const fs::path& in, double rate) {
  auto bytes = corpus::read_file(in);
  if (vgm::is_gzip(bytes)) bytes = vgm::gunzip(bytes);
  if (bytes.size() >= 4 && std::string(bytes.begin(), bytes.begin() + 4) == "Vgm ") {
    return synth::render_writes(vgm::flatten_to_writes(vgm::parse_vgm(bytes)));
  }
  return synth::render_writes(synth::score_to_writes(corpus::load_score(in, rate)));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NES music scores: VGM extraction, MIDI, rendering and baseline evaluation"};
  app.require_subcommand(1);

  std::string in, out, manifest, train_manifest, task = "separated", model = "random", ratios = "8:1:1";
  std::string format = "json";
  double rate = kDefaultRateHz;
  std::uint64_t seed = 0;

  auto add_rate = [&](CLI::App* c) {
    c->add_option("--rate", rate, "frame rate in Hz")->check(CLI::Range(1e-6, 44100.0));
  };

  auto* vgm2score = app.add_subcommand("vgm2score", "VGM/VGZ log to NESSCORE text");
  vgm2score->add_option("input", in)->required();
  vgm2score->add_option("output", out)->required();
  add_rate(vgm2score);

  auto* score2midi = app.add_subcommand("score2midi", "NESSCORE text to MIDI");
  score2midi->add_option("input", in)->required();
  score2midi->add_option("output", out)->required();

  auto* midi2score = app.add_subcommand("midi2score", "MIDI to NESSCORE text");
  midi2score->add_option("input", in)->required();
  midi2score->add_option("output", out)->required();
  add_rate(midi2score);

  auto* render = app.add_subcommand("render", "score or VGM to 44.1 kHz WAV");
  render->add_option("input", in)->required();
  render->add_option("output", out)->required();
  add_rate(render);

  auto* stats = app.add_subcommand("stats", "corpus statistics as JSON");
  stats->add_option("manifest", manifest)->required();
  add_rate(stats);

  auto* eval = app.add_subcommand("eval", "baseline NLL and accuracy");
  eval->add_option("manifest", manifest, "evaluation corpus")->required();
  eval->add_option("--task", task)->check(CLI::IsMember({"separated", "expressive", "blended"}));
  eval->add_option("--model", model)
      ->check(CLI::IsMember({"random", "unigram", "bigram", "note-unigram", "chord-unigram"}));
  eval->add_option("--train", train_manifest, "training corpus (defaults to the evaluation corpus)");
  eval->add_option("--format", format)->check(CLI::IsMember({"json", "table"}));
  add_rate(eval);

  auto* split = app.add_subcommand("split", "composer-disjoint train/valid/test split");
  split->add_option("manifest", manifest)->required();
  split->add_option("--ratios", ratios);
  split->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("Usage", e.what());
  }

  try {
    if (*vgm2score) {
      require_readable(in);
      auto bytes = corpus::read_file(in);
      if (vgm::is_gzip(bytes)) bytes = vgm::gunzip(bytes);
      const auto stream = vgm::flatten_to_writes(vgm::parse_vgm(bytes));
      const auto score = downsample(apu::extract_timeline(stream), rate);
      corpus::write_file(out, as_bytes(write_score_text(score)));
    } else if (*score2midi) {
      require_readable(in);
      corpus::write_file(out, midi::score_to_midi(corpus::load_score(in, rate)));
    } else if (*midi2score) {
      require_readable(in);
      const auto bytes = corpus::read_file(in);
      corpus::write_file(out, as_bytes(write_score_text(midi::midi_to_score(bytes, rate))));
    } else if (*render) {
      require_readable(in);
      corpus::write_file(out, synth::write_wav(render_input(in, rate)));
    } else if (*stats) {
      require_readable(manifest);
      const auto entries = corpus::read_manifest(manifest);
      const auto scores = corpus::load_all(entries, rate);
      std::cout << eval::stats_to_json(eval::corpus_stats(scores)).dump(2) << '\n';
    } else if (*eval) {
      require_readable(manifest);
      const auto t = eval::parse_task(task);
      const auto m = eval::parse_model(model);
      const auto scores = corpus::load_all(corpus::read_manifest(manifest), rate);
      std::vector<ExpressiveScore> train;
      if (!train_manifest.empty()) {
        require_readable(train_manifest);
        train = corpus::load_all(corpus::read_manifest(train_manifest), rate);
      }
      const auto fitted = eval::fit(m, train_manifest.empty() ? scores : train, t);
      const auto report = eval::evaluate(fitted, scores, t);
      if (format == "table") {
        std::cout << eval::report_to_table(std::span(&report, 1));
      } else {
        std::cout << eval::report_to_json(report).dump(2) << '\n';
      }
    } else if (*split) {
      require_readable(manifest);
      const auto r = parse_ratios(ratios);
      const auto entries = corpus::to_corpus_entries(corpus::read_manifest(manifest));
      const auto subsets = split_corpus(entries, r, seed);
      nlohmann::json j = {{"train", nlohmann::json::array()},
                          {"valid", nlohmann::json::array()},
                          {"test", nlohmann::json::array()}};
      for (std::size_t i = 0; i < entries.size(); ++i) {
        j[std::string(subset_name(subsets[i]))].push_back(entries[i].song_id);
      }
      std::cout << j.dump(2) << '\n';
    }
  } catch (const vgm::VgmError& e) {
    return fail(vgm::error_kind_name(e.kind()), e.what());
  } catch (const apu::ApuError& e) {
    return fail(e.kind() == apu::ApuError::Kind::NoteOutOfRange ? "NoteOutOfRange" : "RegisterOutOfRange", e.what());
  } catch (const ScoreFormatError& e) {
    return fail(e.kind() == ScoreFormatError::Kind::MalformedHeader ? "MalformedHeader" : "BadFieldValue", e.what());
  } catch (const midi::MidiError& e) {
    return fail(e.kind() == midi::MidiError::Kind::NotSmf ? "NotSmf" : "UnmappableEvent", e.what());
  } catch (const eval::EvalError& e) {
    static constexpr const char* kNames[] = {"EmptySequence", "EmptyCorpus", "AlphabetMismatch", "UnsupportedModel"};
    return fail(kNames[static_cast<int>(e.kind())], e.what());
  } catch (const corpus::ManifestError& e) {
    return fail("BadManifest", e.what());
  } catch (const std::invalid_argument& e) {
    return fail("InvalidArgument", e.what());
  } catch (const std::exception& e) {
    return fail("IoError", e.what());
  }
  return 0;
}
