// Copyright 2026 The attsample Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// attsample: command-line front end for the library.
//
//   attsample flops --arch arch.json
//   attsample sampler build --m 1000000 --seed 42 --out tables.json
//   attsample sampler draw --tables tables.json --target-mflops 350 --k 50
//   attsample predictor pairs --out pairs.csv
//   attsample predictor fit --train pairs.csv --seed 0 --out rf.json
//   attsample predictor eval --model rf.json --test pairs.csv
//   attsample train-sim --strategy "BestUp-3 (loss)" --out results/
//   attsample search --constraints 250,350,450 --scorer supernet --out results/
//   attsample report --out results/
//   attsample pipeline --config run.json --out results/

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "attsample/experiment.hpp"

namespace fs = std::filesystem;
using namespace attsample;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

ExperimentConfig load(const Globals& g) {
  ExperimentConfig c;
  try {
    if (!g.config.empty()) c = load_config(g.config);
  } catch (const std::exception& e) {
    throw StageError("config", e.what());
  }
  if (g.seed) c.seed = *g.seed;
  if (!g.out.empty()) c.out = g.out;
  return c;
}

ArchitectureConfig read_arch(const SearchSpace& space, const std::string& what) {
  if (what == "smallest") return smallest_arch(space);
  if (what == "largest") return largest_arch(space);
  return arch_from_json(space, read_json(what));
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw StageError("output", "cannot create " + p.string() + ": " + ec.message());
}

// One row set of a pairs CSV, optionally filtered on its split column.
EncodedPairs pairs_for(const fs::path& path, const std::string& split) {
  const auto t = read_csv(path);
  auto it = std::find(t.header.begin(), t.header.end(), "split");
  if (it == t.header.end()) return pairs_from_csv(t);
  CsvTable sub = t;
  sub.rows.clear();
  const auto col = static_cast<std::size_t>(it - t.header.begin());
  for (const auto& r : t.rows)
    if (r[col] == split) sub.rows.push_back(r);
  if (sub.rows.empty()) throw Error(path.string() + ": no rows with split=" + split);
  return pairs_from_csv(sub);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attentive sampling simulator for two-stage architecture search"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Root seed (overrides the config)");
  app.add_option("--out", g.out, "Output directory or file");

  // flops
  auto* flops = app.add_subcommand("flops", "Total MFLOPs and a per-layer breakdown (CSV)");
  std::string arch_path;
  flops->add_option("--arch", arch_path, "Architecture JSON, or 'smallest' / 'largest'")->required();

  // sampler
  auto* sampler = app.add_subcommand("sampler", "FLOPs-conditioned sampler tables");
  sampler->require_subcommand(1);
  auto* sbuild = sampler->add_subcommand("build", "Build tables from m uniform samples");
  std::uint64_t m = 1'000'000;
  double step = 25.0;
  sbuild->add_option("--m", m, "Number of uniform samples")->check(CLI::PositiveNumber);
  sbuild->add_option("--step", step, "Bin width in MFLOPs")->check(CLI::PositiveNumber);
  auto* sdraw = sampler->add_subcommand("draw", "Draw architectures near a FLOPs target (JSON lines)");
  std::string tables_path;
  double target = 0;
  int k = 1;
  sdraw->add_option("--tables", tables_path, "Tables JSON (built from the config when omitted)");
  sdraw->add_option("--target-mflops", target, "Target MFLOPs")->required();
  sdraw->add_option("--k", k, "Number of architectures")->check(CLI::PositiveNumber);

  // predictor
  auto* pred = app.add_subcommand("predictor", "Random-forest accuracy predictor");
  pred->require_subcommand(1);
  auto* ppairs = pred->add_subcommand("pairs", "Sample and evaluate predictor pairs under the early state");
  auto* pfit = pred->add_subcommand("fit", "Fit a forest on the train rows of a pairs CSV");
  std::string train_path, model_path, test_path;
  pfit->add_option("--train", train_path, "Pairs CSV")->required()->check(CLI::ExistingFile);
  auto* peval = pred->add_subcommand("eval", "Kendall tau of a forest on the test rows of a pairs CSV");
  peval->add_option("--model", model_path, "Forest JSON")->required()->check(CLI::ExistingFile);
  peval->add_option("--test", test_path, "Pairs CSV")->required()->check(CLI::ExistingFile);

  // training, search, report, pipeline
  auto* train = app.add_subcommand("train-sim", "Simulated supernet training per strategy");
  std::vector<std::string> strategies;
  train->add_option("--strategy", strategies, "Strategy name (repeatable; default: the config list)");
  auto* search = app.add_subcommand("search", "Evolutionary search per FLOPs constraint");
  std::vector<double> constraints;
  std::string scorer;
  search->add_option("--constraints", constraints, "MFLOPs constraints")->delimiter(',');
  search->add_option("--scorer", scorer, "supernet or predictor")->check(CLI::IsMember({"supernet", "predictor"}));
  auto* report = app.add_subcommand("report", "Regenerate report.md from a results directory (to stdout)");
  auto* pipeline = app.add_subcommand("pipeline", "Run every stage and write all artifacts");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*flops) {
      const auto cfg = load(g);
      const auto space = make_space(cfg);
      ArchitectureConfig arch;
      try {
        arch = read_arch(space, arch_path);
      } catch (const std::exception& e) {
        throw StageError("flops", e.what());
      }
      std::cout << "total_mflops," << fmt_num(arch_flops(space, arch).value) << '\n';
      std::cout << "layer,kind,in_ch,out_ch,kernel,groups,out_hw,macs\n";
      for (const auto& l : flops_breakdown(space, arch))
        std::cout << l.name() << ',' << to_string(l.kind) << ',' << l.in_ch << ',' << l.out_ch << ',' << l.kernel
                  << ',' << l.groups << ',' << l.out_hw << ',' << l.macs << '\n';
      return 0;
    }

    if (*sbuild) {
      auto cfg = load(g);
      if (sbuild->count("--m")) cfg.sampler_m = m;
      if (sbuild->count("--step")) cfg.bin_step = step;
      Pipeline p(cfg, &std::cerr);
      auto j = tables_to_json(p.tables());
      j["run_id"] = p.id();
      const std::string text = j.dump() + "\n";
      if (g.out.empty()) {
        std::cout << text;
      } else {
        write_text(g.out, text);
      }
      return 0;
    }

    if (*sdraw) {
      const auto cfg = load(g);
      Pipeline p(cfg, &std::cerr);
      if (!tables_path.empty()) {
        try {
          p.set_tables(tables_from_json(p.space(), read_json(tables_path)));
        } catch (const std::exception& e) {
          throw StageError("sampler", e.what());
        }
      }
      const auto& t = p.tables();
      const int bin = t.prior.binning().bin(target);
      if (!t.conditional.populated(bin)) throw StageError("sampler", "bin of " + fmt_num(target) + " MFLOPs is empty");
      Rng rng = p.rng("sampler.draw");
      for (int i = 0; i < k; ++i) {
        SampleResult r;
        try {
          r = rejection_sample(p.space(), t.conditional, bin, kDefaultFactorizedTrials, rng);
        } catch (const std::exception& e) {
          throw StageError("sampler", e.what());
        }
        nlohmann::json j{{"mflops", arch_flops(p.space(), r.arch).value},
                         {"trials", r.trials},
                         {"arch", arch_to_json(p.space(), r.arch)}};
        std::cout << j.dump() << '\n';
      }
      return 0;
    }

    if (*ppairs) {
      const auto cfg = load(g);
      Pipeline p(cfg, &std::cerr);
      ensure_dir(cfg.out);
      p.write_predictor(cfg.out);
      std::cout << fs::path(cfg.out) / "pairs.csv" << '\n';
      return 0;
    }

    if (*pfit) {
      const auto cfg = load(g);
      try {
        const auto data = pairs_for(train_path, "train");
        const auto space = make_space(cfg);
        auto model = fit_encoded(data.encoded, data.accuracy, make_featurizer(space, cfg.predictor.featurization),
                                 cfg.predictor.forest, cfg.seed);
        auto j = predictor_to_json(model);
        j["run_id"] = read_csv(train_path).run_id;
        const std::string text = j.dump() + "\n";
        if (g.out.empty()) {
          std::cout << text;
        } else {
          write_text(g.out, text);
        }
      } catch (const StageError&) {
        throw;
      } catch (const std::exception& e) {
        throw StageError("predictor", e.what());
      }
      return 0;
    }

    if (*peval) {
      try {
        const auto model = predictor_from_json(read_json(model_path));
        const auto data = pairs_for(test_path, "test");
        std::vector<double> pr;
        for (const auto& e : data.encoded) pr.push_back(model.predict(std::span<const int>(e)));
        std::cout << "n," << pr.size() << "\ntau," << fmt_num(kendall_tau(pr, data.accuracy)) << '\n';
      } catch (const std::exception& e) {
        throw StageError("predictor", e.what());
      }
      return 0;
    }

    if (*train) {
      const auto cfg = load(g);
      Pipeline p(cfg, &std::cerr);
      ensure_dir(cfg.out);
      p.training(strategies.empty() ? cfg.strategies : strategies);
      p.write_training(cfg.out);
      p.write_manifest(cfg.out);
      return 0;
    }

    if (*search) {
      auto cfg = load(g);
      if (!constraints.empty()) cfg.search.constraints = constraints;
      if (!scorer.empty()) cfg.search.scorer = scorer;
      Pipeline p(cfg, &std::cerr);
      ensure_dir(cfg.out);
      p.write_search(cfg.out);
      p.write_manifest(cfg.out);
      return 0;
    }

    if (*report) {
      const auto cfg = load(g);
      try {
        std::cout << Pipeline::render_report(cfg.out);
      } catch (const std::exception& e) {
        throw StageError("report", e.what());
      }
      return 0;
    }

    if (*pipeline) {
      const auto cfg = load(g);
      Pipeline p(cfg, &std::cerr);
      p.run_all(cfg.out);
      std::cerr << "[attsample] run " << p.id() << " written to " << cfg.out << '\n';
      return 0;
    }
  } catch (const StageError& e) {
    std::cerr << "attsample: stage '" << e.stage() << "' failed: " << e.detail() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "attsample: stage 'cli' failed: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
