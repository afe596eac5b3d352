#include "graphdiff/commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "graphdiff/conditioning.hpp"
#include "graphdiff/error.hpp"
#include "graphdiff/smiles.hpp"

namespace graphdiff {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kInitStream = 0x1A17;

void write_json(const fs::path &p, const json &j) { write_text(p, j.dump(2) + "\n"); }

void write_run_file(const fs::path &dir, const std::string &command, json resolved) {
  json j;
  j["command"] = command;
  j["tool_version"] = kToolVersion;
  j["config"] = std::move(resolved);
  write_json(dir / "run.json", j);
}

json checkpoint_meta(const Model &m, const RunConfig &cfg, int epoch, double best_val, int best_epoch) {
  json meta;
  meta["model"] = model_meta(m);
  meta["run"] = to_json(cfg);
  meta["epoch"] = epoch;
  meta["best_val_loss"] = std::isfinite(best_val) ? json(best_val) : json(nullptr);
  meta["best_epoch"] = best_epoch;
  meta["tool_version"] = kToolVersion;
  return meta;
}

std::vector<MolecularGraph> read_smiles_file(const fs::path &p, const AtomVocab &vocab, int *bad = nullptr) {
  std::istringstream in(read_text(p));
  std::vector<MolecularGraph> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      out.push_back(parse_smiles(line, vocab));
    } catch (const SyntaxError &) {
      // kept as an empty (invalid) molecule so counts stay aligned
      out.emplace_back();
      if (bad) ++*bad;
    }
  }
  return out;
}

std::vector<MolecularGraph> split_graphs(const Dataset &d, const std::vector<int> &idx, const AtomVocab &vocab) {
  std::vector<MolecularGraph> out;
  for (int i : idx) out.push_back(parse_smiles(d.records[i].smiles, vocab));
  return out;
}

std::vector<ConditionSet> read_conditions(const fs::path &p, const std::vector<ConditionSpec> &specs) {
  std::string text = read_text(p);
  std::vector<json> items;
  try {
    json j = json::parse(text);
    if (j.is_array()) {
      for (auto &e : j) items.push_back(e);
    } else {
      items.push_back(j);
    }
  } catch (const json::parse_error &) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        items.push_back(json::parse(line));
      } catch (const json::parse_error &e) {
        throw SchemaError(p.string() + ": " + e.what());
      }
    }
  }
  std::vector<ConditionSet> out;
  for (const auto &e : items) {
    try {
      out.push_back(conditions_from_json(e, specs));
    } catch (const SchemaError &ex) {
      throw CompatibilityError(std::string("conditions do not match the checkpoint: ") + ex.what());
    }
  }
  if (out.empty()) throw EmptyInput("conditions file is empty");
  return out;
}

}  // namespace

Model load_model(const fs::path &checkpoint) {
  Checkpoint ck = load_checkpoint(checkpoint);
  if (!ck.meta.contains("model")) throw CompatibilityError("checkpoint carries no model description");
  return model_from_meta(ck.meta.at("model"), std::move(ck.params));
}

TrainRunResult train_run(const RunConfig &cfg, const fs::path &config_dir, const fs::path &out, bool resume,
                         int threads) {
  fs::create_directories(out);
  Dataset d = resolve_dataset(cfg, config_dir);
  TrainConfig tc = cfg.train;
  tc.threads = threads;
  const fs::path last = out / "checkpoint-last.json", best = out / "checkpoint-best.json",
                 log_path = out / "log.jsonl";
  Model m;
  int start_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  std::vector<std::string> kept_log;
  if (resume) {
    Checkpoint ck = load_checkpoint(last);
    // the epoch budget may grow; everything else must match
    auto without_epochs = [](json j) {
      j["train"].erase("epochs");
      return j;
    };
    if (!ck.meta.contains("run") || without_epochs(ck.meta.at("run")) != without_epochs(to_json(cfg)))
      throw CompatibilityError("checkpoint was written with a different config");
    m = model_from_meta(ck.meta.at("model"), std::move(ck.params));
    start_epoch = ck.meta.at("epoch").get<int>();
    if (!ck.meta.at("best_val_loss").is_null()) best_val = ck.meta.at("best_val_loss").get<double>();
    best_epoch = ck.meta.at("best_epoch").get<int>();
    if (fs::exists(log_path)) {
      std::istringstream in(read_text(log_path));
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (json::parse(line).at("epoch").get<int>() <= start_epoch) kept_log.push_back(line);
      }
    }
  } else {
    m = make_model(d, cfg.model, cfg.noise, derive_seed(cfg.seed, kInitStream));
    save_checkpoint(last, m.params, checkpoint_meta(m, cfg, 0, best_val, 0), cfg.checkpoint_dtype);
    save_checkpoint(best, m.params, checkpoint_meta(m, cfg, 0, best_val, 0), cfg.checkpoint_dtype);
  }
  write_run_file(out, "train", to_json(cfg));
  save_dataset(d, out / "dataset.json");
  {
    std::string text;
    for (const auto &l : kept_log) text += l + "\n";
    write_text(log_path, text);
  }
  TrainRunResult result;
  auto on_epoch = [&](const EpochLog &e, const Model &mm) {
    std::ofstream logf(log_path, std::ios::app);
    logf << to_json(e).dump() << "\n";
    if (!logf) throw IoError("cannot append to " + log_path.string());
    if (e.val_loss < best_val) {
      best_val = e.val_loss;
      best_epoch = e.epoch;
      save_checkpoint(best, mm.params, checkpoint_meta(mm, cfg, e.epoch, best_val, best_epoch),
                      cfg.checkpoint_dtype);
    }
    save_checkpoint(last, mm.params, checkpoint_meta(mm, cfg, e.epoch, best_val, best_epoch),
                    cfg.checkpoint_dtype);
    return true;
  };
  TrainResult tr = train(m, d, tc, cfg.seed, start_epoch, on_epoch);
  result.log = tr.log;
  result.model = std::move(m);
  return result;
}

std::vector<AblationRow> run_ablation(const RunConfig &base, const Dataset &d, int epochs, int n_samples,
                                      int threads) {
  struct Variant {
    std::string name;
    NumericEncoder encoder;
    CondMode mode;
    CouplingMode coupling;
  };
  const std::vector<Variant> variants = {
      {"encoder=cluster", NumericEncoder::kCluster, CondMode::kAdaLN, CouplingMode::kSelfPreserving},
      {"encoder=direct", NumericEncoder::kDirect, CondMode::kAdaLN, CouplingMode::kSelfPreserving},
      {"encoder=interval", NumericEncoder::kInterval, CondMode::kAdaLN, CouplingMode::kSelfPreserving},
      {"mode=in_context", NumericEncoder::kCluster, CondMode::kInContext, CouplingMode::kSelfPreserving},
      {"mode=cross_attention", NumericEncoder::kCluster, CondMode::kCrossAttention, CouplingMode::kSelfPreserving},
      {"coupling=literal", NumericEncoder::kCluster, CondMode::kAdaLN, CouplingMode::kLiteral},
  };
  const std::vector<int> &test = d.splits.test.empty() ? d.splits.train : d.splits.test;
  std::vector<AblationRow> rows;
  for (const auto &v : variants) {
    auto t0 = std::chrono::steady_clock::now();
    Dataset dv = d;
    for (auto &s : dv.specs) {
      if (s.numeric()) s.encoder = v.encoder;
    }
    DenoiserConfig mc = base.model;
    mc.mode = v.mode;
    NoiseConfig nc = base.noise;
    nc.coupling = v.coupling;
    Model m = make_model(dv, mc, nc, derive_seed(base.seed, kInitStream));
    TrainConfig tc = base.train;
    tc.epochs = epochs;
    tc.val_samples = 0;
    tc.threads = threads;
    AblationRow row;
    row.variant = v.name;
    row.encoder = to_string(v.encoder);
    row.mode = to_string(v.mode);
    row.coupling = to_string(v.coupling);
    try {
      TrainResult tr = train(m, dv, tc, base.seed);
      row.train_loss = tr.log.empty() ? 0.0 : tr.log.back().train_loss;
      row.val_loss = tr.log.empty() ? 0.0 : tr.log.back().val_loss;
      std::vector<ConditionSet> conds;
      for (int k = 0; k < n_samples; ++k) conds.push_back(dv.records[test[k % test.size()]].conditions);
      SampleConfig sc = base.sample;
      sc.seed = derive_seed(base.seed, 0xAB1A);
      sc.threads = threads;
      auto samples = sample_many(m, conds, sc);
      std::vector<MolecularGraph> gen;
      for (auto &s : samples) gen.push_back(s.graph);
      row.validity = validity(gen, dv.vocab, Conversion::kAsIs);
      row.scores = condition_error(gen, conds, dv.specs, exact_oracle_for(dv.specs, dv.vocab));
      row.finite = std::isfinite(row.train_loss) && std::isfinite(row.val_loss);
    } catch (const NumericError &) {
      row.finite = false;
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(row);
  }
  return rows;
}

json to_json(const AblationRow &r) {
  json scores = json::object();
  for (const auto &s : r.scores) scores[s.name] = {{"metric", s.numeric ? "mae" : "accuracy"}, {"value", s.value}};
  return {{"variant", r.variant},       {"encoder", r.encoder},   {"conditioning_mode", r.mode},
          {"coupling_mode", r.coupling}, {"train_loss", r.train_loss}, {"val_loss", r.val_loss},
          {"validity", r.validity},     {"conditions", scores},  {"finite", r.finite},
          {"seconds", r.seconds}};
}

std::string ablation_table(const std::vector<AblationRow> &rows) {
  std::ostringstream os;
  os << std::left << std::setw(22) << "variant" << std::right << std::setw(11) << "train_loss" << std::setw(10)
     << "val_loss" << std::setw(10) << "validity";
  if (!rows.empty()) {
    for (const auto &s : rows[0].scores) os << std::setw(16) << (s.name + (s.numeric ? " mae" : " acc"));
  }
  os << "\n" << std::fixed << std::setprecision(4);
  for (const auto &r : rows) {
    os << std::left << std::setw(22) << r.variant << std::right << std::setw(11) << r.train_loss << std::setw(10)
       << r.val_loss << std::setw(10) << r.validity;
    for (const auto &s : r.scores) os << std::setw(16) << s.value;
    os << "\n";
  }
  return os.str();
}

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Multi-conditional discrete graph diffusion for molecules", "graphdiff"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  int threads = 1;

  // ingest
  auto *ingest = app.add_subcommand("ingest", "Parse a CSV of SMILES and properties into a dataset bundle");
  std::string csv, out_dir;
  std::uint64_t seed = 0;
  int n_max = 0;
  ingest->add_option("--csv", csv, "CSV with a smiles column")->required();
  ingest->add_option("--out", out_dir, "Output directory")->required();
  ingest->add_option("--seed", seed, "Split seed");
  ingest->add_option("--n-max", n_max, "Maximum atom count (0 = largest molecule)");

  // toy
  auto *toy = app.add_subcommand("toy", "Generate a synthetic dataset with exact property oracles");
  std::string spec_path;
  std::optional<int> toy_n, toy_max_atoms;
  std::optional<std::uint64_t> toy_seed;
  toy->add_option("--spec", spec_path, "Toy spec JSON");
  toy->add_option("--n", toy_n, "Number of molecules");
  toy->add_option("--max-atoms", toy_max_atoms, "Largest molecule");
  toy->add_option("--seed", toy_seed, "Generator seed");
  toy->add_option("--out", out_dir, "Output directory")->required();

  // train
  auto *trainc = app.add_subcommand("train", "Train a denoiser from a run config");
  std::string config_path;
  bool resume = false;
  trainc->add_option("--config", config_path, "Run config JSON")->required();
  trainc->add_option("--out", out_dir, "Output directory")->required();
  trainc->add_flag("--resume", resume, "Continue from <out>/checkpoint-last.json");
  trainc->add_option("--threads", threads, "Worker threads (1 = bit-reproducible)");

  // sample
  auto *samplec = app.add_subcommand("sample", "Generate molecules from a checkpoint");
  std::string ckpt, cond_file, conversion = "connect_all";
  int count = 10, n_atoms = 0;
  double s_guide = 2.0;
  samplec->add_option("--checkpoint", ckpt, "Checkpoint manifest")->required();
  samplec->add_option("--conditions-file", cond_file, "JSON object, array or JSON lines of conditions");
  samplec->add_option("--count", count, "Number of molecules");
  samplec->add_option("--s-guide", s_guide, "Guidance scale");
  samplec->add_option("--conversion", conversion, "connect_all, lcc or as_is");
  samplec->add_option("--n-atoms", n_atoms, "Fixed atom count (0 = training histogram)");
  samplec->add_option("--seed", seed, "Sampling seed");
  samplec->add_option("--out", out_dir, "Output directory")->required();
  samplec->add_option("--threads", threads, "Worker threads");

  // eval
  auto *evalc = app.add_subcommand("eval", "Score generated molecules");
  std::string gen_path, ref_path, train_path, oracle_kind = "exact", targets_path;
  int knn_k = 5;
  evalc->add_option("--gen", gen_path, "Generated SMILES, one per line")->required();
  evalc->add_option("--targets", targets_path, "Sidecar with conditioning values (default: <gen>.json)");
  evalc->add_option("--ref", ref_path, "Reference SMILES file or dataset bundle (test split)");
  evalc->add_option("--train", train_path, "Training dataset bundle (coverage, k-NN fit)");
  evalc->add_option("--oracle", oracle_kind, "exact or knn");
  evalc->add_option("--knn-k", knn_k, "Neighbors for the k-NN oracle");
  evalc->add_option("--out", out_dir, "Output directory")->required();

  // noise-inspect
  auto *noisec = app.add_subcommand("noise-inspect", "Forward-process marginals versus the stationary law");
  std::string dataset_path, coupling = "self_preserving";
  std::optional<int> t_opt;
  int T = 200, n_samples = 10000;
  double lambda = 1.0;
  noisec->add_option("--dataset", dataset_path, "Dataset bundle")->required();
  noisec->add_option("--t", t_opt, "Timestep (default T)");
  noisec->add_option("--T", T, "Schedule length");
  noisec->add_option("--samples", n_samples, "Corrupted samples");
  noisec->add_option("--lambda", lambda, "Cross-block weight");
  noisec->add_option("--coupling", coupling, "self_preserving or literal");
  noisec->add_option("--seed", seed, "Seed");
  noisec->add_option("--out", out_dir, "Output directory (default: print)");

  // rank
  auto *rankc = app.add_subcommand("rank", "Single- versus multi-conditional rank experiment");
  std::vector<std::string> singles;
  std::string multi;
  int cases = 20, per_condition = 30;
  rankc->add_option("--single-ckpts", singles, "One single-condition checkpoint per condition")
      ->required()
      ->delimiter(',');
  rankc->add_option("--multi-ckpt", multi, "Multi-condition checkpoint")->required();
  rankc->add_option("--dataset", dataset_path, "Dataset bundle (test split supplies cases)")->required();
  rankc->add_option("--cases", cases, "Number of test cases");
  rankc->add_option("--n-per-condition", per_condition, "Molecules per single-condition list");
  rankc->add_option("--s-guide", s_guide, "Guidance scale");
  rankc->add_option("--seed", seed, "Seed");
  rankc->add_option("--out", out_dir, "Output directory")->required();
  rankc->add_option("--threads", threads, "Worker threads");

  // gradcheck
  auto *gradc = app.add_subcommand("gradcheck", "Finite-difference check of the training loss gradient");
  std::string mode = "adaln";
  gradc->add_option("--seed", seed, "Seed");
  gradc->add_option("--mode", mode, "Conditioning mode");

  // ablate
  auto *ablatec = app.add_subcommand("ablate", "Encoder, conditioning-mode and coupling ablations");
  std::optional<int> ab_epochs;
  int ab_samples = 32;
  ablatec->add_option("--config", config_path, "Run config JSON")->required();
  ablatec->add_option("--epochs", ab_epochs, "Override training epochs");
  ablatec->add_option("--samples", ab_samples, "Molecules sampled per variant");
  ablatec->add_option("--out", out_dir, "Output directory")->required();
  ablatec->add_option("--threads", threads, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (threads < 1) throw RangeError("--threads must be >= 1");
    const fs::path outp = out_dir;
    if (*ingest) {
      LoadOptions opt;
      opt.n_max = n_max;
      Dataset d = load_dataset(csv, opt, seed);
      fs::create_directories(outp);
      save_dataset(d, outp / "dataset.json");
      write_text(outp / "skipped.jsonl", skip_report_jsonl(d.skipped));
      write_run_file(outp, "ingest", {{"csv", csv}, {"seed", seed}, {"n_max", n_max}});
      out << "records " << d.records.size() << " skipped " << d.skipped.size() << "\n";
    } else if (*toy) {
      ToySpec spec;
      if (!spec_path.empty()) {
        try {
          spec = read_json(spec_path).get<ToySpec>();
        } catch (const json::exception &e) {
          throw SchemaError(std::string("toy spec: ") + e.what());
        }
      }
      if (toy_n) spec.n_molecules = *toy_n;
      if (toy_max_atoms) spec.max_atoms = *toy_max_atoms;
      if (toy_seed) spec.seed = *toy_seed;
      Dataset d = gen_toy_dataset(spec);
      fs::create_directories(outp);
      save_dataset(d, outp / "dataset.json");
      write_run_file(outp, "toy", spec);
      out << "records " << d.records.size() << "\n";
    } else if (*trainc) {
      RunConfig cfg = load_run_config(config_path);
      auto res = train_run(cfg, fs::path(config_path).parent_path(), outp, resume, threads);
      for (const auto &e : res.log) out << to_json(e).dump() << "\n";
    } else if (*samplec) {
      Model m = load_model(ckpt);
      std::vector<ConditionSet> conds;
      if (!cond_file.empty()) {
        auto given = read_conditions(cond_file, m.specs());
        for (int k = 0; k < count; ++k) conds.push_back(given[k % given.size()]);
      } else {
        conds.assign(count, ConditionSet::null(m.specs().size()));
      }
      SampleConfig sc;
      sc.s_guide = s_guide;
      sc.n_atoms = n_atoms;
      sc.conversion = conversion_from_string(conversion);
      sc.seed = seed;
      sc.threads = threads;
      auto samples = sample_many(m, conds, sc);
      std::string text;
      json cond_json = json::array();
      for (int k = 0; k < count; ++k) {
        text += write_smiles(samples[k].graph, m.vocab) + "\n";
        cond_json.push_back(conditions_to_json(conds[k], m.specs()));
      }
      fs::create_directories(outp);
      write_text(outp / "samples.smi", text);
      json resolved = {{"checkpoint", ckpt}, {"conditions_file", cond_file}, {"count", count},
                       {"s_guide", s_guide},  {"conversion", conversion},    {"n_atoms", n_atoms},
                       {"seed", seed}};
      json sidecar = resolved;
      sidecar["specs"] = m.specs();
      sidecar["vocab"] = m.vocab.symbols();
      sidecar["conditions"] = cond_json;
      sidecar["tool_version"] = kToolVersion;
      write_json(outp / "samples.json", sidecar);
      write_run_file(outp, "sample", resolved);
      out << "wrote " << count << " molecules to " << (outp / "samples.smi").string() << "\n";
    } else if (*evalc) {
      std::optional<Dataset> train_ds;
      AtomVocab vocab = AtomVocab::standard();
      if (!train_path.empty()) {
        train_ds = load_dataset_bundle(train_path);
        vocab = train_ds->vocab;
      }
      int bad = 0;
      auto gen = read_smiles_file(gen_path, vocab, &bad);
      if (gen.empty()) throw EmptyInput("no generated molecules in " + gen_path);
      std::vector<MolecularGraph> ref, train_mols;
      if (!ref_path.empty()) {
        if (fs::path(ref_path).extension() == ".json") {
          Dataset rd = load_dataset_bundle(ref_path);
          ref = split_graphs(rd, rd.splits.test.empty() ? rd.splits.train : rd.splits.test, vocab);
        } else {
          ref = read_smiles_file(ref_path, vocab);
        }
        if (ref.empty()) throw EmptyInput("reference set is empty");
      }
      if (train_ds) train_mols = split_graphs(*train_ds, train_ds->splits.train, vocab);
      fs::path tpath = targets_path.empty() ? fs::path(gen_path).replace_extension(".json") : fs::path(targets_path);
      std::vector<ConditionSpec> specs;
      std::vector<ConditionSet> targets;
      if (fs::exists(tpath)) {
        json side = read_json(tpath);
        specs = side.at("specs").get<std::vector<ConditionSpec>>();
        for (const auto &c : side.at("conditions")) targets.push_back(conditions_from_json(c, specs));
        if (targets.size() != gen.size()) throw LengthMismatch("sidecar and SMILES counts differ");
      }
      Oracle oracle;
      if (oracle_kind == "exact") {
        oracle = exact_oracle_for(specs, vocab);
      } else if (oracle_kind == "knn") {
        if (!train_ds) throw SchemaError("the knn oracle needs --train");
        std::vector<KnnOracle> fitted;
        for (const auto &s : specs) {
          int col = train_ds->spec_index(s.name);
          if (col < 0) throw CompatibilityError("training set lacks condition '" + s.name + "'");
          std::vector<MolecularGraph> mols;
          std::vector<double> vals;
          for (int i : train_ds->splits.train) {
            auto v = train_ds->records[i].conditions.values[col];
            if (!v) continue;
            mols.push_back(parse_smiles(train_ds->records[i].smiles, vocab));
            vals.push_back(*v);
          }
          fitted.push_back(knn_fit(mols, vals, std::min<int>(knn_k, static_cast<int>(mols.size())),
                                   !s.numeric(), vocab));
        }
        oracle = [fitted](int i, const MolecularGraph &g) -> std::optional<double> {
          if (g.empty()) return std::nullopt;
          return knn_predict(fitted.at(i), g);
        };
      } else {
        throw SchemaError("unknown oracle '" + oracle_kind + "'");
      }
      MetricsReport r = evaluate(gen, ref, train_mols, targets, specs, oracle, vocab, oracle_kind);
      json j = to_json(r);
      j["unparsed"] = bad;
      fs::create_directories(outp);
      write_json(outp / "metrics.json", j);
      write_run_file(outp, "eval",
                     {{"gen", gen_path}, {"targets", tpath.string()}, {"ref", ref_path}, {"train", train_path},
                      {"oracle", oracle_kind}, {"knn_k", knn_k}});
      out << j.dump(2) << "\n";
    } else if (*noisec) {
      Dataset d = load_dataset_bundle(dataset_path);
      Marginals marg = estimate_marginals(d);
      NoiseSchedule sched = cosine_schedule(T);
      const int t = t_opt ? *t_opt : T;
      if (t < 0 || t > T) throw RangeError("--t must lie in [0, T]");
      if (n_samples < 1) throw RangeError("--samples must be >= 1");
      CouplingMode cm = coupling_from_string(coupling);
      TransitionBlocks blocks = build_blocks(marg, sched.cumulative(t), cm);
      std::vector<GraphTokens> xs;
      for (int k = 0; k < n_samples; ++k) {
        const auto &rec = d.records[d.splits.train[k % d.splits.train.size()]];
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
        xs.push_back(forward_jump_sample(to_tokens(rec.graph, d.vocab, d.n_max), blocks, lambda, rng));
      }
      TokenHistogram h = token_histogram(xs, d.vocab.size());
      json j;
      j["T"] = T;
      j["t"] = t;
      j["abar_t"] = sched.cumulative(t);
      j["lambda_couple"] = lambda;
      j["coupling_mode"] = coupling;
      j["samples"] = n_samples;
      j["marginals"] = to_json(marg, d.vocab);
      j["empirical"] = {{"nodes", h.nodes}, {"edges", h.edges}};
      j["tv"] = {{"nodes", total_variation(h.nodes, marg.m_v)}, {"edges", total_variation(h.edges, marg.m_e)}};
      j["schedule"] = to_json(sched);
      if (!out_dir.empty()) {
        fs::create_directories(outp);
        write_json(outp / "noise.json", j);
        write_run_file(outp, "noise-inspect",
                       {{"dataset", dataset_path}, {"t", t}, {"T", T}, {"samples", n_samples},
                        {"lambda", lambda}, {"coupling", coupling}, {"seed", seed}});
      }
      out << "tv_nodes " << j["tv"]["nodes"].get<double>() << " tv_edges " << j["tv"]["edges"].get<double>()
          << "\n";
    } else if (*rankc) {
      Model mm = load_model(multi);
      std::vector<Model> sm;
      for (const auto &p : singles) sm.push_back(load_model(p));
      std::vector<const Model *> sp;
      for (const auto &m : sm) sp.push_back(&m);
      Dataset d = load_dataset_bundle(dataset_path);
      std::vector<std::string> names;
      for (const auto &s : mm.specs()) names.push_back(s.name);
      Dataset dm = with_conditions(d, names);
      std::vector<ConditionSet> cs;
      const auto &test = dm.splits.test.empty() ? dm.splits.train : dm.splits.test;
      for (int k = 0; k < cases && k < static_cast<int>(test.size()); ++k) cs.push_back(dm.records[test[k]].conditions);
      RankConfig rc;
      rc.n_per_condition = per_condition;
      rc.s_guide = s_guide;
      rc.seed = seed;
      rc.threads = threads;
      RankResult r = rank_experiment(sp, mm, cs, exact_oracle_for(mm.specs(), mm.vocab), rc);
      fs::create_directories(outp);
      write_json(outp / "rank.json", to_json(r));
      write_run_file(outp, "rank",
                     {{"single_ckpts", singles}, {"multi_ckpt", multi}, {"dataset", dataset_path},
                      {"cases", cases}, {"n_per_condition", per_condition}, {"s_guide", s_guide}, {"seed", seed}});
      out << to_json(r).dump(2) << "\n";
    } else if (*gradc) {
      ToySpec ts;
      ts.n_molecules = 4;
      ts.max_atoms = 5;
      ts.seed = seed;
      Dataset d = gen_toy_dataset(ts);
      DenoiserConfig cfg;
      cfg.D = 8;
      cfg.n_layers = 2;
      cfg.n_heads = 2;
      cfg.K = 4;
      cfg.mode = cond_mode_from_string(mode);
      Model m = make_model(d, cfg, NoiseConfig{}, seed);
      // zero-initialized heads make many gradients trivially zero
      Rng prng(derive_seed(seed, 0x6C));
      for (const auto &name : m.params.names()) {
        for (double &v : m.params.get_mut(name).data) v += 0.3 * (2.0 * prng.uniform() - 1.0);
      }
      GraphTokens x0 = to_tokens(d.records[0].graph, d.vocab, d.n_max);
      Rng rng(derive_seed(seed, 0x6D));
      GraphTokens xt = forward_jump_sample(x0, build_blocks(m.marginals, m.schedule.cumulative(100)), 1.0, rng);
      const ConditionSet c = d.records[0].conditions;
      double e = grad_check_params(
          [&](Tape &tape, const ParamStore &p) { return token_loss(denoise(tape, p, m.cfg, xt, c, 100), x0); },
          m.params, 1e-5, 4);
      out << "max_rel_err " << e << "\n";
      return e < 1e-4 ? kExitOk : kExitNumeric;
    } else if (*ablatec) {
      RunConfig cfg = load_run_config(config_path);
      Dataset d = resolve_dataset(cfg, fs::path(config_path).parent_path());
      auto rows = run_ablation(cfg, d, ab_epochs ? *ab_epochs : cfg.train.epochs, ab_samples, threads);
      json j = json::array();
      for (const auto &r : rows) j.push_back(to_json(r));
      fs::create_directories(outp);
      write_json(outp / "ablation.json", j);
      write_text(outp / "ablation.txt", ablation_table(rows));
      json resolved = to_json(cfg);
      resolved["ablation_epochs"] = ab_epochs ? *ab_epochs : cfg.train.epochs;
      resolved["ablation_samples"] = ab_samples;
      write_run_file(outp, "ablate", resolved);
      out << ablation_table(rows);
      for (const auto &r : rows) {
        if (!r.finite) return kExitNumeric;
      }
    }
    return kExitOk;
  } catch (const CompatibilityError &e) {
    err << "error: " << e.what() << "\n";
    return kExitCompat;
  } catch (const NumericError &e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error &e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const json::exception &e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error &e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  std::vector<const char *> argv;
  argv.push_back("graphdiff");
  for (const auto &a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace graphdiff
